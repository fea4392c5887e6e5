//! Library-level integration: trainer equivalences, file round-trips and sweeps.

use palm::dataset::{apply_mask, MaskSpec, Setting};
use palm::experiment::{run_experiment, run_sweep, Cell, DatasetSource, ExperimentManifest, MaskSection};
use palm::format::{load_masked, save_masked, MaskedDataset};
use palm::{generate_synthetic, train, LossKind, ModelConfig, SyntheticSpec, TrainConfig};

fn data(seed: u64) -> palm::Dataset {
    generate_synthetic(&SyntheticSpec {
        n_instances: 200,
        n_features: 6,
        n_classes: 5,
        mean_positives_per_instance: 2.0,
        noise_scale: 0.7,
        seed,
    })
    .unwrap()
}

#[test]
fn balanced_loss_at_half_weight_tracks_plain_bce_at_double_rate() {
    // Fully labeled, β forced to 0.5, no penalty: the proposed loss is half of
    // BCE, so doubling the learning rate reproduces the BCE trajectory.
    let ds = data(1);
    let z = apply_mask(ds.labels(), &MaskSpec::new(Setting::Fal, 1.0, 0)).unwrap();
    let model = ModelConfig::linear(6, 5, 9);
    let mut bce = TrainConfig::default().with_epochs(6);
    bce.loss_kind = LossKind::BceFull;
    bce.seed = 4;
    let mut ours = bce;
    ours.loss_kind = LossKind::Proposed;
    ours.base_lr = 2.0 * bce.base_lr;
    ours.loss.beta_override = Some(0.5);
    ours.loss.m = 0;
    ours.loss.q_fraction = 1.0;
    ours.loss.penalty = false;

    let a = train(ds.features(), &z, None, &model, bce).unwrap();
    let b = train(ds.features(), &z, None, &model, ours).unwrap();
    let mut worst: f64 = 0.0;
    for (x, y) in a.params.iter().zip(b.params.iter()) {
        worst = worst.max((x - y).abs());
    }
    assert!(worst < 1e-10, "parameter drift {worst:e}");
    for (ra, rb) in a.reports.iter().zip(&b.reports) {
        assert!((ra.mean_loss - 2.0 * rb.mean_loss).abs() < 1e-10);
    }
}

#[test]
fn training_is_deterministic_per_seed_and_varies_across_seeds() {
    let ds = data(2);
    let z = apply_mask(ds.labels(), &MaskSpec::new(Setting::Ppl, 0.5, 1)).unwrap();
    let model = ModelConfig::mlp1(6, 8, 5, 3);
    let run = |seed| {
        let mut c = TrainConfig::default().with_epochs(4);
        c.seed = seed;
        train(ds.features(), &z, Some(&ds), &model, c).unwrap()
    };
    let (a, b, c) = (run(1), run(1), run(2));
    assert_eq!(a.reports, b.reports);
    assert_ne!(a.reports, c.reports);
}

#[test]
fn masked_file_round_trip_preserves_missing_entries() {
    let ds = data(3);
    let z = apply_mask(ds.labels(), &MaskSpec::new(Setting::Spl, 1.0, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spl.txt");
    let masked = MaskedDataset {
        features: ds.features().clone(),
        labels: z.clone(),
    };
    save_masked(&masked, &path).unwrap();
    let back = load_masked(&path).unwrap();
    assert_eq!(back.labels, z);
    assert_eq!(&back.features, ds.features());
}

fn small_manifest(dir: &std::path::Path) -> ExperimentManifest {
    let mut m: ExperimentManifest = ExperimentManifest::from_toml(&format!(
        "seed = 5\noutput_dir = \"{}\"\n[dataset]\nkind = \"synthetic\"\nn_instances = 200\nn_test = 50\n\
         n_features = 6\nn_classes = 5\nmean_positives_per_instance = 2.0\n[mask]\nsetting = \"PAL\"\nkeep_fraction = 0.5\n",
        dir.join("one").display()
    ))
    .unwrap();
    m.train.epochs = 4;
    m
}

#[test]
fn single_run_sweep_matches_the_run_summary() {
    let dir = tempfile::tempdir().unwrap();
    let m = small_manifest(dir.path());
    let direct = run_experiment(&m).unwrap();
    let table = run_sweep(std::slice::from_ref(&m)).unwrap();
    assert_eq!(table.failures(), 0);
    assert_eq!(table.cell(LossKind::Proposed, "PAL_0.5"), Some(&Cell::Mean(direct.summary.map)));
}

#[test]
fn a_broken_run_fails_only_its_own_cell() {
    let dir = tempfile::tempdir().unwrap();
    let good = small_manifest(dir.path());
    let mut bad = good.clone();
    bad.output_dir = dir.path().join("bad");
    bad.mask = MaskSection {
        setting: Setting::Ppl,
        keep_fraction: 0.5,
    };
    bad.dataset = DatasetSource::File {
        train: dir.path().join("absent-train.txt"),
        test: dir.path().join("absent-test.txt"),
    };
    let table = run_sweep(&[good, bad]).unwrap();
    assert_eq!(table.failures(), 1);
    assert!(matches!(table.cell(LossKind::Proposed, "PAL_0.5"), Some(Cell::Mean(_))));
    assert!(matches!(table.cell(LossKind::Proposed, "PPL_0.5"), Some(Cell::Failed(_))));
}
