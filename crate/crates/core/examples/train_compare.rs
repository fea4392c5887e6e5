//! Trains the proposed loss and both baselines on the same masked data and
//! prints validation mAP per epoch.
//!
//! cargo run --release --example train_compare [PAL|PPL|SPL] [keep]

use palm::dataset::{apply_mask, generate_synthetic, MaskSpec, Setting, SyntheticSpec};
use palm::{train, LossKind, ModelConfig, TrainConfig};

fn main() -> palm::Result<()> {
    let mut args = std::env::args().skip(1);
    let setting: Setting = args.next().as_deref().unwrap_or("PAL").parse()?;
    let keep: f64 = args.next().map_or(0.3, |s| s.parse().expect("keep fraction"));

    let ds = generate_synthetic(&SyntheticSpec {
        n_instances: 2500,
        n_features: 32,
        n_classes: 20,
        mean_positives_per_instance: 2.5,
        noise_scale: 1.0,
        seed: 1,
    })?;
    let (train_split, test_split) = ds.split_at(2000)?;
    let z = apply_mask(train_split.labels(), &MaskSpec::new(setting, keep, 1))?;
    let model = ModelConfig::linear(32, 20, 1);

    println!("{setting} keep {keep}");
    for kind in [LossKind::Proposed, LossKind::An, LossKind::Wan] {
        let cfg = TrainConfig {
            base_lr: 1.0,
            loss_kind: kind,
            ..TrainConfig::default()
        };
        let out = train(train_split.features(), &z, Some(&test_split), &model, cfg)?;
        let curve: Vec<String> = out
            .reports
            .iter()
            .step_by(4)
            .map(|r| format!("{:.3}", r.val_map.unwrap_or(f64::NAN)))
            .collect();
        let last = out.reports.last().unwrap();
        println!(
            "{kind:>8}: mAP every 4 epochs [{}] final {:.4}  beta {:.3}",
            curve.join(" "),
            last.val_map.unwrap_or(f64::NAN),
            last.beta_mean
        );
    }
    Ok(())
}
