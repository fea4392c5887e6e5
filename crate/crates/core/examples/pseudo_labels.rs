//! Pseudo-labels live only on missing entries, start at 0.5 and are
//! overwritten by model predictions after each epoch.
//!
//! cargo run --example pseudo_labels

use palm::dataset::{apply_mask, generate_synthetic, MaskSpec, Setting, SyntheticSpec};
use palm::{ModelConfig, TrainConfig, Trainer};

fn main() -> palm::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec {
        n_instances: 400,
        n_features: 12,
        n_classes: 6,
        mean_positives_per_instance: 2.0,
        noise_scale: 0.8,
        seed: 3,
    })?;
    let z = apply_mask(ds.labels(), &MaskSpec::new(Setting::Pal, 0.4, 3))?;
    let cfg = TrainConfig {
        base_lr: 1.0,
        ..TrainConfig::default().with_epochs(5)
    };
    let mut trainer = Trainer::new(ds.features(), &z, None, &ModelConfig::linear(12, 6, 3), cfg)?;

    let summary = |t: &Trainer| {
        let store = t.pseudo().expect("proposed loss keeps a store");
        let (mut on_pos, mut n_pos, mut on_neg, mut n_neg) = (0.0, 0, 0.0, 0);
        for (i, j, v) in store.iter() {
            if ds.labels()[[i, j]] {
                on_pos += v;
                n_pos += 1;
            } else {
                on_neg += v;
                n_neg += 1;
            }
        }
        format!(
            "{} entries; mean on hidden positives {:.3}, on hidden negatives {:.3}",
            store.len(),
            on_pos / n_pos as f64,
            on_neg / n_neg as f64
        )
    };
    println!("init     {}", summary(&trainer));
    while !trainer.is_finished() {
        let r = trainer.run_epoch()?;
        println!("epoch {}  {}", r.epoch, summary(&trainer));
    }

    let mut csv = Vec::new();
    trainer.pseudo().unwrap().write_csv(&mut csv)?;
    let text = String::from_utf8(csv).unwrap();
    println!("\nfirst CSV lines:\n{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
