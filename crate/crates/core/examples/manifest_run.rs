//! Runs one experiment from a TOML manifest and lists the artifacts.
//!
//! cargo run --release --example manifest_run [manifest.toml]

use palm::experiment::{run_experiment, ExperimentManifest};

const DEFAULT: &str = r#"
seed = 7
output_dir = "target/palm-example-run"
format = "md"
dump_pseudo = true

[dataset]
kind = "synthetic"
n_instances = 1200
n_test = 300
n_features = 16
n_classes = 10
mean_positives_per_instance = 2.0

[mask]
setting = "PPL"
keep_fraction = 0.5

[train]
epochs = 10
loss_kind = "PROPOSED"
"#;

fn main() -> palm::Result<()> {
    let manifest = match std::env::args().nth(1) {
        Some(path) => ExperimentManifest::load(path)?,
        None => ExperimentManifest::from_toml(DEFAULT)?,
    };
    println!("resolved manifest:\n{}", manifest.to_toml());
    let run = run_experiment(&manifest)?;
    for r in &run.reports {
        println!("epoch {:>2}  loss {:.4}  val mAP {:.4}", r.epoch, r.mean_loss, r.val_map.unwrap_or(f64::NAN));
    }
    print!("{}", run.summary.render(manifest.format));
    let mut files: Vec<_> = std::fs::read_dir(&manifest.output_dir)?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("artifacts in {}: {}", manifest.output_dir.display(), files.join(", "));
    Ok(())
}
