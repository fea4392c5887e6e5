//! Expands a sweep over losses, settings and seeds and prints the mean mAP
//! table. One setting tag is deliberately invalid to show a failed cell.
//!
//! cargo run --release --example sweep_table

use palm::experiment::{run_sweep, ReportFormat, SweepManifest};

const SWEEP: &str = r#"
seed = 0
output_dir = "target/palm-example-sweep"

[dataset]
kind = "synthetic"
n_instances = 800
n_test = 200
n_features = 16
n_classes = 8
mean_positives_per_instance = 2.0

[mask]
setting = "FAL"

[train]
epochs = 8

[sweep]
loss_kinds = ["PROPOSED", "AN", "WAN"]
settings = ["PAL_0.3", "PPL_0.3", "SPL", "PAL_oops"]
seeds = [1, 2]
"#;

fn main() -> palm::Result<()> {
    let sweep: SweepManifest = toml::from_str(SWEEP).expect("sweep manifest parses");
    let table = run_sweep(&sweep.expand())?;
    print!("{}", table.render(ReportFormat::Md));
    println!("{} failed runs", table.failures());
    Ok(())
}
