//! Generates a small synthetic dataset and shows what each annotation
//! setting keeps.
//!
//! cargo run --example masking

use palm::dataset::{apply_mask, generate_synthetic, Label, MaskSpec, Setting, SyntheticSpec};

fn main() -> palm::Result<()> {
    let ds = generate_synthetic(&SyntheticSpec {
        n_instances: 6,
        n_features: 4,
        n_classes: 8,
        mean_positives_per_instance: 2.5,
        noise_scale: 1.0,
        seed: 42,
    })?;
    println!("{} rows, {:.2} positives per row", ds.n_instances(), ds.mean_positives());

    let full = ds.full_label_matrix();
    let show = |name: &str, z: &palm::LabelMatrix| {
        println!("\n{name}");
        for row in z.entries().rows() {
            println!("  {}", row.iter().map(|l| l.token().to_string()).collect::<Vec<_>>().join(" "));
        }
        println!("  missing: {}", z.count(Label::Missing));
    };
    show("full", &full);
    for spec in [
        MaskSpec::new(Setting::Pal, 0.5, 1),
        MaskSpec::new(Setting::Ppl, 0.5, 1),
        MaskSpec::new(Setting::Spl, 1.0, 1),
    ] {
        show(&spec.label(), &apply_mask(ds.labels(), &spec)?);
    }
    Ok(())
}
