//! Evaluates the balanced loss on a hand-made batch and prints every
//! coefficient next to the two baselines.
//!
//! cargo run --example loss_terms

use ndarray::array;
use palm::dataset::Label::{Missing as M, Neg as N, Pos as P};
use palm::loss::{baseline_loss, final_loss, Baseline, BatchView, LossConfig, DEFAULT_EPSILON};

fn main() -> palm::Result<()> {
    let batch = BatchView {
        predictions: array![[0.8, 0.3, 0.6, 0.2], [0.05, 0.04, 0.09, 0.02], [0.7, 0.9, 0.4, 0.1]],
        observed: array![[P, N, M, M], [P, M, M, N], [M, P, N, M]],
        pseudo: array![[0.0, 0.0, 0.7, 0.1], [0.0, 0.5, 0.5, 0.0], [0.6, 0.0, 0.0, 0.3]],
        picked: None,
        epoch: 2,
    };
    let cfg = LossConfig {
        total_epochs: 10,
        ..LossConfig::default()
    };
    let out = final_loss(&batch, &cfg)?;
    println!("alpha {:.3}  beta {:.3}  d {:.4}", out.alpha, out.beta, out.d);
    for (i, (l, p)) in out.row_losses.iter().zip(&out.p_per_row).enumerate() {
        println!("row {i}: loss {l:.4}  p {p}");
    }
    println!("batch loss {:.4}", out.value);
    println!("gradient wrt logits:\n{:.4}", out.grad_wrt_logits);

    for (name, kind) in [("AN", Baseline::AssumeNegative), ("WAN", Baseline::WeightedAssumeNegative)] {
        let b = baseline_loss(kind, &batch, 1.0 / 3.0, DEFAULT_EPSILON)?;
        println!("{name} loss {:.4}", b.value);
    }
    Ok(())
}
