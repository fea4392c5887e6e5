//! Compares analytic gradients with central differences, both at the loss
//! (logits) and through the model (parameters).
//!
//! cargo run --example gradient_check

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use palm::dataset::Label;
use palm::loss::{final_loss, sigmoid, BatchView, LossConfig};
use palm::{ModelConfig, ModelParams};

const H: f64 = 1e-5;

fn main() -> palm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (b, d_in, l) = (4, 5, 6);
    let x = Array2::from_shape_fn((b, d_in), |_| rng.gen_range(-1.0..1.0));
    let observed = Array2::from_shape_fn((b, l), |_| [Label::Pos, Label::Neg, Label::Missing][rng.gen_range(0..3)]);
    let pseudo = Array2::from_shape_fn((b, l), |_| rng.gen::<f64>());
    let cfg = LossConfig {
        total_epochs: 10,
        penalty: false,
        ..LossConfig::default()
    };
    let batch_for = |preds: Array2<f64>| BatchView {
        predictions: preds,
        observed: observed.clone(),
        pseudo: pseudo.clone(),
        picked: None,
        epoch: 1,
    };

    // Loss level.
    let logits = Array2::from_shape_fn((b, l), |_| rng.gen_range(-3.0..3.0));
    let out = final_loss(&batch_for(logits.mapv(sigmoid)), &cfg)?;
    let mut worst: f64 = 0.0;
    for ((i, j), &g) in out.grad_wrt_logits.indexed_iter() {
        let f = |delta: f64| {
            let mut s = logits.clone();
            s[[i, j]] += delta;
            final_loss(&batch_for(s.mapv(sigmoid)), &cfg).unwrap().value
        };
        let fd = (f(H) - f(-H)) / (2.0 * H);
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-12));
    }
    println!("loss vs logits: max relative error {worst:.2e}");

    // Model level, through a hidden layer.
    let mut params = ModelParams::init(&ModelConfig::mlp1(d_in, 8, l, 2))?;
    let loss_at = |p: &ModelParams| final_loss(&batch_for(p.predict(&x).unwrap()), &cfg).unwrap();
    let fwd = params.forward(&x)?;
    let grads = params.backward_from(&x, &fwd, &loss_at(&params).grad_wrt_logits)?;
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let mut worst: f64 = 0.0;
    for (k, &g) in analytic.iter().enumerate() {
        let base = *params.iter().nth(k).unwrap();
        *params.iter_mut().nth(k).unwrap() = base + H;
        let up = loss_at(&params).value;
        *params.iter_mut().nth(k).unwrap() = base - H;
        let down = loss_at(&params).value;
        *params.iter_mut().nth(k).unwrap() = base;
        let fd = (up - down) / (2.0 * H);
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-12));
    }
    println!("loss vs {} MLP parameters: max relative error {worst:.2e}", analytic.len());
    Ok(())
}
