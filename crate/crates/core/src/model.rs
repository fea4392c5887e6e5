//! Small dense multi-label classifiers with sigmoid outputs.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    /// Affine map from features to logits.
    #[default]
    Linear,
    /// One tanh hidden layer.
    Mlp1,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Linear => "linear",
            Arch::Mlp1 => "mlp1",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Arch::Linear),
            "mlp1" => Ok(Arch::Mlp1),
            other => Err(Error::validation("arch", format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    /// Ignored for [`Arch::Linear`].
    pub hidden_dim: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub init_seed: u64,
    /// Half-width of the uniform init. `None` uses `1 / sqrt(fan_in)` per layer.
    pub init_scale: Option<f64>,
}

impl ModelConfig {
    pub fn linear(input_dim: usize, output_dim: usize, init_seed: u64) -> Self {
        Self {
            arch: Arch::Linear,
            hidden_dim: 0,
            input_dim,
            output_dim,
            init_seed,
            init_scale: None,
        }
    }

    pub fn mlp1(input_dim: usize, hidden_dim: usize, output_dim: usize, init_seed: u64) -> Self {
        Self {
            arch: Arch::Mlp1,
            hidden_dim,
            input_dim,
            output_dim,
            init_seed,
            init_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::validation("input_dim", "must be positive"));
        }
        if self.output_dim == 0 {
            return Err(Error::validation("output_dim", "must be positive"));
        }
        if self.arch == Arch::Mlp1 && self.hidden_dim == 0 {
            return Err(Error::validation("hidden_dim", "must be positive for mlp1"));
        }
        if let Some(s) = self.init_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::validation("init_scale", format!("must be finite and > 0, got {s}")));
            }
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        match self.arch {
            Arch::Linear => vec![(self.input_dim, self.output_dim)],
            Arch::Mlp1 => vec![
                (self.input_dim, self.hidden_dim),
                (self.hidden_dim, self.output_dim),
            ],
        }
    }
}

/// `x · weight + bias`, with `weight` stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }
}

/// Weights of a model. Also used to hold gradients and momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Arch,
    pub layers: Vec<Dense>,
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub logits: Array2<f64>,
    pub predictions: Array2<f64>,
    hidden: Option<Array2<f64>>,
}

impl ModelParams {
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(config.init_seed);
        let layers = config
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let s = config.init_scale.unwrap_or(1.0 / (fan_in as f64).sqrt());
                Dense {
                    weight: Array2::from_shape_simple_fn((fan_in, fan_out), || rng.gen_range(-s..=s)),
                    bias: Array1::from_shape_simple_fn(fan_out, || rng.gen_range(-s..=s)),
                }
            })
            .collect();
        Ok(Self {
            arch: config.arch,
            layers,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            arch: self.arch,
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weight.nrows(), l.weight.ncols()))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.ncols()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer: weights row-major, then bias.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weight.iter().chain(l.bias.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
    }

    fn check_input(&self, features: &Array2<f64>) -> Result<()> {
        if features.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.input_dim(),
                features.ncols()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, features: &Array2<f64>) -> Result<Forward> {
        self.check_input(features)?;
        Ok(match self.arch {
            Arch::Linear => {
                let logits = self.layers[0].apply(features);
                let predictions = logits.mapv(sigmoid);
                Forward {
                    logits,
                    predictions,
                    hidden: None,
                }
            }
            Arch::Mlp1 => {
                let hidden = self.layers[0].apply(features).mapv(f64::tanh);
                let logits = self.layers[1].apply(&hidden);
                let predictions = logits.mapv(sigmoid);
                Forward {
                    logits,
                    predictions,
                    hidden: Some(hidden),
                }
            }
        })
    }

    /// Sigmoid outputs only.
    pub fn predict(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(features)?.predictions)
    }

    /// Parameter gradients given `∂loss/∂logits`.
    ///
    /// The upstream gradient is used as-is: `∂loss/∂W = xᵀ · grad` with no
    /// extra `1 / B`, because the losses already average over the batch.
    pub fn backward(&self, features: &Array2<f64>, grad_logits: &Array2<f64>) -> Result<ModelParams> {
        let fwd = self.forward(features)?;
        self.backward_from(features, &fwd, grad_logits)
    }

    pub fn backward_from(
        &self,
        features: &Array2<f64>,
        fwd: &Forward,
        grad_logits: &Array2<f64>,
    ) -> Result<ModelParams> {
        self.check_input(features)?;
        if grad_logits.dim() != fwd.logits.dim() {
            return Err(Error::Shape(format!(
                "gradient {:?} vs logits {:?}",
                grad_logits.dim(),
                fwd.logits.dim()
            )));
        }
        let layers = match (self.arch, &fwd.hidden) {
            (Arch::Linear, _) => vec![Dense {
                weight: features.t().dot(grad_logits),
                bias: grad_logits.sum_axis(Axis(0)),
            }],
            (Arch::Mlp1, Some(hidden)) => {
                let out = Dense {
                    weight: hidden.t().dot(grad_logits),
                    bias: grad_logits.sum_axis(Axis(0)),
                };
                let mut grad_hidden = grad_logits.dot(&self.layers[1].weight.t());
                Zip::from(&mut grad_hidden)
                    .and(hidden)
                    .for_each(|g, &h| *g *= 1.0 - h * h);
                let inner = Dense {
                    weight: features.t().dot(&grad_hidden),
                    bias: grad_hidden.sum_axis(Axis(0)),
                };
                vec![inner, out]
            }
            (Arch::Mlp1, None) => {
                return Err(Error::Shape("forward cache lacks hidden activations".into()))
            }
        };
        Ok(ModelParams {
            arch: self.arch,
            layers,
        })
    }

    /// Writes a text checkpoint: a header with the architecture and layer
    /// shapes, then each layer's weights one row per line followed by its bias.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "palm-checkpoint 1")?;
        writeln!(w, "arch {}", self.arch)?;
        writeln!(w, "layers {}", self.layers.len())?;
        let join = |it: &mut dyn Iterator<Item = &f64>| {
            it.map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
        };
        for layer in &self.layers {
            writeln!(w, "dense {} {}", layer.weight.nrows(), layer.weight.ncols())?;
            for row in layer.weight.outer_iter() {
                writeln!(w, "{}", join(&mut row.iter()))?;
            }
            writeln!(w, "{}", join(&mut layer.bias.iter()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l?)),
                None => Err(Error::Parse {
                    line: 0,
                    message: format!("unexpected end of checkpoint, expected {what}"),
                }),
            }
        };
        let bad = |line: usize, message: String| Error::Parse { line, message };

        let (ln, magic) = next("header")?;
        if magic.trim() != "palm-checkpoint 1" {
            return Err(bad(ln, format!("not a checkpoint: {magic:?}")));
        }
        let (ln, arch) = next("arch")?;
        let arch: Arch = arch
            .strip_prefix("arch ")
            .ok_or_else(|| bad(ln, "expected `arch NAME`".into()))?
            .trim()
            .parse()?;
        let (ln, count) = next("layer count")?;
        let count: usize = count
            .strip_prefix("layers ")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| bad(ln, "expected `layers N`".into()))?;
        let expected = match arch {
            Arch::Linear => 1,
            Arch::Mlp1 => 2,
        };
        if count != expected {
            return Err(Error::Shape(format!("{arch} has {expected} layers, checkpoint has {count}")));
        }

        let parse_row = |ln: usize, text: &str, width: usize| -> Result<Vec<f64>> {
            let vals: Vec<f64> = text
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(ln, format!("bad number {t:?}"))))
                .collect::<Result<_>>()?;
            if vals.len() != width {
                return Err(Error::Shape(format!("line {ln}: expected {width} values, found {}", vals.len())));
            }
            Ok(vals)
        };

        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, head) = next("dense header")?;
            let dims: Vec<usize> = head
                .strip_prefix("dense ")
                .map(|d| d.split_whitespace().filter_map(|t| t.parse().ok()).collect())
                .unwrap_or_default();
            let [fan_in, fan_out] = dims[..] else {
                return Err(bad(ln, "expected `dense IN OUT`".into()));
            };
            let mut weight = Array2::zeros((fan_in, fan_out));
            for r in 0..fan_in {
                let (ln, text) = next("weight row")?;
                let row = parse_row(ln, &text, fan_out)?;
                weight.row_mut(r).assign(&Array1::from(row));
            }
            let (ln, text) = next("bias")?;
            let bias = Array1::from(parse_row(ln, &text, fan_out)?);
            layers.push(Dense { weight, bias });
        }
        if layers.windows(2).any(|w| w[0].weight.ncols() != w[1].weight.nrows()) {
            return Err(Error::Shape("consecutive layer shapes do not chain".into()));
        }
        let params = ModelParams { arch, layers };
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("checkpoint holds non-finite weights".into()));
        }
        Ok(params)
    }
}

/// Mini-batch SGD with classic momentum:
/// `v ← μ·v + g`, `θ ← θ − lr·v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    velocity: ModelParams,
}

impl Sgd {
    pub fn new(params: &ModelParams, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::validation("momentum", format!("must lie in [0, 1), got {momentum}")));
        }
        Ok(Self {
            momentum,
            velocity: params.zeros_like(),
        })
    }

    pub fn velocity(&self) -> &ModelParams {
        &self.velocity
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) -> Result<()> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::validation("lr", format!("must be finite and >= 0, got {lr}")));
        }
        if grads.n_params() != params.n_params() {
            return Err(Error::Shape("gradient and parameter shapes differ".into()));
        }
        if let Some(pos) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("gradient entry {pos} is not finite")));
        }
        let mu = self.momentum;
        for ((p, v), &g) in params
            .iter_mut()
            .zip(self.velocity.iter_mut())
            .zip(grads.iter())
        {
            *v = mu * *v + g;
            *p -= lr * *v;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{final_loss, BatchView, LossConfig};
    use crate::dataset::Label;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_input(rng: &mut ChaCha8Rng, b: usize, m: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((b, m), || rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn zero_linear_model_predicts_half() {
        let mut p = ModelParams::init(&ModelConfig::linear(3, 2, 0)).unwrap();
        p.iter_mut().for_each(|v| *v = 0.0);
        let out = p.forward(&array![[1.0, -2.0, 3.0]]).unwrap();
        assert!(out.predictions.iter().all(|&y| y == 0.5));
    }

    #[test]
    fn sigmoid_is_monotone() {
        let xs = [-30.0, -5.0, 0.0, 0.5, 5.0, 30.0];
        let ys: Vec<f64> = xs.iter().map(|&x| sigmoid(x)).collect();
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(ys.windows(2).all(|w| w[1] > w[0]));
        assert!(ys.iter().all(|&y| y > 0.0 && y < 1.0));
    }

    #[test]
    fn forward_is_pure_and_checks_shape() {
        let p = ModelParams::init(&ModelConfig::mlp1(4, 5, 3, 9)).unwrap();
        let x = random_input(&mut ChaCha8Rng::seed_from_u64(1), 6, 4);
        assert_eq!(p.forward(&x).unwrap().logits, p.forward(&x).unwrap().logits);
        assert!(matches!(p.forward(&array![[1.0, 2.0]]), Err(Error::Shape(_))));
    }

    #[test]
    fn init_is_bounded_by_fan_in() {
        let p = ModelParams::init(&ModelConfig::mlp1(16, 9, 3, 2)).unwrap();
        assert!(p.layers[0].weight.iter().all(|w| w.abs() <= 0.25));
        assert!(p.layers[1].weight.iter().all(|w| w.abs() <= 1.0 / 3.0));
        assert_eq!(p, ModelParams::init(&ModelConfig::mlp1(16, 9, 3, 2)).unwrap());
    }

    #[test]
    fn zero_upstream_gradient() {
        let p = ModelParams::init(&ModelConfig::mlp1(4, 5, 3, 9)).unwrap();
        let x = random_input(&mut ChaCha8Rng::seed_from_u64(1), 6, 4);
        let g = p.backward(&x, &Array2::zeros((6, 3))).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_weight_gradient_is_xt_times_upstream() {
        let p = ModelParams::init(&ModelConfig::linear(2, 2, 0)).unwrap();
        let x = array![[1.0, 2.0], [3.0, -1.0]];
        let up = array![[0.5, -1.0], [0.25, 2.0]];
        let g = p.backward(&x, &up).unwrap();
        assert_eq!(g.layers[0].weight, x.t().dot(&up));
        assert_eq!(g.layers[0].bias, array![0.75, 1.0]);
    }

    /// Balanced-loss value as a function of the parameters.
    fn loss_of(p: &ModelParams, x: &Array2<f64>, batch: &BatchView, cfg: &LossConfig) -> f64 {
        let b = BatchView {
            predictions: p.predict(x).unwrap(),
            ..batch.clone()
        };
        final_loss(&b, cfg).unwrap().value
    }

    #[test]
    fn end_to_end_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = LossConfig {
            total_epochs: 10,
            q_fraction: 1.0,
            penalty: false,
            ..LossConfig::default()
        };
        for config in [ModelConfig::linear(5, 4, 1), ModelConfig::mlp1(5, 6, 4, 2)] {
            let p = ModelParams::init(&config).unwrap();
            let x = random_input(&mut rng, 3, 5);
            let observed = Array2::from_shape_fn((3, 4), |(i, j)| {
                [Label::Pos, Label::Neg, Label::Missing][(i + 2 * j) % 3]
            });
            let batch = BatchView {
                predictions: p.predict(&x).unwrap(),
                observed,
                pseudo: Array2::from_shape_simple_fn((3, 4), || rng.gen()),
                picked: None,
                epoch: 2,
            };
            let out = final_loss(&batch, &cfg).unwrap();
            let analytic = p.backward(&x, &out.grad_wrt_logits).unwrap();
            let h = 1e-5;
            for (k, &an) in analytic.iter().enumerate() {
                let mut up = p.clone();
                *up.iter_mut().nth(k).unwrap() += h;
                let mut down = p.clone();
                *down.iter_mut().nth(k).unwrap() -= h;
                let fd = (loss_of(&up, &x, &batch, &cfg) - loss_of(&down, &x, &batch, &cfg)) / (2.0 * h);
                let scale = an.abs().max(fd.abs()).max(1e-8);
                assert!((an - fd).abs() / scale < 1e-5, "{:?} param {k}: {an} vs {fd}", config.arch);
            }
        }
    }

    #[test]
    fn sgd_without_momentum() {
        let mut p = ModelParams::init(&ModelConfig::linear(2, 1, 0)).unwrap();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.iter_mut().enumerate().for_each(|(k, v)| *v = k as f64);
        let mut opt = Sgd::new(&p, 0.0).unwrap();
        opt.step(&mut p, &g, 0.5).unwrap();
        for ((a, b), gk) in p.iter().zip(before.iter()).zip(g.iter()) {
            assert_eq!(*a, b - 0.5 * gk);
        }
        opt.step(&mut p, &g, 0.0).unwrap();
        let frozen = p.clone();
        opt.step(&mut p, &g, 0.0).unwrap();
        assert_eq!(p, frozen);
    }

    #[test]
    fn sgd_momentum_two_steps() {
        let mut p = ModelParams::init(&ModelConfig::linear(1, 1, 0)).unwrap();
        p.iter_mut().for_each(|v| *v = 1.0);
        let mut g = p.zeros_like();
        g.iter_mut().for_each(|v| *v = 0.5);
        let mut opt = Sgd::new(&p, 0.9).unwrap();
        opt.step(&mut p, &g, 0.1).unwrap();
        opt.step(&mut p, &g, 0.1).unwrap();
        // v1 = 0.5, θ1 = 0.95; v2 = 0.9·0.5 + 0.5 = 0.95, θ2 = 0.95 − 0.095 = 0.855
        for v in p.iter() {
            assert!((v - 0.855).abs() < 1e-15);
        }
    }

    #[test]
    fn sgd_rejects_bad_inputs() {
        let mut p = ModelParams::init(&ModelConfig::linear(1, 1, 0)).unwrap();
        assert!(Sgd::new(&p, 1.0).is_err());
        let mut g = p.zeros_like();
        *g.iter_mut().next().unwrap() = f64::NAN;
        let mut opt = Sgd::new(&p, 0.0).unwrap();
        assert!(matches!(opt.step(&mut p, &g, 0.1), Err(Error::Numeric(_))));
    }

    #[test]
    fn checkpoint_round_trip() {
        for config in [ModelConfig::linear(3, 4, 7), ModelConfig::mlp1(3, 5, 2, 8)] {
            let p = ModelParams::init(&config).unwrap();
            let mut buf = Vec::new();
            p.write_checkpoint(&mut buf).unwrap();
            let back = ModelParams::read_checkpoint(&buf[..]).unwrap();
            assert_eq!(back, p);
        }
    }

    #[test]
    fn checkpoint_errors() {
        assert!(ModelParams::read_checkpoint("nope\n".as_bytes()).is_err());
        let text = "palm-checkpoint 1\narch linear\nlayers 1\ndense 1 2\n0.5\n0 0\n";
        assert!(matches!(ModelParams::read_checkpoint(text.as_bytes()), Err(Error::Shape(_))));
    }
}
