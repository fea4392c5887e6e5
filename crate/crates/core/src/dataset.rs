//! Datasets, observed-label matrices and the one-time masking procedures.
//!
//! A [`Dataset`] carries full ground truth. Training sees a [`LabelMatrix`]
//! derived from it once, before training, by [`apply_mask`].

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Features plus full binary ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Array2<bool>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Array2<bool>) -> Result<Self> {
        let names = default_class_names(labels.ncols());
        Self::with_class_names(features, labels, names)
    }

    pub fn with_class_names(
        features: Array2<f64>,
        labels: Array2<bool>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, m) = features.dim();
        let l = labels.ncols();
        if n == 0 || m == 0 {
            return Err(Error::Shape(format!("need N >= 1 and M >= 1, got {n}x{m}")));
        }
        if l < 2 {
            return Err(Error::Shape(format!("need at least 2 classes, got {l}")));
        }
        if labels.nrows() != n {
            return Err(Error::Shape(format!(
                "{n} feature rows but {} label rows",
                labels.nrows()
            )));
        }
        if class_names.len() != l {
            return Err(Error::Shape(format!(
                "{l} label columns but {} class names",
                class_names.len()
            )));
        }
        if let Some(((i, j), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Numeric(format!("feature ({i}, {j}) is not finite")));
        }
        Ok(Self {
            features,
            labels,
            class_names,
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &Array2<bool> {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.ncols()
    }

    /// Mean number of positive labels per instance.
    pub fn mean_positives(&self) -> f64 {
        self.labels.iter().filter(|&&b| b).count() as f64 / self.n_instances() as f64
    }

    /// Splits into the first `n_first` rows and the rest.
    pub fn split_at(&self, n_first: usize) -> Result<(Dataset, Dataset)> {
        if n_first == 0 || n_first >= self.n_instances() {
            return Err(Error::validation(
                "split",
                format!("cannot split {} rows at {n_first}", self.n_instances()),
            ));
        }
        let head = |a: &Array2<f64>| a.slice(ndarray::s![..n_first, ..]).to_owned();
        let tail = |a: &Array2<f64>| a.slice(ndarray::s![n_first.., ..]).to_owned();
        let first = Dataset {
            features: head(&self.features),
            labels: self.labels.slice(ndarray::s![..n_first, ..]).to_owned(),
            class_names: self.class_names.clone(),
        };
        let second = Dataset {
            features: tail(&self.features),
            labels: self.labels.slice(ndarray::s![n_first.., ..]).to_owned(),
            class_names: self.class_names.clone(),
        };
        Ok((first, second))
    }

    /// Ground truth with nothing hidden (the FAL setting).
    pub fn full_label_matrix(&self) -> LabelMatrix {
        LabelMatrix::from_binary(&self.labels)
    }
}

pub(crate) fn default_class_names(l: usize) -> Vec<String> {
    (0..l).map(|j| format!("c{j}")).collect()
}

/// One observed label slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Label {
    Neg,
    Pos,
    #[default]
    Missing,
}

impl Label {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn is_missing(self) -> bool {
        self == Label::Missing
    }

    /// Text token used in dataset files.
    pub fn token(self) -> char {
        match self {
            Label::Neg => '0',
            Label::Pos => '1',
            Label::Missing => '?',
        }
    }
}

/// Observed labels `z ∈ {0, 1, ∅}^(N×L)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    entries: Array2<Label>,
}

impl LabelMatrix {
    pub fn new(entries: Array2<Label>) -> Self {
        Self { entries }
    }

    pub fn from_binary(labels: &Array2<bool>) -> Self {
        Self {
            entries: labels.mapv(Label::from_bool),
        }
    }

    pub fn entries(&self) -> &Array2<Label> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Label {
        self.entries[[row, col]]
    }

    pub fn row(&self, row: usize) -> ArrayView1<'_, Label> {
        self.entries.row(row)
    }

    pub fn n_rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn count(&self, label: Label) -> usize {
        self.entries.iter().filter(|&&l| l == label).count()
    }

    pub fn has_missing(&self) -> bool {
        self.entries.iter().any(|l| l.is_missing())
    }

    /// Rows `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> LabelMatrix {
        Self {
            entries: self.entries.select(ndarray::Axis(0), rows),
        }
    }
}

/// Missing-label regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Setting {
    /// Fully annotated.
    Fal,
    /// A fraction of labels per row, regardless of sign.
    Pal,
    /// A fraction of the positives per row, no negatives.
    Ppl,
    /// Exactly one positive per row.
    Spl,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Setting::Fal => "FAL",
            Setting::Pal => "PAL",
            Setting::Ppl => "PPL",
            Setting::Spl => "SPL",
        };
        f.write_str(s)
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FAL" => Ok(Setting::Fal),
            "PAL" => Ok(Setting::Pal),
            "PPL" => Ok(Setting::Ppl),
            "SPL" => Ok(Setting::Spl),
            _ => Err(Error::validation(
                "setting",
                format!("unknown setting {s:?}, expected FAL, PAL, PPL or SPL"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub setting: Setting,
    /// Ignored for FAL and SPL.
    #[serde(default = "one")]
    pub keep_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl MaskSpec {
    pub fn new(setting: Setting, keep_fraction: f64, seed: u64) -> Self {
        Self {
            setting,
            keep_fraction,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.keep_fraction;
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::validation(
                "keep_fraction",
                format!("must lie in (0, 1], got {k}"),
            ));
        }
        Ok(())
    }

    /// Short tag such as `PAL_0.3` or `SPL`.
    pub fn label(&self) -> String {
        match self.setting {
            Setting::Pal | Setting::Ppl => format!("{}_{}", self.setting, self.keep_fraction),
            s => s.to_string(),
        }
    }
}

/// Hides labels according to `mask`. Meant to run once per experiment.
pub fn apply_mask(labels: &Array2<bool>, mask: &MaskSpec) -> Result<LabelMatrix> {
    mask.validate()?;
    let (n, l) = labels.dim();
    let mut rng = seed::rng(mask.seed);
    let mut out = Array2::from_elem((n, l), Label::Missing);

    for (i, row) in labels.outer_iter().enumerate() {
        let positives: Vec<usize> = (0..l).filter(|&j| row[j]).collect();
        match mask.setting {
            Setting::Fal => {
                for j in 0..l {
                    out[[i, j]] = Label::from_bool(row[j]);
                }
            }
            Setting::Pal => {
                let keep = round_count(mask.keep_fraction, l);
                for j in index::sample(&mut rng, l, keep) {
                    out[[i, j]] = Label::from_bool(row[j]);
                }
            }
            Setting::Ppl => {
                if positives.is_empty() {
                    return Err(Error::NoPositive { row: i });
                }
                let keep = round_count(mask.keep_fraction, positives.len()).max(1);
                for k in index::sample(&mut rng, positives.len(), keep) {
                    out[[i, positives[k]]] = Label::Pos;
                }
            }
            Setting::Spl => {
                if positives.is_empty() {
                    return Err(Error::NoPositive { row: i });
                }
                let k = rng.gen_range(0..positives.len());
                out[[i, positives[k]]] = Label::Pos;
            }
        }
    }
    Ok(LabelMatrix::new(out))
}

/// `round(fraction * n)` clamped to `[0, n]`.
pub(crate) fn round_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).round() as usize).min(n)
}

/// Parameters of the prototype-mixture generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_instances: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub mean_positives_per_instance: f64,
    #[serde(default = "one")]
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_instances == 0 {
            return Err(Error::validation("n_instances", "must be positive"));
        }
        if self.n_features == 0 {
            return Err(Error::validation("n_features", "must be positive"));
        }
        if self.n_classes < 2 {
            return Err(Error::validation("n_classes", "need at least 2 classes"));
        }
        let mp = self.mean_positives_per_instance;
        if !(mp >= 1.0 && mp < self.n_classes as f64) {
            return Err(Error::validation(
                "mean_positives_per_instance",
                format!("must lie in [1, n_classes) = [1, {}), got {mp}", self.n_classes),
            ));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::validation(
                "noise_scale",
                format!("must be finite and >= 0, got {}", self.noise_scale),
            ));
        }
        Ok(())
    }
}

/// Draws an imbalanced multi-label dataset.
///
/// Each class gets a Gaussian prototype in feature space and a popularity
/// weight decaying as `1 / (k + 1)^0.8`, so head classes are several times
/// more frequent than tail classes. A row draws `1 + Poisson(mean - 1)`
/// positives (capped at `L - 1`), picks them by popularity without
/// replacement, and its features are the sum of those prototypes plus
/// `noise_scale`-scaled Gaussian noise. Every row has at least one positive.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let SyntheticSpec {
        n_instances: n,
        n_features: m,
        n_classes: l,
        ..
    } = *spec;
    let mut rng = seed::rng(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let prototypes = Array2::from_shape_fn((l, m), |_| normal.sample(&mut rng));
    let popularity: Vec<f64> = (0..l).map(|k| 1.0 / ((k + 1) as f64).powf(0.8)).collect();
    let extra = spec.mean_positives_per_instance - 1.0;
    let poisson = (extra > 0.0).then(|| Poisson::new(extra).expect("positive rate"));

    let mut features = Array2::zeros((n, m));
    let mut labels = Array2::from_elem((n, l), false);
    for i in 0..n {
        let drawn = poisson.as_ref().map_or(0.0, |p| p.sample(&mut rng)) as usize;
        let k = (1 + drawn).min(l - 1);

        let mut weights = popularity.clone();
        for _ in 0..k {
            let dist = WeightedIndex::new(&weights).expect("positive weights remain");
            let c = dist.sample(&mut rng);
            weights[c] = 0.0;
            labels[[i, c]] = true;
        }
        for f in 0..m {
            let mut v = spec.noise_scale * normal.sample(&mut rng);
            for c in 0..l {
                if labels[[i, c]] {
                    v += prototypes[[c, f]];
                }
            }
            features[[i, f]] = v;
        }
    }
    Dataset::new(features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spec(mean: f64) -> SyntheticSpec {
        SyntheticSpec {
            n_instances: 1000,
            n_features: 32,
            n_classes: 20,
            mean_positives_per_instance: mean,
            noise_scale: 1.0,
            seed: 7,
        }
    }

    #[test]
    fn synthetic_mean_positives_within_tolerance() {
        let ds = generate_synthetic(&spec(2.5)).unwrap();
        let mean = ds.mean_positives();
        assert!((2.125..=2.875).contains(&mean), "mean positives {mean}");
        assert!(ds.labels().outer_iter().all(|r| r.iter().any(|&b| b)));
    }

    #[test]
    fn synthetic_is_imbalanced() {
        let ds = generate_synthetic(&spec(2.5)).unwrap();
        let counts: Vec<usize> = ds
            .labels()
            .columns()
            .into_iter()
            .map(|c| c.iter().filter(|&&b| b).count())
            .collect();
        assert!(counts[0] > 3 * counts[19], "{counts:?}");
    }

    #[test]
    fn synthetic_rejects_mean_equal_to_classes() {
        let err = generate_synthetic(&spec(20.0)).unwrap_err();
        match err {
            Error::Validation { field, .. } => assert_eq!(field, "mean_positives_per_instance"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(&spec(2.5)).unwrap();
        let b = generate_synthetic(&spec(2.5)).unwrap();
        assert_eq!(a, b);
        let mut other = spec(2.5);
        other.seed = 8;
        assert_ne!(a, generate_synthetic(&other).unwrap());
    }

    #[test]
    fn spl_keeps_one_of_the_positives() {
        let y = array![[true, false, true]];
        for s in 0..50 {
            let z = apply_mask(&y, &MaskSpec::new(Setting::Spl, 1.0, s)).unwrap();
            assert_eq!(z.get(0, 1), Label::Missing);
            let kept: Vec<_> = z.row(0).iter().copied().collect();
            assert!(
                kept == [Label::Pos, Label::Missing, Label::Missing]
                    || kept == [Label::Missing, Label::Missing, Label::Pos]
            );
        }
    }

    #[test]
    fn pal_retains_exact_count() {
        let y = array![[true, false, true, false]];
        let z = apply_mask(&y, &MaskSpec::new(Setting::Pal, 0.5, 3)).unwrap();
        assert_eq!(z.count(Label::Missing), 2);
        for j in 0..4 {
            let e = z.get(0, j);
            assert!(e.is_missing() || e == Label::from_bool(y[[0, j]]));
        }
    }

    #[test]
    fn ppl_floor_of_one_positive() {
        let y = array![[true, true, true, false, false]];
        for s in 0..100 {
            let z = apply_mask(&y, &MaskSpec::new(Setting::Ppl, 0.3, s)).unwrap();
            assert_eq!(z.count(Label::Pos), 1);
            assert_eq!(z.count(Label::Missing), 4);
        }
    }

    #[test]
    fn spl_and_ppl_reject_rows_without_positives() {
        let y = array![[true, false], [false, false]];
        for setting in [Setting::Spl, Setting::Ppl] {
            match apply_mask(&y, &MaskSpec::new(setting, 0.5, 0)) {
                Err(Error::NoPositive { row }) => assert_eq!(row, 1),
                other => panic!("unexpected {other:?}"),
            }
        }
        // PAL and FAL accept them.
        apply_mask(&y, &MaskSpec::new(Setting::Pal, 0.5, 0)).unwrap();
        apply_mask(&y, &MaskSpec::new(Setting::Fal, 1.0, 0)).unwrap();
    }

    #[test]
    fn keep_fraction_is_validated() {
        let y = array![[true, false]];
        for bad in [0.0, -0.1, 1.5, f64::NAN] {
            match apply_mask(&y, &MaskSpec::new(Setting::Pal, bad, 0)) {
                Err(Error::Validation { field, .. }) => assert_eq!(field, "keep_fraction"),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn fal_hides_nothing() {
        let y = array![[true, false], [false, true]];
        let z = apply_mask(&y, &MaskSpec::new(Setting::Fal, 1.0, 0)).unwrap();
        assert!(!z.has_missing());
        assert_eq!(z, LabelMatrix::from_binary(&y));
    }

    #[test]
    fn mask_labels_and_parse() {
        let m = MaskSpec::new(Setting::Pal, 0.3, 0);
        assert_eq!(m.label(), "PAL_0.3");
        assert_eq!("spl".parse::<Setting>().unwrap(), Setting::Spl);
        assert!("xyz".parse::<Setting>().is_err());
    }
}
