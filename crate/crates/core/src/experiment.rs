//! Experiment manifests, single runs and sweeps.
//!
//! A manifest is a TOML document. The run seed fans out to every randomized
//! component through [`crate::seed`], so one `seed` line pins the dataset,
//! the mask, the initialization, the shuffles and the picked subsamples.
//!
//! ```toml
//! seed = 7
//! output_dir = "runs/pal"
//! format = "md"
//!
//! [dataset]
//! kind = "synthetic"
//! n_instances = 2500
//! n_test = 500
//! n_features = 32
//! n_classes = 20
//! mean_positives_per_instance = 2.5
//!
//! [mask]
//! setting = "PAL"
//! keep_fraction = 0.6
//!
//! [train]
//! epochs = 20
//! loss_kind = "PROPOSED"
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{self, Dataset, LabelMatrix, MaskSpec, Setting, SyntheticSpec};
use crate::error::{Error, Result};
use crate::format::{self, MaskedDataset};
use crate::loss::LossConfig;
use crate::metrics::{self, EvalResult};
use crate::model::{Arch, ModelConfig};
use crate::seed::{self, Stream};
use crate::trainer::{self, LossKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
    #[serde(alias = "markdown")]
    Md,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Md => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Md),
            other => Err(Error::validation("format", format!("expected json, csv or md, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    /// Generated data; the last `n_test` rows form the fully labeled test split.
    Synthetic {
        n_instances: usize,
        n_test: usize,
        n_features: usize,
        n_classes: usize,
        mean_positives_per_instance: f64,
        #[serde(default = "default_noise")]
        noise_scale: f64,
    },
    /// Fully labeled train and test files in the dataset text format.
    File { train: PathBuf, test: PathBuf },
}

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSection {
    pub setting: Setting,
    #[serde(default = "one")]
    pub keep_fraction: f64,
}

fn one() -> f64 {
    1.0
}

impl MaskSection {
    pub fn label(&self) -> String {
        MaskSpec::new(self.setting, self.keep_fraction, 0).label()
    }
}

/// Parses tags such as `PAL_0.3`, `PPL_0.5`, `SPL` or `FAL`.
impl FromStr for MaskSection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (setting, keep) = match s.split_once('_') {
            Some((a, b)) => (
                a,
                b.parse::<f64>()
                    .map_err(|_| Error::validation("keep_fraction", format!("bad fraction in {s:?}")))?,
            ),
            None => (s, 1.0),
        };
        Ok(Self {
            setting: setting.parse()?,
            keep_fraction: keep,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub arch: Arch,
    pub hidden_dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_scale: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            arch: Arch::Linear,
            hidden_dim: 64,
            init_scale: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lr_decay: f64,
    pub momentum: f64,
    pub loss_kind: LossKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wan_weight: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            base_lr: 1.0,
            lr_decay: 0.95,
            momentum: 0.9,
            loss_kind: LossKind::Proposed,
            wan_weight: None,
        }
    }
}

/// `[loss]` section; the epoch count comes from `[train]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossSection {
    pub gamma: f64,
    pub m: usize,
    pub q_fraction: f64,
    pub epsilon_clamp: f64,
    pub schedule: crate::loss::DynamicSchedule,
    pub penalty: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_override: Option<f64>,
}

impl Default for LossSection {
    fn default() -> Self {
        let c = LossConfig::default();
        Self {
            gamma: c.gamma,
            m: c.m,
            q_fraction: c.q_fraction,
            epsilon_clamp: c.epsilon_clamp,
            schedule: c.schedule,
            penalty: c.penalty,
            beta_override: c.beta_override,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub format: ReportFormat,
    /// Also write the final pseudo-labels as CSV.
    #[serde(default)]
    pub dump_pseudo: bool,
    pub dataset: DatasetSource,
    pub mask: MaskSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub loss: LossSection,
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Validation { field, message } => Error::Validation {
            field: format!("{prefix}.{field}"),
            message,
        },
        other => other,
    }
}

/// Everything a run needs, with sub-seeds filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub synthetic: Option<SyntheticSpec>,
    pub n_test: usize,
    pub mask: MaskSpec,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl ExperimentManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation("manifest", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text)
    }

    /// Setting tag such as `PAL_0.6`.
    pub fn setting_label(&self) -> String {
        self.mask.label()
    }

    /// Checks every section and derives the per-component seeds.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let mask = MaskSpec::new(
            self.mask.setting,
            self.mask.keep_fraction,
            seed::derive(self.seed, Stream::Mask),
        );
        mask.validate().map_err(|e| prefixed("mask", e))?;

        let (synthetic, n_test, dims) = match &self.dataset {
            DatasetSource::Synthetic {
                n_instances,
                n_test,
                n_features,
                n_classes,
                mean_positives_per_instance,
                noise_scale,
            } => {
                let spec = SyntheticSpec {
                    n_instances: *n_instances,
                    n_features: *n_features,
                    n_classes: *n_classes,
                    mean_positives_per_instance: *mean_positives_per_instance,
                    noise_scale: *noise_scale,
                    seed: seed::derive(self.seed, Stream::Dataset),
                };
                spec.validate().map_err(|e| prefixed("dataset", e))?;
                if *n_test == 0 || n_test >= n_instances {
                    return Err(Error::validation(
                        "dataset.n_test",
                        format!("must lie in [1, n_instances), got {n_test}"),
                    ));
                }
                (Some(spec), *n_test, Some((*n_features, *n_classes)))
            }
            DatasetSource::File { train, test } => {
                for (field, p) in [("dataset.train", train), ("dataset.test", test)] {
                    if !p.is_file() {
                        return Err(Error::validation(field, format!("{} does not exist", p.display())));
                    }
                }
                (None, 0, None)
            }
        };

        let (input_dim, output_dim) = dims.unwrap_or((1, 2));
        let model = ModelConfig {
            arch: self.model.arch,
            hidden_dim: self.model.hidden_dim,
            input_dim,
            output_dim,
            init_seed: seed::derive(self.seed, Stream::Init),
            init_scale: self.model.init_scale,
        };
        model.validate().map_err(|e| prefixed("model", e))?;

        let t = &self.train;
        let l = &self.loss;
        let train = TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            base_lr: t.base_lr,
            lr_decay: t.lr_decay,
            momentum: t.momentum,
            loss: LossConfig {
                gamma: l.gamma,
                m: l.m,
                total_epochs: t.epochs,
                q_fraction: l.q_fraction,
                epsilon_clamp: l.epsilon_clamp,
                schedule: l.schedule,
                penalty: l.penalty,
                beta_override: l.beta_override,
            },
            loss_kind: t.loss_kind,
            wan_weight: t.wan_weight,
            seed: self.seed,
            record_timings: false,
        };
        train.validate().map_err(|e| match e {
            Error::Validation { field, message } if field.starts_with("loss.") => Error::Validation { field, message },
            Error::Validation { field, message }
                if ["gamma", "m", "q_fraction", "epsilon_clamp", "beta_override"].contains(&field.as_str()) =>
            {
                Error::Validation {
                    field: format!("loss.{field}"),
                    message,
                }
            }
            other => prefixed("train", other),
        })?;
        if t.loss_kind == LossKind::BceFull && self.mask.setting != Setting::Fal {
            return Err(Error::validation("train.loss_kind", "BCE_FULL needs the FAL setting"));
        }

        Ok(ResolvedRun {
            synthetic,
            n_test,
            mask,
            model,
            train,
        })
    }
}

/// Train and test splits for a resolved run.
pub fn load_splits(manifest: &ExperimentManifest, run: &ResolvedRun) -> Result<(Dataset, Dataset)> {
    match (&manifest.dataset, &run.synthetic) {
        (_, Some(spec)) => {
            let all = dataset::generate_synthetic(spec)?;
            all.split_at(spec.n_instances - run.n_test)
        }
        (DatasetSource::File { train, test }, None) => {
            let tr = format::load_dataset(train)?;
            let te = format::load_dataset(test)?;
            if tr.n_features() != te.n_features() || tr.n_classes() != te.n_classes() {
                return Err(Error::Shape("train and test files have different dimensions".into()));
            }
            Ok((tr, te))
        }
        (DatasetSource::Synthetic { .. }, None) => unreachable!("resolve fills synthetic specs"),
    }
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub setting: String,
    pub loss_kind: LossKind,
    pub seed: u64,
    #[serde(rename = "mAP")]
    pub map: f64,
}

impl RunSummary {
    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => serde_json::to_string_pretty(self).expect("summary serializes") + "\n",
            ReportFormat::Csv => format!(
                "setting,loss_kind,seed,mAP\n{},{},{},{}\n",
                self.setting, self.loss_kind, self.seed, self.map
            ),
            ReportFormat::Md => format!(
                "| setting | loss | seed | mAP |\n|---|---|---|---|\n| {} | {} | {} | {:.4} |\n",
                self.setting, self.loss_kind, self.seed, self.map
            ),
        }
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub summary: RunSummary,
    pub eval: EvalResult,
    pub reports: Vec<trainer::EpochReport>,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::file(path, e))?))
}

/// Generates or loads data, masks it once, trains, evaluates and writes
/// `train_masked.txt`, `epochs.jsonl`, `model.ckpt`, `eval.json` and
/// `summary.<format>` into the output directory.
pub fn run_experiment(manifest: &ExperimentManifest) -> Result<RunArtifacts> {
    let run = manifest.resolve()?;
    let (train_ds, test_ds) = load_splits(manifest, &run)?;
    let mut model = run.model;
    model.input_dim = train_ds.n_features();
    model.output_dim = train_ds.n_classes();

    let labels = dataset::apply_mask(train_ds.labels(), &run.mask)?;

    let out = &manifest.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::file(out, e))?;
    format::save_masked(
        &MaskedDataset::new(train_ds.features().clone(), labels.clone())?,
        out.join("train_masked.txt"),
    )?;

    let outcome = trainer::train(train_ds.features(), &labels, Some(&test_ds), &model, run.train)?;

    let mut w = create(&out.join("epochs.jsonl"))?;
    for r in &outcome.reports {
        writeln!(w, "{}", serde_json::to_string(r).expect("report serializes"))?;
    }
    w.flush()?;
    outcome.params.write_checkpoint(create(&out.join("model.ckpt"))?)?;
    if manifest.dump_pseudo {
        if let Some(store) = &outcome.pseudo {
            store.write_csv(create(&out.join("pseudo.csv"))?)?;
        }
    }

    let eval = metrics::evaluate(&outcome.params.predict(test_ds.features())?, test_ds.labels())?;
    let mut w = create(&out.join("eval.json"))?;
    writeln!(w, "{}", serde_json::to_string_pretty(&eval).expect("eval serializes"))?;
    w.flush()?;

    let summary = RunSummary {
        setting: manifest.setting_label(),
        loss_kind: manifest.train.loss_kind,
        seed: manifest.seed,
        map: eval.map,
    };
    let path = out.join(format!("summary.{}", manifest.format.extension()));
    fs::write(&path, summary.render(manifest.format)).map_err(|e| Error::file(&path, e))?;

    Ok(RunArtifacts {
        summary,
        eval,
        reports: outcome.reports,
    })
}

/// Writes the full train/test splits of a manifest's dataset.
pub fn generate_splits(manifest: &ExperimentManifest, out: &Path) -> Result<(PathBuf, PathBuf)> {
    let run = manifest.resolve()?;
    let (tr, te) = load_splits(manifest, &run)?;
    fs::create_dir_all(out).map_err(|e| Error::file(out, e))?;
    let (a, b) = (out.join("train.txt"), out.join("test.txt"));
    format::save_dataset(&tr, &a)?;
    format::save_dataset(&te, &b)?;
    Ok((a, b))
}

/// Applies the manifest's mask to its training split and writes the result.
pub fn mask_split(manifest: &ExperimentManifest, out: &Path) -> Result<(PathBuf, LabelMatrix)> {
    let run = manifest.resolve()?;
    let (tr, _) = load_splits(manifest, &run)?;
    let labels = dataset::apply_mask(tr.labels(), &run.mask)?;
    fs::create_dir_all(out).map_err(|e| Error::file(out, e))?;
    let path = out.join("train_masked.txt");
    format::save_masked(&MaskedDataset::new(tr.features().clone(), labels.clone())?, &path)?;
    Ok((path, labels))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Mean(f64),
    Failed(String),
}

/// Outcome of one sweep member.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRun {
    pub setting: String,
    pub loss_kind: LossKind,
    pub seed: u64,
    #[serde(rename = "mAP")]
    pub map: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Rows are loss kinds, columns are settings, cells average mAP over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub rows: Vec<LossKind>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Option<Cell>>>,
    pub runs: Vec<SweepRun>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn cell(&self, kind: LossKind, setting: &str) -> Option<&Cell> {
        let r = self.rows.iter().position(|&k| k == kind)?;
        let c = self.columns.iter().position(|s| s == setting)?;
        self.cells[r][c].as_ref()
    }

    pub fn render(&self, format: ReportFormat) -> String {
        let show = |c: &Option<Cell>| match c {
            Some(Cell::Mean(v)) => format!("{v:.4}"),
            Some(Cell::Failed(_)) => "failed".to_string(),
            None => "-".to_string(),
        };
        let mut s = String::new();
        match format {
            ReportFormat::Json => {
                s = serde_json::to_string_pretty(self).expect("table serializes") + "\n";
            }
            ReportFormat::Csv => {
                let _ = writeln!(s, "loss,{}", self.columns.join(","));
                for (kind, row) in self.rows.iter().zip(&self.cells) {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| match c {
                            Some(Cell::Mean(v)) => v.to_string(),
                            other => show(other),
                        })
                        .collect();
                    let _ = writeln!(s, "{kind},{}", cells.join(","));
                }
            }
            ReportFormat::Md => {
                let _ = writeln!(s, "| loss | {} |", self.columns.join(" | "));
                let _ = writeln!(s, "|---|{}", "---|".repeat(self.columns.len()));
                for (kind, row) in self.rows.iter().zip(&self.cells) {
                    let cells: Vec<String> = row.iter().map(show).collect();
                    let _ = writeln!(s, "| {kind} | {} |", cells.join(" | "));
                }
            }
        }
        s
    }
}

/// Runs every manifest (in parallel threads) and tabulates mean mAP.
/// A failed run marks its cell as failed; the others still complete.
pub fn run_sweep(manifests: &[ExperimentManifest]) -> Result<SweepTable> {
    if manifests.is_empty() {
        return Err(Error::validation("manifests", "sweep needs at least one manifest"));
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(manifests.len());
    let mut results: Vec<Option<Result<RunSummary>>> = Vec::new();
    results.resize_with(manifests.len(), || None);
    std::thread::scope(|scope| {
        let chunks: Vec<_> = results
            .chunks_mut(manifests.len().div_ceil(workers))
            .zip(manifests.chunks(manifests.len().div_ceil(workers)))
            .collect();
        for (slots, ms) in chunks {
            scope.spawn(move || {
                for (slot, m) in slots.iter_mut().zip(ms) {
                    *slot = Some(run_experiment(m).map(|a| a.summary));
                }
            });
        }
    });

    let mut rows: Vec<LossKind> = Vec::new();
    let mut columns: Vec<String> = Vec::new();
    let mut runs = Vec::with_capacity(manifests.len());
    let mut groups: BTreeMap<(usize, usize), (Vec<f64>, Option<String>)> = BTreeMap::new();
    for (m, res) in manifests.iter().zip(results) {
        let kind = m.train.loss_kind;
        let setting = m.setting_label();
        let r = rows.iter().position(|&k| k == kind).unwrap_or_else(|| {
            rows.push(kind);
            rows.len() - 1
        });
        let c = columns.iter().position(|s| *s == setting).unwrap_or_else(|| {
            columns.push(setting.clone());
            columns.len() - 1
        });
        let entry = groups.entry((r, c)).or_default();
        match res.expect("every slot filled") {
            Ok(summary) => {
                entry.0.push(summary.map);
                runs.push(SweepRun {
                    setting,
                    loss_kind: kind,
                    seed: m.seed,
                    map: Some(summary.map),
                    error: None,
                });
            }
            Err(e) => {
                entry.1.get_or_insert_with(|| e.to_string());
                runs.push(SweepRun {
                    setting,
                    loss_kind: kind,
                    seed: m.seed,
                    map: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let mut cells = vec![vec![None; columns.len()]; rows.len()];
    for ((r, c), (maps, err)) in groups {
        cells[r][c] = Some(match err {
            Some(e) => Cell::Failed(e),
            None => Cell::Mean(maps.iter().sum::<f64>() / maps.len() as f64),
        });
    }
    Ok(SweepTable {
        rows,
        columns,
        cells,
        runs,
    })
}

/// A sweep file: a base manifest plus the axes to expand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    #[serde(flatten)]
    pub base: ExperimentManifest,
    pub sweep: SweepAxes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    pub loss_kinds: Vec<LossKind>,
    /// Tags such as `PAL_0.3` or `SPL`.
    pub settings: Vec<String>,
    pub seeds: Vec<u64>,
}

impl SweepManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        toml::from_str(&text).map_err(|e| Error::validation("manifest", e.to_string()))
    }

    /// One manifest per (setting, loss, seed), each writing to
    /// `<output_dir>/<setting>/<loss>/seed-<seed>`. Unparseable setting tags
    /// become manifests with an out-of-range keep fraction so they fail
    /// in their own cell.
    pub fn expand(&self) -> Vec<ExperimentManifest> {
        let mut out = Vec::new();
        for tag in &self.sweep.settings {
            let mask = tag.parse::<MaskSection>().unwrap_or(MaskSection {
                setting: Setting::Pal,
                keep_fraction: f64::NAN,
            });
            for &kind in &self.sweep.loss_kinds {
                for &s in &self.sweep.seeds {
                    let mut m = self.base.clone();
                    m.seed = s;
                    m.mask = mask;
                    m.train.loss_kind = kind;
                    m.output_dir = self
                        .base
                        .output_dir
                        .join(tag)
                        .join(kind.name())
                        .join(format!("seed-{s}"));
                    out.push(m);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(dir: &Path) -> ExperimentManifest {
        ExperimentManifest {
            seed: 3,
            output_dir: dir.to_path_buf(),
            format: ReportFormat::Json,
            dump_pseudo: false,
            dataset: DatasetSource::Synthetic {
                n_instances: 120,
                n_test: 40,
                n_features: 6,
                n_classes: 5,
                mean_positives_per_instance: 1.8,
                noise_scale: 0.5,
            },
            mask: MaskSection {
                setting: Setting::Pal,
                keep_fraction: 0.5,
            },
            model: ModelSection::default(),
            train: TrainSection {
                epochs: 4,
                ..TrainSection::default()
            },
            loss: LossSection::default(),
        }
    }

    #[test]
    fn manifest_toml_round_trip() {
        let mut m = manifest(Path::new("out"));
        m.loss.beta_override = Some(0.5);
        m.train.wan_weight = Some(0.25);
        let back = ExperimentManifest::from_toml(&m.to_toml()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn minimal_manifest_uses_defaults() {
        let text = r#"
            seed = 1
            output_dir = "x"
            [dataset]
            kind = "synthetic"
            n_instances = 100
            n_test = 20
            n_features = 4
            n_classes = 3
            mean_positives_per_instance = 1.5
            [mask]
            setting = "SPL"
        "#;
        let m = ExperimentManifest::from_toml(text).unwrap();
        assert_eq!(m.train, TrainSection::default());
        assert_eq!(m.loss, LossSection::default());
        assert_eq!(m.setting_label(), "SPL");
        m.resolve().unwrap();
    }

    #[test]
    fn invalid_keep_fraction_names_field() {
        let mut m = manifest(Path::new("out"));
        m.mask.keep_fraction = 1.5;
        match m.resolve() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "mask.keep_fraction"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_loss_fields_are_prefixed() {
        let mut m = manifest(Path::new("out"));
        m.loss.gamma = 2.0;
        match m.resolve() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "loss.gamma"),
            other => panic!("{other:?}"),
        }
        let mut m = manifest(Path::new("out"));
        m.train.batch_size = 0;
        match m.resolve() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "train.batch_size"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_files_are_rejected() {
        let mut m = manifest(Path::new("out"));
        m.dataset = DatasetSource::File {
            train: "/nonexistent/train.txt".into(),
            test: "/nonexistent/test.txt".into(),
        };
        assert!(matches!(m.resolve(), Err(Error::Validation { field, .. }) if field == "dataset.train"));
    }

    #[test]
    fn setting_tags_parse() {
        let m: MaskSection = "PPL_0.3".parse().unwrap();
        assert_eq!((m.setting, m.keep_fraction), (Setting::Ppl, 0.3));
        assert_eq!(m.label(), "PPL_0.3");
        assert!("PAL_x".parse::<MaskSection>().is_err());
    }

    #[test]
    fn run_writes_artifacts_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(dir.path());
        let a = run_experiment(&m).unwrap();
        for f in ["train_masked.txt", "epochs.jsonl", "model.ckpt", "eval.json", "summary.json"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let first = fs::read(dir.path().join("epochs.jsonl")).unwrap();
        let b = run_experiment(&m).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(first, fs::read(dir.path().join("epochs.jsonl")).unwrap());
        assert!(a.summary.map.is_finite());
    }
}
