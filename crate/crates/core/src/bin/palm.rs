//! Command-line runner: generate, mask, train, eval and sweep.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 validation,
//! 3 training divergence, 4 partial sweep failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use palm::experiment::{self, ExperimentManifest, ReportFormat, SweepManifest};
use palm::{format, metrics, Error, ModelParams};

#[derive(Parser)]
#[command(name = "palm", version, about = "Multi-label training with partially annotated labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment manifest (TOML).
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the manifest's run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the manifest's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the manifest's report format.
    #[arg(long)]
    format: Option<ReportFormat>,
}

impl Common {
    fn manifest(&self) -> palm::Result<ExperimentManifest> {
        let mut m = ExperimentManifest::load(&self.manifest)?;
        if let Some(s) = self.seed {
            m.seed = s;
        }
        if let Some(o) = &self.out {
            m.output_dir = o.clone();
        }
        if let Some(f) = self.format {
            m.format = f;
        }
        Ok(m)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the manifest's full train/test splits as dataset files.
    Generate(Common),
    /// Apply the manifest's mask to the training split and write it.
    Mask(Common),
    /// Run one experiment and write its artifacts.
    Train {
        #[command(flatten)]
        common: Common,
        /// Also dump final pseudo-labels as `pseudo.csv`.
        #[arg(long)]
        dump_pseudo: bool,
    },
    /// Score a checkpoint on a fully labeled dataset file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "json")]
        format: ReportFormat,
        /// Write `eval.<format>` here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expand a sweep manifest and tabulate mean mAP.
    Sweep(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation { .. } | Error::Config(_) | Error::NoPositive { .. } => 2,
        Error::Divergence { .. } | Error::Numeric(_) => 3,
        _ => 1,
    }
}

fn write_out(out: Option<&PathBuf>, name: &str, text: &str) -> palm::Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::File { path: p, source: e })
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> palm::Result<u8> {
    match cli.command {
        Command::Generate(c) => {
            let m = c.manifest()?;
            let (a, b) = experiment::generate_splits(&m, &m.output_dir)?;
            println!("{}\n{}", a.display(), b.display());
        }
        Command::Mask(c) => {
            let m = c.manifest()?;
            let (p, _) = experiment::mask_split(&m, &m.output_dir)?;
            println!("{}", p.display());
        }
        Command::Train { common, dump_pseudo } => {
            let mut m = common.manifest()?;
            m.dump_pseudo |= dump_pseudo;
            let a = experiment::run_experiment(&m)?;
            print!("{}", a.summary.render(m.format));
        }
        Command::Eval {
            checkpoint,
            data,
            format: fmt,
            out,
        } => {
            let f = fs::File::open(&checkpoint).map_err(|e| Error::File {
                path: checkpoint.clone(),
                source: e,
            })?;
            let params = ModelParams::read_checkpoint(f)?;
            let ds = format::load_dataset(&data)?;
            let r = metrics::evaluate(&params.predict(ds.features())?, ds.labels())?;
            let text = match fmt {
                ReportFormat::Json => serde_json::to_string_pretty(&r).expect("serializes") + "\n",
                ReportFormat::Csv => {
                    let mut s = String::from("class,ap\n");
                    for (k, ap) in r.per_class_ap.iter().enumerate() {
                        s += &format!("{k},{}\n", ap.map_or("skipped".into(), |v| v.to_string()));
                    }
                    s + &format!("mAP,{}\n", r.map)
                }
                ReportFormat::Md => {
                    let mut s = String::from("| class | AP |\n|---|---|\n");
                    for (k, ap) in r.per_class_ap.iter().enumerate() {
                        s += &format!("| {k} | {} |\n", ap.map_or("skipped".into(), |v| format!("{v:.4}")));
                    }
                    s + &format!("| mAP | {:.4} |\n", r.map)
                }
            };
            write_out(out.as_ref(), &format!("eval.{}", fmt.extension()), &text)?;
        }
        Command::Sweep(c) => {
            let mut s = SweepManifest::load(&c.manifest)?;
            if let Some(o) = c.out {
                s.base.output_dir = o;
            }
            if let Some(f) = c.format {
                s.base.format = f;
            }
            if let Some(seed) = c.seed {
                s.sweep.seeds = vec![seed];
            }
            let table = experiment::run_sweep(&s.expand())?;
            let text = table.render(s.base.format);
            write_out(
                Some(&s.base.output_dir),
                &format!("sweep.{}", s.base.format.extension()),
                &text,
            )?;
            print!("{text}");
            for r in table.runs.iter().filter(|r| r.error.is_some()) {
                eprintln!(
                    "failed: {} {} seed {}: {}",
                    r.setting,
                    r.loss_kind,
                    r.seed,
                    r.error.as_deref().unwrap_or_default()
                );
            }
            if table.failures() > 0 {
                return Ok(4);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
