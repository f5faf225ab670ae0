//! Command-line front end.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ipt_core::mock::{MockMode, MockModel};
use ipt_core::LabelSpace;
use serde_json::json;

use crate::config::Config;
use crate::dataset::load_dataset;
use crate::error::{Error, Result};
use crate::evaluate::{evaluate, EvaluateOptions};
use crate::protocol::Endpoint;
use crate::report::{report, ReportMode};
use crate::{generate, mock_server, transform};

#[derive(Debug, Parser)]
#[command(name = "ipt-probe", version, about = "Probe video activity classifiers with identity-preserving transforms")]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the configured clips, appearances and factor sweeps into a dataset.
    Generate(GenerateArgs),
    /// Apply an image transform, or split videos into foreground/background.
    Transform(TransformArgs),
    /// Score a dataset through a model endpoint into a JSON-lines record file.
    Evaluate(EvaluateArgs),
    /// Compute tables, curves and embeddings from record files.
    Report(ReportArgs),
    /// Serve the built-in deterministic mock model (stdio by default).
    Mock(MockArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads for rendering and image work (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for rendering and nuisance randomization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub common: Common,
    /// Input dataset directory.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output dataset directory; `semantic` writes `fg/`, `bg/` and `drop_report.json` under it.
    #[arg(long)]
    pub out: PathBuf,
    /// Transform kind (identity, average_blur, hist_equalization, grayscale,
    /// gaussian_noise, rotate_cw) or `semantic`. Parameters come from the
    /// config's `transforms` section when listed there.
    #[arg(long)]
    pub kind: String,
    /// Noise seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dropped-frame fraction above which a video leaves the semantic split.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output record file (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// `tcp:HOST:PORT` or `exec:COMMAND ...`; overrides the config.
    #[arg(long)]
    pub model: Option<String>,
    /// Comma-separated feature tags to request; overrides the config.
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Parallel model connections; overrides the config.
    #[arg(long)]
    pub connections: Option<usize>,
    /// Per-reply timeout in seconds; overrides the config.
    #[arg(long)]
    pub timeout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Record files (JSON lines).
    #[arg(long, num_args = 1.., required = true)]
    pub records: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: ReportMode,
    /// Report directory (tables, curves, SVG charts).
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset whose label names annotate class ids.
    #[arg(long)]
    pub labels_from: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MockArgs {
    /// uniform, centroid or azimuth_oracle.
    #[arg(long, default_value = "uniform")]
    pub mode: String,
    /// Seed for the mock's deterministic scores.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated class names.
    #[arg(long, value_delimiter = ',', conflicts_with = "labels_from")]
    pub labels: Option<Vec<String>>,
    /// Take the class names from a dataset manifest.
    #[arg(long)]
    pub labels_from: Option<PathBuf>,
    /// Serve TCP on this address instead of stdio.
    #[arg(long)]
    pub listen: Option<String>,
}

fn load_config(path: Option<&PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match jobs {
        None => f(),
        Some(0) => Err(Error::Usage("--jobs must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(e.to_string()))?
            .install(f),
    }
}

fn print(value: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&value).expect("summary serializes"));
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let config = match &a.common.config {
                Some(p) => Config::load(p)?,
                None => return Err(Error::Usage("generate needs --config".into())),
            };
            let manifest = in_pool(a.common.jobs, || generate::generate(&config, &a.out, a.seed))?;
            print(json!({"videos": manifest.videos.len(), "labels": manifest.labels, "out": a.out}));
        }
        Command::Transform(a) => {
            let config = load_config(a.common.config.as_ref())?;
            if a.kind == "semantic" {
                let threshold = a.threshold.unwrap_or(config.report.drop_threshold);
                let r = in_pool(a.common.jobs, || transform::transform_semantic(&a.input, &a.out, threshold))?;
                print(json!({"retained": r.retained, "removed": r.removed, "threshold": r.threshold}));
            } else {
                let mut spec = config.transform(&a.kind).map_err(|e| Error::Usage(e.message))?;
                if let Some(seed) = a.seed {
                    spec = spec.with_seed(seed);
                }
                let m = in_pool(a.common.jobs, || transform::transform_image(&a.input, &a.out, &spec))?;
                print(json!({"videos": m.videos.len(), "transform": spec.kind()}));
            }
        }
        Command::Evaluate(a) => {
            let config = load_config(a.common.config.as_ref())?;
            let e = &config.evaluate;
            let model = a
                .model
                .or_else(|| e.model.clone())
                .ok_or_else(|| Error::Usage("no model endpoint: pass --model or set evaluate.model".into()))?;
            let endpoint = Endpoint::parse(&model).map_err(|err| Error::Usage(err.to_string()))?;
            let timeout = a.timeout.unwrap_or(e.timeout_s);
            if !(timeout.is_finite() && timeout > 0.0) {
                return Err(Error::Usage(format!("timeout must be > 0, got {timeout}")));
            }
            let opts = EvaluateOptions {
                endpoint,
                connections: a.connections.unwrap_or(e.connections),
                timeout: Duration::from_secs_f64(timeout),
                features: a.features.unwrap_or_else(|| e.features.clone()),
            };
            let s = evaluate(&a.dataset, &a.out, &opts)?;
            print(json!({"total": s.total, "skipped": s.skipped, "inferred": s.inferred, "failed": s.failed}));
        }
        Command::Report(a) => {
            let config = load_config(a.common.config.as_ref())?;
            let labels = match &a.labels_from {
                Some(d) => Some(load_dataset(d)?.labels),
                None => None,
            };
            let v = report(&a.records, a.mode, &config.report, labels.as_ref(), &a.out)?;
            if cli.verbose > 0 {
                print(v);
            }
        }
        Command::Mock(a) => {
            let mode: MockMode = a.mode.parse().map_err(|e: ipt_core::mock::MockError| Error::Usage(e.to_string()))?;
            let names = match (&a.labels, &a.labels_from) {
                (Some(l), _) => l.clone(),
                (None, Some(d)) => load_dataset(d)?.labels.labels().to_vec(),
                (None, None) => return Err(Error::Usage("mock needs --labels or --labels-from".into())),
            };
            let labels = LabelSpace::new(names).map_err(|e| Error::Usage(e.to_string()))?;
            let model = MockModel::new(mode, labels, a.seed);
            match a.listen {
                Some(addr) => {
                    let listener = std::net::TcpListener::bind(&addr)
                        .map_err(|e| Error::Usage(format!("cannot listen on {addr}: {e}")))?;
                    log::info!("listening on {}", listener.local_addr().map(|a| a.to_string()).unwrap_or(addr));
                    mock_server::serve_tcp(model, listener).map_err(|e| Error::data(e.to_string()))?;
                }
                None => {
                    let stdin = std::io::stdin().lock();
                    let stdout = std::io::BufWriter::new(std::io::stdout().lock());
                    mock_server::serve(&model, stdin, stdout)?;
                }
            }
        }
    }
    Ok(())
}
