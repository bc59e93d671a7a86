//! `darkscan`: audit e-commerce pages for dark patterns.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for runtime errors.

mod backend;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "darkscan", version, about = "Dark-pattern audit engine for e-commerce pages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Lexical,
    Lr,
    Transformer,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Argmax,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Md,
}

#[derive(Args, Debug, Clone)]
pub struct BackendArgs {
    /// Classifier backend.
    #[arg(long, value_enum, default_value = "lexical")]
    backend: BackendKind,
    /// Model location: a ModelArtifacts directory for `transformer`, a
    /// model JSON file for `lr`.
    #[arg(long, env = "DARKSCAN_MODEL_DIR")]
    model: Option<PathBuf>,
    /// Service base URL for the `remote` backend.
    #[arg(long, default_value = "http://127.0.0.1:8787")]
    endpoint: String,
    /// Lexicon JSON replacing the built-in one for the `lexical` backend.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct ScanTarget {
    /// Page to fetch over HTTP(S).
    #[arg(long)]
    url: Option<String>,
    /// Local HTML file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Directory laid out as `<site>/<page>.html`; one report per site.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan pages and write a site report.
    Scan {
        #[command(flatten)]
        target: ScanTarget,
        #[command(flatten)]
        backend: BackendArgs,
        /// Threshold JSON: display name to probability.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "argmax")]
        mode: ModeArg,
        /// Output file; for `--corpus`, a directory receiving one file per site.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Report name; defaults to the host, file stem or corpus directory name.
        #[arg(long)]
        site_id: Option<String>,
        /// Pages scanned in parallel with `--corpus` (default: number of CPUs).
        #[arg(long)]
        jobs: Option<usize>,
        /// Fetch pages even where robots.txt disallows it.
        #[arg(long)]
        ignore_robots: bool,
        /// External renderer endpoint that returns rendered HTML for `{"url": ...}`.
        #[arg(long)]
        renderer: Option<String>,
    },
    /// Classify one or more texts.
    Classify {
        /// Text to classify; repeat for several.
        #[arg(long, required = true)]
        text: Vec<String>,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Score a backend on the test split of a labeled dataset.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the TF-IDF logistic-regression baseline.
    TrainBaseline {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-4)]
        l2: f64,
        #[arg(long, default_value = "model-lr.json")]
        out: PathBuf,
        /// Also write test-split metrics JSON here.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
    },
    /// Pick per-category thresholds on the validation split.
    TuneThresholds {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        /// `f1` or `fbeta:<beta>`.
        #[arg(long, default_value = "f1")]
        objective: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare site reports.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "md")]
        format: FormatArg,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value = darkscan_service::DEFAULT_BIND)]
        bind: String,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "argmax")]
        mode: ModeArg,
        /// Allowed CORS origin prefix; repeat for several. Defaults to
        /// browser-extension origins.
        #[arg(long)]
        allow_origin: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
