//! `yieldfusion` command-line front end.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use settings::CliError;

#[derive(Parser, Debug)]
#[command(name = "yieldfusion", version, about = "Tempered multimodal Bayesian fusion for explosive-yield estimation")]
struct Cli {
    /// JSON object of defaults, keyed by flag name with underscores; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct NutsArgs {
    #[arg(long)]
    pub chains: Option<usize>,
    /// Iterations per chain, warmup included.
    #[arg(long)]
    pub iter: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub target_accept: Option<f64>,
    #[arg(long)]
    pub max_tree_depth: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one joint density and write draws, summaries and diagnostics.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// dirichlet | single | fixed | plain
        #[arg(long)]
        method: Option<String>,
        /// Comma-separated fixed weights (seismic,crater,sar,vlm) for `--method fixed`.
        #[arg(long)]
        weights: Option<String>,
        #[command(flatten)]
        nuts: NutsArgs,
        /// Output directory.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Replicated fusion-method ablation on synthetic scenarios.
    Stress {
        /// Preset name or `all`.
        #[arg(long)]
        scenario: Option<String>,
        /// Comma-separated method names.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        bma_draws: Option<usize>,
        #[command(flatten)]
        nuts: NutsArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset from a preset.
    Synth {
        #[arg(long)]
        preset: Option<String>,
        /// Generate seismic and crater data through the inference links.
        #[arg(long)]
        inference_links: bool,
        /// Output dataset file.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Posterior predictive checks of a DirichletGamma fit.
    Ppc {
        #[arg(long)]
        data: PathBuf,
        /// One modality, or every present modality when omitted.
        #[arg(long)]
        modality: Option<String>,
        /// Number of posterior draws S.
        #[arg(long)]
        draws: Option<usize>,
        #[command(flatten)]
        nuts: NutsArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Leave-one-modality-out KL divergences and their rank correlation with trust weights.
    Loo {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        nuts: NutsArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Refit under symmetric Dirichlet priors of several concentrations.
    SweepAlpha {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated concentrations.
        #[arg(long)]
        alphas: Option<String>,
        #[command(flatten)]
        nuts: NutsArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Despeckle damage rasters and aggregate them into SAR boxes.
    Sarprep {
        /// Raster files in the plain-text raster format.
        #[arg(long, required = true, num_args = 1..)]
        raster: Vec<PathBuf>,
        /// Epicenter as `x,y` in raster coordinates (metres).
        #[arg(long, allow_hyphen_values = true)]
        epicenter: String,
        /// spatial | temporal
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        mad_threshold: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Combine the despeckled stack by pixel-wise mean before aggregating.
        #[arg(long)]
        composite: bool,
        #[arg(long)]
        box_px: Option<usize>,
        #[arg(long)]
        annuli: Option<usize>,
        #[arg(long)]
        r_inner: Option<f64>,
        #[arg(long)]
        r_outer: Option<f64>,
        #[arg(long)]
        percentile: Option<f64>,
        /// Output dataset file holding the boxes.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// BMA and covariance intersection over the four single-modality fits.
    FusePosthoc {
        #[arg(long)]
        data: PathBuf,
        /// bma | ci | both
        #[arg(long)]
        fuser: Option<String>,
        #[arg(long)]
        bma_draws: Option<usize>,
        #[command(flatten)]
        nuts: NutsArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn fail(e: &CliError) -> ExitCode {
    let line = serde_json::json!({ "error": e.kind(), "code": e.code(), "message": e.to_string().replace('\n', " ") });
    eprintln!("{line}");
    ExitCode::from(e.code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail(&CliError::Usage(first.to_string()));
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
