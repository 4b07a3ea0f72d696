mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edpmoe::sampler::Mode;

use commands::{PredictArgs, SimulateArgs, SummariseArgs};
use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "edpmoe", version, about = "Enriched DP mixtures of GP experts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Edp,
    Dp,
}

/// Flags of `fit`; each one overrides the matching config entry.
#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Run directory; defaults to $EDPMOE_OUTPUT_ROOT/<config name>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a damped-cosine benchmark dataset.
    Simulate {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output CSV with columns x1..xD,y.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth JSON sidecar; defaults to <out>.truth.json.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run the sampler on a dataset described by a TOML config.
    Fit(FitArgs),
    /// Posterior predictive summaries at test inputs.
    Predict {
        /// Directory written by `fit`.
        #[arg(long)]
        run: PathBuf,
        /// CSV of test inputs; defaults to the config's prediction settings.
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        mc_samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Add a column with the HPD region as `lo:hi` pieces.
        #[arg(long)]
        regions: bool,
    },
    /// Similarity matrices and the VI point estimate of the clustering.
    #[command(alias = "summarize")]
    Summarise {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Greedy local search from the best sampled partition.
        #[arg(long)]
        refine: bool,
    },
}

fn fit(a: FitArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(d) = a.data {
        cfg.data.path = d;
    }
    let s = &mut cfg.sampler;
    s.iters = a.iters.unwrap_or(s.iters);
    s.burn_in = a.burn_in.unwrap_or(s.burn_in);
    s.thin = a.thin.unwrap_or(s.thin);
    s.seed = a.seed.unwrap_or(s.seed);
    s.chains = a.chains.unwrap_or(s.chains);
    if let Some(m) = a.mode {
        s.mode = match m {
            ModeArg::Edp => Mode::Edp,
            ModeArg::Dp => Mode::Dp,
        };
    }
    if a.out.is_some() {
        cfg.output_dir = a.out;
    }
    let name = a.config.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
    let dir = commands::output_dir(&cfg, &name);
    commands::fit(&cfg, &dir)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { n, d, seed, out, truth } => commands::simulate(&SimulateArgs { n, d, seed, out, truth }),
        Command::Fit(a) => fit(a),
        Command::Predict { run, test, out, thin, level, mc_samples, seed, regions } => {
            commands::predict(&PredictArgs { run, test, out, thin, level, mc_samples, seed, regions }).map(|_| ())
        }
        Command::Summarise { run, out, refine } => {
            commands::summarise(&SummariseArgs { run, out, refine: refine.then_some(true) }).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
