use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levytopic_cli::config::RunConfig;
use levytopic_cli::error::CliError;
use levytopic_cli::run::{self, Options, Summary};

#[derive(Parser)]
#[command(
    name = "levytopic",
    version,
    about = "Topic-flight analysis of texts and comment threads"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit (mu, sigma) for every source and chunk size.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Chunk size to fit; repeatable. Defaults to `chunk.k_list`.
        #[arg(long = "k")]
        k: Vec<usize>,
    },
    /// Flow curves across chunk sizes and the limit region of their endpoints.
    Flow {
        #[command(flatten)]
        common: Common,
        /// Chunk size; repeatable. Defaults to `chunk.k_list`.
        #[arg(long = "k")]
        k: Vec<usize>,
        /// Also fit a topic-shuffled companion trajectory per k.
        #[arg(long)]
        null: bool,
        /// Weight endpoints by inverse posterior variance in the limit region.
        #[arg(long)]
        error_weighted: bool,
    },
    /// Synthetic trajectory and one-step densities.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Run the parameter-recovery and shuffle checks too.
        #[arg(long)]
        recovery: bool,
    },
    /// Depth statistics for threads and the depth regression.
    Trees {
        #[command(flatten)]
        common: Common,
    },
    /// Summarise existing artifacts into report.md and report.json.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Exit with status 4 if any warning was raised.
    #[arg(long)]
    strict: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

type Runner = fn(&RunConfig, &Options) -> Result<Summary, CliError>;

fn execute(cli: Cli) -> Result<Summary, CliError> {
    let (common, opts, f): (_, _, Runner) = match cli.command {
        Command::Fit { common, k } => {
            let o = Options {
                k_list: k,
                ..Options::default()
            };
            (common, o, run::run_fit)
        }
        Command::Flow {
            common,
            k,
            null,
            error_weighted,
        } => {
            let o = Options {
                k_list: k,
                null,
                error_weighted,
                ..Options::default()
            };
            (common, o, run::run_flow)
        }
        Command::Simulate { common, recovery } => (
            common,
            Options {
                recovery,
                ..Options::default()
            },
            run::run_simulate,
        ),
        Command::Trees { common } => (common, Options::default(), run::run_trees),
        Command::Report { common } => (common, Options::default(), run::run_report),
    };
    let level = match common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(o) = common.output {
        cfg.output_dir = o;
    }
    let opts = Options {
        seed: common.seed,
        strict: common.strict,
        ..opts
    };
    f(&cfg, &opts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(s) => {
            for p in &s.written {
                println!("{}", p.display());
            }
            if s.cache_hits + s.cache_misses > 0 {
                eprintln!("cache: {} hits, {} misses", s.cache_hits, s.cache_misses);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
