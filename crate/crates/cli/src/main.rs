use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acsm_cli::commands::{cmd_criteria, cmd_moments, cmd_poles, cmd_sample, cmd_verify};
use acsm_cli::config::RunConfig;
use acsm_cli::experiments::{reproduce, summary_text, Figure, Scale, ScaleSpec};
use acsm_cli::{CliError, CliResult};
use acsm_core::precision::MAX_PRECISION_BITS;
use acsm_core::stieltjes::default_precision;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "acsm", version, about = "Autocorrelation spectra from moments of Lie derivatives")]
struct Cli {
    /// Output directory (defaults to the config's output_dir, then ".").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Working precision in bits (fallback: ACSM_PRECISION_BITS, then 512).
    #[arg(long, global = true)]
    precision: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw Gibbs samples into samples.acsm.
    Sample {
        #[arg(long)]
        config: PathBuf,
    },
    /// Estimate c_0..c_n into moments.json.
    Moments {
        #[arg(long)]
        config: PathBuf,
        /// Sample file; without it the config's virtual stream is used.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Overrides max_order.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Quadrature ladder into poles.csv and isolation.json.
    Poles {
        #[arg(long)]
        moments: PathBuf,
        /// Highest approximant order.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Regularity criteria into criteria.json.
    Criteria {
        #[arg(long, conflicts_with = "poles")]
        moments: Option<PathBuf>,
        #[arg(long)]
        poles: Option<PathBuf>,
    },
    /// Empirical autocorrelation against the truncated series.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Table behind one of the figures.
    Reproduce {
        /// fig1 .. fig5
        figure: String,
        #[arg(long, default_value = "desk")]
        scale: String,
    },
}

fn precision(flag: Option<usize>) -> CliResult<usize> {
    let bits = flag.unwrap_or_else(default_precision);
    if !(64..=MAX_PRECISION_BITS).contains(&bits) {
        return Err(CliError::Config(format!("precision must lie in 64..={MAX_PRECISION_BITS} bits")));
    }
    Ok(bits)
}

fn load(cli: &Cli, path: &Path) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(cli: &Cli) -> CliResult<String> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Sample { config } => {
            let cfg = load(cli, config)?;
            Ok(cmd_sample(&cfg, &out_dir(cli, Some(&cfg)))?.1)
        }
        Command::Moments { config, samples, order } => {
            let mut cfg = load(cli, config)?;
            if let Some(n) = order {
                cfg.max_order = *n;
            }
            Ok(cmd_moments(&cfg, samples.as_deref(), &out_dir(cli, Some(&cfg)))?.1)
        }
        Command::Poles { moments, order } => {
            Ok(cmd_poles(moments, *order, precision(cli.precision)?, &out_dir(cli, None))?.1)
        }
        Command::Criteria { moments, poles } => Ok(cmd_criteria(
            moments.as_deref(),
            poles.as_deref(),
            precision(cli.precision)?,
            &out_dir(cli, None),
        )?
        .1),
        Command::Verify { config } => {
            let cfg = load(cli, config)?;
            Ok(cmd_verify(&cfg, &out_dir(cli, Some(&cfg)))?.1)
        }
        Command::Reproduce { figure, scale } => {
            let figure: Figure = figure.parse()?;
            let scale: Scale = scale.parse()?;
            let spec = ScaleSpec::new(scale, cli.seed.unwrap_or(1), precision(cli.precision)?);
            let summary = reproduce(figure, &spec, &out_dir(cli, None))?;
            Ok(summary_text(&summary))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
