use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rwfbm_cli::{
    parse_values, run_generate, run_sweep, run_verify, Axis, CliError, CliResult, Format, RunConfig, Suite,
    VerifyOptions,
};

#[derive(Parser)]
#[command(name = "rwfbm", version, about = "Random-walk approximations of fractional Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one path on the level-m grid of [0, K].
    Generate(Common),
    /// Run a verification suite and print NDJSON reports.
    Verify {
        #[command(flatten)]
        common: Common,
        /// identities, bounds, rates, distribution, lemma4 or all.
        #[arg(long, default_value = "all")]
        suite: Suite,
        /// Confidence parameter of the probabilistic bounds (must exceed 1).
        #[arg(long, default_value_t = 3.0)]
        c: f64,
        /// Window width of the summation-by-parts check.
        #[arg(long, default_value_t = 0.01)]
        delta: f64,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Summarise consecutive-level differences across values of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// m or hurst.
        #[arg(long)]
        axis: Axis,
        /// Comma-separated values; integer ranges like 6..10 are expanded.
        #[arg(long, value_parser = parse_value_list)]
        values: ValueList,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0.75)]
    hurst: f64,
    /// Level m; the grid spacing is 4^-m.
    #[arg(long, short = 'm', default_value_t = 8)]
    level: u32,
    /// Horizon K.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, env = "RWFBM_SEED", default_value_t = 1)]
    seed: u64,
    /// Target relative size of the neglected moving-average tail.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Ceiling on the look-back in time units; `none` removes it.
    #[arg(long, default_value = "4", value_parser = parse_lookback)]
    lookback: Lookback,
    #[arg(long, default_value_t = 200)]
    replicas: usize,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone)]
struct ValueList(Vec<f64>);

fn parse_value_list(s: &str) -> Result<ValueList, String> {
    parse_values(s).map(ValueList)
}

#[derive(Clone, Copy)]
struct Lookback(Option<f64>);

fn parse_lookback(s: &str) -> Result<Lookback, String> {
    if s == "none" {
        return Ok(Lookback(None));
    }
    s.parse().map(|v| Lookback(Some(v))).map_err(|_| format!("`{s}` is not a number or `none`"))
}

impl Common {
    fn config(&self) -> RunConfig {
        RunConfig {
            hurst: self.hurst,
            level: self.level,
            horizon: self.horizon,
            seed: self.seed,
            epsilon: self.epsilon,
            lookback: self.lookback.0,
            replicas: self.replicas,
            format: self.format,
        }
    }

    fn writer(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Generate(common) => {
            let cfg = common.config();
            cfg.validate()?;
            run_generate(&cfg, &mut common.writer()?)?;
            Ok(false)
        }
        Command::Verify {
            common,
            suite,
            c,
            delta,
            inject_fault,
        } => {
            let cfg = common.config();
            cfg.validate()?;
            let opts = VerifyOptions {
                suite,
                c,
                delta,
                inject_fault,
            };
            run_verify(&cfg, &opts, &mut common.writer()?)
        }
        Command::Sweep { common, axis, values } => {
            let cfg = common.config();
            cfg.validate()?;
            run_sweep(&cfg, axis, &values.0, &mut common.writer()?)?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("rwfbm: exact identity violated");
            ExitCode::from(1)
        }
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rwfbm: {e}");
            ExitCode::from(2)
        }
    }
}
