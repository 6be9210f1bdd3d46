//! `twoway`: empirical Bayes estimation of two-way fixed effects from matched panels.

mod commands;
mod config;
mod error;
mod ingest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use twoway::criteria::{Criterion, WeightSpec};

use config::{EstimatorKind, RunConfig};
use error::{exit_kind, input_error};

#[derive(Parser)]
#[command(name = "twoway", version, about = "Empirical Bayes shrinkage for two-way fixed effects")]
struct Cli {
    /// Print the default configuration as TOML and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate row and column effects from a panel CSV.
    Estimate(Common),
    /// Report connectivity and Laplacian eigenvalues of the match graph.
    Diagnose(Common),
    /// Run a Monte Carlo experiment on a simulated design.
    Simulate(Common),
    /// Cross-tabulate quintiles of two estimate files.
    Crosstab {
        first: PathBuf,
        second: PathBuf,
        /// Which units to compare: `a` (rows) or `b` (columns).
        #[arg(long, default_value = "b", value_parser = ["a", "b"])]
        unit_type: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Ure,
    Mle,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    All,
    Beta,
    Alpha,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Panel CSV with columns i,t,j,y[,covariates...].
    #[arg(long)]
    input: Option<PathBuf>,
    /// TOML (or .json) configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    criterion: Option<CriterionArg>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorKind>,
    #[arg(long, value_enum)]
    weight: Option<WeightArg>,
    /// Known noise variance.
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 gives the reference execution order.
    #[arg(long)]
    threads: Option<usize>,
    /// Remove units without observations before building the graph.
    #[arg(long)]
    drop_isolated: bool,
    /// Keep only the largest connected component.
    #[arg(long)]
    largest_component: bool,
    /// Also write every evaluated grid point.
    #[arg(long)]
    write_surface: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.input {
            cfg.input = Some(v.clone());
        }
        if let Some(v) = self.criterion {
            cfg.criterion = match v {
                CriterionArg::Ure => Criterion::Ure,
                CriterionArg::Mle => Criterion::Mle,
            };
        }
        if let Some(v) = self.estimator {
            cfg.estimator = v;
        }
        if let Some(v) = self.weight {
            cfg.weight = Some(match v {
                WeightArg::All => WeightSpec::AllEffects,
                WeightArg::Beta => WeightSpec::BetaOnly,
                WeightArg::Alpha => WeightSpec::AlphaOnly,
            });
        }
        cfg.sigma2 = self.sigma2.or(cfg.sigma2);
        cfg.seed = self.seed.or(cfg.seed);
        cfg.threads = self.threads.or(cfg.threads);
        cfg.drop_isolated |= self.drop_isolated;
        cfg.largest_component |= self.largest_component;
        cfg.write_surface |= self.write_surface;
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        cfg.validate()?;
        if let Some(n) = cfg.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| input_error(anyhow::anyhow!("thread pool: {e}")))?;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.print_defaults {
        print!("{}", RunConfig::defaults_toml()?);
        return Ok(());
    }
    match cli.command {
        None => Err(input_error(anyhow::anyhow!("no subcommand given; see --help"))),
        Some(Command::Estimate(c)) => commands::estimate(&c.resolve()?),
        Some(Command::Diagnose(c)) => commands::diagnose(&c.resolve()?),
        Some(Command::Simulate(c)) => commands::simulate(&c.resolve()?),
        Some(Command::Crosstab { first, second, unit_type, common }) => {
            commands::crosstab(&common.resolve()?, &first, &second, &unit_type)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_kind(&e) as u8)
        }
    }
}
