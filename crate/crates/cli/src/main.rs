use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use skewrec::experiments::{
    self, AlphaSpec, CocycleChoice, DefeatOmegaConfig, GenericRecurrenceConfig, IetRecurrenceConfig, LyapunovConfig,
    OmegaSpec, Report,
};
use skewrec::{Error, RauzyLoop};

/// Recurrence experiments for integer-valued cocycles over rotations and
/// interval exchanges.
///
/// Each command reads an optional JSON config; flags override its fields.
/// Every output file starts with a provenance line naming the seed and a
/// hash of the resolved config.
#[derive(Parser)]
#[command(name = "skewrec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// C_k tables, divergence partial sums and zeta curves for chosen rotation numbers.
    GenericRecurrence(GenericArgs),
    /// Forge a rotation number that defeats n^-eps and certify the zeta bound.
    DefeatOmega(DefeatArgs),
    /// Spectrum, sup-growth and zeta curves for the interval exchange of a Rauzy loop.
    IetRecurrence(IetArgs),
    /// Growth exponent of max |S_n| across rotation numbers.
    Lyapunov(LyapunovArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every sampled quantity; required unless the config sets one.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated increasing horizons.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    /// Output directory.
    #[arg(long, default_value = "skewrec-out")]
    out: PathBuf,
}

#[derive(Args)]
struct GenericArgs {
    #[command(flatten)]
    common: Common,
    /// Digit list like `[2,1,4]`, `[2,2,...]`, or `gauss:<seed>:<depth>`; repeatable.
    #[arg(long)]
    alpha: Vec<String>,
    /// Extra Gauss-distributed rotation numbers drawn from the seed.
    #[arg(long)]
    alpha_samples: Option<usize>,
    /// `1/n`, `n^-z`, or `z=..,m=..,iter=a..b`.
    #[arg(long)]
    omega: Option<String>,
    /// `staircase` or `constant:<c>`.
    #[arg(long)]
    cocycle: Option<String>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args)]
struct DefeatArgs {
    #[command(flatten)]
    common: Common,
    /// Exponent of the weight n^-eps; must exceed 1/2.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Orbit steps simulated exactly per sampled point.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    comparison_alpha: Option<String>,
}

#[derive(Args)]
struct IetArgs {
    #[command(flatten)]
    common: Common,
    /// Rauzy loop as inline JSON or a path to a JSON file.
    #[arg(long = "loop")]
    rauzy_loop: Option<String>,
    /// Comma-separated cocycle value per interval.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    phi: Option<Vec<i64>>,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct LyapunovArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    alpha: Vec<String>,
    #[arg(long)]
    cocycle: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
}

fn load<C: DeserializeOwned>(common: &Common, defaults: impl FnOnce(u64) -> C) -> skewrec::Result<C> {
    match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            experiments::parse_config(&text).map_err(|e| match e {
                Error::Invalid(msg) => Error::Invalid(format!("{}: {msg}", path.display())),
                other => other,
            })
        }
        None => {
            let seed = common
                .seed
                .ok_or_else(|| Error::Invalid("--seed is required without --config".into()))?;
            Ok(defaults(seed))
        }
    }
}

fn alphas(raw: &[String]) -> Option<Vec<AlphaSpec>> {
    (!raw.is_empty()).then(|| raw.iter().map(|s| AlphaSpec::text(s)).collect())
}

fn rauzy_loop(arg: &str) -> skewrec::Result<RauzyLoop> {
    if arg.trim_start().starts_with('{') {
        RauzyLoop::from_json(arg)
    } else {
        RauzyLoop::from_json(&fs::read_to_string(arg)?)
    }
}

fn run(command: Command) -> skewrec::Result<(Report, PathBuf)> {
    match command {
        Command::GenericRecurrence(a) => {
            let mut cfg = load(&a.common, GenericRecurrenceConfig::new)?;
            cfg.seed = a.common.seed.unwrap_or(cfg.seed);
            cfg.horizons = a.common.horizons.clone().unwrap_or(cfg.horizons);
            cfg.alpha = alphas(&a.alpha).unwrap_or(cfg.alpha);
            cfg.alpha_samples = a.alpha_samples.unwrap_or(cfg.alpha_samples);
            cfg.omega = a.omega.map(OmegaSpec::Text).unwrap_or(cfg.omega);
            cfg.cocycle = a.cocycle.map(CocycleChoice::Named).unwrap_or(cfg.cocycle);
            cfg.levels = a.levels.unwrap_or(cfg.levels);
            cfg.points = a.points.unwrap_or(cfg.points);
            Ok((experiments::generic_recurrence(&cfg)?, a.common.out))
        }
        Command::DefeatOmega(a) => {
            let mut cfg = match &a.common.config {
                Some(_) => load(&a.common, |_| unreachable!())?,
                None => {
                    let eps = a.eps.ok_or_else(|| Error::Invalid("--eps is required without --config".into()))?;
                    load(&a.common, |seed| DefeatOmegaConfig::new(eps, seed))?
                }
            };
            cfg.seed = a.common.seed.unwrap_or(cfg.seed);
            cfg.horizons = a.common.horizons.clone().unwrap_or(cfg.horizons);
            cfg.eps = a.eps.unwrap_or(cfg.eps);
            cfg.depth = a.depth.unwrap_or(cfg.depth);
            cfg.samples = a.samples.unwrap_or(cfg.samples);
            cfg.budget = a.budget.unwrap_or(cfg.budget);
            cfg.comparison_alpha = a
                .comparison_alpha
                .as_deref()
                .map(AlphaSpec::text)
                .unwrap_or(cfg.comparison_alpha);
            Ok((experiments::defeat_omega(&cfg)?, a.common.out))
        }
        Command::IetRecurrence(a) => {
            let mut cfg = load(&a.common, IetRecurrenceConfig::new)?;
            cfg.seed = a.common.seed.unwrap_or(cfg.seed);
            cfg.horizons = a.common.horizons.clone().unwrap_or(cfg.horizons);
            if let Some(l) = &a.rauzy_loop {
                cfg.rauzy_loop = rauzy_loop(l)?;
            }
            cfg.phi = a.phi.or(cfg.phi);
            cfg.bits = a.bits.unwrap_or(cfg.bits);
            cfg.samples = a.samples.unwrap_or(cfg.samples);
            Ok((experiments::iet_recurrence(&cfg)?, a.common.out))
        }
        Command::Lyapunov(a) => {
            let mut cfg = load(&a.common, LyapunovConfig::new)?;
            cfg.seed = a.common.seed.unwrap_or(cfg.seed);
            cfg.horizons = a.common.horizons.clone().unwrap_or(cfg.horizons);
            cfg.alpha = alphas(&a.alpha).unwrap_or(cfg.alpha);
            cfg.cocycle = a.cocycle.map(CocycleChoice::Named).unwrap_or(cfg.cocycle);
            cfg.samples = a.samples.unwrap_or(cfg.samples);
            Ok((experiments::lyapunov(&cfg)?, a.common.out))
        }
    }
}

fn write_report(report: &Report, out: &Path) -> std::io::Result<()> {
    fs::create_dir_all(out)?;
    for o in &report.outputs {
        fs::write(out.join(&o.name), &o.contents)?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid(_) | Error::NotPrimitive | Error::NonzeroMean | Error::HorizonExceeded { .. } => 2,
        Error::PrecisionExhausted { .. } | Error::SignUnresolved { .. } | Error::RauzyTie => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli.command).and_then(|(report, out)| {
        write_report(&report, &out)?;
        Ok((report, out))
    });
    match result {
        Ok((report, out)) => {
            for line in &report.summary {
                println!("{line}");
            }
            for o in &report.outputs {
                println!("wrote {}", out.join(&o.name).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("skewrec: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
