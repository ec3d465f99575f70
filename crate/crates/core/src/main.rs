use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pure_explore::error::{Error, Result};
use pure_explore::harness::{
    run_trials, suite_sweep, write_report, Algorithm, InstanceSource, ReportFormat, SeqSpec, Suite, TrialConfig,
    TrialReport,
};
use pure_explore::instances::{clustered_instance, LowerBoundFamilySpec};
use pure_explore::model::Family;

#[derive(Parser)]
#[command(name = "pure-explore", version, about = "Pure-exploration bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 100)]
    trials: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run under the parallel-simulation wrapper.
    #[arg(long)]
    sim_wrap: bool,
    #[arg(long)]
    max_rounds: Option<u32>,
    /// Report file; `.json` writes JSON, anything else CSV. Defaults to CSV on stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record per-trial wall time (reports are then no longer reproducible).
    #[arg(long)]
    wall_time: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether an arm lies above or below a threshold.
    Sign {
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        xi: f64,
        #[arg(long)]
        gap: f64,
        #[arg(long, default_value = "geom:e")]
        seq: String,
        #[arg(long, default_value = "gaussian")]
        family: String,
        #[command(flatten)]
        common: Common,
    },
    /// Identify the best arm of an instance file.
    BestArm {
        #[arg(long)]
        instance: PathBuf,
        /// Return an epsilon-optimal arm instead.
        #[arg(long, requires = "epsilon")]
        pac: bool,
        #[arg(long)]
        epsilon: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a generated instance file.
    Gen {
        /// `clustered` or `lower-bound`.
        #[arg(long)]
        family: String,
        /// Comma-separated `key=value` pairs, e.g. `n=20,gap=0.2` or `m=2,n=32,xi=0,s=1+2`.
        #[arg(long, default_value = "")]
        params: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a built-in scaling sweep.
    Bench {
        /// `sign-scaling` or `clustered-scaling`.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 100)]
        trials: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn finish(cfg: TrialConfig, common: &Common) -> Result<()> {
    let report: TrialReport = run_trials(&cfg)?;
    match &common.out {
        Some(path) => write_report(&report, ReportFormat::from_path(path), path)?,
        None => std::io::stdout().write_all(report.to_csv()?.as_bytes())?,
    }
    let a = &report.aggregates;
    eprintln!(
        "{}: correct {}/{} mean pulls {} median {} p95 {}",
        report.label, a.correct, a.trials, a.mean_pulls, a.median_pulls, a.p95_pulls
    );
    Ok(())
}

fn configure(mut cfg: TrialConfig, common: &Common) -> TrialConfig {
    cfg.sim_wrap = common.sim_wrap;
    cfg.max_rounds = common.max_rounds;
    cfg.record_wall_time = common.wall_time;
    cfg
}

fn parse_params(s: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got '{part}'")))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn take<T: std::str::FromStr>(params: &mut BTreeMap<String, String>, key: &str, default: Option<T>) -> Result<T> {
    match params.remove(key) {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}"))),
        None => default.ok_or_else(|| Error::Config(format!("missing parameter {key}"))),
    }
}

fn generate(family: &str, params: &str, out: &Path) -> Result<()> {
    let mut p = parse_params(params)?;
    let inst = match family {
        "clustered" => {
            let n = take(&mut p, "n", None)?;
            let gap = take(&mut p, "gap", None)?;
            let best = take(&mut p, "best_mean", Some(0.7))?;
            let fam: Family = take::<String>(&mut p, "family", Some("gaussian".into()))?.parse()?;
            clustered_instance(n, gap, best, fam)?
        }
        "lower-bound" => {
            let m = take(&mut p, "m", None)?;
            let n = take(&mut p, "n", None)?;
            let xi = take(&mut p, "xi", Some(0.0))?;
            let levels = take::<String>(&mut p, "s", Some(String::new()))?;
            let levels = levels
                .split('+')
                .filter(|l| !l.is_empty())
                .map(|l| l.parse::<u32>().map_err(|_| Error::Config(format!("invalid level '{l}'"))))
                .collect::<Result<Vec<_>>>()?;
            LowerBoundFamilySpec::new(m, n, xi).with_levels(levels).build()?
        }
        _ => return Err(Error::Config(format!("unknown family '{family}'"))),
    };
    if let Some(k) = p.keys().next() {
        return Err(Error::Config(format!("unknown parameter {k}")));
    }
    inst.save(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sign {
            xi,
            gap,
            seq,
            family,
            common,
        } => {
            let seq: SeqSpec = seq.parse()?;
            let family: Family = family.parse()?;
            let mut cfg = TrialConfig::sign(xi, gap, common.delta, seq, common.trials, common.seed);
            cfg.source = InstanceSource::SignPair {
                xi,
                gap,
                family,
                sigma: 1.0,
            };
            finish(configure(cfg, &common), &common)
        }
        Command::BestArm {
            instance,
            pac,
            epsilon,
            common,
        } => {
            let algorithm = match (pac, epsilon) {
                (true, Some(epsilon)) => Algorithm::Pac { epsilon },
                (false, None) => Algorithm::DistrBasedElim,
                (false, Some(_)) => return Err(Error::Config("--epsilon requires --pac".into())),
                (true, None) => unreachable!("clap enforces --epsilon with --pac"),
            };
            let cfg = TrialConfig::new(
                algorithm,
                InstanceSource::File(instance),
                common.delta,
                common.trials,
                common.seed,
            );
            finish(configure(cfg, &common), &common)
        }
        Command::Gen { family, params, out } => generate(&family, &params, &out),
        Command::Bench {
            suite,
            trials,
            seed,
            out,
        } => {
            let suite: Suite = suite.parse()?;
            let table = suite_sweep(suite, trials, seed)?;
            table.write(&out)?;
            for row in &table.rows {
                eprintln!(
                    "{} param={} mean pulls {} ratio {}",
                    table.name,
                    row.param,
                    row.aggregates.mean_pulls,
                    row.ratio.map_or("-".into(), |r| format!("{r:.3}"))
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
