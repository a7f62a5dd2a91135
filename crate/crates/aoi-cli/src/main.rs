//! `aoi` — evaluate, simulate, and optimize status-update policies
//! over an erasure channel with feedback.
//!
//! Four subcommands: `eval` (analytic age metrics for one policy),
//! `simulate` (seeded Monte Carlo with confidence intervals),
//! `optimize` (exhaustive search, optionally structurally pruned), and
//! `figures` (CSV tables comparing policy families across erasure
//! rates). All numbers come straight from the library; this binary
//! only parses arguments and formats rows.
//!
//! Exit codes: 0 on success, 2 for usage errors, 3 for numeric or
//! pathology errors (starved simulations, oversized search spaces,
//! unwritable output).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use aoi_erasure::analytic::aoi;
use aoi_erasure::closed_form::paoi_lower_bound_policy;
use aoi_erasure::opt::{
    average_aoi_figure, default_epsilon_grid, optimize, peak_aoi_figure, prune_bound_paoi,
    Objective, SearchSpace, SweepRow,
};
use aoi_erasure::sim::{simulate, SimConfig};
use aoi_erasure::{Cap, ErasureChannel, Error, Policy};

#[derive(Parser)]
#[command(
    name = "aoi",
    version,
    about = "Age-of-information analysis for multi-packet updates over an erasure channel"
)]
struct Cli {
    /// Output format for result rows.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker thread count (default: AOI_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    /// One JSON object per row.
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    /// Long-run time-average age.
    Aoi,
    /// Mean age just before each delivery.
    Paoi,
}

impl From<ObjectiveArg> for Objective {
    fn from(a: ObjectiveArg) -> Objective {
        match a {
            ObjectiveArg::Aoi => Objective::AverageAoi,
            ObjectiveArg::Paoi => Objective::PeakAoi,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Packets per update.
    #[arg(long)]
    k: u32,
    /// Erasure probability in [0, 1).
    #[arg(long)]
    eps: f64,
    /// Cap list like "1,2,inf", or a named policy:
    /// all-ones | all-inf | paoi-lb.
    #[arg(long)]
    policy: String,
}

#[derive(Subcommand)]
enum Command {
    /// Exact average and peak age for one policy.
    Eval(EvalArgs),
    /// Monte Carlo estimate with 95% confidence halfwidths.
    Simulate {
        #[command(flatten)]
        eval: EvalArgs,
        /// Slots per replication.
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        /// Base RNG seed; replication i uses stream i.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Independent replications.
        #[arg(long, default_value_t = 20)]
        reps: u32,
        /// Slots to discard before measuring.
        #[arg(long, default_value_t = 0)]
        warmup: u64,
    },
    /// Exhaustive search for the best policy.
    Optimize {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        /// Largest finite cap searched per coordinate.
        #[arg(long, default_value_t = 12)]
        cap_max: u32,
        /// Exclude the unbounded cap from the space.
        #[arg(long)]
        no_unbounded: bool,
        /// Shrink the space with the proven peak-optimum structure
        /// (peak objective only).
        #[arg(long)]
        prune: bool,
    },
    /// Write policy-comparison tables (average_aoi.csv, peak_aoi.csv).
    Figures {
        #[arg(long, default_value_t = 5)]
        k: u32,
        /// Comma-separated erasure rates (default 0.05..0.90 step 0.05).
        #[arg(long)]
        eps_grid: Option<String>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

/// One result row; `ci_halfwidth` stays empty for exact values.
#[derive(Serialize)]
struct OutputRecord {
    command: &'static str,
    k: u32,
    epsilon: f64,
    policy: String,
    objective: &'static str,
    value: f64,
    ci_halfwidth: Option<f64>,
    provenance: &'static str,
    detail: String,
}

#[derive(Serialize)]
struct FigureRow {
    epsilon: f64,
    policy_label: String,
    value: f64,
}

enum CliError {
    Usage(String),
    Lib(Error),
    Io(std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Lib(e) => match e {
                // Malformed inputs are usage errors; runtime blow-ups
                // (starved runs, oversized spaces) are pathologies.
                Error::EmptyPolicy
                | Error::ZeroCap
                | Error::BadCapToken(_)
                | Error::BadEpsilon(_)
                | Error::BadSimWindow { .. }
                | Error::NoReplications
                | Error::WrongPolicyLength { .. } => 2,
                Error::EnumerationTooLarge { .. }
                | Error::NoCompletedCycles { .. }
                | Error::SearchSpaceTooLarge { .. }
                | Error::EmptySearchCoordinate { .. } => 3,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
            CliError::Io(e) => e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("AOI_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    if let Some(n) = n.filter(|&n| n > 0) {
        // Ignore the error if a pool already exists (tests, reuse).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

/// Expands a policy argument: a named family or the cap-list grammar.
/// The cap list must have exactly `k` entries.
fn resolve_policy(text: &str, k: u32, channel: ErasureChannel) -> Result<Policy, CliError> {
    let policy = match text {
        "all-ones" => Policy::all_ones(k)?,
        "all-inf" => Policy::all_unbounded(k)?,
        "paoi-lb" => paoi_lower_bound_policy(k, channel),
        caps => caps.parse::<Policy>()?,
    };
    if policy.k() != k {
        return Err(CliError::Lib(Error::WrongPolicyLength {
            expected: k as usize,
            got: policy.k() as usize,
        }));
    }
    Ok(policy)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Eval(args) => {
            let channel = ErasureChannel::new(args.eps)?;
            let policy = resolve_policy(&args.policy, args.k, channel)?;
            let r = aoi(&policy, channel);
            let record = |objective, value| OutputRecord {
                command: "eval",
                k: args.k,
                epsilon: args.eps,
                policy: policy.to_string(),
                objective,
                value,
                ci_halfwidth: None,
                provenance: "analytic",
                detail: String::new(),
            };
            emit(
                cli.format,
                &[record("avg_aoi", r.average_aoi), record("paoi", r.peak_aoi)],
            )
        }
        Command::Simulate {
            eval,
            horizon,
            seed,
            reps,
            warmup,
        } => {
            let channel = ErasureChannel::new(eval.eps)?;
            let policy = resolve_policy(&eval.policy, eval.k, channel)?;
            let config = SimConfig {
                horizon,
                seed,
                replications: reps,
                warmup,
            };
            let stats = simulate(&policy, channel, &config)?;
            let detail = format!(
                "n_successes={};n_terminations={};emp_e_s={};emp_e_dtot={}",
                stats.n_successes, stats.n_terminations, stats.emp_e_s, stats.emp_e_dtot
            );
            let record = |objective, value, ci| OutputRecord {
                command: "simulate",
                k: eval.k,
                epsilon: eval.eps,
                policy: policy.to_string(),
                objective,
                value,
                ci_halfwidth: Some(ci),
                provenance: "simulated",
                detail: detail.clone(),
            };
            emit(
                cli.format,
                &[
                    record("avg_aoi", stats.avg_aoi_mean, stats.avg_aoi_ci_halfwidth),
                    record("paoi", stats.paoi_mean, stats.paoi_ci_halfwidth),
                ],
            )
        }
        Command::Optimize {
            k,
            eps,
            objective,
            cap_max,
            no_unbounded,
            prune,
        } => {
            let channel = ErasureChannel::new(eps)?;
            let objective = Objective::from(objective);
            let mut space = SearchSpace::new(objective);
            space.cap_max = cap_max;
            space.include_unbounded = !no_unbounded;
            if prune {
                if objective != Objective::PeakAoi {
                    return Err(CliError::Usage(
                        "--prune uses peak-optimum structure; it requires --objective paoi".into(),
                    ));
                }
                space = prune_bound_paoi(k as usize, channel, &space)?;
            }
            let r = optimize(k as usize, channel, &space)?;
            if r.best_policy.caps().contains(&Cap::Finite(cap_max)) {
                eprintln!(
                    "warning: best policy {} touches --cap-max {cap_max}; \
                     a larger cap may score better",
                    r.best_policy
                );
            }
            let ties = r
                .ties
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join("|");
            let record = OutputRecord {
                command: "optimize",
                k,
                epsilon: eps,
                policy: r.best_policy.to_string(),
                objective: objective.label(),
                value: r.best_value,
                ci_halfwidth: None,
                provenance: "analytic",
                detail: format!("evaluated={};pruned={};ties={ties}", r.evaluated, r.pruned),
            };
            emit(cli.format, &[record])
        }
        Command::Figures {
            k,
            eps_grid,
            out_dir,
        } => {
            let grid = match eps_grid {
                Some(text) => parse_grid(&text)?,
                None => default_epsilon_grid(),
            };
            let avg = average_aoi_figure(k as usize, &grid)?;
            let peak = peak_aoi_figure(k as usize, &grid)?;
            for (name, rows) in [("average_aoi.csv", avg), ("peak_aoi.csv", peak)] {
                let path = out_dir.join(name);
                write_figure(&path, &rows)?;
                eprintln!("wrote {} ({} rows)", path.display(), rows.len());
            }
            Ok(())
        }
    }
}

fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let eps: f64 = tok
                .parse()
                .map_err(|_| CliError::Usage(format!("bad erasure rate '{tok}' in grid")))?;
            ErasureChannel::new(eps)?; // validates the range
            Ok(eps)
        })
        .collect()
}

fn write_figure(path: &std::path::Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(FigureRow {
            epsilon: row.epsilon,
            policy_label: row.label.clone(),
            value: row.value,
        })?;
    }
    w.flush()?;
    Ok(())
}

fn emit(format: Format, records: &[OutputRecord]) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut lock);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            for r in records {
                let line =
                    serde_json::to_string(r).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
                writeln!(lock, "{line}")?;
            }
        }
    }
    Ok(())
}
