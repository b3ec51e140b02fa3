use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use coopnav::estimator::EstimatorMode;
use coopnav::fisher::Criterion;
use coopnav::harness::{self, RosterKind, ScenarioConfig};

#[derive(Parser)]
#[command(name = "coopnav", version, about = "Cooperative UAV navigation for RF source localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    #[value(name = "a-opt")]
    AOpt,
    #[value(name = "d-opt")]
    DOpt,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Oracle,
    Ml,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo batch and write peb.csv, trajectories.csv, summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        criterion: Option<CriterionArg>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        estimator: Option<EstimatorArg>,
        /// Std of the oracle estimate jitter, meters.
        #[arg(long)]
        jitter: Option<f64>,
    },
    /// Check a scenario file and print what it describes.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run both criteria for one or all fleet compositions.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to all four compositions.
        #[arg(long, value_enum)]
        roster: Option<RosterKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run { config, criterion, trials, steps, seed, out, estimator, jitter } => {
            let mut cfg = ScenarioConfig::from_path(&config)?;
            if let Some(c) = criterion {
                cfg.criterion = match c {
                    CriterionArg::AOpt => Criterion::AOptimal,
                    CriterionArg::DOpt => Criterion::DOptimal,
                };
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = steps {
                cfg.steps = s;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = estimator {
                cfg.estimator = match e {
                    EstimatorArg::Oracle => EstimatorMode::Oracle,
                    EstimatorArg::Ml => EstimatorMode::Ml,
                };
            }
            if let Some(j) = jitter {
                if !(j >= 0.0 && j.is_finite()) {
                    return Err("--jitter must be a non-negative number".into());
                }
                cfg.jitter_std = j;
            }
            if cfg.trials == 0 {
                return Err("--trials must be at least 1".into());
            }
            if cfg.steps == 0 {
                return Err("--steps must be at least 1".into());
            }
            let result = harness::run_monte_carlo(&cfg)?;
            let summary = harness::write_run(&out, &cfg, &result)?;
            println!(
                "{} trials x {} steps ({}): final mean PEB {} m, singular fraction {}, fallbacks {}",
                summary.trials,
                summary.steps,
                summary.criterion,
                summary.final_mean_peb_m.map_or("n/a".into(), harness::sig9),
                summary.final_singular_fraction.map_or("n/a".into(), harness::sig9),
                summary.fallback_count,
            );
        }
        Command::Validate { config } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            let (r, b, j) = cfg.role_counts();
            println!(
                "ok: {} UAVs ({r} ranging, {b} bearing, {j} joint), {} obstacles, {} steps, {} trials, criterion {}",
                cfg.num_uavs,
                cfg.obstacles.len(),
                cfg.steps,
                cfg.trials,
                cfg.criterion.label()
            );
        }
        Command::Sweep { config, roster, out } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            let rosters: Vec<RosterKind> = roster.map_or(RosterKind::ALL.to_vec(), |r| vec![r]);
            let series = harness::sweep(&cfg, &rosters)?;
            for s in &series {
                let last = s.result.final_step();
                println!(
                    "{:<13} {}: final mean PEB {} m, singular fraction {}, fallbacks {}",
                    s.roster.label(),
                    s.criterion.label(),
                    harness::sig9(last.mean_peb),
                    harness::sig9(last.singular_fraction),
                    s.result.fallback_count()
                );
            }
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("sweep.csv"), harness::sweep_csv(&series))?;
            }
        }
    }
    Ok(())
}
