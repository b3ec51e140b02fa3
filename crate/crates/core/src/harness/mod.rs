//! Scenario loading, Monte-Carlo runs and result files.

pub mod config;
pub mod output;
pub mod sim;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fisher::Criterion;

pub use config::{Rosters, ScenarioConfig, ScenarioFile};
pub use output::{peb_csv, sig9, summarize, write_run, RunSummary};
pub use sim::{
    initial_positions, move_source, run_monte_carlo, run_monte_carlo_with, run_trial, stream_seed, MonteCarloResult,
    StepAggregate, StepRecord, TrialResult,
};

/// Fleet compositions compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RosterKind {
    /// Every UAV measures range only.
    Ranging,
    /// Every UAV measures bearing only.
    Bearing,
    /// Every UAV measures both.
    Joint,
    /// The rosters written in the scenario.
    Heterogeneous,
}

impl RosterKind {
    pub const ALL: [RosterKind; 4] = [Self::Ranging, Self::Bearing, Self::Joint, Self::Heterogeneous];

    pub fn label(self) -> &'static str {
        match self {
            Self::Ranging => "ranging",
            Self::Bearing => "bearing",
            Self::Joint => "joint",
            Self::Heterogeneous => "heterogeneous",
        }
    }

    /// The scenario with this fleet composition.
    pub fn apply(self, cfg: &ScenarioConfig) -> Result<ScenarioConfig> {
        let n = cfg.num_uavs;
        let rosters = match self {
            Self::Ranging => Rosters::all_ranging(n),
            Self::Bearing => Rosters::all_bearing(n),
            Self::Joint => Rosters::all_joint(n),
            Self::Heterogeneous => cfg.rosters.clone(),
        };
        cfg.clone().with_rosters(rosters)
    }
}

/// One curve of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSeries {
    pub roster: RosterKind,
    pub criterion: Criterion,
    pub result: MonteCarloResult,
}

/// Runs both criteria for every requested roster.
pub fn sweep(cfg: &ScenarioConfig, rosters: &[RosterKind]) -> Result<Vec<SweepSeries>> {
    let mut out = Vec::new();
    for &roster in rosters {
        let base = roster.apply(cfg)?;
        for criterion in [Criterion::AOptimal, Criterion::DOptimal] {
            let mut c = base.clone();
            c.criterion = criterion;
            out.push(SweepSeries { roster, criterion, result: run_monte_carlo(&c)? });
        }
    }
    Ok(out)
}

/// Wide CSV: one row per step, mean PEB and singular fraction per curve.
pub fn sweep_csv(series: &[SweepSeries]) -> String {
    let mut out = String::from("step");
    for s in series {
        let name = format!("{}_{}", s.roster.label(), s.criterion.label());
        let _ = write!(out, ",{name}_mean_peb_m,{name}_singular_fraction");
    }
    out.push('\n');
    let steps = series.first().map_or(0, |s| s.result.per_step.len());
    for k in 0..steps {
        let _ = write!(out, "{}", series[0].result.per_step[k].step);
        for s in series {
            let a = s.result.per_step[k];
            let _ = write!(out, ",{},{}", sig9(a.mean_peb), sig9(a.singular_fraction));
        }
        out.push('\n');
    }
    out
}
