//! CSV and JSON writers. Floats carry 9 significant digits.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use super::config::ScenarioConfig;
use super::sim::{MonteCarloResult, StepAggregate};

/// Formats `x` rounded to 9 significant digits, shortest form.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("float round-trips through text");
    format!("{rounded}")
}

/// Rounds to 9 significant digits, mapping non-finite values to `None`.
fn json9(x: f64) -> Option<f64> {
    x.is_finite().then(|| format!("{x:.8e}").parse().expect("float round-trips through text"))
}

pub fn peb_csv(per_step: &[StepAggregate]) -> String {
    let mut out = String::from("step,mean_peb_m,singular_fraction\n");
    for s in per_step {
        let _ = writeln!(out, "{},{},{}", s.step, sig9(s.mean_peb), sig9(s.singular_fraction));
    }
    out
}

pub fn write_trajectories<W: Write>(result: &MonteCarloResult, mut w: W) -> io::Result<()> {
    writeln!(w, "trial,step,uav_id,x,y,z")?;
    for t in &result.trials {
        for r in &t.records {
            for (i, p) in r.positions.iter().enumerate() {
                writeln!(w, "{},{},{},{},{},{}", t.trial, r.step, i + 1, sig9(p.x), sig9(p.y), sig9(p.z))?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationCounts {
    /// Steps where some pair of UAVs was closer than the separation.
    pub uav_uav: usize,
    /// Steps where some UAV was closer to the source than allowed.
    pub uav_source: usize,
    /// Steps where some UAV was closer to a building than allowed.
    pub uav_obstacle: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub criterion: String,
    pub estimator: String,
    pub num_uavs: usize,
    pub trials: usize,
    pub steps: usize,
    pub seed: u64,
    pub final_mean_peb_m: Option<f64>,
    pub final_singular_fraction: Option<f64>,
    /// UAV-steps that used the random fallback.
    pub fallback_count: usize,
    /// UAV-steps whose limits could not all be met.
    pub infeasible_count: usize,
    pub constraint_violations: ViolationCounts,
    pub min_inter_uav_distance_m: Option<f64>,
    pub min_source_distance_m: Option<f64>,
    pub min_obstacle_distance_m: Option<f64>,
}

pub fn summarize(cfg: &ScenarioConfig, result: &MonteCarloResult) -> RunSummary {
    let mut violations = ViolationCounts { uav_uav: 0, uav_source: 0, uav_obstacle: 0 };
    let (mut min_uav, mut min_src, mut min_obs) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for r in result.trials.iter().flat_map(|t| &t.records) {
        violations.uav_uav += usize::from(r.min_uav_distance < cfg.control.d_star_uav);
        violations.uav_source += usize::from(r.min_source_distance < cfg.control.d_star_source);
        violations.uav_obstacle += usize::from(r.min_obstacle_distance < cfg.control.d_star_obstacle);
        min_uav = min_uav.min(r.min_uav_distance);
        min_src = min_src.min(r.min_source_distance);
        min_obs = min_obs.min(r.min_obstacle_distance);
    }
    let last = result.final_step();
    RunSummary {
        criterion: cfg.criterion.label().into(),
        estimator: format!("{:?}", cfg.estimator).to_lowercase(),
        num_uavs: cfg.num_uavs,
        trials: cfg.trials,
        steps: cfg.steps,
        seed: cfg.seed,
        final_mean_peb_m: json9(last.mean_peb),
        final_singular_fraction: json9(last.singular_fraction),
        fallback_count: result.fallback_count(),
        infeasible_count: result.infeasible_count(),
        constraint_violations: violations,
        min_inter_uav_distance_m: json9(min_uav),
        min_source_distance_m: json9(min_src),
        min_obstacle_distance_m: json9(min_obs),
    }
}

/// Writes `peb.csv`, `trajectories.csv` and `summary.json` into `dir`.
pub fn write_run(dir: &Path, cfg: &ScenarioConfig, result: &MonteCarloResult) -> io::Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("peb.csv"), peb_csv(&result.per_step))?;
    let file = std::fs::File::create(dir.join("trajectories.csv"))?;
    let mut w = io::BufWriter::new(file);
    write_trajectories(result, &mut w)?;
    w.flush()?;
    let summary = summarize(cfg, result);
    let json = serde_json::to_string_pretty(&summary).map_err(io::Error::other)?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(summary)
}
