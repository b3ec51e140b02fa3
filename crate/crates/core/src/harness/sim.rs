//! Closed-loop simulation of one trial and Monte-Carlo batches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{compute_control, ControlContext};
use crate::error::Result;
use crate::estimator::{default_init, ml_estimate, oracle_estimate, EstimatorMode};
use crate::fisher::{assemble_fim, cost, peb};
use crate::geometry::{distance_point_to_box, Vec3};
use crate::kinematics::{apply_transition, UavState};
use crate::network::{disseminate, initialize_views, MeasurementHistory, NetworkView};
use crate::sensing::{sense, Measurement};

use super::config::{ScenarioConfig, SourcePath};

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the random stream owned by one UAV in one trial.
pub fn stream_seed(base: u64, trial: usize, uav: usize) -> u64 {
    base ^ mix(mix(trial as u64) ^ (uav as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn stream_rng(base: u64, trial: usize, uav: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(base, trial, uav))
}

/// Formation at deployment, by 0-based index.
pub fn initial_positions(cfg: &ScenarioConfig) -> Vec<Vec3<f64>> {
    let n = cfg.num_uavs;
    let c = Vec3::from_array(cfg.ellipse.center);
    (0..n)
        .map(|i| {
            let angle = std::f64::consts::TAU * i as f64 / n as f64;
            let mut p = c + Vec3::new(cfg.ellipse.radius_x * angle.cos(), 0.0, cfg.ellipse.radius_z * angle.sin());
            p.z = p.z.clamp(cfg.limits.z_min, cfg.limits.z_max);
            p
        })
        .collect()
}

/// Source position after `step` steps: travels from `start` through the
/// waypoints at constant speed, then holds. Clamped to the perimeter.
pub fn move_source(start: Vec3<f64>, path: Option<&SourcePath>, step: usize) -> Vec3<f64> {
    let Some(path) = path else {
        return start;
    };
    let mut remaining = path.speed * step as f64;
    let mut at = start;
    for &w in &path.waypoints {
        let leg = w.distance(at);
        if remaining <= leg {
            if leg > 0.0 {
                at = at + (w - at) * (remaining / leg);
            }
            break;
        }
        remaining -= leg;
        at = w;
    }
    match &path.perimeter {
        Some(b) => b.closest_point(at),
        None => at,
    }
}

/// Snapshot of the fleet after step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub source: Vec3<f64>,
    pub positions: Vec<Vec3<f64>>,
    /// Position error bound at the true source from each UAV's view;
    /// infinite when that view's information is singular.
    pub peb: Vec<f64>,
    /// Criterion value of each view at the UAV's own source estimate; NaN
    /// when there is no estimate or the information is singular.
    pub cost: Vec<f64>,
    pub los: Vec<bool>,
    /// UAVs that moved at random to reach this step.
    pub fallbacks: usize,
    /// UAVs whose limits could not all be met on the way here.
    pub infeasible: usize,
    pub min_uav_distance: f64,
    pub min_source_distance: f64,
    pub min_obstacle_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub records: Vec<StepRecord>,
}

impl TrialResult {
    pub fn fallback_count(&self) -> usize {
        self.records.iter().map(|r| r.fallbacks).sum()
    }

    pub fn infeasible_count(&self) -> usize {
        self.records.iter().map(|r| r.infeasible).sum()
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    cfg: &ScenarioConfig,
    step: usize,
    source: Vec3<f64>,
    states: &[UavState<f64>],
    views: &[NetworkView<f64>],
    fresh: &[Measurement<f64>],
    estimates: &[Option<Vec3<f64>>],
    fallbacks: usize,
    infeasible: usize,
) -> StepRecord {
    let positions: Vec<_> = states.iter().map(|s| s.position).collect();
    let peb_values = views.iter().map(|v| peb(&assemble_fim(v, source, &cfg.channel).fim)).collect();
    let cost_values = views
        .iter()
        .zip(estimates)
        .map(|(v, e)| {
            e.and_then(|src| cost(&assemble_fim(v, src, &cfg.channel).fim, cfg.criterion).ok()).unwrap_or(f64::NAN)
        })
        .collect();
    let mut min_uav = f64::INFINITY;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            min_uav = min_uav.min(positions[i].distance(positions[j]));
        }
    }
    let min_source = positions.iter().map(|p| p.distance(source)).fold(f64::INFINITY, f64::min);
    let min_obstacle = positions
        .iter()
        .flat_map(|p| cfg.obstacles.iter().map(move |b| distance_point_to_box(*p, b)))
        .fold(f64::INFINITY, f64::min);
    StepRecord {
        step,
        source,
        positions,
        peb: peb_values,
        cost: cost_values,
        los: fresh.iter().map(|m| m.los).collect(),
        fallbacks,
        infeasible,
        min_uav_distance: min_uav,
        min_source_distance: min_source,
        min_obstacle_distance: min_obstacle,
    }
}

fn update_estimates(
    cfg: &ScenarioConfig,
    source: Vec3<f64>,
    views: &[NetworkView<f64>],
    estimates: &mut [Option<Vec3<f64>>],
    rngs: &mut [ChaCha8Rng],
) {
    for (i, est) in estimates.iter_mut().enumerate() {
        match cfg.estimator {
            EstimatorMode::Oracle => {
                *est = oracle_estimate(source, cfg.jitter_std, &mut rngs[i]).usable();
            }
            EstimatorMode::Ml => {
                let init = est.unwrap_or_else(|| default_init(&views[i]));
                if let Some(p) = ml_estimate(&views[i], &cfg.channel, init).usable() {
                    *est = Some(p);
                }
            }
        }
    }
}

/// Runs one trial. Records are taken at steps `0..=cfg.steps`.
///
/// Each step: every UAV picks a control from its current view and estimate,
/// all move, the source moves, everyone senses, measurements are relayed,
/// estimates refresh, and the state is recorded.
pub fn run_trial(cfg: &ScenarioConfig, trial: usize) -> Result<TrialResult> {
    let n = cfg.num_uavs;
    let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| stream_rng(cfg.seed, trial, i)).collect();
    let mut states: Vec<UavState<f64>> =
        initial_positions(cfg).into_iter().enumerate().map(|(i, p)| UavState::new(i + 1, p, cfg.roles[i])).collect();
    let ctx = ControlContext {
        params: &cfg.channel,
        limits: &cfg.limits,
        config: &cfg.control,
        criterion: cfg.criterion,
        obstacles: &cfg.obstacles,
    };

    let mut source = move_source(cfg.source, cfg.source_path.as_ref(), 0);
    let fresh = sense_all(cfg, &states, source, &mut rngs, 0)?;
    let mut history = MeasurementHistory::new(n, cfg.network.h_max.max(1));
    let mut views = initialize_views(&fresh, &mut history);
    let mut estimates = vec![None; n];
    update_estimates(cfg, source, &views, &mut estimates, &mut rngs);
    let mut records = Vec::with_capacity(cfg.steps + 1);
    records.push(record(cfg, 0, source, &states, &views, &fresh, &estimates, 0, 0));

    for step in 1..=cfg.steps {
        let mut fallbacks = 0;
        let mut infeasible = 0;
        let decisions: Vec<_> =
            (0..n).map(|i| compute_control(&states[i], &views[i], estimates[i], &ctx, &mut rngs[i])).collect();
        for (state, d) in states.iter_mut().zip(&decisions) {
            *state = apply_transition(state, &d.control);
            fallbacks += usize::from(d.fallback);
            infeasible += usize::from(d.infeasible);
        }
        source = move_source(cfg.source, cfg.source_path.as_ref(), step);
        let fresh = sense_all(cfg, &states, source, &mut rngs, step)?;
        let positions: Vec<_> = states.iter().map(|s| s.position).collect();
        disseminate(step, &fresh, &positions, &cfg.network, &mut history, &mut views)?;
        update_estimates(cfg, source, &views, &mut estimates, &mut rngs);
        records.push(record(cfg, step, source, &states, &views, &fresh, &estimates, fallbacks, infeasible));
    }
    Ok(TrialResult { trial, records })
}

fn sense_all(
    cfg: &ScenarioConfig,
    states: &[UavState<f64>],
    source: Vec3<f64>,
    rngs: &mut [ChaCha8Rng],
    step: usize,
) -> Result<Vec<Measurement<f64>>> {
    states
        .iter()
        .zip(rngs.iter_mut())
        .map(|(s, rng)| sense(s, source, &cfg.obstacles, &cfg.channel, rng, step))
        .collect()
}

/// Mean PEB over all UAVs and trials at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepAggregate {
    pub step: usize,
    /// Mean over non-singular views; NaN if every view is singular.
    pub mean_peb: f64,
    pub singular_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub trials: Vec<TrialResult>,
    pub per_step: Vec<StepAggregate>,
}

impl MonteCarloResult {
    pub fn final_step(&self) -> StepAggregate {
        *self.per_step.last().expect("at least one record")
    }

    pub fn fallback_count(&self) -> usize {
        self.trials.iter().map(TrialResult::fallback_count).sum()
    }

    pub fn infeasible_count(&self) -> usize {
        self.trials.iter().map(TrialResult::infeasible_count).sum()
    }
}

pub fn aggregate(trials: &[TrialResult]) -> Vec<StepAggregate> {
    let Some(first) = trials.first() else {
        return Vec::new();
    };
    (0..first.records.len())
        .map(|k| {
            let (mut sum, mut finite, mut total) = (0.0, 0usize, 0usize);
            for t in trials {
                for &p in &t.records[k].peb {
                    total += 1;
                    if p.is_finite() {
                        sum += p;
                        finite += 1;
                    }
                }
            }
            StepAggregate {
                step: first.records[k].step,
                mean_peb: if finite == 0 { f64::NAN } else { sum / finite as f64 },
                singular_fraction: if total == 0 { 0.0 } else { (total - finite) as f64 / total as f64 },
            }
        })
        .collect()
}

/// Runs `cfg.trials` independent trials, in parallel unless `sequential`.
/// Results are in trial order either way.
pub fn run_monte_carlo_with(cfg: &ScenarioConfig, sequential: bool) -> Result<MonteCarloResult> {
    let trials: Vec<TrialResult> = if sequential {
        (0..cfg.trials).map(|t| run_trial(cfg, t)).collect::<Result<_>>()?
    } else {
        (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect::<Result<_>>()?
    };
    let per_step = aggregate(&trials);
    Ok(MonteCarloResult { trials, per_step })
}

pub fn run_monte_carlo(cfg: &ScenarioConfig) -> Result<MonteCarloResult> {
    run_monte_carlo_with(cfg, false)
}
