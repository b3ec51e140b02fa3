//! Connectivity, hop counts and delayed multi-hop dissemination.
//!
//! A measurement produced by UAV `j` reaches UAV `i` after `h_ij - 1` steps,
//! where `h_ij` is the hop distance in the disk graph of radius `r_max`. Pairs
//! further apart than `h_max` hops receive nothing and keep whatever they
//! last stored.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{NavError, Result};
use crate::geometry::Vec3;
use crate::scalar::Scalar;
use crate::sensing::Measurement;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig<T> {
    /// Direct communication radius, meters.
    pub r_max: T,
    /// Largest hop count over which data is relayed.
    pub h_max: usize,
}

impl<T: Scalar> NetworkConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > T::zero()) {
            return Err(NavError::InvalidParameter("r_max must be positive".into()));
        }
        if self.h_max < 1 {
            return Err(NavError::InvalidParameter("h_max must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for NetworkConfig<f64> {
    fn default() -> Self {
        Self { r_max: 100.0, h_max: 1 }
    }
}

/// Undirected disk graph over UAV indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityGraph {
    adjacency: Vec<Vec<usize>>,
}

impl ConnectivityGraph {
    pub fn from_positions<T: Scalar>(positions: &[Vec3<T>], r_max: T) -> Self {
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if positions[i].distance(positions[j]) <= r_max {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        Self { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].contains(&j)
    }
}

/// All-pairs hop distances; `None` marks unreachable pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct HopMatrix {
    n: usize,
    hops: Vec<Option<usize>>,
}

impl HopMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<usize> {
        self.hops[i * self.n + j]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Largest finite hop count, `None` if the graph is disconnected.
    pub fn diameter(&self) -> Option<usize> {
        self.hops.iter().try_fold(0, |acc, h| h.map(|h| acc.max(h)))
    }
}

/// Breadth-first hop counts over the disk graph; `h_ii = 0`.
pub fn hop_counts<T: Scalar>(positions: &[Vec3<T>], r_max: T) -> HopMatrix {
    let graph = ConnectivityGraph::from_positions(positions, r_max);
    let n = graph.len();
    let mut hops = vec![None; n * n];
    let mut queue = VecDeque::new();
    for src in 0..n {
        let row = &mut hops[src * n..(src + 1) * n];
        row[src] = Some(0);
        queue.clear();
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let next = row[u].map(|h| h + 1);
            for &w in graph.neighbors(u) {
                if row[w].is_none() {
                    row[w] = next;
                    queue.push_back(w);
                }
            }
        }
    }
    HopMatrix { n, hops }
}

/// What one UAV knows about each peer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkView<T> {
    /// 0-based index of the owning UAV.
    pub owner: usize,
    entries: Vec<Option<Measurement<T>>>,
}

impl<T: Scalar> NetworkView<T> {
    pub fn empty(owner: usize, n: usize) -> Self {
        Self { owner, entries: vec![None; n] }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(Option::is_none)
    }

    pub fn entry(&self, peer: usize) -> Option<&Measurement<T>> {
        self.entries[peer].as_ref()
    }

    pub fn set_entry(&mut self, peer: usize, m: Measurement<T>) {
        self.entries[peer] = Some(m);
    }

    /// Stored measurements with their peer index.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Measurement<T>)> + '_ {
        self.entries.iter().enumerate().filter_map(|(j, e)| e.as_ref().map(|m| (j, m)))
    }

    /// `step - timestamp` for the stored entry about `peer`.
    pub fn age(&self, peer: usize, step: usize) -> Option<usize> {
        self.entry(peer).map(|m| step.saturating_sub(m.timestamp))
    }

    /// Copy of the view with the owner's recorded position replaced.
    pub fn with_owner_position(&self, position: Vec3<T>) -> Self {
        let mut out = self.clone();
        if let Some(m) = out.entries[self.owner].as_mut() {
            m.uav_position = position;
        }
        out
    }
}

/// Sliding window of the last `depth` measurements of every UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementHistory<T> {
    depth: usize,
    per_uav: Vec<VecDeque<Measurement<T>>>,
}

impl<T: Scalar> MeasurementHistory<T> {
    pub fn new(n: usize, depth: usize) -> Self {
        Self { depth: depth.max(1), per_uav: vec![VecDeque::new(); n] }
    }

    /// Appends a batch; re-recording the latest step overwrites it.
    fn record(&mut self, fresh: &[Measurement<T>]) {
        for (buf, m) in self.per_uav.iter_mut().zip(fresh) {
            if buf.back().is_some_and(|last| last.timestamp == m.timestamp) {
                buf.pop_back();
            }
            buf.push_back(*m);
            while buf.len() > self.depth {
                buf.pop_front();
            }
        }
    }

    /// Measurement of `uav` taken at `step`, or the oldest retained one when
    /// `step` predates the window.
    pub fn at(&self, uav: usize, step: usize) -> Option<&Measurement<T>> {
        let buf = &self.per_uav[uav];
        buf.iter().rev().find(|m| m.timestamp <= step).or_else(|| buf.front())
    }
}

fn check_batch<T: Scalar>(
    step: usize,
    fresh: &[Measurement<T>],
    positions: &[Vec3<T>],
    views: &[NetworkView<T>],
) -> Result<()> {
    let n = fresh.len();
    if positions.len() != n || views.len() != n {
        return Err(NavError::InconsistentBatch(format!(
            "{n} measurements, {} positions, {} views",
            positions.len(),
            views.len()
        )));
    }
    for (i, m) in fresh.iter().enumerate() {
        if m.timestamp != step {
            return Err(NavError::InconsistentBatch(format!("measurement {i} stamped {} at step {step}", m.timestamp)));
        }
        if views[i].owner != i || views[i].len() != n {
            return Err(NavError::InconsistentBatch(format!("view {i} does not match the fleet")));
        }
    }
    Ok(())
}

/// First exchange at deployment: every UAV receives every initial measurement.
pub fn initialize_views<T: Scalar>(
    fresh: &[Measurement<T>],
    history: &mut MeasurementHistory<T>,
) -> Vec<NetworkView<T>> {
    history.record(fresh);
    let n = fresh.len();
    (0..n)
        .map(|i| {
            let mut view = NetworkView::empty(i, n);
            for (j, m) in fresh.iter().enumerate() {
                view.set_entry(j, *m);
            }
            view
        })
        .collect()
}

/// One synchronous dissemination round at step `step`.
///
/// `fresh[i]` is the step-`step` measurement of UAV index `i`. For every pair
/// within `h_max` hops the receiving view takes the peer measurement from step
/// `step - h + 1`; other pairs keep their stored entry. A stored entry is never
/// replaced by an older one.
pub fn disseminate<T: Scalar>(
    step: usize,
    fresh: &[Measurement<T>],
    positions: &[Vec3<T>],
    config: &NetworkConfig<T>,
    history: &mut MeasurementHistory<T>,
    views: &mut [NetworkView<T>],
) -> Result<()> {
    check_batch(step, fresh, positions, views)?;
    history.record(fresh);
    let hops = hop_counts(positions, config.r_max);
    for (i, view) in views.iter_mut().enumerate() {
        for j in 0..fresh.len() {
            let h = match hops.get(i, j) {
                Some(h) if h <= config.h_max => h,
                _ => continue,
            };
            let delivered_step = (step + 1).saturating_sub(h.max(1));
            let Some(m) = history.at(j, delivered_step) else {
                continue;
            };
            let stale = view.entry(j).is_some_and(|cur| cur.timestamp > m.timestamp);
            if !stale {
                view.set_entry(j, *m);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    fn measurement(idx: usize, step: usize, p: Vec3<f64>) -> Measurement<f64> {
        Measurement {
            uav_id: idx + 1,
            timestamp: step,
            range_est: Some(step as f64),
            bearing_est: None,
            los: true,
            uav_position: p,
        }
    }

    fn batch(step: usize, positions: &[Vec3<f64>]) -> Vec<Measurement<f64>> {
        positions.iter().enumerate().map(|(i, p)| measurement(i, step, *p)).collect()
    }

    fn chain() -> Vec<Vec3<f64>> {
        vec![v(0.0, 0.0, 10.0), v(80.0, 0.0, 10.0), v(160.0, 0.0, 10.0)]
    }

    /// Runs steps `1..=steps` on a static formation and returns the views.
    fn run_static(positions: &[Vec3<f64>], config: NetworkConfig<f64>, steps: usize) -> Vec<NetworkView<f64>> {
        let mut history = MeasurementHistory::new(positions.len(), config.h_max);
        let mut views = initialize_views(&batch(0, positions), &mut history);
        for k in 1..=steps {
            disseminate(k, &batch(k, positions), positions, &config, &mut history, &mut views).unwrap();
        }
        views
    }

    #[test]
    fn hop_examples() {
        let h = hop_counts(&[v(0.0, 0.0, 0.0), v(50.0, 0.0, 0.0)], 100.0);
        assert_eq!(h.get(0, 1), Some(1));
        assert_eq!(h.get(0, 0), Some(0));
        let h = hop_counts(&chain(), 100.0);
        assert_eq!(h.get(0, 2), Some(2));
        assert_eq!(h.diameter(), Some(2));
        let h = hop_counts(&[v(0.0, 0.0, 0.0), v(150.0, 0.0, 0.0)], 100.0);
        assert_eq!(h.get(0, 1), None);
        assert_eq!(h.diameter(), None);
    }

    #[test]
    fn graph_is_symmetric_without_self_loops() {
        let g = ConnectivityGraph::from_positions(&chain(), 100.0);
        for i in 0..3 {
            assert!(!g.has_edge(i, i));
            for j in 0..3 {
                assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
            }
        }
    }

    #[test]
    fn single_hop_fleet_is_always_current() {
        let positions = [v(0.0, 0.0, 10.0), v(30.0, 0.0, 10.0), v(0.0, 40.0, 10.0)];
        let views = run_static(&positions, NetworkConfig { r_max: 100.0, h_max: 1 }, 5);
        for view in &views {
            for j in 0..3 {
                assert_eq!(view.age(j, 5), Some(0));
            }
        }
    }

    #[test]
    fn beyond_h_max_keeps_initial_entry() {
        let views = run_static(&chain(), NetworkConfig { r_max: 100.0, h_max: 1 }, 6);
        assert_eq!(views[0].entry(2).unwrap().timestamp, 0);
        assert_eq!(views[0].entry(1).unwrap().timestamp, 6);
    }

    #[test]
    fn two_hop_delay_is_one_step() {
        let views = run_static(&chain(), NetworkConfig { r_max: 100.0, h_max: 3 }, 6);
        assert_eq!(views[0].entry(2).unwrap().timestamp, 5);
        assert_eq!(views[0].age(2, 6), Some(1));
        assert_eq!(views[0].age(0, 6), Some(0));
    }

    #[test]
    fn disseminate_is_idempotent_within_a_step() {
        let positions = chain();
        let config = NetworkConfig { r_max: 100.0, h_max: 3 };
        let mut history = MeasurementHistory::new(3, 3);
        let mut views = initialize_views(&batch(0, &positions), &mut history);
        for k in 1..4 {
            disseminate(k, &batch(k, &positions), &positions, &config, &mut history, &mut views).unwrap();
        }
        let once = views.clone();
        disseminate(3, &batch(3, &positions), &positions, &config, &mut history, &mut views).unwrap();
        assert_eq!(once, views);
    }

    #[test]
    fn disconnected_peer_keeps_last_saved_entry() {
        let config = NetworkConfig { r_max: 100.0, h_max: 1 };
        let mut positions = vec![v(0.0, 0.0, 10.0), v(50.0, 0.0, 10.0)];
        let mut history = MeasurementHistory::new(2, 1);
        let mut views = initialize_views(&batch(0, &positions), &mut history);
        disseminate(1, &batch(1, &positions), &positions, &config, &mut history, &mut views).unwrap();
        positions[1] = v(500.0, 0.0, 10.0);
        for k in 2..5 {
            disseminate(k, &batch(k, &positions), &positions, &config, &mut history, &mut views).unwrap();
        }
        assert_eq!(views[0].entry(1).unwrap().timestamp, 1);
        assert_eq!(views[0].entry(1).unwrap().uav_position, v(50.0, 0.0, 10.0));
        assert_eq!(views[1].age(1, 4), Some(0));
    }

    #[test]
    fn inconsistent_batch_is_rejected() {
        let positions = chain();
        let config = NetworkConfig { r_max: 100.0, h_max: 1 };
        let mut history = MeasurementHistory::new(3, 1);
        let mut views = initialize_views(&batch(0, &positions), &mut history);
        let wrong_step = batch(2, &positions);
        assert!(disseminate(1, &wrong_step, &positions, &config, &mut history, &mut views).is_err());
        let short = batch(1, &positions[..2]);
        assert!(disseminate(1, &short, &positions, &config, &mut history, &mut views).is_err());
    }

    #[test]
    fn static_connected_ages_equal_hops_minus_one() {
        // 5-UAV chain, h_max at least the diameter.
        let positions: Vec<_> = (0..5).map(|i| v(80.0 * i as f64, 0.0, 10.0)).collect();
        let hops = hop_counts(&positions, 100.0);
        let config = NetworkConfig { r_max: 100.0, h_max: hops.diameter().unwrap() };
        let steps = 10;
        let views = run_static(&positions, config, steps);
        for (i, view) in views.iter().enumerate() {
            for j in 0..5 {
                let h = hops.get(i, j).unwrap();
                assert_eq!(view.age(j, steps), Some(h.saturating_sub(1)), "pair ({i},{j})");
            }
        }
    }
}
