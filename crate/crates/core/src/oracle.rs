//! Brute-force optimal RSU selection and network-level metrics.
//!
//! Given the coverage maps of a set of parked candidates, every activation
//! subset can be scored on three network metrics: the mean signal level over
//! the coverable cells, the mean number of RSUs covering each cell, and the
//! active count. Exhaustive enumeration over all subsets provides the
//! reference optimum the greedy self-organizing decisions are benchmarked
//! against. Enumeration walks masks in Gray-code order so each step flips a
//! single candidate and the per-cell aggregates update incrementally.

use serde::{Deserialize, Serialize};

use crate::geo::{CellRect, CoverageMap};
use crate::selforg::{decide, DecisionPolicy, NodeMode, NodeState};
use crate::scenario::VehicleId;
use crate::{Error, Result};

/// Default cap on exhaustive enumeration (2^24 subsets).
pub const DEFAULT_BRUTE_FORCE_CAP: u32 = 24;

/// Network-level metrics of one activation subset. Means are taken over the
/// cells coverable by at least one candidate, active or not, so that every
/// subset of the same instance shares a denominator.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkMetrics {
    /// Mean best signal level over coverable cells, in [0, 5].
    pub mean_signal: f64,
    /// Mean count of active RSUs covering each coverable cell.
    pub mean_saturation: f64,
    pub rsu_count: u32,
}

/// Candidate maps flattened onto the instance's coverable-cell domain.
struct Instance {
    /// Per candidate: `(domain cell slot, level)` of its covered cells.
    footprints: Vec<Vec<(usize, u8)>>,
    domain_size: usize,
}

impl Instance {
    fn build(candidates: &[CoverageMap]) -> Result<Self> {
        let mut order = None;
        for m in candidates {
            match order {
                None => order = Some(m.order()),
                Some(o) if o != m.order() => {
                    return Err(Error::InvalidInput(format!(
                        "candidate map order {} does not match {}",
                        m.order(),
                        o
                    )))
                }
                _ => {}
            }
        }
        let Some(extent) = candidates
            .iter()
            .map(|m| m.extent())
            .reduce(|a, b| a.union(&b))
        else {
            return Ok(Instance {
                footprints: Vec::new(),
                domain_size: 0,
            });
        };
        // Domain: cells covered by at least one candidate.
        let cols = extent.cols();
        let rect_slot = |r: &CellRect, c: crate::CellIndex| -> usize {
            ((c.i - r.min.i) * cols + (c.j - r.min.j)) as usize
        };
        let mut coverable = vec![false; (extent.rows() * cols) as usize];
        for m in candidates {
            for (cell, _) in m.covered_cells() {
                coverable[rect_slot(&extent, cell)] = true;
            }
        }
        let mut domain_slot = vec![usize::MAX; coverable.len()];
        let mut domain_size = 0usize;
        for (k, &cov) in coverable.iter().enumerate() {
            if cov {
                domain_slot[k] = domain_size;
                domain_size += 1;
            }
        }
        let footprints = candidates
            .iter()
            .map(|m| {
                m.covered_cells()
                    .map(|(cell, q)| (domain_slot[rect_slot(&extent, cell)], q.level()))
                    .collect()
            })
            .collect();
        Ok(Instance {
            footprints,
            domain_size,
        })
    }
}

/// Incrementally maintained per-cell aggregates for one activation mask.
struct SubsetState {
    /// Per domain cell, how many active candidates cover it at each level
    /// 1..=5 (index 0 unused).
    level_counts: Vec<[u16; 6]>,
    /// Per domain cell, total active candidates covering it.
    cover_counts: Vec<u16>,
    /// Per domain cell, current best active level.
    best: Vec<u8>,
    signal_sum: u64,
    saturation_sum: u64,
    active: u32,
}

impl SubsetState {
    fn new(domain_size: usize) -> Self {
        SubsetState {
            level_counts: vec![[0; 6]; domain_size],
            cover_counts: vec![0; domain_size],
            best: vec![0; domain_size],
            signal_sum: 0,
            saturation_sum: 0,
            active: 0,
        }
    }

    fn flip(&mut self, footprint: &[(usize, u8)], activate: bool) {
        for &(slot, level) in footprint {
            let lvl = level as usize;
            if activate {
                self.level_counts[slot][lvl] += 1;
                self.cover_counts[slot] += 1;
                self.saturation_sum += 1;
                if level > self.best[slot] {
                    self.signal_sum += (level - self.best[slot]) as u64;
                    self.best[slot] = level;
                }
            } else {
                self.level_counts[slot][lvl] -= 1;
                self.cover_counts[slot] -= 1;
                self.saturation_sum -= 1;
                if level == self.best[slot] && self.level_counts[slot][lvl] == 0 {
                    let new_best = (0..level)
                        .rev()
                        .find(|&l| l == 0 || self.level_counts[slot][l as usize] > 0)
                        .unwrap_or(0);
                    self.signal_sum -= (self.best[slot] - new_best) as u64;
                    self.best[slot] = new_best;
                }
            }
        }
        if activate {
            self.active += 1;
        } else {
            self.active -= 1;
        }
    }

    fn metrics(&self, domain_size: usize) -> NetworkMetrics {
        if domain_size == 0 {
            return NetworkMetrics {
                mean_signal: 0.0,
                mean_saturation: 0.0,
                rsu_count: self.active,
            };
        }
        NetworkMetrics {
            mean_signal: self.signal_sum as f64 / domain_size as f64,
            mean_saturation: self.saturation_sum as f64 / domain_size as f64,
            rsu_count: self.active,
        }
    }
}

/// Scores one activation bitmask over the candidates.
pub fn evaluate_subset(candidates: &[CoverageMap], active: u64) -> Result<NetworkMetrics> {
    if candidates.len() > 64 {
        return Err(Error::InvalidInput(format!(
            "bitmask evaluation supports up to 64 candidates, got {}",
            candidates.len()
        )));
    }
    let instance = Instance::build(candidates)?;
    let mut state = SubsetState::new(instance.domain_size);
    for (k, footprint) in instance.footprints.iter().enumerate() {
        if active >> k & 1 == 1 {
            state.flip(footprint, true);
        }
    }
    Ok(state.metrics(instance.domain_size))
}

/// How to rank activation subsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Objective {
    /// Maximize mean signal (signals within `epsilon` tie), then minimize
    /// RSU count, then minimize saturation; final ties take the lowest mask.
    Lexicographic { epsilon: f64 },
    /// Maximize `mean_signal - alpha * rsu_count`.
    Scalarized { alpha: f64 },
}

impl Default for Objective {
    fn default() -> Self {
        Objective::Lexicographic { epsilon: 0.01 }
    }
}

impl Objective {
    /// Whether `(a, a_mask)` ranks strictly better than `(b, b_mask)`.
    fn better(&self, a: &NetworkMetrics, a_mask: u64, b: &NetworkMetrics, b_mask: u64) -> bool {
        match *self {
            Objective::Lexicographic { epsilon } => {
                if a.mean_signal > b.mean_signal + epsilon {
                    return true;
                }
                if b.mean_signal > a.mean_signal + epsilon {
                    return false;
                }
                if a.rsu_count != b.rsu_count {
                    return a.rsu_count < b.rsu_count;
                }
                if a.mean_saturation != b.mean_saturation {
                    return a.mean_saturation < b.mean_saturation;
                }
                a_mask < b_mask
            }
            Objective::Scalarized { alpha } => {
                let va = a.mean_signal - alpha * a.rsu_count as f64;
                let vb = b.mean_signal - alpha * b.rsu_count as f64;
                if va != vb {
                    return va > vb;
                }
                a_mask < b_mask
            }
        }
    }
}

/// The exhaustive optimum over every activation subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalSelection {
    pub mask: u64,
    pub metrics: NetworkMetrics,
}

/// Enumerates all `2^n` activation subsets and returns the best under the
/// objective. Refuses instances above `cap` candidates: the cost is
/// exponential, so larger instances need an explicit opt-in.
pub fn brute_force_optimal(
    candidates: &[CoverageMap],
    objective: Objective,
    cap: u32,
) -> Result<OptimalSelection> {
    let n = candidates.len() as u32;
    if n > cap {
        return Err(Error::InvalidInput(format!(
            "{n} candidates exceed the brute-force cap of {cap} (2^{n} subsets); \
             raise the cap explicitly to run the exponential enumeration"
        )));
    }
    let instance = Instance::build(candidates)?;
    let mut state = SubsetState::new(instance.domain_size);
    let mut best_mask = 0u64;
    let mut best = state.metrics(instance.domain_size);
    let total: u64 = 1u64 << n;
    let mut mask = 0u64;
    for step in 1..total {
        // Gray-code walk: exactly one candidate flips per step.
        let bit = step.trailing_zeros() as usize;
        let activate = mask >> bit & 1 == 0;
        mask ^= 1 << bit;
        state.flip(&instance.footprints[bit], activate);
        let metrics = state.metrics(instance.domain_size);
        if objective.better(&metrics, mask, &best, best_mask) {
            best = metrics;
            best_mask = mask;
        }
    }
    Ok(OptimalSelection {
        mask: best_mask,
        metrics: best,
    })
}

/// Runs the arrival-ordered greedy decision process over the candidates:
/// each car decides with the maps of the already-active cars as neighbors.
/// Returns the resulting activation mask.
pub fn greedy_activation(candidates: &[CoverageMap], policy: &DecisionPolicy) -> Result<u64> {
    let mut active_maps: Vec<CoverageMap> = Vec::new();
    let mut mask = 0u64;
    for (k, map) in candidates.iter().enumerate() {
        let mut node = NodeState::new_listening(VehicleId(k as u32), map.clone());
        let outcome = decide(&mut node, &active_maps, policy)?;
        if outcome.mode == NodeMode::ActiveRsu {
            mask |= 1 << k;
            active_maps.push(map.clone());
        }
    }
    Ok(mask)
}

/// Greedy-vs-optimal comparison on one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub greedy_mask: u64,
    pub greedy: NetworkMetrics,
    pub optimal_mask: u64,
    pub optimal: NetworkMetrics,
    /// greedy mean signal / optimal mean signal (1.0 when both are 0).
    pub coverage_ratio: f64,
    /// greedy active count / optimal active count (1.0 when both are 0).
    pub count_ratio: f64,
}

/// Runs the full greedy pipeline and the exhaustive optimum on the same
/// candidates and reports how close the greedy outcome comes.
pub fn compare_greedy_vs_optimal(
    candidates: &[CoverageMap],
    policy: &DecisionPolicy,
    objective: Objective,
    cap: u32,
) -> Result<ComparisonReport> {
    let greedy_mask = greedy_activation(candidates, policy)?;
    let greedy = evaluate_subset(candidates, greedy_mask)?;
    let optimal = brute_force_optimal(candidates, objective, cap)?;
    let ratio = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
    Ok(ComparisonReport {
        greedy_mask,
        greedy,
        optimal_mask: optimal.mask,
        optimal: optimal.metrics,
        coverage_ratio: ratio(greedy.mean_signal, optimal.metrics.mean_signal),
        count_ratio: ratio(
            greedy.rsu_count as f64,
            optimal.metrics.rsu_count as f64,
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{CellIndex, GeoCoord, SignalQuality};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const CELL: f64 = 30.0;

    fn q(level: u8) -> SignalQuality {
        SignalQuality::new(level).unwrap()
    }

    fn map_at(cx: f64, cy: f64) -> CoverageMap {
        CoverageMap::new(11, GeoCoord::new(cx, cy), CELL).unwrap()
    }

    fn random_map(rng: &mut ChaCha8Rng, span: f64) -> CoverageMap {
        let mut m = map_at(
            rng.gen_range(300.0..300.0 + span),
            rng.gen_range(300.0..300.0 + span),
        );
        let cells: Vec<CellIndex> = m.extent().cells().collect();
        for c in cells {
            if rng.gen_bool(0.5) {
                m.set(c, q(rng.gen_range(1..=5))).unwrap();
            }
        }
        m
    }

    /// Direct per-cell recomputation of the subset metrics.
    fn metrics_oracle(candidates: &[CoverageMap], mask: u64) -> NetworkMetrics {
        let Some(extent) = candidates
            .iter()
            .map(|m| m.extent())
            .reduce(|a, b| a.union(&b))
        else {
            return NetworkMetrics::default();
        };
        let mut signal = 0u64;
        let mut sat = 0u64;
        let mut domain = 0u64;
        for cell in extent.cells() {
            if !candidates.iter().any(|m| m.get(cell).is_covered()) {
                continue;
            }
            domain += 1;
            let mut best = 0u8;
            for (k, m) in candidates.iter().enumerate() {
                if mask >> k & 1 == 1 {
                    let lvl = m.get(cell).level();
                    best = best.max(lvl);
                    if lvl > 0 {
                        sat += 1;
                    }
                }
            }
            signal += best as u64;
        }
        NetworkMetrics {
            mean_signal: if domain > 0 {
                signal as f64 / domain as f64
            } else {
                0.0
            },
            mean_saturation: if domain > 0 {
                sat as f64 / domain as f64
            } else {
                0.0
            },
            rsu_count: mask.count_ones(),
        }
    }

    fn close(a: &NetworkMetrics, b: &NetworkMetrics) -> bool {
        (a.mean_signal - b.mean_signal).abs() < 1e-12
            && (a.mean_saturation - b.mean_saturation).abs() < 1e-12
            && a.rsu_count == b.rsu_count
    }

    #[test]
    fn all_inactive_scores_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let candidates: Vec<CoverageMap> = (0..4).map(|_| random_map(&mut rng, 200.0)).collect();
        let m = evaluate_subset(&candidates, 0).unwrap();
        assert_eq!(m, NetworkMetrics::default());
    }

    #[test]
    fn single_active_candidate_metrics() {
        let mut m = map_at(400.0, 400.0);
        let cells: Vec<CellIndex> = m.extent().cells().take(30).collect();
        for c in &cells {
            m.set(*c, q(4)).unwrap();
        }
        let metrics = evaluate_subset(std::slice::from_ref(&m), 1).unwrap();
        assert_eq!(metrics.mean_signal, 4.0);
        assert_eq!(metrics.mean_saturation, 1.0);
        assert_eq!(metrics.rsu_count, 1);
    }

    #[test]
    fn all_masks_of_eight_random_candidates_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let candidates: Vec<CoverageMap> = (0..8).map(|_| random_map(&mut rng, 250.0)).collect();
        for mask in 0..256u64 {
            let got = evaluate_subset(&candidates, mask).unwrap();
            let want = metrics_oracle(&candidates, mask);
            assert!(close(&got, &want), "mask {mask}: {got:?} vs {want:?}");
        }
    }

    #[test]
    fn disjoint_maps_activate_everything() {
        // Far-apart candidates: no saturation penalty, so the optimum under
        // the signal-first objective turns everyone on.
        let candidates: Vec<CoverageMap> = (0..4)
            .map(|k| {
                let mut m = map_at(400.0 + 900.0 * k as f64, 400.0);
                let cells: Vec<CellIndex> = m.extent().cells().take(20).collect();
                for c in &cells {
                    m.set(*c, q(3)).unwrap();
                }
                m
            })
            .collect();
        let best = brute_force_optimal(&candidates, Objective::default(), 24).unwrap();
        assert_eq!(best.mask, 0b1111);
    }

    #[test]
    fn duplicate_maps_keep_one_copy() {
        let mut proto = map_at(400.0, 400.0);
        let cells: Vec<CellIndex> = proto.extent().cells().take(25).collect();
        for c in &cells {
            proto.set(*c, q(4)).unwrap();
        }
        let candidates = vec![proto.clone(), proto.clone(), proto];
        let best = brute_force_optimal(&candidates, Objective::default(), 24).unwrap();
        assert_eq!(best.mask.count_ones(), 1);
        // Lowest-mask tie-break picks the first duplicate.
        assert_eq!(best.mask, 0b001);
    }

    #[test]
    fn cap_refusal_names_the_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let candidates: Vec<CoverageMap> = (0..5).map(|_| random_map(&mut rng, 100.0)).collect();
        let err = brute_force_optimal(&candidates, Objective::default(), 4).unwrap_err();
        assert!(err.to_string().contains("cap"));
    }

    #[test]
    fn optimum_dominates_greedy_and_every_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..10 {
            let candidates: Vec<CoverageMap> =
                (0..8).map(|_| random_map(&mut rng, 150.0)).collect();
            let objective = Objective::default();
            let best = brute_force_optimal(&candidates, objective, 24).unwrap();
            for mask in 0..256u64 {
                let m = evaluate_subset(&candidates, mask).unwrap();
                assert!(
                    !objective.better(&m, mask, &best.metrics, best.mask),
                    "mask {mask} beats the enumerated optimum"
                );
            }
            let greedy_mask = greedy_activation(&candidates, &DecisionPolicy::default()).unwrap();
            let greedy = evaluate_subset(&candidates, greedy_mask).unwrap();
            assert!(!objective.better(&greedy, greedy_mask, &best.metrics, best.mask));
        }
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let candidates: Vec<CoverageMap> = (0..6).map(|_| random_map(&mut rng, 200.0)).collect();
        let mask = 0b101101u64;
        let base = evaluate_subset(&candidates, mask).unwrap();
        // Reverse the candidate order and mirror the mask.
        let reversed: Vec<CoverageMap> = candidates.iter().rev().cloned().collect();
        let mut mirrored = 0u64;
        for k in 0..candidates.len() {
            if mask >> k & 1 == 1 {
                mirrored |= 1 << (candidates.len() - 1 - k);
            }
        }
        let swapped = evaluate_subset(&reversed, mirrored).unwrap();
        assert!(close(&base, &swapped));
    }

    #[test]
    fn activating_nonempty_map_never_decreases_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let candidates: Vec<CoverageMap> = (0..6).map(|_| random_map(&mut rng, 200.0)).collect();
        for mask in 0..64u64 {
            for k in 0..6 {
                if mask >> k & 1 == 0 {
                    let with = evaluate_subset(&candidates, mask | 1 << k).unwrap();
                    let without = evaluate_subset(&candidates, mask).unwrap();
                    assert!(with.mean_signal >= without.mean_signal - 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_candidate_comparison_is_exact() {
        let mut m = map_at(400.0, 400.0);
        m.set(m.anchor(), q(5)).unwrap();
        let report = compare_greedy_vs_optimal(
            std::slice::from_ref(&m),
            &DecisionPolicy::default(),
            Objective::default(),
            24,
        )
        .unwrap();
        assert_eq!(report.coverage_ratio, 1.0);
        assert_eq!(report.count_ratio, 1.0);
        assert_eq!(report.greedy_mask, report.optimal_mask);
    }
}
