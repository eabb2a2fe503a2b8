//! The self-organizing decision process for newly parked cars.
//!
//! A parked car merges the coverage maps it received from neighboring active
//! RSUs into two local maps (best coverage per cell, and how many RSUs cover
//! each cell), overlays its own self-observed map, and classifies every cell
//! it covers as new coverage, improved coverage, or redundant coverage. The
//! weighted sum of those effects is the decision score that determines
//! whether the car becomes an RSU or sleeps. Substantial later changes to
//! the car's map retrigger the decision.

use serde::{Deserialize, Serialize};

use crate::geo::{CellIndex, CellRect, CoverageMap, SignalQuality};
use crate::scenario::VehicleId;
use crate::{Error, Result};

/// Paired local maps built from a neighborhood of coverage maps:
/// best coverage per cell and the number of RSUs covering each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMaps {
    /// Order of the source maps; `None` for the empty neighborhood.
    order: Option<usize>,
    extent: Option<CellRect>,
    lmc: Vec<SignalQuality>,
    lms: Vec<u32>,
}

impl LocalMaps {
    pub fn extent(&self) -> Option<CellRect> {
        self.extent
    }

    fn slot(&self, at: CellIndex) -> Option<usize> {
        let extent = self.extent?;
        if !extent.contains(at) {
            return None;
        }
        let r = at.i - extent.min.i;
        let c = at.j - extent.min.j;
        Some((r * extent.cols() + c) as usize)
    }

    /// Best neighbor coverage at a cell; 0 outside the mapped area.
    pub fn coverage(&self, at: CellIndex) -> SignalQuality {
        self.slot(at)
            .map(|s| self.lmc[s])
            .unwrap_or(SignalQuality::NONE)
    }

    /// Number of RSUs covering a cell; 0 outside the mapped area.
    pub fn saturation(&self, at: CellIndex) -> u32 {
        self.slot(at).map(|s| self.lms[s]).unwrap_or(0)
    }
}

/// Merges neighbor coverage maps into the local maps. Per cell, the
/// coverage map keeps the best level any neighbor provides and the
/// saturation map counts the neighbors providing any coverage at all.
pub fn build_local_maps(neighbors: &[CoverageMap]) -> Result<LocalMaps> {
    let mut order = None;
    let mut extent: Option<CellRect> = None;
    for m in neighbors {
        match order {
            None => order = Some(m.order()),
            Some(o) if o != m.order() => {
                return Err(Error::InvalidInput(format!(
                    "neighbor map order {} does not match {}",
                    m.order(),
                    o
                )))
            }
            _ => {}
        }
        let e = m.extent();
        extent = Some(match extent {
            None => e,
            Some(acc) => acc.union(&e),
        });
    }
    let Some(extent) = extent else {
        return Ok(LocalMaps {
            order,
            extent: None,
            lmc: Vec::new(),
            lms: Vec::new(),
        });
    };
    let size = (extent.rows() * extent.cols()) as usize;
    let mut maps = LocalMaps {
        order,
        extent: Some(extent),
        lmc: vec![SignalQuality::NONE; size],
        lms: vec![0; size],
    };
    for m in neighbors {
        for (cell, q) in m.iter() {
            let slot = maps.slot(cell).expect("cell within union extent");
            if q > maps.lmc[slot] {
                maps.lmc[slot] = q;
            }
            if q.is_covered() {
                maps.lms[slot] += 1;
            }
        }
    }
    Ok(maps)
}

/// The quantified effects of a car activating at its parking spot, plus the
/// per-cell classification counts behind them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScoreMetricsResult {
    /// Summed level of cells where the car establishes new coverage.
    pub d_new: u32,
    /// Summed level improvement on cells already covered by neighbors.
    pub d_boost: u32,
    /// Summed neighbor count over every cell the car covers.
    pub d_sat: u32,
    /// Cells establishing new coverage.
    pub cells_new: u32,
    /// Cells improving existing coverage.
    pub cells_boost: u32,
    /// Cells adding only redundant coverage.
    pub cells_redundant: u32,
}

/// Overlays the deciding car's own map on the local maps and accumulates the
/// three score metrics. For each own-covered cell: a cell nobody covers adds
/// its level to `d_new`; a cell covered at a lower level adds the delta to
/// `d_boost`; and every own-covered cell adds the neighbor count to `d_sat`.
pub fn score_metrics(own: &CoverageMap, local: &LocalMaps) -> Result<ScoreMetricsResult> {
    if let Some(order) = local.order {
        if order != own.order() {
            return Err(Error::InvalidInput(format!(
                "own map order {} does not match local maps order {}",
                own.order(),
                order
            )));
        }
    }
    let mut m = ScoreMetricsResult::default();
    for (cell, q) in own.covered_cells() {
        let level = q.level() as u32;
        let lmc = local.coverage(cell).level() as u32;
        if lmc == 0 {
            m.d_new += level;
            m.cells_new += 1;
        } else if lmc < level {
            m.d_boost += level - lmc;
            m.cells_boost += 1;
        } else {
            m.cells_redundant += 1;
        }
        m.d_sat += local.saturation(cell);
    }
    Ok(m)
}

/// Weights balancing network improvement against saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionWeights {
    pub kappa: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Default for DecisionWeights {
    fn default() -> Self {
        DecisionWeights {
            kappa: 1.0,
            lambda: 1.0,
            mu: 1.0,
        }
    }
}

/// The decision score: kappa * d_new + lambda * d_boost - mu * d_sat.
pub fn decision_score(m: &ScoreMetricsResult, w: &DecisionWeights) -> f64 {
    w.kappa * m.d_new as f64 + w.lambda * m.d_boost as f64 - w.mu * m.d_sat as f64
}

/// Per-vehicle protocol state machine modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeMode {
    Moving,
    /// Parked, building a coverage map before the first decision.
    Listening,
    ActiveRsu,
    Sleeping,
    /// Backoff timer pending in a replacement election.
    ElectionCandidate,
}

/// Everything the decision process keeps per parked vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: VehicleId,
    pub mode: NodeMode,
    pub scm: CoverageMap,
    /// Cells changed since the last decision.
    pub delta_cov: u32,
    /// Changed-cell count that retriggers a decision; set at decision time.
    pub delta_threshold: u32,
    pub last_decision_score: f64,
}

impl NodeState {
    pub fn new_listening(id: VehicleId, scm: CoverageMap) -> Self {
        NodeState {
            id,
            mode: NodeMode::Listening,
            scm,
            delta_cov: 0,
            delta_threshold: u32::MAX,
            last_decision_score: 0.0,
        }
    }
}

/// Knobs of the decision process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionPolicy {
    pub weights: DecisionWeights,
    /// Score must strictly exceed this to activate; ties sleep.
    pub activation_threshold: f64,
    /// Absolute re-decision threshold; `None` means 10% of the covered
    /// cells at the last decision (at least 1).
    pub delta_cov_threshold: Option<u32>,
}

impl Default for DecisionPolicy {
    fn default() -> Self {
        DecisionPolicy {
            weights: DecisionWeights::default(),
            activation_threshold: 0.0,
            delta_cov_threshold: None,
        }
    }
}

impl DecisionPolicy {
    fn delta_threshold_for(&self, covered_cells: usize) -> u32 {
        self.delta_cov_threshold
            .unwrap_or_else(|| ((covered_cells as u32) / 10).max(1))
    }
}

/// A completed decision, with the evidence that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub mode: NodeMode,
    pub metrics: ScoreMetricsResult,
    pub score: f64,
}

/// Runs the activation decision: merge neighbor maps, compute the score
/// metrics and the decision score, then activate iff the score exceeds the
/// activation threshold. Resets the change accumulator.
pub fn decide(
    node: &mut NodeState,
    neighbor_maps: &[CoverageMap],
    policy: &DecisionPolicy,
) -> Result<DecisionOutcome> {
    let local = build_local_maps(neighbor_maps)?;
    let metrics = score_metrics(&node.scm, &local)?;
    let score = decision_score(&metrics, &policy.weights);
    let mode = if score > policy.activation_threshold {
        NodeMode::ActiveRsu
    } else {
        NodeMode::Sleeping
    };
    node.mode = mode;
    node.last_decision_score = score;
    node.delta_cov = 0;
    node.delta_threshold = policy.delta_threshold_for(node.scm.covered_cell_count());
    Ok(DecisionOutcome {
        mode,
        metrics,
        score,
    })
}

/// Accounts for a batch of changed map cells on a parked node. Once the
/// accumulated change crosses the node's threshold, the decision is retaken
/// and the accumulator resets.
pub fn on_map_update(
    node: &mut NodeState,
    changed_cells: u32,
    neighbor_maps: &[CoverageMap],
    policy: &DecisionPolicy,
) -> Result<Option<DecisionOutcome>> {
    node.delta_cov = node.delta_cov.saturating_add(changed_cells);
    if node.delta_cov >= node.delta_threshold {
        return decide(node, neighbor_maps, policy).map(Some);
    }
    Ok(None)
}
