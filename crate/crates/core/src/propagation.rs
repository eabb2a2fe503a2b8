//! Line-of-sight checks against obstruction polygons and distance-based
//! link quality classification.
//!
//! Obstructions are simple closed polygons in the planar frame, loaded from a
//! JSON document (a list of rings, each a list of `[x, y]` meter pairs). A
//! link is line-of-sight when the open segment between the endpoints touches
//! no polygon edge or interior; grazing contact counts as NLOS.

use serde::{Deserialize, Serialize};

use crate::geo::GeoCoord;
use crate::{Error, Result, SignalQuality};

/// A set of simple closed obstruction polygons.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<[f64; 2]>>", into = "Vec<Vec<[f64; 2]>>")]
pub struct ObstructionSet {
    polygons: Vec<Vec<GeoCoord>>,
}

impl ObstructionSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds from rings of vertices; each ring needs at least 3 vertices
    /// and is implicitly closed (last vertex connects back to the first).
    pub fn new(polygons: Vec<Vec<GeoCoord>>) -> Result<Self> {
        for (idx, poly) in polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(Error::InvalidInput(format!(
                    "obstruction polygon {idx} has {} vertices, need at least 3",
                    poly.len()
                )));
            }
            if poly.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "obstruction polygon {idx} has a non-finite vertex"
                )));
            }
        }
        Ok(Self { polygons })
    }

    pub fn polygons(&self) -> &[Vec<GeoCoord>] {
        &self.polygons
    }

    /// Parses the JSON obstruction document.
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::ScenarioLoad(format!("obstructions JSON: {e}")))
    }
}

impl TryFrom<Vec<Vec<[f64; 2]>>> for ObstructionSet {
    type Error = Error;
    fn try_from(rings: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        ObstructionSet::new(
            rings
                .into_iter()
                .map(|ring| ring.into_iter().map(|[x, y]| GeoCoord::new(x, y)).collect())
                .collect(),
        )
    }
}

impl From<ObstructionSet> for Vec<Vec<[f64; 2]>> {
    fn from(o: ObstructionSet) -> Self {
        o.polygons
            .into_iter()
            .map(|ring| ring.into_iter().map(|v| [v.x, v.y]).collect())
            .collect()
    }
}

/// Distance thresholds (meters) mapping link distance to quality levels
/// 5, 4, 3 and 2, with separate columns for LOS and NLOS links. Distances
/// beyond the last threshold classify as no coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityTable {
    pub los_thresholds: [f64; 4],
    pub nlos_thresholds: [f64; 4],
}

impl Default for QualityTable {
    fn default() -> Self {
        QualityTable {
            los_thresholds: [70.0, 115.0, 135.0, 155.0],
            nlos_thresholds: [58.0, 65.0, 105.0, 130.0],
        }
    }
}

impl QualityTable {
    pub fn validate(&self) -> Result<()> {
        for col in [&self.los_thresholds, &self.nlos_thresholds] {
            if !col.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Config(format!(
                    "quality thresholds must be strictly increasing, got {col:?}"
                )));
            }
        }
        for (los, nlos) in self.los_thresholds.iter().zip(&self.nlos_thresholds) {
            if nlos > los {
                return Err(Error::Config(format!(
                    "NLOS threshold {nlos} exceeds LOS threshold {los}"
                )));
            }
        }
        Ok(())
    }

    fn classify_distance(&self, dist: f64, los: bool) -> SignalQuality {
        let col = if los {
            &self.los_thresholds
        } else {
            &self.nlos_thresholds
        };
        for (k, &threshold) in col.iter().enumerate() {
            if dist <= threshold {
                return SignalQuality::new(5 - k as u8).expect("levels 5..=2");
            }
        }
        SignalQuality::NONE
    }
}

/// Orientation of the triple (a, b, c): positive = counter-clockwise.
fn orient(a: GeoCoord, b: GeoCoord, c: GeoCoord) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: GeoCoord, b: GeoCoord, p: GeoCoord) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Whether segments p1-p2 and q1-q2 intersect, counting touching contact.
pub(crate) fn segments_intersect(p1: GeoCoord, p2: GeoCoord, q1: GeoCoord, q2: GeoCoord) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);

    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Even-odd test for a point strictly relative to a ring; boundary points may
/// report either side, which is fine because edge contact is caught first.
fn point_in_polygon(p: GeoCoord, ring: &[GeoCoord]) -> bool {
    let mut inside = false;
    let n = ring.len();
    for k in 0..n {
        let a = ring[k];
        let b = ring[(k + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// True iff the segment a-b touches no polygon edge and does not run through
/// a polygon interior. Symmetric in its endpoints.
pub fn has_los(a: GeoCoord, b: GeoCoord, obs: &ObstructionSet) -> bool {
    for ring in &obs.polygons {
        // Bounding-box rejection keeps dense city-block sets cheap.
        let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in ring {
            min_x = min_x.min(v.x);
            max_x = max_x.max(v.x);
            min_y = min_y.min(v.y);
            max_y = max_y.max(v.y);
        }
        if a.x.max(b.x) < min_x
            || a.x.min(b.x) > max_x
            || a.y.max(b.y) < min_y
            || a.y.min(b.y) > max_y
        {
            continue;
        }
        let n = ring.len();
        for k in 0..n {
            if segments_intersect(a, b, ring[k], ring[(k + 1) % n]) {
                return false;
            }
        }
        // No edge crossing: the segment is entirely inside or outside.
        let mid = GeoCoord::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
        if point_in_polygon(mid, ring) {
            return false;
        }
    }
    true
}

/// Classifies the link a-b: picks the LOS or NLOS threshold column from
/// [`has_los`], then returns the highest quality whose distance threshold
/// covers the link. Beyond the last threshold the link has no coverage.
pub fn classify(a: GeoCoord, b: GeoCoord, obs: &ObstructionSet, qt: &QualityTable) -> SignalQuality {
    let dist = a.distance(&b);
    // Beyond the longest threshold the outcome is 0 either way; skip the
    // geometric line-of-sight test.
    if dist > self::max_range(qt) {
        return SignalQuality::NONE;
    }
    qt.classify_distance(dist, has_los(a, b, obs))
}

/// The longest distance at which any link can still classify above 0.
fn max_range(qt: &QualityTable) -> f64 {
    qt.los_thresholds[3].max(qt.nlos_thresholds[3])
}

/// The coverage map a node at `center` would converge to with unlimited
/// observations: every window cell classified from the cell's center point.
/// Used by experiment fixtures and as a reference for map completeness.
pub fn predicted_coverage_map(
    center: GeoCoord,
    order: usize,
    cell_size: f64,
    obs: &ObstructionSet,
    qt: &QualityTable,
) -> crate::Result<crate::CoverageMap> {
    let mut map = crate::CoverageMap::new(order, center, cell_size)?;
    let cells: Vec<crate::CellIndex> = map.extent().cells().collect();
    for cell in cells {
        let target = GeoCoord::new(
            (cell.j as f64 + 0.5) * cell_size,
            (cell.i as f64 + 0.5) * cell_size,
        );
        let q = classify(center, target, obs, qt);
        if q.is_covered() {
            map.set(cell, q)?;
        }
    }
    Ok(map)
}
