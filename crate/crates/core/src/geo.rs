//! Global cell grid, coverage maps, and their wire encoding.
//!
//! The urban area is divided into a logical 2D grid of square cells that is
//! common to all vehicles. Cells are anchored to a scenario-local planar
//! frame (meters east/north of the scenario origin), so every node computing
//! [`cell_of`] on the same point gets the same cell without exchanging state.
//!
//! A [`CoverageMap`] is an odd-order square matrix of per-cell signal quality
//! levels centered on the owning vehicle. Maps are shared between vehicles in
//! a compact binary form: 3 bits per cell packed row-major (an 11x11 map is
//! 46 payload bytes) followed by the center coordinate as two 2-byte
//! fixed-point fields at 5 m resolution.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Resolution of the 2-byte fixed-point center coordinate fields (meters).
pub const COORD_RESOLUTION_M: f64 = 5.0;

/// Number of trailing bytes holding the encoded center coordinate.
pub const CENTER_ENCODING_BYTES: usize = 4;

/// A point in the scenario-local planar frame: meters east / north of origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoCoord {
    pub x: f64,
    pub y: f64,
}

impl GeoCoord {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &GeoCoord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Index of a grid cell: `i` is the row (north), `j` the column (east).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub i: i64,
    pub j: i64,
}

impl CellIndex {
    pub fn new(i: i64, j: i64) -> Self {
        Self { i, j }
    }
}

/// Maps a point to the unique cell containing it. Cells are half-open
/// `cell_size`-squares, so boundary points belong to the cell on their
/// upper-right side.
pub fn cell_of(p: GeoCoord, cell_size: f64) -> Result<CellIndex> {
    if !p.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite coordinate ({}, {})",
            p.x, p.y
        )));
    }
    if !(cell_size > 0.0) {
        return Err(Error::InvalidInput(format!(
            "cell_size must be positive, got {cell_size}"
        )));
    }
    Ok(CellIndex {
        i: (p.y / cell_size).floor() as i64,
        j: (p.x / cell_size).floor() as i64,
    })
}

/// Signal quality level of a cell: 0 = no coverage, 5 = excellent signal.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(try_from = "u8", into = "u8")]
pub struct SignalQuality(u8);

impl SignalQuality {
    pub const NONE: SignalQuality = SignalQuality(0);
    pub const MAX: SignalQuality = SignalQuality(5);

    /// Builds a quality level; only 0..=5 are representable.
    pub fn new(level: u8) -> Result<Self> {
        if level > 5 {
            return Err(Error::InvalidInput(format!(
                "signal quality level {level} outside 0..=5"
            )));
        }
        Ok(SignalQuality(level))
    }

    pub fn level(&self) -> u8 {
        self.0
    }

    pub fn is_covered(&self) -> bool {
        self.0 > 0
    }
}

impl TryFrom<u8> for SignalQuality {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        SignalQuality::new(v)
    }
}

impl From<SignalQuality> for u8 {
    fn from(q: SignalQuality) -> u8 {
        q.0
    }
}

/// Inclusive rectangle of cell indices. `None` extent means empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub min: CellIndex,
    pub max: CellIndex,
}

impl CellRect {
    pub fn contains(&self, c: CellIndex) -> bool {
        c.i >= self.min.i && c.i <= self.max.i && c.j >= self.min.j && c.j <= self.max.j
    }

    pub fn union(&self, other: &CellRect) -> CellRect {
        CellRect {
            min: CellIndex::new(self.min.i.min(other.min.i), self.min.j.min(other.min.j)),
            max: CellIndex::new(self.max.i.max(other.max.i), self.max.j.max(other.max.j)),
        }
    }

    pub fn rows(&self) -> i64 {
        self.max.i - self.min.i + 1
    }

    pub fn cols(&self) -> i64 {
        self.max.j - self.min.j + 1
    }

    /// Iterates all cells in the rectangle, row-major.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        let (min, max) = (self.min, self.max);
        (min.i..=max.i).flat_map(move |i| (min.j..=max.j).map(move |j| CellIndex::new(i, j)))
    }
}

/// Outcome of feeding one observation into a coverage map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    /// The cell value increased.
    Updated,
    /// The cell already held an equal or better level.
    Unchanged,
    /// The observed cell lies outside the map window; ignored, not an error.
    OutsideExtent,
}

/// A self-observed coverage map: an odd-order square matrix of signal
/// quality levels whose center cell is the cell containing the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMap {
    order: usize,
    cells: Vec<SignalQuality>,
    center: GeoCoord,
    anchor: CellIndex,
}

impl CoverageMap {
    /// Creates an all-zero map of the given odd order centered at `center`.
    pub fn new(order: usize, center: GeoCoord, cell_size: f64) -> Result<Self> {
        if order == 0 || order % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "map order must be a positive odd integer, got {order}"
            )));
        }
        let anchor = cell_of(center, cell_size)?;
        Ok(CoverageMap {
            order,
            cells: vec![SignalQuality::NONE; order * order],
            center,
            anchor,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn center(&self) -> GeoCoord {
        self.center
    }

    pub fn anchor(&self) -> CellIndex {
        self.anchor
    }

    /// Half-width of the map window in cells.
    pub fn half_width(&self) -> i64 {
        (self.order as i64 - 1) / 2
    }

    /// The global cell rectangle this map spans.
    pub fn extent(&self) -> CellRect {
        let h = self.half_width();
        CellRect {
            min: CellIndex::new(self.anchor.i - h, self.anchor.j - h),
            max: CellIndex::new(self.anchor.i + h, self.anchor.j + h),
        }
    }

    fn slot(&self, at: CellIndex) -> Option<usize> {
        let h = self.half_width();
        let r = at.i - (self.anchor.i - h);
        let c = at.j - (self.anchor.j - h);
        if r < 0 || c < 0 || r >= self.order as i64 || c >= self.order as i64 {
            None
        } else {
            Some(r as usize * self.order + c as usize)
        }
    }

    /// Quality at a global cell index; cells outside the window read as 0.
    pub fn get(&self, at: CellIndex) -> SignalQuality {
        self.slot(at)
            .map(|s| self.cells[s])
            .unwrap_or(SignalQuality::NONE)
    }

    /// Overwrites a cell. Fixture/setup helper; observation feeding should go
    /// through [`CoverageMap::record_observation`].
    pub fn set(&mut self, at: CellIndex, q: SignalQuality) -> Result<()> {
        match self.slot(at) {
            Some(s) => {
                self.cells[s] = q;
                Ok(())
            }
            None => Err(Error::InvalidInput(format!(
                "cell ({}, {}) outside map extent",
                at.i, at.j
            ))),
        }
    }

    /// Merges one overheard-beacon observation: the cell keeps the best level
    /// ever seen, so repeated observations never degrade a learned cell.
    pub fn record_observation(&mut self, at: CellIndex, q: SignalQuality) -> Observation {
        match self.slot(at) {
            None => Observation::OutsideExtent,
            Some(s) => {
                if q > self.cells[s] {
                    self.cells[s] = q;
                    Observation::Updated
                } else {
                    Observation::Unchanged
                }
            }
        }
    }

    /// Iterates `(global cell, quality)` over all cells, row-major.
    pub fn iter(&self) -> impl Iterator<Item = (CellIndex, SignalQuality)> + '_ {
        let h = self.half_width();
        let anchor = self.anchor;
        let order = self.order as i64;
        self.cells.iter().enumerate().map(move |(idx, &q)| {
            let r = idx as i64 / order;
            let c = idx as i64 % order;
            (CellIndex::new(anchor.i - h + r, anchor.j - h + c), q)
        })
    }

    /// Iterates only the covered cells.
    pub fn covered_cells(&self) -> impl Iterator<Item = (CellIndex, SignalQuality)> + '_ {
        self.iter().filter(|(_, q)| q.is_covered())
    }

    pub fn covered_cell_count(&self) -> usize {
        self.cells.iter().filter(|q| q.is_covered()).count()
    }

    /// Expected encoded size in bytes for a map of the given order.
    pub fn encoded_len(order: usize) -> usize {
        (order * order * 3).div_ceil(8) + CENTER_ENCODING_BYTES
    }

    /// Encodes the map for over-the-air exchange: cells packed row-major at
    /// 3 bits each (MSB first), zero-padded to a byte boundary, followed by
    /// the center coordinate as two big-endian u16 multiples of 5 m.
    pub fn encode(&self) -> Vec<u8> {
        let payload_len = (self.order * self.order * 3).div_ceil(8);
        let mut out = vec![0u8; payload_len];
        for (idx, q) in self.cells.iter().enumerate() {
            let bit = idx * 3;
            let (byte, off) = (bit / 8, bit % 8);
            // 3-bit field starting at `off` from the MSB; may straddle bytes.
            let v = (q.level() as u16) << (13 - off);
            out[byte] |= (v >> 8) as u8;
            if off > 5 {
                out[byte + 1] |= (v & 0xff) as u8;
            }
        }
        let qx = quantize_coord(self.center.x);
        let qy = quantize_coord(self.center.y);
        out.extend_from_slice(&qx.to_be_bytes());
        out.extend_from_slice(&qy.to_be_bytes());
        out
    }

    /// Decodes a buffer produced by [`CoverageMap::encode`]. `cell_size` is
    /// needed to re-derive the anchor cell from the decoded center.
    pub fn decode(bytes: &[u8], order: usize, cell_size: f64) -> Result<Self> {
        if order == 0 || order % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "map order must be a positive odd integer, got {order}"
            )));
        }
        let expected = Self::encoded_len(order);
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "coverage map buffer is {} bytes, expected {} for order {}",
                bytes.len(),
                expected,
                order
            )));
        }
        let n_cells = order * order;
        let payload_len = expected - CENTER_ENCODING_BYTES;
        let mut cells = Vec::with_capacity(n_cells);
        for idx in 0..n_cells {
            let bit = idx * 3;
            let (byte, off) = (bit / 8, bit % 8);
            let mut v = (bytes[byte] as u16) << 8;
            if off > 5 {
                // Field straddles a byte boundary; always within the payload.
                v |= bytes[byte + 1] as u16;
            }
            let level = ((v >> (13 - off)) & 0b111) as u8;
            if level > 5 {
                return Err(Error::Format(format!(
                    "cell {idx} holds 3-bit value {level}; only levels 0..=5 are defined"
                )));
            }
            cells.push(SignalQuality(level));
        }
        // Padding bits after the last cell must be zero.
        let used_bits = n_cells * 3;
        if used_bits < payload_len * 8 {
            let last = bytes[payload_len - 1];
            let pad_bits = payload_len * 8 - used_bits;
            if last & ((1u8 << pad_bits) - 1) != 0 {
                return Err(Error::Format("nonzero padding bits".into()));
            }
        }
        let qx = u16::from_be_bytes([bytes[payload_len], bytes[payload_len + 1]]);
        let qy = u16::from_be_bytes([bytes[payload_len + 2], bytes[payload_len + 3]]);
        let center = GeoCoord::new(
            qx as f64 * COORD_RESOLUTION_M,
            qy as f64 * COORD_RESOLUTION_M,
        );
        let anchor = cell_of(center, cell_size)?;
        Ok(CoverageMap {
            order,
            cells,
            center,
            anchor,
        })
    }
}

fn quantize_coord(v: f64) -> u16 {
    let q = (v / COORD_RESOLUTION_M).round();
    q.clamp(0.0, u16::MAX as f64) as u16
}
