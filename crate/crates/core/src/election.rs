//! Periodic wake-up scheduling and replacement elections.
//!
//! Sleeping cars wake in parallel at every multiple of the shared period and
//! listen for one control-channel interval. A car that misses several beacons
//! in a row from a previously heard RSU starts an election: every candidate
//! arms a backoff timer inversely related to its decision score, the first
//! timer to fire wins, and the winner's beacon suppresses everyone else.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::VehicleId;
use crate::{Error, Result};

/// Shared periodic wake-up schedule for sleeping cars.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WakeSchedule {
    /// Wake period, seconds. Wake instants are exactly the times t with
    /// t mod period = 0.
    pub period: f64,
    /// Listening window per wake-up: one CCH interval.
    pub listen_window: f64,
}

impl WakeSchedule {
    pub fn new(period: f64, listen_window: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Config(format!(
                "wake period must be positive, got {period}"
            )));
        }
        if listen_window > period {
            return Err(Error::Config(format!(
                "listen window {listen_window} exceeds wake period {period}"
            )));
        }
        Ok(WakeSchedule {
            period,
            listen_window,
        })
    }

    /// Fraction of time a sleeping car keeps its radio on.
    pub fn duty_cycle(&self) -> f64 {
        self.listen_window / self.period
    }
}

/// Smallest wake instant at or after `t_now`. Every node sharing the period
/// computes identical instants, so all sleeping cars wake in parallel.
pub fn next_wake(t_now: f64, sched: &WakeSchedule) -> f64 {
    let k = (t_now / sched.period).ceil();
    let t = k * sched.period;
    // Guard against ceil landing a hair below t_now through rounding.
    if t < t_now {
        t + sched.period
    } else {
        t
    }
}

/// Election backoff per the inverse-score rule: the score is clamped to
/// [0, d_score_max], its complementary ratio scales the slot count, and the
/// floored slot index is multiplied by the CCH interval.
pub fn backoff_time(d_score: f64, d_score_max: f64, slots: u32, t_cch: f64) -> Result<f64> {
    Ok(backoff_slot(d_score, d_score_max, slots)? as f64 * t_cch)
}

/// The slot index part of [`backoff_time`].
pub fn backoff_slot(d_score: f64, d_score_max: f64, slots: u32) -> Result<u32> {
    if !(d_score_max > 0.0) {
        return Err(Error::Config(format!(
            "d_score_max must be positive, got {d_score_max}"
        )));
    }
    if slots < 1 {
        return Err(Error::Config("need at least one backoff slot".into()));
    }
    let ratio = (d_score.clamp(0.0, d_score_max)) / d_score_max;
    Ok(((1.0 - ratio) * slots as f64).floor() as u32)
}

/// Tracks missed RSU beacons for a sleeping car; an election is warranted
/// only after several consecutive misses, since beacon delivery is lossy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectionState {
    pub missed_beacons: u32,
    pub miss_threshold: u32,
}

impl ElectionState {
    pub fn new(miss_threshold: u32) -> Self {
        ElectionState {
            missed_beacons: 0,
            miss_threshold,
        }
    }

    pub fn heard_beacon(&mut self) {
        self.missed_beacons = 0;
    }

    /// Records a missed beacon; true when the miss streak warrants an
    /// election.
    pub fn missed_beacon(&mut self) -> bool {
        self.missed_beacons += 1;
        self.missed_beacons >= self.miss_threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectionParams {
    pub d_score_max: f64,
    pub slots: u32,
    pub t_cch: f64,
    /// Seed for the MAC-contention tie break among same-slot candidates.
    pub seed: u64,
}

/// Result of a replacement election.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionOutcome {
    pub winner: Option<VehicleId>,
    /// Seconds after the election trigger at which the winner fired.
    pub winner_backoff: f64,
    /// Candidates whose pending timers the winner's beacon cancelled.
    pub suppressed: Vec<VehicleId>,
}

/// Runs a replacement election over `(candidate, d_score)` pairs. The
/// candidate in the earliest backoff slot wins; candidates sharing that slot
/// are tie-broken uniformly at random (seeded), standing in for MAC-layer
/// contention. An empty candidate list yields no winner and the service gap
/// persists until a new car parks.
pub fn run_election(
    candidates: &[(VehicleId, f64)],
    params: &ElectionParams,
) -> Result<ElectionOutcome> {
    if candidates.is_empty() {
        return Ok(ElectionOutcome {
            winner: None,
            winner_backoff: 0.0,
            suppressed: Vec::new(),
        });
    }
    let mut slotted: Vec<(u32, VehicleId)> = Vec::with_capacity(candidates.len());
    for (id, score) in candidates {
        slotted.push((backoff_slot(*score, params.d_score_max, params.slots)?, *id));
    }
    let min_slot = slotted.iter().map(|(s, _)| *s).min().expect("nonempty");
    let mut tied: Vec<VehicleId> = slotted
        .iter()
        .filter(|(s, _)| *s == min_slot)
        .map(|(_, id)| *id)
        .collect();
    tied.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let winner = tied[rng.gen_range(0..tied.len())];
    let mut suppressed: Vec<VehicleId> = candidates
        .iter()
        .map(|(id, _)| *id)
        .filter(|id| *id != winner)
        .collect();
    suppressed.sort();
    Ok(ElectionOutcome {
        winner: Some(winner),
        winner_backoff: min_slot as f64 * params.t_cch,
        suppressed,
    })
}
