//! Sparse-network emergency broadcast experiment.
//!
//! An emergency message is disseminated with a simplified multi-origin
//! store-carry-forward scheme: boundary nodes (found with a gift-wrapping
//! convex hull) of the cluster around each origin are designated as
//! carriers and rebroadcast wherever they travel, while other informed
//! vehicles store the message silently. Every informed active parked-car
//! RSU acts as an additional always-on origin and designates fresh carriers
//! around itself. This deliberately simplifies the full UV-CAST protocol
//! (no rebroadcast suppression timers or NLOS heuristics); the module
//! exists for the comparative experiment, not protocol fidelity.

use serde::{Deserialize, Serialize};

use crate::geo::GeoCoord;
use crate::propagation::classify;
use crate::scenario::{Scenario, VehicleId};

/// An emergency message dispatched from a fixed origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BroadcastMessage {
    pub id: u32,
    pub origin: GeoCoord,
    pub creation_time: f64,
}

/// Time series of how many distinct vehicles have received the message.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReachabilitySeries {
    /// `(time, informed vehicle count)`, non-decreasing in both.
    pub points: Vec<(f64, u32)>,
    /// Moving-vehicle population of the run.
    pub population: u32,
}

impl ReachabilitySeries {
    /// First time at which at least `fraction` of the population is
    /// informed.
    pub fn time_to_fraction(&self, fraction: f64) -> Option<f64> {
        let needed = (self.population as f64 * fraction).ceil() as u32;
        self.points
            .iter()
            .find(|(_, c)| *c >= needed)
            .map(|(t, _)| *t)
    }

    pub fn time_to_full(&self) -> Option<f64> {
        self.time_to_fraction(1.0)
    }
}

/// Cross product orientation; positive means c is left of a->b.
fn orient(a: GeoCoord, b: GeoCoord, c: GeoCoord) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Gift-wrapping convex hull: returns the indices of the cluster's edge
/// nodes, the designated rebroadcasters. Clusters of one or two nodes are
/// all boundary.
pub fn select_boundary_nodes(cluster: &[GeoCoord]) -> Vec<usize> {
    let n = cluster.len();
    if n <= 2 {
        return (0..n).collect();
    }
    // Degenerate cluster collapsed onto one point.
    if cluster.iter().all(|p| p.distance(&cluster[0]) == 0.0) {
        return vec![0];
    }
    let start = (0..n)
        .min_by(|&a, &b| {
            (cluster[a].y, cluster[a].x)
                .partial_cmp(&(cluster[b].y, cluster[b].x))
                .unwrap()
        })
        .expect("nonempty");
    let mut hull = Vec::new();
    let mut current = start;
    loop {
        hull.push(current);
        let mut next = (current + 1) % n;
        for k in 0..n {
            if k == current || k == next {
                continue;
            }
            let o = orient(cluster[current], cluster[next], cluster[k]);
            let farther =
                cluster[current].distance(&cluster[k]) > cluster[current].distance(&cluster[next]);
            // Wrap clockwise; collinear candidates keep the farthest so
            // interior collinear points are not reported as boundary.
            if o < 0.0 || (o == 0.0 && farther) {
                next = k;
            }
        }
        current = next;
        if current == start {
            break;
        }
        if hull.len() > n {
            // Numerical pathologies cannot grow the hull past n vertices.
            break;
        }
    }
    hull
}

/// A node taking part in dissemination: a moving vehicle or an active
/// parked-car RSU (by index into the RSU position list).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum NodeRef {
    Mover(VehicleId),
    Rsu(usize),
}

/// Hop radius of the "local cluster" an origin considers when designating
/// boundary carriers.
const DESIGNATION_HOPS: usize = 3;

/// Runs the store-carry-forward dissemination over the scenario's mobility
/// trace, with `rsu_positions` as active parked-car RSUs.
///
/// Only *designated* boundary nodes carry the message outward: boundary
/// selection runs on the origin's cluster when the message is created and,
/// every tick, on the cluster around each informed RSU (each informed RSU is
/// a standing origin). Other informed movers store the message but stay
/// silent. Per beacon tick a rebroadcast relays through its entire
/// connected cluster — radio propagation is instantaneous relative to the
/// 1 s tick — and the census records the state at the end of the tick's
/// delivery interval. Reception requires a nonzero quality classification.
pub fn run_broadcast(
    scenario: &Scenario,
    rsu_positions: &[GeoCoord],
    message: &BroadcastMessage,
) -> ReachabilitySeries {
    let obs = &scenario.obstructions;
    let qt = &scenario.config.quality;
    let in_range = |a: GeoCoord, b: GeoCoord| classify(a, b, obs, qt).is_covered();

    // Bucket mover positions by whole-second tick.
    let mut ticks: std::collections::BTreeMap<i64, Vec<(VehicleId, GeoCoord)>> = Default::default();
    for s in scenario.trace.samples() {
        ticks
            .entry(s.time.floor() as i64)
            .or_default()
            .push((s.vehicle, s.position));
    }
    let population = scenario.trace.vehicles().len() as u32;
    let mut series = ReachabilitySeries {
        points: Vec::new(),
        population,
    };

    let mut informed: std::collections::BTreeSet<NodeRef> = Default::default();
    // Movers designated as rebroadcasters; designation is permanent.
    let mut carriers: std::collections::BTreeSet<VehicleId> = Default::default();
    let creation_tick = message.creation_time.floor() as i64;

    for (&tick, movers) in ticks.range(creation_tick..) {
        // Positions of every node present this tick.
        let mut nodes: Vec<(NodeRef, GeoCoord)> = movers
            .iter()
            .map(|&(id, p)| (NodeRef::Mover(id), p))
            .collect();
        nodes.extend(
            rsu_positions
                .iter()
                .enumerate()
                .map(|(k, &p)| (NodeRef::Rsu(k), p)),
        );

        if tick == creation_tick {
            // The accident vehicle is the nearest mover to the origin; it
            // starts informed even when outside radio range of the scene.
            if let Some((src, _)) = movers
                .iter()
                .min_by(|a, b| {
                    a.1.distance(&message.origin)
                        .partial_cmp(&b.1.distance(&message.origin))
                        .unwrap()
                })
            {
                informed.insert(NodeRef::Mover(*src));
            }
        }

        // Multi-source BFS from the active transmitters: the accident scene
        // itself (the wrecked vehicle keeps transmitting at the origin in
        // both arms), designated carriers, and informed RSUs. A rebroadcast
        // relays through every intermediate receiver, reaching the whole
        // connected cluster within the tick.
        let mut hops = vec![usize::MAX; nodes.len()];
        let mut queue = std::collections::VecDeque::new();
        for (k, (r, p)) in nodes.iter().enumerate() {
            let transmits = match r {
                NodeRef::Mover(id) => {
                    carriers.contains(id) || (tick == creation_tick && informed.contains(r))
                }
                NodeRef::Rsu(_) => informed.contains(r),
            };
            if transmits {
                hops[k] = 0;
                queue.push_back(k);
            } else if tick == creation_tick && in_range(*p, message.origin) {
                hops[k] = 1;
                queue.push_back(k);
            }
        }
        while let Some(cur) = queue.pop_front() {
            for other in 0..nodes.len() {
                if hops[other] == usize::MAX && in_range(nodes[cur].1, nodes[other].1) {
                    hops[other] = hops[cur] + 1;
                    queue.push_back(other);
                }
            }
        }
        for (k, (r, _)) in nodes.iter().enumerate() {
            if hops[k] != usize::MAX {
                informed.insert(*r);
            }
        }

        // Boundary selection runs at each origin — the accident scene and
        // every informed RSU: the hull of the informed movers in the
        // origin's local cluster (the nodes within DESIGNATION_HOPS) is
        // designated as new carriers.
        let mut origin_positions: Vec<GeoCoord> = if tick == creation_tick {
            vec![message.origin]
        } else {
            Vec::new()
        };
        origin_positions.extend(nodes.iter().filter_map(|(r, p)| match r {
            NodeRef::Rsu(_) if informed.contains(r) => Some(*p),
            _ => None,
        }));
        for &origin in &origin_positions {
            // BFS the origin's local cluster out to DESIGNATION_HOPS.
            let mut local = vec![usize::MAX; nodes.len()];
            let mut q = std::collections::VecDeque::new();
            for (k, (_, p)) in nodes.iter().enumerate() {
                if in_range(*p, origin) {
                    local[k] = 1;
                    q.push_back(k);
                }
            }
            while let Some(cur) = q.pop_front() {
                if local[cur] >= DESIGNATION_HOPS {
                    continue;
                }
                for other in 0..nodes.len() {
                    if local[other] == usize::MAX && in_range(nodes[cur].1, nodes[other].1) {
                        local[other] = local[cur] + 1;
                        q.push_back(other);
                    }
                }
            }
            let cluster: Vec<(VehicleId, GeoCoord)> = nodes
                .iter()
                .enumerate()
                .filter_map(|(k, (r, p))| match r {
                    NodeRef::Mover(id) if local[k] != usize::MAX && informed.contains(r) => {
                        Some((*id, *p))
                    }
                    _ => None,
                })
                .collect();
            let positions: Vec<GeoCoord> = cluster.iter().map(|(_, p)| *p).collect();
            for b in select_boundary_nodes(&positions) {
                carriers.insert(cluster[b].0);
            }
        }

        // The census counts every vehicle ever informed, including those
        // without a sample this tick.
        let total_informed = informed
            .iter()
            .filter(|r| matches!(r, NodeRef::Mover(_)))
            .count() as u32;
        // Delivery occupies the tick interval; the census records the
        // state at its end.
        series.points.push(((tick + 1) as f64, total_informed));
        if total_informed == population {
            break;
        }
    }
    series
}

/// Aggregate of one density point of the broadcast experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BroadcastSummary {
    pub density_per_km2: f64,
    pub seeds: u64,
    /// Mean time to full reachability without RSU support (censored at the
    /// scenario duration when never reached).
    pub mean_time_full_control: f64,
    /// Mean time to full reachability with the 1:10 parked-car RSUs.
    pub mean_time_full_rsu: f64,
    pub mean_time_90_control: f64,
    pub mean_time_90_rsu: f64,
    /// Relative improvement of the RSU arm over control, in [0, 1].
    pub improvement_full: f64,
}

/// Runs `seeds` paired control/RSU dissemination runs at one traffic
/// density and averages the time-to-reachability metrics.
pub fn broadcast_experiment(
    density_per_km2: f64,
    area_km2: f64,
    duration_s: f64,
    parked_ratio: f64,
    seeds: std::ops::Range<u64>,
) -> crate::Result<BroadcastSummary> {
    use crate::scenario::{synthesize, ScenarioConfig, SynthesisParams};
    let n_seeds = seeds.end.saturating_sub(seeds.start);
    let mut sum_full_control = 0.0;
    let mut sum_full_rsu = 0.0;
    let mut sum_90_control = 0.0;
    let mut sum_90_rsu = 0.0;
    for seed in seeds.clone() {
        let scenario = synthesize(
            SynthesisParams {
                density_per_km2,
                area_km2,
                duration_s,
                parked_ratio,
                seed,
                street_spacing: 160.0,
            },
            ScenarioConfig::default(),
        )?;
        let rsus: Vec<GeoCoord> = scenario
            .parking
            .iter()
            .filter_map(|ev| ev.position)
            .collect();
        // Accident at a seed-dependent street location.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        let side = scenario.config.bounds.0;
        let origin = GeoCoord::new(
            rng.gen_range(0.2 * side..0.8 * side),
            rng.gen_range(0.2 * side..0.8 * side),
        );
        let message = BroadcastMessage {
            id: 1,
            origin,
            creation_time: 0.0,
        };
        let censor = |t: Option<f64>| t.unwrap_or(duration_s);
        let control = run_broadcast(&scenario, &[], &message);
        let with_rsus = run_broadcast(&scenario, &rsus, &message);
        sum_full_control += censor(control.time_to_full());
        sum_full_rsu += censor(with_rsus.time_to_full());
        sum_90_control += censor(control.time_to_fraction(0.9));
        sum_90_rsu += censor(with_rsus.time_to_fraction(0.9));
    }
    let n = n_seeds.max(1) as f64;
    let mean_time_full_control = sum_full_control / n;
    let mean_time_full_rsu = sum_full_rsu / n;
    Ok(BroadcastSummary {
        density_per_km2,
        seeds: n_seeds,
        mean_time_full_control,
        mean_time_full_rsu,
        mean_time_90_control: sum_90_control / n,
        mean_time_90_rsu: sum_90_rsu / n,
        improvement_full: if mean_time_full_control > 0.0 {
            1.0 - mean_time_full_rsu / mean_time_full_control
        } else {
            0.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{synthesize, ScenarioConfig, SynthesisParams};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn triangle_is_all_boundary() {
        let pts = vec![
            GeoCoord::new(0.0, 0.0),
            GeoCoord::new(10.0, 0.0),
            GeoCoord::new(5.0, 8.0),
        ];
        let mut hull = select_boundary_nodes(&pts);
        hull.sort();
        assert_eq!(hull, vec![0, 1, 2]);
    }

    #[test]
    fn square_with_interior_point_keeps_corners() {
        let pts = vec![
            GeoCoord::new(0.0, 0.0),
            GeoCoord::new(10.0, 0.0),
            GeoCoord::new(10.0, 10.0),
            GeoCoord::new(0.0, 10.0),
            GeoCoord::new(5.0, 5.0),
        ];
        let mut hull = select_boundary_nodes(&pts);
        hull.sort();
        assert_eq!(hull, vec![0, 1, 2, 3]);
    }

    #[test]
    fn tiny_clusters_are_all_boundary() {
        assert_eq!(select_boundary_nodes(&[]), Vec::<usize>::new());
        assert_eq!(select_boundary_nodes(&[GeoCoord::new(1.0, 1.0)]), vec![0]);
        assert_eq!(
            select_boundary_nodes(&[GeoCoord::new(1.0, 1.0), GeoCoord::new(2.0, 2.0)]),
            vec![0, 1]
        );
    }

    /// O(n^3) hull membership oracle: an edge (a, b) is a hull edge iff
    /// every other point sits strictly on one side; hull vertices are the
    /// endpoints of hull edges.
    fn hull_oracle(pts: &[GeoCoord]) -> Vec<usize> {
        let n = pts.len();
        let mut on_hull = vec![false; n];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                let mut left = 0;
                let mut right = 0;
                for c in 0..n {
                    if c == a || c == b {
                        continue;
                    }
                    let o = orient(pts[a], pts[b], pts[c]);
                    if o > 0.0 {
                        left += 1;
                    } else if o < 0.0 {
                        right += 1;
                    }
                }
                if left == 0 || right == 0 {
                    on_hull[a] = true;
                    on_hull[b] = true;
                }
            }
        }
        (0..n).filter(|&k| on_hull[k]).collect()
    }

    #[test]
    fn random_points_match_cubic_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for round in 0..10 {
            let n = 20 * (round + 1);
            let pts: Vec<GeoCoord> = (0..n)
                .map(|_| GeoCoord::new(rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0)))
                .collect();
            let mut hull = select_boundary_nodes(&pts);
            hull.sort();
            assert_eq!(hull, hull_oracle(&pts), "round {round}");
        }
    }

    fn sparse_scenario(seed: u64, density: f64, duration: f64) -> Scenario {
        synthesize(
            SynthesisParams {
                density_per_km2: density,
                area_km2: 1.0,
                duration_s: duration,
                parked_ratio: 0.1,
                seed,
                street_spacing: 160.0,
            },
            ScenarioConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn no_movers_keeps_series_flat() {
        let mut s = sparse_scenario(1, 20.0, 30.0);
        s.trace = crate::scenario::MobilityTrace::default();
        let msg = BroadcastMessage {
            id: 1,
            origin: GeoCoord::new(500.0, 500.0),
            creation_time: 0.0,
        };
        let series = run_broadcast(&s, &[], &msg);
        assert!(series.points.is_empty());
        assert_eq!(series.population, 0);
    }

    #[test]
    fn series_is_monotone_and_bounded() {
        let s = sparse_scenario(5, 40.0, 120.0);
        let msg = BroadcastMessage {
            id: 1,
            origin: GeoCoord::new(450.0, 450.0),
            creation_time: 0.0,
        };
        let rsus: Vec<GeoCoord> = s.parking.iter().filter_map(|ev| ev.position).collect();
        let series = run_broadcast(&s, &rsus, &msg);
        assert!(series
            .points
            .windows(2)
            .all(|w| w[1].1 >= w[0].1 && w[1].0 > w[0].0));
        assert!(series.points.iter().all(|(_, c)| *c <= series.population));
    }

    #[test]
    fn dense_instant_topology_informs_everyone_fast() {
        // Cram enough vehicles into the area that the topology is
        // effectively fully connected from the first tick.
        let s = synthesize(
            SynthesisParams {
                density_per_km2: 300.0,
                area_km2: 0.04,
                duration_s: 20.0,
                parked_ratio: 0.0,
                seed: 2,
                street_spacing: 60.0,
            },
            ScenarioConfig::default(),
        )
        .unwrap();
        let msg = BroadcastMessage {
            id: 1,
            origin: GeoCoord::new(100.0, 100.0),
            creation_time: 0.0,
        };
        let series = run_broadcast(&s, &[], &msg);
        let t_full = series.time_to_full().expect("fully reachable");
        assert!(t_full <= 3.0, "took {t_full}s");
    }

    /// Full-epidemic flooding oracle: every informed node rebroadcasts each
    /// tick. The protocol must never inform a node earlier than flooding.
    fn flooding_first_reception(
        scenario: &Scenario,
        rsus: &[GeoCoord],
        msg: &BroadcastMessage,
    ) -> std::collections::BTreeMap<VehicleId, i64> {
        let qt = &scenario.config.quality;
        let obs = &scenario.obstructions;
        let in_range = |a: GeoCoord, b: GeoCoord| classify(a, b, obs, qt).is_covered();
        let mut ticks: std::collections::BTreeMap<i64, Vec<(VehicleId, GeoCoord)>> =
            Default::default();
        for s in scenario.trace.samples() {
            ticks
                .entry(s.time.floor() as i64)
                .or_default()
                .push((s.vehicle, s.position));
        }
        let mut informed_movers: std::collections::BTreeMap<VehicleId, i64> = Default::default();
        let mut informed_rsus: std::collections::BTreeSet<usize> = Default::default();
        for (&tick, movers) in ticks.iter() {
            if tick == msg.creation_time.floor() as i64 {
                if let Some((src, _)) = movers.iter().min_by(|a, b| {
                    a.1.distance(&msg.origin)
                        .partial_cmp(&b.1.distance(&msg.origin))
                        .unwrap()
                }) {
                    informed_movers.insert(*src, tick);
                }
            }
            // The wrecked vehicle keeps transmitting at the scene.
            for (id, p) in movers {
                if in_range(*p, msg.origin) {
                    informed_movers.entry(*id).or_insert(tick);
                }
            }
            for (k, p) in rsus.iter().enumerate() {
                if in_range(*p, msg.origin) {
                    informed_rsus.insert(k);
                }
            }
            // Relay to a fixpoint within the tick: radio propagation is
            // instant relative to the 1 s tick, so a flood reaches the whole
            // connected component around every informed node.
            loop {
                let senders: Vec<GeoCoord> = movers
                    .iter()
                    .filter(|(id, _)| informed_movers.contains_key(id))
                    .map(|(_, p)| *p)
                    .chain(informed_rsus.iter().map(|&k| rsus[k]))
                    .collect();
                let mut new_movers = Vec::new();
                let mut new_rsus = Vec::new();
                for (id, p) in movers {
                    if !informed_movers.contains_key(id) && senders.iter().any(|s| in_range(*s, *p))
                    {
                        new_movers.push(*id);
                    }
                }
                for (k, p) in rsus.iter().enumerate() {
                    if !informed_rsus.contains(&k) && senders.iter().any(|s| in_range(*s, *p)) {
                        new_rsus.push(k);
                    }
                }
                if new_movers.is_empty() && new_rsus.is_empty() {
                    break;
                }
                for id in new_movers {
                    informed_movers.insert(id, tick);
                }
                informed_rsus.extend(new_rsus);
            }
        }
        informed_movers
    }

    #[test]
    fn protocol_never_beats_flooding() {
        for seed in 0..5 {
            let s = sparse_scenario(seed, 30.0, 90.0);
            let rsus: Vec<GeoCoord> = s.parking.iter().filter_map(|ev| ev.position).collect();
            let msg = BroadcastMessage {
                id: 1,
                origin: GeoCoord::new(500.0, 400.0),
                creation_time: 0.0,
            };
            let flood = flooding_first_reception(&s, &rsus, &msg);
            // Re-run the protocol and capture first receptions from the
            // series by re-deriving: series counts only, so instead assert
            // the protocol's total at each tick never exceeds flooding's.
            let series = run_broadcast(&s, &rsus, &msg);
            for (t, count) in &series.points {
                let flood_count = flood
                    .values()
                    .filter(|&&ft| ft <= t.floor() as i64)
                    .count() as u32;
                assert!(
                    *count <= flood_count,
                    "seed {seed}: protocol informed {count} by {t}, flooding only {flood_count}"
                );
            }
        }
    }
}
