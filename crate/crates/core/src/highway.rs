//! Highway-exit geometry: background-vehicle trajectories in the target
//! lane, the feasible lane-change zone, and a simplified predictive exit
//! planner scored by the MOBIL incentive.
//!
//! The ego starts at `p0` with speed `v0` one lane left of the exit lane and
//! must move right before reaching the off-ramp at `exit_distance`. A
//! lane-change candidate is a point `(t, p)`. It is admissible when `p` lies
//! inside the kinematic reachability envelope at time `t`, and it is safe
//! when every target-lane vehicle is at least `t_min * v_i(t)` away from `p`
//! at that instant.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{HighwayParams, IdmParams, PlannerParams};
use crate::vehicle::{idm_accel, mobil_utility, VehicleState};

const EPS: f64 = 1e-9;

/// Initial state of one target-lane vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bv {
    pub p0: f64,
    pub v0: f64,
}

/// Decision vector `[p1, v1, p2, v2]` as two vehicles.
pub fn bvs_from_x(x: &[f64]) -> Vec<Bv> {
    x.chunks(2).map(|c| Bv { p0: c[0], v0: c[1] }).collect()
}

/// Positions and speeds of one vehicle at `t_k = k dt`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BvTrack {
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
}

fn n_steps(h: &HighwayParams) -> usize {
    libm::round(h.t_max / h.dt) as usize
}

/// Constant-speed vehicles; a follower that closes to within `d_cf` of the
/// vehicle ahead adopts that vehicle's speed from then on.
pub fn bv_tracks(bvs: &[Bv], h: &HighwayParams) -> Vec<BvTrack> {
    let n = n_steps(h);
    let mut order: Vec<usize> = (0..bvs.len()).collect();
    // leader first; ties keep input order
    order.sort_by(|&a, &b| bvs[b].p0.partial_cmp(&bvs[a].p0).unwrap_or(core::cmp::Ordering::Equal));
    let mut pos: Vec<f64> = bvs.iter().map(|b| b.p0).collect();
    let mut vel: Vec<f64> = bvs.iter().map(|b| b.v0).collect();
    let mut tracks: Vec<BvTrack> = bvs
        .iter()
        .map(|b| BvTrack {
            pos: vec![b.p0],
            vel: vec![b.v0],
        })
        .collect();
    for _ in 0..n {
        for w in 1..order.len() {
            let (lead, fol) = (order[w - 1], order[w]);
            let gap_now = pos[lead] - pos[fol];
            let gap_next = gap_now + (vel[lead] - vel[fol]) * h.dt;
            if gap_now < h.d_cf || gap_next < h.d_cf {
                vel[fol] = vel[lead];
            }
        }
        for i in 0..bvs.len() {
            pos[i] += vel[i] * h.dt;
            tracks[i].pos.push(pos[i]);
            tracks[i].vel.push(vel[i]);
        }
    }
    tracks
}

/// Position after `t` seconds from `(p0, v0)` holding acceleration `a`, with
/// the speed saturating at `[v_min, v_max]`.
pub fn position_under(a: f64, t: f64, h: &HighwayParams) -> (f64, f64) {
    let (p0, v0) = (h.p0, h.v0);
    if a == 0.0 {
        return (p0 + v0 * t, v0);
    }
    let limit = if a > 0.0 { h.v_max } else { h.v_min };
    let t_sat = ((limit - v0) / a).max(0.0);
    if t <= t_sat {
        (p0 + v0 * t + 0.5 * a * t * t, v0 + a * t)
    } else {
        let p_sat = p0 + v0 * t_sat + 0.5 * a * t_sat * t_sat;
        (p_sat + limit * (t - t_sat), limit)
    }
}

/// Reachable position interval `[p_min(t), p_max(t)]` under bang-bang
/// control.
pub fn envelope(t: f64, h: &HighwayParams) -> (f64, f64) {
    (position_under(h.a_min, t, h).0, position_under(h.a_max, t, h).0)
}

fn gap_ok(p: f64, k: usize, tracks: &[BvTrack], t_min: f64) -> bool {
    tracks
        .iter()
        .all(|tr| libm::fabs(p - tr.pos[k]) >= t_min * tr.vel[k] - EPS)
}

/// Whether some `p` in `[a, b]` keeps every gap at step `k`.
fn span_has_gap(a: f64, b: f64, k: usize, tracks: &[BvTrack], t_min: f64) -> bool {
    let mut blocked: Vec<(f64, f64)> = tracks
        .iter()
        .map(|tr| {
            let r = t_min * tr.vel[k] - EPS;
            (tr.pos[k] - r, tr.pos[k] + r)
        })
        .collect();
    blocked.sort_by(|x, y| x.0.total_cmp(&y.0));
    // sweep the lowest admissible point past the open blocked intervals
    let mut cur = a;
    for (lo, hi) in blocked {
        if lo >= cur {
            break;
        }
        cur = cur.max(hi);
    }
    cur <= b
}

/// Lane-change candidates on the `(t, p)` grid with feasibility flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleZone {
    pub nt: usize,
    pub np: usize,
    pub dt: f64,
    pub dp: f64,
    /// Row-major `[t][p]`.
    pub feasible: Vec<bool>,
    /// Candidates inside the reachability envelope, feasible or not.
    pub envelope_cells: usize,
}

impl FeasibleZone {
    pub fn count(&self) -> usize {
        self.feasible.iter().filter(|&&f| f).count()
    }

    /// `S(F)`: feasible cell count times the cell area.
    pub fn area(&self) -> f64 {
        self.count() as f64 * self.dt * self.dp
    }

    /// Area of the whole reachability envelope.
    pub fn envelope_area(&self) -> f64 {
        self.envelope_cells as f64 * self.dt * self.dp
    }

    pub fn is_empty(&self) -> bool {
        !self.feasible.iter().any(|&f| f)
    }

    pub fn at(&self, it: usize, ip: usize) -> bool {
        self.feasible[it * self.np + ip]
    }

    /// Connected components of feasible cells; `diagonal` selects
    /// 8-connectivity instead of 4-connectivity.
    pub fn components(&self, diagonal: bool) -> usize {
        let mut seen = vec![false; self.feasible.len()];
        let mut stack = Vec::new();
        let mut count = 0;
        for start in 0..self.feasible.len() {
            if !self.feasible[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(c) = stack.pop() {
                let (it, ip) = ((c / self.np) as i64, (c % self.np) as i64);
                for dt in -1i64..=1 {
                    for dp in -1i64..=1 {
                        if (dt == 0 && dp == 0) || (!diagonal && dt != 0 && dp != 0) {
                            continue;
                        }
                        let (jt, jp) = (it + dt, ip + dp);
                        if jt < 0 || jp < 0 || jt >= self.nt as i64 || jp >= self.np as i64 {
                            continue;
                        }
                        let j = jt as usize * self.np + jp as usize;
                        if self.feasible[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count
    }
}

/// Feasible lane-change zone for given target-lane vehicles and safety gap.
pub fn feasible_zone_for(tracks: &[BvTrack], h: &HighwayParams, t_min: f64) -> FeasibleZone {
    let nt = n_steps(h) + 1;
    let np = libm::floor(h.exit_distance / h.dp + EPS) as usize + 1;
    let mut feasible = vec![false; nt * np];
    let mut envelope_cells = 0;
    for it in 0..nt {
        let t = it as f64 * h.dt;
        let (lo, hi) = envelope(t, h);
        for ip in 0..np {
            // a cell counts when its span meets the envelope, and is feasible
            // when some reachable point of the span keeps every gap
            let p = h.p0 + ip as f64 * h.dp;
            if p + 0.5 * h.dp < lo - EPS || p - 0.5 * h.dp > hi + EPS || lo > h.exit_distance + EPS {
                continue;
            }
            envelope_cells += 1;
            let a = (p - 0.5 * h.dp).max(lo);
            let b = (p + 0.5 * h.dp).min(hi).min(h.exit_distance).max(a);
            feasible[it * np + ip] = span_has_gap(a, b, it, tracks, t_min);
        }
    }
    FeasibleZone {
        nt,
        np,
        dt: h.dt,
        dp: h.dp,
        feasible,
        envelope_cells,
    }
}

/// Feasible zone of scenario `x = [p1, v1, p2, v2]` at the surrogate's gap.
pub fn feasible_zone(x: &[f64], h: &HighwayParams) -> FeasibleZone {
    feasible_zone_for(&bv_tracks(&bvs_from_x(x), h), h, h.t_min)
}

/// Chosen lane-change point of a planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitPlan {
    pub accel: f64,
    pub t: f64,
    pub p: f64,
    pub utility: f64,
}

fn cruise_idm(base: &IdmParams, v: f64) -> IdmParams {
    IdmParams {
        desired_speed: v.max(1.0),
        ..*base
    }
}

/// Acceleration of a vehicle at `(p, v)` behind a leader at `(pl, vl)`,
/// using IDM with the follower's current speed as desired speed.
fn follow_accel(base: &IdmParams, p: f64, v: f64, leader: Option<(f64, f64)>) -> f64 {
    match leader {
        None => 0.0,
        Some((pl, vl)) => {
            let params = cruise_idm(base, v);
            idm_accel(&VehicleState::new(p, v), pl - p, vl - v, &params)
        }
    }
}

/// Outcome of a merge at one candidate point.
struct Merge {
    utility: f64,
    /// Ego and new-follower accelerations right after the change.
    ego: f64,
    follower: f64,
}

/// MOBIL incentive of merging at `(p, v)` at step `k`, holding acceleration
/// `a` before the change. There is no old follower.
fn merge(p: f64, v: f64, a: f64, k: usize, tracks: &[BvTrack], idm: &IdmParams, politeness: f64) -> Merge {
    let mut leader: Option<(f64, f64)> = None;
    let mut follower: Option<(f64, f64)> = None;
    for tr in tracks {
        let (bp, bv) = (tr.pos[k], tr.vel[k]);
        if bp > p {
            if leader.map_or(true, |(lp, _)| bp < lp) {
                leader = Some((bp, bv));
            }
        } else if follower.map_or(true, |(fp, _)| bp > fp) {
            follower = Some((bp, bv));
        }
    }
    let u_tilde = follow_accel(idm, p, v, leader);
    let (u_new_tilde, u_new) = match follower {
        None => (0.0, 0.0),
        Some((fp, fv)) => {
            // the follower's leader before the merge: nearest vehicle ahead of it
            let mut before: Option<(f64, f64)> = None;
            for tr in tracks {
                let (bp, bv) = (tr.pos[k], tr.vel[k]);
                if bp > fp && before.map_or(true, |(lp, _)| bp < lp) {
                    before = Some((bp, bv));
                }
            }
            (follow_accel(idm, fp, fv, Some((p, v))), follow_accel(idm, fp, fv, before))
        }
    };
    Merge {
        utility: mobil_utility(u_tilde, a, u_new_tilde, u_new, 0.0, 0.0, politeness),
        ego: u_tilde,
        follower: u_new_tilde,
    }
}

/// Enumerates constant-acceleration profiles and every grid time before the
/// exit; a candidate is safe when it keeps the time gaps and neither the ego
/// nor its new follower would have to brake harder than `b_safe`. Returns
/// the safe candidate with the highest MOBIL utility (ties to
/// the earliest time, then the first listed acceleration).
pub fn plan_exit(tracks: &[BvTrack], h: &HighwayParams, planner: &PlannerParams, idm: &IdmParams) -> Option<ExitPlan> {
    let n = n_steps(h);
    let mut best: Option<(ExitPlan, usize)> = None;
    for &a in &planner.accels {
        for k in 0..=n {
            let t = k as f64 * h.dt;
            let (p, v) = position_under(a, t, h);
            if p > h.exit_distance + EPS {
                break;
            }
            if !gap_ok(p, k, tracks, planner.t_min) {
                continue;
            }
            let saturated = (a > 0.0 && v >= h.v_max - EPS) || (a < 0.0 && v <= h.v_min + EPS);
            let a_now = if saturated { 0.0 } else { a };
            let m = merge(p, v, a_now, k, tracks, idm, h.politeness);
            // MOBIL safety criterion on both vehicles of the new lane
            if m.ego < -planner.b_safe - EPS || m.follower < -planner.b_safe - EPS {
                continue;
            }
            let utility = m.utility;
            let better = match best {
                None => true,
                Some((b, bk)) => utility > b.utility || (utility == b.utility && k < bk),
            };
            if better {
                best = Some((ExitPlan { accel: a, t, p, utility }, k));
            }
        }
    }
    best.map(|(b, _)| b)
}

/// Whether the planner completes the exit in scenario `x`.
pub fn exit_attempt(x: &[f64], h: &HighwayParams, planner: &PlannerParams, idm: &IdmParams) -> bool {
    let tracks = bv_tracks(&bvs_from_x(x), h);
    plan_exit(&tracks, h, planner, idm).is_some()
}

/// Surrogate exit attempt (the configured surrogate planner).
pub fn sm_exit_attempt(x: &[f64], h: &HighwayParams, idm: &IdmParams) -> bool {
    exit_attempt(x, h, &h.surrogate, idm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp() -> HighwayParams {
        HighwayParams::default()
    }

    #[test]
    fn bang_bang_envelope() {
        let h = hp();
        let (lo, hi) = envelope(5.0, &h);
        assert!((hi - 175.0).abs() < 1e-12);
        assert!((lo - (62.5 + 20.0 * 2.5)).abs() < 1e-12);
        assert_eq!(envelope(0.0, &h), (0.0, 0.0));
    }

    #[test]
    fn speed_matching_rule() {
        let mut h = hp();
        h.t_max = 10.0;
        let tr = bv_tracks(&[Bv { p0: 10.0, v0: 20.0 }, Bv { p0: 0.0, v0: 30.0 }], &h);
        // follower closes 10 m at 10 m/s and then adopts 20 m/s
        let last = tr[1].vel.len() - 1;
        assert_eq!(tr[1].vel[last], 20.0);
        assert!(tr[0].pos[last] - tr[1].pos[last] > 0.0);
        assert_eq!(tr[0].vel[last], 20.0);
    }

    #[test]
    fn no_vehicles_means_whole_envelope() {
        let h = hp();
        let z = feasible_zone_for(&[], &h, h.t_min);
        assert_eq!(z.count(), z.envelope_cells);
        assert!(z.area() / h.u_s <= 1.2);
        assert_eq!(plan_exit(&[], &h, &h.surrogate, &IdmParams::default()).map(|p| p.t), Some(0.0));
    }

    #[test]
    fn example_scenario_has_three_zones() {
        let h = hp();
        let z = feasible_zone(&[-25.0, 34.5, -100.0, 40.0], &h);
        // candidates sweep diagonally through the (t, p) grid
        assert_eq!(z.components(true), 3);
        assert!(sm_exit_attempt(&[-25.0, 34.5, -100.0, 40.0], &h, &IdmParams::default()));
    }

    #[test]
    fn area_shrinks_with_stricter_gap() {
        let h = hp();
        let tracks = bv_tracks(&bvs_from_x(&[20.0, 28.0, -30.0, 31.0]), &h);
        let mut prev = f64::INFINITY;
        for k in 0..8 {
            let a = feasible_zone_for(&tracks, &h, 0.25 * k as f64).area();
            assert!(a <= prev);
            prev = a;
        }
    }
}
