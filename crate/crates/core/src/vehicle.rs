//! Longitudinal driving models, episode simulation and time-to-collision
//! metrics.
//!
//! Sign conventions: the range `R` is lead position minus ego position
//! (bumper to bumper) and the range rate `R_dot` is lead speed minus ego
//! speed, so a closing gap has `R_dot < 0`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{AccParams, CarFollowingParams, CaseConfig, IdmParams, SubjectId};
use crate::error::{domain_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: f64,
    pub velocity: f64,
    /// Acceleration applied over the step that starts at this state.
    pub acceleration: f64,
}

impl VehicleState {
    pub fn new(position: f64, velocity: f64) -> Self {
        VehicleState {
            position,
            velocity,
            acceleration: 0.0,
        }
    }
}

fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Intelligent driver model acceleration, clamped to `[a_min, a_max]`.
///
/// The desired gap is `s0 + max(0, vT - v R_dot / (2 sqrt(alpha b)))`, so it
/// grows while the gap is closing. A range at or below the vehicle length
/// leaves no bumper gap and yields full braking; whether that counts as an
/// accident is decided by the caller against `d_acci`.
pub fn idm_accel(ego: &VehicleState, range: f64, range_rate: f64, p: &IdmParams) -> f64 {
    let gap = range - p.length;
    if gap <= 0.0 {
        return p.a_min;
    }
    let v = ego.velocity.max(0.0);
    let dynamic = v * p.headway - v * range_rate / (2.0 * libm::sqrt(p.alpha * p.comfortable_decel));
    let s_star = p.s0 + dynamic.max(0.0);
    let free = libm::pow(v / p.desired_speed, p.exponent);
    let interaction = (s_star / gap) * (s_star / gap);
    clamp(p.alpha * (1.0 - free - interaction), p.a_min, p.a_max)
}

/// Enhanced time to collision under constant relative acceleration `u_r`.
///
/// Returns the smallest positive root of `R + R_dot t + u_r t^2 / 2 = 0`, or
/// `None` when the gap never closes. For `|u_r| < 1e-6` the constant-speed
/// value `-R / R_dot` is used.
pub fn ettc(range: f64, range_rate: f64, u_r: f64) -> Result<Option<f64>> {
    if !(range > 0.0) {
        return Err(domain_err!("ettc needs a positive range, got {}", range));
    }
    if libm::fabs(u_r) < 1e-6 {
        return Ok(if range_rate < 0.0 {
            Some(-range / range_rate)
        } else {
            None
        });
    }
    let disc = range_rate * range_rate - 2.0 * u_r * range;
    if disc < 0.0 {
        return Ok(None);
    }
    // (-R_dot - sqrt(D)) / u_r rewritten without cancellation
    let denom = -range_rate + libm::sqrt(disc);
    if denom > 0.0 {
        Ok(Some(2.0 * range / denom))
    } else {
        Ok(None)
    }
}

/// ACC (an IDM-family law limited to `acc_min`) overridden by full braking
/// while ETTC is strictly below the AEB trigger.
pub fn acc_aeb_accel(ego: &VehicleState, range: f64, range_rate: f64, u_r: f64, p: &AccParams) -> f64 {
    if range > 0.0 {
        if let Ok(Some(t)) = ettc(range, range_rate, u_r) {
            if t < p.aeb_ettc {
                return p.idm.a_min;
            }
        }
    } else {
        return p.idm.a_min;
    }
    idm_accel(ego, range, range_rate, &p.idm).max(p.acc_min)
}

/// Lane-change incentive: own gain plus politeness-weighted gains of the new
/// and old followers.
pub fn mobil_utility(
    u_tilde: f64,
    u: f64,
    u_new_tilde: f64,
    u_new: f64,
    u_old_tilde: f64,
    u_old: f64,
    politeness: f64,
) -> f64 {
    u_tilde - u + politeness * (u_new_tilde - u_new + u_old_tilde - u_old)
}

/// A follower controller with its speed/acceleration box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Follower {
    Idm(IdmParams),
    AccAeb(AccParams),
}

impl Follower {
    pub fn for_subject(subject: SubjectId, cfg: &CaseConfig) -> Self {
        match subject {
            SubjectId::Surrogate => Follower::Idm(cfg.idm),
            SubjectId::Cav => Follower::AccAeb(cfg.acc),
        }
    }

    pub fn limits(&self) -> &IdmParams {
        match self {
            Follower::Idm(p) => p,
            Follower::AccAeb(p) => &p.idm,
        }
    }

    pub fn accel(&self, ego: &VehicleState, lead: &VehicleState) -> f64 {
        let range = lead.position - ego.position;
        let range_rate = lead.velocity - ego.velocity;
        match self {
            Follower::Idm(p) => idm_accel(ego, range, range_rate, p),
            Follower::AccAeb(p) => {
                acc_aeb_accel(ego, range, range_rate, lead.acceleration - ego.acceleration, p)
            }
        }
    }
}

/// Forward-Euler update with the speed clamped into `[v_min, v_max]`.
/// Returns the next state and the acceleration actually realized.
fn euler(s: &VehicleState, a: f64, dt: f64, v_min: f64, v_max: f64) -> (VehicleState, f64) {
    let v = clamp(s.velocity + a * dt, v_min, v_max);
    let realized = (v - s.velocity) / dt;
    (
        VehicleState {
            position: s.position + s.velocity * dt,
            velocity: v,
            acceleration: realized,
        },
        realized,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub ego: Vec<VehicleState>,
    pub lead: Vec<VehicleState>,
    /// Range dropped below `d_acci`.
    pub accident: bool,
    /// Stopped early for a reason other than an accident (car-following
    /// safe-zone entry).
    pub truncated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.ego.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ego.is_empty()
    }

    pub fn range(&self, i: usize) -> f64 {
        self.lead[i].position - self.ego[i].position
    }

    pub fn range_rate(&self, i: usize) -> f64 {
        self.lead[i].velocity - self.ego[i].velocity
    }

    pub fn min_range(&self) -> f64 {
        (0..self.len()).map(|i| self.range(i)).fold(f64::INFINITY, f64::min)
    }
}

/// Minimum over the episode of ETTC / U_I, with 1 for steps that have no
/// positive collision time; clamped to `[0, 1]`.
pub fn mnp_ettc(traj: &Trajectory, u_i: f64) -> f64 {
    let mut best = 1.0f64;
    for i in 0..traj.len() {
        let r = traj.range(i);
        let u_r = traj.lead[i].acceleration - traj.ego[i].acceleration;
        let np = if r <= 0.0 {
            0.0
        } else {
            match ettc(r, traj.range_rate(i), u_r) {
                Ok(Some(t)) => t / u_i,
                _ => 1.0,
            }
        };
        best = best.min(np);
    }
    clamp(best, 0.0, 1.0)
}

/// Cut-in episode: the lead appears at gap `range` with speed
/// `ego_speed + range_rate` and holds it; the follower reacts until the
/// horizon or the first step with `R < d_acci`.
pub fn simulate_cutin(range: f64, range_rate: f64, follower: &Follower, cfg: &CaseConfig) -> Trajectory {
    let c = &cfg.cutin;
    let lim = *follower.limits();
    let steps = libm::round(c.horizon / c.dt) as usize;
    let mut ego = VehicleState::new(0.0, c.ego_speed);
    let lead_speed = c.ego_speed + range_rate;
    let mut lead = VehicleState::new(range, lead_speed);
    let mut traj = Trajectory {
        dt: c.dt,
        ego: Vec::with_capacity(steps + 1),
        lead: Vec::with_capacity(steps + 1),
        accident: range < lim.d_acci,
        truncated: false,
    };
    for _ in 0..steps {
        if traj.accident {
            break;
        }
        let a = follower.accel(&ego, &lead);
        ego.acceleration = clamp(a, lim.a_min, lim.a_max);
        let (next_ego, realized) = euler(&ego, ego.acceleration, c.dt, lim.v_min, lim.v_max);
        ego.acceleration = realized;
        traj.ego.push(ego);
        traj.lead.push(lead);
        ego = next_ego;
        lead = VehicleState {
            position: lead.position + lead.velocity * c.dt,
            ..lead
        };
        if lead.position - ego.position < lim.d_acci {
            traj.accident = true;
        }
    }
    ego.acceleration = traj.ego.last().map_or(0.0, |s| s.acceleration);
    traj.ego.push(ego);
    traj.lead.push(lead);
    traj
}

/// Car-following state `(v_bv, R, R_dot)` in continuous coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowState {
    pub v_lead: f64,
    pub range: f64,
    pub range_rate: f64,
}

impl FollowState {
    pub fn from_array(s: [f64; 3]) -> Self {
        FollowState {
            v_lead: s[0],
            range: s[1],
            range_rate: s[2],
        }
    }

    pub fn v_follow(&self) -> f64 {
        self.v_lead - self.range_rate
    }
}

/// Acceleration the lead actually realizes over the next inner step.
fn lead_effective(lead: &VehicleState, u: f64, cf: &CarFollowingParams) -> f64 {
    (clamp(lead.velocity + u * cf.dt, cf.speed.lower, cf.speed.upper) - lead.velocity) / cf.dt
}

/// Continuous car-following simulation advanced one decision epoch at a
/// time. The lead speed is kept inside the state grid's speed range.
#[derive(Debug, Clone, Copy)]
pub struct FollowingSim {
    pub ego: VehicleState,
    pub lead: VehicleState,
    follower: Follower,
    cf: CarFollowingParams,
}

impl FollowingSim {
    pub fn new(s: FollowState, follower: &Follower, cf: &CarFollowingParams) -> Self {
        let lim = follower.limits();
        FollowingSim {
            ego: VehicleState::new(0.0, clamp(s.v_follow(), lim.v_min, lim.v_max)),
            lead: VehicleState::new(s.range, s.v_lead),
            follower: *follower,
            cf: *cf,
        }
    }

    pub fn state(&self) -> FollowState {
        FollowState {
            v_lead: self.lead.velocity,
            range: self.lead.position - self.ego.position,
            range_rate: self.lead.velocity - self.ego.velocity,
        }
    }

    /// Holds lead acceleration `u` for one epoch while the follower reacts
    /// at the inner step. Returns `true` at the first inner step with
    /// `R < d_acci`.
    pub fn epoch(&mut self, u: f64) -> bool {
        let lim = *self.follower.limits();
        let cf = &self.cf;
        let steps = libm::round(cf.epoch / cf.dt) as usize;
        for _ in 0..steps {
            self.lead.acceleration = lead_effective(&self.lead, u, cf);
            let a = clamp(self.follower.accel(&self.ego, &self.lead), lim.a_min, lim.a_max);
            let (next_ego, _) = euler(&self.ego, a, cf.dt, lim.v_min, lim.v_max);
            let (next_lead, _) = euler(&self.lead, u, cf.dt, cf.speed.lower, cf.speed.upper);
            self.ego = next_ego;
            self.lead = next_lead;
            if self.lead.position - self.ego.position < lim.d_acci {
                return true;
            }
        }
        false
    }
}

/// Result of one decision epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpochOutcome {
    Collision,
    Continue(FollowState),
}

/// One epoch from a grid state, with the follower starting unaccelerated.
pub fn advance_epoch(s: FollowState, u: f64, follower: &Follower, cf: &CarFollowingParams) -> EpochOutcome {
    let mut sim = FollowingSim::new(s, follower, cf);
    if sim.epoch(u) {
        EpochOutcome::Collision
    } else {
        EpochOutcome::Continue(sim.state())
    }
}

/// Continuous-state rollout of a lead action sequence (one action per
/// epoch), without re-discretization. Stops at collision or when the actions
/// run out.
pub fn simulate_following(s: FollowState, actions: &[f64], follower: &Follower, cf: &CarFollowingParams) -> Trajectory {
    let lim = *follower.limits();
    let mut traj = Trajectory {
        dt: cf.dt,
        ego: Vec::new(),
        lead: Vec::new(),
        accident: s.range < lim.d_acci,
        truncated: false,
    };
    if traj.accident {
        return traj;
    }
    let steps = libm::round(cf.epoch / cf.dt) as usize;
    let mut lead = VehicleState::new(s.range, s.v_lead);
    let mut ego = VehicleState::new(0.0, clamp(s.v_follow(), lim.v_min, lim.v_max));
    'outer: for &u in actions {
        for _ in 0..steps {
            lead.acceleration = lead_effective(&lead, u, cf);
            let a = clamp(follower.accel(&ego, &lead), lim.a_min, lim.a_max);
            let (next_ego, re) = euler(&ego, a, cf.dt, lim.v_min, lim.v_max);
            let (next_lead, rl) = euler(&lead, u, cf.dt, cf.speed.lower, cf.speed.upper);
            ego.acceleration = re;
            lead.acceleration = rl;
            traj.ego.push(ego);
            traj.lead.push(lead);
            ego = next_ego;
            lead = next_lead;
            if lead.position - ego.position < lim.d_acci {
                traj.accident = true;
                break 'outer;
            }
        }
    }
    traj.ego.push(ego);
    traj.lead.push(lead);
    traj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CaseId;

    fn at(v: f64) -> VehicleState {
        VehicleState::new(0.0, v)
    }

    #[test]
    fn idm_free_flow_at_desired_speed() {
        let p = IdmParams::default();
        let u = idm_accel(&at(18.0), 1e9, 0.0, &p);
        assert!(u.abs() < 1e-9);
    }

    #[test]
    fn idm_standstill_accelerates_at_alpha() {
        let p = IdmParams::default();
        assert_eq!(idm_accel(&at(0.0), 1e9, 0.0, &p), 2.0);
    }

    #[test]
    fn idm_at_desired_gap() {
        let p = IdmParams::default();
        // s* = 2 + 18 = 20, gap = s*: u = 2 (1 - 1 - 1) = -2
        let u = idm_accel(&at(18.0), p.length + 20.0, 0.0, &p);
        assert!((u + 2.0).abs() < 1e-12);
    }

    #[test]
    fn idm_closing_gap_brakes_harder() {
        let p = IdmParams::default();
        let open = idm_accel(&at(18.0), 40.0, 2.0, &p);
        let closing = idm_accel(&at(18.0), 40.0, -2.0, &p);
        assert!(closing < open);
    }

    #[test]
    fn ettc_closed_forms() {
        assert_eq!(ettc(20.0, -5.0, 0.0).unwrap(), Some(4.0));
        assert!((ettc(16.0, 0.0, -2.0).unwrap().unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(ettc(20.0, 5.0, 0.0).unwrap(), None);
        assert_eq!(ettc(20.0, -1.0, 5.0).unwrap(), None);
        assert!(ettc(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn ettc_continuous_at_fallback_boundary() {
        let (r, rr) = (20.0, -5.0);
        let q = ettc(r, rr, 1e-6).unwrap().unwrap();
        assert!((q - 4.0).abs() / 4.0 < 1e-6);
        let q = ettc(r, rr, -1e-6).unwrap().unwrap();
        assert!((q - 4.0).abs() / 4.0 < 1e-6);
    }

    #[test]
    fn aeb_overrides_with_strict_trigger() {
        let p = AccParams::default();
        // ETTC = 0.5 s
        assert_eq!(acc_aeb_accel(&at(30.0), 5.0, -10.0, 0.0, &p), -4.0);
        // ETTC exactly 1.5 s: no override, the ACC saturates at its own limit
        assert!(idm_accel(&at(30.0), 15.0, -10.0, &p.idm) < p.acc_min);
        assert_eq!(acc_aeb_accel(&at(30.0), 15.0, -10.0, 0.0, &p), p.acc_min);
        // just inside the trigger
        assert_eq!(acc_aeb_accel(&at(30.0), 14.99, -10.0, 0.0, &p), -4.0);
        // matched speeds far apart: equilibrium near zero
        assert!(acc_aeb_accel(&at(30.0), 1e6, 0.0, 0.0, &p).abs() < 1e-9);
    }

    #[test]
    fn mobil_substitution() {
        assert_eq!(mobil_utility(1.0, 1.0, 0.5, 0.5, 0.2, 0.2, 0.1), 0.0);
        assert_eq!(mobil_utility(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1), 1.0);
        assert!((mobil_utility(0.0, 0.0, -1.0, 0.0, -1.0, 0.0, 0.1) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn cutin_close_and_fast_crashes() {
        let cfg = CaseConfig::new(CaseId::Cutin);
        let f = Follower::for_subject(SubjectId::Surrogate, &cfg);
        let t = simulate_cutin(2.0, -18.0, &f, &cfg);
        assert!(t.accident);
        assert!(mnp_ettc(&t, 100.0) < 0.01);
        let t = simulate_cutin(88.0, 8.0, &f, &cfg);
        assert!(!t.accident);
        assert_eq!(mnp_ettc(&t, 100.0), 1.0);
    }

    #[test]
    fn cutin_trajectory_is_kinematically_consistent() {
        let cfg = CaseConfig::new(CaseId::Cutin);
        let f = Follower::for_subject(SubjectId::Cav, &cfg);
        let t = simulate_cutin(30.0, -6.0, &f, &cfg);
        for i in 1..t.len() {
            let (a, b) = (&t.ego[i - 1], &t.ego[i]);
            assert!((b.position - a.position - a.velocity * t.dt).abs() < 1e-9);
            assert!((b.velocity - a.velocity - a.acceleration * t.dt).abs() < 1e-9);
            assert!(a.acceleration >= -4.0 - 1e-9 && a.acceleration <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn following_equilibrium_holds_range() {
        let cfg = CaseConfig::new(CaseId::CarFollowing);
        // ACC at its desired speed with a long gap is in equilibrium
        let f = Follower::for_subject(SubjectId::Cav, &cfg);
        let s = FollowState { v_lead: 30.0, range: 1e4, range_rate: 0.0 };
        let t = simulate_following(s, &[0.0; 5], &f, &cfg.car_following);
        assert!(!t.accident);
        // the residual interaction term is of order (s*/s)^2
        assert!((t.range(t.len() - 1) - 1e4).abs() < 1e-2);
    }

    #[test]
    fn epoch_and_rollout_agree() {
        let cfg = CaseConfig::new(CaseId::CarFollowing);
        let f = Follower::for_subject(SubjectId::Surrogate, &cfg);
        let s = FollowState { v_lead: 30.0, range: 20.0, range_rate: -3.0 };
        let t = simulate_following(s, &[-2.0], &f, &cfg.car_following);
        match advance_epoch(s, -2.0, &f, &cfg.car_following) {
            EpochOutcome::Continue(n) => {
                let last = t.len() - 1;
                assert!((n.range - t.range(last)).abs() < 1e-9);
                assert!((n.range_rate - t.range_rate(last)).abs() < 1e-9);
            }
            EpochOutcome::Collision => assert!(t.accident),
        }
    }
}
