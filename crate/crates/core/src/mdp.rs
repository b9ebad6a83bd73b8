//! Finite MDPs with deterministic surrogate transitions, and the
//! car-following instance built from the lead-vehicle action grid.
//!
//! States are partitioned into three zones. From a collision state the
//! accident has happened; from a safe state it can no longer happen; only
//! dangerous states carry transitions. A transition from a dangerous state
//! lands in the collision zone, the safe zone, or another dangerous state.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::CarFollowingParams;
use crate::error::{config_err, domain_err, Error, Result};
use crate::space::ScenarioSpace;
use crate::vehicle::{advance_epoch, EpochOutcome, FollowState, Follower};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    Collision,
    Dangerous,
    Safe,
}

impl Zone {
    pub fn code(self) -> char {
        match self {
            Zone::Collision => 'c',
            Zone::Dangerous => 'd',
            Zone::Safe => 's',
        }
    }

    pub fn from_code(c: char) -> Result<Self> {
        match c {
            'c' => Ok(Zone::Collision),
            'd' => Ok(Zone::Dangerous),
            's' => Ok(Zone::Safe),
            other => Err(domain_err!("unknown zone code {:?}", other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Next {
    Collision,
    Safe,
    State(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// Decision epochs per scenario.
    pub horizon: usize,
    pub zones: Vec<Zone>,
    /// Dangerous states in increasing order.
    dangerous: Vec<u32>,
    /// Row index of each state in `next`, `u32::MAX` when not dangerous.
    row: Vec<u32>,
    /// `[row][action]` successors of dangerous states.
    next: Vec<Next>,
}

impl TabularMdp {
    /// `transition(s, u)` is queried for dangerous states only. Successors
    /// that are collision or safe states are folded into the terminal
    /// variants.
    pub fn new<F>(zones: Vec<Zone>, n_actions: usize, horizon: usize, mut transition: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Next,
    {
        if n_actions == 0 {
            return Err(config_err!("mdp needs at least one action"));
        }
        let n_states = zones.len();
        let dangerous: Vec<u32> = (0..n_states)
            .filter(|&s| zones[s] == Zone::Dangerous)
            .map(|s| s as u32)
            .collect();
        let mut row = vec![u32::MAX; n_states];
        for (r, &s) in dangerous.iter().enumerate() {
            row[s as usize] = r as u32;
        }
        let mut next = Vec::with_capacity(dangerous.len() * n_actions);
        for &s in &dangerous {
            for u in 0..n_actions {
                let n = match transition(s as usize, u) {
                    Next::State(j) if (j as usize) >= n_states => {
                        return Err(domain_err!("transition to state {} outside {} states", j, n_states))
                    }
                    Next::State(j) => match zones[j as usize] {
                        Zone::Collision => Next::Collision,
                        Zone::Safe => Next::Safe,
                        Zone::Dangerous => Next::State(j),
                    },
                    other => other,
                };
                next.push(n);
            }
        }
        Ok(TabularMdp {
            n_states,
            n_actions,
            horizon,
            zones,
            dangerous,
            row,
            next,
        })
    }

    pub fn dangerous(&self) -> &[u32] {
        &self.dangerous
    }

    pub fn is_dangerous(&self, s: usize) -> bool {
        self.row[s] != u32::MAX
    }

    /// Row of a dangerous state in dense per-dangerous-state tables.
    pub fn row_of(&self, s: usize) -> Option<usize> {
        let r = self.row[s];
        (r != u32::MAX).then_some(r as usize)
    }

    /// Successor by dangerous-state row.
    #[inline]
    pub fn step_row(&self, r: usize, u: usize) -> Next {
        self.next[r * self.n_actions + u]
    }

    /// Successor of a dangerous state; non-dangerous states are absorbing
    /// and report their own zone.
    pub fn step(&self, s: usize, u: usize) -> Next {
        match self.row_of(s) {
            Some(r) => self.next[r * self.n_actions + u],
            None => match self.zones[s] {
                Zone::Collision => Next::Collision,
                _ => Next::Safe,
            },
        }
    }

    pub fn zone_string(&self) -> alloc::string::String {
        self.zones.iter().map(|z| z.code()).collect()
    }

    /// Dangerous states ordered so that every successor precedes its
    /// predecessors.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; self.dangerous.len()];
        let mut order = Vec::with_capacity(self.dangerous.len());
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for root in 0..self.dangerous.len() {
            if mark[root] != 0 {
                continue;
            }
            mark[root] = 1;
            stack.push((root, 0));
            while let Some(&mut (r, ref mut u)) = stack.last_mut() {
                if *u == self.n_actions {
                    mark[r] = 2;
                    order.push(self.dangerous[r] as usize);
                    stack.pop();
                    continue;
                }
                let nx = self.next[r * self.n_actions + *u];
                *u += 1;
                if let Next::State(j) = nx {
                    let rj = self.row[j as usize] as usize;
                    match mark[rj] {
                        0 => {
                            mark[rj] = 1;
                            stack.push((rj, 0));
                        }
                        1 => return Err(Error::CyclicStateGraph(j as usize)),
                        _ => {}
                    }
                }
            }
        }
        Ok(order)
    }

    /// Longest number of epochs any action sequence can spend before
    /// reaching a terminal, for an acyclic graph.
    pub fn depth(&self) -> Result<usize> {
        let order = self.topological_order()?;
        let mut d = vec![0usize; self.dangerous.len()];
        let mut max = 0;
        for s in order {
            let r = self.row[s] as usize;
            let mut best = 0;
            for u in 0..self.n_actions {
                let k = match self.next[r * self.n_actions + u] {
                    Next::State(j) => d[self.row[j as usize] as usize],
                    _ => 0,
                };
                best = best.max(k);
            }
            d[r] = best + 1;
            max = max.max(d[r]);
        }
        Ok(max)
    }
}

/// Maps a continuous car-following state onto the grid. Ranges beyond the
/// grid are safe; range rates are clamped into the grid.
pub fn discretize(states: &ScenarioSpace, s: &FollowState, d_acci: f64) -> Next {
    let rdim = &states.dims[1];
    if s.range > rdim.upper {
        return Next::Safe;
    }
    if s.range <= d_acci {
        return Next::Collision;
    }
    let iv = states.dims[0].nearest(s.v_lead);
    let ir = rdim.nearest(s.range);
    let irr = states.dims[2].nearest(s.range_rate);
    Next::State(states.encode(&[iv, ir, irr]).expect("indices in range") as u32)
}

pub struct CarFollowingMdp {
    pub states: ScenarioSpace,
    pub actions: ScenarioSpace,
    pub tab: TabularMdp,
}

impl CarFollowingMdp {
    pub fn state_point(&self, s: usize) -> FollowState {
        let p = self.states.point(s).expect("state in range");
        FollowState {
            v_lead: p[0],
            range: p[1],
            range_rate: p[2],
        }
    }

    pub fn action_value(&self, u: usize) -> f64 {
        self.actions.dims[0].value(u)
    }
}

/// Zone of every state: collision for `R <= d_acci`; safe when the
/// worst-case rollout (lead braking at the lowest action every epoch,
/// re-discretized each epoch) never collides; dangerous otherwise.
pub fn classify_zones(states: &ScenarioSpace, actions: &ScenarioSpace, follower: &Follower, cf: &CarFollowingParams) -> Vec<Zone> {
    let d_acci = follower.limits().d_acci;
    let u_worst = actions.dims[0].value(0);
    let n = states.total_count();
    // 0 unknown, 1 in progress, 2 crashes, 3 never crashes
    let mut verdict = vec![0u8; n];
    let mut zones = vec![Zone::Safe; n];
    let mut path = Vec::new();
    for s0 in 0..n {
        let p = states.point(s0).expect("state in range");
        if p[1] <= d_acci {
            zones[s0] = Zone::Collision;
            verdict[s0] = 2;
        }
    }
    for s0 in 0..n {
        if verdict[s0] != 0 {
            continue;
        }
        path.clear();
        let mut cur = s0;
        let outcome = loop {
            match verdict[cur] {
                2 => break 2u8,
                3 => break 3,
                1 => break 3, // revisits a state without crashing
                _ => {}
            }
            verdict[cur] = 1;
            path.push(cur);
            let p = states.point(cur).expect("state in range");
            let fs = FollowState {
                v_lead: p[0],
                range: p[1],
                range_rate: p[2],
            };
            match advance_epoch(fs, u_worst, follower, cf) {
                EpochOutcome::Collision => break 2,
                EpochOutcome::Continue(ns) => match discretize(states, &ns, d_acci) {
                    Next::Collision => break 2,
                    Next::Safe => break 3,
                    Next::State(j) => cur = j as usize,
                },
            }
        };
        for &s in &path {
            verdict[s] = outcome;
        }
    }
    for s in 0..n {
        if zones[s] != Zone::Collision && verdict[s] == 2 {
            zones[s] = Zone::Dangerous;
        }
    }
    zones
}

/// The car-following MDP under a given surrogate follower.
pub fn build_car_following(cf: &CarFollowingParams, follower: &Follower) -> Result<CarFollowingMdp> {
    let states = crate::config::state_space(cf)?;
    let actions = crate::config::action_space(cf)?;
    let zones = classify_zones(&states, &actions, follower, cf);
    let d_acci = follower.limits().d_acci;
    let na = actions.total_count();
    let tab = TabularMdp::new(zones, na, cf.horizon, |s, u| {
        let p = states.point(s).expect("state in range");
        let fs = FollowState {
            v_lead: p[0],
            range: p[1],
            range_rate: p[2],
        };
        match advance_epoch(fs, actions.dims[0].value(u), follower, cf) {
            EpochOutcome::Collision => Next::Collision,
            EpochOutcome::Continue(ns) => discretize(&states, &ns, d_acci),
        }
    })?;
    Ok(CarFollowingMdp { states, actions, tab })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CaseConfig, CaseId, SubjectId};

    #[test]
    fn topological_order_and_cycles() {
        let zones = vec![Zone::Dangerous, Zone::Dangerous, Zone::Safe];
        let m = TabularMdp::new(zones.clone(), 2, 3, |s, u| match (s, u) {
            (0, 0) => Next::State(1),
            (0, 1) => Next::State(2),
            (1, 0) => Next::Collision,
            _ => Next::Safe,
        })
        .unwrap();
        assert_eq!(m.topological_order().unwrap(), vec![1, 0]);
        assert_eq!(m.depth().unwrap(), 2);
        assert_eq!(m.step(0, 1), Next::Safe);
        let cyc = TabularMdp::new(zones, 1, 3, |s, _| Next::State(1 - s as u32)).unwrap();
        assert!(matches!(cyc.topological_order(), Err(Error::CyclicStateGraph(_))));
    }

    #[test]
    fn car_following_zone_examples() {
        let cfg = CaseConfig::new(CaseId::CarFollowing);
        let cf = &cfg.car_following;
        let f = Follower::for_subject(SubjectId::Surrogate, &cfg);
        let states = crate::config::state_space(cf).unwrap();
        let actions = crate::config::action_space(cf).unwrap();
        let zones = classify_zones(&states, &actions, &f, cf);
        let idx = |v: f64, r: f64, rr: f64| states.locate(&[v, r, rr]).unwrap();
        assert_eq!(zones[idx(30.0, 1.0, 0.0)], Zone::Collision);
        assert_eq!(zones[idx(20.0, 115.0, 8.0)], Zone::Safe);
        assert_eq!(zones[idx(25.0, 5.0, -10.0)], Zone::Dangerous);
        assert_eq!(discretize(&states, &FollowState { v_lead: 30.0, range: 0.5, range_rate: 0.0 }, 1.0), Next::Collision);
    }
}
