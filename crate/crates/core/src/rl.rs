//! Q-values of the car-following library: `Q(s, u)` is the probability,
//! under naturalistic behaviour, of taking `u` in `s` and then reaching the
//! collision zone. It satisfies
//!
//! `Q(s, u) = P(u|s) * sum_u' Q(s', u')`, with `sum_u' Q = 1` at a
//! collision successor and `0` at a safe one.
//!
//! [`td_train`] reaches the fixed point by temporal-difference updates along
//! sampled episodes; [`backward_induction_q`] computes it directly over a
//! topological order and serves as the oracle.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Error, Result};
use crate::exposure::{stable_sum, MdpExposure};
use crate::mdp::{Next, TabularMdp, Zone};
use crate::sampler::Cdf;

/// Q-values of the dangerous states; every other state reads as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    /// Dangerous states, increasing.
    pub states: Vec<u32>,
    /// `[row][action]`, rows aligned with `states`.
    pub q: Vec<f64>,
    pub alpha_lr: f64,
    pub delta0: f64,
    /// TD updates performed (0 for the backward-induction table).
    pub updates: u64,
    /// Largest |delta| of the final sweep.
    pub final_max_delta: f64,
}

impl QTable {
    fn zeros(mdp: &TabularMdp) -> Self {
        QTable {
            n_states: mdp.n_states,
            n_actions: mdp.n_actions,
            states: mdp.dangerous().to_vec(),
            q: vec![0.0; mdp.dangerous().len() * mdp.n_actions],
            alpha_lr: 0.0,
            delta0: 0.0,
            updates: 0,
            final_max_delta: 0.0,
        }
    }

    pub fn row_of(&self, s: usize) -> Option<usize> {
        self.states.binary_search(&(s as u32)).ok()
    }

    pub fn row(&self, s: usize) -> Option<&[f64]> {
        let na = self.n_actions;
        self.row_of(s).map(|r| &self.q[r * na..(r + 1) * na])
    }

    pub fn get(&self, s: usize, u: usize) -> f64 {
        self.row(s).map_or(0.0, |r| r[u])
    }

    /// `P(S|s) = sum_u Q(s, u)`.
    pub fn state_sum(&self, s: usize) -> f64 {
        self.row(s).map_or(0.0, row_sum)
    }

    /// Largest absolute difference to another table over all pairs.
    pub fn max_abs_diff(&self, other: &QTable) -> f64 {
        let mut m = 0.0f64;
        for s in 0..self.n_states.max(other.n_states) {
            for u in 0..self.n_actions {
                m = m.max(libm::fabs(self.get(s, u) - other.get(s, u)));
            }
        }
        m
    }
}

fn row_sum(row: &[f64]) -> f64 {
    row.iter().sum()
}

/// Backup target of `(s, u)` given the current table.
#[inline]
fn target(mdp: &TabularMdp, q: &[f64], r: usize, u: usize, p_u: f64) -> f64 {
    let na = mdp.n_actions;
    match mdp.step_row(r, u) {
        Next::Collision => p_u,
        Next::Safe => 0.0,
        Next::State(j) => {
            let rj = mdp.row_of(j as usize).expect("dangerous successor");
            p_u * row_sum(&q[rj * na..(rj + 1) * na])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdParams {
    pub alpha_lr: f64,
    pub delta0: f64,
    pub max_updates: u64,
    /// Longest episode in epochs.
    pub horizon: usize,
    pub seed: u64,
}

/// Temporal-difference training from `Q = 0`.
///
/// Each sweep starts one episode at every dangerous `(s, u)` pair, in
/// shuffled order; episodes continue with uniformly drawn actions until a
/// terminal or the horizon. Every step applies
/// `Q(s,u) += alpha (P(u|s) sum_u' Q(s',u') - Q(s,u))`. Training stops after
/// the first sweep whose largest |delta| is below `delta0`; that sweep has
/// touched every pair, so it doubles as a full residual check.
pub fn td_train(mdp: &TabularMdp, exposure: &MdpExposure, p: &TdParams) -> Result<QTable> {
    let na = mdp.n_actions;
    let dangerous = mdp.dangerous();
    let nd = dangerous.len();
    let mut table = QTable::zeros(mdp);
    table.alpha_lr = p.alpha_lr;
    table.delta0 = p.delta0;
    if nd == 0 {
        return Ok(table);
    }
    let probs: Vec<f64> = dangerous
        .iter()
        .flat_map(|&s| exposure.action_row(s as usize).iter().copied())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut pairs: Vec<u32> = (0..(nd * na) as u32).collect();
    let q = &mut table.q;
    let mut updates = 0u64;
    loop {
        // Fisher-Yates
        for i in (1..pairs.len()).rev() {
            let j = rng.random_range(0..=i);
            pairs.swap(i, j);
        }
        let mut max_delta = 0.0f64;
        for &pair in &pairs {
            let (mut r, mut u) = (pair as usize / na, pair as usize % na);
            let mut steps = 0;
            loop {
                let t = target(mdp, q, r, u, probs[r * na + u]);
                let delta = t - q[r * na + u];
                q[r * na + u] += p.alpha_lr * delta;
                updates += 1;
                max_delta = max_delta.max(libm::fabs(delta));
                steps += 1;
                match mdp.step_row(r, u) {
                    Next::State(j) if steps < p.horizon => {
                        r = mdp.row_of(j as usize).expect("dangerous successor");
                        u = rng.random_range(0..na);
                    }
                    _ => break,
                }
            }
        }
        if max_delta < p.delta0 {
            table.updates = updates;
            table.final_max_delta = max_delta;
            return Ok(table);
        }
        if updates >= p.max_updates {
            return Err(Error::NotConverged {
                updates,
                max_delta,
            });
        }
    }
}

/// Exact fixed point by one pass over a topological order of the dangerous
/// states. Fails on a cyclic dangerous graph.
pub fn backward_induction_q(mdp: &TabularMdp, exposure: &MdpExposure) -> Result<QTable> {
    let order = mdp.topological_order()?;
    let na = mdp.n_actions;
    let mut table = QTable::zeros(mdp);
    for s in order {
        let r = mdp.row_of(s).expect("dangerous state");
        for u in 0..na {
            let t = target(mdp, &table.q, r, u, exposure.action_prob(s, u));
            table.q[r * na + u] = t;
        }
    }
    Ok(table)
}

/// `Z = sum_s P(s) sum_u Q(s, u)` over dangerous roots.
pub fn root_normalizer(q: &QTable, exposure: &MdpExposure) -> f64 {
    stable_sum(q.states.iter().map(|&s| exposure.state_prob(s as usize) * q.state_sum(s as usize)))
}

/// Criticality of a root-to-terminal branch `(s1, u1, ..., uk)`.
///
/// The product of Q-values along the branch telescopes to
/// `P(u1|s1) ... P(uk|sk) * sum_u Q(s2,u) ... sum_u Q(sk,u)`, so the
/// per-branch constant
/// `C(x) = P_S P(s1) / (Z * prod_{k>=2} sum_u Q(s_k, u))`
/// turns it into `P(S|x) P(x)` scaled by the single constant `P_S / Z`.
/// Branches ending in the safe zone, or still dangerous after the last
/// action, have zero criticality.
pub fn branch_criticality(
    q: &QTable,
    mdp: &TabularMdp,
    exposure: &MdpExposure,
    root: usize,
    actions: &[usize],
    p_s: f64,
    z: f64,
) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::ZeroPosterior("root normalizer is zero".into()));
    }
    if !mdp.is_dangerous(root) || actions.is_empty() {
        return Ok(0.0);
    }
    let mut s = root;
    let mut prod = 1.0;
    let mut denom = 1.0;
    for (k, &u) in actions.iter().enumerate() {
        prod *= q.get(s, u);
        match mdp.step(s, u) {
            Next::Collision => {
                if k + 1 != actions.len() {
                    return Err(domain_err!("branch continues past the collision zone"));
                }
                if prod == 0.0 {
                    return Ok(0.0);
                }
                return Ok(p_s * exposure.state_prob(root) * prod / (z * denom));
            }
            Next::Safe => return Ok(0.0),
            Next::State(j) => {
                s = j as usize;
                denom *= q.state_sum(s);
            }
        }
    }
    Ok(0.0)
}

/// `P(s1 | S)` over all states, proportional to `P(S|s1) P(s1)`.
pub fn posterior_initial(q: &QTable, exposure: &MdpExposure) -> Result<Vec<f64>> {
    let mut w = vec![0.0; q.n_states];
    for &s in &q.states {
        let s = s as usize;
        w[s] = q.state_sum(s) * exposure.state_prob(s);
    }
    let total = stable_sum(w.iter().copied());
    if !(total > 0.0) {
        return Err(Error::ZeroPosterior("no dangerous state can reach a collision".into()));
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// `P(u | s, S) = Q(s, u) / sum_u' Q(s, u')`.
pub fn posterior_action(q: &QTable, s: usize) -> Result<Vec<f64>> {
    let row = q
        .row(s)
        .ok_or_else(|| Error::ZeroPosterior(alloc::format!("state {} is not dangerous", s)))?;
    let total = row_sum(row);
    if !(total > 0.0) {
        return Err(Error::ZeroPosterior(alloc::format!("state {} has zero Q mass", s)));
    }
    Ok(row.iter().map(|&x| x / total).collect())
}

/// Plain Monte Carlo estimate of `P(S)`: roots from `P(s)`, actions from
/// `P(u|s)`, run through the tabular transitions.
pub fn estimate_p_s(mdp: &TabularMdp, exposure: &MdpExposure, episodes: u64, seed: u64) -> f64 {
    let roots = Cdf::new(exposure.state_masses());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..episodes {
        let mut s = roots.sample(&mut rng);
        let crashed = match mdp.zones[s] {
            Zone::Collision => true,
            Zone::Safe => false,
            Zone::Dangerous => {
                let mut out = false;
                for _ in 0..mdp.horizon {
                    let u = Cdf::sample_slice(exposure.action_row(s), &mut rng);
                    match mdp.step(s, u) {
                        Next::Collision => {
                            out = true;
                            break;
                        }
                        Next::Safe => break,
                        Next::State(j) => s = j as usize,
                    }
                }
                out
            }
        };
        if crashed {
            hits += 1;
        }
    }
    hits as f64 / episodes.max(1) as f64
}
