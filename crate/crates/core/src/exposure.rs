//! Exposure frequency models: P(x) over a grid, or P(s) and P(u|s) over an
//! MDP's states and actions.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Error, Result};
use crate::space::{CellIndex, ScenarioSpace};

const MASS_TOL: f64 = 1e-9;

/// Kahan-Neumaier compensated sum.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if libm::fabs(sum) >= libm::fabs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExposureModel {
    Grid(GridExposure),
    Mdp(MdpExposure),
}

impl ExposureModel {
    pub fn space(&self) -> &ScenarioSpace {
        match self {
            ExposureModel::Grid(g) => &g.space,
            ExposureModel::Mdp(m) => &m.states,
        }
    }

    pub fn as_grid(&self) -> Result<&GridExposure> {
        match self {
            ExposureModel::Grid(g) => Ok(g),
            ExposureModel::Mdp(_) => Err(domain_err!("expected a grid exposure model")),
        }
    }

    pub fn as_mdp(&self) -> Result<&MdpExposure> {
        match self {
            ExposureModel::Mdp(m) => Ok(m),
            ExposureModel::Grid(_) => Err(domain_err!("expected an mdp exposure model")),
        }
    }
}

/// Dense probability mass over every cell of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridExposure {
    pub space: ScenarioSpace,
    mass: Vec<f64>,
}

impl GridExposure {
    /// Normalizes nonnegative weights into a mass function.
    pub fn from_weights(space: ScenarioSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.total_count() {
            return Err(domain_err!(
                "{} weights for a space of {} cells",
                weights.len(),
                space.total_count()
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(domain_err!("exposure weights must be finite and nonnegative"));
        }
        let total = stable_sum(weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::EmptyInput("exposure weights sum to zero".into()));
        }
        let mass = weights.into_iter().map(|w| w / total).collect();
        Ok(GridExposure { space, mass })
    }

    pub fn uniform(space: ScenarioSpace) -> Self {
        let n = space.total_count();
        GridExposure {
            space,
            mass: alloc::vec![1.0 / n as f64; n],
        }
    }

    /// Stored mass of a cell; 0 where there is no support.
    pub fn prob(&self, cell: CellIndex) -> Result<f64> {
        self.mass
            .get(cell)
            .copied()
            .ok_or_else(|| domain_err!("cell {} outside space of {} cells", cell, self.mass.len()))
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        stable_sum(self.mass.iter().copied())
    }

    /// Cell of highest mass, lowest index on ties.
    pub fn mode(&self) -> CellIndex {
        let mut best = 0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > self.mass[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_normalized(&self) -> bool {
        libm::fabs(self.total() - 1.0) <= MASS_TOL && self.mass.iter().all(|&m| m >= 0.0)
    }
}

/// State mass P(s) and per-state action mass P(u|s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpExposure {
    pub states: ScenarioSpace,
    pub actions: ScenarioSpace,
    state_mass: Vec<f64>,
    /// Row-major `[state][action]`.
    action_mass: Vec<f64>,
}

impl MdpExposure {
    /// Builds from raw weights. Each action row is normalized on its own;
    /// rows with zero total fall back to uniform over actions.
    pub fn from_weights(
        states: ScenarioSpace,
        actions: ScenarioSpace,
        state_weights: Vec<f64>,
        action_weights: Vec<f64>,
    ) -> Result<Self> {
        let ns = states.total_count();
        let na = actions.total_count();
        if state_weights.len() != ns || action_weights.len() != ns * na {
            return Err(domain_err!("weight tables do not match the state/action grids"));
        }
        if state_weights
            .iter()
            .chain(&action_weights)
            .any(|&w| !(w >= 0.0) || !w.is_finite())
        {
            return Err(domain_err!("exposure weights must be finite and nonnegative"));
        }
        let total = stable_sum(state_weights.iter().copied());
        if !(total > 0.0) {
            return Err(Error::EmptyInput("state weights sum to zero".into()));
        }
        let state_mass = state_weights.into_iter().map(|w| w / total).collect();
        let mut action_mass = action_weights;
        for row in action_mass.chunks_mut(na) {
            let t = stable_sum(row.iter().copied());
            if t > 0.0 {
                row.iter_mut().for_each(|w| *w /= t);
            } else {
                row.iter_mut().for_each(|w| *w = 1.0 / na as f64);
            }
        }
        Ok(MdpExposure {
            states,
            actions,
            state_mass,
            action_mass,
        })
    }

    pub fn n_states(&self) -> usize {
        self.state_mass.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.total_count()
    }

    pub fn state_prob(&self, s: usize) -> f64 {
        self.state_mass[s]
    }

    pub fn action_prob(&self, s: usize, u: usize) -> f64 {
        self.action_mass[s * self.n_actions() + u]
    }

    pub fn action_row(&self, s: usize) -> &[f64] {
        let na = self.n_actions();
        &self.action_mass[s * na..(s + 1) * na]
    }

    pub fn state_masses(&self) -> &[f64] {
        &self.state_mass
    }

    pub fn is_normalized(&self) -> bool {
        let na = self.n_actions();
        libm::fabs(stable_sum(self.state_mass.iter().copied()) - 1.0) <= MASS_TOL
            && self.action_mass.chunks(na).enumerate().all(|(s, row)| {
                self.state_mass[s] == 0.0 || libm::fabs(stable_sum(row.iter().copied()) - 1.0) <= MASS_TOL
            })
    }
}

/// Lookup of P(x) for a grid model.
pub fn exposure_prob(model: &ExposureModel, cell: CellIndex) -> Result<f64> {
    match model {
        ExposureModel::Grid(g) => g.prob(cell),
        ExposureModel::Mdp(m) => {
            if cell < m.n_states() {
                Ok(m.state_prob(cell))
            } else {
                Err(domain_err!("state {} outside {} states", cell, m.n_states()))
            }
        }
    }
}
