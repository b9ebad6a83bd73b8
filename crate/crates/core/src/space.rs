//! Discretized hyper-rectangular scenario spaces.
//!
//! A space is an ordered list of dimensions. Every dimension is a uniform grid
//! of `step`-spaced values between `lower` and `upper`; a dimension may be
//! open at its lower end, in which case `lower` itself is not a grid value
//! (the range `(0, 90]` with step 2 holds 2, 4, ..., 90).
//!
//! Cells are encoded row-major over the dimension order, last dimension
//! fastest. Physical values are mapped to cells by nearest-grid-value
//! rounding.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, domain_err, Result};

/// Row-major index of a grid cell.
pub type CellIndex = usize;

const COUNT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dim {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
    pub unit: String,
    /// `lower` is excluded from the grid.
    #[serde(default)]
    pub open_lower: bool,
}

impl Dim {
    pub fn closed(name: &str, lower: f64, upper: f64, step: f64, unit: &str) -> Result<Self> {
        Self::new(name, lower, upper, step, unit, false)
    }

    pub fn half_open(name: &str, lower: f64, upper: f64, step: f64, unit: &str) -> Result<Self> {
        Self::new(name, lower, upper, step, unit, true)
    }

    fn new(name: &str, lower: f64, upper: f64, step: f64, unit: &str, open_lower: bool) -> Result<Self> {
        let dim = Dim {
            name: name.to_string(),
            lower,
            upper,
            step,
            unit: unit.to_string(),
            open_lower,
        };
        dim.validate()?;
        Ok(dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(config_err!("dimension {}: step must be > 0", self.name));
        }
        if !(self.upper > self.lower) || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(config_err!(
                "dimension {}: upper ({}) must exceed lower ({})",
                self.name,
                self.upper,
                self.lower
            ));
        }
        if self.count() == 0 {
            return Err(config_err!("dimension {} has no grid values", self.name));
        }
        Ok(())
    }

    /// Number of grid values along this dimension.
    pub fn count(&self) -> usize {
        let intervals = libm::floor((self.upper - self.lower) / self.step + COUNT_EPS) as usize;
        if self.open_lower {
            intervals
        } else {
            intervals + 1
        }
    }

    fn offset(&self) -> f64 {
        if self.open_lower {
            self.lower + self.step
        } else {
            self.lower
        }
    }

    pub fn value(&self, i: usize) -> f64 {
        self.offset() + i as f64 * self.step
    }

    /// Whether `x` lies inside the dimension's physical range.
    pub fn admits(&self, x: f64) -> bool {
        let above = if self.open_lower {
            x > self.lower
        } else {
            x >= self.lower - COUNT_EPS * self.step
        };
        above && x <= self.upper + COUNT_EPS * self.step
    }

    /// Nearest grid value index, `None` outside the physical range.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !self.admits(x) {
            return None;
        }
        Some(self.nearest(x))
    }

    /// Nearest grid value index with the coordinate clamped into range.
    pub fn nearest(&self, x: f64) -> usize {
        let r = libm::round((x - self.offset()) / self.step);
        if r <= 0.0 {
            0
        } else {
            (r as usize).min(self.count() - 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpace {
    pub dims: Vec<Dim>,
    /// Pre-determined environment parameters, held fixed for a campaign.
    #[serde(default)]
    pub fixed_params: BTreeMap<String, f64>,
}

impl ScenarioSpace {
    pub fn new(dims: Vec<Dim>) -> Result<Self> {
        if dims.is_empty() {
            return Err(config_err!("scenario space needs at least one dimension"));
        }
        for d in &dims {
            d.validate()?;
        }
        Ok(ScenarioSpace {
            dims,
            fixed_params: BTreeMap::new(),
        })
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.fixed_params.insert(name.to_string(), value);
        self
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.dims.iter().map(Dim::count).collect()
    }

    pub fn total_count(&self) -> usize {
        self.dims.iter().map(Dim::count).product()
    }

    pub fn encode(&self, idx: &[usize]) -> Result<CellIndex> {
        if idx.len() != self.ndim() {
            return Err(domain_err!("expected {} indices, got {}", self.ndim(), idx.len()));
        }
        let mut cell = 0usize;
        for (d, &i) in self.dims.iter().zip(idx) {
            let n = d.count();
            if i >= n {
                return Err(domain_err!("index {} out of range for {} ({} cells)", i, d.name, n));
            }
            cell = cell * n + i;
        }
        Ok(cell)
    }

    pub fn decode_into(&self, cell: CellIndex, out: &mut [usize]) {
        let mut rem = cell;
        for (slot, d) in out.iter_mut().zip(&self.dims).rev() {
            let n = d.count();
            *slot = rem % n;
            rem /= n;
        }
    }

    pub fn decode(&self, cell: CellIndex) -> Result<Vec<usize>> {
        self.check(cell)?;
        let mut out = alloc::vec![0; self.ndim()];
        self.decode_into(cell, &mut out);
        Ok(out)
    }

    pub fn check(&self, cell: CellIndex) -> Result<()> {
        let n = self.total_count();
        if cell >= n {
            return Err(domain_err!("cell {} outside space of {} cells", cell, n));
        }
        Ok(())
    }

    /// Physical coordinates of a cell.
    pub fn point(&self, cell: CellIndex) -> Result<Vec<f64>> {
        let idx = self.decode(cell)?;
        Ok(idx.iter().zip(&self.dims).map(|(&i, d)| d.value(i)).collect())
    }

    /// Cell containing a physical point, `None` when any coordinate is out of range.
    pub fn locate(&self, x: &[f64]) -> Option<CellIndex> {
        if x.len() != self.ndim() {
            return None;
        }
        let mut cell = 0usize;
        for (d, &xi) in self.dims.iter().zip(x) {
            cell = cell * d.count() + d.locate(xi)?;
        }
        Some(cell)
    }

    /// All cells differing by at most one step in every dimension (Moore
    /// neighborhood), excluding the cell itself, in increasing index order.
    pub fn neighbors(&self, cell: CellIndex) -> Vec<CellIndex> {
        let nd = self.ndim();
        let counts = self.counts();
        let mut base = alloc::vec![0usize; nd];
        self.decode_into(cell, &mut base);
        let mut out = Vec::with_capacity(3usize.pow(nd as u32) - 1);
        let mut offs = alloc::vec![-1i64; nd];
        loop {
            if offs.iter().any(|&o| o != 0) {
                let mut c = 0usize;
                let mut ok = true;
                for k in 0..nd {
                    let j = base[k] as i64 + offs[k];
                    if j < 0 || j >= counts[k] as i64 {
                        ok = false;
                        break;
                    }
                    c = c * counts[k] + j as usize;
                }
                if ok {
                    out.push(c);
                }
            }
            // odometer over {-1, 0, 1}^nd, last dimension fastest
            let mut k = nd;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                if offs[k] < 1 {
                    offs[k] += 1;
                    break;
                }
                offs[k] = -1;
            }
        }
    }
}
