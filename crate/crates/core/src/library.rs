//! Critical-scenario libraries: a list of cells with criticality values
//! (grid form) or a converged Q-table over an MDP (tree form).

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::CaseId;
use crate::error::{domain_err, Error, Result};
use crate::exposure::stable_sum;
use crate::mdp::Zone;
use crate::rl::QTable;
use crate::space::{CellIndex, ScenarioSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub cell: CellIndex,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLibrary {
    pub case: CaseId,
    pub space: ScenarioSpace,
    pub gamma: f64,
    /// Sorted by cell.
    pub entries: Vec<LibraryEntry>,
    pub w: f64,
}

impl GridLibrary {
    /// Keeps the entries with `v > gamma` and computes `W = sum v`.
    pub fn new(case: CaseId, space: ScenarioSpace, gamma: f64, mut entries: Vec<LibraryEntry>) -> Result<Self> {
        let n = space.total_count();
        if entries.iter().any(|e| e.cell >= n) {
            return Err(domain_err!("library entry outside the space"));
        }
        entries.retain(|e| e.v > gamma);
        entries.sort_by_key(|e| e.cell);
        entries.dedup_by_key(|e| e.cell);
        let w = stable_sum(entries.iter().map(|e| e.v));
        Ok(GridLibrary {
            case,
            space,
            gamma,
            entries,
            w,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Criticality of a library member, `None` off the library.
    pub fn v(&self, cell: CellIndex) -> Option<f64> {
        self.entries
            .binary_search_by_key(&cell, |e| e.cell)
            .ok()
            .map(|i| self.entries[i].v)
    }

    pub fn coverage(&self) -> f64 {
        self.len() as f64 / self.space.total_count() as f64
    }

    pub fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        if self.entries.iter().any(|e| !(e.v > self.gamma)) {
            return Err(domain_err!("library holds an entry at or below gamma"));
        }
        let w = stable_sum(self.entries.iter().map(|e| e.v));
        if libm::fabs(w - self.w) > 1e-12 * w {
            return Err(domain_err!("stored W {} disagrees with the entries ({})", self.w, w));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeLibrary {
    pub case: CaseId,
    pub states: ScenarioSpace,
    pub actions: ScenarioSpace,
    pub q_table: QTable,
    /// One character per state: `c` collision, `d` dangerous, `s` safe.
    pub zones: String,
    pub horizon: usize,
    /// Monte Carlo estimate of P(S).
    pub p_s: f64,
}

impl TreeLibrary {
    pub fn zone_list(&self) -> Result<Vec<Zone>> {
        self.zones.chars().map(Zone::from_code).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Library {
    Grid(GridLibrary),
    Tree(TreeLibrary),
}

impl Library {
    pub fn case(&self) -> CaseId {
        match self {
            Library::Grid(g) => g.case,
            Library::Tree(t) => t.case,
        }
    }

    pub fn as_grid(&self) -> Result<&GridLibrary> {
        match self {
            Library::Grid(g) => Ok(g),
            Library::Tree(_) => Err(domain_err!("expected a grid library")),
        }
    }

    pub fn as_tree(&self) -> Result<&TreeLibrary> {
        match self {
            Library::Tree(t) => Ok(t),
            Library::Grid(_) => Err(domain_err!("expected a tree library")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Dim;
    use alloc::vec;

    #[test]
    fn w_is_sum_of_kept_values() {
        let s = ScenarioSpace::new(vec![Dim::closed("x", 0.0, 9.0, 1.0, "").unwrap()]).unwrap();
        let lib = GridLibrary::new(
            CaseId::Cutin,
            s,
            0.05,
            vec![
                LibraryEntry { cell: 3, v: 0.1 },
                LibraryEntry { cell: 1, v: 0.3 },
                LibraryEntry { cell: 5, v: 0.05 },
            ],
        )
        .unwrap();
        assert_eq!(lib.len(), 2);
        assert!((lib.w - 0.4).abs() < 1e-15);
        assert_eq!(lib.v(1), Some(0.3));
        assert_eq!(lib.v(5), None);
        lib.check().unwrap();
    }
}
