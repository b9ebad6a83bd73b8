//! Two-phase critical-scenario search over a grid: multi-start greedy
//! descent on an auxiliary objective, then a flood fill that grows every
//! critical cell found into its connected critical region.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::library::LibraryEntry;
use crate::space::{CellIndex, ScenarioSpace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Auxiliary objective J(x), minimized.
    pub objective: f64,
    /// Criticality V(x).
    pub criticality: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    /// Cells with `V > gamma`, sorted by cell.
    pub entries: Vec<LibraryEntry>,
    /// Distinct cells evaluated.
    pub evaluated: usize,
    /// Local minima reached by the descents (with repetition).
    pub minima: Vec<CellIndex>,
}

struct Memo<F> {
    eval: F,
    seen: BTreeMap<CellIndex, Evaluation>,
}

impl<F: FnMut(CellIndex) -> Evaluation> Memo<F> {
    fn get(&mut self, c: CellIndex) -> Evaluation {
        if let Some(e) = self.seen.get(&c) {
            return *e;
        }
        let e = (self.eval)(c);
        self.seen.insert(c, e);
        e
    }
}

/// Greedy 1-step descent from `start`; moves to the best Moore neighbor
/// while it strictly improves J (ties to the lowest cell index).
fn descend<F: FnMut(CellIndex) -> Evaluation>(space: &ScenarioSpace, memo: &mut Memo<F>, start: CellIndex) -> CellIndex {
    let mut cur = start;
    let mut j = memo.get(cur).objective;
    loop {
        let mut best = None;
        for nb in space.neighbors(cur) {
            let e = memo.get(nb).objective;
            if e < j && best.map_or(true, |(_, bj)| e < bj) {
                best = Some((nb, e));
            }
        }
        match best {
            Some((nb, e)) => {
                cur = nb;
                j = e;
            }
            None => return cur,
        }
    }
}

/// Runs `starts` descents from uniformly drawn cells, then flood-fills from
/// every evaluated cell whose criticality exceeds `gamma`. Every returned
/// entry was evaluated directly, so there are no false members.
pub fn search_library<F>(space: &ScenarioSpace, eval: F, starts: usize, gamma: f64, seed: u64) -> SearchOutcome
where
    F: FnMut(CellIndex) -> Evaluation,
{
    let n = space.total_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut memo = Memo {
        eval,
        seen: BTreeMap::new(),
    };
    let mut minima = Vec::with_capacity(starts);
    for _ in 0..starts {
        let s = rng.random_range(0..n);
        minima.push(descend(space, &mut memo, s));
    }

    let mut members: BTreeMap<CellIndex, f64> = BTreeMap::new();
    let mut queue: VecDeque<CellIndex> = memo
        .seen
        .iter()
        .filter(|(_, e)| e.criticality > gamma)
        .map(|(&c, _)| c)
        .collect();
    for &c in &queue {
        members.insert(c, memo.seen[&c].criticality);
    }
    while let Some(c) = queue.pop_front() {
        for nb in space.neighbors(c) {
            if members.contains_key(&nb) {
                continue;
            }
            let e = memo.get(nb);
            if e.criticality > gamma {
                members.insert(nb, e.criticality);
                queue.push_back(nb);
            }
        }
    }
    SearchOutcome {
        entries: members.into_iter().map(|(cell, v)| LibraryEntry { cell, v }).collect(),
        evaluated: memo.seen.len(),
        minima,
    }
}

/// Every cell with `V > gamma`, by direct enumeration.
pub fn exhaustive_library<F>(space: &ScenarioSpace, mut criticality: F, gamma: f64) -> Vec<LibraryEntry>
where
    F: FnMut(CellIndex) -> f64,
{
    (0..space.total_count())
        .filter_map(|cell| {
            let v = criticality(cell);
            (v > gamma).then_some(LibraryEntry { cell, v })
        })
        .collect()
}
