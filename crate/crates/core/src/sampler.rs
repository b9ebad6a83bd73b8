//! ε-greedy importance samplers over a library.
//!
//! Grid form: a library cell `x` is drawn with mass `(1 - ε) V(x) / W`, any
//! other cell with `ε / (N - N_lib)`. Tree form: the root is drawn from the
//! posterior `P(s1 | S)` mixed with a uniform draw over all states, and each
//! action from `P(u | s, S)` mixed with a uniform draw over actions. The
//! likelihood ratio `P(x) / P̄(x)` of a draw is returned with it.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::CarFollowingParams;
use crate::error::{config_err, Error, Result};
use crate::exposure::{GridExposure, MdpExposure};
use crate::library::GridLibrary;
use crate::mdp::{discretize, Next, TabularMdp, Zone};
use crate::rl::{posterior_initial, QTable};
use crate::space::{CellIndex, ScenarioSpace};
use crate::vehicle::{FollowState, Follower, FollowingSim};

/// Cumulative table for inverse-transform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    cum: Vec<f64>,
}

impl Cdf {
    /// Nonnegative weights, not necessarily normalized.
    pub fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cum = weights
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect();
        Cdf { cum }
    }

    pub fn total(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    /// Index `i` with probability `w_i / total`; zero-weight indices are
    /// never returned.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let x = rng.random::<f64>() * self.total();
        let i = self.cum.partition_point(|&c| c <= x);
        i.min(self.cum.len() - 1)
    }

    /// One-shot linear-scan draw from a short weight slice.
    pub fn sample_slice<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
        let total: f64 = weights.iter().sum();
        let mut x = rng.random::<f64>() * total;
        let mut last = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                if x < w {
                    return i;
                }
                x -= w;
                last = i;
            }
        }
        last
    }
}

/// One sampled scenario with its likelihood ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleDraw {
    pub scenario: u64,
    pub ratio: f64,
    /// Drawn by the exploration branch.
    pub explored: bool,
}

#[derive(Debug, Clone)]
pub struct GridSampler<'a> {
    lib: &'a GridLibrary,
    exposure: &'a GridExposure,
    epsilon: f64,
    lib_cdf: Cdf,
    n_cells: usize,
    off_mass: f64,
    lib_scale: f64,
}

impl<'a> GridSampler<'a> {
    pub fn new(lib: &'a GridLibrary, exposure: &'a GridExposure, epsilon: f64) -> Result<Self> {
        if lib.is_empty() || !(lib.w > 0.0) {
            return Err(Error::EmptyLibrary);
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(config_err!("epsilon must lie in (0, 1), got {}", epsilon));
        }
        let n_cells = lib.space.total_count();
        let n_off = n_cells - lib.len();
        // a library covering the whole space has nowhere to explore
        let (lib_scale, off_mass) = if n_off == 0 {
            (1.0 / lib.w, 0.0)
        } else {
            ((1.0 - epsilon) / lib.w, epsilon / n_off as f64)
        };
        let weights: Vec<f64> = lib.entries.iter().map(|e| e.v).collect();
        Ok(GridSampler {
            lib,
            exposure,
            epsilon,
            lib_cdf: Cdf::new(&weights),
            n_cells,
            off_mass,
            lib_scale,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Sampling mass P̄(x).
    pub fn mass(&self, cell: CellIndex) -> f64 {
        match self.lib.v(cell) {
            Some(v) => self.lib_scale * v,
            None => self.off_mass,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SampleDraw {
        let explore = self.off_mass > 0.0 && rng.random::<f64>() < self.epsilon;
        let cell = if explore {
            // k-th cell not in the (sorted) library
            let mut cell = rng.random_range(0..self.n_cells - self.lib.len());
            for e in &self.lib.entries {
                if e.cell <= cell {
                    cell += 1;
                } else {
                    break;
                }
            }
            cell
        } else {
            self.lib.entries[self.lib_cdf.sample(rng)].cell
        };
        let p = self.exposure.prob(cell).unwrap_or(0.0);
        SampleDraw {
            scenario: cell as u64,
            ratio: p / self.mass(cell),
            explored: explore,
        }
    }
}

/// Sampling policy over car-following branches.
#[derive(Debug, Clone)]
pub struct TreeSampler<'a> {
    q: &'a QTable,
    exposure: &'a MdpExposure,
    epsilon: f64,
    root_mass: Vec<f64>,
    root_cdf: Cdf,
}

impl<'a> TreeSampler<'a> {
    pub fn new(q: &'a QTable, exposure: &'a MdpExposure, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(config_err!("epsilon must lie in (0, 1), got {}", epsilon));
        }
        let post = posterior_initial(q, exposure).map_err(|_| Error::EmptyLibrary)?;
        let uniform = epsilon / post.len() as f64;
        let root_mass: Vec<f64> = post.iter().map(|&p| (1.0 - epsilon) * p + uniform).collect();
        let root_cdf = Cdf::new(&root_mass);
        Ok(TreeSampler {
            q,
            exposure,
            epsilon,
            root_mass,
            root_cdf,
        })
    }

    /// P̄(s1).
    pub fn root_prob(&self, s: usize) -> f64 {
        self.root_mass[s]
    }

    pub fn root_masses(&self) -> &[f64] {
        &self.root_mass
    }

    /// P̄(u | s): the ε-mixed action posterior where Q has mass, uniform
    /// elsewhere.
    pub fn action_prob(&self, s: usize, u: usize) -> f64 {
        let na = self.q.n_actions;
        match self.q.row(s) {
            Some(row) => {
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    (1.0 - self.epsilon) * row[u] / total + self.epsilon / na as f64
                } else {
                    1.0 / na as f64
                }
            }
            None => 1.0 / na as f64,
        }
    }

    pub fn sample_root<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, f64) {
        let s = self.root_cdf.sample(rng);
        (s, self.exposure.state_prob(s) / self.root_prob(s))
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> (usize, f64) {
        let na = self.q.n_actions;
        let u = match self.q.row(s) {
            Some(row) if row.iter().sum::<f64>() > 0.0 => {
                if rng.random::<f64>() < self.epsilon {
                    rng.random_range(0..na)
                } else {
                    Cdf::sample_slice(row, rng)
                }
            }
            _ => rng.random_range(0..na),
        };
        (u, self.exposure.action_prob(s, u) / self.action_prob(s, u))
    }

    /// Samples a branch through tabular transitions, accumulating the
    /// product-form likelihood ratio.
    pub fn sample_tabular_branch<R: Rng + ?Sized>(&self, mdp: &TabularMdp, rng: &mut R) -> TreeEpisode {
        let (root, mut ratio) = self.sample_root(rng);
        let mut actions = Vec::new();
        let mut accident = mdp.zones[root] == Zone::Collision;
        let mut s = root;
        if mdp.zones[root] == Zone::Dangerous {
            for _ in 0..mdp.horizon {
                let (u, r) = self.sample_action(s, rng);
                ratio *= r;
                actions.push(u);
                match mdp.step(s, u) {
                    Next::Collision => {
                        accident = true;
                        break;
                    }
                    Next::Safe => break,
                    Next::State(j) => s = j as usize,
                }
            }
        }
        TreeEpisode {
            root,
            actions,
            ratio,
            accident,
        }
    }
}

/// One car-following test.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEpisode {
    pub root: usize,
    pub actions: Vec<usize>,
    pub ratio: f64,
    pub accident: bool,
}

/// Where lead actions come from during a car-following test.
#[derive(Debug, Clone, Copy)]
pub enum TreePolicy<'a> {
    /// Naturalistic: roots from `P(s)`, actions from `P(u|s)`, ratio 1.
    Naive { exposure: &'a MdpExposure, roots: &'a Cdf },
    Library(&'a TreeSampler<'a>),
}

/// The surrogate's partition of the state grid that bounds every test.
#[derive(Debug, Clone)]
pub struct TreeWorld<'a> {
    pub states: &'a ScenarioSpace,
    pub actions: &'a ScenarioSpace,
    pub zones: &'a [Zone],
    pub cf: &'a CarFollowingParams,
    pub d_acci: f64,
}

/// Runs the subject from a sampled root with lead actions drawn epoch by
/// epoch from the policy at the observed (re-discretized) state. The test
/// ends at an accident, at the horizon, or when the observed state enters
/// the surrogate's safe zone. A root in the collision zone counts as an
/// accident.
pub fn run_tree_episode<R: Rng + ?Sized>(
    policy: TreePolicy<'_>,
    world: &TreeWorld<'_>,
    subject: &Follower,
    rng: &mut R,
) -> TreeEpisode {
    let (root, mut ratio) = match policy {
        TreePolicy::Naive { roots, .. } => (roots.sample(rng), 1.0),
        TreePolicy::Library(t) => t.sample_root(rng),
    };
    let mut ep = TreeEpisode {
        root,
        actions: Vec::new(),
        ratio,
        accident: false,
    };
    match world.zones[root] {
        Zone::Collision => {
            ep.accident = true;
            return ep;
        }
        Zone::Safe => return ep,
        Zone::Dangerous => {}
    }
    let p = world.states.point(root).expect("root in range");
    let mut sim = FollowingSim::new(
        FollowState {
            v_lead: p[0],
            range: p[1],
            range_rate: p[2],
        },
        subject,
        world.cf,
    );
    for _ in 0..world.cf.horizon {
        let s = match discretize(world.states, &sim.state(), world.d_acci) {
            Next::Safe => break,
            Next::Collision => {
                ep.accident = true;
                break;
            }
            Next::State(j) => j as usize,
        };
        if world.zones[s] == Zone::Safe {
            break;
        }
        let (u, r) = match policy {
            TreePolicy::Naive { exposure, .. } => (Cdf::sample_slice(exposure.action_row(s), rng), 1.0),
            TreePolicy::Library(t) => t.sample_action(s, rng),
        };
        ratio *= r;
        ep.actions.push(u);
        if sim.epoch(world.actions.dims[0].value(u)) {
            ep.accident = true;
            break;
        }
    }
    ep.ratio = ratio;
    ep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CaseId;
    use crate::library::LibraryEntry;
    use crate::space::Dim;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> ScenarioSpace {
        ScenarioSpace::new(vec![Dim::closed("x", 0.0, (n - 1) as f64, 1.0, "").unwrap()]).unwrap()
    }

    #[test]
    fn worked_mass_example() {
        let lib = GridLibrary::new(
            CaseId::Cutin,
            line(10),
            0.0,
            vec![LibraryEntry { cell: 0, v: 0.3 }, LibraryEntry { cell: 1, v: 0.1 }],
        )
        .unwrap();
        let ex = GridExposure::uniform(line(10));
        let s = GridSampler::new(&lib, &ex, 0.05).unwrap();
        assert!((s.mass(0) - 0.7125).abs() < 1e-15);
        assert!((s.mass(1) - 0.2375).abs() < 1e-15);
        assert!((s.mass(5) - 0.00625).abs() < 1e-15);
        let total: f64 = (0..10).map(|c| s.mass(c)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_cell_ratio() {
        let lib = GridLibrary::new(CaseId::Cutin, line(2), 0.0, vec![LibraryEntry { cell: 0, v: 0.4 }]).unwrap();
        let ex = GridExposure::from_weights(line(2), vec![0.4, 0.6]).unwrap();
        let s = GridSampler::new(&lib, &ex, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let d = s.sample(&mut rng);
            let want = if d.scenario == 0 { 0.4 / 0.9 } else { 0.6 / 0.1 };
            assert!((d.ratio - want).abs() < 1e-12);
        }
    }

    #[test]
    fn exploration_skips_library_cells() {
        let lib = GridLibrary::new(
            CaseId::Cutin,
            line(6),
            0.0,
            vec![LibraryEntry { cell: 1, v: 1.0 }, LibraryEntry { cell: 2, v: 1.0 }],
        )
        .unwrap();
        let ex = GridExposure::uniform(line(6));
        let s = GridSampler::new(&lib, &ex, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let d = s.sample(&mut rng);
            if d.explored {
                assert!(![1, 2].contains(&d.scenario));
            }
        }
    }

    #[test]
    fn empty_library_is_rejected() {
        let lib = GridLibrary::new(CaseId::Cutin, line(3), 0.5, vec![LibraryEntry { cell: 0, v: 0.1 }]).unwrap();
        let ex = GridExposure::uniform(line(3));
        assert!(matches!(GridSampler::new(&lib, &ex, 0.1), Err(Error::EmptyLibrary)));
    }

    #[test]
    fn cdf_never_returns_zero_weight() {
        let c = Cdf::new(&[0.0, 1.0, 0.0, 2.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let i = c.sample(&mut rng);
            assert!(i == 1 || i == 3);
            let j = Cdf::sample_slice(&[0.0, 1.0, 0.0, 2.0, 0.0], &mut rng);
            assert!(j == 1 || j == 3);
        }
    }
}
