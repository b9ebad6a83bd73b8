//! End-to-end pipelines of the three case studies: exposure from events,
//! library construction, and the library / naive / exhaustive evaluations.

use std::sync::OnceLock;

use anyhow::{anyhow, bail, Result};
use tslg_core::config::{build_space, pair_space, CaseConfig, CaseId, CommonSetMode, SubjectId};
use tslg_core::estimate::{EvaluationReport, StoppingRule};
use tslg_core::exposure::{GridExposure, MdpExposure};
use tslg_core::highway::{exit_attempt, feasible_zone};
use tslg_core::library::{GridLibrary, TreeLibrary};
use tslg_core::mdp::{build_car_following, CarFollowingMdp, Zone};
use tslg_core::ndd::{
    build_histogram, extract_common_set, mdp_exposure, most_frequent_common_set, normalization_factors, CommonSet,
    EventRecord,
};
use tslg_core::objective::{criticality, cutin_objective, gamma_threshold, highway_objective};
use tslg_core::rl::{estimate_p_s, td_train, QTable, TdParams};
use tslg_core::sampler::{run_tree_episode, Cdf, GridSampler, TreePolicy, TreeSampler, TreeWorld};
use tslg_core::search::{exhaustive_library, search_library, Evaluation};
use tslg_core::space::{CellIndex, ScenarioSpace};
use tslg_core::vehicle::{mnp_ettc, simulate_cutin, Follower};

use crate::campaign::{self, RunOptions};

fn core_err(e: tslg_core::Error) -> anyhow::Error {
    anyhow!(e)
}

/// A case whose scenarios are cells of a grid (cut-in, highway exit).
pub struct GridCase {
    pub cfg: CaseConfig,
    pub space: ScenarioSpace,
    pub exposure: GridExposure,
    pub omega: CommonSet,
    pub factors: Vec<f64>,
    /// Events that fell outside the histogram grid.
    pub rejected: usize,
    cav_outcome: Vec<OnceLock<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchStats {
    pub evaluated: usize,
    pub descents: usize,
}

impl GridCase {
    pub fn from_events(cfg: &CaseConfig, events: &[EventRecord]) -> Result<Self> {
        let space = build_space(cfg).map_err(core_err)?;
        let (exposure, rejected, mode, threshold) = match cfg.case {
            CaseId::Cutin => {
                let h = build_histogram(events, &space).map_err(core_err)?;
                (h.model, h.rejected, cfg.cutin.common_set, cfg.cutin.common_threshold)
            }
            CaseId::HighwayExit => {
                let (model, rejected) = highway_exposure(cfg, &space, events)?;
                (model, rejected, cfg.highway.common_set, cfg.highway.common_threshold)
            }
            CaseId::CarFollowing => bail!("car-following is a tree case"),
        };
        let omega = match mode {
            CommonSetMode::Threshold => extract_common_set(&exposure, threshold),
            CommonSetMode::MostFrequent => most_frequent_common_set(&exposure),
        }
        .map_err(core_err)?;
        let factors = normalization_factors(&space, &omega);
        let n = space.total_count();
        Ok(GridCase {
            cfg: cfg.clone(),
            space,
            exposure,
            omega,
            factors,
            rejected,
            cav_outcome: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn point(&self, cell: CellIndex) -> Vec<f64> {
        self.space.point(cell).expect("cell in range")
    }

    /// Accident (cut-in) or failed exit (highway) of a subject in a cell.
    pub fn event(&self, cell: CellIndex, subject: SubjectId) -> bool {
        let x = self.point(cell);
        match self.cfg.case {
            CaseId::Cutin => simulate_cutin(x[0], x[1], &Follower::for_subject(subject, &self.cfg), &self.cfg).accident,
            CaseId::HighwayExit => {
                let h = &self.cfg.highway;
                let planner = match subject {
                    SubjectId::Surrogate => &h.surrogate,
                    SubjectId::Cav => &h.cav,
                };
                !exit_attempt(&x, h, planner, &self.cfg.idm)
            }
            CaseId::CarFollowing => unreachable!("grid case"),
        }
    }

    /// Memoized CAV outcome; the subject is deterministic.
    pub fn cav_event(&self, cell: CellIndex) -> bool {
        *self.cav_outcome[cell].get_or_init(|| self.event(cell, SubjectId::Cav))
    }

    /// Auxiliary objective and criticality of a cell under the surrogate.
    pub fn sm_evaluation(&self, cell: CellIndex) -> Evaluation {
        let x = self.point(cell);
        let p = self.exposure.prob(cell).expect("cell in range");
        match self.cfg.case {
            CaseId::Cutin => {
                let c = &self.cfg.cutin;
                let t = simulate_cutin(x[0], x[1], &Follower::for_subject(SubjectId::Surrogate, &self.cfg), &self.cfg);
                Evaluation {
                    objective: cutin_objective(mnp_ettc(&t, c.u_i), &x, &self.omega, &self.factors, c.w),
                    criticality: criticality(t.accident, p),
                }
            }
            CaseId::HighwayExit => {
                let h = &self.cfg.highway;
                let area = feasible_zone(&x, h).area();
                Evaluation {
                    objective: highway_objective(area, h.u_s, &x, &self.omega, &self.factors, h.w),
                    criticality: criticality(!exit_attempt(&x, h, &h.surrogate, &self.cfg.idm), p),
                }
            }
            CaseId::CarFollowing => unreachable!("grid case"),
        }
    }

    pub fn gamma(&self) -> Result<f64> {
        let m = match self.cfg.case {
            CaseId::Cutin => self.cfg.cutin.exploration_m,
            _ => self.cfg.highway.exploration_m,
        };
        gamma_threshold(m, &self.space).map_err(core_err)
    }

    fn starts(&self) -> usize {
        match self.cfg.case {
            CaseId::Cutin => self.cfg.cutin.starts,
            _ => self.cfg.highway.starts,
        }
    }

    /// Multi-start descent plus flood fill.
    pub fn build_library(&self) -> Result<(GridLibrary, SearchStats)> {
        let gamma = self.gamma()?;
        let out = search_library(&self.space, |c| self.sm_evaluation(c), self.starts(), gamma, self.cfg.seed);
        let lib = GridLibrary::new(self.cfg.case, self.space.clone(), gamma, out.entries).map_err(core_err)?;
        Ok((
            lib,
            SearchStats {
                evaluated: out.evaluated,
                descents: out.minima.len(),
            },
        ))
    }

    fn check_cap(&self) -> Result<()> {
        let (cells, cap) = (self.space.total_count(), self.cfg.evaluation.exhaustive_cap);
        if cells > cap {
            return Err(core_err(tslg_core::Error::TooLarge { cells, cap }));
        }
        Ok(())
    }

    /// Every cell with `V > gamma`, by enumeration (subject to the cap).
    pub fn exhaustive_library(&self) -> Result<GridLibrary> {
        self.check_cap()?;
        let gamma = self.gamma()?;
        let entries = exhaustive_library(&self.space, |c| self.sm_evaluation(c).criticality, gamma);
        GridLibrary::new(self.cfg.case, self.space.clone(), gamma, entries).map_err(core_err)
    }

    /// `sum_x P(x) 1[event(x)]` for the CAV, by enumeration.
    pub fn exhaustive_truth(&self) -> Result<f64> {
        self.check_cap()?;
        Ok(tslg_core::exposure::stable_sum(
            (0..self.space.total_count())
                .filter(|&c| self.exposure.prob(c).unwrap() > 0.0 && self.cav_event(c))
                .map(|c| self.exposure.prob(c).unwrap()),
        ))
    }

    pub fn library_campaign(&self, lib: &GridLibrary, rule: StoppingRule, opts: &RunOptions) -> Result<EvaluationReport> {
        if lib.case != self.cfg.case || lib.space != self.space {
            bail!("library was built for a different case or grid");
        }
        let sampler = GridSampler::new(lib, &self.exposure, self.cfg.epsilon()).map_err(core_err)?;
        Ok(campaign::run(rule, self.cfg.evaluation.confidence, opts, |rng| {
            let d = sampler.sample(rng);
            (d.scenario, d.ratio, self.cav_event(d.scenario as usize))
        }))
    }

    pub fn naive_campaign(&self, rule: StoppingRule, opts: &RunOptions) -> EvaluationReport {
        let cdf = Cdf::new(self.exposure.masses());
        campaign::run(rule, self.cfg.evaluation.confidence, opts, |rng| {
            let c = cdf.sample(rng);
            (c as u64, 1.0, self.cav_event(c))
        })
    }
}

/// `P(x) = P(p1) P(v1, R = p1 - p2, v2)`: a uniform first position times the
/// car-following pair histogram, zero unless vehicle 1 leads.
fn highway_exposure(cfg: &CaseConfig, space: &ScenarioSpace, events: &[EventRecord]) -> Result<(GridExposure, usize)> {
    let pairs = pair_space(&cfg.highway).map_err(core_err)?;
    let h = build_histogram(events, &pairs).map_err(core_err)?;
    let n = space.total_count();
    let n_pos = space.dims[0].count() as f64;
    let mut w = vec![0.0; n];
    let mut idx = vec![0usize; 4];
    for (cell, wc) in w.iter_mut().enumerate() {
        space.decode_into(cell, &mut idx);
        let p1 = space.dims[0].value(idx[0]);
        let p2 = space.dims[2].value(idx[2]);
        if p2 >= p1 {
            continue;
        }
        let v1 = space.dims[1].value(idx[1]);
        let v2 = space.dims[3].value(idx[3]);
        if let Some(pc) = pairs.locate(&[v1, p1 - p2, v2]) {
            *wc = h.model.prob(pc).map_err(core_err)? / n_pos;
        }
    }
    Ok((GridExposure::from_weights(space.clone(), w).map_err(core_err)?, h.rejected))
}

/// The car-following case: a tabular MDP under the surrogate plus the
/// naturalistic state/action exposure.
pub struct TreeCase {
    pub cfg: CaseConfig,
    pub mdp: CarFollowingMdp,
    pub exposure: MdpExposure,
    pub rejected_states: usize,
    pub rejected_actions: usize,
}

impl TreeCase {
    pub fn from_events(cfg: &CaseConfig, events: &[EventRecord]) -> Result<Self> {
        if cfg.case != CaseId::CarFollowing {
            bail!("{} is a grid case", cfg.case);
        }
        let sm = Follower::for_subject(SubjectId::Surrogate, cfg);
        let mdp = build_car_following(&cfg.car_following, &sm).map_err(core_err)?;
        let h = mdp_exposure(events, &mdp.states, &mdp.actions).map_err(core_err)?;
        Ok(TreeCase {
            cfg: cfg.clone(),
            mdp,
            exposure: h.model,
            rejected_states: h.rejected_states,
            rejected_actions: h.rejected_actions,
        })
    }

    pub fn td_params(&self) -> TdParams {
        let cf = &self.cfg.car_following;
        TdParams {
            alpha_lr: cf.alpha_lr,
            delta0: cf.delta0,
            max_updates: cf.max_updates,
            horizon: cf.horizon,
            seed: self.cfg.seed,
        }
    }

    pub fn train(&self) -> Result<TreeLibrary> {
        let q = td_train(&self.mdp.tab, &self.exposure, &self.td_params()).map_err(core_err)?;
        Ok(self.library(q))
    }

    pub fn library(&self, q: QTable) -> TreeLibrary {
        let p_s = estimate_p_s(
            &self.mdp.tab,
            &self.exposure,
            self.cfg.car_following.p_s_episodes,
            self.cfg.seed,
        );
        TreeLibrary {
            case: CaseId::CarFollowing,
            states: self.mdp.states.clone(),
            actions: self.mdp.actions.clone(),
            q_table: q,
            zones: self.mdp.tab.zone_string(),
            horizon: self.mdp.tab.horizon,
            p_s,
        }
    }

    fn world(&self) -> TreeWorld<'_> {
        TreeWorld {
            states: &self.mdp.states,
            actions: &self.mdp.actions,
            zones: &self.mdp.tab.zones,
            cf: &self.cfg.car_following,
            d_acci: self.cfg.idm.d_acci,
        }
    }

    pub fn library_campaign(&self, lib: &TreeLibrary, rule: StoppingRule, opts: &RunOptions) -> Result<EvaluationReport> {
        if lib.states != self.mdp.states || lib.actions != self.mdp.actions {
            bail!("library was built for a different state or action grid");
        }
        let zones = lib.zone_list().map_err(core_err)?;
        if zones != self.mdp.tab.zones {
            bail!("library zones disagree with the surrogate's");
        }
        let sampler = TreeSampler::new(&lib.q_table, &self.exposure, self.cfg.epsilon()).map_err(core_err)?;
        let world = self.world();
        let cav = Follower::for_subject(SubjectId::Cav, &self.cfg);
        Ok(campaign::run(rule, self.cfg.evaluation.confidence, opts, |rng| {
            let ep = run_tree_episode(TreePolicy::Library(&sampler), &world, &cav, rng);
            (ep.root as u64, ep.ratio, ep.accident)
        }))
    }

    pub fn naive_campaign(&self, rule: StoppingRule, opts: &RunOptions) -> EvaluationReport {
        let roots = Cdf::new(self.exposure.state_masses());
        let world = self.world();
        let cav = Follower::for_subject(SubjectId::Cav, &self.cfg);
        let policy = TreePolicy::Naive {
            exposure: &self.exposure,
            roots: &roots,
        };
        campaign::run(rule, self.cfg.evaluation.confidence, opts, |rng| {
            let ep = run_tree_episode(policy, &world, &cav, rng);
            (ep.root as u64, 1.0, ep.accident)
        })
    }

    pub fn zone_counts(&self) -> [usize; 3] {
        let z = &self.mdp.tab.zones;
        let c = |k| z.iter().filter(|&&x| x == k).count();
        [c(Zone::Collision), c(Zone::Dangerous), c(Zone::Safe)]
    }
}
