//! Naturalistic-driving event records and the exposure statistics derived
//! from them: histograms, the common set, and distance normalization factors.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, Error, Result};
use crate::exposure::{GridExposure, MdpExposure};
use crate::space::{CellIndex, ScenarioSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventRecord {
    /// Range and range rate at the cut-in moment.
    CutIn { range: f64, range_rate: f64 },
    /// One car-following trajectory point.
    Following { v_lead: f64, range: f64, v_follow: f64 },
    /// One free-driving speed/acceleration pair.
    FreeDriving { v: f64, u: f64 },
}

impl EventRecord {
    /// Coordinates in the record's natural grid: `(R, R_dot)` for cut-ins,
    /// `(v_lead, R, v_follow)` for car-following points.
    pub fn coords(&self) -> Option<Vec<f64>> {
        match *self {
            EventRecord::CutIn { range, range_rate } => Some(vec![range, range_rate]),
            EventRecord::Following { v_lead, range, v_follow } => Some(vec![v_lead, range, v_follow]),
            EventRecord::FreeDriving { .. } => None,
        }
    }

    /// Car-following MDP state `(v_bv, R, R_dot)` of a trajectory point.
    pub fn mdp_state(&self) -> Option<[f64; 3]> {
        match *self {
            EventRecord::Following { v_lead, range, v_follow } => Some([v_lead, range, v_lead - v_follow]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub model: GridExposure,
    /// Records whose coordinates fell outside the grid.
    pub rejected: usize,
}

/// Normalized cell counts of the records that carry grid coordinates.
pub fn build_histogram(events: &[EventRecord], space: &ScenarioSpace) -> Result<Histogram> {
    if events.is_empty() {
        return Err(Error::EmptyInput("no events to histogram".into()));
    }
    let mut counts = vec![0.0f64; space.total_count()];
    let mut rejected = 0usize;
    let mut kept = 0usize;
    for e in events {
        let Some(x) = e.coords() else { continue };
        match space.locate(&x) {
            Some(c) => {
                counts[c] += 1.0;
                kept += 1;
            }
            None => rejected += 1,
        }
    }
    if kept == 0 {
        return Err(Error::EmptyInput(alloc::format!(
            "all {} gridded events fell outside the space",
            rejected
        )));
    }
    Ok(Histogram {
        model: GridExposure::from_weights(space.clone(), counts)?,
        rejected,
    })
}

/// Axis-aligned hyper-rectangle of high-exposure scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonSet {
    pub bounds: Vec<(f64, f64)>,
}

impl CommonSet {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.iter().any(|&(lo, hi)| !(hi >= lo)) {
            return Err(domain_err!("common set bounds must satisfy lower <= upper"));
        }
        Ok(CommonSet { bounds })
    }

    /// Degenerate box holding one point.
    pub fn point(x: &[f64]) -> Self {
        CommonSet {
            bounds: x.iter().map(|&v| (v, v)).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bounds).all(|(&v, &(lo, hi))| v >= lo && v <= hi)
    }

    /// Per-dimension distance from `x` to the box.
    pub fn axis_gaps(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bounds)
            .map(|(&v, &(lo, hi))| {
                if v < lo {
                    lo - v
                } else if v > hi {
                    v - hi
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Minimal bounding box of every cell whose mass exceeds `threshold`.
pub fn extract_common_set(model: &GridExposure, threshold: f64) -> Result<CommonSet> {
    let space = &model.space;
    let nd = space.ndim();
    let mut lo = vec![f64::INFINITY; nd];
    let mut hi = vec![f64::NEG_INFINITY; nd];
    let mut idx = vec![0usize; nd];
    let mut found = false;
    for (cell, &m) in model.masses().iter().enumerate() {
        if m > threshold {
            found = true;
            space.decode_into(cell, &mut idx);
            for k in 0..nd {
                let v = space.dims[k].value(idx[k]);
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
    }
    if !found {
        return Err(Error::EmptyCommonSet(threshold));
    }
    CommonSet::new(lo.into_iter().zip(hi).collect())
}

/// Collapses the common set onto the single most frequent scenario.
pub fn most_frequent_common_set(model: &GridExposure) -> Result<CommonSet> {
    let mode: CellIndex = model.mode();
    Ok(CommonSet::point(&model.space.point(mode)?))
}

/// Largest per-dimension distance from any grid cell to the common set,
/// rounded up to whole units. A zero distance is clamped to 1 so it can be
/// used as a divisor.
pub fn normalization_factors(space: &ScenarioSpace, omega: &CommonSet) -> Vec<f64> {
    space
        .dims
        .iter()
        .zip(&omega.bounds)
        .map(|(d, &(lo, hi))| {
            let first = d.value(0);
            let last = d.value(d.count() - 1);
            let gap = (lo - first).max(last - hi).max(0.0);
            let f = libm::ceil(gap - 1e-9);
            if f <= 0.0 {
                1.0
            } else {
                f
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpHistogram {
    pub model: MdpExposure,
    pub rejected_states: usize,
    pub rejected_actions: usize,
}

/// State mass from car-following points and action mass from free-driving
/// pairs. Action mass is conditioned on the first state dimension (the lead
/// vehicle's speed); speeds without observations fall back to uniform.
pub fn mdp_exposure(
    events: &[EventRecord],
    states: &ScenarioSpace,
    actions: &ScenarioSpace,
) -> Result<MdpHistogram> {
    let ns = states.total_count();
    let na = actions.total_count();
    let speed_dim = &states.dims[0];
    let n_speed = speed_dim.count();
    let mut state_w = vec![0.0f64; ns];
    let mut speed_action_w = vec![0.0f64; n_speed * na];
    let (mut n_follow, mut n_free) = (0usize, 0usize);
    let (mut rej_s, mut rej_a) = (0usize, 0usize);
    for e in events {
        match *e {
            EventRecord::Following { .. } => {
                n_follow += 1;
                let s = e.mdp_state().unwrap();
                match states.locate(&s) {
                    Some(c) => state_w[c] += 1.0,
                    None => rej_s += 1,
                }
            }
            EventRecord::FreeDriving { v, u } => {
                n_free += 1;
                match (speed_dim.locate(v), actions.locate(&[u])) {
                    (Some(iv), Some(iu)) => speed_action_w[iv * na + iu] += 1.0,
                    _ => rej_a += 1,
                }
            }
            EventRecord::CutIn { .. } => {}
        }
    }
    if n_follow == 0 || n_free == 0 {
        return Err(Error::EmptyInput(
            "mdp exposure needs both car-following points and free-driving pairs".into(),
        ));
    }
    let per_speed = ns / n_speed;
    let mut action_w = vec![0.0f64; ns * na];
    for s in 0..ns {
        let iv = s / per_speed;
        action_w[s * na..(s + 1) * na].copy_from_slice(&speed_action_w[iv * na..(iv + 1) * na]);
    }
    Ok(MdpHistogram {
        model: MdpExposure::from_weights(states.clone(), actions.clone(), state_w, action_w)?,
        rejected_states: rej_s,
        rejected_actions: rej_a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Dim;

    fn grid2() -> ScenarioSpace {
        ScenarioSpace::new(vec![
            Dim::closed("a", 0.0, 4.0, 1.0, "").unwrap(),
            Dim::closed("b", 0.0, 4.0, 1.0, "").unwrap(),
        ])
        .unwrap()
    }

    fn cut(r: f64, rr: f64) -> EventRecord {
        EventRecord::CutIn { range: r, range_rate: rr }
    }

    #[test]
    fn counts_split_three_to_one() {
        let ev = [cut(1.0, 1.0), cut(1.1, 0.9), cut(0.9, 1.2), cut(3.0, 3.0)];
        let h = build_histogram(&ev, &grid2()).unwrap();
        let s = grid2();
        assert_eq!(h.model.prob(s.encode(&[1, 1]).unwrap()).unwrap(), 0.75);
        assert_eq!(h.model.prob(s.encode(&[3, 3]).unwrap()).unwrap(), 0.25);
        assert_eq!(h.rejected, 0);
    }

    #[test]
    fn single_cell_support() {
        let ev = vec![cut(2.0, 2.0); 10];
        let h = build_histogram(&ev, &grid2()).unwrap();
        assert_eq!(h.model.prob(grid2().encode(&[2, 2]).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_events_are_counted() {
        let ev = [cut(2.0, 2.0), cut(9.0, 2.0), cut(2.0, -3.0)];
        let h = build_histogram(&ev, &grid2()).unwrap();
        assert_eq!(h.rejected, 2);
        assert!(build_histogram(&[cut(9.0, 9.0)], &grid2()).is_err());
        assert!(build_histogram(&[], &grid2()).is_err());
    }

    #[test]
    fn common_set_is_bounding_box() {
        let ev = [cut(1.0, 1.0), cut(3.0, 3.0)];
        let h = build_histogram(&ev, &grid2()).unwrap();
        let omega = extract_common_set(&h.model, 0.1).unwrap();
        assert_eq!(omega.bounds, vec![(1.0, 3.0), (1.0, 3.0)]);
        let single = build_histogram(&[cut(2.0, 1.0)], &grid2()).unwrap();
        let o = extract_common_set(&single.model, 0.5).unwrap();
        assert_eq!(o.bounds, vec![(2.0, 2.0), (1.0, 1.0)]);
        assert!(matches!(
            extract_common_set(&single.model, 1.0),
            Err(Error::EmptyCommonSet(_))
        ));
    }

    #[test]
    fn factors_from_maximal_gap() {
        let line = ScenarioSpace::new(vec![Dim::closed("x", 0.0, 10.0, 1.0, "").unwrap()]).unwrap();
        let omega = CommonSet::new(vec![(0.0, 5.0)]).unwrap();
        assert_eq!(normalization_factors(&line, &omega), vec![5.0]);
        let whole = CommonSet::new(vec![(0.0, 10.0)]).unwrap();
        assert_eq!(normalization_factors(&line, &whole), vec![1.0]);
    }

    #[test]
    fn cutin_range_rate_factor_matches_table() {
        let space = crate::config::build_space(&crate::config::CaseConfig::new(crate::config::CaseId::Cutin)).unwrap();
        let omega = CommonSet::new(vec![(6.0, 88.0), (-2.4, 1.2)]).unwrap();
        assert_eq!(normalization_factors(&space, &omega)[1], 18.0);
    }

    #[test]
    fn mdp_exposure_conditions_on_speed() {
        let states = ScenarioSpace::new(vec![
            Dim::closed("v", 20.0, 21.0, 1.0, "").unwrap(),
            Dim::half_open("r", 0.0, 2.0, 1.0, "").unwrap(),
            Dim::closed("rr", 0.0, 0.0 + 1.0, 1.0, "").unwrap(),
        ])
        .unwrap();
        let actions = ScenarioSpace::new(vec![Dim::closed("u", -1.0, 1.0, 1.0, "").unwrap()]).unwrap();
        let ev = [
            EventRecord::Following { v_lead: 20.0, range: 2.0, v_follow: 20.0 },
            EventRecord::FreeDriving { v: 20.0, u: 0.0 },
            EventRecord::FreeDriving { v: 20.2, u: 0.1 },
        ];
        let h = mdp_exposure(&ev, &states, &actions).unwrap();
        let m = &h.model;
        assert!(m.is_normalized());
        // observed speed bucket: all mass on u = 0
        assert_eq!(m.action_row(0), &[0.0, 1.0, 0.0]);
        // unobserved speed bucket: uniform fallback
        let last = states.total_count() - 1;
        for &p in m.action_row(last) {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(mdp_exposure(&ev[..1], &states, &actions).is_err());
    }
}
