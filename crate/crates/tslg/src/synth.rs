//! Synthetic naturalistic driving data.
//!
//! Stands in for proprietary field data. Cut-in moments come from a
//! truncated Gaussian mixture over (range, range rate); car-following points
//! from a normal lead speed, a shifted gamma range and a normal range rate;
//! free-driving accelerations from a normal truncated to the action box and
//! rounded to its grid. Every shape parameter lives in [`NddParams`], so a
//! seed plus a config document fully determines the records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use tslg_core::config::{CaseConfig, CaseId, GridSpec, NddParams};
use tslg_core::ndd::EventRecord;

use anyhow::{bail, Context, Result};

/// Query bounds of a cut-in record: range in (0.1, 90) m.
pub const CUTIN_RANGE_BOUNDS: (f64, f64) = (0.1, 90.0);

fn truncated<R: Rng + ?Sized>(d: &Normal<f64>, lo: f64, hi: f64, rng: &mut R) -> f64 {
    loop {
        let x = d.sample(rng);
        if x >= lo && x <= hi {
            return x;
        }
    }
}

fn mixture_pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

/// `n` cut-in records inside the query bounds and the range-rate grid.
pub fn cutin_events(p: &NddParams, range_rate: GridSpec, n: usize, seed: u64) -> Result<Vec<EventRecord>> {
    if p.cutin_mixture.is_empty() {
        bail!("cut-in mixture has no components");
    }
    let comps = p
        .cutin_mixture
        .iter()
        .map(|c| Ok((Normal::new(c.mean[0], c.sd[0])?, Normal::new(c.mean[1], c.sd[1])?)))
        .collect::<Result<Vec<_>, rand_distr::NormalError>>()
        .context("invalid cut-in mixture component")?;
    let weights: Vec<f64> = p.cutin_mixture.iter().map(|c| c.weight).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rlo, rhi) = CUTIN_RANGE_BOUNDS;
    Ok((0..n)
        .map(|_| {
            let (dr, drr) = &comps[mixture_pick(&weights, &mut rng)];
            EventRecord::CutIn {
                range: truncated(dr, rlo, rhi, &mut rng),
                range_rate: truncated(drr, range_rate.lower, range_rate.upper, &mut rng),
            }
        })
        .collect())
}

/// `n` car-following points followed by `n` free-driving pairs.
pub fn following_events(p: &NddParams, speed: GridSpec, action: GridSpec, n: usize, seed: u64) -> Result<Vec<EventRecord>> {
    let v_lead = Normal::new(p.lead_speed_mean, p.lead_speed_sd).context("lead speed distribution")?;
    let rr = Normal::new(0.0, p.range_rate_sd).context("range rate distribution")?;
    let gap = Gamma::new(p.range_shape, p.range_scale).context("range distribution")?;
    let u = Normal::new(0.0, p.action_sd).context("action distribution")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let v = truncated(&v_lead, speed.lower, speed.upper, &mut rng);
        let range = p.range_offset + gap.sample(&mut rng);
        let range_rate = rr.sample(&mut rng);
        out.push(EventRecord::Following {
            v_lead: v,
            range,
            v_follow: v - range_rate,
        });
    }
    for _ in 0..n {
        let v = truncated(&v_lead, speed.lower, speed.upper, &mut rng);
        let raw = truncated(&u, action.lower, action.upper, &mut rng);
        let k = ((raw - action.lower) / action.step).round();
        out.push(EventRecord::FreeDriving {
            v,
            u: action.lower + k * action.step,
        });
    }
    Ok(out)
}

/// Records for a case: cut-in moments, or car-following points plus
/// free-driving pairs for the highway and car-following cases.
pub fn synth_events(cfg: &CaseConfig, n: usize, seed: u64) -> Result<Vec<EventRecord>> {
    if n == 0 {
        bail!("at least one event is required");
    }
    match cfg.case {
        CaseId::Cutin => cutin_events(&cfg.ndd, cfg.cutin.range_rate, n, seed),
        CaseId::HighwayExit => following_events(&cfg.ndd, cfg.highway.speed, cfg.car_following.action, n, seed),
        CaseId::CarFollowing => following_events(&cfg.ndd, cfg.car_following.speed, cfg.car_following.action, n, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutin_records_respect_query_bounds() {
        let cfg = CaseConfig::new(CaseId::Cutin);
        let ev = synth_events(&cfg, 100_000, 7).unwrap();
        assert_eq!(ev.len(), 100_000);
        for e in &ev {
            let EventRecord::CutIn { range, range_rate } = *e else { panic!("wrong kind") };
            assert!(range > 0.1 && range < 90.0);
            assert!((-20.0..=10.0).contains(&range_rate));
        }
    }

    #[test]
    fn same_seed_same_records() {
        let cfg = CaseConfig::new(CaseId::CarFollowing);
        assert_eq!(synth_events(&cfg, 500, 3).unwrap(), synth_events(&cfg, 500, 3).unwrap());
        assert_ne!(synth_events(&cfg, 500, 3).unwrap(), synth_events(&cfg, 500, 4).unwrap());
    }

    #[test]
    fn free_driving_actions_on_grid() {
        let cfg = CaseConfig::new(CaseId::CarFollowing);
        let ev = synth_events(&cfg, 10_000, 1).unwrap();
        let mut free = 0;
        for e in &ev {
            if let EventRecord::FreeDriving { u, .. } = *e {
                free += 1;
                assert!((-4.0 - 1e-9..=2.0 + 1e-9).contains(&u));
                let k = (u + 4.0) / 0.2;
                assert!((k - k.round()).abs() < 1e-9);
            }
        }
        assert_eq!(free, 10_000);
    }
}
