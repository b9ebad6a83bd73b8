//! Auxiliary objectives that steer the library search, scenario
//! criticality, and the criticality threshold.

use crate::error::{domain_err, Result};
use crate::ndd::CommonSet;
use crate::space::ScenarioSpace;

/// Normalized RMS distance from `x` to the box `omega`:
/// `sqrt(mean_i ((x_i - clamp_i(x_i)) / U_F,i)^2)`.
pub fn distance_to_common_set(x: &[f64], omega: &CommonSet, factors: &[f64]) -> f64 {
    let m = x.len();
    if m == 0 {
        return 0.0;
    }
    let sq: f64 = omega
        .axis_gaps(x)
        .iter()
        .zip(factors)
        .map(|(g, f)| (g / f) * (g / f))
        .sum();
    libm::sqrt(sq / m as f64)
}

/// `mnpETTC + w d(x, Omega)`.
pub fn cutin_objective(mnp_ettc: f64, x: &[f64], omega: &CommonSet, factors: &[f64], w: f64) -> f64 {
    mnp_ettc + w * distance_to_common_set(x, omega, factors)
}

/// `S(F) / U_S + w d(x, Omega)`.
pub fn highway_objective(area: f64, u_s: f64, x: &[f64], omega: &CommonSet, factors: &[f64], w: f64) -> f64 {
    area / u_s + w * distance_to_common_set(x, omega, factors)
}

/// `V = P(S|x) P(x)` for a deterministic surrogate.
pub fn criticality(sm_event: bool, exposure: f64) -> f64 {
    if sm_event {
        exposure
    } else {
        0.0
    }
}

/// `gamma = m / N(X)`.
pub fn gamma_threshold(m: f64, space: &ScenarioSpace) -> Result<f64> {
    gamma_for_count(m, space.total_count())
}

pub fn gamma_for_count(m: f64, cells: usize) -> Result<f64> {
    if !(m >= 1.0) {
        return Err(domain_err!("exploration constant must be >= 1, got {}", m));
    }
    if cells == 0 {
        return Err(domain_err!("space has no cells"));
    }
    Ok(m / cells as f64)
}
