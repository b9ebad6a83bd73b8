//! Weighted Monte Carlo estimation of an event probability, the relative
//! half-width stopping rule, and the sequential campaign driver.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::CaseConfig;

/// Two-sided standard normal quantile: the `z` with `P(|Z| <= z) = confidence`.
pub fn z_two_sided(confidence: f64) -> f64 {
    if !(confidence > 0.0 && confidence < 1.0) {
        return f64::NAN;
    }
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if libm::erf(mid / core::f64::consts::SQRT_2) < confidence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Streaming mean and sample variance of weighted indicator terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunningEstimate {
    pub n: u64,
    sum: f64,
    comp: f64,
    mean: f64,
    m2: f64,
}

impl RunningEstimate {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, term: f64) {
        self.n += 1;
        // compensated running sum for the reported mean
        let t = self.sum + term;
        if libm::fabs(self.sum) >= libm::fabs(term) {
            self.comp += (self.sum - t) + term;
        } else {
            self.comp += (term - t) + self.sum;
        }
        self.sum = t;
        // Welford for the second moment
        let delta = term - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (term - self.mean);
    }

    /// Mean of the terms pushed so far.
    pub fn mu_hat(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.sum + self.comp) / self.n as f64
        }
    }

    /// Unbiased sample variance of the terms.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    /// `z * sigma / (sqrt(n) * mu)`; infinite while the mean is zero.
    pub fn relative_half_width(&self, z: f64) -> f64 {
        let mu = self.mu_hat();
        if self.n < 2 || !(mu > 0.0) {
            return f64::INFINITY;
        }
        z * libm::sqrt(self.variance() / self.n as f64) / mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub beta: f64,
    pub z: f64,
    pub min_tests: u64,
    pub max_tests: u64,
}

impl StoppingRule {
    pub fn for_case(cfg: &CaseConfig) -> Self {
        StoppingRule {
            beta: cfg.beta(),
            z: cfg.evaluation.z_alpha(),
            min_tests: cfg.evaluation.min_tests,
            max_tests: cfg.evaluation.max_tests,
        }
    }

    /// Rule that never converges early: runs exactly `n` tests.
    pub fn fixed(n: u64, z: f64) -> Self {
        StoppingRule {
            beta: 0.0,
            z,
            min_tests: n,
            max_tests: n,
        }
    }
}

/// Outcome of one test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test_index: u64,
    pub scenario_id: u64,
    /// Likelihood ratio P(x) / P̄(x).
    pub weight: f64,
    pub indicator: bool,
}

impl TestRecord {
    pub fn term(&self) -> f64 {
        if self.indicator {
            self.weight
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub test_index: u64,
    pub scenario_id: u64,
    pub weight: f64,
    pub indicator: bool,
    pub mu_hat: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub converged: bool,
    pub n: u64,
    pub mu_hat: f64,
    pub variance: f64,
    pub half_width: f64,
    pub accidents: u64,
    pub confidence: f64,
    pub beta: f64,
    pub z: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Folds test records in index order and decides when to stop.
#[derive(Debug, Clone)]
pub struct Campaign {
    pub rule: StoppingRule,
    pub confidence: f64,
    est: RunningEstimate,
    accidents: u64,
    trace_every: u64,
    trace: Vec<TraceRow>,
    last: Option<TraceRow>,
    converged: bool,
}

impl Campaign {
    /// `trace_every = k` keeps every k-th row (plus the last); 0 keeps none.
    pub fn new(rule: StoppingRule, confidence: f64, trace_every: u64) -> Self {
        Campaign {
            rule,
            confidence,
            est: RunningEstimate::new(),
            accidents: 0,
            trace_every,
            trace: Vec::new(),
            last: None,
            converged: false,
        }
    }

    pub fn estimate(&self) -> &RunningEstimate {
        &self.est
    }

    /// Whether no more records are wanted.
    pub fn done(&self) -> bool {
        self.converged || self.est.n >= self.rule.max_tests
    }

    /// Adds one record; returns `true` once the campaign is done.
    pub fn push(&mut self, rec: TestRecord) -> bool {
        if self.done() {
            return true;
        }
        self.est.push(rec.term());
        if rec.indicator {
            self.accidents += 1;
        }
        let hw = self.est.relative_half_width(self.rule.z);
        let row = TraceRow {
            test_index: rec.test_index,
            scenario_id: rec.scenario_id,
            weight: rec.weight,
            indicator: rec.indicator,
            mu_hat: self.est.mu_hat(),
            half_width: hw,
        };
        if self.trace_every > 0 && self.est.n % self.trace_every == 0 {
            self.trace.push(row);
        }
        self.last = Some(row);
        if self.est.n >= self.rule.min_tests && hw <= self.rule.beta {
            self.converged = true;
        }
        self.done()
    }

    pub fn finish(mut self) -> EvaluationReport {
        if let Some(last) = self.last {
            if self.trace_every > 0 && self.trace.last().map(|r| r.test_index) != Some(last.test_index) {
                self.trace.push(last);
            }
        }
        EvaluationReport {
            converged: self.converged,
            n: self.est.n,
            mu_hat: self.est.mu_hat(),
            variance: self.est.variance(),
            half_width: self.est.relative_half_width(self.rule.z),
            accidents: self.accidents,
            confidence: self.confidence,
            beta: self.rule.beta,
            z: self.rule.z,
            trace: self.trace,
        }
    }
}

/// Sequential campaign: calls `test(i)` for i = 0, 1, ... until the rule
/// stops it.
pub fn run_sequential<F>(rule: StoppingRule, confidence: f64, trace_every: u64, mut test: F) -> EvaluationReport
where
    F: FnMut(u64) -> TestRecord,
{
    let mut c = Campaign::new(rule, confidence, trace_every);
    let mut i = 0u64;
    while !c.done() {
        c.push(test(i));
        i += 1;
    }
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_at_95_percent() {
        assert!((z_two_sided(0.95) - 1.959963984540054).abs() < 1e-9);
        assert!((z_two_sided(0.6826894921370859) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mean_of_two_terms() {
        let mut e = RunningEstimate::new();
        e.push(0.2);
        e.push(0.0);
        assert!((e.mu_hat() - 0.1).abs() < 1e-15);
        assert!((e.variance() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn constant_terms_have_zero_half_width() {
        let mut e = RunningEstimate::new();
        for _ in 0..10 {
            e.push(0.3);
        }
        assert_eq!(e.variance(), 0.0);
        assert_eq!(e.relative_half_width(1.96), 0.0);
    }

    #[test]
    fn zero_mean_is_infinite_half_width() {
        let mut e = RunningEstimate::new();
        e.push(0.0);
        e.push(0.0);
        assert!(e.relative_half_width(1.96).is_infinite());
    }

    #[test]
    fn zero_accident_subject_hits_the_cap() {
        let rule = StoppingRule { beta: 0.3, z: 1.96, min_tests: 30, max_tests: 500 };
        let r = run_sequential(rule, 0.95, 1, |i| TestRecord { test_index: i, scenario_id: 0, weight: 1.0, indicator: false });
        assert!(!r.converged);
        assert_eq!(r.n, 500);
        assert_eq!(r.trace.len(), 500);
    }

    #[test]
    fn stops_at_first_crossing_after_minimum() {
        let rule = StoppingRule { beta: 0.3, z: 1.96, min_tests: 30, max_tests: 100_000 };
        let r = run_sequential(rule, 0.95, 1, |i| TestRecord {
            test_index: i,
            scenario_id: i,
            weight: 0.5,
            indicator: i % 3 == 0,
        });
        assert!(r.converged);
        let k = r.trace.len();
        assert!(r.trace[k - 1].half_width <= 0.3);
        assert!(k <= 30 || r.trace[k - 2].half_width > 0.3);
        for row in &r.trace {
            assert!(row.mu_hat >= 0.0);
        }
    }
}
