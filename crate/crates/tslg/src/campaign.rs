//! Batched parallel campaigns with bit-reproducible results.
//!
//! Test `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so its
//! outcome does not depend on which worker runs it. Batches of a fixed size
//! are simulated in parallel and folded into the estimator in index order;
//! records past the stopping point are discarded.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tslg_core::estimate::{Campaign, EvaluationReport, StoppingRule, TestRecord};

/// Scenario id, likelihood ratio, and event indicator of one test.
pub type Outcome = (u64, f64, bool);

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
    /// Tests simulated per batch. Part of the reproducibility contract only
    /// through the stopping point, which it does not affect.
    pub batch: usize,
    pub trace_every: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 1,
            workers: 0,
            batch: 4096,
            trace_every: 1,
        }
    }
}

pub fn test_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn run<F>(rule: StoppingRule, confidence: f64, opts: &RunOptions, test: F) -> EvaluationReport
where
    F: Fn(&mut ChaCha8Rng) -> Outcome + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .expect("thread pool");
    let batch = opts.batch.max(1) as u64;
    let mut c = Campaign::new(rule, confidence, opts.trace_every);
    let mut start = 0u64;
    pool.install(|| {
        while !c.done() {
            let end = (start + batch).min(rule.max_tests.max(start + 1));
            let recs: Vec<TestRecord> = (start..end)
                .into_par_iter()
                .map(|i| {
                    let (scenario_id, weight, indicator) = test(&mut test_rng(opts.seed, i));
                    TestRecord {
                        test_index: i,
                        scenario_id,
                        weight,
                        indicator,
                    }
                })
                .collect();
            for r in recs {
                if c.push(r) {
                    break;
                }
            }
            start = end;
        }
    });
    c.finish()
}
