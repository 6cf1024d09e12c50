//! Monte-Carlo evaluation of chain programs by forward sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lang::{MeanExpr, Program};

pub const GENERATOR: &str = "ChaCha20 (rand_chacha 0.9), stream = batch index; rand_distr StandardNormal";

/// Samples drawn from one generator stream.
pub const BATCH: u64 = 1 << 16;

#[derive(Debug, Clone)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub accepted: u64,
    pub samples: u64,
    pub generator: &'static str,
}

/// Estimate `#(observation ∧ query) / #(observation)` with standard error
/// `sqrt(p(1−p)/accepted)` (delta method for the ratio). Batch `b` draws
/// from stream `b` of a generator keyed by the seed, so results do not
/// depend on the thread count.
pub fn mc_evaluate(p: &Program, cfg: &McConfig) -> Result<McEstimate> {
    if cfg.samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    let steps: Vec<(f64, f64, f64)> = p
        .assignments
        .iter()
        .map(|a| match a.mean {
            MeanExpr::Literal(c) => (0.0, c, a.variance.sqrt()),
            MeanExpr::Var(_) => (1.0, 0.0, a.variance.sqrt()),
        })
        .collect();
    let qi = p.index_of(&p.query.var).ok_or_else(|| invalid("query variable unbound"))?;
    let obs = match &p.observation {
        Some(o) => Some((p.index_of(&o.var).ok_or_else(|| invalid("observed variable unbound"))?, o.cmp, o.threshold)),
        None => None,
    };
    let batches = cfg.samples.div_ceil(BATCH);
    let counts: Vec<(u64, u64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b);
            let n = BATCH.min(cfg.samples - b * BATCH);
            let mut vals = vec![0.0; steps.len()];
            let (mut acc, mut hit) = (0u64, 0u64);
            for _ in 0..n {
                let mut prev = 0.0;
                for (v, &(slope, c, sd)) in vals.iter_mut().zip(&steps) {
                    let e: f64 = rng.sample(StandardNormal);
                    prev = slope * prev + c + sd * e;
                    *v = prev;
                }
                if obs.is_none_or(|(i, cmp, t)| cmp.holds(vals[i], t)) {
                    acc += 1;
                    hit += u64::from(p.query.cmp.holds(vals[qi], p.query.threshold));
                }
            }
            (acc, hit)
        })
        .collect();
    let (accepted, hits) = counts.iter().fold((0, 0), |(a, h), &(x, y)| (a + x, h + y));
    if accepted == 0 {
        return Err(Error::ZeroAccepted);
    }
    let est = hits as f64 / accepted as f64;
    Ok(McEstimate {
        estimate: est,
        std_error: (est * (1.0 - est) / accepted as f64).sqrt(),
        accepted,
        samples: cfg.samples,
        generator: GENERATOR,
    })
}
