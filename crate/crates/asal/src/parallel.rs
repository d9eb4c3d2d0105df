//! Worker-pool evaluation. Results are collected in input order, so output
//! does not depend on the number of workers.

use asal_core::eval::{evaluate_one, Evaluator};
use asal_core::search::{evaluate_rule, EnumerationSpec, RuleRecord};
use asal_core::substrate::lifelike_ca::CaRule;
use asal_core::{AnySubstrate, Embedder, EmbeddingVector, RolloutSpec, Theta};
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{AppError, Result};

pub fn pool(workers: usize) -> Result<ThreadPool> {
    ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| AppError::config("workers", e.to_string()))
}

pub struct ParallelEvaluator<E> {
    pub embedder: E,
    pool: ThreadPool,
}

impl<E: Embedder + Sync> ParallelEvaluator<E> {
    pub fn new(embedder: E, workers: usize) -> Result<Self> {
        Ok(ParallelEvaluator { embedder, pool: pool(workers)? })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

impl<E: Embedder + Sync> Evaluator for ParallelEvaluator<E> {
    fn evaluate(
        &self,
        substrate: &AnySubstrate,
        thetas: &[Theta],
        spec: &RolloutSpec,
    ) -> Vec<asal_core::Result<Vec<EmbeddingVector>>> {
        self.pool.install(|| {
            thetas.par_iter().map(|t| evaluate_one(&self.embedder, substrate, t, spec)).collect()
        })
    }
}

/// Scores `rules` on `pool`, preserving input order.
pub fn score_rules<E: Embedder + Sync + ?Sized>(
    pool: &ThreadPool,
    rules: &[CaRule],
    spec: &EnumerationSpec,
    embedder: &E,
) -> asal_core::Result<Vec<RuleRecord>> {
    pool.install(|| rules.par_iter().map(|&r| evaluate_rule(r, spec, embedder)).collect())
}
