//! Rollout-then-embed evaluation of genome batches.

use alloc::vec::Vec;

use crate::embedding::{Embedder, EmbeddingVector};
use crate::error::Result;
use crate::frame::Frame;
use crate::rollout::RolloutSpec;
use crate::substrate::AnySubstrate;
use crate::theta::Theta;

/// Embeds the captured frames of one rollout per genome.
///
/// Output is aligned with `thetas`; one failing genome does not affect the
/// others.
pub trait Evaluator {
    fn evaluate(
        &self,
        substrate: &AnySubstrate,
        thetas: &[Theta],
        spec: &RolloutSpec,
    ) -> Vec<Result<Vec<EmbeddingVector>>>;
}

impl<V: Evaluator + ?Sized> Evaluator for &V {
    fn evaluate(
        &self,
        substrate: &AnySubstrate,
        thetas: &[Theta],
        spec: &RolloutSpec,
    ) -> Vec<Result<Vec<EmbeddingVector>>> {
        (**self).evaluate(substrate, thetas, spec)
    }
}

/// Evaluates one genome after another on the calling thread.
#[derive(Debug, Clone)]
pub struct SerialEvaluator<E> {
    pub embedder: E,
}

impl<E: Embedder> SerialEvaluator<E> {
    pub fn new(embedder: E) -> Self {
        SerialEvaluator { embedder }
    }
}

/// Rollout and embed a single genome.
pub fn evaluate_one<E: Embedder + ?Sized>(
    embedder: &E,
    substrate: &AnySubstrate,
    theta: &Theta,
    spec: &RolloutSpec,
) -> Result<Vec<EmbeddingVector>> {
    let traj = substrate.rollout(theta, spec)?;
    let frames: Vec<&Frame> = traj.frames.iter().collect();
    embedder.embed_images(&frames)
}

impl<E: Embedder> Evaluator for SerialEvaluator<E> {
    fn evaluate(
        &self,
        substrate: &AnySubstrate,
        thetas: &[Theta],
        spec: &RolloutSpec,
    ) -> Vec<Result<Vec<EmbeddingVector>>> {
        thetas.iter().map(|t| evaluate_one(&self.embedder, substrate, t, spec)).collect()
    }
}
