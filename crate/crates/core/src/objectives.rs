//! Supervised target, open-endedness and diversity scores.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embedding::{dot, similarity, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::rollout::Trajectory;

/// Prompts attached to capture steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSchedule {
    pub entries: Vec<(usize, String)>,
}

impl PromptSchedule {
    pub fn new(entries: Vec<(usize, String)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("prompt schedule needs at least one entry"));
        }
        Ok(PromptSchedule { entries })
    }

    /// One prompt at the given step.
    pub fn single(step: usize, prompt: &str) -> Self {
        PromptSchedule { entries: alloc::vec![(step, String::from(prompt))] }
    }

    pub fn validate(&self, capture_steps: &[usize]) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::InvalidArgument("prompt schedule needs at least one entry"));
        }
        for (step, prompt) in &self.entries {
            if prompt.is_empty() {
                return Err(Error::EmptyPrompt);
            }
            if !capture_steps.contains(step) {
                return Err(Error::MissingCapture { step: *step });
            }
        }
        Ok(())
    }

    /// Embed every prompt once.
    pub fn embed<E: Embedder + ?Sized>(&self, embedder: &E) -> Result<TargetSchedule> {
        let entries = self
            .entries
            .iter()
            .map(|(step, prompt)| Ok((*step, embedder.embed_text(prompt)?)))
            .collect::<Result<_>>()?;
        Ok(TargetSchedule { entries })
    }
}

/// Target embeddings attached to capture steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSchedule {
    pub entries: Vec<(usize, EmbeddingVector)>,
}

impl TargetSchedule {
    pub fn steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|(s, _)| *s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrajectory {
    pub trajectory: Trajectory,
    pub embeddings: Vec<EmbeddingVector>,
    pub scores: Vec<(String, f64)>,
}

impl ScoredTrajectory {
    pub fn new(trajectory: Trajectory, embeddings: Vec<EmbeddingVector>) -> Result<Self> {
        if trajectory.frames.len() != embeddings.len() {
            return Err(Error::LengthMismatch {
                expected: trajectory.frames.len(),
                found: embeddings.len(),
            });
        }
        Ok(ScoredTrajectory { trajectory, embeddings, scores: Vec::new() })
    }

    pub fn score(&self, name: &str) -> Option<f64> {
        self.scores.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Mean over schedule entries of the similarity between the frame captured at
/// the entry's step and the entry's target. Higher is better.
pub fn target_score(
    capture_steps: &[usize],
    traj_embeddings: &[EmbeddingVector],
    targets: &TargetSchedule,
) -> Result<f64> {
    if capture_steps.len() != traj_embeddings.len() {
        return Err(Error::LengthMismatch {
            expected: capture_steps.len(),
            found: traj_embeddings.len(),
        });
    }
    if targets.entries.is_empty() {
        return Err(Error::InvalidArgument("prompt schedule needs at least one entry"));
    }
    let mut total = 0.0;
    for (step, target) in &targets.entries {
        let idx = capture_steps
            .iter()
            .position(|s| s == step)
            .ok_or(Error::MissingCapture { step: *step })?;
        total += similarity(&traj_embeddings[idx], target)?;
    }
    Ok(total / targets.entries.len() as f64)
}

/// Mean over captures `k >= 1` of the largest similarity between capture `k`
/// and any earlier capture. Lower is more open-ended.
pub fn open_endedness_score(traj_embeddings: &[EmbeddingVector]) -> Result<f64> {
    let n = traj_embeddings.len();
    if n < 2 {
        return Err(Error::TooFewEmbeddings { needed: 2, found: n });
    }
    check_dims(traj_embeddings)?;
    let mut total = 0.0;
    for k in 1..n {
        let e = traj_embeddings[k].as_slice();
        let best = traj_embeddings[..k]
            .iter()
            .map(|h| dot(e, h.as_slice()))
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    Ok(total / (n - 1) as f64)
}

/// Mean over members of the largest similarity to any other member. Lower is
/// more diverse.
pub fn diversity_score(embeddings: &[EmbeddingVector]) -> Result<f64> {
    let n = embeddings.len();
    if n < 2 {
        return Err(Error::TooFewEmbeddings { needed: 2, found: n });
    }
    check_dims(embeddings)?;
    let mut total = 0.0;
    for i in 0..n {
        let e = embeddings[i].as_slice();
        let best = (0..n)
            .filter(|&j| j != i)
            .map(|j| dot(e, embeddings[j].as_slice()))
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    Ok(total / n as f64)
}

/// [`diversity_score`] where each member carries several captures and the
/// similarity of two members is the mean over aligned captures.
pub fn diversity_score_multi(members: &[Vec<EmbeddingVector>]) -> Result<f64> {
    let n = members.len();
    if n < 2 {
        return Err(Error::TooFewEmbeddings { needed: 2, found: n });
    }
    let mut total = 0.0;
    for i in 0..n {
        let mut best = f64::NEG_INFINITY;
        for j in (0..n).filter(|&j| j != i) {
            best = best.max(mean_similarity(&members[i], &members[j])?);
        }
        total += best;
    }
    Ok(total / n as f64)
}

/// Mean similarity over aligned captures.
pub fn mean_similarity(a: &[EmbeddingVector], b: &[EmbeddingVector]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::LengthMismatch { expected: a.len(), found: b.len() });
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        total += similarity(x, y)?;
    }
    Ok(total / a.len() as f64)
}

fn check_dims(embeddings: &[EmbeddingVector]) -> Result<()> {
    let d = embeddings[0].dim();
    for e in embeddings {
        if e.dim() != d {
            return Err(Error::DimMismatch { left: d, right: e.dim() });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn unit(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::normalize(v.to_vec()).unwrap()
    }

    /// Unit vector in the plane of e0/e1 at angle `acos(c)` from e0.
    fn at_cos(c: f64, dim: usize) -> EmbeddingVector {
        let mut v = vec![0.0; dim];
        v[0] = c;
        v[1] = libm::sqrt(1.0 - c * c);
        EmbeddingVector::new(v).unwrap()
    }

    fn targets(entries: Vec<(usize, EmbeddingVector)>) -> TargetSchedule {
        TargetSchedule { entries }
    }

    #[test]
    fn target_examples() {
        let e = EmbeddingVector::basis(4, 2);
        assert_eq!(target_score(&[10], core::slice::from_ref(&e), &targets(vec![(10, e.clone())])).unwrap(), 1.0);
        let o = EmbeddingVector::basis(4, 3);
        assert_eq!(target_score(&[10], core::slice::from_ref(&e), &targets(vec![(10, o)])).unwrap(), 0.0);
        assert_eq!(target_score(&[10], core::slice::from_ref(&e), &targets(vec![(10, e.neg())])).unwrap(), -1.0);

        // Two prompts at similarities 0.2 and 0.6.
        let frames = [EmbeddingVector::basis(3, 0), EmbeddingVector::basis(3, 0)];
        let t = targets(vec![(0, at_cos(0.2, 3)), (5, at_cos(0.6, 3))]);
        let s = target_score(&[0, 5], &frames, &t).unwrap();
        assert!((s - 0.4).abs() < 1e-12, "{s}");
    }

    #[test]
    fn target_missing_capture() {
        let e = EmbeddingVector::basis(2, 0);
        assert_eq!(
            target_score(&[0], core::slice::from_ref(&e), &targets(vec![(3, e.clone())])),
            Err(Error::MissingCapture { step: 3 })
        );
    }

    #[test]
    fn schedule_validation() {
        let s = PromptSchedule::single(7, "a cell");
        assert!(s.validate(&[0, 7]).is_ok());
        assert_eq!(s.validate(&[0, 8]), Err(Error::MissingCapture { step: 7 }));
        assert!(PromptSchedule::new(vec![]).is_err());
        assert_eq!(PromptSchedule::single(0, "").validate(&[0]), Err(Error::EmptyPrompt));
    }

    #[test]
    fn open_endedness_examples() {
        let e = EmbeddingVector::basis(3, 0);
        assert_eq!(open_endedness_score(&[e.clone(), e.clone(), e.clone()]).unwrap(), 1.0);
        let ortho: Vec<_> = (0..3).map(|i| EmbeddingVector::basis(3, i)).collect();
        assert_eq!(open_endedness_score(&ortho).unwrap(), 0.0);

        // <e0,e1> = 0.5; e2 has similarity 0.3 to e0 and lower to e1.
        let e0 = EmbeddingVector::basis(3, 0);
        let e1 = at_cos(0.5, 3);
        let (a, b) = (0.3, -0.5);
        let e2 = unit(&[a, b, libm::sqrt(1.0 - a * a - b * b)]);
        assert!(similarity(&e2, &e1).unwrap() < 0.3);
        let s = open_endedness_score(&[e0, e1, e2]).unwrap();
        assert!((s - 0.4).abs() < 1e-12, "{s}");
    }

    #[test]
    fn open_endedness_needs_two_frames() {
        assert_eq!(
            open_endedness_score(&[EmbeddingVector::basis(2, 0)]),
            Err(Error::TooFewEmbeddings { needed: 2, found: 1 })
        );
    }

    #[test]
    fn diversity_examples() {
        let e = EmbeddingVector::basis(3, 1);
        assert_eq!(diversity_score(&[e.clone(), e.clone()]).unwrap(), 1.0);
        let ortho: Vec<_> = (0..4).map(|i| EmbeddingVector::basis(4, i)).collect();
        assert_eq!(diversity_score(&ortho).unwrap(), 0.0);

        // a and b are each other's nearest neighbour at 0.9; c's nearest is at 0.2.
        let a = EmbeddingVector::basis(3, 0);
        let b = at_cos(0.9, 3);
        let (x, y) = (0.2, 0.2 * (1.0 - 0.9) / libm::sqrt(1.0 - 0.81));
        // c has similarity 0.2 to a and x*0.9 + y*sqrt(0.19) = 0.2 to b.
        let c = unit(&[x, y, libm::sqrt(1.0 - x * x - y * y)]);
        let s = diversity_score(&[a, b, c]).unwrap();
        assert!((s - (0.9 + 0.9 + 0.2) / 3.0).abs() < 1e-12, "{s}");
        assert!((s - 0.6667).abs() < 1e-4);

        assert_eq!(
            diversity_score(&[e]),
            Err(Error::TooFewEmbeddings { needed: 2, found: 1 })
        );
    }

    #[test]
    fn multi_capture_diversity_reduces_to_single() {
        let set: Vec<EmbeddingVector> = (0..4).map(|i| at_cos(0.1 * i as f64, 3)).collect();
        let multi: Vec<Vec<EmbeddingVector>> = set.iter().map(|e| vec![e.clone()]).collect();
        assert_eq!(diversity_score(&set).unwrap(), diversity_score_multi(&multi).unwrap());
    }

    fn arb_set(max: usize) -> impl Strategy<Value = Vec<EmbeddingVector>> {
        proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 5), 2..max).prop_map(
            |vs| {
                vs.into_iter()
                    .map(EmbeddingVector::normalize_or_basis)
                    .collect()
            },
        )
    }

    /// Rotation in the plane of axes 0 and 1 applied to every vector.
    fn rotate(set: &[EmbeddingVector], angle: f64) -> Vec<EmbeddingVector> {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        set.iter()
            .map(|e| {
                let mut v = e.as_slice().to_vec();
                let (x, y) = (v[0], v[1]);
                v[0] = c * x - s * y;
                v[1] = s * x + c * y;
                EmbeddingVector::new(v).unwrap()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn scores_bounded(set in arb_set(8)) {
            for s in [open_endedness_score(&set).unwrap(), diversity_score(&set).unwrap()] {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&s));
            }
        }

        #[test]
        fn rotation_invariant(set in arb_set(8), angle in 0.0f64..std::f64::consts::TAU) {
            let r = rotate(&set, angle);
            prop_assert!((open_endedness_score(&set).unwrap() - open_endedness_score(&r).unwrap()).abs() < 1e-12);
            prop_assert!((diversity_score(&set).unwrap() - diversity_score(&r).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn duplicate_append_never_lowers_oe(set in arb_set(8), pick in 0usize..8) {
            let before = open_endedness_score(&set).unwrap();
            let mut longer = set.clone();
            longer.push(set[pick % set.len()].clone());
            prop_assert!(open_endedness_score(&longer).unwrap() >= before - 1e-12);
        }

        #[test]
        fn diversity_permutation_invariant(set in arb_set(8), shift in 0usize..8) {
            let mut p = set.clone();
            let k = shift % p.len();
            p.rotate_left(k);
            p.reverse();
            prop_assert!((diversity_score(&set).unwrap() - diversity_score(&p).unwrap()).abs() < 1e-12);
        }
    }
}
