//! Nearest-neighbour diversity genetic algorithm.
//!
//! Each iteration samples parents uniformly from the archive, adds Gaussian
//! noise, inserts every mutant, then repeatedly removes the member whose
//! mean distance (`1 - similarity`) to its two nearest neighbours is
//! smallest until the archive is back at capacity. Among equally crowded
//! members the oldest goes first.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embedding::{dot, EmbeddingVector};
use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::rng::{below, make_rng, standard_normal, STREAM_SEARCH};
use crate::rollout::RolloutSpec;
use crate::substrate::AnySubstrate;
use crate::theta::{Genome, Theta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    /// Mutants per iteration.
    pub batch: usize,
    /// Standard deviation of the additive mutation noise.
    pub sigma: f64,
    /// Abort once more than this fraction of `batch` mutants diverge within
    /// one iteration.
    pub max_divergence_fraction: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig { batch: 32, sigma: 0.1, max_divergence_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub theta: Theta,
    /// One embedding per capture of the evaluation rollout.
    pub embeddings: Vec<EmbeddingVector>,
    /// Insertion counter; lower is older.
    pub id: u64,
}

impl Member {
    pub fn final_embedding(&self) -> &EmbeddingVector {
        self.embeddings.last().expect("member has at least one embedding")
    }
}

/// The two most similar other members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Nearest {
    sims: [f64; 2],
    ids: [u64; 2],
}

impl Nearest {
    const EMPTY: Nearest = Nearest { sims: [f64::NEG_INFINITY; 2], ids: [u64::MAX; 2] };

    fn offer(&mut self, sim: f64, id: u64) {
        if sim > self.sims[0] {
            self.sims[1] = self.sims[0];
            self.ids[1] = self.ids[0];
            self.sims[0] = sim;
            self.ids[0] = id;
        } else if sim > self.sims[1] {
            self.sims[1] = sim;
            self.ids[1] = id;
        }
    }

    fn holds(&self, id: u64) -> bool {
        self.ids.contains(&id)
    }

    /// Mean distance to the available nearest neighbours.
    fn crowding_distance(&self) -> f64 {
        let known: Vec<f64> = self.sims.iter().copied().filter(|s| s.is_finite()).collect();
        if known.is_empty() {
            return f64::INFINITY;
        }
        known.iter().map(|s| 1.0 - s).sum::<f64>() / known.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub capacity: usize,
    members: Vec<Member>,
    nearest: Vec<Nearest>,
    next_id: u64,
    /// Completed iterations.
    pub iteration: u64,
}

fn member_similarity(a: &Member, b: &Member) -> f64 {
    let n = a.embeddings.len();
    a.embeddings.iter().zip(&b.embeddings).map(|(x, y)| dot(x.as_slice(), y.as_slice())).sum::<f64>()
        / n as f64
}

impl Archive {
    /// Archive holding `entries` in order; ids follow that order.
    pub fn new(capacity: usize, entries: Vec<(Theta, Vec<EmbeddingVector>)>) -> Result<Self> {
        if entries.len() != capacity || capacity == 0 {
            return Err(Error::LengthMismatch { expected: capacity, found: entries.len() });
        }
        let mut a = Archive {
            capacity,
            members: Vec::with_capacity(capacity),
            nearest: Vec::with_capacity(capacity),
            next_id: 0,
            iteration: 0,
        };
        let (caps, dim) = (entries[0].1.len(), entries[0].1.first().map_or(0, |e| e.dim()));
        for (theta, embs) in entries {
            if embs.len() != caps || caps == 0 {
                return Err(Error::LengthMismatch { expected: caps, found: embs.len() });
            }
            if let Some(e) = embs.iter().find(|e| e.dim() != dim) {
                return Err(Error::DimMismatch { left: dim, right: e.dim() });
            }
            a.insert(theta, embs);
        }
        Ok(a)
    }

    /// `capacity` copies of one genome.
    pub fn filled(capacity: usize, theta: Theta, embeddings: Vec<EmbeddingVector>) -> Result<Self> {
        Self::new(capacity, (0..capacity).map(|_| (theta.clone(), embeddings.clone())).collect())
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn final_embeddings(&self) -> Vec<EmbeddingVector> {
        self.members.iter().map(|m| m.final_embedding().clone()).collect()
    }

    pub fn insert(&mut self, theta: Theta, embeddings: Vec<EmbeddingVector>) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let m = Member { theta, embeddings, id };
        let mut near = Nearest::EMPTY;
        for (other, on) in self.members.iter().zip(self.nearest.iter_mut()) {
            let s = member_similarity(&m, other);
            near.offer(s, other.id);
            on.offer(s, id);
        }
        self.members.push(m);
        self.nearest.push(near);
        id
    }

    /// Index of the member with the smallest mean distance to its two
    /// nearest neighbours, oldest first on ties.
    pub fn most_crowded(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, n) in self.nearest.iter().enumerate() {
            let d = n.crowding_distance();
            let better = match best {
                None => true,
                Some((j, bd)) => d < bd || (d == bd && self.members[i].id < self.members[j].id),
            };
            if better {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Remove the most crowded member and return it.
    pub fn cull_one(&mut self) -> Option<Member> {
        let i = self.most_crowded()?;
        let gone = self.members.remove(i);
        self.nearest.remove(i);
        for k in 0..self.members.len() {
            if self.nearest[k].holds(gone.id) {
                let mut n = Nearest::EMPTY;
                for (j, other) in self.members.iter().enumerate() {
                    if j != k {
                        n.offer(member_similarity(&self.members[k], other), other.id);
                    }
                }
                self.nearest[k] = n;
            }
        }
        Some(gone)
    }

    /// Mean over members of the similarity to the nearest other member.
    pub fn diversity(&self) -> Result<f64> {
        if self.members.len() < 2 {
            return Err(Error::TooFewEmbeddings { needed: 2, found: self.members.len() });
        }
        Ok(self.nearest.iter().map(|n| n.sims[0]).sum::<f64>() / self.members.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaStepStats {
    pub iteration: u64,
    pub attempts: usize,
    pub diverged: usize,
    pub diversity: f64,
}

/// One illumination iteration. Randomness comes from `seed` and the
/// archive's iteration counter, so resuming from a saved archive replays
/// the same sequence.
pub fn ga_step<V: Evaluator + ?Sized>(
    archive: &mut Archive,
    substrate: &AnySubstrate,
    evaluator: &V,
    spec: &RolloutSpec,
    config: &GaConfig,
    seed: u64,
) -> Result<GaStepStats> {
    if archive.len() != archive.capacity {
        return Err(Error::InvalidArgument("archive must be at capacity"));
    }
    let mut rng = make_rng(seed, STREAM_SEARCH + archive.iteration);
    let budget = config.max_divergence_fraction * config.batch as f64;
    let (mut attempts, mut diverged) = (0, 0);
    let mut accepted: Vec<(Theta, Vec<EmbeddingVector>)> = Vec::with_capacity(config.batch);
    while accepted.len() < config.batch {
        let need = config.batch - accepted.len();
        let mut mutants = Vec::with_capacity(need);
        for _ in 0..need {
            let parent = &archive.members[below(&mut rng, archive.len())].theta;
            let values = match &parent.genome {
                Genome::Real(v) => v.iter().map(|x| x + config.sigma * standard_normal(&mut rng)).collect(),
                Genome::Bits { .. } => {
                    return Err(Error::InvalidArgument("illumination needs a real-valued genome"))
                }
            };
            mutants.push(Theta::real(parent.substrate, values));
        }
        let results = evaluator.evaluate(substrate, &mutants, spec);
        for (theta, r) in mutants.into_iter().zip(results) {
            attempts += 1;
            match r {
                Ok(embs) => accepted.push((theta, embs)),
                Err(Error::Diverged { .. }) => diverged += 1,
                Err(e) => return Err(e),
            }
        }
        if diverged as f64 > budget {
            return Err(Error::DivergenceBudget { diverged, attempts });
        }
    }
    for (theta, embs) in accepted {
        archive.insert(theta, embs);
    }
    while archive.len() > archive.capacity {
        archive.cull_one();
    }
    archive.iteration += 1;
    Ok(GaStepStats { iteration: archive.iteration, attempts, diverged, diversity: archive.diversity()? })
}

/// `iterations` calls to [`ga_step`]; `on_step` sees every iteration's stats.
pub fn ga_illuminate<V: Evaluator + ?Sized>(
    archive: &mut Archive,
    substrate: &AnySubstrate,
    evaluator: &V,
    spec: &RolloutSpec,
    config: &GaConfig,
    seed: u64,
    iterations: u64,
    mut on_step: impl FnMut(&Archive, &GaStepStats),
) -> Result<()> {
    for _ in 0..iterations {
        let stats = ga_step(archive, substrate, evaluator, spec, config, seed)?;
        on_step(archive, &stats);
    }
    Ok(())
}
