//! Interpolation curves, parameter sweeps and embedding-speed plateaus.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::embedding::{dot, EmbeddingVector};
use crate::error::{Error, Result};
use crate::eval::Evaluator;
use crate::objectives::{target_score, TargetSchedule};
use crate::rollout::RolloutSpec;
use crate::substrate::{AnySubstrate, ParticleLife, ParticleLifeConfig};
use crate::theta::{Genome, Theta};

/// `±{1, 2, 3} x 0.05`.
pub const DEFAULT_DELTAS: [f64; 6] = [-0.15, -0.10, -0.05, 0.05, 0.10, 0.15];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis_name: String,
    pub axis: Vec<f64>,
    pub scores: Vec<f64>,
    pub metadata: Vec<(String, String)>,
}

impl SweepReport {
    /// Two columns, `<axis_name>,score`, with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{},score", self.axis_name);
        for (a, s) in self.axis.iter().zip(&self.scores) {
            let _ = writeln!(out, "{a:?},{s:?}");
        }
        out
    }
}

/// Which endpoint the interpolation curve is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    A,
    B,
}

fn real_values(theta: &Theta) -> Result<&[f64]> {
    match &theta.genome {
        Genome::Real(v) => Ok(v),
        Genome::Bits { .. } => Err(Error::InvalidArgument("sweeps need a real-valued genome")),
    }
}

fn final_embeddings<V: Evaluator + ?Sized>(
    evaluator: &V,
    substrate: &AnySubstrate,
    thetas: &[Theta],
    spec: &RolloutSpec,
) -> Result<Vec<Vec<EmbeddingVector>>> {
    evaluator.evaluate(substrate, thetas, spec).into_iter().collect()
}

/// Similarity of each point on the segment from `a` to `b` to the chosen
/// endpoint, compared on final-frame embeddings.
pub fn interpolate_curve<V: Evaluator + ?Sized>(
    evaluator: &V,
    substrate: &AnySubstrate,
    a: &Theta,
    b: &Theta,
    n_points: usize,
    reference: Endpoint,
    spec: &RolloutSpec,
) -> Result<SweepReport> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("interpolation needs at least 2 points"));
    }
    let (va, vb) = (real_values(a)?, real_values(b)?);
    if va.len() != vb.len() {
        return Err(Error::GenomeLength { expected: va.len(), found: vb.len() });
    }
    if a.substrate != b.substrate {
        return Err(Error::WrongSubstrate { expected: a.substrate, found: b.substrate });
    }
    let axis: Vec<f64> = (0..n_points).map(|i| i as f64 / (n_points - 1) as f64).collect();
    let mut thetas: Vec<Theta> = axis
        .iter()
        .map(|&t| {
            let v = va.iter().zip(vb).map(|(x, y)| (1.0 - t) * x + t * y).collect();
            Theta::real(a.substrate, v)
        })
        .collect();
    thetas.push(match reference {
        Endpoint::A => a.clone(),
        Endpoint::B => b.clone(),
    });
    let embs = final_embeddings(evaluator, substrate, &thetas, spec)?;
    let reference_emb = embs.last().and_then(|e| e.last()).ok_or(Error::MissingCapture { step: spec.total_steps })?;
    let scores = embs[..n_points]
        .iter()
        .map(|e| dot(e.last().expect("one capture").as_slice(), reference_emb.as_slice()))
        .collect();
    Ok(SweepReport {
        axis_name: "alpha".to_string(),
        axis,
        scores,
        metadata: alloc::vec![
            ("substrate".to_string(), a.substrate.name().to_string()),
            ("reference".to_string(), match reference {
                Endpoint::A => "a".to_string(),
                Endpoint::B => "b".to_string(),
            }),
            ("seed".to_string(), spec.seed.to_string()),
        ],
    })
}

/// Sweeps each dimension in `dims` (all when `None`) over `theta[d] + delta`,
/// scores each point against `targets`, and ranks dimensions by the
/// population standard deviation of their scores, largest first. Equal
/// deviations keep ascending dimension order.
#[allow(clippy::too_many_arguments)]
pub fn param_importance<V: Evaluator + ?Sized>(
    evaluator: &V,
    substrate: &AnySubstrate,
    theta: &Theta,
    targets: &TargetSchedule,
    deltas: &[f64],
    dims: Option<&[usize]>,
    spec: &RolloutSpec,
) -> Result<Vec<(usize, f64)>> {
    let base = real_values(theta)?;
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("importance needs at least one delta"));
    }
    let all: Vec<usize> = (0..base.len()).collect();
    let dims = dims.unwrap_or(&all);
    if let Some(&d) = dims.iter().find(|&&d| d >= base.len()) {
        return Err(Error::GenomeLength { expected: base.len(), found: d + 1 });
    }
    let mut thetas = Vec::with_capacity(dims.len() * deltas.len());
    for &d in dims {
        for &delta in deltas {
            let mut v = base.to_vec();
            v[d] += delta;
            thetas.push(Theta::real(theta.substrate, v));
        }
    }
    let embs = final_embeddings(evaluator, substrate, &thetas, spec)?;
    let mut ranked = Vec::with_capacity(dims.len());
    for (k, &d) in dims.iter().enumerate() {
        let scores = embs[k * deltas.len()..(k + 1) * deltas.len()]
            .iter()
            .map(|e| target_score(&spec.capture_steps, e, targets))
            .collect::<Result<Vec<f64>>>()?;
        ranked.push((d, std_dev(&scores)));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}

fn std_dev(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    libm::sqrt(v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n)
}

/// Target score of one Particle Life genome as the particle count varies.
/// `counts` must be strictly increasing.
pub fn sweep_population<V: Evaluator + ?Sized>(
    evaluator: &V,
    base: &ParticleLifeConfig,
    counts: &[usize],
    theta: &Theta,
    targets: &TargetSchedule,
    spec: &RolloutSpec,
) -> Result<SweepReport> {
    if counts.is_empty() || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("particle counts must be strictly increasing"));
    }
    let mut scores = Vec::with_capacity(counts.len());
    for &n in counts {
        let sub = AnySubstrate::ParticleLife(ParticleLife::new(ParticleLifeConfig {
            particles: n,
            ..base.clone()
        })?);
        let embs = final_embeddings(evaluator, &sub, core::slice::from_ref(theta), spec)?;
        scores.push(target_score(&spec.capture_steps, &embs[0], targets)?);
    }
    Ok(SweepReport {
        axis_name: "particles".to_string(),
        axis: counts.iter().map(|&n| n as f64).collect(),
        scores,
        metadata: alloc::vec![
            ("substrate".to_string(), "particle_life".to_string()),
            ("seed".to_string(), spec.seed.to_string()),
        ],
    })
}

/// `‖e[k+1] - e[k]‖ / (step[k+1] - step[k])` for consecutive captures.
pub fn embedding_speed(embeddings: &[EmbeddingVector], capture_steps: &[usize]) -> Result<Vec<f64>> {
    if embeddings.len() != capture_steps.len() {
        return Err(Error::LengthMismatch { expected: capture_steps.len(), found: embeddings.len() });
    }
    let mut out = Vec::with_capacity(embeddings.len().saturating_sub(1));
    for k in 1..embeddings.len() {
        let (a, b) = (embeddings[k - 1].as_slice(), embeddings[k].as_slice());
        if a.len() != b.len() {
            return Err(Error::DimMismatch { left: a.len(), right: b.len() });
        }
        let dist = libm::sqrt(a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum());
        let dt = capture_steps[k].checked_sub(capture_steps[k - 1]).filter(|&d| d > 0);
        let dt = dt.ok_or(Error::InvalidArgument("capture steps must increase"))?;
        out.push(dist / dt as f64);
    }
    Ok(out)
}

/// First index `i` whose trailing mean over `speeds[i + 1 - window ..= i]`
/// (shorter at the start) is below `epsilon`.
pub fn detect_plateau(speeds: &[f64], window: usize, epsilon: f64) -> Option<usize> {
    let window = window.max(1);
    for i in 0..speeds.len() {
        let lo = (i + 1).saturating_sub(window);
        let mean = speeds[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
        if mean < epsilon {
            return Some(i);
        }
    }
    None
}
