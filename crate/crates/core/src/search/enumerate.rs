//! Brute-force open-endedness scoring of Life-like CA rules.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::embedding::Embedder;
use crate::error::Result;
use crate::frame::Frame;
use crate::objectives::open_endedness_score;
use crate::rollout::{rollout, RolloutSpec};
use crate::substrate::lifelike_ca::{CaConfig, CaRule, LifelikeCa, RULE_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationSpec {
    pub ca: CaConfig,
    pub steps: usize,
    pub seeds: usize,
    /// Captures per rollout, evenly spaced over `0..=steps`.
    pub subsample: usize,
    /// Seed `s` of a rule uses `base_seed + s`.
    pub base_seed: u64,
}

impl EnumerationSpec {
    /// 32x32 grid, 128 steps, 4 seeds, 32 captures.
    pub fn desk() -> Self {
        EnumerationSpec {
            ca: CaConfig { width: 32, height: 32, render_size: 32, ..CaConfig::default() },
            steps: 128,
            seeds: 4,
            subsample: 32,
            base_seed: 0,
        }
    }

    /// 64x64 grid, 2048 steps, 256 seeds, 32 captures.
    pub fn paper() -> Self {
        EnumerationSpec {
            ca: CaConfig::default(),
            steps: 2048,
            seeds: 256,
            subsample: 32,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub rule: CaRule,
    pub mean_oe: f64,
    pub per_seed: Vec<f64>,
}

/// Open-endedness of one rule averaged over the spec's seeds.
pub fn evaluate_rule<E: Embedder + ?Sized>(
    rule: CaRule,
    spec: &EnumerationSpec,
    embedder: &E,
) -> Result<RuleRecord> {
    let ca = LifelikeCa::new(spec.ca.clone())?;
    let theta = LifelikeCa::theta(rule);
    let mut per_seed = Vec::with_capacity(spec.seeds);
    for s in 0..spec.seeds {
        let rs = RolloutSpec::subsampled(spec.steps, spec.subsample, spec.base_seed + s as u64)?;
        let traj = rollout(&ca, &theta, &rs)?;
        let frames: Vec<&Frame> = traj.frames.iter().collect();
        let embs = embedder.embed_images(&frames)?;
        per_seed.push(open_endedness_score(&embs)?);
    }
    let mean_oe = per_seed.iter().sum::<f64>() / per_seed.len().max(1) as f64;
    Ok(RuleRecord { rule, mean_oe, per_seed })
}

/// Every packed rule, in ascending order.
pub fn all_rules() -> impl Iterator<Item = CaRule> {
    (0..RULE_COUNT).map(|p| CaRule::from_packed(p).expect("in range"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationReport {
    pub records: Vec<RuleRecord>,
}

impl EnumerationReport {
    /// Sorts ascending by mean score (most open-ended first); equal scores
    /// order by packed rule.
    pub fn from_records(mut records: Vec<RuleRecord>) -> Self {
        records.sort_by(|a, b| {
            a.mean_oe.total_cmp(&b.mean_oe).then(a.rule.packed().cmp(&b.rule.packed()))
        });
        EnumerationReport { records }
    }

    /// Serial evaluation of `rules`.
    pub fn run<E: Embedder + ?Sized>(
        rules: impl IntoIterator<Item = CaRule>,
        spec: &EnumerationSpec,
        embedder: &E,
    ) -> Result<Self> {
        let records =
            rules.into_iter().map(|r| evaluate_rule(r, spec, embedder)).collect::<Result<_>>()?;
        Ok(Self::from_records(records))
    }

    /// Zero-based position of `rule`, if present.
    pub fn rank_of(&self, rule: CaRule) -> Option<usize> {
        self.records.iter().position(|r| r.rule == rule)
    }

    /// `rank,packed,notation,mean_oe,seed_0,...` with a header row. Reals use
    /// Rust's shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let seeds = self.records.first().map_or(0, |r| r.per_seed.len());
        let mut out = String::from("rank,packed,notation,mean_oe");
        for s in 0..seeds {
            let _ = write!(out, ",seed_{s}");
        }
        out.push('\n');
        for (rank, r) in self.records.iter().enumerate() {
            let _ = write!(out, "{rank},{},{},{:?}", r.rule.packed(), r.rule.to_notation(), r.mean_oe);
            for v in &r.per_seed {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }

    /// Histogram of mean scores over `bins` equal-width bins on `[-1, 1]`.
    pub fn histogram(&self, bins: usize) -> Vec<usize> {
        let mut h = alloc::vec![0; bins];
        for r in &self.records {
            let t = ((r.mean_oe + 1.0) / 2.0 * bins as f64) as isize;
            h[t.clamp(0, bins as isize - 1) as usize] += 1;
        }
        h
    }
}
