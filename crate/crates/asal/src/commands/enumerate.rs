//! Brute-force open-endedness ranking of Life-like rules.

use std::fmt::Write as _;

use asal_core::search::{all_rules, EnumerationReport, EnumerationSpec, RuleRecord};
use asal_core::substrate::lifelike_ca::{rule_from_notation, CaRule, LifelikeCa};
use asal_core::{rollout, Frame, RolloutSpec, SubstrateConfig};
use serde::{Deserialize, Serialize};

use super::RunOptions;
use crate::backend::build_embedder;
use crate::checkpoint;
use crate::config::{CommandKind, RunConfig};
use crate::error::{AppError, Result};
use crate::imageio::{bar_chart, strip, write_png};
use crate::parallel::{pool, score_rules};
use crate::rundir::{write_text, RunDir};

pub const HISTOGRAM_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationCheckpoint {
    pub fingerprint: String,
    pub chunks_done: usize,
    pub records: Vec<RuleRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationSummary {
    pub rules: usize,
    /// `(notation, mean score)`, most open-ended first.
    pub top: Vec<(String, f64)>,
}

pub fn spec_of(config: &RunConfig) -> Result<EnumerationSpec> {
    let SubstrateConfig::LifelikeCa(ca) = &config.substrate else {
        return Err(AppError::config("substrate.kind", "enumeration needs lifelike_ca"));
    };
    let e = &config.enumerate;
    Ok(EnumerationSpec {
        ca: ca.clone(),
        steps: e.steps,
        seeds: e.seeds,
        subsample: e.subsample,
        base_seed: e.base_seed,
    })
}

pub fn rules_of(config: &RunConfig) -> Result<Vec<CaRule>> {
    match &config.enumerate.rules {
        None => Ok(all_rules().collect()),
        Some(list) => list
            .iter()
            .map(|r| rule_from_notation(r).map_err(AppError::from))
            .collect(),
    }
}

fn fingerprint(config: &RunConfig) -> String {
    let mut e = config.enumerate.clone();
    e.checkpoint_every = 0;
    e.top_k = 0;
    e.strip_frames = 0;
    serde_json::to_string(&(&config.substrate, &config.embedder, &e)).expect("serializable")
}

/// `bin_lo,bin_hi,count` over equal bins of `[-1, 1]`.
pub fn histogram_csv(counts: &[usize]) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    let w = 2.0 / counts.len() as f64;
    for (i, c) in counts.iter().enumerate() {
        let _ = writeln!(out, "{:?},{:?},{c}", -1.0 + i as f64 * w, -1.0 + (i + 1) as f64 * w);
    }
    out
}

pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<EnumerationSummary> {
    config.validate(CommandKind::Enumerate)?;
    let spec = spec_of(config)?;
    let rules = rules_of(config)?;
    let embedder = build_embedder(&config.embedder)?;
    let workers = pool(opts.workers)?;
    let run = RunDir::create(&config.output_dir)?;
    run.write_config(config)?;
    let fp = fingerprint(config);
    let e = &config.enumerate;

    let (mut chunks_done, mut records) = match &opts.resume {
        Some(path) => {
            let ck: EnumerationCheckpoint = checkpoint::load(path)?;
            if ck.fingerprint != fp {
                return Err(AppError::config("", "checkpoint was written by a different configuration"));
            }
            (ck.chunks_done, ck.records)
        }
        None => (0, Vec::with_capacity(rules.len())),
    };
    let chunks: Vec<&[CaRule]> = rules.chunks(e.chunk).collect();
    while chunks_done < chunks.len() {
        records.extend(score_rules(&workers, chunks[chunks_done], &spec, &*embedder)?);
        chunks_done += 1;
        opts.progress(format!("{} / {} rules", records.len(), rules.len()));
        if chunks_done % e.checkpoint_every == 0 && chunks_done < chunks.len() {
            let ck = EnumerationCheckpoint { fingerprint: fp.clone(), chunks_done, records: records.clone() };
            checkpoint::save(&run.checkpoint(chunks_done as u64), &ck)?;
        }
    }

    let report = EnumerationReport::from_records(records);
    write_text(&run.scores(), &report.to_csv())?;
    let hist = report.histogram(HISTOGRAM_BINS);
    write_text(&run.report("oe_histogram.csv"), &histogram_csv(&hist))?;
    let hist_f: Vec<f64> = hist.iter().map(|&c| c as f64).collect();
    write_png(&run.report("oe_histogram.png"), &bar_chart(&hist_f, 320, 200))?;

    let ca = LifelikeCa::new(spec.ca.clone())?;
    let strip_spec = RolloutSpec::subsampled(e.steps, e.strip_frames.max(1), e.base_seed)?;
    let tile = spec.ca.render_size.max(1);
    let top: Vec<&RuleRecord> = report.records.iter().take(e.top_k).collect();
    for (rank, r) in top.iter().enumerate() {
        let traj = rollout(&ca, &LifelikeCa::theta(r.rule), &strip_spec)?;
        let frames: Vec<&Frame> = traj.frames.iter().collect();
        write_png(&run.report(&format!("top_{rank:02}.png")), &strip(&frames, tile))?;
    }
    if let Some(first) = top.first() {
        run.write_genome(&LifelikeCa::theta(first.rule))?;
    }
    let summary = EnumerationSummary {
        rules: report.records.len(),
        top: top.iter().map(|r| (r.rule.to_notation(), r.mean_oe)).collect(),
    };
    run.write_summary(&summary)?;
    Ok(summary)
}
