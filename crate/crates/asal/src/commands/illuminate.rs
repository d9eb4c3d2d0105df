//! Illumination: the nearest-neighbour diversity GA.

use std::fmt::Write as _;

use asal_core::eval::Evaluator;
use asal_core::rng::{make_rng, standard_normal, STREAM_GENOME};
use asal_core::search::{ga_step, Archive, GaConfig};
use asal_core::{AnySubstrate, EmbeddingVector, Error, RolloutSpec, Theta};
use serde::{Deserialize, Serialize};

use super::atlas::write_atlas;
use super::RunOptions;
use crate::backend::build_embedder;
use crate::checkpoint;
use crate::config::{ArchiveInit, CommandKind, IlluminateConfig, RunConfig};
use crate::error::{AppError, Result};
use crate::imageio::{line_plot, write_png};
use crate::parallel::ParallelEvaluator;
use crate::rundir::{write_text, RunDir};

pub const ARCHIVE_FILE: &str = "archive.bin";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityRow {
    pub iteration: u64,
    pub diversity: f64,
    pub attempts: usize,
    pub diverged: usize,
}

pub fn rows_csv(rows: &[DiversityRow]) -> String {
    let mut out = String::from("iteration,diversity,attempts,diverged\n");
    for r in rows {
        let _ = writeln!(out, "{},{:?},{},{}", r.iteration, r.diversity, r.attempts, r.diverged);
    }
    out
}

pub fn rollout_spec(g: &IlluminateConfig, seed: u64) -> Result<RolloutSpec> {
    Ok(if g.captures == 1 {
        RolloutSpec::final_only(g.steps, seed)
    } else {
        RolloutSpec::subsampled(g.steps, g.captures, seed)?
    })
}

pub fn ga_config(g: &IlluminateConfig) -> GaConfig {
    GaConfig { batch: g.batch, sigma: g.sigma, max_divergence_fraction: g.max_divergence_fraction }
}

/// A full archive from `init`. Random genomes whose rollouts diverge are
/// replaced by fresh draws; more than `capacity` divergences is an error.
pub fn initial_archive<V: Evaluator + ?Sized>(
    init: &ArchiveInit,
    capacity: usize,
    substrate: &AnySubstrate,
    evaluator: &V,
    spec: &RolloutSpec,
    seed: u64,
) -> Result<Archive> {
    let kind = substrate.kind();
    let dim = substrate.genome_dim();
    match init {
        ArchiveInit::Zeros => {
            let theta = Theta::real(kind, vec![0.0; dim]);
            let embs = evaluator.evaluate(substrate, std::slice::from_ref(&theta), spec).remove(0)?;
            Ok(Archive::filled(capacity, theta, embs)?)
        }
        ArchiveInit::Random { scale } => {
            let mut rng = make_rng(seed, STREAM_GENOME);
            let mut entries: Vec<(Theta, Vec<EmbeddingVector>)> = Vec::with_capacity(capacity);
            let (mut attempts, mut diverged) = (0, 0);
            while entries.len() < capacity {
                let thetas: Vec<Theta> = (0..capacity - entries.len())
                    .map(|_| Theta::real(kind, (0..dim).map(|_| scale * standard_normal(&mut rng)).collect()))
                    .collect();
                for (theta, r) in thetas.iter().zip(evaluator.evaluate(substrate, &thetas, spec)) {
                    attempts += 1;
                    match r {
                        Ok(embs) => entries.push((theta.clone(), embs)),
                        Err(Error::Diverged { .. }) => diverged += 1,
                        Err(e) => return Err(e.into()),
                    }
                }
                if diverged > capacity {
                    return Err(Error::DivergenceBudget { diverged, attempts }.into());
                }
            }
            Ok(Archive::new(capacity, entries)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminateCheckpoint {
    pub fingerprint: String,
    pub archive: Archive,
    pub initial_diversity: f64,
    pub rows: Vec<DiversityRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminateSummary {
    pub iterations: u64,
    pub capacity: usize,
    pub initial_diversity: f64,
    pub final_diversity: f64,
}

fn fingerprint(config: &RunConfig) -> String {
    let mut g = config.illuminate.clone();
    g.iterations = 0;
    g.log_every = 0;
    g.checkpoint_every = 0;
    g.atlas_grid = [0, 0];
    g.atlas_tile = 0;
    serde_json::to_string(&(&config.substrate, &config.embedder, config.seed, &g)).expect("serializable")
}

pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<IlluminateSummary> {
    config.validate(CommandKind::Illuminate)?;
    let g = &config.illuminate;
    let substrate = AnySubstrate::from_config(&config.substrate)?;
    let embedder = build_embedder(&config.embedder)?;
    let evaluator = ParallelEvaluator::new(&*embedder, opts.workers)?;
    let spec = rollout_spec(g, config.seed)?;
    let run = RunDir::create(&config.output_dir)?;
    run.write_config(config)?;
    let fp = fingerprint(config);

    let (mut archive, initial_diversity, mut rows) = match &opts.resume {
        Some(path) => {
            let ck: IlluminateCheckpoint = checkpoint::load(path)?;
            if ck.fingerprint != fp {
                return Err(AppError::config("", "checkpoint was written by a different configuration"));
            }
            opts.progress(format!("resuming at iteration {}", ck.archive.iteration));
            (ck.archive, ck.initial_diversity, ck.rows)
        }
        None => {
            let a = initial_archive(&g.init, g.capacity, &substrate, &evaluator, &spec, config.seed)?;
            let d = a.diversity()?;
            (a, d, Vec::new())
        }
    };

    let ga = ga_config(g);
    while archive.iteration < g.iterations {
        let stats = ga_step(&mut archive, &substrate, &evaluator, &spec, &ga, config.seed).map_err(|e| {
            if let Error::DivergenceBudget { diverged, attempts } = e {
                opts.progress(format!(
                    "aborting at iteration {}: {diverged} of {attempts} mutants diverged",
                    archive.iteration
                ));
            }
            AppError::from(e)
        })?;
        if stats.iteration % g.log_every == 0 {
            rows.push(DiversityRow {
                iteration: stats.iteration,
                diversity: stats.diversity,
                attempts: stats.attempts,
                diverged: stats.diverged,
            });
            opts.progress(format!("iteration {} diversity {:.5}", stats.iteration, stats.diversity));
        }
        if stats.iteration % g.checkpoint_every == 0 {
            let ck = IlluminateCheckpoint {
                fingerprint: fp.clone(),
                archive: archive.clone(),
                initial_diversity,
                rows: rows.clone(),
            };
            checkpoint::save(&run.checkpoint(stats.iteration), &ck)?;
        }
    }

    write_text(&run.scores(), &rows_csv(&rows))?;
    checkpoint::save(&run.root().join(ARCHIVE_FILE), &archive)?;
    let x: Vec<f64> = rows.iter().map(|r| r.iteration as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.diversity).collect();
    write_png(&run.report("diversity.png"), &line_plot(&x, &[&y], 320, 200))?;
    write_atlas(&run, &archive, &substrate, g.steps, config.seed, g.atlas_grid, g.atlas_tile)?;

    let summary = IlluminateSummary {
        iterations: archive.iteration,
        capacity: archive.len(),
        initial_diversity,
        final_diversity: archive.diversity()?,
    };
    run.write_summary(&summary)?;
    Ok(summary)
}
