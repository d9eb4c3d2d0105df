//! Interpolation curves, parameter importance, population sweeps and
//! plateau detection.

use std::fmt::Write as _;

use asal_core::eval::Evaluator;
use asal_core::quantify::{
    detect_plateau, embedding_speed, interpolate_curve, param_importance, sweep_population, SweepReport,
};
use asal_core::{AnySubstrate, RolloutSpec, SubstrateConfig};
use serde::{Deserialize, Serialize};

use super::{embed_targets, schedule_steps, RunOptions};
use crate::backend::build_embedder;
use crate::config::{CommandKind, QuantifyConfig, RunConfig};
use crate::error::{AppError, Result};
use crate::imageio::{bar_chart, line_plot, write_png};
use crate::parallel::ParallelEvaluator;
use crate::rundir::{write_text, RunDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "analysis", rename_all = "snake_case")]
pub enum QuantifySummary {
    Interpolate { scores: Vec<f64> },
    Importance { ranked: Vec<(usize, f64)> },
    SweepPopulation { counts: Vec<f64>, scores: Vec<f64> },
    Plateau { plateau_index: Option<usize>, plateau_step: Option<usize>, captures: usize },
}

/// `rank,dim,std`, most influential first.
pub fn importance_csv(ranked: &[(usize, f64)]) -> String {
    let mut out = String::from("rank,dim,std\n");
    for (rank, (d, s)) in ranked.iter().enumerate() {
        let _ = writeln!(out, "{rank},{d},{s:?}");
    }
    out
}

/// `index,step,speed`, where `step` is the later capture of each pair.
pub fn speed_csv(speeds: &[f64], capture_steps: &[usize]) -> String {
    let mut out = String::from("index,step,speed\n");
    for (i, s) in speeds.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{s:?}", capture_steps[i + 1]);
    }
    out
}

fn write_sweep(run: &RunDir, report: &SweepReport, plot: &str) -> Result<()> {
    write_text(&run.scores(), &report.to_csv())?;
    write_png(&run.report(plot), &line_plot(&report.axis, &[&report.scores], 320, 200))
}

pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<QuantifySummary> {
    config.validate(CommandKind::Quantify)?;
    let substrate = AnySubstrate::from_config(&config.substrate)?;
    let embedder = build_embedder(&config.embedder)?;
    let evaluator = ParallelEvaluator::new(&*embedder, opts.workers)?;
    let run = RunDir::create(&config.output_dir)?;
    run.write_config(config)?;
    let seed = config.seed;
    opts.progress(format!("quantify: {}", config.quantify.analysis()));

    let summary = match &config.quantify {
        QuantifyConfig::Interpolate { a, b, points, reference, steps } => {
            let (a, b) = (a.resolve(&substrate)?, b.resolve(&substrate)?);
            let spec = RolloutSpec::final_only(*steps, seed);
            let report = interpolate_curve(&evaluator, &substrate, &a, &b, *points, *reference, &spec)?;
            write_sweep(&run, &report, "interpolation.png")?;
            QuantifySummary::Interpolate { scores: report.scores }
        }
        QuantifyConfig::Importance { theta, prompts, target_image, steps, deltas, dims } => {
            let theta = theta.resolve(&substrate)?;
            let targets = embed_targets(&*embedder, prompts, target_image.as_deref(), *steps)?;
            let spec = RolloutSpec::new(*steps, schedule_steps(&targets), seed)?;
            let ranked =
                param_importance(&evaluator, &substrate, &theta, &targets, deltas, dims.as_deref(), &spec)?;
            write_text(&run.scores(), &importance_csv(&ranked))?;
            let stds: Vec<f64> = ranked.iter().map(|r| r.1).collect();
            write_png(&run.report("importance.png"), &bar_chart(&stds, 320, 200))?;
            QuantifySummary::Importance { ranked }
        }
        QuantifyConfig::SweepPopulation { theta, counts, prompts, target_image, steps } => {
            let SubstrateConfig::ParticleLife(base) = &config.substrate else {
                return Err(AppError::config("substrate.kind", "population sweeps need particle_life"));
            };
            let theta = theta.resolve(&substrate)?;
            let targets = embed_targets(&*embedder, prompts, target_image.as_deref(), *steps)?;
            let spec = RolloutSpec::new(*steps, schedule_steps(&targets), seed)?;
            let report = sweep_population(&evaluator, base, counts, &theta, &targets, &spec)?;
            write_sweep(&run, &report, "population_sweep.png")?;
            QuantifySummary::SweepPopulation { counts: report.axis, scores: report.scores }
        }
        QuantifyConfig::Plateau { theta, steps, window, epsilon } => {
            let theta = theta.resolve(&substrate)?;
            let spec = RolloutSpec::every_step(*steps, seed);
            let embs = evaluator.evaluate(&substrate, std::slice::from_ref(&theta), &spec).remove(0)?;
            let speeds = embedding_speed(&embs, &spec.capture_steps)?;
            let plateau = detect_plateau(&speeds, *window, *epsilon);
            write_text(&run.scores(), &speed_csv(&speeds, &spec.capture_steps))?;
            let x: Vec<f64> = (0..speeds.len()).map(|i| i as f64).collect();
            write_png(&run.report("speed.png"), &line_plot(&x, &[&speeds], 320, 200))?;
            run.write_genome(&theta)?;
            QuantifySummary::Plateau {
                plateau_index: plateau,
                plateau_step: plateau.map(|i| spec.capture_steps[i + 1]),
                captures: spec.capture_steps.len(),
            }
        }
    };
    run.write_summary(&summary)?;
    Ok(summary)
}
