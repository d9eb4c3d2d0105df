//! Supervised target search: Sep-CMA-ES maximizing the target score.

use std::fmt::Write as _;

use asal_core::eval::Evaluator;
use asal_core::objectives::{target_score, TargetSchedule};
use asal_core::search::SepCmaState;
use asal_core::{AnySubstrate, Error, RolloutSpec, Theta};
use serde::{Deserialize, Serialize};

use super::{embed_targets, frame_steps, schedule_steps, RunOptions};
use crate::backend::build_embedder;
use crate::checkpoint;
use crate::config::{CommandKind, RunConfig};
use crate::error::{AppError, Result};
use crate::imageio::{line_plot, write_png};
use crate::parallel::ParallelEvaluator;
use crate::rundir::{write_text, RunDir};

/// Fitness given to a diverged candidate; worse than any negated score.
pub const DIVERGED_FITNESS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub generation: u64,
    pub evals: u64,
    pub best_so_far: f64,
    pub generation_best: f64,
    /// Over candidates that did not diverge; NaN when none survived.
    pub generation_mean: f64,
    pub diverged: usize,
}

pub fn rows_csv(rows: &[GenerationRow]) -> String {
    let mut out = String::from("generation,evals,best_so_far,generation_best,generation_mean,diverged\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:?},{:?},{:?},{}",
            r.generation, r.evals, r.best_so_far, r.generation_best, r.generation_mean, r.diverged
        );
    }
    out
}

/// The fixed parts of one target search.
pub struct TargetProblem<'a, V: ?Sized> {
    pub substrate: &'a AnySubstrate,
    pub evaluator: &'a V,
    pub targets: &'a TargetSchedule,
    /// Captures exactly the schedule steps; one init seed for the whole run.
    pub spec: RolloutSpec,
    pub population: usize,
    pub seed: u64,
}

impl<'a, V: Evaluator + ?Sized> TargetProblem<'a, V> {
    pub fn new(
        substrate: &'a AnySubstrate,
        evaluator: &'a V,
        targets: &'a TargetSchedule,
        steps: usize,
        population: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = RolloutSpec::new(steps, schedule_steps(targets), seed)?;
        Ok(TargetProblem { substrate, evaluator, targets, spec, population, seed })
    }

    /// Target score per genome; `None` for a diverged rollout.
    pub fn score(&self, thetas: &[Theta]) -> Result<Vec<Option<f64>>> {
        self.evaluator
            .evaluate(self.substrate, thetas, &self.spec)
            .into_iter()
            .map(|r| match r {
                Ok(embs) => Ok(Some(target_score(&self.spec.capture_steps, &embs, self.targets)?)),
                Err(Error::Diverged { .. }) => Ok(None),
                Err(e) => Err(e.into()),
            })
            .collect()
    }

    /// One ask/evaluate/tell round. `best` tracks the best genome seen.
    pub fn generation(
        &self,
        state: &mut SepCmaState,
        best: &mut Option<(Theta, f64)>,
        evals_before: u64,
    ) -> Result<GenerationRow> {
        let kind = self.substrate.kind();
        let xs = state.ask_seeded(self.seed, self.population);
        let thetas: Vec<Theta> = xs.iter().map(|x| Theta::real(kind, x.clone())).collect();
        let scores = self.score(&thetas)?;
        let fitness: Vec<f64> = scores.iter().map(|s| s.map_or(DIVERGED_FITNESS, |v| -v)).collect();
        let generation = state.generation;
        state.tell(&xs, &fitness)?;
        let ok: Vec<f64> = scores.iter().flatten().copied().collect();
        let mut generation_best = f64::NEG_INFINITY;
        for (theta, s) in thetas.into_iter().zip(&scores) {
            if let Some(s) = *s {
                generation_best = generation_best.max(s);
                if best.as_ref().is_none_or(|(_, b)| s > *b) {
                    *best = Some((theta, s));
                }
            }
        }
        Ok(GenerationRow {
            generation,
            evals: evals_before + self.population as u64,
            best_so_far: best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1),
            generation_best,
            generation_mean: if ok.is_empty() { f64::NAN } else { ok.iter().sum::<f64>() / ok.len() as f64 },
            diverged: scores.len() - ok.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCheckpoint {
    pub fingerprint: String,
    pub state: SepCmaState,
    pub best: Option<(Theta, f64)>,
    pub rows: Vec<GenerationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub generations: u64,
    pub evals: u64,
    pub best_score: f64,
    pub initial_score: Option<f64>,
}

/// Everything that must match for a checkpoint to be resumable.
fn fingerprint(config: &RunConfig) -> String {
    let mut t = config.target.clone();
    t.generations = 0;
    t.checkpoint_every = 0;
    t.frames = 0;
    serde_json::to_string(&(&config.substrate, &config.embedder, config.seed, &t)).expect("serializable")
}

pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<TargetSummary> {
    config.validate(CommandKind::Target)?;
    let t = &config.target;
    let substrate = AnySubstrate::from_config(&config.substrate)?;
    let embedder = build_embedder(&config.embedder)?;
    let evaluator = ParallelEvaluator::new(&*embedder, opts.workers)?;
    let targets = embed_targets(&*embedder, &t.prompts, t.target_image.as_deref(), t.steps)?;
    let problem = TargetProblem::new(&substrate, &evaluator, &targets, t.steps, t.population, config.seed)?;

    let run = RunDir::create(&config.output_dir)?;
    run.write_config(config)?;
    let fp = fingerprint(config);
    let init = t.init.resolve(&substrate)?;
    let initial_score = problem.score(std::slice::from_ref(&init))?[0];

    let (mut state, mut best, mut rows) = match &opts.resume {
        Some(path) => {
            let ck: TargetCheckpoint = checkpoint::load(path)?;
            if ck.fingerprint != fp {
                return Err(AppError::config("", "checkpoint was written by a different configuration"));
            }
            opts.progress(format!("resuming at generation {}", ck.state.generation));
            (ck.state, ck.best, ck.rows)
        }
        None => (SepCmaState::new(init.values().to_vec(), t.sigma)?, None, Vec::new()),
    };

    while state.generation < t.generations {
        let evals = rows.last().map_or(0, |r: &GenerationRow| r.evals);
        let row = problem.generation(&mut state, &mut best, evals)?;
        opts.progress(format!(
            "generation {} best {:.5} mean {:.5}",
            row.generation, row.best_so_far, row.generation_mean
        ));
        rows.push(row);
        if state.generation % t.checkpoint_every == 0 {
            let ck = TargetCheckpoint { fingerprint: fp.clone(), state: state.clone(), best: best.clone(), rows: rows.clone() };
            checkpoint::save(&run.checkpoint(state.generation), &ck)?;
            write_text(&run.scores(), &rows_csv(&rows))?;
        }
    }
    write_text(&run.scores(), &rows_csv(&rows))?;

    let (best_theta, best_score) = best.unwrap_or((init, initial_score.unwrap_or(f64::NEG_INFINITY)));
    run.write_genome(&best_theta)?;
    let steps = frame_steps(t.steps, t.frames, &problem.spec.capture_steps);
    let traj = substrate.rollout(&best_theta, &RolloutSpec::new(t.steps, steps, config.seed)?)?;
    for frame in &traj.frames {
        run.write_frame(frame)?;
    }
    let x: Vec<f64> = rows.iter().map(|r| r.generation as f64).collect();
    let best_curve: Vec<f64> = rows.iter().map(|r| r.best_so_far).collect();
    let mean_curve: Vec<f64> = rows.iter().map(|r| r.generation_mean).collect();
    write_png(&run.report("score_curve.png"), &line_plot(&x, &[&best_curve, &mean_curve], 320, 200))?;

    let summary = TargetSummary {
        generations: state.generation,
        evals: rows.last().map_or(0, |r| r.evals),
        best_score,
        initial_score,
    };
    run.write_summary(&summary)?;
    Ok(summary)
}
