//! The `asal` subcommands. Each writes a complete run directory.

pub mod atlas;
pub mod enumerate;
pub mod illuminate;
pub mod quantify;
pub mod target;

use std::path::{Path, PathBuf};

use asal_core::objectives::{PromptSchedule, TargetSchedule};
use asal_core::Embedder;

use crate::config::PromptEntry;
use crate::error::{AppError, Result};
use crate::imageio::read_png;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    pub resume: Option<PathBuf>,
    /// Progress lines on stderr.
    pub verbose: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { workers: 1, resume: None, verbose: false }
    }
}

impl RunOptions {
    pub(crate) fn progress(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

/// Embedded targets from prompts, or from a target image scored at
/// `final_step`.
pub fn embed_targets<E: Embedder + ?Sized>(
    embedder: &E,
    prompts: &[PromptEntry],
    target_image: Option<&Path>,
    final_step: usize,
) -> Result<TargetSchedule> {
    match target_image {
        Some(path) => {
            let frame = read_png(path)?;
            Ok(TargetSchedule { entries: vec![(final_step, embedder.embed_image(&frame)?)] })
        }
        None => {
            if prompts.is_empty() {
                return Err(AppError::config("prompts", "no prompts or target image"));
            }
            let schedule =
                PromptSchedule::new(prompts.iter().map(|p| (p.step, p.text.clone())).collect())?;
            Ok(schedule.embed(embedder)?)
        }
    }
}

/// Sorted distinct steps of a schedule.
pub fn schedule_steps(targets: &TargetSchedule) -> Vec<usize> {
    let mut steps: Vec<usize> = targets.steps().collect();
    steps.sort_unstable();
    steps.dedup();
    steps
}

/// `count` evenly spaced steps over `0..=total`, merged with `extra`.
pub fn frame_steps(total: usize, count: usize, extra: &[usize]) -> Vec<usize> {
    let mut steps: Vec<usize> = match count {
        0 => Vec::new(),
        1 => vec![total],
        _ => (0..count).map(|k| k * total / (count - 1)).collect(),
    };
    steps.extend_from_slice(extra);
    steps.sort_unstable();
    steps.dedup();
    steps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_steps_merge_and_dedup() {
        assert_eq!(frame_steps(10, 3, &[5, 7]), vec![0, 5, 7, 10]);
        assert_eq!(frame_steps(10, 1, &[]), vec![10]);
        assert_eq!(frame_steps(2, 8, &[]), vec![0, 1, 2]);
    }
}
