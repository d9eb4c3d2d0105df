//! Run directory layout:
//!
//! ```text
//! config.json           resolved configuration
//! scores.csv            per-generation or per-rule scores
//! summary.json          headline numbers
//! best/genome.json
//! frames/step_00000.png
//! checkpoint_000010.bin
//! report/*.png, report/*.csv
//! ```

use std::path::{Path, PathBuf};

use asal_core::{Frame, Theta};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{AppError, Result};
use crate::imageio::write_png;

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self> {
        for sub in ["", "best", "frames", "report"] {
            let p = root.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| AppError::io(&p, e))?;
        }
        Ok(RunDir { root: root.to_path_buf() })
    }

    pub fn open(root: &Path) -> Self {
        RunDir { root: root.to_path_buf() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn scores(&self) -> PathBuf {
        self.root.join("scores.csv")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.json")
    }

    pub fn best_genome(&self) -> PathBuf {
        self.root.join("best").join("genome.json")
    }

    pub fn frame(&self, step: usize) -> PathBuf {
        self.root.join("frames").join(format!("step_{step:05}.png"))
    }

    pub fn checkpoint(&self, index: u64) -> PathBuf {
        self.root.join(format!("checkpoint_{index:06}.bin"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("report").join(name)
    }

    /// Checkpoint with the highest index, if any.
    pub fn latest_checkpoint(&self) -> Option<PathBuf> {
        let mut found: Vec<PathBuf> = std::fs::read_dir(&self.root)
            .ok()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name().and_then(|n| n.to_str()).is_some_and(|n| {
                    n.starts_with("checkpoint_") && n.ends_with(".bin")
                })
            })
            .collect();
        found.sort();
        found.pop()
    }

    pub fn write_config(&self, config: &RunConfig) -> Result<()> {
        write_text(&self.config(), &config.to_json())
    }

    pub fn write_genome(&self, theta: &Theta) -> Result<()> {
        write_json(&self.best_genome(), theta)
    }

    pub fn write_summary<T: Serialize>(&self, summary: &T) -> Result<()> {
        write_json(&self.summary(), summary)
    }

    pub fn write_frame(&self, frame: &Frame) -> Result<()> {
        write_png(&self.frame(frame.step_index), frame)
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_names() {
        let dir = tempfile::tempdir().unwrap();
        let run = RunDir::create(&dir.path().join("r")).unwrap();
        assert!(run.root().join("frames").is_dir() && run.root().join("report").is_dir());
        assert!(run.frame(42).ends_with("frames/step_00042.png"));
        assert!(run.checkpoint(7).ends_with("checkpoint_000007.bin"));
        assert_eq!(run.latest_checkpoint(), None);
        for i in [3, 12, 9] {
            std::fs::write(run.checkpoint(i), b"x").unwrap();
        }
        assert_eq!(run.latest_checkpoint(), Some(run.checkpoint(12)));
    }
}
