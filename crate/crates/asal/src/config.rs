//! Run configuration: presets, JSON overlay and validation.
//!
//! A user file is merged over the preset's defaults object by object, so a
//! config only needs the fields it changes. Choosing a different substrate
//! `kind`, embedder `backend` or quantify `analysis` swaps in that variant's
//! defaults before merging.

use std::path::{Path, PathBuf};

use asal_core::quantify::{Endpoint, DEFAULT_DELTAS};
use asal_core::rng::{below, make_rng, standard_normal, STREAM_GENOME};
use asal_core::substrate::lifelike_ca::{rule_from_notation, LifelikeCa, RULE_COUNT};
use asal_core::{AnySubstrate, SubstrateConfig, SubstrateKind, Theta};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Small grids, short rollouts, pixel embedder.
    Desk,
    /// Full-size constants, sidecar embedder.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Target,
    Enumerate,
    Illuminate,
    Quantify,
    Atlas,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Target => "target",
            CommandKind::Enumerate => "enumerate",
            CommandKind::Illuminate => "illuminate",
            CommandKind::Quantify => "quantify",
            CommandKind::Atlas => "atlas",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderConfig {
    Pixel {
        side: usize,
    },
    Sidecar {
        /// Falls back to the `ASAL_SIDECAR` environment variable.
        address: Option<String>,
        cache: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptEntry {
    pub step: usize,
    pub text: String,
}

/// Where a genome comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenomeSource {
    /// The substrate's built-in genome.
    Default,
    Zeros,
    /// `scale * N(0, 1)` per value; a uniformly random rule for the CA.
    Random { seed: u64, scale: f64 },
    /// A `genome.json` written by an earlier run.
    File(PathBuf),
    /// Life-like rule notation such as `B3/S23`.
    Rule(String),
    Values(Vec<f64>),
}

impl GenomeSource {
    pub fn resolve(&self, substrate: &AnySubstrate) -> Result<Theta> {
        let kind = substrate.kind();
        let dim = substrate.genome_dim();
        let theta = match self {
            GenomeSource::Default => substrate.default_theta(),
            GenomeSource::Zeros if kind == SubstrateKind::LifelikeCa => substrate.default_theta(),
            GenomeSource::Zeros => Theta::real(kind, vec![0.0; dim]),
            GenomeSource::Random { seed, .. } if kind == SubstrateKind::LifelikeCa => {
                let mut rng = make_rng(*seed, STREAM_GENOME);
                Theta::bits(kind, below(&mut rng, RULE_COUNT as usize) as u64, dim as u32)
            }
            GenomeSource::Random { seed, scale } => {
                let mut rng = make_rng(*seed, STREAM_GENOME);
                Theta::real(kind, (0..dim).map(|_| scale * standard_normal(&mut rng)).collect())
            }
            GenomeSource::File(path) => read_genome(path)?,
            GenomeSource::Rule(text) => {
                if kind != SubstrateKind::LifelikeCa {
                    return Err(AppError::config("substrate.kind", "rule genomes need lifelike_ca"));
                }
                LifelikeCa::theta(rule_from_notation(text)?)
            }
            GenomeSource::Values(v) => Theta::real(kind, v.clone()),
        };
        theta.validate(kind, dim)?;
        Ok(theta)
    }
}

pub fn read_genome(path: &Path) -> Result<Theta> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::format(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub steps: usize,
    pub prompts: Vec<PromptEntry>,
    /// PNG scored against the final step, instead of prompts.
    pub target_image: Option<PathBuf>,
    pub population: usize,
    pub generations: u64,
    /// Initial Sep-CMA-ES step size.
    pub sigma: f64,
    pub init: GenomeSource,
    pub checkpoint_every: u64,
    /// Evenly spaced frames saved from the best genome's rollout.
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerateConfig {
    pub steps: usize,
    pub seeds: usize,
    pub subsample: usize,
    pub base_seed: u64,
    pub top_k: usize,
    pub strip_frames: usize,
    /// Rule notations to score; every rule when absent.
    pub rules: Option<Vec<String>>,
    /// Rules per work unit.
    pub chunk: usize,
    /// Checkpoint after this many chunks.
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchiveInit {
    /// Every member starts as the all-zeros genome.
    Zeros,
    /// Independent `scale * N(0, 1)` genomes.
    Random { scale: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlluminateConfig {
    pub capacity: usize,
    pub iterations: u64,
    pub batch: usize,
    pub sigma: f64,
    pub max_divergence_fraction: f64,
    pub steps: usize,
    /// 1 compares final frames only; more averages similarity over evenly
    /// spaced captures.
    pub captures: usize,
    pub init: ArchiveInit,
    pub log_every: u64,
    pub checkpoint_every: u64,
    pub atlas_grid: [usize; 2],
    pub atlas_tile: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "analysis", rename_all = "snake_case", deny_unknown_fields)]
pub enum QuantifyConfig {
    Interpolate {
        a: GenomeSource,
        b: GenomeSource,
        points: usize,
        reference: Endpoint,
        steps: usize,
    },
    Importance {
        theta: GenomeSource,
        prompts: Vec<PromptEntry>,
        target_image: Option<PathBuf>,
        steps: usize,
        deltas: Vec<f64>,
        dims: Option<Vec<usize>>,
    },
    SweepPopulation {
        theta: GenomeSource,
        counts: Vec<usize>,
        prompts: Vec<PromptEntry>,
        target_image: Option<PathBuf>,
        steps: usize,
    },
    Plateau {
        theta: GenomeSource,
        steps: usize,
        window: usize,
        epsilon: f64,
    },
}

impl QuantifyConfig {
    pub fn analysis(&self) -> &'static str {
        match self {
            QuantifyConfig::Interpolate { .. } => "interpolate",
            QuantifyConfig::Importance { .. } => "importance",
            QuantifyConfig::SweepPopulation { .. } => "sweep_population",
            QuantifyConfig::Plateau { .. } => "plateau",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtlasConfig {
    /// An illumination run directory.
    pub run_dir: Option<PathBuf>,
    pub grid_w: usize,
    pub grid_h: usize,
    pub tile: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Preset,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub substrate: SubstrateConfig,
    pub embedder: EmbedderConfig,
    pub target: TargetConfig,
    pub enumerate: EnumerateConfig,
    pub illuminate: IlluminateConfig,
    pub quantify: QuantifyConfig,
    pub atlas: AtlasConfig,
}

/// Rollout length per substrate.
pub fn default_steps(preset: Preset, kind: SubstrateKind) -> usize {
    match (preset, kind) {
        (Preset::Desk, SubstrateKind::LifelikeCa) => 128,
        (Preset::Desk, SubstrateKind::Lenia) => 256,
        (Preset::Desk, SubstrateKind::Boids) => 64,
        (Preset::Desk, SubstrateKind::ParticleLife) => 128,
        (Preset::Desk, SubstrateKind::Nca) => 64,
        (Preset::Paper, SubstrateKind::LifelikeCa) => 2048,
        (Preset::Paper, SubstrateKind::Lenia) => 256,
        (Preset::Paper, SubstrateKind::Boids) => 1000,
        (Preset::Paper, SubstrateKind::ParticleLife) => 1000,
        (Preset::Paper, SubstrateKind::Nca) => 256,
    }
}

/// Variant choices read from a user file before defaults are built.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Variants {
    pub kind: Option<SubstrateKind>,
    pub backend: Option<String>,
    pub analysis: Option<String>,
}

impl Variants {
    fn read(user: &Value) -> Result<Self> {
        let tag = |section: &str, key: &str| -> Result<Option<String>> {
            match user.get(section).and_then(|s| s.get(key)) {
                None => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(AppError::config(format!("{section}.{key}"), "expected a string")),
            }
        };
        let kind = match tag("substrate", "kind")? {
            None => None,
            Some(k) => Some(
                serde_json::from_value(Value::String(k.clone()))
                    .map_err(|_| AppError::config("substrate.kind", format!("unknown substrate `{k}`")))?,
            ),
        };
        Ok(Variants { kind, backend: tag("embedder", "backend")?, analysis: tag("quantify", "analysis")? })
    }
}

impl RunConfig {
    /// Complete defaults for `command` under `preset`.
    pub fn preset(command: CommandKind, preset: Preset, variants: &Variants) -> RunConfig {
        let analysis = variants.analysis.as_deref().unwrap_or("plateau");
        let kind = variants.kind.unwrap_or(match command {
            CommandKind::Target => SubstrateKind::Lenia,
            CommandKind::Enumerate => SubstrateKind::LifelikeCa,
            CommandKind::Illuminate | CommandKind::Atlas => SubstrateKind::Boids,
            CommandKind::Quantify => match analysis {
                "interpolate" | "importance" => SubstrateKind::Lenia,
                "sweep_population" => SubstrateKind::ParticleLife,
                _ => SubstrateKind::LifelikeCa,
            },
        });
        let desk = preset == Preset::Desk;
        let steps = default_steps(preset, kind);
        let substrate =
            if desk { SubstrateConfig::desk_default(kind) } else { SubstrateConfig::paper_default(kind) };
        let backend = variants.backend.as_deref().unwrap_or(if desk { "pixel" } else { "sidecar" });
        let embedder = if backend == "sidecar" {
            EmbedderConfig::Sidecar { address: None, cache: true }
        } else {
            EmbedderConfig::Pixel { side: 8 }
        };
        let quantify = match analysis {
            "interpolate" => QuantifyConfig::Interpolate {
                a: GenomeSource::Default,
                b: GenomeSource::Random { seed: 1, scale: 0.1 },
                points: if desk { 11 } else { 33 },
                reference: Endpoint::A,
                steps,
            },
            "importance" => QuantifyConfig::Importance {
                theta: GenomeSource::Default,
                prompts: Vec::new(),
                target_image: None,
                steps,
                deltas: DEFAULT_DELTAS.to_vec(),
                dims: None,
            },
            "sweep_population" => QuantifyConfig::SweepPopulation {
                theta: GenomeSource::Random { seed: 0, scale: 1.0 },
                counts: if desk { vec![100, 200, 400, 800] } else { vec![250, 500, 1000, 2000, 4000, 8000] },
                prompts: Vec::new(),
                target_image: None,
                steps,
            },
            _ => QuantifyConfig::Plateau {
                theta: GenomeSource::Rule("B3/S012345678".into()),
                steps,
                window: 4,
                epsilon: 1e-6,
            },
        };
        RunConfig {
            preset,
            seed: 0,
            output_dir: PathBuf::from("runs").join(command.name()),
            substrate,
            embedder,
            target: TargetConfig {
                steps,
                prompts: Vec::new(),
                target_image: None,
                population: 16,
                generations: if desk { 32 } else { 10_000 },
                sigma: 0.1,
                init: GenomeSource::Default,
                checkpoint_every: if desk { 8 } else { 100 },
                frames: 8,
            },
            enumerate: EnumerateConfig {
                steps: if desk { 128 } else { 2048 },
                seeds: if desk { 4 } else { 256 },
                subsample: 32,
                base_seed: 0,
                top_k: 8,
                strip_frames: 8,
                rules: None,
                chunk: 4096,
                checkpoint_every: 8,
            },
            illuminate: IlluminateConfig {
                capacity: if desk { 256 } else { 8192 },
                iterations: if desk { 500 } else { 100_000 },
                batch: 32,
                sigma: 0.1,
                max_divergence_fraction: 0.5,
                steps,
                captures: 1,
                init: ArchiveInit::Zeros,
                log_every: if desk { 10 } else { 100 },
                checkpoint_every: if desk { 50 } else { 1000 },
                atlas_grid: if desk { [8, 8] } else { [32, 32] },
                atlas_tile: if desk { 32 } else { 64 },
            },
            quantify,
            atlas: AtlasConfig { run_dir: None, grid_w: 8, grid_h: 8, tile: 32 },
        }
    }

    /// Merges `user` (a JSON object, possibly empty) over the preset and
    /// validates the result for `command`. `preset` overrides the file's
    /// `preset` field.
    pub fn resolve(command: CommandKind, preset: Option<Preset>, user: &Value) -> Result<RunConfig> {
        if !user.is_object() {
            return Err(AppError::config("", "config must be a JSON object"));
        }
        let preset = match preset {
            Some(p) => p,
            None => match user.get("preset") {
                None => Preset::Desk,
                Some(v) => serde_json::from_value(v.clone())
                    .map_err(|_| AppError::config("preset", "expected `desk` or `paper`"))?,
            },
        };
        let variants = Variants::read(user)?;
        let mut merged =
            serde_json::to_value(RunConfig::preset(command, preset, &variants)).expect("serializable");
        merge(&mut merged, user);
        merged["preset"] = serde_json::to_value(preset).expect("serializable");
        let config: RunConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            let path = e.path().to_string();
            AppError::config(if path == "." { String::new() } else { path }, e.inner().to_string())
        })?;
        config.validate(command)?;
        Ok(config)
    }

    pub fn from_json_str(command: CommandKind, preset: Option<Preset>, text: &str) -> Result<RunConfig> {
        let user: Value = serde_json::from_str(text).map_err(|e| AppError::config("", e.to_string()))?;
        Self::resolve(command, preset, &user)
    }

    pub fn load(command: CommandKind, preset: Option<Preset>, path: Option<&Path>) -> Result<RunConfig> {
        match path {
            None => Self::resolve(command, preset, &Value::Object(Default::default())),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| AppError::io(p, e))?;
                Self::from_json_str(command, preset, &text).map_err(|e| match e {
                    AppError::Config { path, message } if path.is_empty() => {
                        AppError::format(p, message)
                    }
                    other => other,
                })
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    pub fn validate(&self, command: CommandKind) -> Result<()> {
        let kind = self.substrate.kind();
        let real_genome = |path: &str| {
            if kind == SubstrateKind::LifelikeCa {
                Err(AppError::config(path, "this command needs a real-valued genome, not lifelike_ca"))
            } else {
                Ok(())
            }
        };
        if let EmbedderConfig::Pixel { side } = self.embedder {
            if side == 0 {
                return Err(AppError::config("embedder.side", "must be positive"));
            }
        }
        match command {
            CommandKind::Target => {
                let t = &self.target;
                real_genome("substrate.kind")?;
                positive("target.steps", t.steps)?;
                self.check_objective("target", &t.prompts, &t.target_image, t.steps)?;
                if t.population < 2 {
                    return Err(AppError::config("target.population", "must be at least 2"));
                }
                positive_real("target.sigma", t.sigma)?;
                positive("target.checkpoint_every", t.checkpoint_every as usize)?;
                positive("target.frames", t.frames)?;
            }
            CommandKind::Enumerate => {
                let e = &self.enumerate;
                if kind != SubstrateKind::LifelikeCa {
                    return Err(AppError::config("substrate.kind", "enumeration needs lifelike_ca"));
                }
                positive("enumerate.seeds", e.seeds)?;
                if e.subsample < 2 || e.subsample > e.steps + 1 {
                    return Err(AppError::config("enumerate.subsample", "must be in 2..=steps+1"));
                }
                if e.strip_frames == 0 || e.strip_frames > e.steps + 1 {
                    return Err(AppError::config("enumerate.strip_frames", "must be in 1..=steps+1"));
                }
                positive("enumerate.chunk", e.chunk)?;
                positive("enumerate.checkpoint_every", e.checkpoint_every)?;
                if let Some(rules) = &e.rules {
                    for (i, r) in rules.iter().enumerate() {
                        rule_from_notation(r)
                            .map_err(|err| AppError::config(format!("enumerate.rules[{i}]"), err.to_string()))?;
                    }
                }
            }
            CommandKind::Illuminate => {
                let g = &self.illuminate;
                real_genome("substrate.kind")?;
                if g.capacity < 3 {
                    return Err(AppError::config("illuminate.capacity", "must be at least 3"));
                }
                positive("illuminate.batch", g.batch)?;
                if !(g.sigma >= 0.0 && g.sigma.is_finite()) {
                    return Err(AppError::config("illuminate.sigma", "must be finite and non-negative"));
                }
                if !(0.0..=1.0).contains(&g.max_divergence_fraction) {
                    return Err(AppError::config("illuminate.max_divergence_fraction", "must be in [0, 1]"));
                }
                positive("illuminate.steps", g.steps)?;
                if g.captures == 0 || g.captures > g.steps + 1 {
                    return Err(AppError::config("illuminate.captures", "must be in 1..=steps+1"));
                }
                if let ArchiveInit::Random { scale } = g.init {
                    positive_real("illuminate.init.random.scale", scale)?;
                }
                positive("illuminate.log_every", g.log_every as usize)?;
                positive("illuminate.checkpoint_every", g.checkpoint_every as usize)?;
                positive("illuminate.atlas_grid[0]", g.atlas_grid[0])?;
                positive("illuminate.atlas_grid[1]", g.atlas_grid[1])?;
                positive("illuminate.atlas_tile", g.atlas_tile)?;
            }
            CommandKind::Quantify => match &self.quantify {
                QuantifyConfig::Interpolate { points, steps, .. } => {
                    real_genome("substrate.kind")?;
                    positive("quantify.steps", *steps)?;
                    if *points < 2 {
                        return Err(AppError::config("quantify.points", "must be at least 2"));
                    }
                }
                QuantifyConfig::Importance { prompts, target_image, steps, deltas, dims, .. } => {
                    real_genome("substrate.kind")?;
                    positive("quantify.steps", *steps)?;
                    self.check_objective("quantify", prompts, target_image, *steps)?;
                    if deltas.is_empty() || deltas.iter().any(|d| !d.is_finite()) {
                        return Err(AppError::config("quantify.deltas", "must be non-empty and finite"));
                    }
                    if let Some(dims) = dims {
                        let dim = AnySubstrate::from_config(&self.substrate)?.genome_dim();
                        if let Some(i) = dims.iter().position(|&d| d >= dim) {
                            return Err(AppError::config(
                                format!("quantify.dims[{i}]"),
                                format!("genome has {dim} dimensions"),
                            ));
                        }
                    }
                }
                QuantifyConfig::SweepPopulation { counts, prompts, target_image, steps, .. } => {
                    if kind != SubstrateKind::ParticleLife {
                        return Err(AppError::config("substrate.kind", "population sweeps need particle_life"));
                    }
                    positive("quantify.steps", *steps)?;
                    self.check_objective("quantify", prompts, target_image, *steps)?;
                    if counts.is_empty() || counts.windows(2).any(|w| w[0] >= w[1]) || counts[0] == 0 {
                        return Err(AppError::config("quantify.counts", "must be positive and strictly increasing"));
                    }
                }
                QuantifyConfig::Plateau { steps, window, epsilon, .. } => {
                    positive("quantify.steps", *steps)?;
                    positive("quantify.window", *window)?;
                    positive_real("quantify.epsilon", *epsilon)?;
                }
            },
            CommandKind::Atlas => {
                if self.atlas.run_dir.is_none() {
                    return Err(AppError::config("atlas.run_dir", "an illumination run directory is required"));
                }
                positive("atlas.grid_w", self.atlas.grid_w)?;
                positive("atlas.grid_h", self.atlas.grid_h)?;
                positive("atlas.tile", self.atlas.tile)?;
            }
        }
        Ok(())
    }

    /// A target-style objective needs exactly one of prompts or an image,
    /// and prompts need a text-capable backend.
    fn check_objective(
        &self,
        section: &str,
        prompts: &[PromptEntry],
        image: &Option<PathBuf>,
        steps: usize,
    ) -> Result<()> {
        match (prompts.is_empty(), image.is_some()) {
            (true, false) => {
                return Err(AppError::config(
                    format!("{section}.prompts"),
                    "the target objective needs prompts or a target_image",
                ))
            }
            (false, true) => {
                return Err(AppError::config(
                    format!("{section}.target_image"),
                    "give prompts or target_image, not both",
                ))
            }
            _ => {}
        }
        if !prompts.is_empty() && matches!(self.embedder, EmbedderConfig::Pixel { .. }) {
            return Err(AppError::config(
                "embedder.backend",
                "prompts need a text-capable backend; the pixel embedder has no text side",
            ));
        }
        for (i, p) in prompts.iter().enumerate() {
            if p.step > steps {
                return Err(AppError::config(
                    format!("{section}.prompts[{i}].step"),
                    format!("step {} is past the last step {steps}", p.step),
                ));
            }
            if p.text.is_empty() {
                return Err(AppError::config(format!("{section}.prompts[{i}].text"), "prompt is empty"));
            }
        }
        Ok(())
    }
}

fn positive(path: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(AppError::config(path, "must be positive"))
    } else {
        Ok(())
    }
}

fn positive_real(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AppError::config(path, "must be positive and finite"))
    }
}

/// Recursive object merge; everything else in `overlay` replaces `base`.
pub fn merge(base: &mut Value, overlay: &Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (slot, v) => *slot = v.clone(),
    }
}
