//! Neural cellular automaton with learned depthwise perception filters.
//!
//! Genome layout (`C = channels`, `F = filters`, `H = hidden`):
//! `filters (C x F x 3 x 3) | W1 (H x C*F) | b1 (H) | W2 (C x H) | b2 (C)`.
//! Perception feature `c * F + f` is filter `f` of channel `c` applied to
//! channel `c` on the torus. The per-cell update is `W2 relu(W1 p + b1) + b2`,
//! then `state <- clamp(state + dt * delta, -1, 1)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{upsample_lattice, Frame};
use crate::rng::{below, Rng};
use crate::rollout::{NonFiniteState, Substrate};
use crate::theta::{SubstrateKind, Theta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NcaConfig {
    pub grid: usize,
    /// At least 3; the first three are rendered.
    pub channels: usize,
    pub filters: usize,
    pub hidden: usize,
    pub dt: f64,
    pub min_radius: usize,
    pub max_radius: usize,
    pub render_size: usize,
}

impl Default for NcaConfig {
    fn default() -> Self {
        NcaConfig {
            grid: 64,
            channels: 16,
            filters: 3,
            hidden: 32,
            dt: 1.0,
            min_radius: 3,
            max_radius: 16,
            render_size: 224,
        }
    }
}

impl NcaConfig {
    pub fn weight_count(&self) -> usize {
        let (c, f, h) = (self.channels, self.filters, self.hidden);
        c * f * 9 + h * c * f + h + c * h + c
    }
}

#[derive(Debug, Clone)]
pub struct NcaGenome {
    pub weights: Vec<f64>,
    channels: usize,
    filters: usize,
    hidden: usize,
}

impl NcaGenome {
    pub fn new(weights: Vec<f64>, config: &NcaConfig) -> Result<Self> {
        if weights.len() != config.weight_count() {
            return Err(Error::GenomeLength { expected: config.weight_count(), found: weights.len() });
        }
        Ok(NcaGenome {
            weights,
            channels: config.channels,
            filters: config.filters,
            hidden: config.hidden,
        })
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64], &[f64]) {
        let (c, f, h) = (self.channels, self.filters, self.hidden);
        let (conv, rest) = self.weights.split_at(c * f * 9);
        let (w1, rest) = rest.split_at(h * c * f);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(c * h);
        (conv, w1, b1, w2, b2)
    }
}

/// Cell-major `grid x grid x channels` values.
#[derive(Debug, Clone, PartialEq)]
pub struct NcaState {
    grid: usize,
    channels: usize,
    values: Vec<f64>,
}

impl NcaState {
    pub fn zeros(grid: usize, channels: usize) -> Self {
        NcaState { grid, channels, values: vec![0.0; grid * grid * channels] }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.values[(y * self.grid + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.values[(y * self.grid + x) * self.channels + c] = v;
    }

    pub fn translated(&self, dx: usize, dy: usize) -> Self {
        let g = self.grid;
        let mut out = Self::zeros(g, self.channels);
        for y in 0..g {
            for x in 0..g {
                for c in 0..self.channels {
                    out.set((x + dx) % g, (y + dy) % g, c, self.get(x, y, c));
                }
            }
        }
        out
    }
}

/// Disc of radius `radius` (cells with `dx^2 + dy^2 <= radius^2`) set to 1 on
/// every channel. The centre is drawn so the disc lies inside the grid.
pub fn nca_init_with_radius(rng: &mut Rng, grid: usize, channels: usize, radius: usize) -> NcaState {
    let radius = radius.min((grid - 1) / 2);
    let span = grid - 2 * radius;
    let cx = radius + below(rng, span);
    let cy = radius + below(rng, span);
    let mut s = NcaState::zeros(grid, channels);
    let r2 = (radius * radius) as isize;
    for y in cy - radius..=cy + radius {
        for x in cx - radius..=cx + radius {
            let (dx, dy) = (x as isize - cx as isize, y as isize - cy as isize);
            if dx * dx + dy * dy <= r2 {
                for c in 0..channels {
                    s.set(x, y, c, 1.0);
                }
            }
        }
    }
    s
}

/// Random radius in `[min_radius, max_radius]`, then [`nca_init_with_radius`].
pub fn nca_init(rng: &mut Rng, config: &NcaConfig) -> NcaState {
    let hi = config.max_radius.max(config.min_radius);
    let radius = config.min_radius + below(rng, hi - config.min_radius + 1);
    nca_init_with_radius(rng, config.grid, config.channels, radius)
}

pub fn nca_step(state: &NcaState, genome: &NcaGenome, dt: f64) -> Result<NcaState, NonFiniteState> {
    let (g, ch) = (state.grid, state.channels);
    assert_eq!(ch, genome.channels);
    let (f, h) = (genome.filters, genome.hidden);
    let (conv, w1, b1, w2, b2) = genome.split();
    let features = ch * f;
    let mut perception = vec![0.0; features];
    let mut hidden = vec![0.0; h];
    let mut next = state.clone();
    for y in 0..g {
        let rows = [(y + g - 1) % g, y, (y + 1) % g];
        for x in 0..g {
            let cols = [(x + g - 1) % g, x, (x + 1) % g];
            for c in 0..ch {
                let mut patch = [0.0; 9];
                for (i, &ry) in rows.iter().enumerate() {
                    for (j, &cx) in cols.iter().enumerate() {
                        patch[i * 3 + j] = state.get(cx, ry, c);
                    }
                }
                for k in 0..f {
                    let w = &conv[(c * f + k) * 9..(c * f + k + 1) * 9];
                    perception[c * f + k] = w.iter().zip(&patch).map(|(a, b)| a * b).sum();
                }
            }
            for (u, hv) in hidden.iter_mut().enumerate() {
                let row = &w1[u * features..(u + 1) * features];
                let z = b1[u] + row.iter().zip(&perception).map(|(a, b)| a * b).sum::<f64>();
                *hv = if z < 0.0 { 0.0 } else { z };
            }
            for c in 0..ch {
                let row = &w2[c * h..(c + 1) * h];
                let delta = b2[c] + row.iter().zip(&hidden).map(|(a, b)| a * b).sum::<f64>();
                let v = state.get(x, y, c) + dt * delta;
                if !v.is_finite() {
                    return Err(NonFiniteState);
                }
                next.set(x, y, c, v.clamp(-1.0, 1.0));
            }
        }
    }
    Ok(next)
}

/// Channels 0..3 mapped through `(x + 1) / 2`.
pub fn nca_render(state: &NcaState, size: usize) -> Frame {
    let g = state.grid;
    upsample_lattice(g, g, size, |r, c| {
        let px = |k: usize| ((state.get(c, r, k) + 1.0) * 0.5) as f32;
        [px(0), px(1), px(2)]
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nca {
    pub config: NcaConfig,
}

impl Nca {
    pub fn new(config: NcaConfig) -> Result<Self> {
        if config.channels < 3 || config.filters == 0 || config.hidden == 0 {
            return Err(Error::InvalidArgument("NCA needs >= 3 channels, filters and hidden units"));
        }
        if config.grid < 3 || config.min_radius > config.max_radius {
            return Err(Error::InvalidArgument("NCA grid or radius range invalid"));
        }
        Ok(Nca { config })
    }
}

impl Substrate for Nca {
    type Params = NcaGenome;
    type State = NcaState;

    fn kind(&self) -> SubstrateKind {
        SubstrateKind::Nca
    }

    fn genome_dim(&self) -> usize {
        self.config.weight_count()
    }

    fn decode(&self, theta: &Theta) -> Result<NcaGenome> {
        theta.validate(SubstrateKind::Nca, self.genome_dim())?;
        NcaGenome::new(theta.values().to_vec(), &self.config)
    }

    fn init(&self, _genome: &NcaGenome, rng: &mut Rng) -> NcaState {
        nca_init(rng, &self.config)
    }

    fn step(&self, genome: &NcaGenome, state: &NcaState) -> Result<NcaState, NonFiniteState> {
        nca_step(state, genome, self.config.dt)
    }

    fn render(&self, _genome: &NcaGenome, state: &NcaState) -> Frame {
        nca_render(state, self.config.render_size)
    }
}
