//! Particle Life: typed particles with an asymmetric attraction matrix.
//!
//! Genome: `types x types` raw attraction values (row = acting-on type,
//! column = other type) squashed by `tanh`, then `types` raw beta values
//! squashed by a sigmoid into `(0, 1)`.
//!
//! Forces are summed for every pair closer than `cutoff`, always in
//! ascending index order of the other particle, so the spatial-hash step and
//! the all-pairs step produce bit-identical results.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::rng::{uniform, Rng};
use crate::rollout::{NonFiniteState, Substrate};
use crate::substrate::boids::torus_delta;
use crate::theta::{SubstrateKind, Theta};

/// Colours of the first six types; further types reuse them cyclically.
pub const PALETTE: [[f32; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.2, 0.4, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleLifeConfig {
    pub particles: usize,
    pub types: usize,
    /// Interaction radius in world units.
    pub cutoff: f64,
    /// Velocity multiplier applied each step.
    pub damping: f64,
    pub dt: f64,
    pub force_scale: f64,
    /// Disc radius in pixels.
    pub particle_radius: f64,
    pub render_size: usize,
}

impl Default for ParticleLifeConfig {
    fn default() -> Self {
        ParticleLifeConfig {
            particles: 5000,
            types: 6,
            cutoff: 0.1,
            damping: 0.9,
            dt: 0.02,
            force_scale: 10.0,
            particle_radius: 1.0,
            render_size: 224,
        }
    }
}

impl ParticleLifeConfig {
    pub fn genome_dim(&self) -> usize {
        self.types * self.types + self.types
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleLifeGenome {
    pub types: usize,
    /// Row-major, entries in `[-1, 1]`.
    pub attraction: Vec<f64>,
    /// Entries in `(0, 1)`.
    pub beta: Vec<f64>,
}

impl ParticleLifeGenome {
    pub fn decode(raw: &[f64], types: usize) -> Result<Self> {
        let dim = types * types + types;
        if raw.len() != dim {
            return Err(Error::GenomeLength { expected: dim, found: raw.len() });
        }
        let attraction = raw[..types * types].iter().map(|&x| libm::tanh(x)).collect();
        let beta = raw[types * types..]
            .iter()
            .map(|&x| (1.0 / (1.0 + libm::exp(-x))).clamp(1e-6, 1.0 - 1e-6))
            .collect();
        Ok(ParticleLifeGenome { types, attraction, beta })
    }

    #[inline]
    pub fn attraction(&self, on: usize, other: usize) -> f64 {
        self.attraction[on * self.types + other]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleLifeState {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub types: Vec<usize>,
}

/// Force magnitude at normalized distance `r` (distance / cutoff).
///
/// Repulsive ramp from `-1` at `r = 0` to `0` at `r = beta`, then a triangular
/// bump peaking at `a` halfway between `beta` and `1`, zero beyond `1`.
#[inline]
pub fn plife_force(r: f64, a: f64, beta: f64) -> f64 {
    if r < beta {
        r / beta - 1.0
    } else if r < 1.0 {
        a * (1.0 - libm::fabs(2.0 * r - 1.0 - beta) / (1.0 - beta))
    } else {
        0.0
    }
}

/// Uniform positions, zero velocities, types assigned round-robin.
pub fn plife_init(rng: &mut Rng, particles: usize, types: usize) -> ParticleLifeState {
    let mut positions = Vec::with_capacity(particles);
    for _ in 0..particles {
        positions.push([uniform(rng), uniform(rng)]);
    }
    ParticleLifeState {
        positions,
        velocities: vec![[0.0; 2]; particles],
        types: (0..particles).map(|i| i % types).collect(),
    }
}

#[inline]
fn pair_force(
    state: &ParticleLifeState,
    genome: &ParticleLifeGenome,
    cutoff: f64,
    i: usize,
    j: usize,
    acc: &mut [f64; 2],
) {
    let d = torus_delta(state.positions[i], state.positions[j]);
    let dist2 = d[0] * d[0] + d[1] * d[1];
    if dist2 >= cutoff * cutoff || dist2 == 0.0 {
        return;
    }
    let dist = libm::sqrt(dist2);
    let ti = state.types[i];
    let f = plife_force(dist / cutoff, genome.attraction(ti, state.types[j]), genome.beta[ti]);
    acc[0] += f * d[0] / dist;
    acc[1] += f * d[1] / dist;
}

/// Net force on every particle by checking all pairs.
pub fn forces_naive(
    state: &ParticleLifeState,
    genome: &ParticleLifeGenome,
    cutoff: f64,
) -> Vec<[f64; 2]> {
    let n = state.positions.len();
    (0..n)
        .map(|i| {
            let mut acc = [0.0; 2];
            for j in 0..n {
                if j != i {
                    pair_force(state, genome, cutoff, i, j, &mut acc);
                }
            }
            acc
        })
        .collect()
}

/// Net force on every particle using a uniform grid of `cutoff`-sized cells.
pub fn forces_hashed(
    state: &ParticleLifeState,
    genome: &ParticleLifeGenome,
    cutoff: f64,
) -> Vec<[f64; 2]> {
    let n = state.positions.len();
    let cells = (libm::floor(1.0 / cutoff) as usize).max(1);
    let cell_of = |x: f64| ((x * cells as f64) as usize).min(cells - 1);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); cells * cells];
    for (i, p) in state.positions.iter().enumerate() {
        buckets[cell_of(p[1]) * cells + cell_of(p[0])].push(i);
    }
    let mut out = vec![[0.0; 2]; n];
    let mut candidates: Vec<usize> = Vec::new();
    for (i, acc) in out.iter_mut().enumerate() {
        let p = state.positions[i];
        let (cx, cy) = (cell_of(p[0]), cell_of(p[1]));
        candidates.clear();
        for dy in [cells - 1, 0, 1] {
            for dx in [cells - 1, 0, 1] {
                let b = ((cy + dy) % cells) * cells + (cx + dx) % cells;
                candidates.extend_from_slice(&buckets[b]);
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        for &j in &candidates {
            if j != i {
                pair_force(state, genome, cutoff, i, j, acc);
            }
        }
    }
    out
}

fn integrate(
    state: &ParticleLifeState,
    forces: &[[f64; 2]],
    config: &ParticleLifeConfig,
) -> Result<ParticleLifeState, NonFiniteState> {
    let mut next = state.clone();
    let gain = config.dt * config.force_scale * config.cutoff;
    for i in 0..state.positions.len() {
        let mut v = state.velocities[i];
        let mut p = state.positions[i];
        for a in 0..2 {
            v[a] = config.damping * v[a] + gain * forces[i][a];
            p[a] += v[a] * config.dt;
            if !p[a].is_finite() {
                return Err(NonFiniteState);
            }
            p[a] -= libm::floor(p[a]);
            if p[a] >= 1.0 {
                p[a] = 0.0;
            }
        }
        next.velocities[i] = v;
        next.positions[i] = p;
    }
    Ok(next)
}

/// Semi-implicit Euler with damping, using the spatial hash.
pub fn plife_step(
    state: &ParticleLifeState,
    genome: &ParticleLifeGenome,
    config: &ParticleLifeConfig,
) -> Result<ParticleLifeState, NonFiniteState> {
    integrate(state, &forces_hashed(state, genome, config.cutoff), config)
}

/// Same update as [`plife_step`] with all-pairs force evaluation.
pub fn plife_step_naive(
    state: &ParticleLifeState,
    genome: &ParticleLifeGenome,
    config: &ParticleLifeConfig,
) -> Result<ParticleLifeState, NonFiniteState> {
    integrate(state, &forces_naive(state, genome, config.cutoff), config)
}

pub fn plife_render(state: &ParticleLifeState, size: usize, radius: f64) -> Frame {
    let mut frame = Frame::black(size, size);
    let s = size as f64;
    let reach = libm::ceil(radius) as isize;
    let sz = size as isize;
    for (p, &t) in state.positions.iter().zip(&state.types) {
        let colour = PALETTE[t % PALETTE.len()];
        let (cx, cy) = (p[0] * s, p[1] * s);
        let (px, py) = (libm::floor(cx) as isize, libm::floor(cy) as isize);
        for y in py - reach..=py + reach {
            for x in px - reach..=px + reach {
                let dx = x as f64 + 0.5 - cx;
                let dy = y as f64 + 0.5 - cy;
                if dx * dx + dy * dy <= radius * radius {
                    frame.set(x.rem_euclid(sz) as usize, y.rem_euclid(sz) as usize, colour);
                }
            }
        }
    }
    frame
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleLife {
    pub config: ParticleLifeConfig,
}

impl ParticleLife {
    pub fn new(config: ParticleLifeConfig) -> Result<Self> {
        if config.types == 0 || config.particles == 0 {
            return Err(Error::InvalidArgument("particle life needs particles and types"));
        }
        if !(config.cutoff > 0.0 && config.cutoff <= 0.5) {
            return Err(Error::InvalidArgument("particle life cutoff must be in (0, 0.5]"));
        }
        Ok(ParticleLife { config })
    }
}

impl Substrate for ParticleLife {
    type Params = ParticleLifeGenome;
    type State = ParticleLifeState;

    fn kind(&self) -> SubstrateKind {
        SubstrateKind::ParticleLife
    }

    fn genome_dim(&self) -> usize {
        self.config.genome_dim()
    }

    fn decode(&self, theta: &Theta) -> Result<ParticleLifeGenome> {
        theta.validate(SubstrateKind::ParticleLife, self.genome_dim())?;
        ParticleLifeGenome::decode(theta.values(), self.config.types)
    }

    fn init(&self, _genome: &ParticleLifeGenome, rng: &mut Rng) -> ParticleLifeState {
        plife_init(rng, self.config.particles, self.config.types)
    }

    fn step(
        &self,
        genome: &ParticleLifeGenome,
        state: &ParticleLifeState,
    ) -> Result<ParticleLifeState, NonFiniteState> {
        plife_step(state, genome, &self.config)
    }

    fn render(&self, _genome: &ParticleLifeGenome, state: &ParticleLifeState) -> Frame {
        plife_render(state, self.config.render_size, self.config.particle_radius)
    }
}
