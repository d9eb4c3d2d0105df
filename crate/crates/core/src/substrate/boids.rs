//! Boids steered by one shared network over their nearest neighbours.
//!
//! Each neighbour contributes four features expressed in the observing boid's
//! frame: relative position (scaled by `feature_scale`) and heading as a unit
//! velocity. A per-neighbour encoder `tanh(W1 f + b1)` is mean-pooled, passed
//! through `tanh(W2 p + b2)` and a linear output `w3 . h + b3`. The turn per
//! step is `max_turn * tanh(out)`.
//!
//! Genome layout (`E = encoder_width`, `H = head_width`):
//! `W1 (E x 4, row-major) | b1 (E) | W2 (H x E) | b2 (H) | w3 (H) | b3 (1)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::rng::{uniform, Rng};
use crate::rollout::{NonFiniteState, Substrate};
use crate::theta::{SubstrateKind, Theta};

pub const FEATURES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoidsConfig {
    pub boids: usize,
    pub neighbors: usize,
    pub encoder_width: usize,
    pub head_width: usize,
    /// Distance travelled per step, in world units.
    pub speed: f64,
    /// Largest heading change per step, radians.
    pub max_turn: f64,
    pub feature_scale: f64,
    /// Triangle length in world units.
    pub boid_size: f64,
    pub render_size: usize,
}

impl Default for BoidsConfig {
    fn default() -> Self {
        BoidsConfig {
            boids: 128,
            neighbors: 16,
            encoder_width: 32,
            head_width: 32,
            speed: 0.001,
            max_turn: 0.2,
            feature_scale: 10.0,
            boid_size: 0.015,
            render_size: 224,
        }
    }
}

impl BoidsConfig {
    pub fn weight_count(&self) -> usize {
        let (e, h) = (self.encoder_width, self.head_width);
        e * FEATURES + e + h * e + h + h + 1
    }
}

/// Steering network weights with the layer sizes they were built for.
#[derive(Debug, Clone)]
pub struct BoidsGenome {
    pub weights: Vec<f64>,
    encoder_width: usize,
    head_width: usize,
}

impl BoidsGenome {
    pub fn new(weights: Vec<f64>, config: &BoidsConfig) -> Result<Self> {
        if weights.len() != config.weight_count() {
            return Err(Error::GenomeLength { expected: config.weight_count(), found: weights.len() });
        }
        Ok(BoidsGenome {
            weights,
            encoder_width: config.encoder_width,
            head_width: config.head_width,
        })
    }

    pub fn zeros(config: &BoidsConfig) -> Self {
        Self::new(vec![0.0; config.weight_count()], config).unwrap()
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64], &[f64], f64) {
        let (e, h) = (self.encoder_width, self.head_width);
        let w = &self.weights;
        let (w1, rest) = w.split_at(e * FEATURES);
        let (b1, rest) = rest.split_at(e);
        let (w2, rest) = rest.split_at(h * e);
        let (b2, rest) = rest.split_at(h);
        let (w3, rest) = rest.split_at(h);
        (w1, b1, w2, b2, w3, rest[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoidsState {
    pub positions: Vec<[f64; 2]>,
    pub headings: Vec<f64>,
}

impl BoidsState {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[inline]
fn wrap_unit(x: f64) -> f64 {
    let r = x - libm::floor(x);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    a - two_pi * libm::floor(a / two_pi)
}

/// Shortest displacement on the unit torus, components in `[-0.5, 0.5)`.
#[inline]
pub fn torus_delta(from: [f64; 2], to: [f64; 2]) -> [f64; 2] {
    let mut d = [to[0] - from[0], to[1] - from[1]];
    for v in &mut d {
        *v -= libm::floor(*v + 0.5);
    }
    d
}

pub fn boids_init(rng: &mut Rng, count: usize) -> BoidsState {
    let mut positions = Vec::with_capacity(count);
    let mut headings = Vec::with_capacity(count);
    for _ in 0..count {
        positions.push([uniform(rng), uniform(rng)]);
        headings.push(2.0 * PI * uniform(rng));
    }
    BoidsState { positions, headings }
}

/// Turn rate for every boid.
pub fn boids_turns(state: &BoidsState, genome: &BoidsGenome, config: &BoidsConfig) -> Vec<f64> {
    let n = state.len();
    let k = config.neighbors.min(n.saturating_sub(1));
    let (w1, b1, w2, b2, w3, b3) = genome.split();
    let (e, h) = (genome.encoder_width, genome.head_width);
    let mut turns = vec![0.0; n];
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut pooled = vec![0.0; e];
    let mut hidden = vec![0.0; h];
    for i in 0..n {
        let pi = state.positions[i];
        let (sin_i, cos_i) = (libm::sin(state.headings[i]), libm::cos(state.headings[i]));
        dists.clear();
        for j in 0..n {
            if j != i {
                let d = torus_delta(pi, state.positions[j]);
                dists.push((d[0] * d[0] + d[1] * d[1], j));
            }
        }
        if k > 0 && k < dists.len() {
            dists.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        }
        let near = &mut dists[..k];
        near.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        pooled.iter_mut().for_each(|v| *v = 0.0);
        for &(_, j) in near.iter() {
            let d = torus_delta(pi, state.positions[j]);
            let rel = state.headings[j] - state.headings[i];
            let f = [
                (d[0] * cos_i + d[1] * sin_i) * config.feature_scale,
                (-d[0] * sin_i + d[1] * cos_i) * config.feature_scale,
                libm::cos(rel),
                libm::sin(rel),
            ];
            for (u, p) in pooled.iter_mut().enumerate() {
                let row = &w1[u * FEATURES..(u + 1) * FEATURES];
                let z = b1[u] + row[0] * f[0] + row[1] * f[1] + row[2] * f[2] + row[3] * f[3];
                *p += libm::tanh(z);
            }
        }
        if k > 0 {
            let inv = 1.0 / k as f64;
            pooled.iter_mut().for_each(|v| *v *= inv);
        }
        let mut out = b3;
        for (u, hv) in hidden.iter_mut().enumerate() {
            let row = &w2[u * e..(u + 1) * e];
            let z: f64 = b2[u] + row.iter().zip(&pooled).map(|(a, b)| a * b).sum::<f64>();
            *hv = libm::tanh(z);
            out += w3[u] * *hv;
        }
        turns[i] = config.max_turn * libm::tanh(out);
    }
    turns
}

pub fn boids_step(
    state: &BoidsState,
    genome: &BoidsGenome,
    config: &BoidsConfig,
) -> Result<BoidsState, NonFiniteState> {
    let turns = boids_turns(state, genome, config);
    let mut next = state.clone();
    for i in 0..state.len() {
        let heading = state.headings[i] + turns[i];
        if !heading.is_finite() {
            return Err(NonFiniteState);
        }
        let heading = wrap_angle(heading);
        let p = state.positions[i];
        next.headings[i] = heading;
        next.positions[i] = [
            wrap_unit(p[0] + config.speed * libm::cos(heading)),
            wrap_unit(p[1] + config.speed * libm::sin(heading)),
        ];
    }
    Ok(next)
}

/// Oriented white triangles on black, wrapped around the torus.
pub fn boids_render(state: &BoidsState, size: usize, boid_size: f64) -> Frame {
    let mut frame = Frame::black(size, size);
    let s = size as f64;
    let len = boid_size * s;
    for (p, &a) in state.positions.iter().zip(&state.headings) {
        let (c, sn) = (libm::cos(a), libm::sin(a));
        let centre = [p[0] * s, p[1] * s];
        let tip = [centre[0] + c * len * 0.6, centre[1] + sn * len * 0.6];
        let back = [centre[0] - c * len * 0.4, centre[1] - sn * len * 0.4];
        let half = len * 0.3;
        let left = [back[0] - sn * half, back[1] + c * half];
        let right = [back[0] + sn * half, back[1] - c * half];
        fill_triangle(&mut frame, [tip, left, right], [1.0; 3]);
    }
    frame
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

pub(crate) fn fill_triangle(frame: &mut Frame, tri: [[f64; 2]; 3], rgb: [f32; 3]) {
    let size = frame.width() as isize;
    let xs = tri.map(|v| v[0]);
    let ys = tri.map(|v| v[1]);
    let x0 = libm::floor(xs.iter().cloned().fold(f64::INFINITY, f64::min)) as isize;
    let x1 = libm::ceil(xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)) as isize;
    let y0 = libm::floor(ys.iter().cloned().fold(f64::INFINITY, f64::min)) as isize;
    let y1 = libm::ceil(ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)) as isize;
    let area = edge(tri[0], tri[1], tri[2]);
    for py in y0..=y1 {
        for px in x0..=x1 {
            let p = [px as f64 + 0.5, py as f64 + 0.5];
            let e0 = edge(tri[1], tri[2], p);
            let e1 = edge(tri[2], tri[0], p);
            let e2 = edge(tri[0], tri[1], p);
            let inside = if area >= 0.0 {
                e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0
            } else {
                e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0
            };
            if inside {
                frame.set(px.rem_euclid(size) as usize, py.rem_euclid(size) as usize, rgb);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boids {
    pub config: BoidsConfig,
}

impl Boids {
    pub fn new(config: BoidsConfig) -> Result<Self> {
        if config.boids == 0 || config.encoder_width == 0 || config.head_width == 0 {
            return Err(Error::InvalidArgument("boids sizes must be positive"));
        }
        if !(config.speed > 0.0 && config.speed < 0.5) {
            return Err(Error::InvalidArgument("boids speed must be in (0, 0.5)"));
        }
        Ok(Boids { config })
    }
}

impl Substrate for Boids {
    type Params = BoidsGenome;
    type State = BoidsState;

    fn kind(&self) -> SubstrateKind {
        SubstrateKind::Boids
    }

    fn genome_dim(&self) -> usize {
        self.config.weight_count()
    }

    fn decode(&self, theta: &Theta) -> Result<BoidsGenome> {
        theta.validate(SubstrateKind::Boids, self.genome_dim())?;
        BoidsGenome::new(theta.values().to_vec(), &self.config)
    }

    fn init(&self, _genome: &BoidsGenome, rng: &mut Rng) -> BoidsState {
        boids_init(rng, self.config.boids)
    }

    fn step(&self, genome: &BoidsGenome, state: &BoidsState) -> Result<BoidsState, NonFiniteState> {
        boids_step(state, genome, &self.config)
    }

    fn render(&self, _genome: &BoidsGenome, state: &BoidsState) -> Frame {
        boids_render(state, self.config.render_size, self.config.boid_size)
    }
}
