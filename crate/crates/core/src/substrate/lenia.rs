//! Three-channel Lenia with four ring kernels.
//!
//! A genome is `45` raw dynamics values followed by a `32 x 32 x 3` initial
//! patch (row-major, channel innermost). Raw dynamics values are squashed by a
//! logistic sigmoid into `[lo, hi]`; patch values are clamped to `[0, 1]`.
//!
//! Dynamics layout, kernel `k` in `0..4` at offset `11 * k`:
//!
//! | offset | parameter      | range         | meaning                                     |
//! |--------|----------------|---------------|---------------------------------------------|
//! | 0      | `radius`       | [0.3, 1.0]    | fraction of the configured maximum radius   |
//! | 1..=3  | `rings[0..3]`  | [0.0, 1.0]    | peak of the Gaussian ring at shell centre `i` |
//! | 4      | `ring_width`   | [0.05, 0.5]   | Gaussian ring width, in shell units         |
//! | 5      | `mu`           | [0.05, 0.5]   | growth centre                               |
//! | 6      | `sigma`        | [0.005, 0.2]  | growth width                                |
//! | 7      | `source`       | [0.0, 3.0]    | source channel, `min(floor(source), 2)`     |
//! | 8..=10 | `weights[0..3]`| [-1.0, 1.0]   | growth weight into each target channel      |
//!
//! Offset `44` is the global time step `dt` in `[0.05, 0.5]`.
//!
//! The kernel profile at normalized distance `d < 1` is
//! `sum_i rings[i] * exp(-(3d - i - 0.5)^2 / (2 ring_width^2))`.
//!
//! Update: for each kernel, `u = K * A[source]` (circular convolution),
//! `g(u) = 2 exp(-(u - mu)^2 / (2 sigma^2)) - 1`, and every channel `c`
//! accumulates `weights[c] * g(u)`. Then `A <- clamp(A + dt * update, 0, 1)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{Complex, Fft};
use crate::frame::{upsample_lattice, Frame};
use crate::rng::Rng;
use crate::rollout::{NonFiniteState, Substrate};
use crate::theta::{SubstrateKind, Theta};

pub const CHANNELS: usize = 3;
pub const KERNELS: usize = 4;
pub const PARAMS_PER_KERNEL: usize = 11;
pub const DYNAMICS_DIM: usize = KERNELS * PARAMS_PER_KERNEL + 1;
pub const PATCH: usize = 32;
pub const PATCH_DIM: usize = PATCH * PATCH * CHANNELS;
pub const GENOME_DIM: usize = DYNAMICS_DIM + PATCH_DIM;

/// `(lo, hi)` per kernel parameter, in layout order.
pub const KERNEL_RANGES: [(f64, f64); PARAMS_PER_KERNEL] = [
    (0.3, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.05, 0.5),
    (0.05, 0.5),
    (0.005, 0.2),
    (0.0, 3.0),
    (-1.0, 1.0),
    (-1.0, 1.0),
    (-1.0, 1.0),
];
pub const DT_RANGE: (f64, f64) = (0.05, 0.5);

const FIXTURE: &str = include_str!("../../fixtures/lenia_default.txt");

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

#[inline]
fn squash(x: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * sigmoid(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub radius: f64,
    pub rings: [f64; 3],
    pub ring_width: f64,
    pub mu: f64,
    pub sigma: f64,
    pub source: f64,
    pub weights: [f64; CHANNELS],
}

impl KernelParams {
    pub fn source_channel(&self) -> usize {
        (libm::floor(self.source).max(0.0) as usize).min(CHANNELS - 1)
    }

    fn as_array(&self) -> [f64; PARAMS_PER_KERNEL] {
        [
            self.radius,
            self.rings[0],
            self.rings[1],
            self.rings[2],
            self.ring_width,
            self.mu,
            self.sigma,
            self.source,
            self.weights[0],
            self.weights[1],
            self.weights[2],
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelGrowthParams {
    pub kernels: [KernelParams; KERNELS],
    pub dt: f64,
}

impl KernelGrowthParams {
    /// All decoded values in dynamics layout order.
    pub fn to_flat(&self) -> [f64; DYNAMICS_DIM] {
        let mut out = [0.0; DYNAMICS_DIM];
        for (k, kernel) in self.kernels.iter().enumerate() {
            out[k * PARAMS_PER_KERNEL..(k + 1) * PARAMS_PER_KERNEL]
                .copy_from_slice(&kernel.as_array());
        }
        out[DYNAMICS_DIM - 1] = self.dt;
        out
    }

    /// Bounds of each decoded value in dynamics layout order.
    pub fn ranges() -> [(f64, f64); DYNAMICS_DIM] {
        let mut out = [DT_RANGE; DYNAMICS_DIM];
        for k in 0..KERNELS {
            out[k * PARAMS_PER_KERNEL..(k + 1) * PARAMS_PER_KERNEL].copy_from_slice(&KERNEL_RANGES);
        }
        out
    }
}

pub fn lenia_decode_dynamics(raw: &[f64]) -> Result<KernelGrowthParams> {
    if raw.len() != DYNAMICS_DIM {
        return Err(Error::LengthMismatch { expected: DYNAMICS_DIM, found: raw.len() });
    }
    let r = KERNEL_RANGES;
    let kernel = |k: usize| {
        let v = &raw[k * PARAMS_PER_KERNEL..(k + 1) * PARAMS_PER_KERNEL];
        KernelParams {
            radius: squash(v[0], r[0]),
            rings: [squash(v[1], r[1]), squash(v[2], r[2]), squash(v[3], r[3])],
            ring_width: squash(v[4], r[4]),
            mu: squash(v[5], r[5]),
            sigma: squash(v[6], r[6]),
            source: squash(v[7], r[7]),
            weights: [squash(v[8], r[8]), squash(v[9], r[9]), squash(v[10], r[10])],
        }
    };
    Ok(KernelGrowthParams {
        kernels: [kernel(0), kernel(1), kernel(2), kernel(3)],
        dt: squash(raw[DYNAMICS_DIM - 1], DT_RANGE),
    })
}

#[inline]
pub fn growth(u: f64, mu: f64, sigma: f64) -> f64 {
    let d = (u - mu) / sigma;
    2.0 * libm::exp(-0.5 * d * d) - 1.0
}

/// Kernel weights on a `grid x grid` torus with the origin at index 0,
/// normalized to unit sum.
pub fn kernel_weights(kernel: &KernelParams, grid: usize, max_radius: f64) -> Vec<f64> {
    let radius = (kernel.radius * max_radius).max(1.0);
    let reach = (libm::ceil(radius) as isize).min(grid as isize / 2);
    let mut w = vec![0.0; grid * grid];
    let mut total = 0.0;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let d = libm::sqrt((dx * dx + dy * dy) as f64) / radius;
            if d >= 1.0 {
                continue;
            }
            let mut v = 0.0;
            for (i, &peak) in kernel.rings.iter().enumerate() {
                let z = (d * 3.0 - (i as f64 + 0.5)) / kernel.ring_width;
                v += peak * libm::exp(-0.5 * z * z);
            }
            let y = dy.rem_euclid(grid as isize) as usize;
            let x = dx.rem_euclid(grid as isize) as usize;
            w[y * grid + x] += v;
            total += v;
        }
    }
    if total > 0.0 {
        for v in &mut w {
            *v /= total;
        }
    }
    w
}

/// Decoded dynamics together with the kernel spectra for one grid size.
#[derive(Debug, Clone)]
pub struct LeniaDynamics {
    pub params: KernelGrowthParams,
    grid: usize,
    fft: Fft,
    spectra: Vec<Vec<Complex>>,
}

impl LeniaDynamics {
    pub fn new(params: KernelGrowthParams, grid: usize, max_radius: f64) -> Self {
        let fft = Fft::new(grid);
        let spectra = params
            .kernels
            .iter()
            .map(|k| {
                let mut s: Vec<Complex> = kernel_weights(k, grid, max_radius)
                    .into_iter()
                    .map(|v| Complex::new(v, 0.0))
                    .collect();
                fft.forward_2d(&mut s);
                s
            })
            .collect();
        LeniaDynamics { params, grid, fft, spectra }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }
}

/// Channel-major `3 x grid x grid` values.
#[derive(Debug, Clone, PartialEq)]
pub struct LeniaState {
    grid: usize,
    values: Vec<f64>,
}

impl LeniaState {
    pub fn zeros(grid: usize) -> Self {
        LeniaState { grid, values: vec![0.0; CHANNELS * grid * grid] }
    }

    pub fn filled(grid: usize, v: f64) -> Self {
        LeniaState { grid, values: vec![v; CHANNELS * grid * grid] }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.values[(c * self.grid + y) * self.grid + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: f64) {
        self.values[(c * self.grid + y) * self.grid + x] = v;
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.grid * self.grid;
        &self.values[c * n..(c + 1) * n]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn translated(&self, dx: usize, dy: usize) -> Self {
        let g = self.grid;
        let mut out = Self::zeros(g);
        for c in 0..CHANNELS {
            for y in 0..g {
                for x in 0..g {
                    out.set(c, (x + dx) % g, (y + dy) % g, self.get(c, x, y));
                }
            }
        }
        out
    }
}

/// Zero grid with the `32 x 32 x 3` patch pasted at the centre.
///
/// Panics if the grid is smaller than the patch or `grid - 32` is odd.
pub fn lenia_init(patch: &[f64], grid: usize) -> LeniaState {
    assert_eq!(patch.len(), PATCH_DIM);
    assert!(grid >= PATCH && (grid - PATCH).is_multiple_of(2), "patch must centre exactly in the grid");
    let off = (grid - PATCH) / 2;
    let mut s = LeniaState::zeros(grid);
    for y in 0..PATCH {
        for x in 0..PATCH {
            for c in 0..CHANNELS {
                s.set(c, off + x, off + y, patch[(y * PATCH + x) * CHANNELS + c].clamp(0.0, 1.0));
            }
        }
    }
    s
}

pub fn lenia_step(
    state: &LeniaState,
    dynamics: &LeniaDynamics,
) -> Result<LeniaState, NonFiniteState> {
    let g = dynamics.grid;
    assert_eq!(state.grid, g);
    let n = g * g;
    let p = &dynamics.params;

    let mut source_spectra: [Option<Vec<Complex>>; CHANNELS] = [None, None, None];
    for k in &p.kernels {
        let c = k.source_channel();
        if source_spectra[c].is_none() {
            let mut s: Vec<Complex> =
                state.channel(c).iter().map(|&v| Complex::new(v, 0.0)).collect();
            dynamics.fft.forward_2d(&mut s);
            source_spectra[c] = Some(s);
        }
    }

    let mut update = vec![0.0; CHANNELS * n];
    let mut buf = vec![Complex::ZERO; n];
    // Two real-valued convolutions per inverse transform: one in the real
    // part, one in the imaginary part.
    for pair in (0..KERNELS).step_by(2) {
        let (ka, kb) = (&p.kernels[pair], &p.kernels[pair + 1]);
        let sa = source_spectra[ka.source_channel()].as_ref().unwrap();
        let sb = source_spectra[kb.source_channel()].as_ref().unwrap();
        let (fa, fb) = (&dynamics.spectra[pair], &dynamics.spectra[pair + 1]);
        for i in 0..n {
            let a = sa[i] * fa[i];
            let b = sb[i] * fb[i];
            // a + i*b
            buf[i] = Complex::new(a.re - b.im, a.im + b.re);
        }
        dynamics.fft.inverse_2d(&mut buf);
        for (kernel, pick_im) in [(ka, false), (kb, true)] {
            if kernel.weights.iter().all(|&w| w == 0.0) {
                continue;
            }
            for i in 0..n {
                let u = if pick_im { buf[i].im } else { buf[i].re };
                let gr = growth(u, kernel.mu, kernel.sigma);
                for c in 0..CHANNELS {
                    update[c * n + i] += kernel.weights[c] * gr;
                }
            }
        }
    }

    let mut next = state.clone();
    for (v, u) in next.values.iter_mut().zip(&update) {
        let raw = *v + p.dt * u;
        if !raw.is_finite() {
            return Err(NonFiniteState);
        }
        *v = raw.clamp(0.0, 1.0);
    }
    Ok(next)
}

/// Channels map to RGB directly.
pub fn lenia_render(state: &LeniaState, size: usize) -> Frame {
    let g = state.grid;
    upsample_lattice(g, g, size, |r, c| {
        [state.get(0, c, r) as f32, state.get(1, c, r) as f32, state.get(2, c, r) as f32]
    })
}

/// Parse a whitespace-separated list of reals; `#` starts a comment.
pub fn parse_genome_text(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::InvalidArgument("genome file contains a non-number"))?;
            out.push(v);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeniaConfig {
    /// Power of two, at least 32.
    pub grid: usize,
    /// Kernel radius in cells when a kernel's radius fraction is 1.
    pub max_radius: f64,
    pub render_size: usize,
}

impl Default for LeniaConfig {
    fn default() -> Self {
        LeniaConfig { grid: 64, max_radius: 13.0, render_size: 224 }
    }
}

#[derive(Debug, Clone)]
pub struct LeniaParams {
    pub dynamics: LeniaDynamics,
    pub patch: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lenia {
    pub config: LeniaConfig,
}

impl Lenia {
    pub fn new(config: LeniaConfig) -> Result<Self> {
        if !config.grid.is_power_of_two() || config.grid < PATCH {
            return Err(Error::InvalidArgument("Lenia grid must be a power of two >= 32"));
        }
        if !(config.max_radius >= 1.0 && config.max_radius <= (config.grid / 2) as f64) {
            return Err(Error::InvalidArgument("Lenia max_radius must be in [1, grid/2]"));
        }
        Ok(Lenia { config })
    }

    /// The shipped search-centre genome (raw values, layout as documented above).
    pub fn default_genome() -> Theta {
        let values = parse_genome_text(FIXTURE).expect("fixture parses");
        assert_eq!(values.len(), GENOME_DIM, "fixture length");
        Theta::real(SubstrateKind::Lenia, values)
    }
}

impl Substrate for Lenia {
    type Params = LeniaParams;
    type State = LeniaState;

    fn kind(&self) -> SubstrateKind {
        SubstrateKind::Lenia
    }

    fn genome_dim(&self) -> usize {
        GENOME_DIM
    }

    fn decode(&self, theta: &Theta) -> Result<LeniaParams> {
        theta.validate(SubstrateKind::Lenia, GENOME_DIM)?;
        let v = theta.values();
        let params = lenia_decode_dynamics(&v[..DYNAMICS_DIM])?;
        Ok(LeniaParams {
            dynamics: LeniaDynamics::new(params, self.config.grid, self.config.max_radius),
            patch: v[DYNAMICS_DIM..].iter().map(|x| x.clamp(0.0, 1.0)).collect(),
        })
    }

    fn init(&self, params: &LeniaParams, _rng: &mut Rng) -> LeniaState {
        lenia_init(&params.patch, self.config.grid)
    }

    fn step(&self, params: &LeniaParams, state: &LeniaState) -> Result<LeniaState, NonFiniteState> {
        lenia_step(state, &params.dynamics)
    }

    fn render(&self, _params: &LeniaParams, state: &LeniaState) -> Frame {
        lenia_render(state, self.config.render_size)
    }
}
