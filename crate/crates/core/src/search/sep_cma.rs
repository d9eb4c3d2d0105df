//! Separable CMA-ES (diagonal covariance).
//!
//! Minimizes. To maximize a score, tell the negated scores. Candidates with
//! equal fitness keep their sampling order when ranked.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{make_rng, standard_normal, Rng, STREAM_SEARCH};

/// Strategy constants for one dimension and population size.
#[derive(Debug, Clone, PartialEq)]
pub struct SepCmaParams {
    pub n: usize,
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub chi_n: f64,
}

impl SepCmaParams {
    pub fn new(n: usize, lambda: usize) -> Self {
        assert!(n >= 1 && lambda >= 2);
        let nf = n as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| libm::log(mu as f64 + 0.5) - libm::log(i as f64))
            .collect();
        let sum: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / sum).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
        let d_sigma =
            1.0 + 2.0 * (libm::sqrt((mu_eff - 1.0) / (nf + 1.0)) - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
        let sep = (nf + 2.0) / 3.0;
        let c_1 = (sep * 2.0 / ((nf + 1.3) * (nf + 1.3) + mu_eff)).min(1.0);
        let c_mu = (sep * 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0) * (nf + 2.0) + mu_eff))
            .min(1.0 - c_1);
        let chi_n = libm::sqrt(nf) * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));
        SepCmaParams { n, lambda, mu, weights, mu_eff, c_sigma, d_sigma, c_c, c_1, c_mu, chi_n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepCmaState {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub diag_cov: Vec<f64>,
    pub path_c: Vec<f64>,
    pub path_sigma: Vec<f64>,
    pub generation: u64,
}

impl SepCmaState {
    pub fn new(mean: Vec<f64>, sigma: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidArgument("Sep-CMA-ES needs at least one dimension"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument("Sep-CMA-ES sigma must be positive"));
        }
        if let Some(index) = mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGenome { index });
        }
        let n = mean.len();
        Ok(SepCmaState {
            mean,
            sigma,
            diag_cov: alloc::vec![1.0; n],
            path_c: alloc::vec![0.0; n],
            path_sigma: alloc::vec![0.0; n],
            generation: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `pop` samples `mean + sigma * sqrt(diag_cov) * z`, `z ~ N(0, I)`.
    pub fn ask(&self, rng: &mut Rng, pop: usize) -> Vec<Vec<f64>> {
        assert!(pop >= 2, "population must be at least 2");
        let scale: Vec<f64> = self.diag_cov.iter().map(|c| self.sigma * libm::sqrt(*c)).collect();
        (0..pop)
            .map(|_| {
                self.mean
                    .iter()
                    .zip(&scale)
                    .map(|(m, s)| m + s * standard_normal(rng))
                    .collect()
            })
            .collect()
    }

    /// [`ask`](Self::ask) with the generator for the current generation of a
    /// run seeded by `seed`.
    pub fn ask_seeded(&self, seed: u64, pop: usize) -> Vec<Vec<f64>> {
        self.ask(&mut generation_rng(seed, self.generation), pop)
    }

    /// Rank-weighted update from one evaluated population. Lower fitness is
    /// better.
    pub fn tell(&mut self, candidates: &[Vec<f64>], fitnesses: &[f64]) -> Result<()> {
        if candidates.len() != fitnesses.len() {
            return Err(Error::LengthMismatch { expected: candidates.len(), found: fitnesses.len() });
        }
        if candidates.len() < 2 {
            return Err(Error::InvalidArgument("population must be at least 2"));
        }
        if let Some(index) = fitnesses.iter().position(|f| !f.is_finite()) {
            return Err(Error::NonFiniteFitness { index });
        }
        let n = self.dim();
        for c in candidates {
            if c.len() != n {
                return Err(Error::GenomeLength { expected: n, found: c.len() });
            }
        }
        let p = SepCmaParams::new(n, candidates.len());

        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| fitnesses[a].total_cmp(&fitnesses[b]));

        let old_mean = self.mean.clone();
        let sigma = self.sigma;
        // Selected steps y_i = (x_i - m) / sigma, best first.
        let ys: Vec<Vec<f64>> = order[..p.mu]
            .iter()
            .map(|&i| candidates[i].iter().zip(&old_mean).map(|(x, m)| (x - m) / sigma).collect())
            .collect();

        let mut y_w = alloc::vec![0.0; n];
        let mut new_mean = alloc::vec![0.0; n];
        for (k, &i) in order[..p.mu].iter().enumerate() {
            let w = p.weights[k];
            for d in 0..n {
                y_w[d] += w * ys[k][d];
                new_mean[d] += w * candidates[i][d];
            }
        }

        let cs = p.c_sigma;
        let norm_s = libm::sqrt(cs * (2.0 - cs) * p.mu_eff);
        for d in 0..n {
            self.path_sigma[d] =
                (1.0 - cs) * self.path_sigma[d] + norm_s * y_w[d] / libm::sqrt(self.diag_cov[d]);
        }
        let ps_norm = libm::sqrt(self.path_sigma.iter().map(|v| v * v).sum());
        let gen = (self.generation + 1) as f64;
        let h_sigma = ps_norm / libm::sqrt(1.0 - libm::pow(1.0 - cs, 2.0 * gen))
            < (1.4 + 2.0 / (n as f64 + 1.0)) * p.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };

        let cc = p.c_c;
        let norm_c = libm::sqrt(cc * (2.0 - cc) * p.mu_eff);
        for d in 0..n {
            self.path_c[d] = (1.0 - cc) * self.path_c[d] + h * norm_c * y_w[d];
        }

        let decay = 1.0 - p.c_1 - p.c_mu + (1.0 - h) * p.c_1 * cc * (2.0 - cc);
        for d in 0..n {
            let rank_mu: f64 = ys.iter().zip(&p.weights).map(|(y, w)| w * y[d] * y[d]).sum();
            self.diag_cov[d] = decay * self.diag_cov[d]
                + p.c_1 * self.path_c[d] * self.path_c[d]
                + p.c_mu * rank_mu;
        }

        self.sigma *= libm::exp((cs / p.d_sigma) * (ps_norm / p.chi_n - 1.0));
        self.mean = new_mean;
        self.generation += 1;
        Ok(())
    }
}

/// Generator for generation `generation` of a run seeded by `seed`.
pub fn generation_rng(seed: u64, generation: u64) -> Rng {
    make_rng(seed, STREAM_SEARCH + generation)
}

/// Run ask/tell until `max_evals` evaluations are spent or `stop(best)`
/// holds. Returns the best fitness after every generation.
pub fn minimize<F, S>(
    state: &mut SepCmaState,
    seed: u64,
    pop: usize,
    max_evals: usize,
    mut f: F,
    stop: S,
) -> Result<Vec<f64>>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<f64>>,
    S: Fn(f64) -> bool,
{
    let mut best = f64::INFINITY;
    let mut history = Vec::new();
    let mut evals = 0;
    while evals + pop <= max_evals {
        let xs = state.ask_seeded(seed, pop);
        let fs = f(&xs)?;
        state.tell(&xs, &fs)?;
        evals += pop;
        best = fs.iter().copied().fold(best, f64::min);
        history.push(best);
        if stop(best) {
            break;
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn default_constants() {
        let p = SepCmaParams::new(10, 16);
        assert_eq!(p.mu, 8);
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(p.weights.windows(2).all(|w| w[0] > w[1]));
        assert!(p.c_1 + p.c_mu <= 1.0);
        assert!(p.c_sigma < 1.0 && p.c_c < 1.0);
    }

    #[test]
    fn ask_shapes_and_reproducibility() {
        let s = SepCmaState::new(vec![0.5; 7], 0.1).unwrap();
        let a = s.ask(&mut make_rng(3, 9), 16);
        assert_eq!(a.len(), 16);
        assert!(a.iter().all(|x| x.len() == 7));
        assert_eq!(a, s.ask(&mut make_rng(3, 9), 16));
        assert_ne!(a, s.ask(&mut make_rng(4, 9), 16));
    }

    #[test]
    fn tiny_sigma_collapses_to_mean() {
        let s = SepCmaState::new(vec![1.0, -2.0, 3.0], f64::MIN_POSITIVE).unwrap();
        for x in s.ask(&mut make_rng(0, 0), 16) {
            assert_eq!(x, s.mean);
        }
    }

    #[test]
    fn equal_fitness_uses_index_order() {
        let mut s = SepCmaState::new(vec![0.0; 4], 0.3).unwrap();
        let xs = s.ask(&mut make_rng(1, 1), 10);
        let p = SepCmaParams::new(4, 10);
        let mut expected = vec![0.0; 4];
        for k in 0..p.mu {
            for d in 0..4 {
                expected[d] += p.weights[k] * xs[k][d];
            }
        }
        s.tell(&xs, &[2.5; 10]).unwrap();
        assert_eq!(s.mean, expected);
        assert_eq!(s.generation, 1);
    }

    #[test]
    fn tell_rejects_bad_input() {
        let mut s = SepCmaState::new(vec![0.0; 2], 0.1).unwrap();
        let xs = s.ask(&mut make_rng(0, 0), 4);
        assert_eq!(
            s.tell(&xs, &[0.0, f64::NAN, 1.0, 2.0]),
            Err(Error::NonFiniteFitness { index: 1 })
        );
        assert!(matches!(s.tell(&xs, &[0.0; 3]), Err(Error::LengthMismatch { .. })));
        assert!(SepCmaState::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn first_coordinate_decreases() {
        let mut s = SepCmaState::new(vec![0.0; 5], 0.1).unwrap();
        let mut last = s.mean[0];
        for g in 0..10 {
            let xs = s.ask(&mut generation_rng(17, g), 16);
            let fs: Vec<f64> = xs.iter().map(|x| x[0]).collect();
            s.tell(&xs, &fs).unwrap();
            assert!(s.mean[0] < last, "generation {g}");
            last = s.mean[0];
        }
    }

    #[test]
    fn sphere_10d_converges() {
        for seed in 0..3 {
            let mut s = SepCmaState::new(vec![1.0; 10], 0.1).unwrap();
            let hist = minimize(
                &mut s,
                seed,
                16,
                2000,
                |xs| Ok(xs.iter().map(|x| sphere(x)).collect()),
                |b| b < 1e-6,
            )
            .unwrap();
            assert!(*hist.last().unwrap() < 1e-6, "seed {seed}: {:?}", hist.last());
        }
    }

    #[test]
    fn random_fitness_keeps_state_finite() {
        let mut s = SepCmaState::new(vec![0.0; 6], 0.1).unwrap();
        let mut rng = make_rng(99, 5);
        for _ in 0..10_000 {
            let xs = s.ask(&mut rng, 8);
            let fs: Vec<f64> = (0..8).map(|_| standard_normal(&mut rng)).collect();
            s.tell(&xs, &fs).unwrap();
            assert!(s.sigma > 0.0 && s.sigma.is_finite(), "sigma {}", s.sigma);
            assert!(s.diag_cov.iter().all(|c| *c > 0.0 && c.is_finite()));
        }
    }

    proptest! {
        #[test]
        fn update_is_invariant_to_monotone_fitness_transform(seed: u64, a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let s0 = SepCmaState::new(vec![0.3; 4], 0.2).unwrap();
            let xs = s0.ask(&mut make_rng(seed, 2), 8);
            let fs: Vec<f64> = xs.iter().map(|x| sphere(x)).collect();
            let gs: Vec<f64> = fs.iter().map(|f| a * f + b).collect();
            let (mut s1, mut s2) = (s0.clone(), s0.clone());
            s1.tell(&xs, &fs).unwrap();
            s2.tell(&xs, &gs).unwrap();
            prop_assert_eq!(s1, s2);
        }
    }
}
