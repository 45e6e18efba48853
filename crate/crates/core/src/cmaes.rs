//! CMA-ES kernel: rank-mu and rank-one covariance updates with cumulative
//! step-size adaptation, for maximization.
//!
//! Sampling and whitening go through the Cholesky factor of the covariance
//! (`C = A A^T`, `A` lower triangular): candidates are `m + sigma * A z` and
//! the step-size path uses `A^{ -1} y`. The factor is unique for a positive
//! definite matrix, which keeps trajectories reproducible across
//! independently written implementations sharing an RNG stream.
//!
//! RNG discipline: [`CmaEs::ask`] draws exactly `lambda * dim` standard
//! normals, candidate-major. Ranking is stable descending with NaN ranked
//! last, ties keeping the lower candidate index.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::num::Real;

#[derive(Debug, Clone)]
pub struct CmaEs<S> {
    dim: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<S>,
    mu_eff: S,
    c_sigma: S,
    d_sigma: S,
    c_c: S,
    c_one: S,
    c_mu: S,
    chi_n: S,
    pub mean: Vec<S>,
    pub sigma: S,
    /// Covariance, row-major `dim x dim`.
    pub covariance: Vec<S>,
    /// Lower-triangular Cholesky factor of the covariance.
    chol: Vec<S>,
    path_sigma: Vec<S>,
    path_c: Vec<S>,
    generation: usize,
}

impl<S: Real> CmaEs<S>
where
    StandardNormal: Distribution<S>,
{
    pub fn new(mean: Vec<S>, sigma0: S, lambda: usize) -> Self {
        let dim = mean.len();
        assert!(dim > 0, "dimension must be positive");
        let lambda = lambda.max(2);
        let mu = lambda / 2;
        let n = S::of(dim as f64);

        // log-linear recombination weights over the top half
        let half_log = S::of((lambda as f64 + 1.0) / 2.0).ln();
        let mut weights: Vec<S> = (0..mu)
            .map(|i| half_log - S::of((i + 1) as f64).ln())
            .collect();
        let wsum: S = weights.iter().copied().sum();
        weights.iter_mut().for_each(|w| *w /= wsum);
        let mu_eff = S::one() / weights.iter().map(|&w| w * w).sum::<S>();

        let two = S::of(2.0);
        let c_sigma = (mu_eff + two) / (n + mu_eff + S::of(5.0));
        let d_sigma = S::one()
            + two * (((mu_eff - S::one()) / (n + S::one())).sqrt() - S::one()).max(S::zero())
            + c_sigma;
        let c_c = (S::of(4.0) + mu_eff / n) / (n + S::of(4.0) + two * mu_eff / n);
        let c_one = two / ((n + S::of(1.3)) * (n + S::of(1.3)) + mu_eff);
        let c_mu = (two * (mu_eff - two + S::one() / mu_eff)
            / ((n + two) * (n + two) + mu_eff))
            .min(S::one() - c_one);
        let chi_n = n.sqrt()
            * (S::one() - S::one() / (S::of(4.0) * n)
                + S::one() / (S::of(21.0) * n * n));

        let mut covariance = vec![S::zero(); dim * dim];
        let mut chol = vec![S::zero(); dim * dim];
        for i in 0..dim {
            covariance[i * dim + i] = S::one();
            chol[i * dim + i] = S::one();
        }
        CmaEs {
            dim,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_one,
            c_mu,
            chi_n,
            mean,
            sigma: sigma0,
            covariance,
            chol,
            path_sigma: vec![S::zero(); dim],
            path_c: vec![S::zero(); dim],
            generation: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    /// Draw `lambda` candidates from `N(mean, sigma^2 C)`.
    pub fn ask<R: Rng>(&self, rng: &mut R) -> Vec<Vec<S>> {
        (0..self.lambda)
            .map(|_| {
                let z: Vec<S> = (0..self.dim).map(|_| StandardNormal.sample(rng)).collect();
                let mut x = self.mean.clone();
                for i in 0..self.dim {
                    let mut yi = S::zero();
                    for j in 0..=i {
                        yi += self.chol[i * self.dim + j] * z[j];
                    }
                    x[i] += self.sigma * yi;
                }
                x
            })
            .collect()
    }

    /// Rank candidates by fitness (maximization) and update the
    /// distribution. `candidates` must come from the matching [`ask`] call.
    pub fn tell(&mut self, candidates: &[Vec<S>], fitness: &[S]) {
        assert_eq!(candidates.len(), self.lambda);
        assert_eq!(fitness.len(), self.lambda);
        let dim = self.dim;
        let order = rank_descending(fitness);

        // selected steps in distribution coordinates
        let selected: Vec<Vec<S>> = order[..self.mu]
            .iter()
            .map(|&k| {
                (0..dim)
                    .map(|i| (candidates[k][i] - self.mean[i]) / self.sigma)
                    .collect()
            })
            .collect();
        let mut y_w = vec![S::zero(); dim];
        for (w, y) in self.weights.iter().zip(selected.iter()) {
            for i in 0..dim {
                y_w[i] += *w * y[i];
            }
        }

        // whitened mean step: solve A u = y_w (forward substitution)
        let mut whitened = vec![S::zero(); dim];
        for i in 0..dim {
            let mut s = y_w[i];
            for j in 0..i {
                s -= self.chol[i * dim + j] * whitened[j];
            }
            whitened[i] = s / self.chol[i * dim + i];
        }

        let one = S::one();
        let two = S::of(2.0);
        let cs_factor = (self.c_sigma * (two - self.c_sigma) * self.mu_eff).sqrt();
        for i in 0..dim {
            self.path_sigma[i] =
                (one - self.c_sigma) * self.path_sigma[i] + cs_factor * whitened[i];
        }
        let ps_norm = self.path_sigma.iter().map(|&v| v * v).sum::<S>().sqrt();

        let gen1 = S::of((self.generation + 1) as f64);
        let decay = one - (one - self.c_sigma).powf(two * gen1);
        let h_sigma = if ps_norm / decay.sqrt()
            < (S::of(1.4) + two / (S::of(dim as f64) + one)) * self.chi_n
        {
            one
        } else {
            S::zero()
        };

        let cc_factor = (self.c_c * (two - self.c_c) * self.mu_eff).sqrt();
        for i in 0..dim {
            self.path_c[i] = (one - self.c_c) * self.path_c[i] + h_sigma * cc_factor * y_w[i];
        }

        // covariance: decay + rank-one + rank-mu
        let delta_h = (one - h_sigma) * self.c_c * (two - self.c_c);
        let decay_c = one - self.c_one - self.c_mu + delta_h * self.c_one;
        for i in 0..dim {
            for j in 0..dim {
                let mut v = decay_c * self.covariance[i * dim + j]
                    + self.c_one * self.path_c[i] * self.path_c[j];
                for (w, y) in self.weights.iter().zip(selected.iter()) {
                    v += self.c_mu * *w * y[i] * y[j];
                }
                self.covariance[i * dim + j] = v;
            }
        }

        for i in 0..dim {
            self.mean[i] += self.sigma * y_w[i];
        }
        self.sigma = self.sigma
            * ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - one)).exp();
        self.generation += 1;
        self.refactor();
    }

    /// Recompute the Cholesky factor, lifting the covariance's eigenvalues
    /// by a growing diagonal shift until it is positive definite.
    fn refactor(&mut self) {
        if let Some(chol) = cholesky(&self.covariance, self.dim) {
            self.chol = chol;
            return;
        }
        let dim = self.dim;
        let trace: S = (0..dim).map(|i| self.covariance[i * dim + i]).sum();
        let scale = (trace / S::of(dim as f64)).abs().max(S::of(1e-16));
        let mut shift = scale * S::of(1e-12);
        for _ in 0..60 {
            for i in 0..dim {
                self.covariance[i * dim + i] += shift;
            }
            if let Some(chol) = cholesky(&self.covariance, self.dim) {
                self.chol = chol;
                return;
            }
            shift = shift * S::of(10.0);
        }
        // give up: reset to isotropic
        self.covariance = vec![S::zero(); dim * dim];
        self.chol = vec![S::zero(); dim * dim];
        for i in 0..dim {
            self.covariance[i * dim + i] = S::one();
            self.chol[i * dim + i] = S::one();
        }
    }
}

/// Stable descending argsort; NaN ranks last, ties keep index order.
pub fn rank_descending<S: Real>(fitness: &[S]) -> Vec<usize> {
    let key = |x: S| if x.is_nan() { S::neg_infinity() } else { x };
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| {
        key(fitness[b])
            .partial_cmp(&key(fitness[a]))
            .expect("keys are never NaN")
    });
    idx
}

/// Lower-triangular Cholesky factor of a symmetric matrix, or None if it is
/// not positive definite.
pub fn cholesky<S: Real>(matrix: &[S], dim: usize) -> Option<Vec<S>> {
    let mut l = vec![S::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut s = matrix[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if s <= S::zero() || !s.is_finite() {
                    return None;
                }
                l[i * dim + i] = s.sqrt();
            } else {
                l[i * dim + j] = s / l[j * dim + j];
            }
        }
    }
    Some(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn sphere(x: &[f64]) -> f64 {
        -x.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn weights_are_convex_combination() {
        for lambda in [4, 10, 23] {
            let es = CmaEs::<f64>::new(vec![0.0; 5], 1.0, lambda);
            let sum: f64 = es.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(es.weights.iter().all(|&w| w > 0.0));
            assert!(es.weights.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn zero_sigma_samples_collapse_to_mean() {
        let mean = vec![0.3, -1.2, 4.0];
        let es = CmaEs::new(mean.clone(), 0.0, 6);
        for x in es.ask(&mut rng(1)) {
            assert_eq!(x, mean);
        }
    }

    #[test]
    fn unit_distribution_sample_statistics() {
        let dim = 4;
        let es = CmaEs::new(vec![0.0; dim], 1.0, 10);
        let mut r = rng(2);
        let draws = 1000; // x 10 per ask = 1e4 samples
        let mut sums = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut count = 0usize;
        for _ in 0..draws {
            for x in es.ask(&mut r) {
                for i in 0..dim {
                    sums[i] += x[i];
                    sq[i] += x[i] * x[i];
                }
                count += 1;
            }
        }
        for i in 0..dim {
            let mean = sums[i] / count as f64;
            let var = sq[i] / count as f64 - mean * mean;
            assert!(mean.abs() < 0.05, "component {i} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 0.05, "component {i} sd {}", var.sqrt());
        }
    }

    #[test]
    fn solves_sphere_in_ten_dimensions() {
        let dim = 10;
        let target: Vec<f64> = (0..dim).map(|i| 0.3 * (i as f64 + 1.0) / dim as f64).collect();
        for seed in 0..3 {
            let mut es = CmaEs::new(vec![0.0; dim], 1.0, 10);
            let mut r = rng(100 + seed);
            let mut best = f64::NEG_INFINITY;
            let mut evals = 0;
            while evals < 5000 && best < -1e-8 {
                let xs = es.ask(&mut r);
                let fs: Vec<f64> = xs
                    .iter()
                    .map(|x| {
                        let diff: Vec<f64> =
                            x.iter().zip(&target).map(|(a, b)| a - b).collect();
                        sphere(&diff)
                    })
                    .collect();
                evals += xs.len();
                best = best.max(fs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
                es.tell(&xs, &fs);
            }
            assert!(
                best > -(1e-3f64).powi(2),
                "seed {seed}: best {best} after {evals} evals"
            );
        }
    }

    #[test]
    fn nan_fitness_ranks_last_and_update_stays_finite() {
        let mut es = CmaEs::new(vec![0.0; 3], 1.0, 6);
        let xs = es.ask(&mut rng(3));
        let fs = vec![0.1, f64::NAN, 0.9, f64::NAN, 0.5, 0.2];
        assert_eq!(rank_descending(&fs), vec![2, 4, 5, 0, 1, 3]);
        es.tell(&xs, &fs);
        assert!(es.mean.iter().all(|m| m.is_finite()));
        assert!(es.sigma.is_finite() && es.sigma > 0.0);
    }

    #[test]
    fn covariance_stays_symmetric_positive_definite() {
        let mut es = CmaEs::new(vec![0.5; 6], 0.7, 8);
        let mut r = rng(4);
        for _ in 0..60 {
            let xs = es.ask(&mut r);
            let fs: Vec<f64> = xs.iter().map(|x| sphere(x)).collect();
            es.tell(&xs, &fs);
        }
        let d = es.dim;
        for i in 0..d {
            for j in 0..d {
                assert_eq!(es.covariance[i * d + j], es.covariance[j * d + i]);
            }
        }
        assert!(cholesky(&es.covariance, d).is_some());
        assert!(es.sigma > 0.0 && es.sigma.is_finite());
    }

    #[test]
    fn refactor_repairs_non_positive_definite_covariance() {
        let mut es = CmaEs::new(vec![0.0; 3], 1.0, 6);
        // force an indefinite covariance
        es.covariance = vec![1.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 1.0];
        es.refactor();
        let xs = es.ask(&mut rng(5));
        assert!(xs.iter().flatten().all(|v| v.is_finite()));
        assert!(cholesky(&es.covariance, 3).is_some());
    }

    #[test]
    fn cholesky_matches_hand_factorization() {
        // [[4,2],[2,3]] = [[2,0],[1,sqrt(2)]] * transpose
        let l = cholesky(&[4.0, 2.0, 2.0, 3.0], 2).unwrap();
        assert!((l[0] - 2.0).abs() < 1e-15);
        assert!((l[2] - 1.0).abs() < 1e-15);
        assert!((l[3] - 2.0f64.sqrt()).abs() < 1e-15);
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }

    #[test]
    fn deterministic_under_shared_seed() {
        let run = |seed| {
            let mut es = CmaEs::new(vec![0.0; 5], 1.0, 8);
            let mut r = rng(seed);
            for _ in 0..20 {
                let xs = es.ask(&mut r);
                let fs: Vec<f64> = xs.iter().map(|x| sphere(x)).collect();
                es.tell(&xs, &fs);
            }
            (es.mean.clone(), es.sigma)
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn works_at_f32() {
        let mut es = CmaEs::<f32>::new(vec![1.0; 4], 1.0, 8);
        let mut r = rng(6);
        for _ in 0..40 {
            let xs = es.ask(&mut r);
            let fs: Vec<f32> = xs.iter().map(|x| -x.iter().map(|v| v * v).sum::<f32>()).collect();
            es.tell(&xs, &fs);
        }
        let d2: f32 = es.mean.iter().map(|v| v * v).sum();
        assert!(d2 < 0.5, "f32 kernel should still contract, got {d2}");
    }
}
