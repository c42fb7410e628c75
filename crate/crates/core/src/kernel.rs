//! Per-observation kernel densities derived from posterior samples.
//!
//! Building the model runs every retained network once per observation
//! and caches the outputs, so density evaluation afterwards is a pure
//! Gaussian-mixture computation with no network passes. Each kernel
//! `p_k` is the average over samples of a `d`-dimensional isotropic
//! Gaussian centered on the cached output for observation `k`, sharing
//! the sample's precision `tau` across dimensions. Densities carry a
//! `1e-300` floor so that ratios of kernels stay finite arbitrarily far
//! from the data.
//!
//! The kernels sharpen as observations accumulate, so at query time most
//! (sample, observation) pairs lie far outside their Gaussian's support.
//! A per-observation bounding radius (center spread plus the widest
//! cutoff radius, via the triangle inequality) skips whole observations
//! exactly, without changing any contributing term.

use crate::bnn::PosteriorSample;
use crate::error::{Error, Result};
use crate::space::ObservationSet;

const LN_2PI: f64 = 1.8378770664093453;

/// Below this log-density a mixture term is treated as zero.
const EXP_UNDERFLOW: f64 = -745.0;

/// Additive density floor.
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct KernelModel {
    samples: Vec<PosteriorSample>,
    observations: ObservationSet,
    /// `(d/2) ln(tau_s / 2 pi)` per sample.
    log_prefactor: Vec<f64>,
    taus: Vec<f64>,
    /// Cached network outputs, laid out `[observation][sample][dim]`.
    centers: Vec<f64>,
    /// Mean cached output per observation, `[observation][dim]`.
    mean_center: Vec<f64>,
    /// Squared skip radius per observation.
    prune_r2: Vec<f64>,
    n: usize,
    d: usize,
}

/// Mixture sums used by the surrogate and the acquisition function.
#[derive(Debug, Clone)]
pub struct MixtureEval {
    /// `sum_k p_k(x)`.
    pub sum_p: f64,
    /// `sum_k f_k p_k(x)`.
    pub sum_fp: f64,
}

#[derive(Debug, Clone)]
pub struct MixtureEvalGrad {
    pub sum_p: f64,
    pub sum_fp: f64,
    pub grad_p: Vec<f64>,
    pub grad_fp: Vec<f64>,
}

impl KernelModel {
    pub fn build(samples: Vec<PosteriorSample>, observations: ObservationSet) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("no posterior samples".into()));
        }
        if observations.is_empty() {
            return Err(Error::EmptyObservations);
        }
        let d = observations.dims();
        let n = observations.n();
        let s_count = samples.len();

        let mut log_prefactor = Vec::with_capacity(s_count);
        let mut taus = Vec::with_capacity(s_count);
        for sample in &samples {
            if sample.input_dim != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: sample.input_dim,
                });
            }
            log_prefactor.push(0.5 * d as f64 * (sample.tau.ln() - LN_2PI));
            taus.push(sample.tau);
        }

        let mut centers = vec![0.0; s_count * n * d];
        for (s, sample) in samples.iter().enumerate() {
            for (k, point) in observations.points().iter().enumerate() {
                let out = sample.forward(point)?;
                centers[(k * s_count + s) * d..(k * s_count + s + 1) * d]
                    .copy_from_slice(&out);
            }
        }

        // Per-sample cutoff radius beyond which a term underflows.
        let cutoff_r: Vec<f64> = (0..s_count)
            .map(|s| (2.0 * (log_prefactor[s] - EXP_UNDERFLOW).max(0.0) / taus[s]).sqrt())
            .collect();

        let mut mean_center = vec![0.0; n * d];
        let mut prune_r2 = vec![0.0; n];
        for k in 0..n {
            let mu = &mut mean_center[k * d..(k + 1) * d];
            for s in 0..s_count {
                let c = &centers[(k * s_count + s) * d..(k * s_count + s + 1) * d];
                for i in 0..d {
                    mu[i] += c[i];
                }
            }
            for v in mu.iter_mut() {
                *v /= s_count as f64;
            }
            let mut radius: f64 = 0.0;
            for s in 0..s_count {
                let c = &centers[(k * s_count + s) * d..(k * s_count + s + 1) * d];
                let spread: f64 = mean_center[k * d..(k + 1) * d]
                    .iter()
                    .zip(c)
                    .map(|(m, x)| (m - x) * (m - x))
                    .sum::<f64>()
                    .sqrt();
                radius = radius.max(spread + cutoff_r[s]);
            }
            prune_r2[k] = (radius + 1e-9) * (radius + 1e-9);
        }

        Ok(Self {
            samples,
            observations,
            log_prefactor,
            taus,
            centers,
            mean_center,
            prune_r2,
            n,
            d,
        })
    }

    pub fn n_observations(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.d
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[PosteriorSample] {
        &self.samples
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.observations
    }

    /// Number of cached output scalars: `samples * observations * dims`.
    pub fn cache_size(&self) -> usize {
        self.centers.len()
    }

    #[inline]
    fn center(&self, s: usize, k: usize) -> &[f64] {
        let base = (k * self.samples.len() + s) * self.d;
        &self.centers[base..base + self.d]
    }

    #[inline]
    fn mean_dist2(&self, k: usize, x: &[f64]) -> f64 {
        let mu = &self.mean_center[k * self.d..(k + 1) * self.d];
        let mut acc = 0.0;
        for i in 0..self.d {
            let t = x[i] - mu[i];
            acc += t * t;
        }
        acc
    }

    /// Sum over samples of `exp(pref - tau/2 dist^2)` for one
    /// observation, without the 1/S normalization or floor.
    #[inline]
    fn kernel_sum(&self, k: usize, x: &[f64]) -> f64 {
        let s_count = self.samples.len();
        let mut acc = 0.0;
        for s in 0..s_count {
            let mu = self.center(s, k);
            let mut dist = 0.0;
            for i in 0..self.d {
                let t = x[i] - mu[i];
                dist += t * t;
            }
            let e = self.log_prefactor[s] - 0.5 * self.taus[s] * dist;
            if e > EXP_UNDERFLOW {
                acc += e.exp();
            }
        }
        acc
    }

    /// Density of kernel `k` at `x`.
    pub fn density_k(&self, k: usize, x: &[f64]) -> Result<f64> {
        self.check_query(k, x)?;
        Ok(self.kernel_sum(k, x) / self.samples.len() as f64 + DENSITY_FLOOR)
    }

    /// Density of kernel `k` and its spatial gradient.
    pub fn density_k_grad(&self, k: usize, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_query(k, x)?;
        let s_count = self.samples.len();
        let mut acc = 0.0;
        let mut grad = vec![0.0; self.d];
        for s in 0..s_count {
            let mu = self.center(s, k);
            let mut dist = 0.0;
            for i in 0..self.d {
                let t = x[i] - mu[i];
                dist += t * t;
            }
            let e = self.log_prefactor[s] - 0.5 * self.taus[s] * dist;
            if e > EXP_UNDERFLOW {
                let term = e.exp();
                acc += term;
                let tau = self.taus[s];
                for i in 0..self.d {
                    grad[i] -= term * tau * (x[i] - mu[i]);
                }
            }
        }
        let inv = 1.0 / s_count as f64;
        for g in &mut grad {
            *g *= inv;
        }
        Ok((acc * inv + DENSITY_FLOOR, grad))
    }

    fn check_query(&self, k: usize, x: &[f64]) -> Result<()> {
        if k >= self.n {
            return Err(Error::KernelIndex { index: k, n: self.n });
        }
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `sum_k p_k` and `sum_k f_k p_k` in one pass over the cache.
    pub fn mixture(&self, values: &[f64], x: &[f64]) -> MixtureEval {
        debug_assert_eq!(values.len(), self.n);
        debug_assert_eq!(x.len(), self.d);
        let inv = 1.0 / self.samples.len() as f64;
        let mut sum_p = 0.0;
        let mut sum_fp = 0.0;
        for k in 0..self.n {
            if self.mean_dist2(k, x) > self.prune_r2[k] {
                continue;
            }
            let ksum = self.kernel_sum(k, x);
            sum_p += ksum;
            sum_fp += values[k] * ksum;
        }
        let floor_f: f64 = values.iter().sum::<f64>() * DENSITY_FLOOR;
        MixtureEval {
            sum_p: sum_p * inv + self.n as f64 * DENSITY_FLOOR,
            sum_fp: sum_fp * inv + floor_f,
        }
    }

    /// Mixture sums together with their spatial gradients.
    pub fn mixture_grad(&self, values: &[f64], x: &[f64]) -> MixtureEvalGrad {
        debug_assert_eq!(values.len(), self.n);
        debug_assert_eq!(x.len(), self.d);
        let s_count = self.samples.len();
        let inv = 1.0 / s_count as f64;
        let mut sum_p = 0.0;
        let mut sum_fp = 0.0;
        let mut grad_p = vec![0.0; self.d];
        let mut grad_fp = vec![0.0; self.d];
        let mut kgrad = vec![0.0; self.d];
        for k in 0..self.n {
            if self.mean_dist2(k, x) > self.prune_r2[k] {
                continue;
            }
            let mut ksum = 0.0;
            kgrad.fill(0.0);
            for s in 0..s_count {
                let mu = self.center(s, k);
                let mut dist = 0.0;
                for i in 0..self.d {
                    let t = x[i] - mu[i];
                    dist += t * t;
                }
                let e = self.log_prefactor[s] - 0.5 * self.taus[s] * dist;
                if e > EXP_UNDERFLOW {
                    let term = e.exp();
                    ksum += term;
                    let tau = self.taus[s];
                    for i in 0..self.d {
                        kgrad[i] -= term * tau * (x[i] - mu[i]);
                    }
                }
            }
            sum_p += ksum;
            sum_fp += values[k] * ksum;
            for i in 0..self.d {
                grad_p[i] += kgrad[i];
                grad_fp[i] += values[k] * kgrad[i];
            }
        }
        let floor_f: f64 = values.iter().sum::<f64>() * DENSITY_FLOOR;
        for i in 0..self.d {
            grad_p[i] *= inv;
            grad_fp[i] *= inv;
        }
        MixtureEvalGrad {
            sum_p: sum_p * inv + self.n as f64 * DENSITY_FLOOR,
            sum_fp: sum_fp * inv + floor_f,
            grad_p,
            grad_fp,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::{sample_posterior, BnnSpec};

    fn constant_sample(d: usize, tau: f64, shift: f64) -> PosteriorSample {
        // Zero weights except output biases, so phi3 = sigmoid(b2) is the
        // same for every observation; `shift` moves the center.
        let h = 3;
        PosteriorSample::new(
            vec![0.0; d * h],
            vec![0.0; h],
            vec![0.0; h * h],
            vec![0.0; h],
            vec![0.0; h * d],
            vec![shift; d],
            tau,
        )
        .unwrap()
    }

    fn toy_model(d: usize, tau: f64) -> KernelModel {
        let obs = ObservationSet::from_pairs(vec![vec![0.5; d]], vec![1.0]).unwrap();
        KernelModel::build(vec![constant_sample(d, tau, 0.0)], obs).unwrap()
    }

    #[test]
    fn unit_height_at_center_when_tau_is_two_pi() {
        // One sample, d = 1, tau = 2 pi, x at the kernel center:
        // sqrt(tau / 2 pi) * exp(0) = 1.
        let model = toy_model(1, 2.0 * std::f64::consts::PI);
        let center = model.center(0, 0)[0];
        let p = model.density_k(0, &[center]).unwrap();
        assert!((p - 1.0).abs() < 1e-12, "{p}");
    }

    #[test]
    fn cache_size_is_samples_times_obs_times_dims() {
        let obs = ObservationSet::from_pairs(
            vec![vec![0.1, 0.9], vec![0.5, 0.5], vec![0.8, 0.2]],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let samples = vec![constant_sample(2, 5.0, 0.0), constant_sample(2, 6.0, 0.1)];
        let model = KernelModel::build(samples, obs).unwrap();
        assert_eq!(model.cache_size(), 2 * 3 * 2);
    }

    #[test]
    fn empty_observations_rejected() {
        let err = KernelModel::build(vec![constant_sample(1, 1.0, 0.0)], ObservationSet::new());
        assert!(err.is_err());
    }

    #[test]
    fn index_out_of_range_is_an_error() {
        let model = toy_model(1, 1.0);
        assert!(model.density_k(1, &[0.5]).is_err());
    }

    #[test]
    fn symmetric_about_center() {
        let model = toy_model(1, 30.0);
        let c = model.center(0, 0)[0];
        for delta in [0.01, 0.05, 0.2] {
            let a = model.density_k(0, &[c - delta]).unwrap();
            let b = model.density_k(0, &[c + delta]).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.max(b), "{a} vs {b}");
        }
    }

    #[test]
    fn cached_density_matches_forward_reconstruction() {
        // Train a tiny posterior, then recompute each density from raw
        // forward passes and compare against the cached path.
        let obs = ObservationSet::from_pairs(
            vec![vec![0.2, 0.3], vec![0.7, 0.8], vec![0.4, 0.6]],
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let spec = BnnSpec::with_options(2, 6, 2).unwrap();
        let (samples, _) = sample_posterior(&obs, &spec, 3).unwrap();
        let model = KernelModel::build(samples.clone(), obs.clone()).unwrap();

        let xs = [vec![0.25, 0.35], vec![0.5, 0.5], vec![0.9, 0.05]];
        for x in &xs {
            for k in 0..obs.n() {
                let cached = model.density_k(k, x).unwrap();
                let mut acc = 0.0;
                for sample in &samples {
                    let mu = sample.forward(&obs.points()[k]).unwrap();
                    let dist: f64 = x.iter().zip(&mu).map(|(a, b)| (a - b) * (a - b)).sum();
                    acc += (sample.tau / (2.0 * std::f64::consts::PI))
                        .powf(obs.dims() as f64 / 2.0)
                        * (-0.5 * sample.tau * dist).exp();
                }
                let uncached = acc / samples.len() as f64 + DENSITY_FLOOR;
                assert!(
                    (cached - uncached).abs() <= 1e-12 * uncached.max(1e-30),
                    "k={k}: {cached} vs {uncached}"
                );
            }
        }
    }

    #[test]
    fn density_is_strictly_positive_everywhere() {
        let model = toy_model(2, 1e6);
        let far = vec![0.999, 0.001];
        let p = model.density_k(0, &far).unwrap();
        assert!(p >= DENSITY_FLOOR);
        assert!(p > 0.0);
    }

    #[test]
    fn normalization_by_grid_quadrature() {
        // Moderate tau so the mass sits well inside a wide integration
        // box; trapezoid quadrature must recover total mass 1 within 2%.
        for d in [1usize, 2] {
            let model = toy_model(d, 40.0);
            let (lo, hi, steps) = (-3.0f64, 4.0f64, 1400usize);
            let h = (hi - lo) / steps as f64;
            let mut total = 0.0;
            match d {
                1 => {
                    for i in 0..=steps {
                        let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                        total += w * model.density_k(0, &[lo + i as f64 * h]).unwrap();
                    }
                    total *= h;
                }
                2 => {
                    for i in 0..=steps {
                        let wi = if i == 0 || i == steps { 0.5 } else { 1.0 };
                        let x = lo + i as f64 * h;
                        for j in 0..=steps {
                            let wj = if j == 0 || j == steps { 0.5 } else { 1.0 };
                            let y = lo + j as f64 * h;
                            total += wi * wj * model.density_k(0, &[x, y]).unwrap();
                        }
                    }
                    total *= h * h;
                }
                _ => unreachable!(),
            }
            assert!((total - 1.0).abs() < 0.02, "d={d}: mass {total}");
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let obs = ObservationSet::from_pairs(
            vec![vec![0.3, 0.4], vec![0.6, 0.7]],
            vec![1.0, -1.0],
        )
        .unwrap();
        let samples = vec![constant_sample(2, 25.0, 0.2), constant_sample(2, 60.0, -0.3)];
        let model = KernelModel::build(samples, obs).unwrap();
        let h = 1e-5;
        let mut x = vec![0.37, 0.52];
        for trial in 0..100 {
            x[0] = 0.05 + 0.9 * ((trial * 61) % 100) as f64 / 100.0;
            x[1] = 0.05 + 0.9 * ((trial * 37) % 100) as f64 / 100.0;
            for k in 0..2 {
                let (_, grad) = model.density_k_grad(k, &x).unwrap();
                for i in 0..2 {
                    let mut xp = x.clone();
                    xp[i] += h;
                    let mut xm = x.clone();
                    xm[i] -= h;
                    let fd = (model.density_k(k, &xp).unwrap()
                        - model.density_k(k, &xm).unwrap())
                        / (2.0 * h);
                    let scale = fd.abs().max(1e-9);
                    assert!(
                        (grad[i] - fd).abs() <= 1e-6 * scale,
                        "k={k} i={i}: {} vs {fd}",
                        grad[i]
                    );
                }
            }
        }
    }

    #[test]
    fn mixture_agrees_with_per_kernel_sums() {
        let obs = ObservationSet::from_pairs(
            vec![vec![0.2, 0.8], vec![0.5, 0.1], vec![0.9, 0.9]],
            vec![2.0, -1.0, 0.5],
        )
        .unwrap();
        let values = obs.values().to_vec();
        let samples = vec![constant_sample(2, 25.0, 0.1), constant_sample(2, 80.0, -0.2)];
        let model = KernelModel::build(samples, obs).unwrap();
        for x in [vec![0.4, 0.4], vec![0.05, 0.95], vec![0.99, 0.01]] {
            let eval = model.mixture(&values, &x);
            let mut sp = 0.0;
            let mut sfp = 0.0;
            for k in 0..3 {
                let p = model.density_k(k, &x).unwrap();
                sp += p;
                sfp += values[k] * p;
            }
            assert!((eval.sum_p - sp).abs() <= 1e-12 * sp.abs().max(1e-30));
            assert!((eval.sum_fp - sfp).abs() <= 1e-12 * sfp.abs().max(1e-30));
        }
    }

    #[test]
    fn pruning_matches_unpruned_sums_with_sharp_kernels() {
        // Train sharp kernels (large n not needed: widen tau by hand) and
        // verify the pruned mixture equals a brute-force per-kernel sum
        // at points near, between and far from the data.
        let pts: Vec<Vec<f64>> = (0..12)
            .map(|k| vec![0.05 + 0.08 * k as f64, 0.9 - 0.07 * k as f64])
            .collect();
        let values: Vec<f64> = (0..12).map(|k| k as f64 - 4.0).collect();
        let obs = ObservationSet::from_pairs(pts, values.clone()).unwrap();
        let samples: Vec<PosteriorSample> = (0..5)
            .map(|s| constant_sample(2, 2e4 + 500.0 * s as f64, 0.02 * s as f64))
            .collect();
        let model = KernelModel::build(samples, obs).unwrap();
        for x in [
            vec![0.05, 0.9],
            vec![0.5, 0.5],
            vec![0.62, 0.47],
            vec![0.99, 0.01],
        ] {
            let eval = model.mixture(&values, &x);
            let (mut sp, mut sfp) = (0.0, 0.0);
            for k in 0..12 {
                let p = model.density_k(k, &x).unwrap();
                sp += p;
                sfp += values[k] * p;
            }
            assert!(
                (eval.sum_p - sp).abs() <= 1e-12 * sp.abs().max(1e-30),
                "{x:?}: {} vs {sp}",
                eval.sum_p
            );
            assert!((eval.sum_fp - sfp).abs() <= 1e-12 * sfp.abs().max(1e-250));
        }
    }
}
