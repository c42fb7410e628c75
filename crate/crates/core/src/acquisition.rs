//! Surrogate and acquisition function.
//!
//! The surrogate is the density-weighted average of observed values,
//! `sum_k f_k p_k / sum_k p_k`. The acquisition adds the uniform
//! reference density (identically 1 on the unit cube) scaled by the
//! sampling parameter `lambda` to the numerator and unscaled to the
//! denominator, so far from all observations it tends to `lambda` while
//! near dense data it approaches the surrogate.

use crate::error::{Error, Result};
use crate::kernel::KernelModel;

/// Uniform reference density on the unit hypercube.
pub const UNIFORM_DENSITY: f64 = 1.0;

pub struct AcquisitionContext<'a> {
    model: &'a KernelModel,
    values: Vec<f64>,
    lambda: f64,
}

impl<'a> AcquisitionContext<'a> {
    pub fn new(model: &'a KernelModel, values: Vec<f64>, lambda: f64) -> Result<Self> {
        if values.len() != model.n_observations() {
            return Err(Error::DimensionMismatch {
                expected: model.n_observations(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) || !lambda.is_finite() {
            return Err(Error::InvalidConfig("non-finite value or lambda".into()));
        }
        Ok(Self {
            model,
            values,
            lambda,
        })
    }

    /// Context with the observation set's own values.
    pub fn from_model(model: &'a KernelModel, lambda: f64) -> Result<Self> {
        Self::new(model, model.observations().values().to_vec(), lambda)
    }

    pub fn model(&self) -> &KernelModel {
        self.model
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dims(&self) -> usize {
        self.model.dims()
    }

    /// Density-weighted value average; always within the observed value
    /// range.
    pub fn surrogate(&self, x: &[f64]) -> f64 {
        let eval = self.model.mixture(&self.values, x);
        eval.sum_fp / eval.sum_p
    }

    /// The lambda-balanced acquisition.
    pub fn acquisition(&self, x: &[f64]) -> f64 {
        let eval = self.model.mixture(&self.values, x);
        (eval.sum_fp + self.lambda * UNIFORM_DENSITY) / (eval.sum_p + UNIFORM_DENSITY)
    }

    /// Acquisition value and its analytic gradient (quotient rule over
    /// the cached mixture).
    pub fn acquisition_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let eval = self.model.mixture_grad(&self.values, x);
        let num = eval.sum_fp + self.lambda * UNIFORM_DENSITY;
        let den = eval.sum_p + UNIFORM_DENSITY;
        let value = num / den;
        let inv_den = 1.0 / den;
        let grad = (0..x.len())
            .map(|i| (eval.grad_fp[i] - value * eval.grad_p[i]) * inv_den)
            .collect();
        (value, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::PosteriorSample;
    use crate::space::ObservationSet;

    /// Network with zero hidden weights and fixed output bias: every
    /// kernel sits at sigmoid(b2) regardless of the observation.
    fn peaked_sample(d: usize, tau: f64, b2: f64) -> PosteriorSample {
        let h = 2;
        PosteriorSample::new(
            vec![0.0; d * h],
            vec![0.0; h],
            vec![0.0; h * h],
            vec![0.0; h],
            vec![0.0; h * d],
            vec![b2; d],
            tau,
        )
        .unwrap()
    }

    /// One observation with value `f1`, kernel centered at sigmoid(0) = 0.5.
    fn single_kernel_model(d: usize, tau: f64, f1: f64) -> KernelModel {
        let obs = ObservationSet::from_pairs(vec![vec![0.5; d]], vec![f1]).unwrap();
        KernelModel::build(vec![peaked_sample(d, tau, 0.0)], obs).unwrap()
    }

    fn spread_model(values: Vec<f64>, tau: f64) -> KernelModel {
        // Kernels all at 0.5 is too degenerate for most tests; use
        // several samples with shifted biases to spread the centers.
        let n = values.len();
        let points: Vec<Vec<f64>> = (0..n)
            .map(|k| vec![0.1 + 0.8 * k as f64 / (n - 1).max(1) as f64])
            .collect();
        let obs = ObservationSet::from_pairs(points, values).unwrap();
        // One sample per shift; identical for all observations, which is
        // fine for exercising the mixture algebra.
        let samples = vec![
            peaked_sample(1, tau, -0.5),
            peaked_sample(1, tau, 0.0),
            peaked_sample(1, tau, 0.5),
        ];
        KernelModel::build(samples, obs).unwrap()
    }

    #[test]
    fn constant_values_give_constant_surrogate() {
        let model = spread_model(vec![3.25; 4], 30.0);
        let ctx = AcquisitionContext::from_model(&model, 0.0).unwrap();
        for x in [[0.05], [0.33], [0.71], [0.99]] {
            let s = ctx.surrogate(&x);
            assert!((s - 3.25).abs() < 1e-9, "{s}");
        }
    }

    #[test]
    fn surrogate_stays_inside_observed_range() {
        let values = vec![-2.0, 0.5, 4.0, 1.0];
        let model = spread_model(values.clone(), 50.0);
        let ctx = AcquisitionContext::from_model(&model, 0.0).unwrap();
        let (lo, hi) = (-2.0, 4.0);
        for i in 0..200 {
            let x = [i as f64 / 199.0];
            let s = ctx.surrogate(&x);
            assert!(s >= lo - 1e-9 && s <= hi + 1e-9, "x={:?}: {s}", x);
        }
    }

    #[test]
    fn dominant_kernel_pins_surrogate_to_its_value() {
        // An input-sensitive hand-built network (a1 = tanh(4x - 2))
        // separates the two kernel centers; with tau = 400 the density at
        // kernel 0's center dominates kernel 1's by far more than 1e6.
        let obs = ObservationSet::from_pairs(vec![vec![0.2], vec![0.8]], vec![5.0, -3.0]).unwrap();
        let sample = PosteriorSample::new(
            vec![4.0],
            vec![-2.0],
            vec![1.2],
            vec![0.0],
            vec![3.0],
            vec![0.0],
            400.0,
        )
        .unwrap();
        let model = KernelModel::build(vec![sample], obs.clone()).unwrap();
        // Centers differ now; query exactly at kernel 0's center.
        let mu0 = model.samples()[0].forward(&obs.points()[0]).unwrap();
        let p0 = model.density_k(0, &mu0).unwrap();
        let p1 = model.density_k(1, &mu0).unwrap();
        assert!(p0 / p1 >= 1e6, "dominance ratio {}", p0 / p1);
        let ctx = AcquisitionContext::from_model(&model, 0.0).unwrap();
        let s = ctx.surrogate(&mu0);
        assert!((s - 5.0).abs() < 1e-5, "{s}");
    }

    #[test]
    fn acquisition_at_lambda_zero_approaches_surrogate_near_data() {
        let model = single_kernel_model(1, 4e4, 2.0);
        let ctx = AcquisitionContext::from_model(&model, 0.0).unwrap();
        let x = [0.5];
        let eval_p = model.density_k(0, &x).unwrap();
        assert!(eval_p > 1.0, "density at center {eval_p}");
        let a = ctx.acquisition(&x);
        let s = ctx.surrogate(&x);
        // Exact identity: a = sum_fp / (sum_p + 1).
        assert!((a - s * eval_p / (eval_p + 1.0)).abs() < 1e-9);
        assert!((a - s).abs() < 2.0 / eval_p);
    }

    #[test]
    fn far_field_tends_to_lambda() {
        let model = single_kernel_model(2, 1e6, 2.0);
        for lambda in [-1.0, 0.0, 0.3, 1.0] {
            let ctx = AcquisitionContext::from_model(&model, lambda).unwrap();
            let a = ctx.acquisition(&[0.999, 0.001]);
            assert!((a - lambda).abs() < 1e-10, "lambda {lambda}: {a}");
        }
    }

    #[test]
    fn scalar_arithmetic_oracle_for_single_observation() {
        // f1 = 2, lambda = -1: alpha(x) = (2 p + lambda) / (p + 1).
        let model = single_kernel_model(1, 800.0, 2.0);
        let ctx = AcquisitionContext::from_model(&model, -1.0).unwrap();
        for x in [[0.5], [0.45], [0.62], [0.05], [0.95]] {
            let p = model.density_k(0, &x).unwrap();
            let want = (2.0 * p - 1.0) / (p + 1.0);
            let got = ctx.acquisition(&x);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
        // With f1 > lambda the kernel center scores higher than the far
        // field, so exploration wins.
        let at_center = ctx.acquisition(&[0.5]);
        let far = ctx.acquisition(&[0.99]);
        assert!(at_center > far);
    }

    #[test]
    fn lambda_monotone_at_fixed_point() {
        let model = spread_model(vec![1.0, -2.0, 0.5], 60.0);
        for x in [[0.1], [0.5], [0.92]] {
            let mut last = f64::NEG_INFINITY;
            for i in 0..9 {
                let lambda = -2.0 + i as f64 * 0.5;
                let ctx = AcquisitionContext::from_model(&model, lambda).unwrap();
                let a = ctx.acquisition(&x);
                assert!(a > last, "x {x:?} lambda {lambda}: {a} <= {last}");
                last = a;
            }
        }
    }

    #[test]
    fn bounded_by_lambda_and_value_range() {
        let values = vec![-1.5, 2.0, 0.0];
        let model = spread_model(values.clone(), 45.0);
        for lambda in [-3.0, -1.0, 0.0, 1.0, 4.0] {
            let ctx = AcquisitionContext::from_model(&model, lambda).unwrap();
            let lo = values.iter().cloned().fold(lambda, f64::min);
            let hi = values.iter().cloned().fold(lambda, f64::max);
            for i in 0..100 {
                let x = [i as f64 / 99.0];
                let a = ctx.acquisition(&x);
                assert!(a >= lo - 1e-9 && a <= hi + 1e-9, "lambda {lambda} x {x:?}: {a}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let obs = ObservationSet::from_pairs(
            vec![vec![0.3, 0.7], vec![0.6, 0.2], vec![0.85, 0.85]],
            vec![1.5, -0.5, 0.25],
        )
        .unwrap();
        let samples = vec![
            peaked_sample(2, 30.0, 0.3),
            peaked_sample(2, 90.0, -0.4),
            peaked_sample(2, 55.0, 0.0),
        ];
        let model = KernelModel::build(samples, obs).unwrap();
        let ctx = AcquisitionContext::from_model(&model, -0.7).unwrap();
        let h = 1e-5;
        for trial in 0..100 {
            let x = vec![
                0.04 + 0.92 * ((trial * 53) % 100) as f64 / 100.0,
                0.04 + 0.92 * ((trial * 29) % 100) as f64 / 100.0,
            ];
            let (_, grad) = ctx.acquisition_grad(&x);
            for i in 0..2 {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (ctx.acquisition(&xp) - ctx.acquisition(&xm)) / (2.0 * h);
                assert!(
                    (grad[i] - fd).abs() <= 1e-6 * fd.abs().max(1e-3),
                    "trial {trial} i={i}: {} vs {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn single_gaussian_gradient_points_towards_center_when_value_negative() {
        // One kernel, f1 < 0, lambda = 0: numerator f1 p / (p + 1) is
        // minimized at the center, so the gradient at x points away from
        // the center direction times a negative factor, i.e. descent
        // moves towards the center.
        let model = single_kernel_model(1, 300.0, -1.0);
        let ctx = AcquisitionContext::from_model(&model, 0.0).unwrap();
        let center = 0.5;
        for x in [0.35, 0.45, 0.55, 0.68] {
            let (_, grad) = ctx.acquisition_grad(&[x]);
            // Closed form: alpha = f1 p / (p + 1); d alpha / dx =
            // f1 p' / (p + 1)^2 with p' = -tau (x - mu) p.
            let p = model.density_k(0, &[x]).unwrap();
            let pp = -300.0 * (x - center) * (p - crate::kernel::DENSITY_FLOOR);
            let want = -1.0 * pp / (p + 1.0) / (p + 1.0);
            assert!(
                (grad[0] - want).abs() <= 1e-9 * want.abs().max(1e-12),
                "x={x}: {} vs {want}",
                grad[0]
            );
            // Descent direction (-grad) points towards the center.
            assert!((-grad[0]) * (center - x) > 0.0, "x={x}");
        }
    }

    #[test]
    fn stationary_point_has_tiny_gradient() {
        // Symmetric single kernel: the center is an interior stationary
        // point of the acquisition.
        let model = single_kernel_model(1, 200.0, -1.0);
        let ctx = AcquisitionContext::from_model(&model, 0.0).unwrap();
        let (_, grad) = ctx.acquisition_grad(&[0.5]);
        assert!(grad[0].abs() < 1e-8, "{}", grad[0]);
    }

    #[test]
    fn exploration_exploitation_direction() {
        // One observation, sharp kernel. If f1 < lambda the global
        // minimizer of the acquisition is at the kernel peak; if
        // f1 > lambda it is in the far field.
        for (f1, lambda, expect_near) in [(-2.0, 0.0, true), (2.0, 0.0, false)] {
            let model = single_kernel_model(1, 500.0, f1);
            let ctx = AcquisitionContext::from_model(&model, lambda).unwrap();
            let mut best_x = 0.0;
            let mut best_a = f64::INFINITY;
            for i in 0..=2000 {
                let x = [i as f64 / 2000.0];
                let a = ctx.acquisition(&x);
                if a < best_a {
                    best_a = a;
                    best_x = x[0];
                }
            }
            let near = (best_x - 0.5).abs() < 0.1;
            assert_eq!(near, expect_near, "f1={f1}: argmin {best_x}");
        }
    }
}
