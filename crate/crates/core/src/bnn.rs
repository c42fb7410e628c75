//! The Bayesian network behind the kernel densities.
//!
//! A three-layer network (tanh, tanh, sigmoid) maps a point of the unit
//! hypercube back into the unit hypercube. Trained on the observed points
//! in an autoencoder fashion, each posterior draw of its weights, biases
//! and Gaussian precision `tau` defines one realization of the kernels;
//! `tau` carries a Gamma prior whose mean grows with the observation
//! count, so the kernels sharpen as evidence accumulates.

use crate::error::{Error, Result};
use crate::hmc::{Chain, HmcOptions};
use crate::math::{sigmoid_slice, tanh_slice};
use crate::space::ObservationSet;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::atomic::{AtomicUsize, Ordering};

const LN_2PI: f64 = 1.8378770664093453;

/// Precision prior mean prefactor: with a single observation the implied
/// kernel standard deviation equals that of a uniform draw from `[0, 1]`.
pub const PRECISION_PREFACTOR: f64 = 12.0;

static SAMPLER_INVOCATIONS: AtomicUsize = AtomicUsize::new(0);

/// Number of [`sample_posterior`] calls since process start; lets callers
/// assert how many trainings a higher-level routine triggered.
pub fn sampler_invocations() -> usize {
    SAMPLER_INVOCATIONS.load(Ordering::Relaxed)
}

/// Architecture and prior hyperparameters.
#[derive(Debug, Clone)]
pub struct BnnSpec {
    pub input_dim: usize,
    pub hidden_units: usize,
    /// Exponent of the precision schedule `alpha = 12 n^gamma`; one of 1,
    /// 2 or 3.
    pub shrink_exponent: u32,
}

impl BnnSpec {
    pub fn new(input_dim: usize) -> Result<Self> {
        Self::with_options(input_dim, 50, 2)
    }

    pub fn with_options(input_dim: usize, hidden_units: usize, shrink_exponent: u32) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be >= 1".into()));
        }
        if hidden_units == 0 {
            return Err(Error::InvalidConfig("hidden_units must be >= 1".into()));
        }
        if !(1..=3).contains(&shrink_exponent) {
            return Err(Error::InvalidConfig(format!(
                "shrink_exponent must be 1, 2 or 3, got {shrink_exponent}"
            )));
        }
        Ok(Self {
            input_dim,
            hidden_units,
            shrink_exponent,
        })
    }

    /// Gamma shape for `n` observations.
    pub fn gamma_alpha(&self, n: usize) -> f64 {
        PRECISION_PREFACTOR * (n as f64).powi(self.shrink_exponent as i32)
    }

    /// Gamma rate; fixed.
    pub fn gamma_beta(&self) -> f64 {
        1.0
    }

    /// Number of weights and biases (excluding the precision).
    pub fn weight_count(&self) -> usize {
        let (d, h) = (self.input_dim, self.hidden_units);
        d * h + h * h + h * d + h + h + d
    }

    /// Full unconstrained state dimension: weights, biases and `ln tau`.
    pub fn state_dim(&self) -> usize {
        self.weight_count() + 1
    }

    // Flat layout: w0 | b0 | w1 | b1 | w2 | b2 | ln tau.
    fn offsets(&self) -> [usize; 7] {
        let (d, h) = (self.input_dim, self.hidden_units);
        let w0 = 0;
        let b0 = w0 + d * h;
        let w1 = b0 + h;
        let b1 = w1 + h * h;
        let w2 = b1 + h;
        let b2 = w2 + h * d;
        let z = b2 + d;
        [w0, b0, w1, b1, w2, b2, z]
    }
}

/// One posterior realization of the network.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    /// `input_dim x hidden`, row-major.
    pub w0: Vec<f64>,
    pub b0: Vec<f64>,
    /// `hidden x hidden`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `hidden x input_dim`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub tau: f64,
    pub input_dim: usize,
    pub hidden_units: usize,
}

impl PosteriorSample {
    pub fn from_flat(spec: &BnnSpec, flat: &[f64]) -> Result<Self> {
        if flat.len() != spec.state_dim() {
            return Err(Error::Shape(format!(
                "flat state has {} entries, expected {}",
                flat.len(),
                spec.state_dim()
            )));
        }
        let [w0, b0, w1, b1, w2, b2, z] = spec.offsets();
        let tau = flat[z].exp();
        if !(tau > 0.0) {
            return Err(Error::Shape(format!("non-positive tau {tau}")));
        }
        Ok(Self {
            w0: flat[w0..b0].to_vec(),
            b0: flat[b0..w1].to_vec(),
            w1: flat[w1..b1].to_vec(),
            b1: flat[b1..w2].to_vec(),
            w2: flat[w2..b2].to_vec(),
            b2: flat[b2..z].to_vec(),
            tau,
            input_dim: spec.input_dim,
            hidden_units: spec.hidden_units,
        })
    }

    /// Build a sample from explicit matrices; shapes are checked.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        w0: Vec<f64>,
        b0: Vec<f64>,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
        tau: f64,
    ) -> Result<Self> {
        let d = b2.len();
        let h = b0.len();
        if d == 0 || h == 0 {
            return Err(Error::Shape("empty layer".into()));
        }
        if w0.len() != d * h || w1.len() != h * h || w2.len() != h * d || b1.len() != h {
            return Err(Error::Shape(format!(
                "inconsistent shapes: w0 {}, w1 {}, w2 {}, b0 {}, b1 {}, b2 {}",
                w0.len(),
                w1.len(),
                w2.len(),
                b0.len(),
                b1.len(),
                b2.len()
            )));
        }
        if !(tau > 0.0) {
            return Err(Error::Shape(format!("non-positive tau {tau}")));
        }
        Ok(Self {
            w0,
            b0,
            w1,
            b1,
            w2,
            b2,
            tau,
            input_dim: d,
            hidden_units: h,
        })
    }

    /// Network output `phi3` for an input of the unit cube; every
    /// component lies in the open interval (0, 1).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has {} components, network expects {}",
                x.len(),
                self.input_dim
            )));
        }
        let h = self.hidden_units;
        let d = self.input_dim;

        let mut a1 = self.b0.clone();
        for i in 0..d {
            axpy(&mut a1, x[i], &self.w0[i * h..(i + 1) * h]);
        }
        tanh_slice(&mut a1);

        let mut a2 = self.b1.clone();
        for i in 0..h {
            axpy(&mut a2, a1[i], &self.w1[i * h..(i + 1) * h]);
        }
        tanh_slice(&mut a2);

        let mut a3 = self.b2.clone();
        for i in 0..h {
            axpy(&mut a3, a2[i], &self.w2[i * d..(i + 1) * d]);
        }
        sigmoid_slice(&mut a3);
        Ok(a3)
    }
}

#[inline]
fn axpy(acc: &mut [f64], x: f64, row: &[f64]) {
    for (a, w) in acc.iter_mut().zip(row) {
        *a = w.mul_add(x, *a);
    }
}

/// Dot product with eight independent accumulators so the reduction
/// vectorizes.
#[inline]
fn dot8(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, ra) = a.split_at(a.len() / 8 * 8);
    let (cb, rb) = b.split_at(ca.len());
    for (xs, ys) in ca.chunks_exact(8).zip(cb.chunks_exact(8)) {
        for k in 0..8 {
            acc[k] = xs[k].mul_add(ys[k], acc[k]);
        }
    }
    let mut s = acc.iter().sum::<f64>();
    for (x, y) in ra.iter().zip(rb) {
        s = x.mul_add(*y, s);
    }
    s
}

/// Scratch buffers reused across log-posterior evaluations.
///
/// Observations are processed in blocks so each weight row streams from
/// cache once per block instead of once per observation.
const OBS_BLOCK: usize = 16;

struct Workspace {
    a1: Vec<f64>,
    a2: Vec<f64>,
    a3: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
    d3: Vec<f64>,
}

impl Workspace {
    fn new(spec: &BnnSpec) -> Self {
        let (d, h) = (spec.input_dim, spec.hidden_units);
        Self {
            a1: vec![0.0; OBS_BLOCK * h],
            a2: vec![0.0; OBS_BLOCK * h],
            a3: vec![0.0; OBS_BLOCK * d],
            d1: vec![0.0; OBS_BLOCK * h],
            d2: vec![0.0; OBS_BLOCK * h],
            d3: vec![0.0; OBS_BLOCK * d],
        }
    }
}

/// Unnormalized log-posterior of a network state given the observations:
/// per-dimension Gaussian reconstruction likelihood with precision `tau`,
/// standard-normal priors on weights and biases and the Gamma prior on
/// `tau`. Rejected states (`tau <= 0`) score negative infinity.
pub fn log_posterior(sample: &PosteriorSample, obs: &ObservationSet, spec: &BnnSpec) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if obs.dims() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: obs.dims(),
        });
    }
    if !(sample.tau > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let tau = sample.tau;
    let n = obs.n();
    let d = spec.input_dim;

    let mut ssr = 0.0;
    for point in obs.points() {
        let out = sample.forward(point)?;
        for i in 0..d {
            let r = point[i] - out[i];
            ssr += r * r;
        }
    }
    let loglik = 0.5 * (n * d) as f64 * (tau.ln() - LN_2PI) - 0.5 * tau * ssr;

    let mut prior = 0.0;
    for block in [
        &sample.w0, &sample.b0, &sample.w1, &sample.b1, &sample.w2, &sample.b2,
    ] {
        for &w in block.iter() {
            prior -= 0.5 * w * w;
        }
    }

    let alpha = spec.gamma_alpha(n);
    let beta = spec.gamma_beta();
    let tau_prior = (alpha - 1.0) * tau.ln() - beta * tau;

    Ok(loglik + prior + tau_prior)
}

/// Log density of the HMC target over the flat unconstrained state
/// (weights, biases, `z = ln tau`), including the Jacobian of the log
/// transform, with its gradient written into `grad`.
fn log_target_and_grad(
    spec: &BnnSpec,
    obs: &ObservationSet,
    state: &[f64],
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    let (d, h) = (spec.input_dim, spec.hidden_units);
    let [o_w0, o_b0, o_w1, o_b1, o_w2, o_b2, o_z] = spec.offsets();
    let n = obs.n();
    let z = state[o_z];
    let tau = z.exp();

    grad.fill(0.0);
    if !tau.is_finite() || tau <= 0.0 {
        return f64::NEG_INFINITY;
    }

    let w0 = &state[o_w0..o_b0];
    let b0 = &state[o_b0..o_w1];
    let w1 = &state[o_w1..o_b1];
    let b1 = &state[o_b1..o_w2];
    let w2 = &state[o_w2..o_b2];
    let b2 = &state[o_b2..o_z];

    let points = obs.points();
    let mut ssr = 0.0;
    let mut start = 0;
    while start < n {
        let count = OBS_BLOCK.min(n - start);
        let block = &points[start..start + count];

        // Forward for the whole block; weight rows stream once.
        for (b, point) in block.iter().enumerate() {
            ws.a1[b * h..(b + 1) * h].copy_from_slice(b0);
            for i in 0..d {
                axpy(&mut ws.a1[b * h..(b + 1) * h], point[i], &w0[i * h..(i + 1) * h]);
            }
        }
        tanh_slice(&mut ws.a1[..count * h]);

        for b in 0..count {
            ws.a2[b * h..(b + 1) * h].copy_from_slice(b1);
        }
        for i in 0..h {
            let row = &w1[i * h..(i + 1) * h];
            for b in 0..count {
                let ai = ws.a1[b * h + i];
                axpy(&mut ws.a2[b * h..(b + 1) * h], ai, row);
            }
        }
        tanh_slice(&mut ws.a2[..count * h]);

        for b in 0..count {
            ws.a3[b * d..(b + 1) * d].copy_from_slice(b2);
        }
        for i in 0..h {
            let row = &w2[i * d..(i + 1) * d];
            for b in 0..count {
                let ai = ws.a2[b * h + i];
                axpy(&mut ws.a3[b * d..(b + 1) * d], ai, row);
            }
        }
        sigmoid_slice(&mut ws.a3[..count * d]);

        // Backward: d loglik / d a3 = tau * residual, chained through the
        // sigmoid, then layer by layer with the block sharing row loads.
        for (b, point) in block.iter().enumerate() {
            for i in 0..d {
                let a3 = ws.a3[b * d + i];
                let r = point[i] - a3;
                ssr += r * r;
                ws.d3[b * d + i] = tau * r * a3 * (1.0 - a3);
            }
        }

        for i in 0..h {
            let row = &w2[i * d..(i + 1) * d];
            let grow = &mut grad[o_w2 + i * d..o_w2 + (i + 1) * d];
            for b in 0..count {
                let d3b = &ws.d3[b * d..(b + 1) * d];
                axpy(grow, ws.a2[b * h + i], d3b);
                let e = dot8(row, d3b);
                let a2 = ws.a2[b * h + i];
                ws.d2[b * h + i] = e * (1.0 - a2 * a2);
            }
        }
        for b in 0..count {
            axpy(&mut grad[o_b2..o_b2 + d], 1.0, &ws.d3[b * d..(b + 1) * d]);
        }

        for i in 0..h {
            let row = &w1[i * h..(i + 1) * h];
            let grow = &mut grad[o_w1 + i * h..o_w1 + (i + 1) * h];
            for b in 0..count {
                let d2b = &ws.d2[b * h..(b + 1) * h];
                axpy(grow, ws.a1[b * h + i], d2b);
                let e = dot8(row, d2b);
                let a1 = ws.a1[b * h + i];
                ws.d1[b * h + i] = e * (1.0 - a1 * a1);
            }
        }
        for b in 0..count {
            axpy(&mut grad[o_b1..o_b1 + h], 1.0, &ws.d2[b * h..(b + 1) * h]);
        }

        for i in 0..d {
            let grow = &mut grad[o_w0 + i * h..o_w0 + (i + 1) * h];
            for (b, point) in block.iter().enumerate() {
                axpy(grow, point[i], &ws.d1[b * h..(b + 1) * h]);
            }
        }
        for b in 0..count {
            axpy(&mut grad[o_b0..o_b0 + h], 1.0, &ws.d1[b * h..(b + 1) * h]);
        }

        start += count;
    }

    let loglik = 0.5 * (n * d) as f64 * (tau.ln() - LN_2PI) - 0.5 * tau * ssr;

    // Standard-normal prior on weights and biases.
    let mut prior = 0.0;
    for i in 0..o_z {
        prior -= 0.5 * state[i] * state[i];
        grad[i] -= state[i];
    }

    let alpha = spec.gamma_alpha(n);
    let beta = spec.gamma_beta();
    // Gamma prior plus the Jacobian of tau = exp(z).
    let tau_terms = (alpha - 1.0) * z - beta * tau + z;
    grad[o_z] = 0.5 * (n * d) as f64 - 0.5 * tau * ssr + alpha - beta * tau;

    loglik + prior + tau_terms
}

/// Expose the gradient core for benchmarking; returns the log target.
#[doc(hidden)]
pub fn debug_log_target(
    spec: &BnnSpec,
    obs: &ObservationSet,
    state: &[f64],
    grad: &mut [f64],
) -> f64 {
    let mut ws = Workspace::new(spec);
    log_target_and_grad(spec, obs, state, grad, &mut ws)
}

/// Diagnostics reported from one posterior sampling run.
#[derive(Debug, Clone)]
pub struct SamplerStats {
    pub mean_acceptance: f64,
    pub step_size: f64,
    pub divergences: usize,
    /// Set when the post-burn-in acceptance rate fell below 0.05.
    pub low_acceptance: bool,
}

const BURN_IN: usize = 500;
const DRAWS: usize = 1000;
const THIN: usize = 10;
const WARM_START_STEPS: usize = 10;

/// Adam ascent on the log target; moves the chain start into the
/// posterior bulk so burn-in spends its budget exploring rather than
/// finding it.
fn warm_start(
    spec: &BnnSpec,
    obs: &ObservationSet,
    state: &mut [f64],
    ws: &mut Workspace,
) {
    let dim = state.len();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    for step in 0..WARM_START_STEPS {
        let lp = log_target_and_grad(spec, obs, state, &mut grad, ws);
        if !lp.is_finite() {
            break;
        }
        let lr = 0.05 * (1.0 - step as f64 / WARM_START_STEPS as f64).max(0.1);
        let t = (step + 1) as f64;
        let bc1 = 1.0 - f64::powf(b1, t);
        let bc2 = 1.0 - f64::powf(b2, t);
        for i in 0..dim {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            state[i] += lr * mhat / (vhat.sqrt() + eps);
        }
    }
}


/// Draw the retained posterior samples for `obs`.
///
/// Protocol: 500 burn-in iterations, then 1000 iterations keeping every
/// tenth state, i.e. exactly 100 retained samples. Deterministic for a
/// fixed seed.
pub fn sample_posterior(
    obs: &ObservationSet,
    spec: &BnnSpec,
    seed: u64,
) -> Result<(Vec<PosteriorSample>, SamplerStats)> {
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if obs.dims() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            got: obs.dims(),
        });
    }
    SAMPLER_INVOCATIONS.fetch_add(1, Ordering::Relaxed);

    let dim = spec.state_dim();
    let [_, _, _, _, _, _, o_z] = spec.offsets();
    let n = obs.n();
    let d = spec.input_dim;
    let alpha = spec.gamma_alpha(n);

    // Small random weights, then the precision at its conditional mode
    // given those weights.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = vec![0.0; dim];
    for v in init.iter_mut().take(o_z) {
        let g: f64 = rng.sample(StandardNormal);
        *v = 0.1 * g;
    }
    let init_sample = PosteriorSample::from_flat(spec, &{
        let mut tmp = init.clone();
        tmp[o_z] = 0.0;
        tmp
    })?;
    let mut ssr0 = 0.0;
    for point in obs.points() {
        let out = init_sample.forward(point)?;
        for i in 0..d {
            let r = point[i] - out[i];
            ssr0 += r * r;
        }
    }
    init[o_z] = ((alpha + 0.5 * (n * d) as f64) / (1.0 + 0.5 * ssr0)).ln();

    let mut ws = Workspace::new(spec);
    warm_start(spec, obs, &mut init, &mut ws);

    // Anticipated posterior scales: order one for weights and biases,
    // 1 / (alpha + n d / 2) for ln tau.
    let mut inv_mass = vec![1.0; dim];
    inv_mass[o_z] = 1.0 / (alpha + 0.5 * (n * d) as f64);

    let mut target =
        |state: &[f64], grad: &mut [f64]| log_target_and_grad(spec, obs, state, grad, &mut ws);

    let opts = HmcOptions {
        leapfrog_steps: 10,
        burn_in: BURN_IN,
        draws: DRAWS,
        thin: THIN,
        target_accept: 0.65,
        inv_mass_init: Some(inv_mass),
    };
    let chain = Chain::new(init, crate::seed::derive(seed, 0x4d43_4d43), opts, &mut target)?;
    let (states, chain_stats) = chain.run(&mut target)?;

    let samples = states
        .iter()
        .map(|s| PosteriorSample::from_flat(spec, s))
        .collect::<Result<Vec<_>>>()?;

    let stats = SamplerStats {
        mean_acceptance: chain_stats.mean_acceptance,
        step_size: chain_stats.step_size,
        divergences: chain_stats.divergences,
        low_acceptance: chain_stats.mean_acceptance < 0.05,
    };
    Ok((samples, stats))
}
