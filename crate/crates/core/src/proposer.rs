//! Proxy optimization and batched proposals.
//!
//! Each proposal minimizes one acquisition function by uniform sampling
//! followed by bounded quasi-Newton refinement of the most promising
//! candidates. A batch shares a single posterior sampling run: the
//! per-lambda acquisition contexts differ only in the scalar mixed into
//! the numerator, so retraining per lambda would buy nothing.

use crate::acquisition::AcquisitionContext;
use crate::bnn::{sample_posterior, BnnSpec, SamplerStats};
use crate::error::{Error, Result};
use crate::kernel::KernelModel;
use crate::lbfgs::BoxLbfgs;
use crate::seed::derive;
use crate::space::ObservationSet;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Hard ceiling on uniform candidates per proxy search.
pub const CANDIDATE_CAP: usize = 100_000;

/// Two proposals closer than this (max-norm) count as duplicates.
const DUPLICATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ProxyConfig {
    pub samples_per_dim: usize,
    pub refine_fraction: f64,
    pub max_refine_steps: usize,
    pub seed: u64,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            samples_per_dim: 2000,
            refine_fraction: 0.5,
            max_refine_steps: 20,
            seed: 0,
        }
    }
}

impl ProxyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_dim == 0 {
            return Err(Error::InvalidConfig("samples_per_dim must be >= 1".into()));
        }
        if !(self.refine_fraction > 0.0 && self.refine_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "refine_fraction must be in (0, 1], got {}",
                self.refine_fraction
            )));
        }
        Ok(())
    }
}

/// The lambda schedule of one batch.
#[derive(Debug, Clone)]
pub struct BatchPolicy {
    lambdas: Vec<f64>,
}

impl BatchPolicy {
    /// `p` values evenly spaced over `[-1, 1]`; a single proposal uses
    /// `lambda = 0`.
    pub fn evenly_spaced(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        let lambdas = if p == 1 {
            vec![0.0]
        } else {
            (0..p)
                .map(|j| -1.0 + 2.0 * j as f64 / (p - 1) as f64)
                .collect()
        };
        Ok(Self { lambdas })
    }

    pub fn custom(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidConfig("empty lambda list".into()));
        }
        if lambdas.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidConfig("non-finite lambda".into()));
        }
        Ok(Self { lambdas })
    }

    pub fn p(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }
}

#[derive(Debug, Clone)]
pub struct ProxyOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    /// Set when the uniform candidate count was clipped to
    /// [`CANDIDATE_CAP`].
    pub cap_hit: bool,
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Global minimizer search for one acquisition context: uniform scan,
/// then projected quasi-Newton descent on the best `refine_fraction` of
/// the candidates. Ties resolve to the lexicographically smallest point.
pub fn minimize_acquisition(ctx: &AcquisitionContext, cfg: &ProxyConfig) -> Result<ProxyOutcome> {
    cfg.validate()?;
    let d = ctx.dims();
    let requested = cfg.samples_per_dim.saturating_mul(d);
    let n_cand = requested.min(CANDIDATE_CAP);
    let cap_hit = requested > CANDIDATE_CAP;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut candidates = Vec::with_capacity(n_cand);
    for _ in 0..n_cand {
        let point: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        candidates.push(point);
    }

    let scores: Vec<f64> = candidates.iter().map(|x| ctx.acquisition(x)).collect();

    let mut order: Vec<usize> = (0..n_cand).collect();
    order.sort_by(|&a, &b| {
        scores[a].total_cmp(&scores[b]).then_with(|| {
            if lex_less(&candidates[a], &candidates[b]) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        })
    });

    let mut best_point = candidates[order[0]].clone();
    let mut best_value = scores[order[0]];

    if cfg.max_refine_steps > 0 {
        let refine_count = ((cfg.refine_fraction * n_cand as f64).ceil() as usize)
            .clamp(1, n_cand);
        let lo = vec![0.0; d];
        let hi = vec![1.0; d];
        let optimizer = BoxLbfgs {
            max_iters: cfg.max_refine_steps,
            ..Default::default()
        };
        for &idx in order.iter().take(refine_count) {
            let (point, value) = optimizer.minimize(
                |x| ctx.acquisition_grad(x),
                &candidates[idx],
                &lo,
                &hi,
            );
            if value < best_value || (value == best_value && lex_less(&point, &best_point)) {
                best_value = value;
                best_point = point;
            }
        }
    }

    for v in &mut best_point {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(ProxyOutcome {
        point: best_point,
        value: best_value,
        cap_hit,
    })
}

#[derive(Debug, Clone)]
pub struct ProposalBatch {
    /// One proposal per lambda, in policy order.
    pub points: Vec<Vec<f64>>,
    pub sampler: SamplerStats,
    pub cap_hit: bool,
}

/// Train one surrogate on `obs` and propose `policy.p()` points, one per
/// lambda. `values` are the objective values entering the acquisition
/// (usually `obs.values()`, possibly rescaled by the caller). Duplicate
/// proposals within 1e-6 are retried with a fresh uniform restart of the
/// proxy search.
pub fn propose_batch(
    obs: &ObservationSet,
    values: &[f64],
    policy: &BatchPolicy,
    bnn_spec: &BnnSpec,
    proxy: &ProxyConfig,
    seed: u64,
) -> Result<ProposalBatch> {
    if obs.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let (samples, sampler_stats) = sample_posterior(obs, bnn_spec, derive(seed, 0))?;
    let model = KernelModel::build(samples, obs.clone())?;

    let mut points: Vec<Vec<f64>> = Vec::with_capacity(policy.p());
    let mut cap_hit = false;
    for (j, &lambda) in policy.lambdas().iter().enumerate() {
        let ctx = AcquisitionContext::new(&model, values.to_vec(), lambda)?;
        let mut cfg = ProxyConfig {
            seed: derive(seed, 1 + j as u64),
            ..proxy.clone()
        };
        let mut outcome = minimize_acquisition(&ctx, &cfg)?;
        cap_hit |= outcome.cap_hit;
        let mut attempt = 0u64;
        while attempt < 6 && points.iter().any(|p| max_dist(p, &outcome.point) <= DUPLICATE_TOL) {
            cfg.seed = derive(seed, 0x1000 + j as u64 * 16 + attempt);
            outcome = minimize_acquisition(&ctx, &cfg)?;
            cap_hit |= outcome.cap_hit;
            attempt += 1;
        }
        points.push(outcome.point);
    }

    Ok(ProposalBatch {
        points,
        sampler: sampler_stats,
        cap_hit,
    })
}

fn max_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::{sampler_invocations, PosteriorSample};

    #[test]
    fn even_spacing() {
        assert_eq!(BatchPolicy::evenly_spaced(1).unwrap().lambdas(), &[0.0]);
        let p4 = BatchPolicy::evenly_spaced(4).unwrap();
        let want = [-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0];
        for (a, b) in p4.lambdas().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let p3 = BatchPolicy::evenly_spaced(3).unwrap();
        assert_eq!(p3.lambdas(), &[-1.0, 0.0, 1.0]);
    }

    fn single_kernel_model(tau: f64, f1: f64) -> KernelModel {
        let obs = ObservationSet::from_pairs(vec![vec![0.5]], vec![f1]).unwrap();
        let sample = PosteriorSample::new(
            vec![0.6],
            vec![-0.3],
            vec![1.0],
            vec![0.2],
            vec![2.0],
            vec![-0.9],
            tau,
        )
        .unwrap();
        KernelModel::build(vec![sample], obs).unwrap()
    }

    #[test]
    fn finds_single_kernel_peak() {
        // f1 = -1, lambda = 0: the acquisition's global minimum is at the
        // kernel density peak. Grid-scan oracle at 1e-4 resolution.
        let model = single_kernel_model(400.0, -1.0);
        let ctx = AcquisitionContext::from_model(&model, 0.0).unwrap();
        let mut oracle_x = 0.0;
        let mut oracle_p = f64::NEG_INFINITY;
        for i in 0..=10_000 {
            let x = i as f64 * 1e-4;
            let p = model.density_k(0, &[x]).unwrap();
            if p > oracle_p {
                oracle_p = p;
                oracle_x = x;
            }
        }
        let cfg = ProxyConfig {
            samples_per_dim: 500,
            seed: 11,
            ..Default::default()
        };
        let out = minimize_acquisition(&ctx, &cfg).unwrap();
        assert!(
            (out.point[0] - oracle_x).abs() < 1e-3,
            "proposal {} vs oracle {oracle_x}",
            out.point[0]
        );
    }

    #[test]
    fn proposals_stay_in_unit_cube_and_are_deterministic() {
        let model = single_kernel_model(50.0, 2.0);
        let ctx = AcquisitionContext::from_model(&model, -1.0).unwrap();
        for seed in 0..20 {
            let cfg = ProxyConfig {
                samples_per_dim: 200,
                seed,
                ..Default::default()
            };
            let a = minimize_acquisition(&ctx, &cfg).unwrap();
            let b = minimize_acquisition(&ctx, &cfg).unwrap();
            assert_eq!(a.point, b.point);
            assert!(a.point.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn candidate_cap_is_flagged() {
        let model = single_kernel_model(50.0, 1.0);
        let ctx = AcquisitionContext::from_model(&model, 0.0).unwrap();
        let cfg = ProxyConfig {
            samples_per_dim: 200_000,
            refine_fraction: 1e-5,
            max_refine_steps: 0,
            seed: 3,
        };
        let out = minimize_acquisition(&ctx, &cfg).unwrap();
        assert!(out.cap_hit);
    }

    fn small_obs() -> ObservationSet {
        ObservationSet::from_pairs(
            vec![vec![0.2, 0.3], vec![0.7, 0.6], vec![0.4, 0.9]],
            vec![1.0, -0.5, 0.2],
        )
        .unwrap()
    }

    #[test]
    fn batch_has_policy_order_and_single_training_run() {
        let obs = small_obs();
        let spec = BnnSpec::with_options(2, 8, 2).unwrap();
        let policy = BatchPolicy::evenly_spaced(4).unwrap();
        let proxy = ProxyConfig {
            samples_per_dim: 100,
            max_refine_steps: 5,
            ..Default::default()
        };
        let before = sampler_invocations();
        let batch = propose_batch(&obs, obs.values(), &policy, &spec, &proxy, 42).unwrap();
        assert_eq!(sampler_invocations(), before + 1);
        assert_eq!(batch.points.len(), 4);
        for p in &batch.points {
            assert_eq!(p.len(), 2);
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn batch_is_deterministic() {
        let obs = small_obs();
        let spec = BnnSpec::with_options(2, 6, 2).unwrap();
        let policy = BatchPolicy::evenly_spaced(3).unwrap();
        let proxy = ProxyConfig {
            samples_per_dim: 80,
            max_refine_steps: 4,
            ..Default::default()
        };
        let a = propose_batch(&obs, obs.values(), &policy, &spec, &proxy, 7).unwrap();
        let b = propose_batch(&obs, obs.values(), &policy, &spec, &proxy, 7).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn each_proposal_minimizes_its_own_acquisition() {
        // alpha_a evaluated at its own proposal is no larger than at any
        // other lambda's proposal.
        let obs = small_obs();
        let spec = BnnSpec::with_options(2, 6, 2).unwrap();
        let policy = BatchPolicy::evenly_spaced(3).unwrap();
        let proxy = ProxyConfig {
            samples_per_dim: 150,
            max_refine_steps: 8,
            ..Default::default()
        };
        let seed = 13;
        let (samples, _) = sample_posterior(&obs, &spec, derive(seed, 0)).unwrap();
        let model = KernelModel::build(samples, obs.clone()).unwrap();
        let batch = propose_batch(&obs, obs.values(), &policy, &spec, &proxy, seed).unwrap();
        for (j, &lambda) in policy.lambdas().iter().enumerate() {
            let ctx = AcquisitionContext::from_model(&model, lambda).unwrap();
            let own = ctx.acquisition(&batch.points[j]);
            for other in &batch.points {
                assert!(own <= ctx.acquisition(other) + 1e-9);
            }
        }
    }
}
