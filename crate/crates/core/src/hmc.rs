//! Hamiltonian Monte Carlo over an unconstrained state vector.
//!
//! Fixed leapfrog path length, dual-averaged step size targeting a given
//! acceptance rate, and a diagonal mass matrix re-estimated once in the
//! middle of burn-in from the chain's own variance. Everything is driven
//! by a seeded ChaCha stream, so runs are bit-reproducible.

use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct HmcOptions {
    pub leapfrog_steps: usize,
    pub burn_in: usize,
    pub draws: usize,
    pub thin: usize,
    pub target_accept: f64,
    /// Initial diagonal of the inverse mass matrix (per-coordinate scale
    /// guess). Defaults to ones.
    pub inv_mass_init: Option<Vec<f64>>,
}

impl Default for HmcOptions {
    fn default() -> Self {
        Self {
            leapfrog_steps: 10,
            burn_in: 500,
            draws: 1000,
            thin: 10,
            target_accept: 0.65,
            inv_mass_init: None,
        }
    }
}

/// Diagnostics of one chain.
#[derive(Debug, Clone)]
pub struct ChainStats {
    /// Mean Metropolis acceptance probability over the sampling phase.
    pub mean_acceptance: f64,
    /// Step size in effect after burn-in.
    pub step_size: f64,
    /// Proposals rejected because the Hamiltonian became non-finite.
    pub divergences: usize,
}

struct DualAveraging {
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    m: usize,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps0).ln(),
            log_eps: eps0.ln(),
            log_eps_bar: 0.0,
            h_bar: 0.0,
            m: 0,
            target,
        }
    }

    fn update(&mut self, accept_prob: f64) {
        self.m += 1;
        let m = self.m as f64;
        let w = 1.0 / (m + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        self.log_eps = self.mu - m.sqrt() / Self::GAMMA * self.h_bar;
        let k = m.powf(-Self::KAPPA);
        self.log_eps_bar = k * self.log_eps + (1.0 - k) * self.log_eps_bar;
    }

    fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    fn averaged(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

struct Welford {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn add(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    fn variance(&self, i: usize) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2[i] / (self.count as f64 - 1.0)
        }
    }
}

pub struct Chain {
    dim: usize,
    opts: HmcOptions,
    rng: ChaCha8Rng,
    position: Vec<f64>,
    logp: f64,
    grad: Vec<f64>,
    inv_mass: Vec<f64>,
}

impl Chain {
    /// `target` fills the gradient buffer and returns the log density (up
    /// to a constant). The chain starts from `init` and fails immediately
    /// if the target is not finite there.
    pub fn new(
        init: Vec<f64>,
        seed: u64,
        opts: HmcOptions,
        target: &mut dyn FnMut(&[f64], &mut [f64]) -> f64,
    ) -> Result<Self> {
        let dim = init.len();
        let mut grad = vec![0.0; dim];
        let logp = target(&init, &mut grad);
        if !logp.is_finite() {
            return Err(Error::SamplerDivergence {
                iteration: 0,
                reason: format!("log-posterior {logp} at the initial state"),
            });
        }
        let inv_mass = opts.inv_mass_init.clone().unwrap_or_else(|| vec![1.0; dim]);
        Ok(Self {
            dim,
            opts,
            rng: ChaCha8Rng::seed_from_u64(seed),
            position: init,
            logp,
            grad,
            inv_mass,
        })
    }

    fn kinetic(&self, momentum: &[f64]) -> f64 {
        0.5 * momentum
            .iter()
            .zip(&self.inv_mass)
            .map(|(p, im)| p * p * im)
            .sum::<f64>()
    }

    fn draw_momentum(&mut self) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let z: f64 = self.rng.sample(StandardNormal);
                z / self.inv_mass[i].sqrt()
            })
            .collect()
    }

    /// One leapfrog trajectory + accept/reject. Returns the acceptance
    /// probability of the proposal (0 for non-finite Hamiltonians).
    fn step(
        &mut self,
        eps: f64,
        target: &mut dyn FnMut(&[f64], &mut [f64]) -> f64,
        divergences: &mut usize,
    ) -> f64 {
        let momentum0 = self.draw_momentum();
        let h0 = self.logp - self.kinetic(&momentum0);

        let mut q = self.position.clone();
        let mut p = momentum0;
        let mut grad = self.grad.clone();
        let mut logp = self.logp;

        for _ in 0..self.opts.leapfrog_steps {
            for i in 0..self.dim {
                p[i] += 0.5 * eps * grad[i];
            }
            for i in 0..self.dim {
                q[i] += eps * self.inv_mass[i] * p[i];
            }
            logp = target(&q, &mut grad);
            if !logp.is_finite() {
                break;
            }
            for i in 0..self.dim {
                p[i] += 0.5 * eps * grad[i];
            }
        }

        if !logp.is_finite() {
            *divergences += 1;
            return 0.0;
        }
        let h1 = logp - self.kinetic(&p);
        let log_ratio = h1 - h0;
        if !log_ratio.is_finite() {
            *divergences += 1;
            return 0.0;
        }
        let accept_prob = log_ratio.min(0.0).exp();
        let u: f64 = self.rng.random();
        if u < accept_prob {
            self.position = q;
            self.logp = logp;
            self.grad = grad;
        }
        accept_prob
    }

    /// Crude doubling/halving search for a step size with ~50% acceptance.
    fn reasonable_eps(&mut self, target: &mut dyn FnMut(&[f64], &mut [f64]) -> f64) -> f64 {
        let saved_rng = self.rng.clone();
        let saved_pos = self.position.clone();
        let saved_logp = self.logp;
        let saved_grad = self.grad.clone();

        let mut eps = 0.1;
        let a0 = self.trial_accept(eps, target);
        let go_up = a0 > 0.5;
        for _ in 0..60 {
            let next = if go_up { eps * 2.0 } else { eps * 0.5 };
            let a = self.trial_accept(next, target);
            let crossed = if go_up { a <= 0.5 } else { a >= 0.5 };
            eps = next;
            if crossed || !(1e-12..=1e6).contains(&eps) {
                break;
            }
        }

        self.rng = saved_rng;
        self.position = saved_pos;
        self.logp = saved_logp;
        self.grad = saved_grad;
        eps.clamp(1e-12, 1e6)
    }

    fn trial_accept(&mut self, eps: f64, target: &mut dyn FnMut(&[f64], &mut [f64]) -> f64) -> f64 {
        let pos = self.position.clone();
        let logp = self.logp;
        let grad = self.grad.clone();
        let mut div = 0;
        let a = self.step(eps, target, &mut div);
        self.position = pos;
        self.logp = logp;
        self.grad = grad;
        a
    }

    /// Run burn-in + sampling, returning every `thin`-th post-burn-in
    /// state and the chain diagnostics.
    pub fn run(
        mut self,
        target: &mut dyn FnMut(&[f64], &mut [f64]) -> f64,
    ) -> Result<(Vec<Vec<f64>>, ChainStats)> {
        let burn_in = self.opts.burn_in;
        let draws = self.opts.draws;
        let thin = self.opts.thin.max(1);
        let mass_update_at = burn_in * 7 / 10;
        let collect_from = burn_in / 5;

        let mut divergences = 0;
        let mut eps = self.reasonable_eps(target);
        let mut da = DualAveraging::new(eps, self.opts.target_accept);
        let mut welford = Welford::new(self.dim);

        for iter in 0..burn_in {
            let a = self.step(eps, target, &mut divergences);
            da.update(a);
            eps = da.current().clamp(1e-14, 1e6);
            if iter >= collect_from {
                welford.add(&self.position);
            }
            if iter + 1 == mass_update_at && welford.count >= 10 {
                let n = welford.count as f64;
                for i in 0..self.dim {
                    let var = welford.variance(i);
                    // Shrink towards the initial guess while the estimate
                    // is still noisy.
                    self.inv_mass[i] =
                        ((n * var + 5.0 * self.inv_mass[i]) / (n + 5.0)).max(1e-20);
                }
                eps = self.reasonable_eps(target);
                da = DualAveraging::new(eps, self.opts.target_accept);
            }
        }
        eps = if da.m > 0 { da.averaged() } else { eps }.clamp(1e-14, 1e6);

        let retained = draws / thin;
        let mut samples = Vec::with_capacity(retained);
        let mut accept_sum = 0.0;
        for iter in 0..draws {
            accept_sum += self.step(eps, target, &mut divergences);
            if (iter + 1) % thin == 0 {
                samples.push(self.position.clone());
            }
        }

        let stats = ChainStats {
            mean_acceptance: if draws > 0 { accept_sum / draws as f64 } else { 0.0 },
            step_size: eps,
            divergences,
        };
        Ok((samples, stats))
    }
}
