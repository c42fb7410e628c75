//! The observe/propose loop, the random-search baseline and the
//! evaluations-to-threshold metric.

use crate::bnn::BnnSpec;
use crate::proposer::{propose_batch, BatchPolicy, ProxyConfig};
use crate::seed::derive;
use crate::space::{ObservationSet, ParameterSpace};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

/// Value recorded when the objective returns a non-finite number.
pub const NONFINITE_SENTINEL: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub policy: BatchPolicy,
    pub proxy: ProxyConfig,
    pub hidden_units: usize,
    pub shrink_exponent: u32,
    /// Min-max rescale observed values before building acquisitions, so
    /// the sampling parameter's [-1, 1] range brackets them; raw values
    /// of arbitrary magnitude would otherwise dominate the balance.
    pub normalize_values: bool,
    /// Stop early once the best value falls strictly below this level.
    pub stop_when_below: Option<f64>,
    /// Per-iteration dump of retained samples and sampler statistics.
    pub debug_dir: Option<PathBuf>,
}

impl OptimizerConfig {
    pub fn new(policy: BatchPolicy) -> Self {
        Self {
            policy,
            proxy: ProxyConfig::default(),
            hidden_units: 50,
            shrink_exponent: 2,
            normalize_values: true,
            stop_when_below: None,
            debug_dir: None,
        }
    }
}

/// One objective evaluation.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub iteration: usize,
    /// 1-based cumulative evaluation count.
    pub eval_index: usize,
    pub x_user: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
}

/// Sampler diagnostics of one loop iteration.
#[derive(Debug, Clone)]
pub struct IterationMeta {
    pub iteration: usize,
    pub acceptance_rate: f64,
    pub step_size: f64,
    pub divergences: usize,
    pub low_acceptance: bool,
    pub candidate_cap_hit: bool,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub seed: u64,
    pub dims: usize,
    pub rows: Vec<EvalRow>,
    pub iterations: Vec<IterationMeta>,
    pub warnings: Vec<String>,
    pub wall_time: Duration,
    /// Reason the run ended before its budget, if it did.
    pub aborted: Option<String>,
}

impl RunRecord {
    pub fn evaluations(&self) -> usize {
        self.rows.len()
    }

    pub fn best_value(&self) -> Option<f64> {
        self.rows.last().map(|r| r.best_so_far)
    }

    /// `(evaluation_count, best_value)` pairs; non-increasing in the
    /// second component.
    pub fn best_trace(&self) -> Vec<(usize, f64)> {
        self.rows.iter().map(|r| (r.eval_index, r.best_so_far)).collect()
    }
}

/// Smallest evaluation count whose best-so-far value lies strictly below
/// `threshold`.
pub fn evaluations_to_threshold(record: &RunRecord, threshold: f64) -> Option<usize> {
    record
        .rows
        .iter()
        .find(|r| r.best_so_far < threshold)
        .map(|r| r.eval_index)
}

fn record_eval(
    rows: &mut Vec<EvalRow>,
    warnings: &mut Vec<String>,
    iteration: usize,
    x_user: Vec<f64>,
    raw_value: f64,
) -> f64 {
    let value = if raw_value.is_finite() {
        raw_value
    } else {
        warnings.push(format!(
            "evaluation {} returned {raw_value}; recorded as {NONFINITE_SENTINEL}",
            rows.len() + 1
        ));
        NONFINITE_SENTINEL
    };
    let best = rows
        .last()
        .map_or(value, |r| r.best_so_far.min(value));
    rows.push(EvalRow {
        iteration,
        eval_index: rows.len() + 1,
        x_user,
        value,
        best_so_far: best,
    });
    value
}

fn normalized_values(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 1e-12) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / (2.0 * std)).collect()
}

fn dump_sampler_debug(
    dir: &PathBuf,
    iteration: usize,
    meta: &IterationMeta,
    batch: &crate::proposer::ProposalBatch,
) {
    let _ = std::fs::create_dir_all(dir);
    let path = dir.join(format!("iter{iteration:04}_sampler.txt"));
    if let Ok(mut f) = std::fs::File::create(path) {
        let _ = writeln!(
            f,
            "iteration {iteration}\nacceptance_rate {}\nstep_size {}\ndivergences {}\nlow_acceptance {}",
            meta.acceptance_rate, meta.step_size, meta.divergences, meta.low_acceptance
        );
        for (i, p) in batch.points.iter().enumerate() {
            let coords: Vec<String> = p.iter().map(|v| format!("{v:.6e}")).collect();
            let _ = writeln!(f, "proposal {i} {}", coords.join(" "));
        }
    }
}

/// Run the full optimization loop until another batch would exceed
/// `budget` evaluations. Aborts with a partial record if posterior
/// sampling fails; non-finite objective values are recorded with a large
/// sentinel and a warning.
pub fn run_optimization<F>(
    objective: F,
    space: &ParameterSpace,
    cfg: &OptimizerConfig,
    budget: usize,
    seed: u64,
) -> RunRecord
where
    F: Fn(&[f64]) -> f64,
{
    let start = Instant::now();
    let d = space.dims();
    let p = cfg.policy.p();
    let bnn_spec = BnnSpec::with_options(d, cfg.hidden_units, cfg.shrink_exponent)
        .expect("optimizer config was validated");

    let mut obs = ObservationSet::new();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut iterations = Vec::new();
    let mut aborted = None;

    let mut iteration = 0usize;
    'outer: while rows.len() + p <= budget {
        let points_unit: Vec<Vec<f64>> = if obs.is_empty() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, 0x5eed_0000));
            (0..p)
                .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
                .collect()
        } else {
            let values = if cfg.normalize_values {
                normalized_values(obs.values())
            } else {
                obs.values().to_vec()
            };
            match propose_batch(
                &obs,
                &values,
                &cfg.policy,
                &bnn_spec,
                &cfg.proxy,
                derive(seed, 1 + iteration as u64),
            ) {
                Ok(batch) => {
                    let meta = IterationMeta {
                        iteration,
                        acceptance_rate: batch.sampler.mean_acceptance,
                        step_size: batch.sampler.step_size,
                        divergences: batch.sampler.divergences,
                        low_acceptance: batch.sampler.low_acceptance,
                        candidate_cap_hit: batch.cap_hit,
                    };
                    if meta.low_acceptance {
                        warnings.push(format!(
                            "iteration {iteration}: sampler acceptance rate {:.3} below 0.05",
                            meta.acceptance_rate
                        ));
                    }
                    if let Some(dir) = &cfg.debug_dir {
                        dump_sampler_debug(dir, iteration, &meta, &batch);
                    }
                    iterations.push(meta);
                    batch.points
                }
                Err(e) => {
                    aborted = Some(format!("posterior sampling failed: {e}"));
                    break 'outer;
                }
            }
        };

        for unit in points_unit {
            let x_user = space.from_unit(&unit).expect("proposals are clamped to the cube");
            let raw = objective(&x_user);
            record_eval(&mut rows, &mut warnings, iteration, x_user, raw);
            match obs.push(unit, rows.last().unwrap().value) {
                Ok(()) => {}
                Err(e) => {
                    aborted = Some(format!("observation rejected: {e}"));
                    break 'outer;
                }
            }
        }

        if let Some(stop) = cfg.stop_when_below {
            if rows.last().is_some_and(|r| r.best_so_far < stop) {
                break;
            }
        }
        iteration += 1;
    }

    RunRecord {
        seed,
        dims: d,
        rows,
        iterations,
        warnings,
        wall_time: start.elapsed(),
        aborted,
    }
}

/// Uniform i.i.d. sampling baseline with the same record contract.
pub fn run_random_search<F>(
    objective: F,
    space: &ParameterSpace,
    budget: usize,
    seed: u64,
) -> RunRecord
where
    F: Fn(&[f64]) -> f64,
{
    let start = Instant::now();
    let d = space.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(budget);
    let mut warnings = Vec::new();
    for i in 0..budget {
        let unit: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let x_user = space.from_unit(&unit).expect("unit draws are in the cube");
        let raw = objective(&x_user);
        record_eval(&mut rows, &mut warnings, i, x_user, raw);
    }
    RunRecord {
        seed,
        dims: d,
        rows,
        iterations: Vec::new(),
        warnings,
        wall_time: start.elapsed(),
        aborted: None,
    }
}
