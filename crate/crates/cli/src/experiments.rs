//! Experiment dispatch: seeded repeats over a worker pool, one CSV per
//! run, a bootstrap summary, and optional SVG trace plots. A single
//! collector thread writes all files, and float formatting is
//! round-trip-exact, so a fixed master seed reproduces every artifact
//! byte for byte.

use crate::bootstrap;
use crate::config::{ExperimentKind, RunConfig};
use crate::csvio;
use crate::svgplot::{self, Series};
use anyhow::{Context, Result};
use kdopt::acquisition::AcquisitionContext;
use kdopt::benchmarks;
use kdopt::bnn::{sample_posterior, BnnSpec};
use kdopt::kernel::KernelModel;
use kdopt::oregonator::{IntegrationConfig, OregonatorLoss, OregonatorParams};
use kdopt::proposer::ProxyConfig;
use kdopt::run::{
    evaluations_to_threshold, run_optimization, run_random_search, OptimizerConfig, RunRecord,
};
use kdopt::seed::derive;
use kdopt::space::{ObservationSet, ParameterSpace};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

/// Outcome summary returned to the caller (also written to disk).
#[derive(Debug, Default)]
pub struct ExperimentReport {
    pub files_written: usize,
    pub summary_path: Option<std::path::PathBuf>,
}

pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .context("building worker pool")?;
    match cfg.kind {
        ExperimentKind::Optimize => optimize(cfg, &pool, false),
        ExperimentKind::RandomSearch => optimize(cfg, &pool, true),
        ExperimentKind::Suite => suite(cfg, &pool),
        ExperimentKind::Oregonator => oregonator(cfg, &pool),
        ExperimentKind::DumpAcquisition => dump_acquisition(cfg),
    }
}

fn optimizer_config(cfg: &RunConfig, stop: Option<f64>) -> Result<OptimizerConfig> {
    let mut out = OptimizerConfig::new(cfg.policy()?);
    out.proxy = ProxyConfig {
        samples_per_dim: cfg.samples_per_dim,
        refine_fraction: cfg.refine_fraction,
        max_refine_steps: cfg.max_refine_steps,
        seed: 0,
    };
    out.hidden_units = cfg.hidden_units;
    out.shrink_exponent = cfg.shrink_exponent;
    out.normalize_values = cfg.normalize_values;
    out.stop_when_below = stop;
    Ok(out)
}

struct RunSet {
    records: Vec<RunRecord>,
}

fn run_repeats<F>(cfg: &RunConfig, pool: &rayon::ThreadPool, run_one: F) -> RunSet
where
    F: Fn(usize, u64) -> RunRecord + Sync,
{
    let records: Vec<RunRecord> = pool.install(|| {
        (0..cfg.repeats)
            .into_par_iter()
            .map(|i| run_one(i, derive(cfg.master_seed, i as u64)))
            .collect()
    });
    RunSet { records }
}

fn write_records(dir: &Path, prefix: &str, records: &[RunRecord]) -> Result<usize> {
    for (i, rec) in records.iter().enumerate() {
        let csv = csvio::run_record_csv(i, rec);
        csvio::write_file(&dir.join(format!("{prefix}run_{i:03}.csv")), &csv)?;
    }
    Ok(records.len())
}

/// Per-evaluation-index matrix of best-so-far values, padded by carrying
/// the last value for early-stopped runs.
fn best_matrix(records: &[RunRecord]) -> Vec<Vec<f64>> {
    let steps = records.iter().map(|r| r.rows.len()).max().unwrap_or(0);
    records
        .iter()
        .map(|r| {
            let mut row: Vec<f64> = r.rows.iter().map(|e| e.best_so_far).collect();
            let last = row.last().copied().unwrap_or(f64::NAN);
            row.resize(steps, last);
            row
        })
        .collect()
}

fn trace_plot(
    cfg: &RunConfig,
    dir: &Path,
    name: &str,
    records: &[RunRecord],
) -> Result<()> {
    if !cfg.plots || records.is_empty() {
        return Ok(());
    }
    let matrix = best_matrix(records);
    let steps = matrix[0].len();
    let xs: Vec<f64> = (1..=steps).map(|i| i as f64).collect();
    let mean: Vec<f64> = (0..steps)
        .map(|s| matrix.iter().map(|r| r[s]).sum::<f64>() / matrix.len() as f64)
        .collect();
    let band1 = bootstrap::mean_band(&matrix, 0.68, derive(cfg.master_seed, 0xb001));
    let band2 = bootstrap::mean_band(&matrix, 0.95, derive(cfg.master_seed, 0xb002));
    let series = [
        Series {
            label: "mean best (2 sigma)",
            color: "#9ecae1",
            xs: xs.clone(),
            ys: mean.clone(),
            band: Some(band2),
        },
        Series {
            label: "mean best (1 sigma)",
            color: "#1f77b4",
            xs,
            ys: mean,
            band: Some(band1),
        },
    ];
    let svg = svgplot::line_plot(name, "evaluations", "best objective value", &series);
    csvio::write_file(&dir.join(format!("{name}_trace.svg")), &svg)?;
    Ok(())
}

fn optimize(cfg: &RunConfig, pool: &rayon::ThreadPool, random: bool) -> Result<ExperimentReport> {
    let name = cfg.benchmark.clone().expect("validated");
    let spec = benchmarks::get(&name)?;
    let space = spec.space(cfg.dims)?;
    let ocfg = optimizer_config(cfg, None)?;

    let set = run_repeats(cfg, pool, |_i, seed| {
        let objective = |x: &[f64]| spec.evaluate(x).unwrap_or(f64::NAN);
        if random {
            run_random_search(objective, &space, cfg.budget, seed)
        } else {
            run_optimization(objective, &space, &ocfg, cfg.budget, seed)
        }
    });

    let files = write_records(&cfg.out_dir, "", &set.records)?;
    let bests: Vec<f64> = set
        .records
        .iter()
        .map(|r| r.best_value().unwrap_or(f64::NAN))
        .collect();
    let mean = bests.iter().sum::<f64>() / bests.len() as f64;
    let std = bootstrap::mean_std(&bests, derive(cfg.master_seed, 0xb003));
    let mut summary = String::from("benchmark,dims,budget,repeats,mean_best,bootstrap_std\n");
    let _ = writeln!(
        summary,
        "{name},{},{},{},{mean},{std}",
        cfg.dims, cfg.budget, cfg.repeats
    );
    let path = cfg.out_dir.join("summary.csv");
    csvio::write_file(&path, &summary)?;
    trace_plot(cfg, &cfg.out_dir, &name, &set.records)?;

    Ok(ExperimentReport {
        files_written: files + 1,
        summary_path: Some(path),
    })
}

fn suite(cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<ExperimentReport> {
    let mut summary =
        String::from("function,p,threshold,repeats,hits,median_evals,mean_evals,bootstrap_std\n");
    let mut files = 0usize;

    for name in &cfg.functions {
        let spec = benchmarks::get(name)?;
        let space = spec.space(cfg.dims)?;
        let objective = |x: &[f64]| spec.evaluate(x).unwrap_or(f64::NAN);

        // Random-search baseline defining the threshold for this
        // function.
        let baseline_seed = derive(cfg.master_seed, 0x7a5e);
        let baselines: Vec<f64> = pool.install(|| {
            (0..cfg.threshold_runs)
                .into_par_iter()
                .map(|i| {
                    run_random_search(
                        objective,
                        &space,
                        cfg.threshold_evals,
                        derive(baseline_seed, i as u64),
                    )
                    .best_value()
                    .unwrap()
                })
                .collect()
        });
        let threshold = baselines.iter().sum::<f64>() / baselines.len() as f64;

        for &p in &cfg.batch_sizes {
            let mut sub = cfg.clone();
            sub.batch_size = p;
            sub.lambdas = None;
            let stop = cfg.stop_at_threshold.then_some(threshold);
            let ocfg = optimizer_config(&sub, stop)?;
            let run_seed = derive(cfg.master_seed, 0x1000 + p as u64);
            let set = run_repeats(cfg, pool, |_i, seed| {
                run_optimization(objective, &space, &ocfg, cfg.budget, derive(run_seed, seed))
            });
            let dir = cfg.out_dir.join(format!("{name}_p{p}"));
            files += write_records(&dir, "", &set.records)?;
            trace_plot(cfg, &dir, &format!("{name}_p{p}"), &set.records)?;

            let hits: Vec<f64> = set
                .records
                .iter()
                .filter_map(|r| evaluations_to_threshold(r, threshold))
                .map(|e| e as f64)
                .collect();
            let mut with_miss: Vec<f64> = set
                .records
                .iter()
                .map(|r| {
                    evaluations_to_threshold(r, threshold)
                        .map(|e| e as f64)
                        .unwrap_or(f64::INFINITY)
                })
                .collect();
            let median = bootstrap::median(&mut with_miss);
            let mean_hit = if hits.is_empty() {
                f64::NAN
            } else {
                hits.iter().sum::<f64>() / hits.len() as f64
            };
            let std = bootstrap::mean_std(&hits, derive(cfg.master_seed, 0xb004 + p as u64));
            let _ = writeln!(
                summary,
                "{name},{p},{threshold},{},{},{median},{mean_hit},{std}",
                cfg.repeats,
                hits.len()
            );
        }
    }
    let path = cfg.out_dir.join("summary.csv");
    csvio::write_file(&path, &summary)?;
    Ok(ExperimentReport {
        files_written: files + 1,
        summary_path: Some(path),
    })
}

fn oregonator(cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<ExperimentReport> {
    let target = OregonatorParams::target();
    let loss = OregonatorLoss::new(&target, IntegrationConfig::default())
        .map_err(|e| anyhow::anyhow!("target integration failed: {e}"))?;
    let space = OregonatorParams::search_space();
    let budget = cfg.iterations * cfg.batch_size;
    let ocfg = optimizer_config(cfg, None)?;

    // Target traces for plotting/comparison.
    {
        let tr = loss.target_traces();
        let mut csv = String::from("t,alpha,eta,rho\n");
        for i in 0..tr.times.len() {
            let _ = writeln!(csv, "{},{},{},{}", tr.times[i], tr.alpha[i], tr.eta[i], tr.rho[i]);
        }
        csvio::write_file(&cfg.out_dir.join("target_traces.csv"), &csv)?;
    }

    let objective = loss.objective();
    let set = run_repeats(cfg, pool, |_i, seed| {
        run_optimization(&objective, &space, &ocfg, budget, seed)
    });
    let files = write_records(&cfg.out_dir, "", &set.records)?;
    trace_plot(cfg, &cfg.out_dir, "oregonator", &set.records)?;

    // Best parameter set across runs, re-integrated and dumped.
    let mut best_val = f64::INFINITY;
    let mut best_x: Option<Vec<f64>> = None;
    for rec in &set.records {
        for row in &rec.rows {
            if row.value < best_val {
                best_val = row.value;
                best_x = Some(row.x_user.clone());
            }
        }
    }
    if let Some(x) = best_x {
        if let Ok(params) = OregonatorParams::from_slice(&x) {
            if let Ok(tr) = kdopt::oregonator::integrate(&params, loss.config()) {
                let mut csv = String::from("t,alpha,eta,rho\n");
                for i in 0..tr.times.len() {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{}",
                        tr.times[i], tr.alpha[i], tr.eta[i], tr.rho[i]
                    );
                }
                csvio::write_file(&cfg.out_dir.join("best_traces.csv"), &csv)?;
            }
        }
    }

    let finals: Vec<f64> = set
        .records
        .iter()
        .map(|r| r.best_value().unwrap_or(f64::NAN))
        .collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let std = bootstrap::mean_std(&finals, derive(cfg.master_seed, 0xb005));
    let below_500 = finals.iter().filter(|&&v| v < 500.0).count();
    let below_100 = finals.iter().filter(|&&v| v < 100.0).count();
    let mut summary = String::from(
        "repeats,iterations,batch_size,mean_final_loss,bootstrap_std,runs_below_500,runs_below_100,best_loss\n",
    );
    let _ = writeln!(
        summary,
        "{},{},{},{mean},{std},{below_500},{below_100},{best_val}",
        cfg.repeats, cfg.iterations, cfg.batch_size
    );
    let path = cfg.out_dir.join("summary.csv");
    csvio::write_file(&path, &summary)?;
    Ok(ExperimentReport {
        files_written: files + 2,
        summary_path: Some(path),
    })
}

fn dump_acquisition(cfg: &RunConfig) -> Result<ExperimentReport> {
    let space = cfg.space.clone().expect("validated");
    let d = space.dims();
    let mut obs = ObservationSet::new();
    for row in &cfg.observations {
        let unit = space
            .to_unit(&row[..d])
            .map_err(|e| anyhow::anyhow!("observation out of bounds: {e}"))?;
        obs.push(unit, row[d])
            .map_err(|e| anyhow::anyhow!("bad observation: {e}"))?;
    }
    let bnn_spec = BnnSpec::with_options(d, cfg.hidden_units, cfg.shrink_exponent)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let (samples, _) = sample_posterior(&obs, &bnn_spec, cfg.master_seed)
        .map_err(|e| anyhow::anyhow!("posterior sampling failed: {e}"))?;
    let model = KernelModel::build(samples, obs).map_err(|e| anyhow::anyhow!("{e}"))?;

    let lambdas = cfg
        .lambdas
        .clone()
        .unwrap_or_else(|| vec![-5.0, -1.0, 0.0, 1.0, 5.0]);
    let mut files = 0;
    for lambda in lambdas {
        let values = model.observations().values().to_vec();
        let ctx = AcquisitionContext::new(&model, values, lambda)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let mut csv = String::new();
        match d {
            1 => {
                csv.push_str("x0,u0,alpha,surrogate\n");
                for i in 0..cfg.grid {
                    let u = i as f64 / (cfg.grid - 1) as f64;
                    let x = space.from_unit(&[u]).map_err(|e| anyhow::anyhow!("{e}"))?;
                    let a = ctx.acquisition(&[u]);
                    let s = ctx.surrogate(&[u]);
                    let _ = writeln!(csv, "{},{u},{a},{s}", x[0]);
                }
            }
            2 => {
                csv.push_str("x0,x1,u0,u1,alpha,surrogate\n");
                for i in 0..cfg.grid {
                    let u0 = i as f64 / (cfg.grid - 1) as f64;
                    for j in 0..cfg.grid {
                        let u1 = j as f64 / (cfg.grid - 1) as f64;
                        let x = space
                            .from_unit(&[u0, u1])
                            .map_err(|e| anyhow::anyhow!("{e}"))?;
                        let a = ctx.acquisition(&[u0, u1]);
                        let s = ctx.surrogate(&[u0, u1]);
                        let _ = writeln!(csv, "{},{},{u0},{u1},{a},{s}", x[0], x[1]);
                    }
                }
            }
            _ => unreachable!("validated"),
        }
        let tag = format!("{lambda}").replace('-', "m").replace('.', "_");
        csvio::write_file(&cfg.out_dir.join(format!("acquisition_lambda_{tag}.csv")), &csv)?;
        files += 1;
    }
    Ok(ExperimentReport {
        files_written: files,
        summary_path: None,
    })
}
