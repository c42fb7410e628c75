//! The run-configuration file: a TOML document selecting the experiment
//! kind plus objective, batch policy, budgets and output options.

use anyhow::{bail, Context, Result};
use kdopt::benchmarks;
use kdopt::proposer::BatchPolicy;
use kdopt::space::{ParameterSpace, Scale};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Optimize,
    RandomSearch,
    Suite,
    Oregonator,
    DumpAcquisition,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Optimize => "optimize",
            Self::RandomSearch => "random-search",
            Self::Suite => "suite",
            Self::Oregonator => "oregonator",
            Self::DumpAcquisition => "dump-acquisition",
        };
        f.write_str(s)
    }
}

/// One dimension of an explicitly declared parameter space.
#[derive(Debug, Clone, Deserialize)]
pub struct DimensionConfig {
    pub name: String,
    pub low: f64,
    pub high: f64,
    #[serde(default)]
    pub scale: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxySection {
    pub samples_per_dim: Option<usize>,
    pub refine_fraction: Option<f64>,
    pub max_refine_steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    /// Proposals per iteration.
    pub batch_size: Option<usize>,
    /// Explicit sampling-parameter list; omitted means evenly spaced
    /// over [-1, 1].
    pub lambdas: Option<Vec<f64>>,
    pub shrink_exponent: Option<u32>,
    pub hidden_units: Option<usize>,
    pub normalize_values: Option<bool>,
    /// Stop a run once its best value falls below the threshold in use.
    pub stop_at_threshold: Option<bool>,
    pub proxy: Option<ProxySection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub kind: Option<ExperimentKind>,
    pub out_dir: Option<PathBuf>,
    pub master_seed: Option<u64>,
    pub repeats: Option<usize>,
    pub jobs: Option<usize>,
    pub plots: Option<bool>,

    /// Benchmark name for optimize/random-search.
    pub benchmark: Option<String>,
    pub dims: Option<usize>,
    pub budget: Option<usize>,

    /// Suite: benchmark list and batch sizes.
    pub functions: Option<Vec<String>>,
    pub batch_sizes: Option<Vec<usize>>,
    pub threshold_runs: Option<usize>,
    pub threshold_evals: Option<usize>,

    /// Oregonator: loop iterations (budget = iterations * batch size).
    pub iterations: Option<usize>,

    /// Acquisition dump: explicit space, observations and lambda grid.
    pub space: Option<Vec<DimensionConfig>>,
    /// Rows of `[x_0, ..., x_{d-1}, f]` in user coordinates.
    pub observations: Option<Vec<Vec<f64>>>,
    pub grid: Option<usize>,

    pub optimizer: Option<OptimizerSection>,
}

/// Fully validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub out_dir: PathBuf,
    pub master_seed: u64,
    pub repeats: usize,
    pub jobs: usize,
    pub plots: bool,

    pub benchmark: Option<String>,
    pub dims: usize,
    pub budget: usize,

    pub functions: Vec<String>,
    pub batch_sizes: Vec<usize>,
    pub threshold_runs: usize,
    pub threshold_evals: usize,

    pub iterations: usize,

    pub space: Option<ParameterSpace>,
    pub space_names: Vec<String>,
    pub observations: Vec<Vec<f64>>,
    pub grid: usize,

    pub batch_size: usize,
    pub lambdas: Option<Vec<f64>>,
    pub shrink_exponent: u32,
    pub hidden_units: usize,
    pub normalize_values: bool,
    pub stop_at_threshold: bool,
    pub samples_per_dim: usize,
    pub refine_fraction: f64,
    pub max_refine_steps: usize,
}

impl RunConfig {
    /// Parse and validate a TOML config file for the given experiment
    /// kind (usually the CLI subcommand).
    pub fn load(path: &Path, kind: ExperimentKind) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let raw: RawConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Self::from_raw(raw, kind)
    }

    pub fn from_raw(raw: RawConfig, kind: ExperimentKind) -> Result<Self> {
        if let Some(k) = raw.kind {
            if k != kind {
                bail!("config declares kind '{k}' but the '{kind}' command was invoked");
            }
        }
        let opt = raw.optimizer.clone().unwrap_or(OptimizerSection {
            batch_size: None,
            lambdas: None,
            shrink_exponent: None,
            hidden_units: None,
            normalize_values: None,
            stop_at_threshold: None,
            proxy: None,
        });
        let proxy = opt.proxy.clone().unwrap_or(ProxySection {
            samples_per_dim: None,
            refine_fraction: None,
            max_refine_steps: None,
        });

        let batch_size = opt.batch_size.unwrap_or(4);
        if batch_size == 0 {
            bail!("optimizer.batch_size must be >= 1");
        }
        if let Some(l) = &opt.lambdas {
            if l.len() != batch_size {
                bail!(
                    "optimizer.lambdas has {} entries but batch_size is {batch_size}",
                    l.len()
                );
            }
        }
        let shrink_exponent = opt.shrink_exponent.unwrap_or(2);
        if !(1..=3).contains(&shrink_exponent) {
            bail!("optimizer.shrink_exponent must be 1, 2 or 3");
        }
        let repeats = raw.repeats.unwrap_or(1);
        if repeats == 0 {
            bail!("repeats must be >= 1");
        }
        let budget = raw.budget.unwrap_or(200);
        if budget == 0 {
            bail!("budget must be >= 1");
        }
        let iterations = raw.iterations.unwrap_or(150);
        if iterations == 0 {
            bail!("iterations must be >= 1");
        }

        let mut space = None;
        let mut space_names = Vec::new();
        if let Some(dims_cfg) = &raw.space {
            let mut lower = Vec::new();
            let mut upper = Vec::new();
            let mut scales = Vec::new();
            for (i, d) in dims_cfg.iter().enumerate() {
                lower.push(d.low);
                upper.push(d.high);
                let scale = match d.scale.as_deref() {
                    None | Some("linear") => Scale::Linear,
                    Some("log10") => Scale::Log10,
                    Some(other) => bail!("space[{i}] ('{}'): unknown scale '{other}'", d.name),
                };
                scales.push(scale);
                space_names.push(d.name.clone());
            }
            space = Some(
                ParameterSpace::new(lower, upper, scales)
                    .with_context(|| "invalid [space] declaration")?,
            );
        }

        let functions = raw.functions.clone().unwrap_or_default();
        for name in &functions {
            benchmarks::get(name)
                .with_context(|| format!("functions entry '{name}' is not in the registry"))?;
        }
        if let Some(name) = &raw.benchmark {
            benchmarks::get(name)
                .with_context(|| format!("benchmark '{name}' is not in the registry"))?;
        }

        let cfg = Self {
            kind,
            out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("kdopt-out")),
            master_seed: raw.master_seed.unwrap_or(0),
            repeats,
            jobs: raw.jobs.unwrap_or(1).max(1),
            plots: raw.plots.unwrap_or(false),
            benchmark: raw.benchmark,
            dims: raw.dims.unwrap_or(2),
            budget,
            functions,
            batch_sizes: raw.batch_sizes.clone().unwrap_or_else(|| vec![4]),
            threshold_runs: raw.threshold_runs.unwrap_or(50),
            threshold_evals: raw.threshold_evals.unwrap_or(10_000),
            iterations,
            space,
            space_names,
            observations: raw.observations.clone().unwrap_or_default(),
            grid: raw.grid.unwrap_or(400),
            batch_size,
            lambdas: opt.lambdas,
            shrink_exponent,
            hidden_units: opt.hidden_units.unwrap_or(50),
            normalize_values: opt.normalize_values.unwrap_or(true),
            stop_at_threshold: opt.stop_at_threshold.unwrap_or(false),
            samples_per_dim: proxy.samples_per_dim.unwrap_or(2000),
            refine_fraction: proxy.refine_fraction.unwrap_or(0.5),
            max_refine_steps: proxy.max_refine_steps.unwrap_or(20),
        };
        cfg.validate_kind()?;
        Ok(cfg)
    }

    fn validate_kind(&self) -> Result<()> {
        match self.kind {
            ExperimentKind::Optimize | ExperimentKind::RandomSearch => {
                if self.benchmark.is_none() {
                    bail!("'{}' needs a 'benchmark' entry", self.kind);
                }
                let spec = benchmarks::get(self.benchmark.as_ref().unwrap())?;
                spec.space(self.dims)
                    .with_context(|| format!("benchmark '{}' at dims {}", spec.name, self.dims))?;
            }
            ExperimentKind::Suite => {
                if self.functions.is_empty() {
                    bail!("'suite' needs a non-empty 'functions' list");
                }
                if self.batch_sizes.iter().any(|&p| p == 0) {
                    bail!("batch_sizes entries must be >= 1");
                }
            }
            ExperimentKind::Oregonator => {}
            ExperimentKind::DumpAcquisition => {
                let space = self
                    .space
                    .as_ref()
                    .ok_or_else(|| anyhow::anyhow!("'dump-acquisition' needs a [[space]] list"))?;
                if space.dims() > 2 {
                    bail!("acquisition dumps support 1-D and 2-D spaces only");
                }
                if self.observations.is_empty() {
                    bail!("'dump-acquisition' needs an 'observations' list");
                }
                for (i, row) in self.observations.iter().enumerate() {
                    if row.len() != space.dims() + 1 {
                        bail!(
                            "observations[{i}] has {} entries, expected {} coordinates + value",
                            row.len(),
                            space.dims()
                        );
                    }
                }
                if self.grid < 2 {
                    bail!("grid must be >= 2");
                }
            }
        }
        Ok(())
    }

    /// The lambda schedule for this config.
    pub fn policy(&self) -> Result<BatchPolicy> {
        let policy = match &self.lambdas {
            Some(l) => BatchPolicy::custom(l.clone())?,
            None => BatchPolicy::evenly_spaced(self.batch_size)?,
        };
        Ok(policy)
    }
}
