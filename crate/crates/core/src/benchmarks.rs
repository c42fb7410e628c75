//! Analytic benchmark objectives.
//!
//! Nine continuous functions in their standard literature forms plus six
//! discrete-co-domain functions mapping the domain onto integer levels
//! 0..=4. The discrete definitions are constructive stand-ins (the level
//! thresholds are calibrated so that a 10^4-sample random search at d = 2
//! reproduces the intended baseline difficulty); each has a known region
//! attaining 0.

use crate::error::{Error, Result};
use crate::space::ParameterSpace;
use std::f64::consts::{E, PI};

#[derive(Debug, Clone, Copy)]
pub struct BenchmarkSpec {
    pub name: &'static str,
    /// Defined for any dimension (otherwise strictly 2-D).
    pub generalizable: bool,
    pub discrete: bool,
    pub lo: f64,
    pub hi: f64,
    eval: fn(&[f64]) -> f64,
    /// A point attaining the 2-D global minimum.
    pub minimizer_2d: [f64; 2],
    /// Global minimum value at d = 2.
    pub known_min_2d: f64,
}

impl BenchmarkSpec {
    pub fn space(&self, dims: usize) -> Result<ParameterSpace> {
        if !self.generalizable && dims != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: dims,
            });
        }
        if dims == 0 {
            return Err(Error::InvalidConfig("dims must be >= 1".into()));
        }
        ParameterSpace::uniform(dims, self.lo, self.hi)
    }

    /// Global minimum value for a `dims`-dimensional instance.
    pub fn known_min(&self, dims: usize) -> f64 {
        if self.name == "schwefel" {
            -418.9829 * dims as f64
        } else if dims == 2 || self.discrete {
            self.known_min_2d
        } else {
            // The remaining generalizable continuous functions have
            // dimension-independent minima (0 at their minimizer).
            self.known_min_2d
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if !self.generalizable && x.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: x.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: 0,
            });
        }
        for (i, &v) in x.iter().enumerate() {
            if !v.is_finite() || v < self.lo || v > self.hi {
                return Err(Error::OutOfBounds {
                    dim: i,
                    value: v,
                    lo: self.lo,
                    hi: self.hi,
                });
            }
        }
        Ok((self.eval)(x))
    }
}

fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sum_sq: f64 = x.iter().map(|v| v * v).sum();
    let sum_cos: f64 = x.iter().map(|v| (2.0 * PI * v).cos()).sum();
    -20.0 * (-0.2 * (sum_sq / d).sqrt()).exp() - (sum_cos / d).exp() + 20.0 + E
}

fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

fn camel(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    (4.0 - 2.1 * x1 * x1 + x1.powi(4) / 3.0) * x1 * x1
        + x1 * x2
        + (-4.0 + 4.0 * x2 * x2) * x2 * x2
}

fn dejong(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn ellipsoid(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| (i + 1) as f64 * v * v)
        .sum()
}

const MICHALEWICZ_M: i32 = 10;

fn michalewicz(x: &[f64]) -> f64 {
    -x.iter()
        .enumerate()
        .map(|(i, &v)| v.sin() * ((i + 1) as f64 * v * v / PI).sin().powi(2 * MICHALEWICZ_M))
        .sum::<f64>()
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

// Offset-free form: the global minimum is -418.9829 d.
fn schwefel(x: &[f64]) -> f64 {
    -x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>()
}

/// Quantize `value` against ascending `thresholds`: the returned level is
/// the number of thresholds at or below `value`, capped at 4.
fn quantize(value: f64, thresholds: &[f64; 4]) -> f64 {
    let mut level = 0u8;
    for &t in thresholds {
        if value >= t {
            level += 1;
        }
    }
    level.min(4) as f64
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn linear_funnel(x: &[f64]) -> f64 {
    quantize(inf_norm(x), &[0.25, 0.5, 0.75, 1.0])
}

/// Level-0 radius giving the intended random-search difficulty at d = 2.
const NARROW_R0: f64 = 6.446e-3;

fn narrow_funnel(x: &[f64]) -> f64 {
    quantize(inf_norm(x), &[NARROW_R0, 0.25, 0.5, 0.75])
}

// Tilted per-dimension quartic h(u) = (u^2 - 1)^2 + 0.1 u; its true well
// sits near u = -1.0122729 at depth H_STAR, the mirrored well near +1 is
// the level-1 decoy.
const DWELL_U_STAR: f64 = -1.0122729;
const DWELL_H_STAR: f64 = -0.10061738;
const DWELL_D0: f64 = 2.159e-3;

fn double_well(x: &[f64]) -> f64 {
    let w: f64 = x
        .iter()
        .map(|&u| (u * u - 1.0).powi(2) + 0.1 * u)
        .sum();
    let excess = w - x.len() as f64 * DWELL_H_STAR;
    quantize(excess, &[DWELL_D0, 0.45, 1.2, 2.5])
}

/// Calibrated level-0 cut of the quantized Ackley funnel.
const DACKLEY_T0: f64 = 1.73;

fn discrete_ackley(x: &[f64]) -> f64 {
    quantize(ackley(x), &[DACKLEY_T0, 5.0, 10.0, 17.0])
}

const DMICH_U0: f64 = -1.798;

fn discrete_michalewicz(x: &[f64]) -> f64 {
    quantize(michalewicz(x), &[DMICH_U0, -1.2, -0.55, -0.15])
}

const DVALLEYS_A: f64 = 0.7;
const DVALLEYS_V0: f64 = 0.0266;

/// Two sinusoidal valley systems; the cyclic residual vanishes where the
/// curves intersect (the origin always qualifies).
fn valleys_residual(x: &[f64]) -> f64 {
    let d = x.len();
    (0..d)
        .map(|i| {
            let next = x[(i + 1) % d];
            (next - DVALLEYS_A * (2.0 * PI * x[i]).sin()).abs()
        })
        .sum()
}

fn discrete_valleys(x: &[f64]) -> f64 {
    quantize(valleys_residual(x), &[DVALLEYS_V0, 0.25, 0.7, 1.3])
}

const SPECS: [BenchmarkSpec; 15] = [
    BenchmarkSpec {
        name: "ackley",
        generalizable: true,
        discrete: false,
        lo: -32.0,
        hi: 32.0,
        eval: ackley,
        minimizer_2d: [0.0, 0.0],
        known_min_2d: 0.0,
    },
    BenchmarkSpec {
        name: "branin",
        generalizable: false,
        discrete: false,
        lo: -5.0,
        hi: 15.0,
        eval: branin,
        minimizer_2d: [PI, 2.275],
        known_min_2d: 0.39788735772973816,
    },
    BenchmarkSpec {
        name: "camel",
        generalizable: false,
        discrete: false,
        lo: -3.0,
        hi: 3.0,
        eval: camel,
        minimizer_2d: [0.0898, -0.7126],
        known_min_2d: -1.031628453489877,
    },
    BenchmarkSpec {
        name: "dejong",
        generalizable: true,
        discrete: false,
        lo: -5.0,
        hi: 5.0,
        eval: dejong,
        minimizer_2d: [0.0, 0.0],
        known_min_2d: 0.0,
    },
    BenchmarkSpec {
        name: "ellipsoid",
        generalizable: true,
        discrete: false,
        lo: -5.0,
        hi: 5.0,
        eval: ellipsoid,
        minimizer_2d: [0.0, 0.0],
        known_min_2d: 0.0,
    },
    BenchmarkSpec {
        name: "michalewicz",
        generalizable: false,
        discrete: false,
        lo: 0.0,
        hi: 3.0,
        eval: michalewicz,
        minimizer_2d: [2.20290552, 1.57079633],
        known_min_2d: -1.8013034100985537,
    },
    BenchmarkSpec {
        name: "rastrigin",
        generalizable: true,
        discrete: false,
        lo: -5.0,
        hi: 5.0,
        eval: rastrigin,
        minimizer_2d: [0.0, 0.0],
        known_min_2d: 0.0,
    },
    BenchmarkSpec {
        name: "rosenbrock",
        generalizable: true,
        discrete: false,
        lo: -2.0,
        hi: 2.0,
        eval: rosenbrock,
        minimizer_2d: [1.0, 1.0],
        known_min_2d: 0.0,
    },
    BenchmarkSpec {
        name: "schwefel",
        generalizable: true,
        discrete: false,
        lo: -500.0,
        hi: 500.0,
        eval: schwefel,
        minimizer_2d: [420.9687, 420.9687],
        known_min_2d: -837.9658,
    },
    BenchmarkSpec {
        name: "linear_funnel",
        generalizable: true,
        discrete: true,
        lo: -1.0,
        hi: 1.0,
        eval: linear_funnel,
        minimizer_2d: [0.0, 0.0],
        known_min_2d: 0.0,
    },
    BenchmarkSpec {
        name: "narrow_funnel",
        generalizable: true,
        discrete: true,
        lo: -1.0,
        hi: 1.0,
        eval: narrow_funnel,
        minimizer_2d: [0.0, 0.0],
        known_min_2d: 0.0,
    },
    BenchmarkSpec {
        name: "double_well",
        generalizable: true,
        discrete: true,
        lo: -2.0,
        hi: 2.0,
        eval: double_well,
        minimizer_2d: [DWELL_U_STAR, DWELL_U_STAR],
        known_min_2d: 0.0,
    },
    BenchmarkSpec {
        name: "dackley",
        generalizable: true,
        discrete: true,
        lo: -32.0,
        hi: 32.0,
        eval: discrete_ackley,
        minimizer_2d: [0.0, 0.0],
        known_min_2d: 0.0,
    },
    BenchmarkSpec {
        name: "dmichalewicz",
        generalizable: true,
        discrete: true,
        lo: 0.0,
        hi: 3.0,
        eval: discrete_michalewicz,
        minimizer_2d: [2.20290552, 1.57079633],
        known_min_2d: 0.0,
    },
    BenchmarkSpec {
        name: "dvalleys",
        generalizable: true,
        discrete: true,
        lo: -1.0,
        hi: 1.0,
        eval: discrete_valleys,
        minimizer_2d: [0.0, 0.0],
        known_min_2d: 0.0,
    },
];

/// The full registry: 9 continuous + 6 discrete functions.
pub fn list_specs() -> &'static [BenchmarkSpec] {
    &SPECS
}

pub fn get(name: &str) -> Result<&'static BenchmarkSpec> {
    SPECS
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownBenchmark(name.to_string()))
}

pub fn evaluate(name: &str, x: &[f64]) -> Result<f64> {
    get(name)?.evaluate(x)
}
