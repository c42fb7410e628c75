//! The dimensionless Oregonator model and its inverse-design objective.
//!
//! Three coupled nonlinear rate equations for the scaled concentrations
//! `alpha`, `eta`, `rho` driven by four dimensionless constants. The
//! target parameter set sustains a limit cycle; the case study measures
//! time in units of that cycle's period ([`TIME_UNIT`] in raw equation
//! time), so the 12-unit window spans twelve oscillations of the target.
//! The objective compares the times at which candidate and target traces
//! cross the level 100, species by species, on the resampling grid's
//! index scale (one grid step is 1e-3 time units), so a full-window miss
//! per unmatched crossing keeps broken dynamics far above phase-error
//! losses.

use crate::error::{Error, Result};
use crate::ode::{integrate_adaptive, AdaptiveConfig, CubicSpline};
use crate::space::{ParameterSpace, Scale};

/// Concentration level whose upward crossings define the loss.
pub const CROSSING_LEVEL: f64 = 100.0;

/// Loss reported when a candidate fails to integrate.
pub const FAILURE_SENTINEL: f64 = 1e6;

/// One case-study time unit, expressed in the raw time of the rate
/// equations: the asymptotic oscillation period of the target parameter
/// set.
pub const TIME_UNIT: f64 = 302.858;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OregonatorParams {
    pub s: f64,
    pub w: f64,
    pub q: f64,
    pub f: f64,
    pub alpha0: f64,
    pub eta0: f64,
    pub rho0: f64,
}

impl OregonatorParams {
    /// The limit-cycle parameter set the inverse design aims for.
    pub fn target() -> Self {
        Self {
            s: 77.27,
            w: 0.1610,
            q: 8.375e-6,
            f: 1.0,
            alpha0: 2.0e7,
            eta0: 3.3e3,
            rho0: 4.1e4,
        }
    }

    /// Search box per component: rate constants `s`, `w`, `f` on linear
    /// scale, the decade-spanning `q` and initial concentrations on
    /// log10 scale.
    pub fn search_space() -> ParameterSpace {
        ParameterSpace::new(
            vec![0.0, 0.0, 1e-8, 0.0, 1e4, 1e3, 1e3],
            vec![100.0, 1.0, 1e-4, 5.0, 1e9, 1e5, 1e6],
            vec![
                Scale::Linear,
                Scale::Linear,
                Scale::Log10,
                Scale::Linear,
                Scale::Log10,
                Scale::Log10,
                Scale::Log10,
            ],
        )
        .expect("static bounds are valid")
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != 7 {
            return Err(Error::DimensionMismatch {
                expected: 7,
                got: x.len(),
            });
        }
        let p = Self {
            s: x[0],
            w: x[1],
            q: x[2],
            f: x[3],
            alpha0: x[4],
            eta0: x[5],
            rho0: x[6],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.s, self.w, self.q, self.f, self.alpha0, self.eta0, self.rho0]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s", self.s),
            ("w", self.w),
            ("q", self.q),
            ("f", self.f),
            ("alpha0", self.alpha0),
            ("eta0", self.eta0),
            ("rho0", self.rho0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "Oregonator parameter {name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Right-hand side of the three rate equations.
pub fn rhs(state: [f64; 3], p: &OregonatorParams) -> [f64; 3] {
    let [a, e, r] = state;
    [
        p.s * (e - e * a + a - p.q * a * a),
        (-e - e * a + p.f * r) / p.s,
        p.w * (a - r),
    ]
}

#[derive(Debug, Clone)]
pub struct IntegrationConfig {
    /// Window length in case-study time units.
    pub t_end: f64,
    pub grid_points: usize,
    pub ode: AdaptiveConfig,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            t_end: 12.0,
            grid_points: 12_000,
            ode: AdaptiveConfig {
                // Stability, not accuracy, limits the step size on the
                // stiff recovery phase, so a tight tolerance is free and
                // keeps the level crossings clean of ringing.
                rtol: 1e-9,
                atol_scale: 1e-11,
                // The target needs ~2.1e7 accepted steps for the full
                // window; the cap bounds the cost of stiffer candidates.
                max_steps: 60_000_000,
                min_step: 1e-14,
                initial_step: 1e-6,
                record_dt: None,
            },
        }
    }
}

impl IntegrationConfig {
    /// Grid spacing in time units; also the unit in which crossing times
    /// enter the loss.
    pub fn grid_step(&self) -> f64 {
        self.t_end / (self.grid_points - 1) as f64
    }
}

/// Concentrations resampled onto the uniform grid.
#[derive(Debug, Clone)]
pub struct ConcentrationTraces {
    pub times: Vec<f64>,
    pub alpha: Vec<f64>,
    pub eta: Vec<f64>,
    pub rho: Vec<f64>,
}

impl ConcentrationTraces {
    pub fn species(&self, i: usize) -> &[f64] {
        match i {
            0 => &self.alpha,
            1 => &self.eta,
            _ => &self.rho,
        }
    }
}

/// Integrate the model over `[0, t_end]` case-study time units (one unit
/// is [`TIME_UNIT`] in raw equation time) and resample onto the uniform
/// grid with a natural cubic spline. The concentrations span five
/// decades, so interpolation runs on the log traces; this keeps the
/// resampled values positive and free of overshoot at the sharp initial
/// collapse.
pub fn integrate(p: &OregonatorParams, cfg: &IntegrationConfig) -> Result<ConcentrationTraces> {
    p.validate()?;
    let f = |_t: f64, y: &[f64; 3]| {
        let out = rhs(*y, p);
        [
            TIME_UNIT * out[0],
            TIME_UNIT * out[1],
            TIME_UNIT * out[2],
        ]
    };
    let mut ode_cfg = cfg.ode.clone();
    if ode_cfg.record_dt.is_none() {
        ode_cfg.record_dt = Some(cfg.grid_step() / 8.0);
    }
    let sol = integrate_adaptive(f, [p.alpha0, p.eta0, p.rho0], 0.0, cfg.t_end, &ode_cfg)?;

    let times: Vec<f64> = (0..cfg.grid_points)
        .map(|i| i as f64 * cfg.grid_step())
        .collect();
    let mut traces = [
        Vec::with_capacity(cfg.grid_points),
        Vec::with_capacity(cfg.grid_points),
        Vec::with_capacity(cfg.grid_points),
    ];
    for sp in 0..3 {
        let ys: Vec<f64> = sol
            .component(sp)
            .iter()
            .map(|v| v.max(1e-300).ln())
            .collect();
        let spline = CubicSpline::new(sol.ts.clone(), ys)?;
        for &t in &times {
            traces[sp].push(spline.eval(t).exp());
        }
    }
    let [alpha, eta, rho] = traces;
    Ok(ConcentrationTraces {
        times,
        alpha,
        eta,
        rho,
    })
}

/// Upward crossings of `level`, located by linear interpolation between
/// adjacent grid points; ascending.
pub fn crossing_times(times: &[f64], values: &[f64], level: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..values.len().saturating_sub(1) {
        if values[i] <= level && values[i + 1] > level {
            let dv = values[i + 1] - values[i];
            let frac = if dv > 0.0 { (level - values[i]) / dv } else { 0.0 };
            out.push(times[i] + frac * (times[i + 1] - times[i]));
        }
    }
    out
}

/// Index-paired squared time differences plus a squared `window` penalty
/// per unmatched crossing on either side, square-rooted over all species.
/// Times must share one unit with `window`.
pub fn crossing_loss(candidate: &[Vec<f64>; 3], target: &[Vec<f64>; 3], window: f64) -> f64 {
    let mut total = 0.0;
    for sp in 0..3 {
        let c = &candidate[sp];
        let t = &target[sp];
        let matched = c.len().min(t.len());
        for i in 0..matched {
            let d = c[i] - t[i];
            total += d * d;
        }
        let unmatched = (c.len() + t.len() - 2 * matched) as f64;
        total += unmatched * window * window;
    }
    total.sqrt()
}

/// Precomputed target crossings plus the candidate scoring rule.
pub struct OregonatorLoss {
    cfg: IntegrationConfig,
    target_crossings: [Vec<f64>; 3],
    target_traces: ConcentrationTraces,
}

impl OregonatorLoss {
    pub fn new(target: &OregonatorParams, cfg: IntegrationConfig) -> Result<Self> {
        let traces = integrate(target, &cfg)?;
        let step = cfg.grid_step();
        let crossings = [0, 1, 2].map(|sp| {
            crossing_times(&traces.times, traces.species(sp), CROSSING_LEVEL)
                .into_iter()
                .map(|t| t / step)
                .collect::<Vec<f64>>()
        });
        Ok(Self {
            cfg,
            target_crossings: crossings,
            target_traces: traces,
        })
    }

    pub fn target_traces(&self) -> &ConcentrationTraces {
        &self.target_traces
    }

    pub fn config(&self) -> &IntegrationConfig {
        &self.cfg
    }

    /// Full-window miss penalty, in grid units.
    fn window(&self) -> f64 {
        (self.cfg.grid_points - 1) as f64
    }

    /// Loss of a candidate parameter set; integration failures (and
    /// invalid parameters) map to [`FAILURE_SENTINEL`].
    pub fn loss(&self, candidate: &OregonatorParams) -> f64 {
        let traces = match integrate(candidate, &self.cfg) {
            Ok(t) => t,
            Err(_) => return FAILURE_SENTINEL,
        };
        let step = self.cfg.grid_step();
        let crossings = [0, 1, 2].map(|sp| {
            crossing_times(&traces.times, traces.species(sp), CROSSING_LEVEL)
                .into_iter()
                .map(|t| t / step)
                .collect::<Vec<f64>>()
        });
        crossing_loss(&crossings, &self.target_crossings, self.window())
    }

    /// Objective over user-coordinate vectors of the 7-parameter search
    /// space.
    pub fn objective(&self) -> impl Fn(&[f64]) -> f64 + '_ {
        move |x: &[f64]| match OregonatorParams::from_slice(x) {
            Ok(p) => self.loss(&p),
            Err(_) => FAILURE_SENTINEL,
        }
    }
}
