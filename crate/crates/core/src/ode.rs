//! Classic fourth-order Runge-Kutta with step-doubling error control,
//! and natural cubic spline resampling of the accepted solution points.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdaptiveConfig {
    pub rtol: f64,
    /// Absolute tolerance as a fraction of the running per-component
    /// maximum magnitude.
    pub atol_scale: f64,
    pub max_steps: usize,
    pub min_step: f64,
    pub initial_step: f64,
    /// Knot recording interval; `None` keeps every accepted step. Sparse
    /// recording bounds memory on long stiff integrations where accepted
    /// steps are far denser than any downstream grid.
    pub record_dt: Option<f64>,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-7,
            atol_scale: 1e-9,
            max_steps: 10_000_000,
            min_step: 1e-14,
            initial_step: 1e-6,
            record_dt: None,
        }
    }
}

/// Accepted knots of an adaptive integration, stored flat.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub ts: Vec<f64>,
    dim: usize,
    data: Vec<f64>,
}

impl OdeSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl OdeSolution {
    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn state(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    /// All values of one state component, in knot order.
    pub fn component(&self, comp: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.data[i * self.dim + comp]).collect()
    }
}

#[inline(always)]
fn rk4_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k1 = f(t, y);
    let mut tmp = [0.0; N];
    for i in 0..N {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    let k2 = f(t + 0.5 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    let k3 = f(t + 0.5 * h, &tmp);
    for i in 0..N {
        tmp[i] = y[i] + h * k3[i];
    }
    let k4 = f(t + h, &tmp);
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

/// One step at `h` and two at `h/2` off a shared first stage; the two
/// trajectories are independent until the midpoint, which lets the CPU
/// overlap their stage chains.
#[inline(always)]
fn rk4_step_doubled<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    h: f64,
) -> ([f64; N], [f64; N])
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let hh = 0.5 * h;
    let k1 = f(t, y);

    let mut tf = [0.0; N];
    let mut th = [0.0; N];
    for i in 0..N {
        tf[i] = y[i] + hh * k1[i];
        th[i] = y[i] + 0.5 * hh * k1[i];
    }
    let fk2 = f(t + hh, &tf);
    let hk2 = f(t + 0.5 * hh, &th);
    for i in 0..N {
        tf[i] = y[i] + hh * fk2[i];
        th[i] = y[i] + 0.5 * hh * hk2[i];
    }
    let fk3 = f(t + hh, &tf);
    let hk3 = f(t + 0.5 * hh, &th);
    for i in 0..N {
        tf[i] = y[i] + h * fk3[i];
        th[i] = y[i] + hh * hk3[i];
    }
    let fk4 = f(t + h, &tf);
    let hk4 = f(t + hh, &th);

    let mut full = [0.0; N];
    let mut mid = [0.0; N];
    for i in 0..N {
        full[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * (fk2[i] + fk3[i]) + fk4[i]);
        mid[i] = y[i] + hh / 6.0 * (k1[i] + 2.0 * (hk2[i] + hk3[i]) + hk4[i]);
    }
    let fine = rk4_step(f, t + hh, &mid, hh);
    (full, fine)
}

/// Fixed-step RK4 over `[t0, t1]`; returns the final state. Used for
/// convergence-order checks; shares its step kernel with the adaptive
/// driver.
pub fn rk4_fixed<const N: usize, F>(f: F, y0: [f64; N], t0: f64, t1: f64, steps: usize) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        y = rk4_step(&f, t, &y, h);
    }
    y
}

/// Integrate with step doubling: each step is taken once at `h` and twice
/// at `h/2`; their difference controls acceptance and the next step size,
/// and the accepted state is the locally extrapolated fine solution.
pub fn integrate_adaptive<const N: usize, F>(
    f: F,
    y0: [f64; N],
    t0: f64,
    t1: f64,
    cfg: &AdaptiveConfig,
) -> Result<OdeSolution>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut y = y0;
    let mut t = t0;
    let mut h = cfg.initial_step.min(t1 - t0);
    let mut ymax = [0.0; N];
    for i in 0..N {
        ymax[i] = y0[i].abs().max(1e-12);
    }

    let mut ts = vec![t0];
    let mut data = y.to_vec();
    let mut last_recorded = t0;

    let mut accepted = 0usize;
    while t < t1 {
        if accepted >= cfg.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("step cap {} exceeded", cfg.max_steps),
            });
        }
        if h < cfg.min_step {
            return Err(Error::Integration {
                t,
                reason: format!("step size {h} fell below {}", cfg.min_step),
            });
        }
        let mut final_step = false;
        if t + h >= t1 {
            h = t1 - t;
            final_step = true;
        }

        let (full, fine) = rk4_step_doubled(&f, t, &y, h);

        let finite = full.iter().chain(fine.iter()).all(|v| v.is_finite());
        if !finite {
            h *= 0.25;
            continue;
        }

        let mut ratio: f64 = 0.0;
        for i in 0..N {
            let err = (fine[i] - full[i]).abs();
            let scale = cfg.atol_scale * ymax[i] + cfg.rtol * y[i].abs().max(fine[i].abs());
            ratio = ratio.max(err / scale.max(1e-300));
        }

        if ratio <= 1.0 {
            for i in 0..N {
                // Local extrapolation: the fine solution plus the
                // step-doubling error estimate / 15.
                y[i] = fine[i] + (fine[i] - full[i]) / 15.0;
                let a = y[i].abs();
                if a > ymax[i] {
                    ymax[i] = a;
                }
            }
            t = if final_step { t1 } else { t + h };
            accepted += 1;
            let record = match cfg.record_dt {
                None => true,
                Some(dt) => t - last_recorded >= dt || t >= t1,
            };
            if record {
                ts.push(t);
                data.extend_from_slice(&y);
                last_recorded = t;
            }
            let grow = (0.9 * ratio.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            h *= grow;
        } else {
            let shrink = (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
            h *= shrink;
        }
    }
    Ok(OdeSolution { ts, dim: N, data })
}

/// Natural cubic spline through strictly increasing knots.
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    y2: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InvalidConfig(format!(
                "spline needs >= 2 matching knots, got {} / {}",
                n,
                ys.len()
            )));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("spline knots must increase".into()));
        }

        // Tridiagonal solve for the second derivatives with natural
        // boundary conditions.
        let mut y2 = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
            let p = sig * y2[i - 1] + 2.0;
            y2[i] = (sig - 1.0) / p;
            let du = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
                - (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            u[i] = (6.0 * du / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
        }
        for i in (0..n - 1).rev() {
            y2[i] = y2[i] * y2[i + 1] + u[i];
        }
        Ok(Self { xs, ys, y2 })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let x = x.clamp(self.xs[0], self.xs[n - 1]);
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] > x {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let hstep = self.xs[hi] - self.xs[lo];
        let a = (self.xs[hi] - x) / hstep;
        let b = (x - self.xs[lo]) / hstep;
        a * self.ys[lo]
            + b * self.ys[hi]
            + ((a * a * a - a) * self.y2[lo] + (b * b * b - b) * self.y2[hi]) * hstep * hstep / 6.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, y: &[f64; 1]) -> [f64; 1] {
        [-y[0]]
    }

    #[test]
    fn rk4_order_is_near_four() {
        // y' = -y over [0, 1]; halving steps must cut the error by ~2^4.
        let exact = (-1.0f64).exp();
        let mut errors = Vec::new();
        for steps in [8usize, 16, 32, 64, 128] {
            let y = rk4_fixed(decay, [1.0], 0.0, 1.0, steps);
            errors.push((y[0] - exact).abs());
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((3.7..=4.3).contains(&order), "observed order {order}");
        }
    }

    #[test]
    fn adaptive_matches_exact_decay() {
        let cfg = AdaptiveConfig::default();
        let sol = integrate_adaptive(decay, [1.0], 0.0, 5.0, &cfg).unwrap();
        let last = sol.state(sol.len() - 1)[0];
        assert!(((-5.0f64).exp() - last).abs() < 1e-8, "{last}");
        assert!(sol.ts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*sol.ts.last().unwrap(), 5.0);
    }

    #[test]
    fn adaptive_tracks_oscillations() {
        let f = |t: f64, _y: &[f64; 1]| [(10.0 * t).cos() * 10.0];
        let cfg = AdaptiveConfig::default();
        let sol = integrate_adaptive(f, [0.0], 0.0, 2.0, &cfg).unwrap();
        let last = sol.state(sol.len() - 1)[0];
        assert!((last - (20.0f64).sin()).abs() < 1e-6, "{last}");
    }

    #[test]
    fn sparse_recording_keeps_endpoints_and_spacing() {
        let cfg = AdaptiveConfig {
            record_dt: Some(0.25),
            ..Default::default()
        };
        let sol = integrate_adaptive(decay, [1.0], 0.0, 3.0, &cfg).unwrap();
        assert_eq!(sol.ts[0], 0.0);
        assert_eq!(*sol.ts.last().unwrap(), 3.0);
        assert!(sol.len() < 30, "{}", sol.len());
        let last = sol.state(sol.len() - 1)[0];
        assert!(((-3.0f64).exp() - last).abs() < 1e-8);
    }

    #[test]
    fn step_cap_is_enforced() {
        let cfg = AdaptiveConfig {
            max_steps: 10,
            ..Default::default()
        };
        let err = integrate_adaptive(decay, [1.0], 0.0, 100.0, &cfg);
        assert!(matches!(err, Err(Error::Integration { .. })));
    }

    #[test]
    fn spline_reproduces_smooth_function() {
        let xs: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 1.3).sin()).collect();
        let spline = CubicSpline::new(xs, ys).unwrap();
        for i in 0..500 {
            let x = 0.2 + i as f64 * 0.019;
            let v = spline.eval(x);
            assert!((v - (x * 1.3).sin()).abs() < 1e-4, "x={x}: {v}");
        }
    }

    #[test]
    fn spline_rejects_bad_knots() {
        assert!(CubicSpline::new(vec![0.0], vec![1.0]).is_err());
        assert!(CubicSpline::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }
}
