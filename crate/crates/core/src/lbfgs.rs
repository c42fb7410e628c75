//! Limited-memory quasi-Newton descent projected onto a box.
//!
//! Used to polish proxy-search candidates inside the unit cube. The
//! two-loop recursion builds the search direction; steps are clamped to
//! the box and accepted under a backtracking Armijo test on the actual
//! (projected) displacement.

use std::collections::VecDeque;

pub struct BoxLbfgs {
    pub memory: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for BoxLbfgs {
    fn default() -> Self {
        Self {
            memory: 5,
            max_iters: 20,
            grad_tol: 1e-9,
        }
    }
}

impl BoxLbfgs {
    /// Minimize `f` within `[lo, hi]` starting from `x0`; returns the best
    /// point and value seen. `f` returns the value and gradient.
    pub fn minimize<F>(&self, mut f: F, x0: &[f64], lo: &[f64], hi: &[f64]) -> (Vec<f64>, f64)
    where
        F: FnMut(&[f64]) -> (f64, Vec<f64>),
    {
        let n = x0.len();
        let clamp = |x: &mut Vec<f64>| {
            for i in 0..n {
                x[i] = x[i].clamp(lo[i], hi[i]);
            }
        };

        let mut x = x0.to_vec();
        clamp(&mut x);
        let (mut fx, mut gx) = f(&x);
        if !fx.is_finite() {
            return (x, fx);
        }

        let mut s_hist: VecDeque<Vec<f64>> = VecDeque::new();
        let mut y_hist: VecDeque<Vec<f64>> = VecDeque::new();
        let mut rho_hist: VecDeque<f64> = VecDeque::new();

        for _ in 0..self.max_iters {
            // Gradient projected onto the feasible directions.
            let mut pg_norm: f64 = 0.0;
            for i in 0..n {
                let active_lo = x[i] <= lo[i] && gx[i] > 0.0;
                let active_hi = x[i] >= hi[i] && gx[i] < 0.0;
                if !(active_lo || active_hi) {
                    pg_norm = pg_norm.max(gx[i].abs());
                }
            }
            if pg_norm < self.grad_tol {
                break;
            }

            // Two-loop recursion.
            let mut dir: Vec<f64> = gx.iter().map(|g| -g).collect();
            if !s_hist.is_empty() {
                let m = s_hist.len();
                let mut alpha = vec![0.0; m];
                for j in (0..m).rev() {
                    let a = rho_hist[j] * dot(&s_hist[j], &dir);
                    alpha[j] = a;
                    axpy(-a, &y_hist[j], &mut dir);
                }
                let last = m - 1;
                let scale = dot(&s_hist[last], &y_hist[last]) / dot(&y_hist[last], &y_hist[last]);
                for v in dir.iter_mut() {
                    *v *= scale;
                }
                for j in 0..m {
                    let b = rho_hist[j] * dot(&y_hist[j], &dir);
                    axpy(alpha[j] - b, &s_hist[j], &mut dir);
                }
            }
            if dot(&dir, &gx) >= 0.0 {
                // Fall back to steepest descent when the model direction
                // is not a descent direction.
                for i in 0..n {
                    dir[i] = -gx[i];
                }
            }

            // Backtracking on the projected step. Without curvature
            // history the direction is the raw gradient, whose magnitude
            // can be extreme near sharp kernels; start from a unit-length
            // move instead.
            let mut t = if s_hist.is_empty() {
                let dn = norm(&dir);
                if dn > 1.0 {
                    1.0 / dn
                } else {
                    1.0
                }
            } else {
                1.0
            };
            let mut accepted = false;
            let mut x_new = x.clone();
            let mut f_new = fx;
            let mut g_new = gx.clone();
            for _ in 0..30 {
                for i in 0..n {
                    x_new[i] = (x[i] + t * dir[i]).clamp(lo[i], hi[i]);
                }
                let step_dot_g: f64 = (0..n).map(|i| (x_new[i] - x[i]) * gx[i]).sum();
                if step_dot_g >= 0.0 {
                    // Projection removed all descent; shrink.
                    t *= 0.5;
                    continue;
                }
                let (fv, gv) = f(&x_new);
                if fv.is_finite() && fv <= fx + 1e-4 * step_dot_g {
                    f_new = fv;
                    g_new = gv;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }

            let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
            let y: Vec<f64> = (0..n).map(|i| g_new[i] - gx[i]).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
                if s_hist.len() == self.memory {
                    s_hist.pop_front();
                    y_hist.pop_front();
                    rho_hist.pop_front();
                }
                rho_hist.push_back(1.0 / sy);
                s_hist.push_back(s);
                y_hist.push_back(y);
            }

            x = x_new;
            fx = f_new;
            gx = g_new;
        }

        (x, fx)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for i in 0..y.len() {
        y[i] += a * x[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_interior_minimum() {
        let opt = BoxLbfgs {
            max_iters: 50,
            ..Default::default()
        };
        let f = |x: &[f64]| {
            let v = 3.0 * (x[0] - 0.4).powi(2) + (x[1] - 0.7).powi(2);
            (v, vec![6.0 * (x[0] - 0.4), 2.0 * (x[1] - 0.7)])
        };
        let (x, fx) = opt.minimize(f, &[0.9, 0.1], &[0.0, 0.0], &[1.0, 1.0]);
        assert!((x[0] - 0.4).abs() < 1e-6 && (x[1] - 0.7).abs() < 1e-6, "{x:?}");
        assert!(fx < 1e-10);
    }

    #[test]
    fn exterior_minimum_lands_on_boundary() {
        let opt = BoxLbfgs::default();
        let f = |x: &[f64]| {
            let v = (x[0] - 2.0).powi(2);
            (v, vec![2.0 * (x[0] - 2.0)])
        };
        let (x, _) = opt.minimize(f, &[0.3], &[0.0], &[1.0]);
        assert!((x[0] - 1.0).abs() < 1e-9, "{x:?}");
    }

    #[test]
    fn flat_function_returns_start() {
        let opt = BoxLbfgs::default();
        let f = |_: &[f64]| (1.0, vec![0.0, 0.0]);
        let (x, fx) = opt.minimize(f, &[0.2, 0.8], &[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(x, vec![0.2, 0.8]);
        assert_eq!(fx, 1.0);
    }

    #[test]
    fn iterates_stay_in_box() {
        let opt = BoxLbfgs {
            max_iters: 40,
            ..Default::default()
        };
        let f = |x: &[f64]| {
            // Steep valley pulling outside the box.
            let v = (x[0] + 5.0).powi(2) + 100.0 * (x[1] - x[0]).powi(2);
            (
                v,
                vec![
                    2.0 * (x[0] + 5.0) - 200.0 * (x[1] - x[0]),
                    200.0 * (x[1] - x[0]),
                ],
            )
        };
        let (x, _) = opt.minimize(f, &[0.9, 0.2], &[0.0, 0.0], &[1.0, 1.0]);
        assert!(x.iter().all(|&v| (0.0..=1.0).contains(&v)), "{x:?}");
        assert!(x[0] < 1e-8 && x[1] < 1e-6, "{x:?}");
    }
}
