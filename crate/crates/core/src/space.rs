//! Box-bounded search domains and the map to unit coordinates.
//!
//! All modeling (surrogate training, acquisition evaluation, proposal
//! search) happens in the unit hypercube; user coordinates only appear at
//! the domain boundary when the objective is evaluated.

use crate::error::{Error, Result};

/// Per-dimension coordinate scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    /// Affine in log10 space; requires strictly positive bounds.
    Log10,
}

/// A `d`-dimensional box with a bijection onto `[0, 1]^d`.
#[derive(Debug, Clone)]
pub struct ParameterSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
    scale: Vec<Scale>,
}

impl ParameterSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, scale: Vec<Scale>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidSpace("zero dimensions".into()));
        }
        if lower.len() != upper.len() || lower.len() != scale.len() {
            return Err(Error::InvalidSpace(format!(
                "bound/scale lengths disagree: {} lower, {} upper, {} scale",
                lower.len(),
                upper.len(),
                scale.len()
            )));
        }
        for i in 0..lower.len() {
            if !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(Error::InvalidSpace(format!("dimension {i}: non-finite bound")));
            }
            if lower[i] >= upper[i] {
                return Err(Error::InvalidSpace(format!(
                    "dimension {i}: lower {} must be < upper {}",
                    lower[i], upper[i]
                )));
            }
            if scale[i] == Scale::Log10 && lower[i] <= 0.0 {
                return Err(Error::InvalidSpace(format!(
                    "dimension {i}: log10 scale requires lower > 0, got {}",
                    lower[i]
                )));
            }
        }
        Ok(Self { lower, upper, scale })
    }

    /// All-linear box.
    pub fn linear(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let scale = vec![Scale::Linear; lower.len()];
        Self::new(lower, upper, scale)
    }

    /// Same box on every dimension.
    pub fn uniform(dims: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::linear(vec![lo; dims], vec![hi; dims])
    }

    /// Picks log10 for dimensions with positive bounds spanning at least
    /// two decades, linear otherwise.
    pub fn with_auto_scale(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let scale = lower
            .iter()
            .zip(&upper)
            .map(|(&lo, &hi)| {
                if lo > 0.0 && hi / lo >= 100.0 {
                    Scale::Log10
                } else {
                    Scale::Linear
                }
            })
            .collect();
        Self::new(lower, upper, scale)
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn scale(&self) -> &[Scale] {
        &self.scale
    }

    /// Map a user-coordinate point into the unit hypercube.
    pub fn to_unit(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: x.len(),
            });
        }
        let mut u = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if x[i] < lo || x[i] > hi || !x[i].is_finite() {
                return Err(Error::OutOfBounds {
                    dim: i,
                    value: x[i],
                    lo,
                    hi,
                });
            }
            let v = match self.scale[i] {
                Scale::Linear => (x[i] - lo) / (hi - lo),
                Scale::Log10 => {
                    if x[i] <= 0.0 {
                        return Err(Error::OutOfBounds {
                            dim: i,
                            value: x[i],
                            lo,
                            hi,
                        });
                    }
                    (x[i].log10() - lo.log10()) / (hi.log10() - lo.log10())
                }
            };
            u.push(v.clamp(0.0, 1.0));
        }
        Ok(u)
    }

    /// Inverse of [`to_unit`](Self::to_unit).
    pub fn from_unit(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: u.len(),
            });
        }
        let mut x = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            if !(0.0..=1.0).contains(&u[i]) {
                return Err(Error::OutOfBounds {
                    dim: i,
                    value: u[i],
                    lo: 0.0,
                    hi: 1.0,
                });
            }
            let (lo, hi) = (self.lower[i], self.upper[i]);
            let v = match self.scale[i] {
                Scale::Linear => lo + u[i] * (hi - lo),
                Scale::Log10 => {
                    let l = lo.log10();
                    10f64.powf(l + u[i] * (hi.log10() - l))
                }
            };
            // Round-off at the ends must not escape the box.
            x.push(v.clamp(lo, hi));
        }
        Ok(x)
    }
}

/// Observed (point, value) pairs, with points kept in unit coordinates.
#[derive(Debug, Clone, Default)]
pub struct ObservationSet {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let mut set = Self::new();
        if points.len() != values.len() {
            return Err(Error::InvalidObservation(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        for (p, v) in points.into_iter().zip(values) {
            set.push(p, v)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, point: Vec<f64>, value: f64) -> Result<()> {
        if let Some(first) = self.points.first() {
            if point.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: point.len(),
                });
            }
        }
        if point.is_empty() {
            return Err(Error::InvalidObservation("empty point".into()));
        }
        for (i, &c) in point.iter().enumerate() {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidObservation(format!(
                    "coordinate {i} = {c} outside [0, 1]"
                )));
            }
        }
        if !value.is_finite() {
            return Err(Error::InvalidObservation(format!("non-finite value {value}")));
        }
        self.points.push(point);
        self.values.push(value);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index of the observation with the lowest value.
    pub fn best(&self) -> Option<usize> {
        (0..self.n()).min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn midpoint_of_symmetric_box() {
        let space = ParameterSpace::uniform(2, -32.0, 32.0).unwrap();
        let u = space.to_unit(&[0.0, 0.0]).unwrap();
        assert_eq!(u, vec![0.5, 0.5]);
    }

    #[test]
    fn log_midpoint() {
        let space =
            ParameterSpace::new(vec![1e-8], vec![1e-4], vec![Scale::Log10]).unwrap();
        let u = space.to_unit(&[1e-6]).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn corners_map_to_cube_corners() {
        let space = ParameterSpace::uniform(2, -5.0, 5.0).unwrap();
        let u = space.to_unit(&[-5.0, 5.0]).unwrap();
        assert_eq!(u, vec![0.0, 1.0]);
    }

    #[test]
    fn from_unit_corner() {
        let space = ParameterSpace::uniform(2, -2.0, 2.0).unwrap();
        let x = space.from_unit(&[0.0, 0.0]).unwrap();
        assert_eq!(x, vec![-2.0, -2.0]);
    }

    #[test]
    fn from_unit_log_geometric_mean() {
        let space = ParameterSpace::new(vec![1e4], vec![1e9], vec![Scale::Log10]).unwrap();
        let x = space.from_unit(&[0.5]).unwrap();
        assert!((x[0] - 10f64.powf(6.5)).abs() / x[0] < 1e-12, "{}", x[0]);
    }

    #[test]
    fn out_of_bounds_names_dimension() {
        let space = ParameterSpace::uniform(3, 0.0, 1.0).unwrap();
        match space.to_unit(&[0.5, 2.0, 0.5]) {
            Err(Error::OutOfBounds { dim: 1, .. }) => {}
            other => panic!("expected OutOfBounds on dim 1, got {other:?}"),
        }
    }

    #[test]
    fn log_scale_rejects_nonpositive_lower() {
        let err = ParameterSpace::new(vec![0.0], vec![1.0], vec![Scale::Log10]);
        assert!(err.is_err());
    }

    #[test]
    fn auto_scale_spans_two_decades() {
        let space =
            ParameterSpace::with_auto_scale(vec![1e-8, 0.0, 1e3], vec![1e-4, 100.0, 1e4])
                .unwrap();
        assert_eq!(
            space.scale(),
            &[Scale::Log10, Scale::Linear, Scale::Linear]
        );
        let wide = ParameterSpace::with_auto_scale(vec![1e3], vec![1e5]).unwrap();
        assert_eq!(wide.scale(), &[Scale::Log10]);
    }

    #[test]
    fn observations_reject_out_of_cube_points() {
        let mut obs = ObservationSet::new();
        assert!(obs.push(vec![0.5, 1.5], 1.0).is_err());
        assert!(obs.push(vec![0.5, 0.5], f64::NAN).is_err());
        obs.push(vec![0.5, 0.5], 1.0).unwrap();
        assert!(obs.push(vec![0.5], 1.0).is_err());
        assert_eq!(obs.n(), 1);
    }

    proptest! {
        #[test]
        fn round_trip_identity(
            raw in proptest::collection::vec(0.0f64..=1.0, 1..6),
            log_mask in proptest::collection::vec(any::<bool>(), 6),
        ) {
            let d = raw.len();
            let lower: Vec<f64> = (0..d)
                .map(|i| if log_mask[i] { 1e-6 } else { -7.5 })
                .collect();
            let upper: Vec<f64> = (0..d)
                .map(|i| if log_mask[i] { 1e3 } else { 12.5 })
                .collect();
            let scale: Vec<Scale> = (0..d)
                .map(|i| if log_mask[i] { Scale::Log10 } else { Scale::Linear })
                .collect();
            let space = ParameterSpace::new(lower, upper, scale).unwrap();

            let x = space.from_unit(&raw).unwrap();
            let u = space.to_unit(&x).unwrap();
            let x2 = space.from_unit(&u).unwrap();
            for i in 0..d {
                let tol = 1e-12 * x[i].abs().max(1.0);
                prop_assert!((x[i] - x2[i]).abs() <= tol);
            }
        }

        #[test]
        fn to_unit_monotone_per_dimension(a in -4.9f64..4.9, b in -4.9f64..4.9) {
            prop_assume!((a - b).abs() > 1e-9);
            let space = ParameterSpace::uniform(1, -5.0, 5.0).unwrap();
            let ua = space.to_unit(&[a]).unwrap()[0];
            let ub = space.to_unit(&[b]).unwrap()[0];
            prop_assert_eq!(a < b, ua < ub);
        }
    }
}
