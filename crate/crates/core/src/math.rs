//! Vectorizable elementary functions for the network hot loops.
//!
//! `f64::tanh`/`f64::exp` are libm calls the autovectorizer cannot touch;
//! the training inner loop applies tanh across whole activation slices,
//! so a branch-free polynomial variant pays off. Accuracy is ~1e-14
//! relative, far below every tolerance used in this crate.

const LOG2_E: f64 = std::f64::consts::LOG2_E;
// Split ln 2 so that n * LN2_HI is exact for the n range in use.
const LN2_HI: f64 = 6.931471803691238e-1;
const LN2_LO: f64 = 1.9082149292705877e-10;
// Largest f64 strictly below 1.
const ONE_BELOW: f64 = f64::from_bits(0x3FEF_FFFF_FFFF_FFFF);

/// exp(c) on the reduced range via 2^n * p(c), branch-free. Callers must
/// keep `x` within [-708, 708].
#[inline(always)]
fn exp_core(x: f64) -> f64 {
    let n = (x * LOG2_E).round_ties_even();
    let c = x - n * LN2_HI - n * LN2_LO;
    // Degree-11 Taylor of exp on [-ln2/2, ln2/2] in Estrin form;
    // remainder ~1e-16 relative.
    let c2 = c * c;
    let c4 = c2 * c2;
    let b0 = 1.0 + c;
    let b1 = 0.5 + c * (1.0 / 6.0);
    let b2 = 1.0 / 24.0 + c * (1.0 / 120.0);
    let b3 = 1.0 / 720.0 + c * (1.0 / 5040.0);
    let b4 = 1.0 / 40320.0 + c * (1.0 / 362880.0);
    let b5 = 1.0 / 3628800.0 + c * (1.0 / 39916800.0);
    let q0 = b0 + c2 * b1;
    let q1 = b2 + c2 * b3;
    let q2 = b4 + c2 * b5;
    let p = q0 + c4 * (q1 + c4 * q2);
    let scale = f64::from_bits(((n as i64 + 1023) as u64) << 52);
    p * scale
}

/// exp(x); out-of-range inputs saturate to 0 or infinity.
#[inline]
pub fn fast_exp(x: f64) -> f64 {
    if x > 708.0 {
        return f64::INFINITY;
    }
    if x < -708.0 {
        return 0.0;
    }
    exp_core(x)
}

#[inline(always)]
fn tanh_core(x: f64) -> f64 {
    // tanh saturates to ±1 within one ulp beyond |x| = 20.
    let a = x.abs().min(20.0);
    let e = exp_core(2.0 * a);
    (1.0 - 2.0 / (e + 1.0)).copysign(x)
}

#[inline(always)]
fn sigmoid_core(x: f64) -> f64 {
    let a = x.abs().min(708.0);
    let e = exp_core(-a);
    let pos = 1.0 / (1.0 + e);
    let neg = e / (1.0 + e);
    let v = if x >= 0.0 { pos } else { neg };
    // Keep the value strictly inside (0, 1); the quotient rounds to
    // exactly 1 above x ~ 36.7.
    v.min(ONE_BELOW)
}

#[inline]
pub fn fast_tanh(x: f64) -> f64 {
    tanh_core(x)
}

#[inline]
pub fn fast_sigmoid(x: f64) -> f64 {
    sigmoid_core(x)
}

/// In-place tanh over a slice; the branch-free core lets this loop
/// vectorize.
#[inline]
pub fn tanh_slice(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = tanh_core(*x);
    }
}

/// In-place logistic function over a slice.
#[inline]
pub fn sigmoid_slice(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = sigmoid_core(*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exp_accuracy_over_working_range() {
        for i in -40_000..=40_000 {
            let x = i as f64 * 0.01;
            let got = fast_exp(x);
            let want = x.exp();
            let rel = ((got - want) / want).abs();
            assert!(rel < 5e-14, "x={x}: {got} vs {want} (rel {rel})");
        }
        assert_eq!(fast_exp(-800.0), 0.0);
        assert_eq!(fast_exp(800.0), f64::INFINITY);
    }

    #[test]
    fn tanh_accuracy_and_saturation() {
        for i in -25_000..=25_000 {
            let x = i as f64 * 0.001;
            let got = fast_tanh(x);
            let want = x.tanh();
            assert!((got - want).abs() < 5e-14, "x={x}: {got} vs {want}");
        }
        assert_eq!(fast_tanh(25.0), 1.0);
        assert_eq!(fast_tanh(-25.0), -1.0);
        assert_eq!(fast_tanh(0.0), 0.0);
        assert_eq!(fast_tanh(1e6), 1.0);
    }

    #[test]
    fn sigmoid_matches_reference_and_stays_in_unit_interval() {
        for i in -8000..=8000 {
            let x = i as f64 * 0.01;
            let got = fast_sigmoid(x);
            let want = 1.0 / (1.0 + (-x).exp());
            assert!((got - want).abs() < 5e-14, "x={x}");
            assert!(got > 0.0 && got < 1.0);
        }
        assert!(fast_sigmoid(1e8) < 1.0);
        assert!(fast_sigmoid(-1e8) > 0.0);
    }

    #[test]
    fn slice_variants_match_scalar() {
        let xs: Vec<f64> = (-200..200).map(|i| i as f64 * 0.11).collect();
        let mut t = xs.clone();
        tanh_slice(&mut t);
        let mut s = xs.clone();
        sigmoid_slice(&mut s);
        for (i, &x) in xs.iter().enumerate() {
            assert_eq!(t[i].to_bits(), fast_tanh(x).to_bits());
            assert_eq!(s[i].to_bits(), fast_sigmoid(x).to_bits());
        }
    }

    proptest! {
        #[test]
        fn tanh_is_odd_and_bounded(x in -50.0f64..50.0) {
            let t = fast_tanh(x);
            prop_assert!(t.abs() <= 1.0);
            prop_assert!((fast_tanh(-x) + t).abs() < 1e-15);
        }
    }
}
