//! Seeded bootstrap estimates for summary tables and plot bands.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const RESAMPLES: usize = 1000;

/// Bootstrap standard deviation of the sample mean.
pub fn mean_std(values: &[f64], seed: u64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means = Vec::with_capacity(RESAMPLES);
    for _ in 0..RESAMPLES {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += values[rng.random_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    let grand = means.iter().sum::<f64>() / RESAMPLES as f64;
    (means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (RESAMPLES - 1) as f64).sqrt()
}

/// Percentile band of the mean at each column of a runs-by-steps matrix;
/// returns `(lo, hi)` rows for the requested central probability mass.
pub fn mean_band(rows: &[Vec<f64>], mass: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let steps = rows.first().map_or(0, Vec::len);
    let n = rows.len();
    let mut lo = vec![0.0; steps];
    let mut hi = vec![0.0; steps];
    if n == 0 || steps == 0 {
        return (lo, hi);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<Vec<usize>> = (0..RESAMPLES)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect();
    let mut col = vec![0.0; RESAMPLES];
    let tail = (1.0 - mass) / 2.0;
    let lo_idx = ((RESAMPLES as f64) * tail) as usize;
    let hi_idx = ((RESAMPLES as f64) * (1.0 - tail)) as usize - 1;
    for s in 0..steps {
        for (r, pick) in picks.iter().enumerate() {
            col[r] = pick.iter().map(|&i| rows[i][s]).sum::<f64>() / n as f64;
        }
        col.sort_by(f64::total_cmp);
        lo[s] = col[lo_idx];
        hi[s] = col[hi_idx.min(RESAMPLES - 1)];
    }
    (lo, hi)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
