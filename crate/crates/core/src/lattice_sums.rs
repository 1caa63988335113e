//! Shell sums of power weights over `Z^D` in the max-norm.

/// Number of points of `Z^D` with max-norm exactly `k`.
pub fn shell_count(k: u64, dim: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let outer = (2 * k + 1) as f64;
    let inner = (2 * k - 1) as f64;
    outer.powi(dim as i32) - inner.powi(dim as i32)
}

/// Rigorous upper bound on `sum_{k > cutoff} shell_count(k) k^{-theta}`.
///
/// Uses `shell_count(k) <= 2D 3^{D-1} k^{D-1}` and the integral comparison for
/// the decreasing summand. Needs `theta > dim`.
pub fn shell_tail_upper(theta: f64, dim: u32, cutoff: u64) -> f64 {
    debug_assert!(theta > dim as f64);
    let d = dim as f64;
    let prefactor = 2.0 * d * 3f64.powi(dim as i32 - 1);
    prefactor * (cutoff as f64).powf(d - theta) / (theta - d)
}

/// Integral estimate of `sum_{k >= start} shell_count(k) k^{-theta}` using the
/// midpoint rule `int_{start-1/2}^inf` with the exact shell polynomial.
pub fn shell_tail_estimate(theta: f64, dim: u32, start: u64) -> f64 {
    // shell_count(t) = sum_m c_m t^m, integrate term by term.
    let a = start as f64 - 0.5;
    shell_polynomial(dim)
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(m, c)| {
            let p = m as f64 - theta + 1.0;
            debug_assert!(p < 0.0);
            c * a.powf(p) / (-p)
        })
        .sum()
}

/// Coefficients of `(2t+1)^D - (2t-1)^D` in powers of `t`.
fn shell_polynomial(dim: u32) -> Vec<f64> {
    let d = dim as usize;
    let mut coeffs = vec![0.0; d + 1];
    for (m, c) in coeffs.iter_mut().enumerate() {
        let binom = binomial(d, m);
        // (2t)^m * 1^{D-m} * (1 - (-1)^{D-m})
        let sign = if (d - m) % 2 == 1 { 2.0 } else { 0.0 };
        *c = binom * 2f64.powi(m as i32) * sign;
    }
    coeffs
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `sum_{x in Z^D} <x>^{-theta}`, returned as `(estimate, upper_bound)`.
pub fn bracket_zeta(theta: f64, dim: u32, cutoff: u64) -> (f64, f64) {
    // <0> = <x> = 1 for ||x|| <= 1.
    let head: f64 = (1..=cutoff).map(|k| shell_count(k, dim) * (k as f64).powf(-theta)).sum::<f64>() + 1.0;
    (
        head + shell_tail_estimate(theta, dim, cutoff + 1),
        head + shell_tail_upper(theta, dim, cutoff),
    )
}

/// `sum_{||u|| >= start} ||u||^{-theta}` over `Z^D`: exact shells up to
/// `cutoff`, integral estimate beyond.
pub fn shell_tail_sum(theta: f64, dim: u32, start: u64, cutoff: u64) -> f64 {
    let start = start.max(1);
    let cutoff = cutoff.max(start);
    let head: f64 = (start..=cutoff).map(|k| shell_count(k, dim) * (k as f64).powf(-theta)).sum();
    head + shell_tail_estimate(theta, dim, cutoff + 1)
}
