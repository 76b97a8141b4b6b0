//! Scalar numerics shared across modules.

use statrs::function::gamma::ln_gamma;

/// `log(1 + exp(t))` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(e^t / (1 + e^t))`, i.e. `-softplus(-t)`.
#[inline]
pub fn log_sigmoid(t: f64) -> f64 {
    -softplus(-t)
}

/// `log C(n, k)` via log-gamma.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n, "ln_binomial: k > n");
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Exact `C(n, k)` as u128, saturating at `u128::MAX`.
pub fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy_bits(z: f64) -> f64 {
    let term = |u: f64| if u <= 0.0 { 0.0 } else { -u * u.log2() };
    term(z) + term(1.0 - z)
}

/// Coefficient `tanh(eta/2) / (4 eta)` of the quadratic logistic bound; 1/8 in the limit.
#[inline]
pub fn jj_coefficient(eta: f64) -> f64 {
    if eta.abs() < 1e-8 {
        0.125
    } else {
        (0.5 * eta).tanh() / (4.0 * eta)
    }
}
