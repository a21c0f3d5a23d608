//! Special functions for Dirichlet likelihood work.
//!
//! Log-gamma and digamma come from `statrs`; trigamma and the inverse of
//! digamma are provided here because `statrs` has no public versions.

/// Natural log of the Gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Digamma ψ(x), the derivative of `ln_gamma`.
pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}

/// Trigamma ψ'(x) for x > 0.
///
/// Uses the recurrence ψ'(x) = ψ'(x+1) + 1/x² to shift the argument above
/// 10, then the asymptotic series in inverse powers of x.
pub fn trigamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "trigamma defined here for x > 0 only");
    let mut z = x;
    let mut acc = 0.0;
    while z < 10.0 {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    // Bernoulli-number series: 1/z + 1/(2z^2) + sum B_2k / z^(2k+1).
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let series = inv
        + 0.5 * inv2
        + inv * inv2
            * (1.0 / 6.0
                + inv2
                    * (-1.0 / 30.0
                        + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0)))));
    acc + series
}

/// log(sum_i exp(t_i)) with max subtraction; -inf for an empty slice.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Inverse of digamma: the x > 0 with ψ(x) = y.
///
/// Initial guess per the usual piecewise rule (exp(y) + 1/2 for large y,
/// -1/(y + γ) for very negative y), refined by Newton steps on the strictly
/// increasing ψ.
pub fn inv_digamma(y: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    let mut x = if y >= -2.22 {
        y.exp() + 0.5
    } else {
        -1.0 / (y + EULER_GAMMA)
    };
    for _ in 0..20 {
        let step = (digamma(x) - y) / trigamma(x);
        let next = (x - step).max(x * 0.1).max(1e-300);
        let done = (next - x).abs() <= 1e-14 * x.abs();
        x = next;
        if done {
            break;
        }
    }
    x
}
