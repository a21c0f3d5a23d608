//! Monotone cubic interpolation for marginal maps.
//!
//! Fits a natural cubic spline through the knots, converts it to Hermite
//! form, then clamps the knot derivatives with the Fritsch-Carlson/Hyman
//! rule so the interpolant can never overshoot between knots. Evaluation at
//! a knot returns the stored ordinate exactly; outside the knot range the
//! curve continues linearly with the boundary slope.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-cubic Hermite interpolant with nonnegative slope everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubicSpline {
    /// Fit to knots with strictly increasing abscissae and nondecreasing
    /// ordinates. Needs at least two knots.
    pub fn fit(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InvalidParameter(format!(
                "spline needs >= 2 knots with matching ordinates, got {} / {}",
                n,
                ys.len()
            )));
        }
        for i in 0..n {
            if !xs[i].is_finite() || !ys[i].is_finite() {
                return Err(Error::Domain(format!("non-finite knot {i}")));
            }
            if i > 0 {
                if xs[i] <= xs[i - 1] {
                    return Err(Error::Domain(format!(
                        "knot abscissae must be strictly increasing at index {i}"
                    )));
                }
                if ys[i] < ys[i - 1] {
                    return Err(Error::Domain(format!(
                        "knot ordinates must be nondecreasing at index {i}"
                    )));
                }
            }
        }
        let ds = monotone_derivatives(&xs, &ys);
        Ok(Self { xs, ys, ds })
    }

    /// Knot abscissae.
    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    /// Knot ordinates.
    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    /// Evaluate at `x`. Knot hits reproduce the stored ordinate bit for
    /// bit; points beyond the ends extrapolate linearly.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            if x == self.xs[0] {
                return self.ys[0];
            }
            return self.ys[0] + self.ds[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            if x == self.xs[n - 1] {
                return self.ys[n - 1];
            }
            return self.ys[n - 1] + self.ds[n - 1] * (x - self.xs[n - 1]);
        }
        // Index of the interval [xs[i], xs[i+1]) containing x.
        let i = match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(k) => return self.ys[k],
            Err(k) => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }
}

/// Natural-spline knot derivatives clamped for monotonicity.
fn monotone_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
    let m: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

    // Natural cubic spline second derivatives via the Thomas algorithm.
    // Boundary conditions M[0] = M[n-1] = 0.
    let mut second = vec![0.0; n];
    if n > 2 {
        let k = n - 2; // interior unknowns
        let mut diag = vec![0.0; k];
        let mut upper = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            upper[i] = h[i + 1];
            rhs[i] = 6.0 * (m[i + 1] - m[i]);
        }
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        second[k] = rhs[k - 1] / diag[k - 1];
        for i in (1..k).rev() {
            second[i] = (rhs[i - 1] - upper[i - 1] * second[i]) / diag[i - 1];
        }
    }

    // Hermite derivatives of the natural spline at the knots.
    let mut d = vec![0.0; n];
    for i in 0..n - 1 {
        d[i] = m[i] - h[i] * (2.0 * second[i] + second[i + 1]) / 6.0;
    }
    d[n - 1] = m[n - 2] + h[n - 2] * (second[n - 2] + 2.0 * second[n - 1]) / 6.0;

    // Monotonicity clamp: each derivative must be nonnegative and at most
    // three times the smaller adjacent secant; flat segments force zero.
    for i in 0..n {
        let left = if i == 0 { m[0] } else { m[i - 1] };
        let right = if i == n - 1 { m[n - 2] } else { m[i] };
        let cap = 3.0 * left.min(right);
        d[i] = d[i].clamp(0.0, cap.max(0.0));
    }
    d
}
