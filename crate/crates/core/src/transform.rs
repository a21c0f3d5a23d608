//! Margin-free mapping of raw attribute vectors onto the simplex.
//!
//! Each attribute is replaced by a smoothed empirical CDF value, so the
//! downstream model sees only the copula of the data: any strictly
//! increasing change of an attribute's scale leaves the transformed
//! training sample unchanged bit for bit. A final synthetic coordinate
//! tops the vector up to sum one:
//!
//! ```text
//! y_j = F_j(x_j) / A   (j = 1..A),    y_{A+1} = (A - sum_j F_j(x_j)) / A,
//! ```
//!
//! where A is the number of raw attributes, so points live on the
//! (A+1)-dimensional simplex. The smoothing interpolates logit-scale ECDF
//! values between the observed knots with a monotone cubic; training
//! values themselves always map to their exact rank-based probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;
use crate::spline::MonotoneCubicSpline;

/// Default clamp: marginal CDF values are confined to [clamp, 1 - clamp].
pub const DEFAULT_CLAMP: f64 = 1e-6;

/// Minimum number of training rows for a meaningful rank map.
pub const MIN_FIT_ROWS: usize = 10;

/// Above this many distinct values, an attribute's knot set is thinned to
/// evenly spaced order statistics (rank-exact at the kept knots).
pub const MAX_KNOTS: usize = 200;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Smoothed rank map for one attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMap {
    name: String,
    /// Distinct training values kept as knots, ascending.
    knots: Vec<f64>,
    /// Average-rank ECDF value at each knot: rank / (n + 1).
    probs: Vec<f64>,
    /// Interpolant from raw value to logit(prob).
    spline: MonotoneCubicSpline,
}

impl AttributeMap {
    fn fit(name: &str, values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut knots = Vec::new();
        let mut probs = Vec::new();
        let mut i = 0;
        while i < n {
            let mut j = i + 1;
            while j < n && sorted[j] == sorted[i] {
                j += 1;
            }
            // Observations i..j (0-based) share this value; their 1-based
            // ranks average to (i + 1 + j) / 2.
            knots.push(sorted[i]);
            probs.push((i + 1 + j) as f64 / 2.0 / (n as f64 + 1.0));
            i = j;
        }
        if knots.len() < 2 {
            return Err(Error::ConstantAttribute(name.to_string()));
        }
        if knots.len() > MAX_KNOTS {
            let m = knots.len();
            let mut sel_knots = Vec::with_capacity(MAX_KNOTS);
            let mut sel_probs = Vec::with_capacity(MAX_KNOTS);
            let mut last = usize::MAX;
            for k in 0..MAX_KNOTS {
                let idx = (k as f64 * (m - 1) as f64 / (MAX_KNOTS - 1) as f64).round() as usize;
                if idx != last {
                    sel_knots.push(knots[idx]);
                    sel_probs.push(probs[idx]);
                    last = idx;
                }
            }
            knots = sel_knots;
            probs = sel_probs;
        }
        let logits: Vec<f64> = probs.iter().map(|&p| logit(p)).collect();
        let spline = MonotoneCubicSpline::fit(knots.clone(), logits)?;
        Ok(Self {
            name: name.to_string(),
            knots,
            probs,
            spline,
        })
    }

    /// Smoothed CDF value for one raw observation.
    fn marginal(&self, x: f64, clamp: f64) -> f64 {
        match self.knots.binary_search_by(|v| v.total_cmp(&x)) {
            // A knot hit returns the rank-based probability exactly, with
            // no dependence on the raw measurement scale.
            Ok(k) => self.probs[k],
            Err(_) => sigmoid(self.spline.eval(x)).clamp(clamp, 1.0 - clamp),
        }
    }
}

/// Fitted transform: one marginal map per attribute plus the clamp band
/// applied to inter-/extrapolated values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexTransform {
    attrs: Vec<AttributeMap>,
    clamp: f64,
}

impl SimplexTransform {
    /// Fit marginal maps on training rows (n x A, row-major) with the
    /// default clamp band.
    pub fn fit(rows: &[Vec<f64>], names: &[String]) -> Result<Self> {
        Self::fit_with_clamp(rows, names, DEFAULT_CLAMP)
    }

    /// Fit with an explicit clamp bound in (0, 0.5).
    ///
    /// Requires at least `MIN_FIT_ROWS` rows, equal-length finite rows, and
    /// at least two distinct values per attribute.
    pub fn fit_with_clamp(rows: &[Vec<f64>], names: &[String], clamp: f64) -> Result<Self> {
        if !(clamp > 0.0 && clamp < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "clamp bound {clamp} must lie in (0, 0.5)"
            )));
        }
        let a = names.len();
        if a == 0 {
            return Err(Error::InvalidParameter("no attributes to transform".into()));
        }
        if rows.len() < MIN_FIT_ROWS {
            return Err(Error::Validation(format!(
                "transform needs at least {MIN_FIT_ROWS} rows, got {}",
                rows.len()
            )));
        }
        check_rows(rows, a)?;
        let mut attrs = Vec::with_capacity(a);
        for (j, name) in names.iter().enumerate() {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            attrs.push(AttributeMap::fit(name, &column)?);
        }
        Ok(Self { attrs, clamp })
    }

    /// Number of raw attributes A.
    pub fn n_attrs(&self) -> usize {
        self.attrs.len()
    }

    /// Dimension of the output simplex points, D = A + 1.
    pub fn dim(&self) -> usize {
        self.attrs.len() + 1
    }

    /// Attribute names in column order.
    pub fn names(&self) -> Vec<&str> {
        self.attrs.iter().map(|a| a.name.as_str()).collect()
    }

    /// Smoothed CDF value of attribute `j` at `x` (mostly for diagnostics).
    pub fn marginal(&self, j: usize, x: f64) -> Result<f64> {
        let attr = self
            .attrs
            .get(j)
            .ok_or_else(|| Error::InvalidParameter(format!("attribute index {j} out of range")))?;
        if !x.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite value {x} for {}",
                attr.name
            )));
        }
        Ok(attr.marginal(x, self.clamp))
    }

    /// Transform one raw row into a simplex point of dimension A + 1.
    pub fn apply(&self, row: &[f64]) -> Result<SimplexPoint> {
        let a = self.attrs.len();
        if row.len() != a {
            return Err(Error::Validation(format!(
                "row has {} attributes, transform expects {a}",
                row.len()
            )));
        }
        let mut coords = Vec::with_capacity(a + 1);
        let mut total = 0.0;
        for (attr, &x) in self.attrs.iter().zip(row) {
            if !x.is_finite() {
                return Err(Error::Domain(format!(
                    "non-finite value {x} for {}",
                    attr.name
                )));
            }
            let f = attr.marginal(x, self.clamp);
            total += f;
            coords.push(f);
        }
        let denom = a as f64;
        for c in &mut coords {
            *c /= denom;
        }
        coords.push((denom - total) / denom);
        SimplexPoint::new(coords)
    }

    /// Transform many rows, preserving order.
    pub fn apply_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<SimplexPoint>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

fn check_rows(rows: &[Vec<f64>], a: usize) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != a {
            return Err(Error::Validation(format!(
                "row {i} has {} attributes, expected {a}",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "non-finite value at row {i}, attribute {j}"
                )));
            }
        }
    }
    Ok(())
}
