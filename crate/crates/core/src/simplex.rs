//! Points on the interior of the probability simplex.
//!
//! All model code works with compositions: vectors of strictly positive
//! coordinates summing to one. `SimplexPoint` enforces that invariant once
//! at construction so the numeric code can assume it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on |sum - 1| accepted at construction.
pub const SUM_TOL: f64 = 1e-9;

/// Coordinates are clamped into [CLAMP_LO, 1 - CLAMP_LO] before taking logs
/// so that densities stay finite even for points squeezed against a face.
pub const CLAMP_LO: f64 = 1e-12;

/// Clamp a coordinate into the closed interior band used for log terms.
#[inline]
pub fn clamp_interior(v: f64) -> f64 {
    v.clamp(CLAMP_LO, 1.0 - CLAMP_LO)
}

/// A strictly interior point of the (D-1)-simplex, D >= 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Validate and wrap a coordinate vector.
    ///
    /// Requires D >= 2, every coordinate finite and in (0, 1), and the sum
    /// within `SUM_TOL` of one. Coordinates are stored exactly as given.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "simplex point needs at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        let mut sum = 0.0;
        for (d, &v) in coords.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 || v >= 1.0 {
                return Err(Error::Domain(format!(
                    "coordinate {d} = {v} is not strictly inside (0, 1)"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::Domain(format!(
                "coordinates sum to {sum}, more than {SUM_TOL} away from 1"
            )));
        }
        Ok(Self(coords))
    }

    /// Wrap coordinates already known to satisfy the invariant (internal
    /// sampling and transform paths that normalize explicitly).
    pub(crate) fn new_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(Self::new(coords.clone()).is_ok());
        Self(coords)
    }

    /// Number of coordinates D.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Coordinate slice.
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    /// Consume and return the coordinate vector.
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for SimplexPoint {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Check that every point in a dataset shares the same dimension D >= 2.
pub fn common_dim(points: &[SimplexPoint]) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::DegenerateData("empty dataset".into()))?;
    let d = first.dim();
    for (i, p) in points.iter().enumerate() {
        if p.dim() != d {
            return Err(Error::Domain(format!(
                "point {i} has {} coordinates, expected {d}",
                p.dim()
            )));
        }
    }
    Ok(d)
}
