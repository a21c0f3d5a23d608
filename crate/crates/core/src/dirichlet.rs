//! Dirichlet distribution: density, sampling, and weighted maximum
//! likelihood.
//!
//! The weighted MLE is the workhorse of every M-step. It runs the digamma
//! fixed point
//!
//! ```text
//! psi(alpha_d_new) = psi(sum(alpha_old)) + s_d,
//! s_d = sum_i w_i log y_id / sum_i w_i,
//! ```
//!
//! which increases the weighted log-likelihood at every step, so callers
//! that warm-start from the previous estimate keep their outer objective
//! monotone even when the inner solve is cut short.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{clamp_interior, common_dim, SimplexPoint};
use crate::special::{digamma, inv_digamma, ln_gamma};

/// Hard bounds on each concentration parameter during estimation.
pub const ALPHA_MIN: f64 = 1e-8;
pub const ALPHA_MAX: f64 = 1e12;

/// Fixed-point iteration budget for the weighted MLE.
pub const MLE_MAX_ITER: usize = 1000;

/// Relative-change threshold for MLE termination.
pub const MLE_REL_TOL: f64 = 1e-8;

/// Per-unit-weight gradient tolerance for MLE termination.
pub const MLE_GRAD_TOL: f64 = 1e-6;

/// Minimum total weight considered estimable.
pub const MIN_TOTAL_WEIGHT: f64 = 2.0;

/// Dirichlet parameters with the log normalizing constant cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletParams {
    alpha: Vec<f64>,
    /// -log B(alpha) = log Gamma(sum alpha) - sum log Gamma(alpha_d).
    #[serde(skip)]
    log_norm: f64,
}

impl DirichletParams {
    /// Validate concentrations (finite, strictly positive) and cache the
    /// normalizer.
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "Dirichlet needs at least 2 concentrations, got {}",
                alpha.len()
            )));
        }
        for (d, &a) in alpha.iter().enumerate() {
            if !a.is_finite() || a <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "concentration {d} = {a} must be finite and > 0"
                )));
            }
        }
        let log_norm = log_normalizer(&alpha);
        Ok(Self { alpha, log_norm })
    }

    /// Number of coordinates D.
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Concentration vector.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Total concentration sum(alpha).
    pub fn concentration(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Mean composition alpha / sum(alpha).
    pub fn mean(&self) -> Vec<f64> {
        let a0 = self.concentration();
        self.alpha.iter().map(|a| a / a0).collect()
    }

    /// Log density at a simplex point, with coordinates clamped into the
    /// interior band before logs are taken.
    pub fn log_density(&self, y: &SimplexPoint) -> f64 {
        debug_assert_eq!(y.dim(), self.dim());
        let mut acc = self.log_norm;
        for (a, &v) in self.alpha.iter().zip(y.coords()) {
            acc += (a - 1.0) * clamp_interior(v).ln();
        }
        acc
    }

    /// Draw one point by normalizing independent Gamma(alpha_d, 1) draws.
    ///
    /// Coordinates are floored at the interior clamp and renormalized so the
    /// result is always strictly interior, even for very small shapes.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SimplexPoint {
        let gammas: Vec<Gamma<f64>> = self
            .alpha
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("validated shape"))
            .collect();
        loop {
            let mut draw: Vec<f64> = gammas.iter().map(|g| g.sample(rng)).collect();
            let total: f64 = draw.iter().sum();
            if !(total.is_finite() && total > 0.0) {
                continue;
            }
            let mut sum = 0.0;
            for v in &mut draw {
                *v = (*v / total).max(crate::simplex::CLAMP_LO);
                sum += *v;
            }
            for v in &mut draw {
                *v /= sum;
            }
            if draw.iter().all(|v| *v > 0.0 && *v < 1.0) {
                return SimplexPoint::new_unchecked(draw);
            }
        }
    }

    /// Draw `n` points deterministically from a seed.
    pub fn sample_n(&self, seed: u64, n: usize) -> Vec<SimplexPoint> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }

    /// Recompute the cached normalizer (needed after deserialization, which
    /// skips the cache).
    pub fn refresh_cache(&mut self) {
        self.log_norm = log_normalizer(&self.alpha);
    }
}

fn log_normalizer(alpha: &[f64]) -> f64 {
    let a0: f64 = alpha.iter().sum();
    ln_gamma(a0) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>()
}

/// Weighted sufficient statistics of a simplex dataset.
#[derive(Debug, Clone)]
pub struct WeightedLogMoments {
    /// s_d: weighted mean of log coordinates (clamped logs).
    pub mean_log: Vec<f64>,
    /// Weighted mean of coordinates.
    pub mean: Vec<f64>,
    /// Weighted variance of coordinates (plug-in, weight-normalized).
    pub var: Vec<f64>,
    /// Total weight sum_i w_i.
    pub total_weight: f64,
}

impl WeightedLogMoments {
    /// Compute moments; rejects mismatched lengths, invalid weights, and
    /// total weight below `MIN_TOTAL_WEIGHT`.
    pub fn compute(points: &[SimplexPoint], weights: &[f64]) -> Result<Self> {
        let d = common_dim(points)?;
        if weights.len() != points.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} points",
                weights.len(),
                points.len()
            )));
        }
        let mut total = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "weight {i} = {w} must be finite and >= 0"
                )));
            }
            total += w;
        }
        if total < MIN_TOTAL_WEIGHT {
            return Err(Error::DegenerateData(format!(
                "total weight {total} is below the estimable minimum {MIN_TOTAL_WEIGHT}"
            )));
        }
        let mut mean_log = vec![0.0; d];
        let mut mean = vec![0.0; d];
        for (p, &w) in points.iter().zip(weights) {
            for (k, &v) in p.coords().iter().enumerate() {
                mean[k] += w * v;
                mean_log[k] += w * clamp_interior(v).ln();
            }
        }
        for k in 0..d {
            mean[k] /= total;
            mean_log[k] /= total;
        }
        let mut var = vec![0.0; d];
        for (p, &w) in points.iter().zip(weights) {
            for (k, &v) in p.coords().iter().enumerate() {
                let c = v - mean[k];
                var[k] += w * c * c;
            }
        }
        for v in &mut var {
            *v /= total;
        }
        Ok(Self {
            mean_log,
            mean,
            var,
            total_weight: total,
        })
    }

    /// Method-of-moments concentrations: alpha_d = alpha0 * m_d with
    /// alpha0 + 1 = sum m_d (1 - m_d) / sum v_d.
    pub fn moment_match(&self) -> Result<Vec<f64>> {
        let num: f64 = self.mean.iter().map(|m| m * (1.0 - m)).sum();
        let den: f64 = self.var.iter().sum();
        if den <= 1e-300 {
            return Err(Error::DegenerateData(
                "zero dispersion: all effective observations identical".into(),
            ));
        }
        let a0 = (num / den - 1.0).max(1e-3);
        Ok(self
            .mean
            .iter()
            .map(|m| (a0 * m).clamp(1e-3, 1e6))
            .collect())
    }

    /// Weighted log-likelihood of concentrations under these statistics.
    pub fn log_likelihood(&self, alpha: &[f64]) -> f64 {
        let a0: f64 = alpha.iter().sum();
        let mut per_obs = ln_gamma(a0);
        for (&a, &s) in alpha.iter().zip(&self.mean_log) {
            per_obs += (a - 1.0) * s - ln_gamma(a);
        }
        self.total_weight * per_obs
    }

    /// Per-unit-weight gradient infinity norm at `alpha`.
    pub fn grad_inf_norm(&self, alpha: &[f64]) -> f64 {
        let a0: f64 = alpha.iter().sum();
        let psi0 = digamma(a0);
        alpha
            .iter()
            .zip(&self.mean_log)
            .map(|(&a, &s)| (psi0 - digamma(a) + s).abs())
            .fold(0.0, f64::max)
    }
}

/// Weighted Dirichlet MLE by digamma fixed point.
///
/// `init` warm-starts the iteration; otherwise a method-of-moments guess is
/// used. Terminates when the largest relative parameter change drops below
/// `MLE_REL_TOL` and the per-unit-weight gradient infinity norm is at most
/// `MLE_GRAD_TOL`; errors after `MLE_MAX_ITER` iterations.
pub fn mle_from_moments(
    moments: &WeightedLogMoments,
    init: Option<&[f64]>,
) -> Result<DirichletParams> {
    let d = moments.mean.len();
    let mut alpha = match init {
        Some(a) => {
            if a.len() != d {
                return Err(Error::InvalidParameter(format!(
                    "init has {} concentrations, data has {d}",
                    a.len()
                )));
            }
            a.iter().map(|v| v.clamp(ALPHA_MIN, ALPHA_MAX)).collect()
        }
        None => moments.moment_match()?,
    };
    for _ in 0..MLE_MAX_ITER {
        let a0: f64 = alpha.iter().sum();
        let psi0 = digamma(a0);
        let mut max_rel = 0.0_f64;
        let next: Vec<f64> = alpha
            .iter()
            .zip(&moments.mean_log)
            .map(|(&a, &s)| {
                let na = inv_digamma(psi0 + s).clamp(ALPHA_MIN, ALPHA_MAX);
                max_rel = max_rel.max((na - a).abs() / a.max(1e-12));
                na
            })
            .collect();
        alpha = next;
        if max_rel < MLE_REL_TOL && moments.grad_inf_norm(&alpha) <= MLE_GRAD_TOL {
            return DirichletParams::new(alpha);
        }
    }
    Err(Error::NonConvergence {
        context: "weighted Dirichlet MLE fixed point".into(),
        max_iter: MLE_MAX_ITER,
    })
}

/// Convenience wrapper: moments + fixed point in one call.
pub fn mle_weighted(
    points: &[SimplexPoint],
    weights: &[f64],
    init: Option<&[f64]>,
) -> Result<DirichletParams> {
    let moments = WeightedLogMoments::compute(points, weights)?;
    mle_from_moments(&moments, init)
}
