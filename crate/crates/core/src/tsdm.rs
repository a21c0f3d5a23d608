//! Two-stage background model over labeled classes.
//!
//! Stage 1 fits an independent Dirichlet mixture per class (component
//! count chosen by BIC). Stage 2 sets the outer class weights rho from
//! the mode of the Dirichlet posterior that a multinomial count vector
//! induces under a configurable Dirichlet prior:
//!
//! ```text
//! rho_k = (n_k + e_k - 1) / (n + sum_k e_k - K).
//! ```
//!
//! When the mode does not exist (some e_k + n_k <= 1) the posterior mean
//! (n_k + e_k) / (n + sum e) is used instead and flagged. The resulting
//! background density is f_B(y) = sum_k rho_k f_k(y).

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner_em::{select_j, EmConfig, FitReport, InnerMixture};
use crate::simplex::{common_dim, SimplexPoint};
use crate::special::log_sum_exp;

/// Simplex points paired with class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    points: Vec<SimplexPoint>,
    labels: Vec<String>,
}

impl LabeledDataset {
    /// Validate equal lengths, consistent dimensions, and non-emptiness.
    pub fn new(points: Vec<SimplexPoint>, labels: Vec<String>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} points with {} labels",
                points.len(),
                labels.len()
            )));
        }
        common_dim(&points)?;
        Ok(Self { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[SimplexPoint] {
        &self.points
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Distinct labels in sorted order — the canonical class ordering.
    pub fn classes(&self) -> Vec<String> {
        let mut classes: Vec<String> = self.labels.clone();
        classes.sort();
        classes.dedup();
        classes
    }

    /// All points carrying `label`, in dataset order.
    pub fn class_points(&self, label: &str) -> Vec<SimplexPoint> {
        self.points
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| l.as_str() == label)
            .map(|(p, _)| p.clone())
            .collect()
    }
}

/// Candidate component counts per class: a default inclusive range plus
/// per-class overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassJRanges {
    pub default: (usize, usize),
    #[serde(default)]
    pub per_class: BTreeMap<String, (usize, usize)>,
}

impl ClassJRanges {
    pub fn uniform(lo: usize, hi: usize) -> Self {
        Self {
            default: (lo, hi),
            per_class: BTreeMap::new(),
        }
    }

    /// Candidate list for one class.
    pub fn candidates(&self, label: &str) -> Vec<usize> {
        let (lo, hi) = *self.per_class.get(label).unwrap_or(&self.default);
        (lo..=hi).collect()
    }

    /// Override the candidate range for one class.
    pub fn set_class(&mut self, label: String, range: (usize, usize)) {
        self.per_class.insert(label, range);
    }

    pub fn validate(&self) -> Result<()> {
        for (label, &(lo, hi)) in std::iter::once((&String::new(), &self.default))
            .chain(self.per_class.iter().map(|(k, v)| (k, v)))
        {
            if lo < 1 || hi < lo {
                return Err(Error::InvalidParameter(format!(
                    "component count range ({lo}, {hi}) for {label:?} must satisfy 1 <= lo <= hi"
                )));
            }
        }
        Ok(())
    }
}

/// Stage 1: independently fit each class's mixture, choosing the
/// component count by BIC. Returns fits in sorted class order.
pub fn fit_stage1(
    data: &LabeledDataset,
    ranges: &ClassJRanges,
    cfg: &EmConfig,
) -> Result<Vec<(InnerMixture, FitReport)>> {
    ranges.validate()?;
    let classes = data.classes();
    for label in &classes {
        let n = data.labels.iter().filter(|l| l.as_str() == label).count();
        if n < cfg.n_min {
            return Err(Error::InsufficientClassSize {
                label: label.clone(),
                n,
                min: cfg.n_min,
            });
        }
    }
    // Every class uses the same seed, so a class's fit depends only on its
    // own points — never on how many other classes exist or their order.
    classes
        .par_iter()
        .map(|label| select_j(&data.class_points(label), &ranges.candidates(label), cfg))
        .collect()
}

/// Posterior point estimate of class weights from counts under a
/// Dirichlet prior with parameters `prior_e`.
///
/// Returns the posterior mode and `false` when the mode exists (all
/// e_k + n_k > 1); otherwise the posterior mean and `true`.
pub fn posterior_rho(counts: &[usize], prior_e: &[f64]) -> Result<(Vec<f64>, bool)> {
    let k = counts.len();
    if k == 0 || prior_e.len() != k {
        return Err(Error::InvalidParameter(format!(
            "{} counts with {} prior parameters",
            k,
            prior_e.len()
        )));
    }
    for (i, &e) in prior_e.iter().enumerate() {
        if !e.is_finite() || e <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "prior parameter {i} = {e} must be positive"
            )));
        }
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidParameter(
            "posterior weights need at least one observation".into(),
        ));
    }
    let e_sum: f64 = prior_e.iter().sum();
    let mode_exists = counts
        .iter()
        .zip(prior_e)
        .all(|(&nk, &ek)| nk as f64 + ek > 1.0);
    let rho = if mode_exists {
        let denom = n as f64 + e_sum - k as f64;
        counts
            .iter()
            .zip(prior_e)
            .map(|(&nk, &ek)| (nk as f64 + ek - 1.0) / denom)
            .collect()
    } else {
        let denom = n as f64 + e_sum;
        counts
            .iter()
            .zip(prior_e)
            .map(|(&nk, &ek)| (nk as f64 + ek) / denom)
            .collect()
    };
    Ok((rho, !mode_exists))
}

/// The fitted background model: per-class mixtures plus outer weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TSDMModel {
    classes: Vec<String>,
    inner: Vec<InnerMixture>,
    rho: Vec<f64>,
    prior_e: Vec<f64>,
    /// True when rho is the posterior mean because the mode was undefined.
    rho_mean_fallback: bool,
    reports: Vec<FitReport>,
}

impl TSDMModel {
    /// Fit both stages. `prior_e` defaults to the non-informative
    /// Dir(1/K, ..., 1/K) when absent.
    pub fn fit(
        data: &LabeledDataset,
        prior_e: Option<Vec<f64>>,
        ranges: &ClassJRanges,
        cfg: &EmConfig,
    ) -> Result<Self> {
        let classes = data.classes();
        let k = classes.len();
        let prior = prior_e.unwrap_or_else(|| vec![1.0 / k as f64; k]);
        if prior.len() != k {
            return Err(Error::InvalidParameter(format!(
                "prior has {} parameters for {k} classes",
                prior.len()
            )));
        }
        let fits = fit_stage1(data, ranges, cfg)?;
        let counts: Vec<usize> = classes
            .iter()
            .map(|c| data.labels.iter().filter(|l| *l == c).count())
            .collect();
        let (rho, fallback) = posterior_rho(&counts, &prior)?;
        let (inner, reports): (Vec<_>, Vec<_>) = fits.into_iter().unzip();
        Self::assemble(classes, inner, rho, prior, fallback, reports)
    }

    /// Build a model from parts, validating the type invariants.
    pub fn assemble(
        classes: Vec<String>,
        inner: Vec<InnerMixture>,
        rho: Vec<f64>,
        prior_e: Vec<f64>,
        rho_mean_fallback: bool,
        reports: Vec<FitReport>,
    ) -> Result<Self> {
        let k = classes.len();
        if k == 0 || inner.len() != k || rho.len() != k || prior_e.len() != k {
            return Err(Error::InvalidParameter(
                "classes, mixtures, rho, and prior must share one length".into(),
            ));
        }
        let mut sorted = classes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != k {
            return Err(Error::InvalidParameter("duplicate class labels".into()));
        }
        let d = inner[0].dim();
        if inner.iter().any(|m| m.dim() != d) {
            return Err(Error::InvalidParameter(
                "class mixtures disagree on dimension".into(),
            ));
        }
        let sum: f64 = rho.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || rho.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::InvalidParameter(format!(
                "rho must lie in (0,1] and sum to 1, got sum {sum}"
            )));
        }
        if reports.len() != k && !reports.is_empty() {
            return Err(Error::InvalidParameter(
                "need one fit report per class (or none)".into(),
            ));
        }
        Ok(Self {
            classes,
            inner,
            rho,
            prior_e,
            rho_mean_fallback,
            reports,
        })
    }

    /// Number of classes K.
    pub fn k(&self) -> usize {
        self.classes.len()
    }

    /// Simplex dimension D.
    pub fn dim(&self) -> usize {
        self.inner[0].dim()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn inner(&self) -> &[InnerMixture] {
        &self.inner
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn prior_e(&self) -> &[f64] {
        &self.prior_e
    }

    pub fn rho_mean_fallback(&self) -> bool {
        self.rho_mean_fallback
    }

    pub fn reports(&self) -> &[FitReport] {
        &self.reports
    }

    /// Per-class log terms ln rho_k + log f_k(y).
    pub fn class_log_terms(&self, y: &SimplexPoint) -> Vec<f64> {
        self.rho
            .iter()
            .zip(&self.inner)
            .map(|(r, m)| r.ln() + m.log_density(y))
            .collect()
    }

    /// log f_B(y) = log sum_k rho_k f_k(y), via log-sum-exp.
    pub fn log_density_background(&self, y: &SimplexPoint) -> f64 {
        log_sum_exp(&self.class_log_terms(y))
    }

    /// Recompute cached normalizers after deserialization.
    pub fn refresh_cache(&mut self) {
        for m in &mut self.inner {
            m.refresh_cache();
        }
    }
}
