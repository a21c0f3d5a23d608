//! Pipeline configuration: one JSON file exposing every tunable
//! constant of fitting, selection, and splitting, with the documented
//! defaults.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inner_em::EmConfig;
use crate::persist::SCHEMA_VERSION;
use crate::tsdm::ClassJRanges;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}
fn default_n_starts() -> usize {
    10
}
fn default_epsilon() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    500
}
fn default_n_min() -> usize {
    3
}
fn default_j_range() -> (usize, usize) {
    (1, 5)
}
fn default_split_fraction() -> f64 {
    0.7
}
fn default_clamp() -> f64 {
    1e-6
}

/// Every free constant of the pipeline. Unknown keys are rejected so a
/// typo in a config file fails loudly instead of silently defaulting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    /// Master seed; every stage derives its own stream from it.
    #[serde(default)]
    pub seed: u64,
    /// EM starts per candidate component count.
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
    /// Absolute log-likelihood gain below which EM stops.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Iteration cap per EM run.
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Minimum hard occupancy per fitted component.
    #[serde(default = "default_n_min")]
    pub n_min: usize,
    /// Candidate component range (lo, hi) for background classes.
    #[serde(default = "default_j_range")]
    pub j_range: (usize, usize),
    /// Per-class overrides of `j_range`, keyed by class label.
    #[serde(default)]
    pub per_class_j: BTreeMap<String, (usize, usize)>,
    /// Candidate component range for the novel class.
    #[serde(default = "default_j_range")]
    pub j_range_new: (usize, usize),
    /// Dirichlet prior weights for the class proportions; omitted means
    /// the uniform 1/K prior.
    #[serde(default)]
    pub prior_e: Option<Vec<f64>>,
    /// Training share of a labeled dataset in the seeded stratified
    /// split.
    #[serde(default = "default_split_fraction")]
    pub split_fraction: f64,
    /// Marginal probability clamp for out-of-range attribute values.
    #[serde(default = "default_clamp")]
    pub clamp: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if self.n_starts == 0 || self.max_iter == 0 || self.n_min == 0 {
            return Err(Error::Validation(
                "n_starts, max_iter, and n_min must be positive".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Validation(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        for (what, (lo, hi)) in std::iter::once(("j_range", &self.j_range))
            .chain(std::iter::once(("j_range_new", &self.j_range_new)))
            .chain(self.per_class_j.iter().map(|(k, v)| (k.as_str(), v)))
        {
            if *lo < 1 || lo > hi {
                return Err(Error::Validation(format!(
                    "{what}: component range ({lo}, {hi}) needs 1 <= lo <= hi"
                )));
            }
        }
        if let Some(e) = &self.prior_e {
            if e.is_empty() || e.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Validation(
                    "prior_e entries must be positive and finite".into(),
                ));
            }
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Validation(format!(
                "split_fraction must lie in (0,1), got {}",
                self.split_fraction
            )));
        }
        if !(self.clamp > 0.0 && self.clamp < 0.5) {
            return Err(Error::Validation(format!(
                "clamp must lie in (0, 0.5), got {}",
                self.clamp
            )));
        }
        Ok(())
    }

    /// EM settings shared by background and novelty fitting.
    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            seed: self.seed,
            n_starts: self.n_starts,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            n_min: self.n_min,
        }
    }

    /// Candidate ranges for the background classes.
    pub fn class_ranges(&self) -> ClassJRanges {
        let mut ranges = ClassJRanges::uniform(self.j_range.0, self.j_range.1);
        for (label, &range) in &self.per_class_j {
            ranges.set_class(label.clone(), range);
        }
        ranges
    }

    /// Candidate component counts for the novel class.
    pub fn new_class_candidates(&self) -> Vec<usize> {
        (self.j_range_new.0..=self.j_range_new.1).collect()
    }
}
