//! Dirichlet mixture models on transformed compositional data.
//!
//! The crate implements a pipeline for detecting unknown source classes in
//! labeled compositional measurements:
//!
//! 1. a margin-free transform that maps raw attribute vectors onto the
//!    interior of the probability simplex ([`transform`]),
//! 2. per-class Dirichlet mixtures with component counts chosen by BIC,
//!    combined into a two-stage background model ([`tsdm`]),
//! 3. a semi-supervised fixed-background model that explains held-out data
//!    as background plus novel components ([`fb`]),
//! 4. posterior classification and evaluation utilities ([`classify`]),
//! 5. synthetic data generation for end-to-end checks ([`synth`]).
//!
//! Everything is deterministic given a seed: parallel runs use pre-derived
//! per-run seeds and merge results in a fixed order.

pub mod config;
pub mod csvio;
pub mod dirichlet;
pub mod error;
pub mod fb;
pub mod inner_em;
pub mod kmeans;
pub mod persist;
pub mod seed;
pub mod simplex;
pub mod special;
pub mod spline;
pub mod synth;
pub mod transform;
pub mod tsdm;

pub mod classify;

pub use error::{Error, Result};
pub use simplex::SimplexPoint;
