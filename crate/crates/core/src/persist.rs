//! Versioned JSON persistence for models, transforms, and specs.
//!
//! Every artifact is wrapped in an envelope carrying a `schema_version`
//! and a `kind` tag, so loading the wrong file type or an incompatible
//! version fails with a clear error instead of a confusing parse error.
//! Floating-point values survive a save/load cycle bit-exactly.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current on-disk schema version for all JSON artifacts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema_version: u32,
    kind: String,
    payload: T,
}

/// A JSON-persistable artifact with a fixed `kind` tag. `rehydrate`
/// restores any derived state that is skipped during serialization.
pub trait Artifact: Serialize + DeserializeOwned {
    const KIND: &'static str;

    fn rehydrate(&mut self) {}
}

impl Artifact for crate::transform::SimplexTransform {
    const KIND: &'static str = "simplex-transform";
}

impl Artifact for crate::tsdm::TSDMModel {
    const KIND: &'static str = "background-model";

    fn rehydrate(&mut self) {
        self.refresh_cache();
    }
}

impl Artifact for crate::fb::FBModel {
    const KIND: &'static str = "fixed-background-model";

    fn rehydrate(&mut self) {
        self.refresh_cache();
    }
}

impl Artifact for crate::synth::SynthSpec {
    const KIND: &'static str = "synth-spec";
}

impl Artifact for crate::inner_em::FitReport {
    const KIND: &'static str = "fit-report";
}

/// Serialize an artifact into its envelope as pretty JSON.
pub fn to_json<T: Artifact>(artifact: &T) -> Result<String> {
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        kind: T::KIND.to_string(),
        payload: artifact,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    Ok(text)
}

/// Parse an artifact from envelope JSON, checking version and kind.
pub fn from_json<T: Artifact>(text: &str) -> Result<T> {
    let envelope: Envelope<T> = serde_json::from_str(text)?;
    if envelope.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            found: envelope.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    if envelope.kind != T::KIND {
        return Err(Error::Validation(format!(
            "expected a {:?} file, found {:?}",
            T::KIND,
            envelope.kind
        )));
    }
    let mut payload = envelope.payload;
    payload.rehydrate();
    Ok(payload)
}

/// Write an artifact to disk.
pub fn save<T: Artifact>(path: &Path, artifact: &T) -> Result<()> {
    fs::write(path, to_json(artifact)?)?;
    Ok(())
}

/// Load an artifact from disk.
pub fn load<T: Artifact>(path: &Path) -> Result<T> {
    from_json(&fs::read_to_string(path)?)
}

/// Load a pipeline configuration (plain JSON, no envelope — the file is
/// user-authored) and validate it.
pub fn load_config(path: &Path) -> Result<crate::config::PipelineConfig> {
    let config: crate::config::PipelineConfig =
        serde_json::from_str(&fs::read_to_string(path)?)?;
    config.validate()?;
    Ok(config)
}
