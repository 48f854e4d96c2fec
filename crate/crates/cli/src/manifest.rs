//! Provenance record embedded in every output file.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: String,
    /// Complete echo of the inputs; enough to re-run the experiment.
    pub input: Command,
    pub version: String,
    pub prng: String,
    /// SHA-256 of the canonical JSON of the fields above.
    pub input_hash: String,
    /// Set in JSON reports only; CSV stays bit-reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl ExperimentManifest {
    pub fn new(input: Command) -> Self {
        let command = input.name().to_string();
        let version = env!("CARGO_PKG_VERSION").to_string();
        let prng = kz_core::rng::PRNG_ALGORITHM.to_string();
        let canonical = serde_json::to_string(&(&command, &input, &version, &prng))
            .expect("inputs serialize");
        let digest = Sha256::digest(canonical.as_bytes());
        let input_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        ExperimentManifest {
            command,
            input,
            version,
            prng,
            input_hash,
            wall_seconds: None,
        }
    }

    pub fn with_wall_seconds(&self, secs: f64) -> Self {
        ExperimentManifest {
            wall_seconds: Some(secs),
            ..self.clone()
        }
    }

    /// `# manifest: {...}`, without timing.
    pub fn csv_line(&self) -> String {
        let bare = ExperimentManifest {
            wall_seconds: None,
            ..self.clone()
        };
        format!("# manifest: {}", serde_json::to_string(&bare).expect("manifest serializes"))
    }

    /// Reads the manifest back from a CSV header line or a JSON report.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        if let Some(line) = text.lines().find_map(|l| l.strip_prefix("# manifest: ")) {
            return Ok(serde_json::from_str(line)?);
        }
        let v: serde_json::Value = serde_json::from_str(text)?;
        let m = v.get("manifest").cloned().unwrap_or(v);
        Ok(serde_json::from_value(m)?)
    }
}
