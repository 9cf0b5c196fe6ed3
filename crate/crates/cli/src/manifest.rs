//! Run manifest: hashes of configuration, inputs and outputs, so a run can
//! be audited and reproduced. Wall-clock time is recorded only when
//! `SOURCE_DATE_EPOCH` is set; otherwise the field stays empty so that
//! repeated runs of the same configuration produce byte-identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub created_utc: String,
    pub seed: u64,
    pub config_hash: String,
    pub input_hashes: BTreeMap<String, String>,
    /// Per-stage hash of everything the stage consumed.
    pub stage_inputs: BTreeMap<String, String>,
    /// Output artifact hashes.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(seed: u64, config_hash: String) -> Self {
        let created_utc = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse::<i64>().ok())
            .and_then(|epoch| chrono::DateTime::from_timestamp(epoch, 0))
            .map(|t| t.format("%Y-%m-%dT%H:%M:%SZ").to_string())
            .unwrap_or_default();
        RunManifest {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            created_utc,
            seed,
            config_hash,
            ..RunManifest::default()
        }
    }

    pub fn load(path: &Path) -> Option<Self> {
        let text = std::fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// True when `stage` already ran with the same inputs and every listed
    /// output file still exists.
    pub fn stage_is_fresh(&self, stage: &str, inputs_hash: &str, out_dir: &Path, outputs: &[&str]) -> bool {
        self.stage_inputs.get(stage).map(String::as_str) == Some(inputs_hash)
            && outputs.iter().all(|name| out_dir.join(name).exists())
    }

    pub fn record_stage(&mut self, stage: &str, inputs_hash: String) {
        self.stage_inputs.insert(stage.to_string(), inputs_hash);
    }

    pub fn record_output(&mut self, out_dir: &Path, name: &str) -> anyhow::Result<()> {
        let hash = hash_file(&out_dir.join(name))?;
        self.outputs.insert(name.to_string(), hash);
        Ok(())
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex(&hasher.finalize())
}

pub fn hash_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| anyhow::anyhow!("cannot hash {}: {e}", path.display()))?;
    Ok(hash_bytes(&bytes))
}

/// Hash of several labelled parts, order-sensitive.
pub fn hash_parts(parts: &[(&str, &str)]) -> String {
    let mut hasher = Sha256::new();
    for (label, value) in parts {
        hasher.update(label.as_bytes());
        hasher.update([0x1f]);
        hasher.update(value.as_bytes());
        hasher.update([0x1e]);
    }
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
