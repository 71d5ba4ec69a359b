//! Provenance stamps and seed derivation shared by every emitted artifact.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bumped whenever an on-disk layout changes incompatibly.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub format_version: u32,
    pub tool_version: String,
}

impl Provenance {
    pub fn new(command: impl Into<String>, config_hash: impl Into<String>, seed: u64) -> Self {
        Provenance {
            command: command.into(),
            config_hash: config_hash.into(),
            seed,
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// A `# key=value ...` line for CSV outputs.
    pub fn csv_comment(&self) -> String {
        format!(
            "# command={} config_hash={} seed={} format_version={} tool_version={}",
            self.command, self.config_hash, self.seed, self.format_version, self.tool_version
        )
    }
}

/// First 16 hex digits of the SHA-256 of `bytes`.
pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}

/// Hash of any serializable configuration, over its canonical JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let value = serde_json::to_value(config).expect("configs serialize to JSON");
    short_hash(value.to_string().as_bytes())
}

/// Stable 64-bit hash of a string, independent of platform and process.
pub fn stable_hash(s: &str) -> u64 {
    let digest = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Per-(operator, repetition) seed derived from the master seed.
pub fn child_seed(seed: u64, op: &str, rep: usize) -> u64 {
    seed ^ stable_hash(&format!("{op}/{rep}"))
}
