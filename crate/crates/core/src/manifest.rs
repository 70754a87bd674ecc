//! Run provenance. The hash covers everything that determines the outputs
//! (config text, command, arguments, seed, toolkit version) and nothing
//! that varies between identical runs, such as timings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    /// Full text of the config, hashed verbatim.
    #[serde(skip)]
    pub config_content: String,
    pub args: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: u64,
    pub version: String,
    /// `(stage, seconds)` in execution order.
    pub timings: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            version: VERSION.to_string(),
            ..Default::default()
        }
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let mut field = |tag: &str, value: &[u8]| {
            h.update(tag.as_bytes());
            h.update((value.len() as u64).to_le_bytes());
            h.update(value);
        };
        field("command", self.command.as_bytes());
        field("config", self.config_content.as_bytes());
        for a in &self.args {
            field("arg", a.as_bytes());
        }
        field("seed", &self.seed.to_le_bytes());
        field("version", self.version.as_bytes());
        let digest = h.finalize();
        let mut hex = String::with_capacity(2 * digest.len());
        for b in digest.iter() {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }

    /// JSON sidecar including the hash and timings.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("manifest serializes");
        v["hash"] = serde_json::Value::String(self.hash());
        serde_json::to_string_pretty(&v).expect("manifest serializes")
    }
}
