//! YAML cluster description: parsing, validation and elaboration into a
//! runnable network.
//!
//! ```yaml
//! topology: {dims: [2, 2]}
//! limits: {max_payload_words: 16}      # optional
//! nodes:
//!   - coord: [0, 0]
//!     kernels:
//!       - {name: src, port: 0, in_channels: 1, out_channels: 1,
//!          params: {behavior: source, messages: 8}}
//!   - coord: [1, 1]
//!     kernels:
//!       - {name: dst, port: 2, in_channels: 1, out_channels: 0}
//! graph:
//!   - {from: src, to: dst, ch: 0}
//! ```

mod elaborate;
mod schema;
mod validate;

use std::fmt;

pub use elaborate::Network;
pub use schema::{ChannelIndex, ClusterConfig, Edge, InChannels, KernelConfig, Limits, NodeConfig, OutChannels, PortIndex, TopologyConfig};
pub use validate::{validate, ValidatedConfig};

/// One problem found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Dotted field path, e.g. `nodes[1].kernels[0].port`.
    pub path: String,
    /// 1-based source line, when known.
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    pub fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            path: path.into(),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l} column {c}: ")?,
            (Some(l), None) => write!(f, "line {l}: ")?,
            _ => {}
        }
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Parses a cluster description. Unknown keys, type mismatches and
/// out-of-range ports or channel counts are rejected here, naming the
/// field and its line. Omitted limits are filled with their defaults.
pub fn parse(text: &str) -> Result<ClusterConfig, Diagnostic> {
    let de = serde_yaml::Deserializer::from_str(text);
    match serde_path_to_error::deserialize::<_, ClusterConfig>(de) {
        Ok(mut cfg) => {
            cfg.limits = cfg.limits.filled();
            Ok(cfg)
        }
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let loc = inner.location();
            let mut message = inner.to_string();
            // serde_yaml appends its own position; keep the message bare
            if let Some(i) = message.find(" at line ") {
                message.truncate(i);
            }
            Err(Diagnostic {
                path,
                line: loc.as_ref().map(|l| l.line()),
                column: loc.as_ref().map(|l| l.column()),
                message,
            })
        }
    }
}

/// Serializes a configuration back to YAML; `parse(emit(c)) == c`.
pub fn emit(cfg: &ClusterConfig) -> String {
    serde_yaml::to_string(cfg).expect("configuration serializes")
}
