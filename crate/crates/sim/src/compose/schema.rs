use serde::{Deserialize, Serialize};

use crate::fabric::FabricParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub topology: TopologyConfig,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub graph: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub dims: Vec<u32>,
}

/// Optional fabric overrides. Buffer capacities default to two maximal
/// packets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_payload_words: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vc_capacity_flits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eject_capacity_flits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fifo_capacity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_latency: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_latency: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub virtual_channels: Option<u8>,
}

impl Limits {
    /// Every field set, defaults derived from `max_payload_words`.
    pub fn filled(&self) -> Limits {
        let p = self.params();
        Limits {
            max_payload_words: Some(p.max_payload_words),
            vc_capacity_flits: Some(p.vc_capacity_flits),
            eject_capacity_flits: Some(p.eject_capacity_flits),
            fifo_capacity: Some(p.fifo_capacity),
            link_latency: Some(p.link_latency),
            route_latency: Some(p.route_latency),
            virtual_channels: Some(p.virtual_channels),
        }
    }

    pub fn params(&self) -> FabricParams {
        let base = match self.max_payload_words {
            Some(m) => FabricParams::with_max_payload(m),
            None => FabricParams::default(),
        };
        FabricParams {
            max_payload_words: base.max_payload_words,
            vc_capacity_flits: self.vc_capacity_flits.unwrap_or(base.vc_capacity_flits),
            eject_capacity_flits: self.eject_capacity_flits.unwrap_or(base.eject_capacity_flits),
            fifo_capacity: self.fifo_capacity.unwrap_or(base.fifo_capacity),
            link_latency: self.link_latency.unwrap_or(base.link_latency),
            route_latency: self.route_latency.unwrap_or(base.route_latency),
            virtual_channels: self.virtual_channels.unwrap_or(base.virtual_channels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub coord: Vec<u32>,
    #[serde(default)]
    pub kernels: Vec<KernelConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub name: String,
    pub port: PortIndex,
    pub in_channels: InChannels,
    pub out_channels: OutChannels,
    /// Passed to the kernel unchanged; `behavior` selects the kernel
    /// implementation and defaults to `sink`.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl KernelConfig {
    pub const DEFAULT_BEHAVIOR: &'static str = "sink";

    pub fn behavior(&self) -> Option<&str> {
        match self.params.get("behavior") {
            None => Some(Self::DEFAULT_BEHAVIOR),
            Some(v) => v.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub ch: ChannelIndex,
}

macro_rules! bounded {
    ($(#[$doc:meta])* $name:ident, $repr:ty, $lo:expr, $hi:expr, $what:expr) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "i64", into = "i64")]
        pub struct $name($repr);

        impl $name {
            pub const MIN: $repr = $lo;
            pub const MAX: $repr = $hi;

            pub fn new(v: $repr) -> Option<Self> {
                (Self::MIN..=Self::MAX).contains(&v).then_some($name(v))
            }

            pub fn get(self) -> $repr {
                self.0
            }
        }

        impl TryFrom<i64> for $name {
            type Error = String;

            fn try_from(v: i64) -> Result<Self, String> {
                <$repr>::try_from(v)
                    .ok()
                    .and_then(Self::new)
                    .ok_or_else(|| format!("{v} out of range {}-{}: {}", $lo, $hi, $what))
            }
        }

        impl From<$name> for i64 {
            fn from(v: $name) -> i64 {
                i64::from(v.0)
            }
        }
    };
}

bounded!(
    /// IntraNode port, which doubles as the task id.
    PortIndex, u8, 0, 3, "IntraNode port / task_id is 0-3"
);
bounded!(
    /// Receive channels of a kernel.
    InChannels, u8, 1, 128, "ch_id is 0-127, so at most 128 channels"
);
bounded!(
    /// Output edges a kernel may drive.
    OutChannels, u8, 0, 128, "ch_id is 0-127, so at most 128 channels"
);
bounded!(
    /// A consumer's receive channel.
    ChannelIndex, u8, 0, 127, "ch_id is 0-127"
);
