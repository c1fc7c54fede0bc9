//! Configuration/status registers of one node's routing IP.

use apeiron_core::{Topology, TorusCoord, DEFAULT_MAX_PAYLOAD_WORDS};
use serde::{Deserialize, Serialize};

/// Elaboration-time parameters shared by every router of a fabric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FabricParams {
    pub max_payload_words: u32,
    pub vc_capacity_flits: usize,
    pub eject_capacity_flits: usize,
    /// Messages per dispatcher channel FIFO.
    pub fifo_capacity: usize,
    pub link_latency: u64,
    pub route_latency: u64,
    /// 1 disables VC1 everywhere (debug mode that can deadlock).
    pub virtual_channels: u8,
}

impl FabricParams {
    /// Defaults derived from the payload cap: buffers hold two maximal
    /// packets.
    pub fn with_max_payload(max_payload_words: u32) -> Self {
        let max_flits = max_payload_words as usize + 1;
        FabricParams {
            max_payload_words,
            vc_capacity_flits: 2 * max_flits,
            eject_capacity_flits: 2 * max_flits,
            fifo_capacity: 16,
            link_latency: 1,
            route_latency: 1,
            virtual_channels: 2,
        }
    }

    pub fn max_packet_flits(&self) -> usize {
        self.max_payload_words as usize + 1
    }
}

impl Default for FabricParams {
    fn default() -> Self {
        FabricParams::with_max_payload(DEFAULT_MAX_PAYLOAD_WORDS)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegisterError {
    #[error("no register named `{0}`")]
    Unknown(String),
    #[error("register `{0}` is read-only after elaboration")]
    ReadOnly(String),
    #[error("value {value} invalid for register `{name}`")]
    BadValue { name: String, value: u64 },
}

/// Named register view of one node's configuration.
///
/// Topology and buffer-geometry registers are fixed at elaboration;
/// `vc1_enable`, `link_latency` and `route_latency` stay writable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterFile {
    coord: TorusCoord,
    sizes: Vec<u32>,
    params: FabricParams,
    vc1_enable: bool,
}

const READ_ONLY: &[&str] = &[
    "max_payload_words",
    "vc_capacity_flits",
    "eject_capacity_flits",
    "fifo_capacity",
];

impl RegisterFile {
    pub fn new(coord: TorusCoord, topo: &Topology, params: &FabricParams) -> Self {
        RegisterFile {
            coord,
            sizes: topo.sizes().to_vec(),
            params: params.clone(),
            vc1_enable: params.virtual_channels >= 2,
        }
    }

    pub fn vc1_enabled(&self) -> bool {
        self.vc1_enable
    }

    pub fn link_latency(&self) -> u64 {
        self.params.link_latency
    }

    pub fn route_latency(&self) -> u64 {
        self.params.route_latency
    }

    pub fn names(&self) -> Vec<String> {
        let mut v = Vec::new();
        for d in 0..self.sizes.len() {
            v.push(format!("coord{d}"));
            v.push(format!("size{d}"));
        }
        v.extend(READ_ONLY.iter().map(|s| s.to_string()));
        v.extend(["link_latency", "route_latency", "vc1_enable"].map(String::from));
        v
    }

    pub fn read(&self, name: &str) -> Option<u64> {
        if let Some(d) = name.strip_prefix("coord") {
            return d.parse::<usize>().ok().and_then(|d| self.coord.as_slice().get(d)).map(|&x| u64::from(x));
        }
        if let Some(d) = name.strip_prefix("size") {
            return d.parse::<usize>().ok().and_then(|d| self.sizes.get(d)).map(|&x| u64::from(x));
        }
        Some(match name {
            "max_payload_words" => u64::from(self.params.max_payload_words),
            "vc_capacity_flits" => self.params.vc_capacity_flits as u64,
            "eject_capacity_flits" => self.params.eject_capacity_flits as u64,
            "fifo_capacity" => self.params.fifo_capacity as u64,
            "link_latency" => self.params.link_latency,
            "route_latency" => self.params.route_latency,
            "vc1_enable" => u64::from(self.vc1_enable),
            _ => return None,
        })
    }

    pub fn write(&mut self, name: &str, value: u64) -> Result<(), RegisterError> {
        let bad = || RegisterError::BadValue {
            name: name.to_string(),
            value,
        };
        match name {
            "vc1_enable" => {
                if value > 1 {
                    return Err(bad());
                }
                self.vc1_enable = value == 1;
            }
            "link_latency" => {
                if value == 0 {
                    return Err(bad());
                }
                self.params.link_latency = value;
            }
            "route_latency" => self.params.route_latency = value,
            _ if self.read(name).is_some() => return Err(RegisterError::ReadOnly(name.to_string())),
            _ => return Err(RegisterError::Unknown(name.to_string())),
        }
        Ok(())
    }
}
