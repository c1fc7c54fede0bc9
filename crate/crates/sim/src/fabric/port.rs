use std::fmt;

use apeiron_core::Direction;
use serde::{Serialize, Serializer};

/// Number of IntraNode ports per node (task_id range 0-3).
pub const INTRA_PORTS: usize = 4;

/// Virtual channels per physical channel.
pub const VCS: usize = 2;

/// A switch port: one of the four IntraNode ports, or an InterNode port
/// named by dimension and travel direction.
///
/// Output `Inter { dim, dir }` at node N feeds input `Inter { dim, dir }` at
/// the neighbour of N in direction `dir`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PortId {
    Intra(u8),
    Inter { dim: u8, dir: Direction },
}

impl PortId {
    pub fn count(dims: usize) -> usize {
        INTRA_PORTS + 2 * dims
    }

    /// Fixed enumeration: intra 0-3, then (dim 0,+), (dim 0,-), (dim 1,+), ...
    pub fn index(self) -> usize {
        match self {
            PortId::Intra(p) => usize::from(p),
            PortId::Inter { dim, dir } => {
                INTRA_PORTS + 2 * usize::from(dim) + usize::from(dir == Direction::Minus)
            }
        }
    }

    pub fn from_index(i: usize) -> PortId {
        if i < INTRA_PORTS {
            PortId::Intra(i as u8)
        } else {
            let k = i - INTRA_PORTS;
            PortId::Inter {
                dim: (k / 2) as u8,
                dir: if k.is_multiple_of(2) {
                    Direction::Plus
                } else {
                    Direction::Minus
                },
            }
        }
    }

    pub fn all(dims: usize) -> impl Iterator<Item = PortId> {
        (0..Self::count(dims)).map(PortId::from_index)
    }

    pub fn dim(self) -> Option<usize> {
        match self {
            PortId::Intra(_) => None,
            PortId::Inter { dim, .. } => Some(usize::from(dim)),
        }
    }

    pub fn is_inter(self) -> bool {
        matches!(self, PortId::Inter { .. })
    }
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PortId::Intra(p) => write!(f, "P{p}"),
            PortId::Inter { dim, dir } => write!(f, "D{dim}{}", dir.symbol()),
        }
    }
}

impl Serialize for PortId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Virtual channel identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Vc {
    #[serde(rename = "0")]
    V0,
    #[serde(rename = "1")]
    V1,
}

impl Vc {
    pub const ALL: [Vc; VCS] = [Vc::V0, Vc::V1];

    pub fn index(self) -> usize {
        match self {
            Vc::V0 => 0,
            Vc::V1 => 1,
        }
    }

    pub fn from_index(i: usize) -> Vc {
        if i == 0 {
            Vc::V0
        } else {
            Vc::V1
        }
    }
}

impl fmt::Display for Vc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}
