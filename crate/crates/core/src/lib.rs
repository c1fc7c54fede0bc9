//! Value types shared across the APEIRON platform model.
//!
//! - [`coord`]: torus coordinates, topology geometry and wrap-aware offsets
//! - [`packet`]: packets, flits, the CRC-32 footer and the wire image
//! - [`fixed`]: ⟨W,I⟩ fixed-point arithmetic used by the neural kernel
//!
//! Everything here is an immutable value type.

pub mod coord;
pub mod fixed;
pub mod packet;

pub use coord::{coord_offset, Direction, Topology, TorusCoord, MAX_DIMS};
pub use fixed::{mac, Accumulator, Activation, Fixed, FixedFormat, Weight};
pub use packet::{
    checksum, ChannelId, Flit, FlitKind, Packet, PacketFooter, PacketHeader, PacketId, TaskId,
    DEFAULT_MAX_PAYLOAD_WORDS,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CoreError {
    #[error("torus must have 1 to 3 dimensions, got {0}")]
    BadDimensionCount(usize),
    #[error("torus dimension {dim} has size 0")]
    ZeroSize { dim: usize },
    #[error("coordinate {coord} outside torus {sizes:?}")]
    CoordOutOfRange { coord: TorusCoord, sizes: Vec<u32> },
    #[error("task_id {0} out of range 0-3")]
    TaskIdOutOfRange(u32),
    #[error("ch_id {0} out of range 0-127")]
    ChannelIdOutOfRange(u32),
    #[error("packet payload must contain at least one word")]
    EmptyPayload,
    #[error("malformed packet image: {0}")]
    Malformed(&'static str),
    #[error("packet checksum mismatch")]
    ChecksumMismatch,
}
