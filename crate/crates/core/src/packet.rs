//! Packets, flits and the canonical wire image.
//!
//! Wire image (little-endian 32-bit words):
//!
//! ```text
//! word 0..3   destination coordinate, padded with zeros to 3 dimensions
//! word 3      bits 0-6 ch_id, bits 8-9 task_id, all other bits zero
//! word 4      payload length in words
//! word 5..    payload
//! last        CRC-32 footer over words 0..5+len
//! ```
//!
//! The source coordinate is provenance only and does not travel on the wire.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coord::{TorusCoord, MAX_DIMS};
use crate::CoreError;

/// Default cap on payload words per packet.
pub const DEFAULT_MAX_PAYLOAD_WORDS: u32 = 256;

const HEADER_WORDS: usize = 5;

/// Receiving task (IntraNode port) on the destination node, 0-3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct TaskId(u8);

impl TaskId {
    pub const MAX: u8 = 3;

    pub fn new(v: u8) -> Result<Self, CoreError> {
        if v <= Self::MAX {
            Ok(TaskId(v))
        } else {
            Err(CoreError::TaskIdOutOfRange(u32::from(v)))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl TryFrom<u8> for TaskId {
    type Error = CoreError;
    fn try_from(v: u8) -> Result<Self, CoreError> {
        TaskId::new(v)
    }
}

impl From<TaskId> for u8 {
    fn from(t: TaskId) -> u8 {
        t.0
    }
}

/// Receive FIFO within the destination task, 0-127.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ChannelId(u8);

impl ChannelId {
    pub const MAX: u8 = 127;

    pub fn new(v: u8) -> Result<Self, CoreError> {
        if v <= Self::MAX {
            Ok(ChannelId(v))
        } else {
            Err(CoreError::ChannelIdOutOfRange(u32::from(v)))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl TryFrom<u8> for ChannelId {
    type Error = CoreError;
    fn try_from(v: u8) -> Result<Self, CoreError> {
        ChannelId::new(v)
    }
}

impl From<ChannelId> for u8 {
    fn from(c: ChannelId) -> u8 {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketHeader {
    pub dest: TorusCoord,
    pub task_id: TaskId,
    pub ch_id: ChannelId,
    pub payload_len: u32,
    /// Injecting node; kept for tracing only.
    pub src: TorusCoord,
}

impl PacketHeader {
    /// The five header words of the wire image.
    pub fn wire_words(&self) -> [u32; HEADER_WORDS] {
        let mut w = [0u32; HEADER_WORDS];
        for (slot, &c) in w.iter_mut().zip(self.dest.as_slice()) {
            *slot = c;
        }
        w[3] = u32::from(self.ch_id.get()) | (u32::from(self.task_id.get()) << 8);
        w[4] = self.payload_len;
        w
    }

    /// Number of flits this packet occupies: one head plus one per word.
    pub fn flit_count(&self) -> usize {
        1 + self.payload_len as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PacketFooter {
    pub checksum: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Packet {
    pub header: PacketHeader,
    pub payload: Vec<u32>,
    pub footer: PacketFooter,
}

/// CRC-32 (IEEE, reflected) over the header words then the payload words,
/// each serialized little-endian.
pub fn checksum(header: &PacketHeader, payload: &[u32]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    for w in header.wire_words() {
        h.update(&w.to_le_bytes());
    }
    for w in payload {
        h.update(&w.to_le_bytes());
    }
    h.finalize()
}

impl Packet {
    /// Builds a packet and seals it with its checksum footer.
    ///
    /// The payload must be non-empty; per-fabric size caps are enforced by
    /// the injecting endpoint.
    pub fn new(
        dest: TorusCoord,
        src: TorusCoord,
        task_id: TaskId,
        ch_id: ChannelId,
        payload: Vec<u32>,
    ) -> Result<Self, CoreError> {
        if payload.is_empty() {
            return Err(CoreError::EmptyPayload);
        }
        if dest.dims() > MAX_DIMS {
            return Err(CoreError::BadDimensionCount(dest.dims()));
        }
        let header = PacketHeader {
            dest,
            task_id,
            ch_id,
            payload_len: payload.len() as u32,
            src,
        };
        let footer = PacketFooter {
            checksum: checksum(&header, &payload),
        };
        Ok(Packet {
            header,
            payload,
            footer,
        })
    }

    pub fn verify(&self) -> bool {
        self.payload.len() == self.header.payload_len as usize
            && self.footer.checksum == checksum(&self.header, &self.payload)
    }

    pub fn flit_count(&self) -> usize {
        self.header.flit_count()
    }

    /// Splits the packet into one HEAD flit and one flit per payload word,
    /// the last being TAIL.
    pub fn to_flits(&self, id: PacketId) -> Vec<Flit> {
        let n = self.payload.len();
        let mut flits = Vec::with_capacity(n + 1);
        flits.push(Flit {
            kind: FlitKind::Head,
            packet: id,
            word: 0,
        });
        for (i, &w) in self.payload.iter().enumerate() {
            let kind = if i + 1 == n {
                FlitKind::Tail
            } else {
                FlitKind::Body
            };
            flits.push(Flit {
                kind,
                packet: id,
                word: w,
            });
        }
        flits
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 * (HEADER_WORDS + self.payload.len() + 1));
        for w in self.header.wire_words() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for w in &self.payload {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&self.footer.checksum.to_le_bytes());
        out
    }

    /// Parses a wire image. `dims` is the torus dimensionality (the wire
    /// pads coordinates to three) and `src` re-attaches provenance.
    pub fn decode(bytes: &[u8], dims: usize, src: TorusCoord) -> Result<Packet, CoreError> {
        if dims == 0 || dims > MAX_DIMS {
            return Err(CoreError::BadDimensionCount(dims));
        }
        if !bytes.len().is_multiple_of(4) {
            return Err(CoreError::Malformed("length is not a whole number of words"));
        }
        let words: Vec<u32> = bytes
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        if words.len() < HEADER_WORDS + 2 {
            return Err(CoreError::Malformed("shorter than header, one word and footer"));
        }
        if words[dims..3].iter().any(|&w| w != 0) {
            return Err(CoreError::Malformed("non-zero coordinate padding"));
        }
        let ids = words[3];
        if ids & !0x37f != 0 {
            return Err(CoreError::Malformed("reserved bits set in id word"));
        }
        let ch_id = ChannelId::new((ids & 0x7f) as u8)?;
        let task_id = TaskId::new(((ids >> 8) & 0x3) as u8)?;
        let payload_len = words[4];
        if payload_len as usize != words.len() - HEADER_WORDS - 1 {
            return Err(CoreError::Malformed("payload length disagrees with image size"));
        }
        let payload = words[HEADER_WORDS..words.len() - 1].to_vec();
        let footer = PacketFooter {
            checksum: words[words.len() - 1],
        };
        let p = Packet {
            header: PacketHeader {
                dest: TorusCoord::new(words[..dims].to_vec()),
                task_id,
                ch_id,
                payload_len,
                src,
            },
            payload,
            footer,
        };
        if !p.verify() {
            return Err(CoreError::ChecksumMismatch);
        }
        Ok(p)
    }
}

/// Identity of a packet inside one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PacketId(pub u64);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FlitKind {
    Head,
    Body,
    Tail,
    /// Only meaningful for a zero-length payload, which packets never have.
    HeadTail,
}

impl FlitKind {
    pub fn is_head(self) -> bool {
        matches!(self, FlitKind::Head | FlitKind::HeadTail)
    }

    pub fn is_tail(self) -> bool {
        matches!(self, FlitKind::Tail | FlitKind::HeadTail)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FlitKind::Head => "HEAD",
            FlitKind::Body => "BODY",
            FlitKind::Tail => "TAIL",
            FlitKind::HeadTail => "HEAD_TAIL",
        }
    }
}

/// Flow-control digit: the unit of link transfer and buffer accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Flit {
    pub kind: FlitKind,
    pub packet: PacketId,
    /// Payload word; zero for HEAD.
    pub word: u32,
}
