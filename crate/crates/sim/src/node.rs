//! Communication IP endpoints: the four IntraNode ports of a node.
//!
//! Each port pairs an Aggregator (task to network: forges the packet header
//! from send metadata) with a Dispatcher (network to task: demultiplexes
//! arriving packets into per-channel receive FIFOs by `ch_id`).

use std::collections::{BTreeMap, VecDeque};

use apeiron_core::{ChannelId, CoreError, Packet, PacketId, TaskId, Topology, TorusCoord};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::fabric::INTRA_PORTS;

/// Side-channel metadata accompanying one send.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SendMeta {
    pub dest_node: TorusCoord,
    pub task_id: u8,
    pub ch_id: u8,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SendError {
    #[error("empty message")]
    Empty,
    #[error("message of {size} words exceeds the {max}-word packet cap")]
    TooLarge { size: usize, max: u32 },
    #[error("declared size {size} but {words} words supplied")]
    SizeMismatch { size: usize, words: usize },
    #[error(transparent)]
    Field(#[from] CoreError),
}

#[derive(Debug, Clone)]
pub struct AggregatorState {
    src: TorusCoord,
    max_payload_words: u32,
    pub(crate) last_staged: Option<u64>,
}

impl AggregatorState {
    pub fn new(src: TorusCoord, max_payload_words: u32) -> Self {
        AggregatorState {
            src,
            max_payload_words,
            last_staged: None,
        }
    }

    /// Forges the packet for one send. One send is always one packet;
    /// messages above the payload cap are refused, not segmented.
    pub fn aggregate(&self, topo: &Topology, meta: &SendMeta, words: &[u32]) -> Result<Packet, SendError> {
        if meta.size != words.len() {
            return Err(SendError::SizeMismatch {
                size: meta.size,
                words: words.len(),
            });
        }
        if words.is_empty() {
            return Err(SendError::Empty);
        }
        if words.len() > self.max_payload_words as usize {
            return Err(SendError::TooLarge {
                size: words.len(),
                max: self.max_payload_words,
            });
        }
        topo.check(&meta.dest_node)?;
        let task = TaskId::new(meta.task_id)?;
        let ch = ChannelId::new(meta.ch_id)?;
        Ok(Packet::new(
            meta.dest_node.clone(),
            self.src.clone(),
            task,
            ch,
            words.to_vec(),
        )?)
    }
}

/// A delivered message waiting in a receive FIFO.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub words: Vec<u32>,
    pub packet: PacketId,
    pub src: TorusCoord,
    pub arrived_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DispatchStatus {
    Accepted,
    ErrBadChannel,
    ErrFifoFull,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("checksum mismatch on packet {0}")]
pub struct CorruptPacket(pub PacketId);

/// Running record of everything delivered on one channel.
#[derive(Debug, Clone, Default)]
struct ChannelLog {
    messages: u64,
    digest: Sha256,
}

#[derive(Debug, Clone)]
pub struct DispatcherState {
    fifos: Vec<VecDeque<Message>>,
    capacity: usize,
    /// Unbound ports absorb every packet immediately.
    sink: bool,
    logs: BTreeMap<u8, ChannelLog>,
    peak: usize,
}

impl DispatcherState {
    pub fn for_task(in_channels: usize, capacity: usize) -> Self {
        DispatcherState {
            fifos: vec![VecDeque::new(); in_channels],
            capacity,
            sink: false,
            logs: BTreeMap::new(),
            peak: 0,
        }
    }

    pub fn sink() -> Self {
        DispatcherState {
            fifos: Vec::new(),
            capacity: 0,
            sink: true,
            logs: BTreeMap::new(),
            peak: 0,
        }
    }

    pub fn is_sink(&self) -> bool {
        self.sink
    }

    pub fn channels(&self) -> usize {
        self.fifos.len()
    }

    /// Verifies the checksum, then queues the payload on `ch_id`.
    pub fn dispatch(&mut self, pkt: &Packet, id: PacketId, cycle: u64) -> Result<DispatchStatus, CorruptPacket> {
        if !pkt.verify() {
            return Err(CorruptPacket(id));
        }
        let ch = pkt.header.ch_id;
        if !self.sink {
            let Some(fifo) = self.fifos.get_mut(ch.index()) else {
                return Ok(DispatchStatus::ErrBadChannel);
            };
            if fifo.len() >= self.capacity {
                return Ok(DispatchStatus::ErrFifoFull);
            }
            fifo.push_back(Message {
                words: pkt.payload.clone(),
                packet: id,
                src: pkt.header.src.clone(),
                arrived_at: cycle,
            });
            self.peak = self.peak.max(fifo.len());
        }
        let log = self.logs.entry(ch.get()).or_default();
        log.messages += 1;
        log.digest.update((pkt.payload.len() as u32).to_le_bytes());
        for w in &pkt.payload {
            log.digest.update(w.to_le_bytes());
        }
        Ok(DispatchStatus::Accepted)
    }

    pub fn pop(&mut self, ch: usize) -> Option<Message> {
        self.fifos.get_mut(ch)?.pop_front()
    }

    pub fn len(&self, ch: usize) -> usize {
        self.fifos.get(ch).map_or(0, VecDeque::len)
    }

    pub fn is_full(&self, ch: usize) -> bool {
        !self.sink && self.len(ch) >= self.capacity
    }

    /// Messages waiting across all channels.
    pub fn queued(&self) -> usize {
        self.fifos.iter().map(VecDeque::len).sum()
    }

    pub fn peak(&self) -> usize {
        self.peak
    }

    /// `(ch_id, messages, sha256 hex)` for every channel that saw traffic.
    pub fn channel_digests(&self) -> Vec<(u8, u64, String)> {
        self.logs
            .iter()
            .map(|(&ch, log)| {
                let d = log.digest.clone().finalize();
                (ch, log.messages, d.iter().map(|b| format!("{b:02x}")).collect())
            })
            .collect()
    }
}

/// Status registers of one IntraNode port.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PortStatus {
    pub sent_packets: u64,
    pub delivered_packets: u64,
    pub bad_channel_drops: u64,
    pub peak_fifo_occupancy: usize,
    pub send_errors: u64,
    pub send_rejected_full: u64,
}

#[derive(Debug, Clone)]
pub struct IntraNodePort {
    pub index: u8,
    /// Name of the kernel bound to this port, if any.
    pub binding: Option<String>,
    pub aggregator: AggregatorState,
    pub dispatcher: DispatcherState,
    pub status: PortStatus,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub coord: TorusCoord,
    pub ports: Vec<IntraNodePort>,
}

impl Node {
    pub fn new(coord: TorusCoord, max_payload_words: u32) -> Self {
        let ports = (0..INTRA_PORTS as u8)
            .map(|index| IntraNodePort {
                index,
                binding: None,
                aggregator: AggregatorState::new(coord.clone(), max_payload_words),
                dispatcher: DispatcherState::sink(),
                status: PortStatus::default(),
            })
            .collect();
        Node { coord, ports }
    }

    /// Binds a task with `in_channels` receive FIFOs to `port`.
    pub fn bind(&mut self, port: u8, name: &str, in_channels: usize, fifo_capacity: usize) {
        let p = &mut self.ports[usize::from(port)];
        p.binding = Some(name.to_string());
        p.dispatcher = DispatcherState::for_task(in_channels, fifo_capacity);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo() -> Topology {
        Topology::new(vec![2, 2]).unwrap()
    }

    fn agg() -> AggregatorState {
        AggregatorState::new(TorusCoord::new(vec![0, 1]), 16)
    }

    fn meta(dest: &[u32], task: u8, ch: u8, size: usize) -> SendMeta {
        SendMeta {
            dest_node: TorusCoord::from(dest),
            task_id: task,
            ch_id: ch,
            size,
        }
    }

    #[test]
    fn aggregate_copies_metadata() {
        let p = agg().aggregate(&topo(), &meta(&[1, 0], 2, 5, 4), &[1, 2, 3, 4]).unwrap();
        assert_eq!(p.header.dest, TorusCoord::new(vec![1, 0]));
        assert_eq!(p.header.task_id.get(), 2);
        assert_eq!(p.header.ch_id.get(), 5);
        assert_eq!(p.header.payload_len, 4);
        assert_eq!(p.header.src, TorusCoord::new(vec![0, 1]));
        assert!(p.verify());
    }

    #[test]
    fn minimal_send_is_two_flits() {
        let p = agg().aggregate(&topo(), &meta(&[1, 1], 0, 0, 1), &[0]).unwrap();
        assert_eq!(p.flit_count(), 2);
    }

    #[test]
    fn corrupted_payload_fails_verification() {
        let mut p = agg().aggregate(&topo(), &meta(&[1, 1], 0, 0, 2), &[7, 8]).unwrap();
        p.payload[1] ^= 4;
        assert!(!p.verify());
        let mut d = DispatcherState::for_task(1, 4);
        assert_eq!(d.dispatch(&p, PacketId(3), 0), Err(CorruptPacket(PacketId(3))));
    }

    #[test]
    fn aggregate_rejects_bad_sends() {
        let a = agg();
        let t = topo();
        assert_eq!(a.aggregate(&t, &meta(&[1, 1], 0, 0, 0), &[]), Err(SendError::Empty));
        assert!(matches!(
            a.aggregate(&t, &meta(&[1, 1], 0, 0, 17), &[0; 17]),
            Err(SendError::TooLarge { size: 17, max: 16 })
        ));
        assert!(a.aggregate(&t, &meta(&[2, 0], 0, 0, 1), &[0]).is_err());
        assert!(a.aggregate(&t, &meta(&[1, 0], 4, 0, 1), &[0]).is_err());
        assert!(a.aggregate(&t, &meta(&[1, 0], 0, 128, 1), &[0]).is_err());
        assert!(a.aggregate(&t, &meta(&[1, 0], 0, 0, 2), &[0]).is_err());
    }

    fn pkt(ch: u8, words: Vec<u32>) -> Packet {
        let n = words.len();
        agg().aggregate(&topo(), &meta(&[0, 1], 0, ch, n), &words).unwrap()
    }

    #[test]
    fn dispatch_demultiplexes_by_channel() {
        let mut d = DispatcherState::for_task(8, 4);
        assert_eq!(d.dispatch(&pkt(5, vec![9]), PacketId(0), 3), Ok(DispatchStatus::Accepted));
        assert_eq!(d.len(5), 1);
        let m = d.pop(5).unwrap();
        assert_eq!(m.words, [9]);
        assert_eq!(m.arrived_at, 3);
        assert!(d.pop(5).is_none());
    }

    #[test]
    fn out_of_range_channel_is_reported() {
        let mut d = DispatcherState::for_task(2, 4);
        assert_eq!(
            d.dispatch(&pkt(9, vec![1]), PacketId(0), 0),
            Ok(DispatchStatus::ErrBadChannel)
        );
        assert_eq!(d.queued(), 0);
    }

    #[test]
    fn full_fifo_pushes_back() {
        let mut d = DispatcherState::for_task(1, 2);
        for i in 0..2 {
            assert_eq!(d.dispatch(&pkt(0, vec![i]), PacketId(u64::from(i)), 0), Ok(DispatchStatus::Accepted));
        }
        assert_eq!(d.dispatch(&pkt(0, vec![2]), PacketId(2), 0), Ok(DispatchStatus::ErrFifoFull));
        assert_eq!(d.peak(), 2);
    }

    #[test]
    fn fifo_keeps_arrival_order_either_way() {
        for order in [[0u32, 1], [1, 0]] {
            let mut d = DispatcherState::for_task(1, 4);
            for &w in &order {
                d.dispatch(&pkt(0, vec![w]), PacketId(u64::from(w)), 0).unwrap();
            }
            let got: Vec<u32> = std::iter::from_fn(|| d.pop(0)).map(|m| m.words[0]).collect();
            assert_eq!(got, order);
        }
    }

    #[test]
    fn digest_depends_on_stream_order() {
        let mut a = DispatcherState::sink();
        let mut b = DispatcherState::sink();
        a.dispatch(&pkt(0, vec![1]), PacketId(0), 0).unwrap();
        a.dispatch(&pkt(0, vec![2]), PacketId(1), 0).unwrap();
        b.dispatch(&pkt(0, vec![2]), PacketId(0), 0).unwrap();
        b.dispatch(&pkt(0, vec![1]), PacketId(1), 0).unwrap();
        assert_ne!(a.channel_digests(), b.channel_digests());
        assert_eq!(a.channel_digests()[0].1, 2);
    }
}
