use std::collections::VecDeque;

use apeiron_core::{Flit, PacketId};

/// A flit sitting in a buffer, visible to the switch from `ready_at` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BufferedFlit {
    pub flit: Flit,
    pub ready_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReserveError {
    #[error("buffer already reserved for packet {0}")]
    AlreadyReserved(PacketId),
    #[error("need {need} free flits, have {free}")]
    NoSpace { need: usize, free: usize },
}

/// One virtual channel's flit buffer with virtual cut-through accounting.
///
/// Space for a whole packet is reserved before its head is sent; while the
/// reservation is open only that packet's flits may enter, and the
/// reservation closes when its tail arrives.
#[derive(Debug, Clone)]
pub struct VcBuffer {
    capacity: usize,
    queue: VecDeque<BufferedFlit>,
    committed: usize,
    reserved_for: Option<PacketId>,
    peak: usize,
}

impl VcBuffer {
    pub fn new(capacity: usize) -> Self {
        VcBuffer {
            capacity,
            queue: VecDeque::with_capacity(capacity),
            committed: 0,
            reserved_for: None,
            peak: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Space not occupied and not promised to an in-progress packet.
    pub fn free(&self) -> usize {
        self.capacity - self.queue.len() - self.committed
    }

    pub fn reserved_for(&self) -> Option<PacketId> {
        self.reserved_for
    }

    pub fn peak(&self) -> usize {
        self.peak
    }

    pub fn front(&self) -> Option<&BufferedFlit> {
        self.queue.front()
    }

    pub fn get(&self, i: usize) -> Option<&BufferedFlit> {
        self.queue.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BufferedFlit> {
        self.queue.iter()
    }

    pub fn reserve(&mut self, packet: PacketId, flits: usize) -> Result<(), ReserveError> {
        if let Some(p) = self.reserved_for {
            return Err(ReserveError::AlreadyReserved(p));
        }
        if self.free() < flits {
            return Err(ReserveError::NoSpace {
                need: flits,
                free: self.free(),
            });
        }
        self.reserved_for = Some(packet);
        self.committed = flits;
        Ok(())
    }

    /// Panics if the flit does not belong to the open reservation.
    pub fn push(&mut self, flit: Flit, ready_at: u64) {
        assert_eq!(
            self.reserved_for,
            Some(flit.packet),
            "flit of packet {} entered a buffer it has not reserved",
            flit.packet
        );
        debug_assert!(self.committed > 0);
        self.committed -= 1;
        self.queue.push_back(BufferedFlit { flit, ready_at });
        self.peak = self.peak.max(self.queue.len());
        if flit.kind.is_tail() {
            debug_assert_eq!(self.committed, 0);
            self.reserved_for = None;
        }
    }

    pub fn pop(&mut self) -> Option<BufferedFlit> {
        self.queue.pop_front()
    }

    /// Drops the first `n` flits.
    pub fn drain_front(&mut self, n: usize) -> impl Iterator<Item = BufferedFlit> + '_ {
        self.queue.drain(..n)
    }

    #[cfg(test)]
    pub(crate) fn flit_mut(&mut self, i: usize) -> Option<&mut BufferedFlit> {
        self.queue.get_mut(i)
    }
}
