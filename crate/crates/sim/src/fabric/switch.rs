//! Switch allocation: output-VC ownership and round-robin arbitration.

use apeiron_core::PacketId;
use serde::Serialize;

use super::port::{PortId, Vc, VCS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct InputVc {
    pub port: PortId,
    pub vc: Vc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct OutputVc {
    pub port: PortId,
    pub vc: Vc,
}

/// A head flit asking for an output VC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Request {
    pub input: InputVc,
    pub output: OutputVc,
    pub packet: PacketId,
    /// Total flits of the requesting packet.
    pub flits: usize,
    /// Free space of the buffer behind `output`, sampled this cycle.
    pub free: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ForwardOutcome {
    Forwarded,
    BlockedNoCredit,
    BlockedArbitration,
}

/// Allocation table and round-robin pointers of one switch.
#[derive(Debug, Clone)]
pub struct SwitchState {
    ports: usize,
    owner: Vec<[Option<InputVc>; VCS]>,
    rr: Vec<[usize; VCS]>,
}

impl SwitchState {
    pub fn new(ports: usize) -> Self {
        SwitchState {
            ports,
            owner: vec![[None; VCS]; ports],
            rr: vec![[0; VCS]; ports],
        }
    }

    pub fn owner(&self, out: OutputVc) -> Option<InputVc> {
        self.owner[out.port.index()][out.vc.index()]
    }

    fn requesters(&self) -> usize {
        self.ports * VCS
    }

    fn ordinal(input: InputVc) -> usize {
        input.port.index() * VCS + input.vc.index()
    }

    pub fn pointer(&self, out: OutputVc) -> usize {
        self.rr[out.port.index()][out.vc.index()]
    }

    /// Sets every round-robin pointer from `next`, taken modulo the number
    /// of requesters.
    pub fn set_pointers(&mut self, mut next: impl FnMut() -> usize) {
        let n = self.requesters();
        for per_port in &mut self.rr {
            for p in per_port.iter_mut() {
                *p = next() % n;
            }
        }
    }

    /// Resolves one cycle of requests; outcomes are returned in request
    /// order.
    ///
    /// An owned output blocks every requester. Otherwise the packets that
    /// fit entirely in the downstream buffer compete, and the one closest
    /// after the output's round-robin pointer wins; the pointer then moves
    /// past the winner.
    pub fn arbitrate(&mut self, requests: &[Request]) -> Vec<ForwardOutcome> {
        let mut outcomes = vec![ForwardOutcome::BlockedArbitration; requests.len()];
        let n = self.requesters();
        for (i, r) in requests.iter().enumerate() {
            // each output is resolved once, at its first request
            if requests[..i].iter().any(|q| q.output == r.output) {
                continue;
            }
            let contenders: Vec<usize> = (i..requests.len())
                .filter(|&j| requests[j].output == r.output)
                .collect();
            if self.owner(r.output).is_some() {
                continue;
            }
            let ptr = self.pointer(r.output);
            let mut winner: Option<(usize, usize)> = None;
            for &j in &contenders {
                let q = &requests[j];
                if q.flits > q.free {
                    outcomes[j] = ForwardOutcome::BlockedNoCredit;
                    continue;
                }
                let dist = (Self::ordinal(q.input) + n - ptr) % n;
                if winner.is_none_or(|(_, d)| dist < d) {
                    winner = Some((j, dist));
                }
            }
            if let Some((j, _)) = winner {
                let w = requests[j].input;
                outcomes[j] = ForwardOutcome::Forwarded;
                self.owner[r.output.port.index()][r.output.vc.index()] = Some(w);
                self.rr[r.output.port.index()][r.output.vc.index()] = (Self::ordinal(w) + 1) % n;
            }
        }
        outcomes
    }

    /// Frees `out` after the owning packet's tail has passed.
    pub fn release(&mut self, out: OutputVc, input: InputVc) {
        let slot = &mut self.owner[out.port.index()][out.vc.index()];
        debug_assert_eq!(*slot, Some(input), "release by non-owner");
        *slot = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(in_port: u8, out_port: u8, flits: usize, free: usize) -> Request {
        Request {
            input: InputVc {
                port: PortId::Intra(in_port),
                vc: Vc::V0,
            },
            output: OutputVc {
                port: PortId::Intra(out_port),
                vc: Vc::V0,
            },
            packet: PacketId(u64::from(in_port)),
            flits,
            free,
        }
    }

    #[test]
    fn uncontended_request_forwards() {
        let mut s = SwitchState::new(6);
        assert_eq!(s.arbitrate(&[req(0, 2, 4, 10)]), [ForwardOutcome::Forwarded]);
        assert!(s.owner(req(0, 2, 4, 10).output).is_some());
    }

    #[test]
    fn one_flit_short_blocks_on_credit() {
        let mut s = SwitchState::new(6);
        assert_eq!(s.arbitrate(&[req(0, 2, 5, 4)]), [ForwardOutcome::BlockedNoCredit]);
        assert!(s.owner(req(0, 2, 5, 4).output).is_none());
    }

    #[test]
    fn contention_alternates_between_two_inputs() {
        let mut s = SwitchState::new(6);
        let a = req(0, 3, 2, 10);
        let b = req(1, 3, 2, 10);
        let first = s.arbitrate(&[a, b]);
        assert_eq!(first, [ForwardOutcome::Forwarded, ForwardOutcome::BlockedArbitration]);
        // owner holds the output until release
        assert_eq!(
            s.arbitrate(&[b]),
            [ForwardOutcome::BlockedArbitration]
        );
        s.release(a.output, a.input);
        // the loser is favoured next time, regardless of request order
        assert_eq!(
            s.arbitrate(&[a, b]),
            [ForwardOutcome::BlockedArbitration, ForwardOutcome::Forwarded]
        );
        s.release(b.output, b.input);
        assert_eq!(
            s.arbitrate(&[b, a]),
            [ForwardOutcome::BlockedArbitration, ForwardOutcome::Forwarded]
        );
    }

    #[test]
    fn small_packet_can_pass_when_large_one_does_not_fit() {
        let mut s = SwitchState::new(6);
        let big = req(0, 3, 8, 5);
        let small = req(1, 3, 3, 5);
        assert_eq!(
            s.arbitrate(&[big, small]),
            [ForwardOutcome::BlockedNoCredit, ForwardOutcome::Forwarded]
        );
    }

    #[test]
    fn distinct_outputs_do_not_interfere() {
        let mut s = SwitchState::new(6);
        let out = s.arbitrate(&[req(0, 2, 2, 4), req(1, 3, 2, 4)]);
        assert_eq!(out, [ForwardOutcome::Forwarded, ForwardOutcome::Forwarded]);
    }
}
