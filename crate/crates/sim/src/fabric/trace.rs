//! Trace events and their CSV form.

use std::io::Write;

use apeiron_core::{FlitKind, PacketId, Topology};
use serde::Serialize;

use super::port::{PortId, Vc};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Packet staged into an injection buffer by an Aggregator.
    Inject,
    /// Head flit won its output VC.
    ArbWin,
    BlockNoCredit,
    BlockArbitration,
    /// One flit crossed the switch towards `port`.
    Flit,
    Deliver,
    DropBadChannel,
    StallFifoFull,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Inject => "inject",
            EventKind::ArbWin => "arb_win",
            EventKind::BlockNoCredit => "block_no_credit",
            EventKind::BlockArbitration => "block_arbitration",
            EventKind::Flit => "flit",
            EventKind::Deliver => "deliver",
            EventKind::DropBadChannel => "drop_bad_channel",
            EventKind::StallFifoFull => "stall_fifo_full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    /// Row-major node index.
    pub node: usize,
    pub kind: EventKind,
    pub port: Option<PortId>,
    pub vc: Option<Vc>,
    pub packet: PacketId,
    pub flit: Option<FlitKind>,
}

/// Writes `cycle,node,event,port,vc,packet,flit` rows.
pub struct TraceWriter<W: Write> {
    out: csv::Writer<W>,
    topo: Topology,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(w: W, topo: Topology) -> csv::Result<Self> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["cycle", "node", "event", "port", "vc", "packet", "flit"])?;
        Ok(TraceWriter { out, topo })
    }

    pub fn write(&mut self, events: &[TraceEvent]) -> csv::Result<()> {
        for e in events {
            self.out.write_record([
                e.cycle.to_string(),
                self.topo.coord_of(e.node).to_string(),
                e.kind.as_str().to_string(),
                e.port.map(|p| p.to_string()).unwrap_or_default(),
                e.vc.map(|v| v.to_string()).unwrap_or_default(),
                e.packet.to_string(),
                e.flit.map(|f| f.as_str().to_string()).unwrap_or_default(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| e.into_error())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_stable() {
        let topo = Topology::new(vec![2, 2]).unwrap();
        let mut w = TraceWriter::new(Vec::new(), topo).unwrap();
        w.write(&[TraceEvent {
            cycle: 7,
            node: 3,
            kind: EventKind::Flit,
            port: Some(PortId::Intra(2)),
            vc: Some(Vc::V1),
            packet: PacketId(11),
            flit: Some(FlitKind::Tail),
        }])
        .unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        assert_eq!(text, "cycle,node,event,port,vc,packet,flit\n7,1:1,flit,P2,1,11,TAIL\n");
    }
}
