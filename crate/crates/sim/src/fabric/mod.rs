//! The routing fabric: one input-queued switch per torus node, wired into
//! an n-dimensional torus with two virtual channels per physical link.
//!
//! Timing model, per hop:
//! - a head flit becomes routable `route_latency` cycles after it lands;
//! - switch allocation and traversal happen in the same cycle;
//! - a flit needs `link_latency` cycles to reach the next buffer;
//! - each input VC and each output VC moves at most one flit per cycle.
//!
//! Allocation follows virtual cut-through: an output VC is granted only if
//! the downstream buffer can hold the entire packet, and it stays owned by
//! that packet until the tail flit passes.

mod buffer;
mod port;
mod registers;
mod routing;
mod switch;
mod trace;

use std::collections::{HashMap, HashSet};

use apeiron_core::{CoreError, Packet, PacketId, Topology, TorusCoord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use buffer::{BufferedFlit, ReserveError, VcBuffer};
pub use port::{PortId, Vc, INTRA_PORTS, VCS};
pub use registers::{FabricParams, RegisterError, RegisterFile};
pub use routing::{dor_hops, route, select_vc};
pub use switch::{ForwardOutcome, InputVc, OutputVc, Request, SwitchState};
pub use trace::{EventKind, TraceEvent, TraceWriter};

use crate::node::{DispatchStatus, Message, Node, PortStatus, SendError, SendMeta};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FabricError {
    #[error(transparent)]
    Coord(#[from] CoreError),
    #[error("port {port} of node {coord} bound twice")]
    PortTaken { coord: TorusCoord, port: u8 },
    #[error("port {0} out of range 0-3")]
    BadPort(u8),
    #[error("{what} of {have} flits cannot hold a {need}-flit packet")]
    BufferTooSmall { what: &'static str, have: usize, need: usize },
    #[error("invalid fabric parameter: {0}")]
    BadParams(String),
}

/// A task attached to an IntraNode port at elaboration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortBinding {
    pub coord: TorusCoord,
    pub port: u8,
    pub name: String,
    pub in_channels: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SendFailure {
    #[error(transparent)]
    Invalid(#[from] SendError),
    #[error("injection buffer full")]
    Full,
}

/// One delivered (or dropped) packet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PacketRecord {
    pub id: u64,
    pub src: TorusCoord,
    pub src_port: u8,
    pub dest: TorusCoord,
    pub task_id: u8,
    pub ch_id: u8,
    pub words: u32,
    pub inject_cycle: u64,
    pub deliver_cycle: u64,
    pub hops: u32,
    pub dropped: bool,
}

#[derive(Debug, Clone)]
struct InFlight {
    packet: Packet,
    inject_cycle: u64,
    hops: u32,
    src_port: u8,
}

#[derive(Debug, Clone)]
struct InputState {
    buf: VcBuffer,
    route: Option<OutputVc>,
}

#[derive(Debug, Clone)]
struct Router {
    coord: TorusCoord,
    regs: RegisterFile,
    inputs: Vec<[InputState; VCS]>,
    eject: Vec<[VcBuffer; VCS]>,
    switch: SwitchState,
    /// Node index reached through each port (self for IntraNode ports).
    neighbors: Vec<usize>,
    link_flits: Vec<u64>,
}

/// A vertex of the buffer wait-for graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WaitNode {
    Input { node: usize, port: PortId, vc: Vc },
    Eject { node: usize, port: u8, vc: Vc },
    Fifo { node: usize, port: u8, ch: u8 },
}

#[derive(Debug, Clone)]
pub struct Fabric {
    topo: Topology,
    params: FabricParams,
    routers: Vec<Router>,
    nodes: Vec<Node>,
    packets: HashMap<PacketId, InFlight>,
    next_id: u64,
    cycle: u64,
    events: Vec<TraceEvent>,
    records: Vec<PacketRecord>,
    last_progress: u64,
    injected: u64,
    delivered: u64,
    dropped: u64,
    sink_deliveries: u64,
    requests: Vec<Request>,
}

impl Fabric {
    pub fn new(topo: Topology, params: FabricParams, bindings: &[PortBinding]) -> Result<Self, FabricError> {
        let need = params.max_packet_flits();
        if params.max_payload_words == 0 {
            return Err(FabricError::BadParams("max_payload_words must be at least 1".into()));
        }
        if params.vc_capacity_flits < need {
            return Err(FabricError::BufferTooSmall {
                what: "VC buffer",
                have: params.vc_capacity_flits,
                need,
            });
        }
        if params.eject_capacity_flits < need {
            return Err(FabricError::BufferTooSmall {
                what: "ejection buffer",
                have: params.eject_capacity_flits,
                need,
            });
        }
        if params.fifo_capacity == 0 {
            return Err(FabricError::BadParams("fifo_capacity must be at least 1".into()));
        }
        if params.link_latency == 0 {
            return Err(FabricError::BadParams("link_latency must be at least 1".into()));
        }
        if !(1..=2).contains(&params.virtual_channels) {
            return Err(FabricError::BadParams("virtual_channels must be 1 or 2".into()));
        }

        let nports = PortId::count(topo.dims());
        let mut routers = Vec::with_capacity(topo.node_count());
        let mut nodes = Vec::with_capacity(topo.node_count());
        for (idx, coord) in topo.coords().enumerate() {
            let neighbors = PortId::all(topo.dims())
                .map(|p| match p {
                    PortId::Intra(_) => idx,
                    PortId::Inter { dim, dir } => topo.index_of(&topo.neighbor(&coord, usize::from(dim), dir)),
                })
                .collect();
            let input = || InputState {
                buf: VcBuffer::new(params.vc_capacity_flits),
                route: None,
            };
            routers.push(Router {
                coord: coord.clone(),
                regs: RegisterFile::new(coord.clone(), &topo, &params),
                inputs: (0..nports).map(|_| [input(), input()]).collect(),
                eject: (0..INTRA_PORTS)
                    .map(|_| {
                        [
                            VcBuffer::new(params.eject_capacity_flits),
                            VcBuffer::new(params.eject_capacity_flits),
                        ]
                    })
                    .collect(),
                switch: SwitchState::new(nports),
                neighbors,
                link_flits: vec![0; nports],
            });
            nodes.push(Node::new(coord, params.max_payload_words));
        }

        for b in bindings {
            topo.check(&b.coord)?;
            if usize::from(b.port) >= INTRA_PORTS {
                return Err(FabricError::BadPort(b.port));
            }
            let node = &mut nodes[topo.index_of(&b.coord)];
            if node.ports[usize::from(b.port)].binding.is_some() {
                return Err(FabricError::PortTaken {
                    coord: b.coord.clone(),
                    port: b.port,
                });
            }
            node.bind(b.port, &b.name, b.in_channels, params.fifo_capacity);
        }

        Ok(Fabric {
            topo,
            params,
            routers,
            nodes,
            packets: HashMap::new(),
            next_id: 0,
            cycle: 0,
            events: Vec::new(),
            records: Vec::new(),
            last_progress: 0,
            injected: 0,
            delivered: 0,
            dropped: 0,
            sink_deliveries: 0,
            requests: Vec::new(),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn params(&self) -> &FabricParams {
        &self.params
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn node_count(&self) -> usize {
        self.routers.len()
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn registers(&self, node: usize) -> &RegisterFile {
        &self.routers[node].regs
    }

    pub fn registers_mut(&mut self, node: usize) -> &mut RegisterFile {
        &mut self.routers[node].regs
    }

    /// Turns VC1 on or off at every router.
    pub fn set_vc1_enabled(&mut self, on: bool) {
        for r in &mut self.routers {
            r.regs
                .write("vc1_enable", u64::from(on))
                .expect("vc1_enable is writable");
        }
    }

    /// Unidirectional inter-node channels: one per router per InterNode port.
    pub fn inter_node_channels(&self) -> usize {
        self.routers.len() * 2 * self.topo.dims()
    }

    /// Destination node index of the link leaving `node` through `port`.
    pub fn neighbor(&self, node: usize, port: PortId) -> usize {
        self.routers[node].neighbors[port.index()]
    }

    /// Scrambles every arbiter's round-robin pointers from `seed`.
    pub fn randomize_arbiters(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        for r in &mut self.routers {
            r.switch.set_pointers(|| rng.gen::<u32>() as usize);
        }
    }

    pub fn switch(&self, node: usize) -> &SwitchState {
        &self.routers[node].switch
    }

    pub fn input_buffer(&self, node: usize, port: PortId, vc: Vc) -> &VcBuffer {
        &self.routers[node].inputs[port.index()][vc.index()].buf
    }

    pub fn eject_buffer(&self, node: usize, port: u8, vc: Vc) -> &VcBuffer {
        &self.routers[node].eject[usize::from(port)][vc.index()]
    }

    /// Aggregates and stages one send from the task on `port`.
    ///
    /// Invalid sends are counted in the port's `send_errors`; a full
    /// injection buffer (or a second send in one cycle) in
    /// `send_rejected_full`.
    pub fn send(&mut self, node: usize, port: u8, meta: &SendMeta, words: &[u32]) -> Result<PacketId, SendFailure> {
        let p = &mut self.nodes[node].ports[usize::from(port)];
        match p.aggregator.aggregate(&self.topo, meta, words) {
            Ok(pkt) => self.inject(node, port, pkt).map_err(|_| SendFailure::Full),
            Err(e) => {
                p.status.send_errors += 1;
                Err(SendFailure::Invalid(e))
            }
        }
    }

    /// Stages an already-forged packet into the VC0 injection buffer of
    /// `port`. Hands the packet back when there is no room this cycle.
    pub fn inject(&mut self, node: usize, port: u8, packet: Packet) -> Result<PacketId, Packet> {
        let c = self.cycle;
        let route_latency = self.routers[node].regs.route_latency();
        let ep = &mut self.nodes[node].ports[usize::from(port)];
        let input = &mut self.routers[node].inputs[usize::from(port)][0];
        let n = packet.flit_count();
        if ep.aggregator.last_staged == Some(c) || input.buf.free() < n {
            ep.status.send_rejected_full += 1;
            return Err(packet);
        }
        let id = PacketId(self.next_id);
        self.next_id += 1;
        input.buf.reserve(id, n).expect("free space checked");
        for f in packet.to_flits(id) {
            let ready = if f.kind.is_head() { c + route_latency } else { c };
            input.buf.push(f, ready);
        }
        ep.aggregator.last_staged = Some(c);
        ep.status.sent_packets += 1;
        self.injected += 1;
        self.last_progress = c;
        self.events.push(TraceEvent {
            cycle: c,
            node,
            kind: EventKind::Inject,
            port: Some(PortId::Intra(port)),
            vc: Some(Vc::V0),
            packet: id,
            flit: None,
        });
        self.packets.insert(
            id,
            InFlight {
                packet,
                inject_cycle: c,
                hops: 0,
                src_port: port,
            },
        );
        Ok(id)
    }

    /// Events recorded since the last [`Fabric::step_cycle`] began
    /// (injections made between steps land here too).
    pub fn pending_events(&self) -> &[TraceEvent] {
        &self.events
    }

    /// Advances every router and endpoint by one clock cycle.
    ///
    /// Routers are visited in row-major order; within a router, allocation
    /// precedes traversal, and ports follow the fixed [`PortId`]
    /// enumeration. Returns the events of this cycle, preceded by any
    /// injections staged since the previous step.
    pub fn step_cycle(&mut self) -> &[TraceEvent] {
        let c = self.cycle;
        for n in 0..self.routers.len() {
            self.allocate(n, c);
            self.traverse(n, c);
        }
        for n in 0..self.nodes.len() {
            self.dispatch_node(n, c);
        }
        self.cycle += 1;
        &self.events
    }

    /// Clears the event buffer; call after consuming [`Fabric::step_cycle`]
    /// output.
    pub fn clear_events(&mut self) {
        self.events.clear();
    }

    fn downstream_free(&self, n: usize, out: OutputVc) -> usize {
        match out.port {
            PortId::Intra(p) => self.routers[n].eject[usize::from(p)][out.vc.index()].free(),
            PortId::Inter { .. } => {
                let m = self.routers[n].neighbors[out.port.index()];
                self.routers[m].inputs[out.port.index()][out.vc.index()].buf.free()
            }
        }
    }

    fn downstream_mut(&mut self, n: usize, out: OutputVc) -> &mut VcBuffer {
        match out.port {
            PortId::Intra(p) => &mut self.routers[n].eject[usize::from(p)][out.vc.index()],
            PortId::Inter { .. } => {
                let m = self.routers[n].neighbors[out.port.index()];
                &mut self.routers[m].inputs[out.port.index()][out.vc.index()].buf
            }
        }
    }

    /// The allocation request of the head flit at the front of an input
    /// VC, if it is routable this cycle.
    fn head_request(&self, n: usize, port: PortId, vc: Vc, c: u64) -> Option<Request> {
        let r = &self.routers[n];
        let st = &r.inputs[port.index()][vc.index()];
        if st.route.is_some() {
            return None;
        }
        let front = st.buf.front()?;
        if front.ready_at > c {
            return None;
        }
        debug_assert!(front.flit.kind.is_head(), "unrouted buffer front is not a head flit");
        let inf = &self.packets[&front.flit.packet];
        let out_port = route(&self.topo, &r.coord, &inf.packet.header);
        let out_vc = match out_port {
            PortId::Intra(_) => vc,
            PortId::Inter { dim, .. } => {
                let held = if port.dim() == Some(usize::from(dim)) { vc } else { Vc::V0 };
                if r.regs.vc1_enabled() {
                    select_vc(held, &self.topo, &r.coord, out_port)
                } else {
                    Vc::V0
                }
            }
        };
        let output = OutputVc {
            port: out_port,
            vc: out_vc,
        };
        Some(Request {
            input: InputVc { port, vc },
            output,
            packet: front.flit.packet,
            flits: inf.packet.flit_count(),
            free: self.downstream_free(n, output),
        })
    }

    fn allocate(&mut self, n: usize, c: u64) {
        let mut requests = std::mem::take(&mut self.requests);
        requests.clear();
        for p in 0..self.routers[n].inputs.len() {
            for vc in Vc::ALL {
                if let Some(rq) = self.head_request(n, PortId::from_index(p), vc, c) {
                    requests.push(rq);
                }
            }
        }
        if !requests.is_empty() {
            let outcomes = self.routers[n].switch.arbitrate(&requests);
            for (rq, outcome) in requests.iter().zip(outcomes) {
                let kind = match outcome {
                    ForwardOutcome::Forwarded => {
                        self.grant(n, rq);
                        EventKind::ArbWin
                    }
                    ForwardOutcome::BlockedNoCredit => EventKind::BlockNoCredit,
                    ForwardOutcome::BlockedArbitration => EventKind::BlockArbitration,
                };
                self.events.push(TraceEvent {
                    cycle: c,
                    node: n,
                    kind,
                    port: Some(rq.output.port),
                    vc: Some(rq.output.vc),
                    packet: rq.packet,
                    flit: None,
                });
            }
        }
        self.requests = requests;
    }

    fn grant(&mut self, n: usize, rq: &Request) {
        self.downstream_mut(n, rq.output)
            .reserve(rq.packet, rq.flits)
            .expect("arbiter granted an output without room for the packet");
        self.routers[n].inputs[rq.input.port.index()][rq.input.vc.index()].route = Some(rq.output);
    }

    fn traverse(&mut self, n: usize, c: u64) {
        let link_latency = self.routers[n].regs.link_latency();
        let route_latency = self.routers[n].regs.route_latency();
        for p in 0..self.routers[n].inputs.len() {
            for vc in Vc::ALL {
                let st = &mut self.routers[n].inputs[p][vc.index()];
                let Some(out) = st.route else { continue };
                match st.buf.front() {
                    Some(f) if f.ready_at <= c => {}
                    _ => continue,
                }
                let bf = st.buf.pop().expect("front checked");
                if bf.flit.kind.is_tail() {
                    st.route = None;
                    let input = InputVc {
                        port: PortId::from_index(p),
                        vc,
                    };
                    self.routers[n].switch.release(out, input);
                }
                let mut ready = c + link_latency;
                if out.port.is_inter() && bf.flit.kind.is_head() {
                    ready += route_latency;
                    if let Some(inf) = self.packets.get_mut(&bf.flit.packet) {
                        inf.hops += 1;
                    }
                }
                self.downstream_mut(n, out).push(bf.flit, ready);
                self.routers[n].link_flits[out.port.index()] += 1;
                self.last_progress = c;
                self.events.push(TraceEvent {
                    cycle: c,
                    node: n,
                    kind: EventKind::Flit,
                    port: Some(out.port),
                    vc: Some(out.vc),
                    packet: bf.flit.packet,
                    flit: Some(bf.flit.kind),
                });
            }
        }
    }

    /// Whether the packet at the front of an ejection buffer has fully
    /// arrived; returns its flit count.
    fn complete_front(buf: &VcBuffer, packets: &HashMap<PacketId, InFlight>, c: u64) -> Option<(PacketId, usize)> {
        let front = buf.front()?;
        let id = front.flit.packet;
        let n = packets[&id].packet.flit_count();
        let tail = buf.get(n - 1)?;
        (tail.flit.packet == id && tail.ready_at <= c).then_some((id, n))
    }

    /// Each IntraNode port hands at most one complete packet per cycle to
    /// its Dispatcher, VC0 first.
    fn dispatch_node(&mut self, n: usize, c: u64) {
        for port in 0..INTRA_PORTS {
            for vc in Vc::ALL {
                let buf = &self.routers[n].eject[port][vc.index()];
                let Some((id, nflits)) = Self::complete_front(buf, &self.packets, c) else {
                    continue;
                };
                // Rebuild the packet from the words that actually travelled.
                let inf = &self.packets[&id];
                let payload: Vec<u32> = buf.iter().skip(1).take(nflits - 1).map(|b| b.flit.word).collect();
                let arrived = Packet {
                    header: inf.packet.header.clone(),
                    payload,
                    footer: inf.packet.footer,
                };
                let ep = &mut self.nodes[n].ports[port];
                let status = match ep.dispatcher.dispatch(&arrived, id, c) {
                    Ok(s) => s,
                    Err(e) => panic!("fatal: {e} at node {} port {port}", self.routers[n].coord),
                };
                let kind = match status {
                    DispatchStatus::ErrFifoFull => EventKind::StallFifoFull,
                    DispatchStatus::Accepted => {
                        ep.status.delivered_packets += 1;
                        ep.status.peak_fifo_occupancy = ep.dispatcher.peak();
                        if ep.dispatcher.is_sink() {
                            self.sink_deliveries += 1;
                        }
                        self.delivered += 1;
                        EventKind::Deliver
                    }
                    DispatchStatus::ErrBadChannel => {
                        ep.status.bad_channel_drops += 1;
                        self.dropped += 1;
                        EventKind::DropBadChannel
                    }
                };
                self.events.push(TraceEvent {
                    cycle: c,
                    node: n,
                    kind,
                    port: Some(PortId::Intra(port as u8)),
                    vc: Some(vc),
                    packet: id,
                    flit: None,
                });
                if status == DispatchStatus::ErrFifoFull {
                    continue;
                }
                self.routers[n].eject[port][vc.index()].drain_front(nflits).for_each(drop);
                self.last_progress = c;
                let inf = self.packets.remove(&id).expect("in flight");
                let h = &inf.packet.header;
                self.records.push(PacketRecord {
                    id: id.0,
                    src: h.src.clone(),
                    src_port: inf.src_port,
                    dest: h.dest.clone(),
                    task_id: h.task_id.get(),
                    ch_id: h.ch_id.get(),
                    words: h.payload_len,
                    inject_cycle: inf.inject_cycle,
                    deliver_cycle: c,
                    hops: inf.hops,
                    dropped: status == DispatchStatus::ErrBadChannel,
                });
                break;
            }
        }
    }

    /// Pops the next message of channel `ch` on `port`.
    pub fn receive(&mut self, node: usize, port: u8, ch: usize) -> Option<Message> {
        self.nodes[node].ports[usize::from(port)].dispatcher.pop(ch)
    }

    pub fn fifo_len(&self, node: usize, port: u8, ch: usize) -> usize {
        self.nodes[node].ports[usize::from(port)].dispatcher.len(ch)
    }

    /// Single-request form of switch allocation for the head flit at the
    /// front of `(port, vc)`, applied immediately.
    ///
    /// Returns `None` if that buffer has no routable head flit this cycle.
    pub fn try_forward(&mut self, node: usize, port: PortId, vc: Vc) -> Option<ForwardOutcome> {
        let rq = self.head_request(node, port, vc, self.cycle)?;
        let outcome = self.routers[node].switch.arbitrate(&[rq])[0];
        if outcome == ForwardOutcome::Forwarded {
            self.grant(node, &rq);
        }
        Some(outcome)
    }

    /// True when no flit sits in any buffer.
    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    /// Packets still inside the fabric, counted independently of the
    /// in-flight table: one tail flit per packet in some buffer.
    pub fn packets_in_buffers(&self) -> usize {
        self.routers
            .iter()
            .map(|r| {
                let ins: usize = r
                    .inputs
                    .iter()
                    .flat_map(|vcs| vcs.iter())
                    .map(|s| s.buf.iter().filter(|b| b.flit.kind.is_tail()).count())
                    .sum();
                let ejs: usize = r
                    .eject
                    .iter()
                    .flat_map(|vcs| vcs.iter())
                    .map(|b| b.iter().filter(|b| b.flit.kind.is_tail()).count())
                    .sum();
                ins + ejs
            })
            .sum()
    }

    /// Messages delivered into receive FIFOs and not yet taken by a task.
    pub fn queued_messages(&self) -> usize {
        self.nodes
            .iter()
            .flat_map(|n| n.ports.iter())
            .map(|p| p.dispatcher.queued())
            .sum()
    }

    pub fn injected(&self) -> u64 {
        self.injected
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Packets absorbed by unbound ports.
    pub fn sink_deliveries(&self) -> u64 {
        self.sink_deliveries
    }

    pub fn last_progress(&self) -> u64 {
        self.last_progress
    }

    pub fn records(&self) -> &[PacketRecord] {
        &self.records
    }

    /// Flits sent through each output port, keyed by (node, port).
    pub fn link_flits(&self) -> Vec<(usize, PortId, u64)> {
        self.routers
            .iter()
            .enumerate()
            .flat_map(|(n, r)| {
                r.link_flits
                    .iter()
                    .enumerate()
                    .map(move |(p, &f)| (n, PortId::from_index(p), f))
            })
            .collect()
    }

    pub fn port_status(&self, node: usize, port: u8) -> &PortStatus {
        &self.nodes[node].ports[usize::from(port)].status
    }

    /// Edges of the wait-for graph: each blocked buffer points at the one
    /// resource its front packet is waiting on.
    pub fn wait_edges(&self) -> Vec<(WaitNode, WaitNode)> {
        let c = self.cycle;
        let mut edges = Vec::new();
        for (n, r) in self.routers.iter().enumerate() {
            for p in 0..r.inputs.len() {
                let port = PortId::from_index(p);
                for vc in Vc::ALL {
                    let Some(rq) = self.head_request(n, port, vc, c) else { continue };
                    let from = WaitNode::Input { node: n, port, vc };
                    let to = if let Some(owner) = r.switch.owner(rq.output) {
                        WaitNode::Input {
                            node: n,
                            port: owner.port,
                            vc: owner.vc,
                        }
                    } else if rq.flits > rq.free {
                        match rq.output.port {
                            PortId::Intra(q) => WaitNode::Eject {
                                node: n,
                                port: q,
                                vc: rq.output.vc,
                            },
                            PortId::Inter { .. } => WaitNode::Input {
                                node: r.neighbors[rq.output.port.index()],
                                port: rq.output.port,
                                vc: rq.output.vc,
                            },
                        }
                    } else {
                        continue;
                    };
                    edges.push((from, to));
                }
            }
            for port in 0..INTRA_PORTS {
                for vc in Vc::ALL {
                    let buf = &r.eject[port][vc.index()];
                    let Some((id, _)) = Self::complete_front(buf, &self.packets, c) else { continue };
                    let ch = self.packets[&id].packet.header.ch_id;
                    if self.nodes[n].ports[port].dispatcher.is_full(ch.index()) {
                        edges.push((
                            WaitNode::Eject {
                                node: n,
                                port: port as u8,
                                vc,
                            },
                            WaitNode::Fifo {
                                node: n,
                                port: port as u8,
                                ch: ch.get(),
                            },
                        ));
                    }
                }
            }
        }
        edges
    }

    pub fn describe(&self, w: WaitNode) -> String {
        match w {
            WaitNode::Input { node, port, vc } => {
                format!("node {} in {port} vc{vc}", self.topo.coord_of(node))
            }
            WaitNode::Eject { node, port, vc } => {
                format!("node {} eject P{port} vc{vc}", self.topo.coord_of(node))
            }
            WaitNode::Fifo { node, port, ch } => {
                format!("node {} P{port} fifo ch{ch}", self.topo.coord_of(node))
            }
        }
    }
}

/// First cycle found by following out-edges; every vertex of a wait-for
/// graph has at most one successor, so this is a walk per start vertex.
pub fn find_cycle<T: Copy + Eq + std::hash::Hash + Ord>(edges: &[(T, T)]) -> Option<Vec<T>> {
    let next: HashMap<T, T> = edges.iter().copied().collect();
    let mut starts: Vec<T> = next.keys().copied().collect();
    starts.sort();
    let mut done: HashSet<T> = HashSet::new();
    for s in starts {
        let mut path = Vec::new();
        let mut pos: HashMap<T, usize> = HashMap::new();
        let mut cur = s;
        loop {
            if done.contains(&cur) {
                break;
            }
            if let Some(&i) = pos.get(&cur) {
                return Some(path[i..].to_vec());
            }
            pos.insert(cur, path.len());
            path.push(cur);
            match next.get(&cur) {
                Some(&n) => cur = n,
                None => break,
            }
        }
        done.extend(path);
    }
    None
}

#[cfg(test)]
mod tests;
