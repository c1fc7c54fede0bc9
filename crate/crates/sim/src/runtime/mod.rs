//! Kahn-process-network runtime: tasks bound to IntraNode ports talk over
//! unbounded-in-spirit channels carried by the fabric. Sends never block;
//! receives block until a message is waiting.
//!
//! One simulated cycle runs, in order: traffic generators, due delayed
//! sends, up to `calls_per_cycle` steps of every runnable task, one fabric
//! cycle, the watchdog.

mod report;
mod task;
mod traffic;

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::fabric::{find_cycle, Fabric, TraceEvent};

pub use report::{ChannelDigest, DeadlockReport, LatencyStats, LinkReport, PortReport, RunReport, TaskReport};
pub use task::{
    source_word, Endpoint, KernelSpec, MapTask, MergeTask, SinkTask, SourceTask, TaskBehavior, TaskContext,
    TaskCounters, TaskFactory, TaskRegistry, TaskStep,
};
pub use traffic::{ScheduledSend, Traffic};

use task::Delayed;
use traffic::Source;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Ready,
    BlockedOnReceive(u8),
    Sleeping(u64),
    Done,
}

/// A kernel ready to be placed into a [`Simulation`].
pub struct TaskInstance {
    pub name: String,
    pub node: usize,
    pub port: u8,
    pub n_inputs: usize,
    pub outputs: Vec<Endpoint>,
    pub behavior: Box<dyn TaskBehavior>,
}

struct TaskSlot {
    name: String,
    node: usize,
    port: u8,
    n_inputs: usize,
    outputs: Vec<Endpoint>,
    behavior: Box<dyn TaskBehavior>,
    state: TaskState,
    delayed: VecDeque<Delayed>,
    counters: TaskCounters,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOptions {
    pub max_cycles: u64,
    /// Seeds arbiter pointers; traffic generators carry their own seeds.
    pub seed: u64,
    /// Step tasks in descending instead of ascending (node, port) order.
    pub reverse_order: bool,
    /// Check message conservation every this many cycles.
    pub conservation_every: Option<u64>,
    /// Cycles without any flit or task progress, while messages are
    /// pending, before declaring deadlock. `None` uses max-packet flits
    /// times the node count.
    pub watchdog: Option<u64>,
    /// Task steps (each at most one send or receive) per cycle.
    pub calls_per_cycle: u32,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_cycles: 1_000_000,
            seed: 0,
            reverse_order: false,
            conservation_every: None,
            watchdog: None,
            calls_per_cycle: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Quiescent,
    CycleLimit,
    Deadlock,
    Fault,
}

/// Message accounting: every accepted send is received, in flight, or
/// dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Conservation {
    pub sent: u64,
    /// Taken by a task, or absorbed by an unbound port.
    pub received: u64,
    /// In fabric buffers or waiting in a receive FIFO.
    pub in_flight: u64,
    pub dropped: u64,
}

impl Conservation {
    pub fn holds(&self) -> bool {
        self.sent == self.received + self.in_flight + self.dropped
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("task `{name}` on port {port} of node {node}: port has no binding of that name")]
    Unbound { name: String, node: String, port: u8 },
    #[error("traffic on port {port} of node {node} collides with task `{task}`")]
    PortBusy { node: String, port: u8, task: String },
    #[error("two tasks on port {port} of node {node}")]
    Duplicate { node: String, port: u8 },
}

type TraceSink = Box<dyn FnMut(&[TraceEvent])>;

pub struct Simulation {
    fabric: Fabric,
    tasks: Vec<TaskSlot>,
    sources: Vec<Source>,
    opts: SimOptions,
    trace: Option<TraceSink>,
    last_activity: u64,
    conservation_checks: u64,
    conservation_violations: u64,
    fault: Option<String>,
    deadlock: Option<DeadlockReport>,
}

impl Simulation {
    pub fn new(
        mut fabric: Fabric,
        tasks: Vec<TaskInstance>,
        traffic: Vec<Traffic>,
        opts: SimOptions,
    ) -> Result<Self, SimError> {
        let coord = |f: &Fabric, n: usize| f.topology().coord_of(n).to_string();
        let mut slots: Vec<TaskSlot> = Vec::with_capacity(tasks.len());
        for t in tasks {
            if fabric.node(t.node).ports[usize::from(t.port)].binding.as_deref() != Some(t.name.as_str()) {
                return Err(SimError::Unbound {
                    name: t.name,
                    node: coord(&fabric, t.node),
                    port: t.port,
                });
            }
            if slots.iter().any(|s| s.node == t.node && s.port == t.port) {
                return Err(SimError::Duplicate {
                    node: coord(&fabric, t.node),
                    port: t.port,
                });
            }
            slots.push(TaskSlot {
                name: t.name,
                node: t.node,
                port: t.port,
                n_inputs: t.n_inputs,
                outputs: t.outputs,
                behavior: t.behavior,
                state: TaskState::Ready,
                delayed: VecDeque::new(),
                counters: TaskCounters::default(),
            });
        }
        slots.sort_by_key(|s| (s.node, s.port));
        if opts.reverse_order {
            slots.reverse();
        }
        for tr in &traffic {
            if let Some(s) = slots.iter().find(|s| s.node == tr.node() && s.port == tr.port()) {
                return Err(SimError::PortBusy {
                    node: coord(&fabric, tr.node()),
                    port: tr.port(),
                    task: s.name.clone(),
                });
            }
        }
        fabric.randomize_arbiters(opts.seed);
        Ok(Simulation {
            fabric,
            tasks: slots,
            sources: traffic.into_iter().map(Source::new).collect(),
            opts,
            trace: None,
            last_activity: 0,
            conservation_checks: 0,
            conservation_violations: 0,
            fault: None,
            deadlock: None,
        })
    }

    pub fn fabric(&self) -> &Fabric {
        &self.fabric
    }

    pub fn fabric_mut(&mut self) -> &mut Fabric {
        &mut self.fabric
    }

    pub fn cycle(&self) -> u64 {
        self.fabric.cycle()
    }

    /// Receives every cycle's trace events.
    pub fn set_trace(&mut self, sink: impl FnMut(&[TraceEvent]) + 'static) {
        self.trace = Some(Box::new(sink));
    }

    pub fn task_state(&self, name: &str) -> Option<TaskState> {
        self.tasks.iter().find(|t| t.name == name).map(|t| t.state)
    }

    pub fn task_counters(&self, name: &str) -> Option<&TaskCounters> {
        self.tasks.iter().find(|t| t.name == name).map(|t| &t.counters)
    }

    pub fn conservation(&self) -> Conservation {
        let taken: u64 = self.tasks.iter().map(|t| t.counters.received_messages).sum();
        Conservation {
            sent: self.fabric.injected(),
            received: taken + self.fabric.sink_deliveries(),
            in_flight: (self.fabric.packets_in_buffers() + self.fabric.queued_messages()) as u64,
            dropped: self.fabric.dropped(),
        }
    }

    /// Nothing left that could ever make progress.
    pub fn is_quiescent(&self) -> bool {
        self.sources.iter().all(Source::drained)
            && self.fabric.is_empty()
            && self.tasks.iter().all(|t| {
                t.delayed.is_empty()
                    && match t.state {
                        TaskState::Done => true,
                        TaskState::BlockedOnReceive(ch) => self.fabric.fifo_len(t.node, t.port, usize::from(ch)) == 0,
                        TaskState::Ready | TaskState::Sleeping(_) => false,
                    }
            })
    }

    fn watchdog_limit(&self) -> u64 {
        self.opts
            .watchdog
            .unwrap_or((self.fabric.params().max_packet_flits() * self.fabric.node_count()) as u64)
    }

    /// Runs one cycle.
    pub fn step(&mut self) {
        let c = self.fabric.cycle();
        for s in &mut self.sources {
            s.tick(&mut self.fabric);
        }
        for t in &mut self.tasks {
            if let Some(d) = t.delayed.front() {
                if d.due <= c {
                    let d = t.delayed.front().expect("checked");
                    let meta = crate::node::SendMeta {
                        dest_node: d.to.coord.clone(),
                        task_id: d.to.port,
                        ch_id: d.to.ch,
                        size: d.words.len(),
                    };
                    match self.fabric.send(t.node, t.port, &meta, &d.words) {
                        Ok(_) => {
                            t.delayed.pop_front();
                            t.counters.sent_messages += 1;
                        }
                        Err(crate::fabric::SendFailure::Full) => t.counters.rejected_sends += 1,
                        Err(crate::fabric::SendFailure::Invalid(e)) => {
                            self.fault = Some(format!("task `{}`: delayed send failed: {e}", t.name));
                            t.delayed.pop_front();
                        }
                    }
                }
            }
        }
        for t in &mut self.tasks {
            for _ in 0..self.opts.calls_per_cycle.max(1) {
                match t.state {
                    TaskState::Done => break,
                    TaskState::Sleeping(until) if until > c => break,
                    TaskState::BlockedOnReceive(ch) if self.fabric.fifo_len(t.node, t.port, usize::from(ch)) == 0 => {
                        t.counters.blocked_cycles += 1;
                        break;
                    }
                    _ => {}
                }
                let mut ctx = TaskContext {
                    fabric: &mut self.fabric,
                    node: t.node,
                    port: t.port,
                    outputs: &t.outputs,
                    n_inputs: t.n_inputs,
                    delayed: &mut t.delayed,
                    counters: &mut t.counters,
                    blocked_on: None,
                    fault: None,
                    active: false,
                    calls: 0,
                };
                let next = t.behavior.step(&mut ctx);
                let (blocked_on, mut fault, active, calls) = (ctx.blocked_on, ctx.fault, ctx.active, ctx.calls);
                t.counters.steps += 1;
                if calls > 1 {
                    fault.get_or_insert(format!("{calls} send/receive calls in one step"));
                }
                if active {
                    self.last_activity = c;
                }
                if let Some(f) = fault {
                    self.fault = Some(format!("task `{}`: {f}", t.name));
                }
                t.state = match (next, blocked_on) {
                    (TaskStep::Done, _) => TaskState::Done,
                    (_, Some(ch)) => TaskState::BlockedOnReceive(ch),
                    (TaskStep::SleepUntil(u), None) => TaskState::Sleeping(u),
                    (TaskStep::Continue, None) => TaskState::Ready,
                };
                // a step that neither sent nor received yields the cycle
                if calls == 0 || blocked_on.is_some() {
                    break;
                }
            }
        }

        let events = self.fabric.step_cycle();
        if let Some(tr) = self.trace.as_mut() {
            tr(events);
        }
        self.fabric.clear_events();

        if let Some(every) = self.opts.conservation_every {
            if every > 0 && self.fabric.cycle().is_multiple_of(every) {
                self.conservation_checks += 1;
                if !self.conservation().holds() {
                    self.conservation_violations += 1;
                }
            }
        }
        let progress = self.fabric.last_progress().max(self.last_activity);
        let now = self.fabric.cycle();
        if self.deadlock.is_none()
            && !(self.fabric.is_empty() && self.fabric.queued_messages() == 0)
            && now - progress > self.watchdog_limit()
        {
            self.deadlock = Some(self.deadlock_report());
        }
    }

    fn deadlock_report(&self) -> DeadlockReport {
        let edges = self.fabric.wait_edges();
        let wait_cycle = find_cycle(&edges)
            .map(|c| c.into_iter().map(|w| self.fabric.describe(w)).collect())
            .unwrap_or_default();
        DeadlockReport {
            detected_at: self.fabric.cycle(),
            last_progress: self.fabric.last_progress().max(self.last_activity),
            packets_stuck: self.fabric.packets_in_buffers() as u64,
            blocked_buffers: edges.len() as u64,
            wait_cycle,
            blocked_tasks: self
                .tasks
                .iter()
                .filter_map(|t| match t.state {
                    TaskState::BlockedOnReceive(ch) => Some(format!("{} on ch{ch}", t.name)),
                    _ => None,
                })
                .collect(),
        }
    }

    /// Steps until quiescence, deadlock, a fault, or the cycle limit.
    pub fn run(&mut self) -> RunReport {
        let outcome = loop {
            if self.fault.is_some() {
                break Outcome::Fault;
            }
            if self.deadlock.is_some() {
                break Outcome::Deadlock;
            }
            if self.is_quiescent() {
                break Outcome::Quiescent;
            }
            if self.fabric.cycle() >= self.opts.max_cycles {
                break Outcome::CycleLimit;
            }
            self.step();
        };
        self.report(outcome)
    }

    pub fn report(&self, outcome: Outcome) -> RunReport {
        let f = &self.fabric;
        let topo = f.topology();
        let cycles = f.cycle();
        let delivered: Vec<_> = f.records().iter().filter(|r| !r.dropped).collect();
        let latency = LatencyStats::from_samples(delivered.iter().map(|r| r.deliver_cycle - r.inject_cycle));
        let hops = LatencyStats::from_samples(delivered.iter().map(|r| u64::from(r.hops)));
        let links = f
            .link_flits()
            .into_iter()
            .filter(|(_, p, _)| p.is_inter())
            .map(|(n, port, flits)| LinkReport {
                node: topo.coord_of(n).to_string(),
                port: port.to_string(),
                to: topo.coord_of(f.neighbor(n, port)).to_string(),
                flits,
                utilization: if cycles == 0 { 0.0 } else { flits as f64 / cycles as f64 },
            })
            .collect();
        let mut ports = Vec::new();
        let mut channel_digests = BTreeMap::new();
        for n in 0..f.node_count() {
            let node = f.node(n);
            for p in &node.ports {
                let status = p.status.clone();
                if p.binding.is_some() || status != Default::default() {
                    ports.push(PortReport {
                        node: node.coord.to_string(),
                        port: p.index,
                        binding: p.binding.clone(),
                        status,
                    });
                }
                for (ch, messages, sha256) in p.dispatcher.channel_digests() {
                    channel_digests.insert(
                        format!("{}/P{}/ch{ch}", node.coord, p.index),
                        ChannelDigest { messages, sha256 },
                    );
                }
            }
        }
        let tasks = self
            .tasks
            .iter()
            .map(|t| TaskReport {
                name: t.name.clone(),
                node: topo.coord_of(t.node).to_string(),
                port: t.port,
                state: t.state,
                counters: t.counters.clone(),
            })
            .collect();
        let conservation = self.conservation();
        RunReport {
            outcome,
            cycles,
            seed: self.opts.seed,
            injected: f.injected(),
            delivered: delivered.len() as u64,
            dropped: f.dropped(),
            conservation,
            conservation_holds: conservation.holds(),
            conservation_checks: self.conservation_checks,
            conservation_violations: self.conservation_violations,
            source_rejections: self.sources.iter().map(|s| s.rejected).sum(),
            source_invalid: self.sources.iter().map(|s| s.invalid).sum(),
            latency,
            hops,
            links,
            ports,
            tasks,
            channel_digests,
            packets: f.records().to_vec(),
            deadlock: self.deadlock.clone(),
            fault: self.fault.clone(),
        }
    }
}
