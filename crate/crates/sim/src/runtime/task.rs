//! Task-side programming interface and the built-in kernels.

use std::collections::{BTreeMap, VecDeque};

use apeiron_core::TorusCoord;
use serde::Serialize;

use crate::fabric::Fabric;
use crate::node::SendMeta;

/// Where an output edge of a task lands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Endpoint {
    pub coord: TorusCoord,
    /// IntraNode port of the consumer, which is also its task id.
    pub port: u8,
    pub ch: u8,
}

/// What a task wants after one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskStep {
    Continue,
    Done,
    /// Do not step again before this cycle.
    SleepUntil(u64),
}

/// A kernel body. Each call to `step` may make at most one `send` or
/// `receive`; a `receive` that finds its FIFO empty blocks the task until a
/// message arrives, after which `step` is called again from the top.
/// `send_after` is not counted as a call.
pub trait TaskBehavior {
    fn step(&mut self, ctx: &mut TaskContext<'_>) -> TaskStep;
}

#[derive(Debug, Clone)]
pub(crate) struct Delayed {
    pub due: u64,
    pub to: Endpoint,
    pub words: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TaskCounters {
    pub steps: u64,
    pub blocked_cycles: u64,
    pub sent_messages: u64,
    pub received_messages: u64,
    pub rejected_sends: u64,
}

/// View of the world handed to a task for one step.
pub struct TaskContext<'a> {
    pub(crate) fabric: &'a mut Fabric,
    pub(crate) node: usize,
    pub(crate) port: u8,
    pub(crate) outputs: &'a [Endpoint],
    pub(crate) n_inputs: usize,
    pub(crate) delayed: &'a mut VecDeque<Delayed>,
    pub(crate) counters: &'a mut TaskCounters,
    pub(crate) blocked_on: Option<u8>,
    pub(crate) fault: Option<String>,
    pub(crate) active: bool,
    /// send/receive calls made during this step.
    pub(crate) calls: u32,
}

impl TaskContext<'_> {
    pub fn cycle(&self) -> u64 {
        self.fabric.cycle()
    }

    pub fn coord(&self) -> &TorusCoord {
        &self.fabric.node(self.node).coord
    }

    pub fn port(&self) -> u8 {
        self.port
    }

    /// Output edges in declaration order.
    pub fn outputs(&self) -> &[Endpoint] {
        self.outputs
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    /// Non-blocking send of one message. Returns the number of words
    /// accepted: all of them, or 0 if the injection buffer is busy or the
    /// send is malformed.
    pub fn send(&mut self, words: &[u32], dest: &TorusCoord, task: u8, ch: u8) -> usize {
        self.calls += 1;
        let meta = SendMeta {
            dest_node: dest.clone(),
            task_id: task,
            ch_id: ch,
            size: words.len(),
        };
        match self.fabric.send(self.node, self.port, &meta, words) {
            Ok(_) => {
                self.counters.sent_messages += 1;
                self.active = true;
                words.len()
            }
            Err(_) => {
                self.counters.rejected_sends += 1;
                0
            }
        }
    }

    /// [`TaskContext::send`] to output edge `i`.
    pub fn send_to(&mut self, i: usize, words: &[u32]) -> usize {
        let e = self.outputs[i].clone();
        self.send(words, &e.coord, e.port, e.ch)
    }

    /// Queues `words` for output edge `i`, to be staged `delay` cycles from
    /// now (or as soon after as the injection buffer allows).
    pub fn send_after(&mut self, delay: u64, i: usize, words: Vec<u32>) {
        let due = self.cycle() + delay;
        self.delayed.push_back(Delayed {
            due,
            to: self.outputs[i].clone(),
            words,
        });
        self.active = true;
    }

    /// Blocking receive on input channel `ch`. `None` means the task is now
    /// blocked; it should return from `step` and will be stepped again once
    /// a message is waiting.
    pub fn receive(&mut self, ch: u8) -> Option<Vec<u32>> {
        self.calls += 1;
        if usize::from(ch) >= self.n_inputs {
            self.fault = Some(format!("receive on ch {ch}, task has {} input channels", self.n_inputs));
            return None;
        }
        match self.fabric.receive(self.node, self.port, usize::from(ch)) {
            Some(m) => {
                self.counters.received_messages += 1;
                self.active = true;
                Some(m.words)
            }
            None => {
                self.blocked_on = Some(ch);
                None
            }
        }
    }
}

/// Everything a factory needs to build one kernel instance.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub name: String,
    pub behavior: String,
    pub coord: TorusCoord,
    pub port: u8,
    pub in_channels: usize,
    pub out_channels: usize,
    pub params: serde_json::Value,
}

pub type TaskFactory = Box<dyn Fn(&KernelSpec) -> Result<Box<dyn TaskBehavior>, String>>;

/// Maps kernel behaviour names to constructors.
pub struct TaskRegistry {
    factories: BTreeMap<String, TaskFactory>,
}

impl Default for TaskRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl TaskRegistry {
    pub fn empty() -> Self {
        TaskRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// `source`, `map`, `merge` and `sink`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("source", |k| Ok(Box::new(SourceTask::from_spec(k)?)));
        r.register("map", |k| Ok(Box::new(MapTask::from_spec(k)?)));
        r.register("merge", |k| Ok(Box::new(MergeTask::from_spec(k)?)));
        r.register("sink", |k| Ok(Box::new(SinkTask::from_spec(k))));
        r
    }

    pub fn register(
        &mut self,
        name: &str,
        f: impl Fn(&KernelSpec) -> Result<Box<dyn TaskBehavior>, String> + 'static,
    ) {
        self.factories.insert(name.to_string(), Box::new(f));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &KernelSpec) -> Result<Box<dyn TaskBehavior>, String> {
        let f = self
            .factories
            .get(&spec.behavior)
            .ok_or_else(|| format!("unknown kernel behaviour `{}`", spec.behavior))?;
        f(spec)
    }
}

fn param_u64(spec: &KernelSpec, key: &str, default: u64) -> Result<u64, String> {
    match spec.params.get(key) {
        None | Some(serde_json::Value::Null) => Ok(default),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| format!("kernel `{}`: param `{key}` must be a non-negative integer", spec.name)),
    }
}

/// Deterministic payload of message `k` from a named producer.
pub fn source_word(seed: u64, k: u64, j: u64) -> u32 {
    let mut x = seed ^ (k << 20) ^ j;
    // splitmix64 finaliser
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    (x ^ (x >> 31)) as u32
}

/// Emits `messages` messages of `words` words on every output edge, then
/// finishes.
pub struct SourceTask {
    messages: u64,
    words: u64,
    seed: u64,
    next: u64,
    out: usize,
}

impl SourceTask {
    pub fn from_spec(k: &KernelSpec) -> Result<Self, String> {
        let words = param_u64(k, "words", 4)?;
        if words == 0 {
            return Err(format!("kernel `{}`: `words` must be at least 1", k.name));
        }
        Ok(SourceTask {
            messages: param_u64(k, "messages", 16)?,
            words,
            seed: param_u64(k, "seed", 0)?,
            next: 0,
            out: 0,
        })
    }
}

impl TaskBehavior for SourceTask {
    fn step(&mut self, ctx: &mut TaskContext<'_>) -> TaskStep {
        let outs = ctx.outputs().len();
        if outs == 0 || self.next >= self.messages {
            return TaskStep::Done;
        }
        let msg: Vec<u32> = (0..self.words).map(|j| source_word(self.seed, self.next, j)).collect();
        if ctx.send_to(self.out, &msg) > 0 {
            self.out += 1;
            if self.out == outs {
                self.out = 0;
                self.next += 1;
            }
        }
        if self.next >= self.messages {
            TaskStep::Done
        } else {
            TaskStep::Continue
        }
    }
}

/// Sends one queued message per step, oldest first, to every output.
#[derive(Default)]
struct Fanout {
    queue: VecDeque<(usize, Vec<u32>)>,
}

impl Fanout {
    fn push_all(&mut self, outs: usize, msg: Vec<u32>) {
        for i in 0..outs {
            self.queue.push_back((i, msg.clone()));
        }
    }

    /// True if the step was spent on a send attempt.
    fn drain_one(&mut self, ctx: &mut TaskContext<'_>) -> bool {
        let Some((i, msg)) = self.queue.front() else { return false };
        if ctx.send_to(*i, msg) > 0 {
            self.queue.pop_front();
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MapOp {
    Add(u32),
    Xor(u32),
    Mul(u32),
}

/// Reads its inputs in channel order, transforms every word, and forwards
/// the result to all outputs.
pub struct MapTask {
    op: MapOp,
    ch: u8,
    fanout: Fanout,
}

impl MapTask {
    pub fn from_spec(k: &KernelSpec) -> Result<Self, String> {
        let value = param_u64(k, "value", 1)? as u32;
        let op = match k.params.get("op").and_then(|v| v.as_str()).unwrap_or("add") {
            "add" => MapOp::Add(value),
            "xor" => MapOp::Xor(value),
            "mul" => MapOp::Mul(value),
            other => return Err(format!("kernel `{}`: unknown op `{other}`", k.name)),
        };
        Ok(MapTask {
            op,
            ch: 0,
            fanout: Fanout::default(),
        })
    }
}

impl TaskBehavior for MapTask {
    fn step(&mut self, ctx: &mut TaskContext<'_>) -> TaskStep {
        if self.fanout.drain_one(ctx) {
            return TaskStep::Continue;
        }
        let Some(msg) = ctx.receive(self.ch) else { return TaskStep::Continue };
        let out: Vec<u32> = msg
            .into_iter()
            .map(|w| match self.op {
                MapOp::Add(v) => w.wrapping_add(v),
                MapOp::Xor(v) => w ^ v,
                MapOp::Mul(v) => w.wrapping_mul(v),
            })
            .collect();
        self.fanout.push_all(ctx.outputs().len(), out);
        self.ch = ((usize::from(self.ch) + 1) % ctx.n_inputs()) as u8;
        TaskStep::Continue
    }
}

/// Takes one message from each input, in channel order, and forwards their
/// element-wise wrapping sum.
pub struct MergeTask {
    ch: u8,
    acc: Vec<u32>,
    fanout: Fanout,
}

impl MergeTask {
    pub fn from_spec(k: &KernelSpec) -> Result<Self, String> {
        if k.in_channels == 0 {
            return Err(format!("kernel `{}`: merge needs at least one input", k.name));
        }
        Ok(MergeTask {
            ch: 0,
            acc: Vec::new(),
            fanout: Fanout::default(),
        })
    }
}

impl TaskBehavior for MergeTask {
    fn step(&mut self, ctx: &mut TaskContext<'_>) -> TaskStep {
        if self.fanout.drain_one(ctx) {
            return TaskStep::Continue;
        }
        let Some(msg) = ctx.receive(self.ch) else { return TaskStep::Continue };
        if self.acc.len() < msg.len() {
            self.acc.resize(msg.len(), 0);
        }
        for (a, w) in self.acc.iter_mut().zip(msg) {
            *a = a.wrapping_add(w);
        }
        self.ch += 1;
        if usize::from(self.ch) == ctx.n_inputs() {
            self.ch = 0;
            let out = std::mem::take(&mut self.acc);
            self.fanout.push_all(ctx.outputs().len(), out);
        }
        TaskStep::Continue
    }
}

/// Consumes everything, channel by channel in order.
pub struct SinkTask {
    ch: u8,
}

impl SinkTask {
    pub fn from_spec(_k: &KernelSpec) -> Self {
        SinkTask { ch: 0 }
    }
}

impl TaskBehavior for SinkTask {
    fn step(&mut self, ctx: &mut TaskContext<'_>) -> TaskStep {
        if ctx.n_inputs() == 0 {
            return TaskStep::Done;
        }
        if ctx.receive(self.ch).is_some() {
            self.ch = ((usize::from(self.ch) + 1) % ctx.n_inputs()) as u8;
        }
        TaskStep::Continue
    }
}
