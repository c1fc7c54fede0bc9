//! Synthetic traffic generators that drive an Aggregator directly.

use std::collections::VecDeque;

use apeiron_core::TorusCoord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fabric::{Fabric, SendFailure};
use crate::node::SendMeta;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledSend {
    pub cycle: u64,
    pub dest: TorusCoord,
    pub task: u8,
    pub ch: u8,
    pub words: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Traffic {
    /// Fixed sends, each offered from its cycle on.
    Schedule {
        node: usize,
        port: u8,
        entries: Vec<ScheduledSend>,
    },
    /// Bernoulli arrivals with uniform destinations, task ids and sizes.
    UniformRandom {
        node: usize,
        port: u8,
        /// Offered load in flits per cycle.
        rate: f64,
        min_words: u32,
        max_words: u32,
        packets: u64,
        seed: u64,
    },
}

impl Traffic {
    pub fn node(&self) -> usize {
        match self {
            Traffic::Schedule { node, .. } | Traffic::UniformRandom { node, .. } => *node,
        }
    }

    pub fn port(&self) -> u8 {
        match self {
            Traffic::Schedule { port, .. } | Traffic::UniformRandom { port, .. } => *port,
        }
    }

    /// One uniform-random generator on `port` of every node.
    pub fn uniform_everywhere(
        nodes: usize,
        port: u8,
        rate: f64,
        words: (u32, u32),
        packets_per_node: u64,
        seed: u64,
    ) -> Vec<Traffic> {
        (0..nodes)
            .map(|node| Traffic::UniformRandom {
                node,
                port,
                rate,
                min_words: words.0,
                max_words: words.1,
                packets: packets_per_node,
                seed: seed.wrapping_mul(0x100_0000_01b3).wrapping_add(node as u64),
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Source {
    pub spec: Traffic,
    rng: ChaCha8Rng,
    /// Generated but not yet accepted by the Aggregator.
    pending: VecDeque<(SendMeta, Vec<u32>)>,
    generated: u64,
    cursor: usize,
    pub rejected: u64,
    pub invalid: u64,
}

impl Source {
    pub fn new(spec: Traffic) -> Self {
        let seed = match &spec {
            Traffic::UniformRandom { seed, .. } => *seed,
            Traffic::Schedule { .. } => 0,
        };
        Source {
            spec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pending: VecDeque::new(),
            generated: 0,
            cursor: 0,
            rejected: 0,
            invalid: 0,
        }
    }

    pub fn drained(&self) -> bool {
        if !self.pending.is_empty() {
            return false;
        }
        match &self.spec {
            Traffic::Schedule { entries, .. } => self.cursor >= entries.len(),
            Traffic::UniformRandom { packets, .. } => self.generated >= *packets,
        }
    }

    fn generate(&mut self, fabric: &Fabric, cycle: u64) {
        match &self.spec {
            Traffic::Schedule { entries, .. } => {
                while let Some(e) = entries.get(self.cursor).filter(|e| e.cycle <= cycle) {
                    let meta = SendMeta {
                        dest_node: e.dest.clone(),
                        task_id: e.task,
                        ch_id: e.ch,
                        size: e.words.len(),
                    };
                    self.pending.push_back((meta, e.words.clone()));
                    self.cursor += 1;
                }
            }
            &Traffic::UniformRandom {
                node,
                rate,
                min_words,
                max_words,
                packets,
                ..
            } => {
                if self.generated >= packets {
                    return;
                }
                let mean_flits = f64::from(min_words + max_words) / 2.0 + 1.0;
                let p = (rate / mean_flits).clamp(0.0, 1.0);
                if !self.rng.gen_bool(p) {
                    return;
                }
                let n = fabric.node_count();
                let d = if n > 1 {
                    // uniform over the other nodes
                    let d = self.rng.gen_range(0..n - 1);
                    d + usize::from(d >= node)
                } else {
                    0
                };
                let words = self.rng.gen_range(min_words..=max_words) as usize;
                let data: Vec<u32> = (0..words).map(|_| self.rng.gen()).collect();
                let meta = SendMeta {
                    dest_node: fabric.topology().coord_of(d),
                    task_id: self.rng.gen_range(0..4),
                    ch_id: 0,
                    size: words,
                };
                self.pending.push_back((meta, data));
                self.generated += 1;
            }
        }
    }

    /// Generates this cycle's arrivals and offers the oldest pending send.
    pub fn tick(&mut self, fabric: &mut Fabric) {
        let cycle = fabric.cycle();
        self.generate(fabric, cycle);
        let Some((meta, words)) = self.pending.front() else { return };
        match fabric.send(self.spec.node(), self.spec.port(), meta, words) {
            Ok(_) => {
                self.pending.pop_front();
            }
            Err(SendFailure::Full) => self.rejected += 1,
            Err(SendFailure::Invalid(_)) => {
                self.invalid += 1;
                self.pending.pop_front();
            }
        }
    }
}
