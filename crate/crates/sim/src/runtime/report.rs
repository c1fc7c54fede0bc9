use std::collections::BTreeMap;

use serde::Serialize;

use super::{Conservation, Outcome, TaskCounters, TaskState};
use crate::fabric::PacketRecord;
use crate::node::PortStatus;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LatencyStats {
    pub count: u64,
    pub min: u64,
    pub max: u64,
    pub mean: f64,
    pub p50: u64,
    pub p99: u64,
}

impl LatencyStats {
    /// Nearest-rank percentiles.
    pub fn from_samples(samples: impl Iterator<Item = u64>) -> Self {
        let mut v: Vec<u64> = samples.collect();
        if v.is_empty() {
            return Self::default();
        }
        v.sort_unstable();
        let rank = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        LatencyStats {
            count: v.len() as u64,
            min: v[0],
            max: v[v.len() - 1],
            mean: v.iter().sum::<u64>() as f64 / v.len() as f64,
            p50: rank(0.50),
            p99: rank(0.99),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkReport {
    pub node: String,
    pub port: String,
    pub to: String,
    pub flits: u64,
    /// Flits per cycle.
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PortReport {
    pub node: String,
    pub port: u8,
    pub binding: Option<String>,
    #[serde(flatten)]
    pub status: PortStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub name: String,
    pub node: String,
    pub port: u8,
    pub state: TaskState,
    #[serde(flatten)]
    pub counters: TaskCounters,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChannelDigest {
    pub messages: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeadlockReport {
    pub detected_at: u64,
    pub last_progress: u64,
    pub packets_stuck: u64,
    pub blocked_buffers: u64,
    /// Buffers forming a circular wait, empty if none was found.
    pub wait_cycle: Vec<String>,
    pub blocked_tasks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub outcome: Outcome,
    pub cycles: u64,
    pub seed: u64,
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub conservation: Conservation,
    pub conservation_holds: bool,
    pub conservation_checks: u64,
    pub conservation_violations: u64,
    pub source_rejections: u64,
    pub source_invalid: u64,
    pub latency: LatencyStats,
    pub hops: LatencyStats,
    pub links: Vec<LinkReport>,
    pub ports: Vec<PortReport>,
    pub tasks: Vec<TaskReport>,
    /// Keyed `node/Pport/chN`.
    pub channel_digests: BTreeMap<String, ChannelDigest>,
    /// One record per delivered or dropped packet, in delivery order.
    pub packets: Vec<PacketRecord>,
    pub deadlock: Option<DeadlockReport>,
    pub fault: Option<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "outcome {:?} after {} cycles: {} injected, {} delivered, {} dropped",
            self.outcome, self.cycles, self.injected, self.delivered, self.dropped
        );
        if self.latency.count > 0 {
            s += &format!(
                "\nlatency min {} mean {:.2} p99 {} max {} cycles",
                self.latency.min, self.latency.mean, self.latency.p99, self.latency.max
            );
        }
        if let Some(d) = &self.deadlock {
            s += &format!("\ndeadlock at cycle {} ({} packets stuck)", d.detected_at, d.packets_stuck);
            if !d.wait_cycle.is_empty() {
                s += &format!("\nwait-for cycle: {}", d.wait_cycle.join(" -> "));
            }
        }
        if let Some(f) = &self.fault {
            s += &format!("\nfault: {f}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let s = LatencyStats::from_samples(1..=100);
        assert_eq!((s.min, s.max, s.p50, s.p99), (1, 100, 50, 99));
        assert_eq!(s.mean, 50.5);
        let one = LatencyStats::from_samples([7].into_iter());
        assert_eq!((one.p50, one.p99), (7, 7));
        assert_eq!(LatencyStats::from_samples(std::iter::empty()).count, 0);
    }
}
