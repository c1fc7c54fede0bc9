//! Runs a batch of events through the classifier on a two-node ring:
//! a readout kernel and a collector on node 0, the classifier on node 1.

use std::cell::RefCell;
use std::rc::Rc;

use apeiron_core::{Topology, TorusCoord};
use apeiron_sim::fabric::{Fabric, FabricParams, PortBinding};
use apeiron_sim::runtime::{
    Endpoint, Outcome, RunReport, SimOptions, Simulation, TaskBehavior, TaskContext, TaskInstance, TaskStep,
};

use crate::event::{unpack_result, EventInput};
use crate::model::{DenseModel, Inference};
use crate::task::NnTask;
use crate::timing::PipelineTiming;

struct ListSource {
    messages: Vec<Vec<u32>>,
    interval: u64,
    next: usize,
    next_at: u64,
}

impl TaskBehavior for ListSource {
    fn step(&mut self, ctx: &mut TaskContext<'_>) -> TaskStep {
        if self.next >= self.messages.len() {
            return TaskStep::Done;
        }
        if ctx.cycle() < self.next_at {
            return TaskStep::SleepUntil(self.next_at);
        }
        if ctx.send_to(0, &self.messages[self.next]) > 0 {
            self.next += 1;
            self.next_at = ctx.cycle() + self.interval;
        }
        TaskStep::Continue
    }
}

type Log = Rc<RefCell<Vec<(u64, Vec<u32>)>>>;

struct Collector(Log);

impl TaskBehavior for Collector {
    fn step(&mut self, ctx: &mut TaskContext<'_>) -> TaskStep {
        if let Some(w) = ctx.receive(0) {
            self.0.borrow_mut().push((ctx.cycle(), w));
        }
        TaskStep::Continue
    }
}

#[derive(Debug)]
pub struct PipelineRun {
    /// Cycle each result was taken by the collector, and the result.
    pub results: Vec<(u64, Inference)>,
    pub report: RunReport,
}

impl PipelineRun {
    /// Gaps between consecutive results.
    pub fn intervals(&self) -> Vec<u64> {
        self.results.windows(2).map(|w| w[1].0 - w[0].0).collect()
    }
}

/// Feeds `events` to one classifier, a new event offered every
/// `source_interval` cycles.
pub fn run_pipeline(
    model: DenseModel,
    timing: &PipelineTiming,
    events: &[EventInput],
    source_interval: u64,
) -> PipelineRun {
    let topo = Topology::new(vec![2]).expect("two-node ring");
    let bindings = [
        PortBinding {
            coord: TorusCoord::new(vec![0]),
            port: 0,
            name: "readout".into(),
            in_channels: 1,
        },
        PortBinding {
            coord: TorusCoord::new(vec![0]),
            port: 1,
            name: "collector".into(),
            in_channels: 1,
        },
        PortBinding {
            coord: TorusCoord::new(vec![1]),
            port: 0,
            name: "nn".into(),
            in_channels: 1,
        },
    ];
    // an event is at most 32 words
    let fabric = Fabric::new(topo, FabricParams::with_max_payload(32), &bindings).expect("valid fabric");
    let to = |node: u32, port: u8| Endpoint {
        coord: TorusCoord::new(vec![node]),
        port,
        ch: 0,
    };
    let classes = model.output_width();
    let log: Log = Rc::default();
    let tasks = vec![
        TaskInstance {
            name: "readout".into(),
            node: 0,
            port: 0,
            n_inputs: 1,
            outputs: vec![to(1, 0)],
            behavior: Box::new(ListSource {
                messages: events.iter().map(EventInput::pack).collect(),
                interval: source_interval.max(1),
                next: 0,
                next_at: 0,
            }),
        },
        TaskInstance {
            name: "collector".into(),
            node: 0,
            port: 1,
            n_inputs: 1,
            outputs: vec![],
            behavior: Box::new(Collector(log.clone())),
        },
        TaskInstance {
            name: "nn".into(),
            node: 1,
            port: 0,
            n_inputs: 1,
            outputs: vec![to(0, 1)],
            behavior: Box::new(NnTask::new(Rc::new(model), timing)),
        },
    ];
    let report = Simulation::new(fabric, tasks, Vec::new(), SimOptions::default())
        .expect("bindings match")
        .run();
    debug_assert!(report.outcome == Outcome::Quiescent || events.is_empty());
    let results = log
        .borrow()
        .iter()
        .map(|(c, w)| (*c, unpack_result(w, classes).expect("well-formed result")))
        .collect();
    PipelineRun { results, report }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::synthetic_event;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn results_arrive_every_initiation_interval_in_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = DenseModel::random(&DenseModel::reference_sizes(), 32, &mut rng);
        // 12 hits pack into 6 words, 7 flits: the link keeps up with II = 8
        let events: Vec<EventInput> = (0..40)
            .map(|k| EventInput::from_pmt_ids(&synthetic_event(1, k, 12, 2048), 2048).unwrap())
            .collect();
        let run = run_pipeline(model.clone(), &PipelineTiming::default(), &events, 4);
        assert_eq!(run.report.outcome, Outcome::Quiescent);
        assert_eq!(run.results.len(), 40);
        for (e, (_, r)) in events.iter().zip(&run.results) {
            assert_eq!(*r, model.infer(e.hits()));
        }
        assert!(run.intervals().iter().all(|&g| g == 8), "{:?}", run.intervals());
    }

    #[test]
    fn wide_events_are_limited_by_the_link() {
        // 64 hits = 32 words = 33 flits at one flit per cycle
        let model = DenseModel::zeros(&DenseModel::reference_sizes());
        let ids: Vec<u32> = (0..64).collect();
        let events = vec![EventInput::from_pmt_ids(&ids, 2048).unwrap(); 10];
        let run = run_pipeline(model, &PipelineTiming::default(), &events, 1);
        assert!(run.intervals().iter().all(|&g| g == 33), "{:?}", run.intervals());
    }

    #[test]
    fn slow_readout_sets_the_pace() {
        let model = DenseModel::zeros(&DenseModel::reference_sizes());
        let events = vec![EventInput::from_pmt_ids(&[1, 2, 3], 2048).unwrap(); 10];
        let run = run_pipeline(model, &PipelineTiming::default(), &events, 20);
        assert!(run.intervals().iter().all(|&g| g == 20), "{:?}", run.intervals());
        assert!(run.results.iter().all(|(_, r)| r.class == 0));
    }
}
