//! The classifier and a synthetic event source as runtime kernels.

use std::path::{Path, PathBuf};
use std::rc::Rc;

use apeiron_sim::runtime::{KernelSpec, TaskBehavior, TaskContext, TaskRegistry, TaskStep};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::event::{pack_result, random_event, EventInput, DEFAULT_PMTS};
use crate::model::DenseModel;
use crate::timing::PipelineTiming;

fn param_u64(spec: &KernelSpec, key: &str, default: u64) -> Result<u64, String> {
    match spec.params.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| format!("kernel `{}`: param `{key}` must be a non-negative integer", spec.name)),
    }
}

/// Classifies every message on ch 0. Accepts one event per initiation
/// interval and stages the 3-word result `depth` cycles after accepting
/// it, on every output edge.
pub struct NnTask {
    model: Rc<DenseModel>,
    ii: u64,
    depth: u64,
    classified: u64,
}

impl NnTask {
    pub fn new(model: Rc<DenseModel>, timing: &PipelineTiming) -> Self {
        NnTask {
            model,
            ii: timing.initiation_interval(),
            depth: timing.depth(),
            classified: 0,
        }
    }

    /// Params: `params_file` (JSON, relative to `base`) or `seed` plus
    /// optional `weight_scale` for a random model; `ii` and `depth` in
    /// cycles.
    pub fn from_spec(spec: &KernelSpec, base: &Path) -> Result<Self, String> {
        let model = match spec.params.get("params_file") {
            Some(Value::String(p)) => {
                let path = base.join(p);
                DenseModel::load(&path).map_err(|e| format!("kernel `{}`: {e}", spec.name))?
            }
            Some(_) => return Err(format!("kernel `{}`: param `params_file` must be a path", spec.name)),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(param_u64(spec, "seed", 0)?);
                let scale = param_u64(spec, "weight_scale", 32)?.min(127) as i64;
                DenseModel::random(&DenseModel::reference_sizes(), scale, &mut rng)
            }
        };
        let timing = PipelineTiming::new(
            PipelineTiming::DEFAULT_CLOCK_HZ,
            param_u64(spec, "ii", PipelineTiming::DEFAULT_II)?,
            param_u64(spec, "depth", PipelineTiming::DEFAULT_DEPTH)?,
        )
        .map_err(|e| format!("kernel `{}`: {e}", spec.name))?;
        Ok(Self::new(Rc::new(model), &timing))
    }

    pub fn classified(&self) -> u64 {
        self.classified
    }
}

impl TaskBehavior for NnTask {
    fn step(&mut self, ctx: &mut TaskContext<'_>) -> TaskStep {
        let Some(words) = ctx.receive(0) else {
            return TaskStep::Continue;
        };
        let mut x = EventInput::unpack(&words);
        x.truncate(self.model.input_width());
        let msg = pack_result(&self.model.infer(&x));
        for i in 0..ctx.outputs().len() {
            ctx.send_after(self.depth, i, msg.clone());
        }
        self.classified += 1;
        TaskStep::SleepUntil(ctx.cycle() + self.ii)
    }
}

/// Hit PMT IDs of synthetic event `k`; the same for every caller.
pub fn synthetic_event(seed: u64, k: u64, max_hits: usize, n_pmts: u32) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    random_event(&mut rng, max_hits, n_pmts)
}

/// Emits `events` packed synthetic events on every output, starting a new
/// one at most every `interval` cycles.
pub struct PmtEventsTask {
    events: u64,
    max_hits: usize,
    n_pmts: u32,
    seed: u64,
    interval: u64,
    next: u64,
    out: usize,
    next_at: u64,
    current: Option<Vec<u32>>,
}

impl PmtEventsTask {
    pub fn from_spec(spec: &KernelSpec) -> Result<Self, String> {
        let n_pmts = param_u64(spec, "n_pmts", u64::from(DEFAULT_PMTS))?;
        let n_pmts = u32::try_from(n_pmts)
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| format!("kernel `{}`: `n_pmts` must be 1-{}", spec.name, u32::MAX))?;
        let interval = param_u64(spec, "interval", PipelineTiming::DEFAULT_II)?;
        if interval == 0 {
            return Err(format!("kernel `{}`: `interval` must be at least 1", spec.name));
        }
        Ok(PmtEventsTask {
            events: param_u64(spec, "events", 64)?,
            max_hits: param_u64(spec, "max_hits", 32)?.clamp(1, 64) as usize,
            n_pmts,
            seed: param_u64(spec, "seed", 0)?,
            interval,
            next: 0,
            out: 0,
            next_at: 0,
            current: None,
        })
    }
}

impl TaskBehavior for PmtEventsTask {
    fn step(&mut self, ctx: &mut TaskContext<'_>) -> TaskStep {
        let outs = ctx.outputs().len();
        if outs == 0 || self.next >= self.events {
            return TaskStep::Done;
        }
        if ctx.cycle() < self.next_at {
            return TaskStep::SleepUntil(self.next_at);
        }
        let (seed, k, hits, n) = (self.seed, self.next, self.max_hits, self.n_pmts);
        let words = self.current.get_or_insert_with(|| {
            EventInput::from_pmt_ids(&synthetic_event(seed, k, hits, n), n)
                .expect("generated ids are in range")
                .pack()
        });
        if ctx.send_to(self.out, words) > 0 {
            self.out += 1;
            if self.out == outs {
                self.out = 0;
                self.next += 1;
                self.current = None;
                self.next_at = ctx.cycle() + self.interval;
            }
        }
        if self.next >= self.events {
            TaskStep::Done
        } else {
            TaskStep::Continue
        }
    }
}

/// Adds `nn` and `pmt_events` to a registry. Relative `params_file` paths
/// resolve against `base`, normally the configuration's directory.
pub fn register(registry: &mut TaskRegistry, base: impl Into<PathBuf>) {
    let base = base.into();
    registry.register("nn", move |k| Ok(Box::new(NnTask::from_spec(k, &base)?)));
    registry.register("pmt_events", |k| Ok(Box::new(PmtEventsTask::from_spec(k)?)));
}
