//! `apeiron` command implementations. [`run`] takes the argument list and
//! output streams so the whole tool can be driven in-process.

use std::cell::RefCell;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::rc::Rc;

use apeiron_nn::{
    run_pipeline, synthetic_event, DenseModel, EventInput, EventsFile, OracleNet, PipelineTiming,
};
use apeiron_sim::compose::{self, Diagnostic, Network};
use apeiron_sim::fabric::TraceWriter;
use apeiron_sim::runtime::{Outcome, SimOptions, TaskRegistry};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DEADLOCK: i32 = 3;

/// Seed and weight range of the bundled parameter file.
pub const DEFAULT_PARAMS_SEED: u64 = 2024;
pub const DEFAULT_WEIGHT_SCALE: i64 = 32;

#[derive(Parser, Debug)]
#[command(name = "apeiron", version, about = "APEIRON torus fabric and dataflow runtime simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a cluster configuration; diagnostics go to stderr.
    Validate { config: PathBuf },
    /// Elaborate and simulate a configuration.
    Run {
        config: PathBuf,
        /// Stop after this many cycles.
        #[arg(long, default_value_t = 1_000_000)]
        cycles: u64,
        /// Arbiter start positions.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON run report here.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Write the per-flit CSV trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Disable VC1 on every router (can deadlock).
        #[arg(long)]
        single_vc: bool,
        /// Step tasks in reverse order.
        #[arg(long)]
        reverse_order: bool,
        /// No summary on stdout.
        #[arg(long)]
        quiet: bool,
        /// Print the JSON report on stdout instead of the summary.
        #[arg(long)]
        json: bool,
    },
    /// Classify events with the fixed-point network and print the pipeline timing.
    DemoNn {
        /// Parameter file (JSON); a seeded random model otherwise.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Events file (JSON); synthetic events otherwise.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Clock frequency in Hz.
        #[arg(long, default_value_t = 150e6)]
        clock: f64,
        /// Initiation interval in cycles.
        #[arg(long, default_value_t = PipelineTiming::DEFAULT_II)]
        ii: u64,
        /// Pipeline depth in cycles.
        #[arg(long, default_value_t = PipelineTiming::DEFAULT_DEPTH)]
        depth: u64,
        /// Recompute every event with the arbitrary-precision oracle.
        #[arg(long)]
        check_oracle: bool,
        /// Write the parameters in use to this file.
        #[arg(long)]
        dump_params: Option<PathBuf>,
        /// Seed for the random model and the synthetic events.
        #[arg(long, default_value_t = DEFAULT_PARAMS_SEED)]
        seed: u64,
        /// Synthetic events to generate.
        #[arg(long, default_value_t = 16)]
        count: u64,
        /// Also stream the events through a simulated fabric.
        #[arg(long)]
        simulate: bool,
        /// No per-event lines.
        #[arg(long)]
        quiet: bool,
        /// Print a JSON document instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Print the per-node wiring of an elaborated configuration.
    DumpManifest { config: PathBuf },
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Task registry with the built-in kernels and the classifier kernels;
/// relative parameter paths resolve against `base`.
pub fn registry(base: &Path) -> TaskRegistry {
    let mut r = TaskRegistry::with_builtins();
    apeiron_nn::register(&mut r, base);
    r
}

/// The seeded model behind `demo-nn` without `--params` and the bundled
/// parameter file.
pub fn default_model(seed: u64) -> DenseModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseModel::random(&DenseModel::reference_sizes(), DEFAULT_WEIGHT_SCALE, &mut rng)
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut io = Io { out, err };
    let code = match cli.cmd {
        Command::Validate { config } => cmd_validate(&mut io, &config),
        Command::DumpManifest { config } => cmd_dump_manifest(&mut io, &config),
        Command::Run {
            config,
            cycles,
            seed,
            stats,
            trace,
            single_vc,
            reverse_order,
            quiet,
            json,
        } => cmd_run(
            &mut io,
            &config,
            &RunFlags {
                cycles,
                seed,
                stats,
                trace,
                single_vc,
                reverse_order,
                quiet,
                json,
            },
        ),
        Command::DemoNn {
            params,
            events,
            clock,
            ii,
            depth,
            check_oracle,
            dump_params,
            seed,
            count,
            simulate,
            quiet,
            json,
        } => cmd_demo_nn(
            &mut io,
            &DemoFlags {
                params,
                events,
                clock,
                ii,
                depth,
                check_oracle,
                dump_params,
                seed,
                count,
                simulate,
                quiet,
                json,
            },
        ),
    };
    let _ = io.out.flush();
    let _ = io.err.flush();
    code
}

fn report_diags(io: &mut Io<'_>, file: &Path, diags: &[Diagnostic]) {
    for d in diags {
        let _ = writeln!(io.err, "{}: {d}", file.display());
    }
}

/// Reads, parses, validates and elaborates. `Err` carries the exit code.
fn load(io: &mut Io<'_>, file: &Path) -> Result<Network, i32> {
    let text = std::fs::read_to_string(file).map_err(|e| {
        let _ = writeln!(io.err, "{}: {e}", file.display());
        EXIT_IO
    })?;
    let cfg = compose::parse(&text).map_err(|d| {
        report_diags(io, file, &[d]);
        EXIT_VALIDATION
    })?;
    let base = file.parent().map(Path::to_path_buf).unwrap_or_default();
    let reg = registry(&base);
    let v = compose::validate(cfg, &reg).map_err(|d| {
        report_diags(io, file, &d);
        EXIT_VALIDATION
    })?;
    Ok(v.elaborate())
}

fn cmd_validate(io: &mut Io<'_>, file: &Path) -> i32 {
    match load(io, file) {
        Ok(net) => {
            let _ = writeln!(
                io.out,
                "{}: ok ({} routers, {} kernels)",
                file.display(),
                net.fabric.node_count(),
                net.tasks.len()
            );
            EXIT_OK
        }
        Err(code) => code,
    }
}

fn cmd_dump_manifest(io: &mut Io<'_>, file: &Path) -> i32 {
    match load(io, file) {
        Ok(net) => {
            let _ = io.out.write_all(net.manifest.as_bytes());
            EXIT_OK
        }
        Err(code) => code,
    }
}

struct RunFlags {
    cycles: u64,
    seed: u64,
    stats: Option<PathBuf>,
    trace: Option<PathBuf>,
    single_vc: bool,
    reverse_order: bool,
    quiet: bool,
    json: bool,
}

type SharedTrace = Rc<RefCell<Option<Result<TraceWriter<BufWriter<File>>, String>>>>;

fn cmd_run(io: &mut Io<'_>, file: &Path, f: &RunFlags) -> i32 {
    let mut net = match load(io, file) {
        Ok(n) => n,
        Err(code) => return code,
    };
    if f.single_vc {
        net.fabric.set_vc1_enabled(false);
    }
    let topo = net.fabric.topology().clone();
    let opts = SimOptions {
        max_cycles: f.cycles,
        seed: f.seed,
        reverse_order: f.reverse_order,
        ..SimOptions::default()
    };
    let mut sim = match net.into_simulation(Vec::new(), opts) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(io.err, "{}: {e}", file.display());
            return EXIT_VALIDATION;
        }
    };

    let trace: SharedTrace = Rc::default();
    if let Some(path) = &f.trace {
        let w = File::create(path)
            .map_err(|e| e.to_string())
            .and_then(|file| TraceWriter::new(BufWriter::new(file), topo).map_err(|e| e.to_string()));
        match w {
            Ok(w) => *trace.borrow_mut() = Some(Ok(w)),
            Err(e) => {
                let _ = writeln!(io.err, "{}: {e}", path.display());
                return EXIT_IO;
            }
        }
        let sink = trace.clone();
        sim.set_trace(move |events| {
            let mut slot = sink.borrow_mut();
            if let Some(Ok(w)) = slot.as_mut() {
                if let Err(e) = w.write(events) {
                    *slot = Some(Err(e.to_string()));
                }
            }
        });
    }

    let report = sim.run();
    drop(sim);

    if let Some(path) = &f.trace {
        let finished = match Rc::try_unwrap(trace).map(RefCell::into_inner) {
            Ok(Some(Ok(w))) => w.finish().map(drop).map_err(|e| e.to_string()),
            Ok(Some(Err(e))) => Err(e),
            _ => Err("trace writer still shared".to_string()),
        };
        if let Err(e) = finished {
            let _ = writeln!(io.err, "{}: {e}", path.display());
            return EXIT_IO;
        }
    }
    let json = report.to_json();
    if let Some(path) = &f.stats {
        if let Err(e) = std::fs::write(path, format!("{json}\n")) {
            let _ = writeln!(io.err, "{}: {e}", path.display());
            return EXIT_IO;
        }
    }
    if f.json {
        let _ = writeln!(io.out, "{json}");
    } else if !f.quiet {
        let _ = writeln!(io.out, "{}", report.summary());
    }
    match report.outcome {
        Outcome::Deadlock => {
            if let Some(d) = &report.deadlock {
                let _ = writeln!(
                    io.err,
                    "deadlock at cycle {} (no progress since {}), wait cycle:",
                    d.detected_at, d.last_progress
                );
                for hop in &d.wait_cycle {
                    let _ = writeln!(io.err, "  {hop}");
                }
            }
            EXIT_DEADLOCK
        }
        Outcome::Fault => {
            let _ = writeln!(io.err, "fault: {}", report.fault.as_deref().unwrap_or("unknown"));
            EXIT_VALIDATION
        }
        Outcome::Quiescent | Outcome::CycleLimit => EXIT_OK,
    }
}

struct DemoFlags {
    params: Option<PathBuf>,
    events: Option<PathBuf>,
    clock: f64,
    ii: u64,
    depth: u64,
    check_oracle: bool,
    dump_params: Option<PathBuf>,
    seed: u64,
    count: u64,
    simulate: bool,
    quiet: bool,
    json: bool,
}

#[derive(Serialize)]
struct DemoEvent {
    hits: usize,
    scores: Vec<f64>,
    raw_scores: Vec<i32>,
    class: usize,
}

#[derive(Serialize)]
struct DemoReport {
    events: Vec<DemoEvent>,
    clock_hz: u64,
    initiation_interval: u64,
    depth: u64,
    throughput_hz: f64,
    latency_ns: f64,
    summary: String,
    oracle_checked: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    fabric_intervals: Option<Vec<u64>>,
}

/// Events offered to the simulated fabric: 12 hits pack into 7 flits, so
/// the link outpaces an 8-cycle initiation interval.
const SIM_MAX_HITS: usize = 12;

fn cmd_demo_nn(io: &mut Io<'_>, f: &DemoFlags) -> i32 {
    let timing = match PipelineTiming::with_clock_f64(f.clock, f.ii, f.depth) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(io.err, "{e}");
            return EXIT_VALIDATION;
        }
    };
    let model = match &f.params {
        Some(path) => match std::fs::read_to_string(path) {
            Err(e) => {
                let _ = writeln!(io.err, "{}: {e}", path.display());
                return EXIT_IO;
            }
            Ok(text) => match DenseModel::from_json(&text) {
                Ok(m) => m,
                Err(e) => {
                    let _ = writeln!(io.err, "{}: {e}", path.display());
                    return EXIT_VALIDATION;
                }
            },
        },
        None => default_model(f.seed),
    };
    if let Some(path) = &f.dump_params {
        if let Err(e) = std::fs::write(path, format!("{}\n", model.to_json())) {
            let _ = writeln!(io.err, "{}: {e}", path.display());
            return EXIT_IO;
        }
    }
    let events = match &f.events {
        Some(path) => {
            let parsed = std::fs::read_to_string(path)
                .map_err(|e| (EXIT_IO, e.to_string()))
                .and_then(|t| serde_json::from_str::<EventsFile>(&t).map_err(|e| (EXIT_VALIDATION, e.to_string())))
                .and_then(|ef| {
                    ef.inputs()
                        .map_err(|(i, e)| (EXIT_VALIDATION, format!("events[{i}]: {e}")))
                });
            match parsed {
                Ok(ev) => ev,
                Err((code, msg)) => {
                    let _ = writeln!(io.err, "{}: {msg}", path.display());
                    return code;
                }
            }
        }
        None => (0..f.count)
            .map(|k| {
                let max_hits = if f.simulate { SIM_MAX_HITS } else { 64 };
                EventInput::from_pmt_ids(&synthetic_event(f.seed, k, max_hits, 2048), 2048)
                    .expect("generated ids are in range")
            })
            .collect(),
    };
    if model.input_width() < events.iter().map(|e| e.hits().len()).max().unwrap_or(0) {
        let _ = writeln!(io.err, "events have more hits than the model has inputs ({})", model.input_width());
        return EXIT_VALIDATION;
    }

    let oracle = f.check_oracle.then(|| OracleNet::new(&model.to_file()));
    let mut rows = Vec::with_capacity(events.len());
    for (k, e) in events.iter().enumerate() {
        let r = model.infer(e.hits());
        if let Some(o) = &oracle {
            let raw: Vec<i64> = e.hits().iter().map(|a| i64::from(a.raw())).collect();
            let (scores, class) = o.infer(&raw);
            let got: Vec<i64> = r.scores.iter().map(|s| i64::from(s.raw())).collect();
            if got != scores || class != r.class {
                let _ = writeln!(io.err, "event {k}: fixed point {got:?}/{} != oracle {scores:?}/{class}", r.class);
                return EXIT_VALIDATION;
            }
        }
        rows.push(DemoEvent {
            hits: e.hits().len(),
            scores: r.scores.iter().map(|s| s.to_f64()).collect(),
            raw_scores: r.scores.iter().map(|s| s.raw()).collect(),
            class: r.class,
        });
    }
    let fabric_intervals = f.simulate.then(|| {
        let run = run_pipeline(model.clone(), &timing, &events, 1);
        run.intervals()
    });

    let summary = timing.summary();
    if f.json {
        let doc = DemoReport {
            events: rows,
            clock_hz: timing.clock_hz(),
            initiation_interval: timing.initiation_interval(),
            depth: timing.depth(),
            throughput_hz: apeiron_nn::timing::to_f64(timing.throughput_hz()),
            latency_ns: apeiron_nn::timing::to_f64(timing.latency_ns()),
            summary,
            oracle_checked: f.check_oracle,
            fabric_intervals,
        };
        let _ = writeln!(io.out, "{}", serde_json::to_string_pretty(&doc).expect("report serializes"));
        return EXIT_OK;
    }
    if !f.quiet {
        for (k, r) in rows.iter().enumerate() {
            let scores: Vec<String> = r.scores.iter().map(|s| format!("{s:.4}")).collect();
            let _ = writeln!(io.out, "event {k}: {} hits, scores [{}], class {}", r.hits, scores.join(", "), r.class);
        }
    }
    if f.check_oracle {
        let _ = writeln!(io.out, "oracle: {} events bit-identical", rows.len());
    }
    if let Some(iv) = &fabric_intervals {
        let tail = &iv[iv.len() / 2..];
        let steady = tail.first().filter(|&&g| tail.iter().all(|&x| x == g));
        match steady {
            Some(g) => {
                let _ = writeln!(io.out, "fabric: {} results, steady interval {g} cycles", iv.len() + 1);
            }
            None => {
                let _ = writeln!(io.out, "fabric: {} results, intervals {iv:?}", iv.len() + 1);
            }
        }
    }
    let _ = writeln!(io.out, "{summary}");
    EXIT_OK
}
