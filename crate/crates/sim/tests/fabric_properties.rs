use apeiron_core::Topology;
use apeiron_sim::compose;
use apeiron_sim::fabric::{dor_hops, Fabric, FabricParams};
use apeiron_sim::runtime::{Outcome, ScheduledSend, SimOptions, Simulation, TaskRegistry, Traffic};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Send {
    src: usize,
    dest: usize,
    cycle: u64,
    words: u32,
    task: u8,
}

fn workload() -> impl Strategy<Value = (Vec<u32>, Vec<Send>)> {
    proptest::collection::vec(1u32..=5, 1..=3).prop_flat_map(|sizes| {
        let n: usize = sizes.iter().map(|&k| k as usize).product();
        let send = (0..n, 0..n, 0u64..50, 1u32..=16, 0u8..=3).prop_map(|(src, dest, cycle, words, task)| Send {
            src,
            dest,
            cycle,
            words,
            task,
        });
        (Just(sizes), proptest::collection::vec(send, 1..60))
    })
}

fn run(sizes: &[u32], sends: &[Send], seed: u64) -> apeiron_sim::runtime::RunReport {
    let topo = Topology::new(sizes.to_vec()).unwrap();
    let fabric = Fabric::new(topo.clone(), FabricParams::with_max_payload(16), &[]).unwrap();
    let traffic = (0..topo.node_count())
        .map(|node| {
            let mut entries: Vec<ScheduledSend> = sends
                .iter()
                .filter(|s| s.src == node)
                .map(|s| ScheduledSend {
                    cycle: s.cycle,
                    dest: topo.coord_of(s.dest),
                    task: s.task,
                    ch: 0,
                    words: (0..s.words).collect(),
                })
                .collect();
            entries.sort_by_key(|e| e.cycle);
            Traffic::Schedule { node, port: 0, entries }
        })
        .collect();
    let opts = SimOptions {
        seed,
        conservation_every: Some(1),
        ..SimOptions::default()
    };
    Simulation::new(fabric, Vec::new(), traffic, opts).unwrap().run()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_packet_arrives_on_a_minimal_path((sizes, sends) in workload(), seed in any::<u64>()) {
        let r = run(&sizes, &sends, seed);
        prop_assert_eq!(r.outcome, Outcome::Quiescent);
        prop_assert_eq!(r.delivered, sends.len() as u64);
        prop_assert_eq!(r.conservation_violations, 0);
        let topo = Topology::new(sizes.clone()).unwrap();
        for p in &r.packets {
            prop_assert_eq!(p.hops, dor_hops(&topo, &p.src, &p.dest));
            // route latency + link latency per hop, one cycle per flit, one to eject
            let floor = 2 * u64::from(p.hops) + u64::from(p.words) + 2;
            prop_assert!(p.deliver_cycle - p.inject_cycle >= floor, "{:?}", p);
        }
    }

    #[test]
    fn arbiter_seed_never_changes_what_arrives((sizes, sends) in workload(), a in any::<u64>(), b in any::<u64>()) {
        let ra = run(&sizes, &sends, a);
        let rb = run(&sizes, &sends, b);
        prop_assert_eq!(ra.delivered, rb.delivered);
        prop_assert_eq!(ra.channel_digests.len(), rb.channel_digests.len());
    }
}

#[test]
fn bundled_configs_elaborate_and_run() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/");
    let reg = TaskRegistry::with_builtins();
    for (name, messages) in [("fig3_pipeline.yaml", 64), ("ring_deadlock.yaml", 40)] {
        let text = std::fs::read_to_string(format!("{dir}{name}")).unwrap();
        let net = compose::validate(compose::parse(&text).unwrap(), &reg).unwrap().elaborate();
        let r = net.into_simulation(Vec::new(), SimOptions::default()).unwrap().run();
        assert_eq!(r.outcome, Outcome::Quiescent, "{name}");
        assert!(r.channel_digests.values().all(|d| d.messages == messages), "{name}");
    }
}
