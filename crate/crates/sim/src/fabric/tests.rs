use super::*;

fn fabric(sizes: &[u32], params: FabricParams, bindings: &[PortBinding]) -> Fabric {
    Fabric::new(Topology::new(sizes.to_vec()).unwrap(), params, bindings).unwrap()
}

fn meta(dest: &[u32], ch: u8, size: usize) -> SendMeta {
    SendMeta {
        dest_node: TorusCoord::from(dest),
        task_id: 0,
        ch_id: ch,
        size,
    }
}

fn run_until_empty(f: &mut Fabric, limit: u64) {
    for _ in 0..limit {
        if f.is_empty() {
            return;
        }
        f.step_cycle();
        f.clear_events();
    }
    panic!("fabric did not drain in {limit} cycles");
}

fn bind(coord: &[u32], port: u8, in_channels: usize) -> PortBinding {
    PortBinding {
        coord: TorusCoord::from(coord),
        port,
        name: format!("t{port}"),
        in_channels,
    }
}

#[test]
fn uncontended_latency_is_two_cycles_per_hop_plus_serialization() {
    // head: 1 cycle to route at injection, link+route per hop, link into
    // the ejection buffer; the tail trails the head by flits-1 cycles
    for (dest, hops) in [([0u32, 0], 0u32), ([1, 0], 1), ([1, 1], 2), ([2, 2], 4), ([3, 3], 2)] {
        for words in [1usize, 4, 9] {
            let mut f = fabric(&[4, 4], FabricParams::with_max_payload(16), &[]);
            let data: Vec<u32> = (0..words as u32).collect();
            f.send(0, 0, &meta(&dest, 0, words), &data).unwrap();
            run_until_empty(&mut f, 200);
            let r = &f.records()[0];
            assert_eq!(r.hops, hops);
            let flits = words as u64 + 1;
            assert_eq!(r.deliver_cycle, 2 * u64::from(hops) + flits + 1, "dest {dest:?} words {words}");
        }
    }
}

#[test]
fn hops_match_dor_hops_everywhere() {
    let topo = Topology::new(vec![3, 4]).unwrap();
    let mut f = Fabric::new(topo.clone(), FabricParams::with_max_payload(4), &[]).unwrap();
    let mut expected = HashMap::new();
    for s in 0..topo.node_count() {
        for d in 0..topo.node_count() {
            let dest = topo.coord_of(d);
            loop {
                match f.send(s, 0, &meta(dest.as_slice(), 0, 2), &[1, 2]) {
                    Ok(id) => {
                        expected.insert(id.0, dor_hops(&topo, &topo.coord_of(s), &dest));
                        break;
                    }
                    Err(SendFailure::Full) => {
                        f.step_cycle();
                        f.clear_events();
                    }
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }
    run_until_empty(&mut f, 10_000);
    assert_eq!(f.records().len(), expected.len());
    for r in f.records() {
        assert_eq!(r.hops, expected[&r.id]);
    }
}

#[test]
fn wrap_link_is_taken_on_vc1() {
    for (src, dest) in [(3usize, 0u32), (0, 3)] {
        let mut f = fabric(&[4], FabricParams::with_max_payload(4), &[]);
        f.send(src, 0, &meta(&[dest], 0, 1), &[5]).unwrap();
        let mut inter_vcs = Vec::new();
        while !f.is_empty() {
            for e in f.step_cycle() {
                if e.kind == EventKind::Flit && e.port.is_some_and(PortId::is_inter) {
                    inter_vcs.push(e.vc.unwrap());
                }
            }
            f.clear_events();
        }
        assert_eq!(inter_vcs, [Vc::V1, Vc::V1]);
    }
}

#[test]
fn vc_resets_when_turning_into_a_new_dimension() {
    // [3,0] -> [0,1]: wrap in dim 0 on VC1, then dim 1 from VC0
    let mut f = fabric(&[4, 4], FabricParams::with_max_payload(4), &[]);
    let src = f.topology().index_of(&TorusCoord::new(vec![3, 0]));
    f.send(src, 0, &meta(&[0, 1], 0, 1), &[5]).unwrap();
    let mut seen = Vec::new();
    while !f.is_empty() {
        for e in f.step_cycle() {
            if e.kind == EventKind::ArbWin {
                seen.push((e.port.unwrap(), e.vc.unwrap()));
            }
        }
        f.clear_events();
    }
    assert_eq!(
        seen,
        [
            (PortId::Inter { dim: 0, dir: apeiron_core::Direction::Plus }, Vc::V1),
            (PortId::Inter { dim: 1, dir: apeiron_core::Direction::Plus }, Vc::V0),
            (PortId::Intra(0), Vc::V0),
        ]
    );
}

fn ring_load(single_vc: bool) -> Fabric {
    let mut params = FabricParams::with_max_payload(8);
    params.vc_capacity_flits = 9;
    params.eject_capacity_flits = 9;
    let mut f = fabric(&[4], params, &[]);
    f.set_vc1_enabled(!single_vc);
    let mut left = [40u32; 4];
    for _ in 0..2_000 {
        for n in 0..4 {
            if left[n] > 0 {
                let dest = ((n + 2) % 4) as u32;
                if f.send(n, 0, &meta(&[dest], 0, 8), &[n as u32; 8]).is_ok() {
                    left[n] -= 1;
                }
            }
        }
        f.step_cycle();
        f.clear_events();
    }
    f
}

#[test]
fn single_vc_ring_deadlocks_with_a_wait_cycle() {
    let f = ring_load(true);
    assert!(!f.is_empty());
    assert!(f.cycle() - f.last_progress() > 1_000);
    let cycle = find_cycle(&f.wait_edges()).expect("wait-for cycle");
    assert!(cycle.len() >= 2);
    assert!(cycle.iter().all(|w| matches!(w, WaitNode::Input { .. })));
}

#[test]
fn dateline_ring_drains_the_same_load() {
    let mut f = ring_load(false);
    run_until_empty(&mut f, 10_000);
    assert_eq!(f.delivered(), 160);
    assert!(find_cycle(&f.wait_edges()).is_none());
}

#[test]
fn conservation_holds_every_cycle() {
    let mut f = fabric(&[4, 4], FabricParams::with_max_payload(8), &[]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3_000 {
        let n = rng.gen_range(0..16);
        let d = rng.gen_range(0..16);
        let words = rng.gen_range(1..=8);
        let dest = f.topology().coord_of(d);
        let _ = f.send(n, rng.gen_range(0..4), &meta(dest.as_slice(), 0, words), &vec![3; words]);
        f.step_cycle();
        f.clear_events();
        assert_eq!(f.injected(), f.delivered() + f.dropped() + f.packets_in_buffers() as u64);
        assert_eq!(f.packets_in_buffers(), f.packets.len());
    }
}

#[test]
fn bad_channel_is_dropped_and_counted() {
    let mut f = fabric(&[2], FabricParams::with_max_payload(4), &[bind(&[1], 2, 2)]);
    f.send(0, 0, &meta(&[1], 5, 1), &[1]).unwrap();
    f.step_cycle();
    f.clear_events();
    f.send(0, 0, &meta(&[1], 1, 1), &[2]).unwrap();
    let mut m = meta(&[1], 1, 1);
    m.task_id = 2;
    // task 0 is port 0: unbound, absorbed as a sink
    run_until_empty(&mut f, 100);
    assert_eq!(f.dropped(), 0);
    assert_eq!(f.sink_deliveries(), 2);

    f.send(0, 0, &m, &[3]).unwrap();
    f.step_cycle();
    f.clear_events();
    m.ch_id = 5;
    f.send(0, 0, &m, &[4]).unwrap();
    run_until_empty(&mut f, 100);
    assert_eq!(f.dropped(), 1);
    assert_eq!(f.port_status(1, 2).bad_channel_drops, 1);
    assert_eq!(f.receive(1, 2, 1).unwrap().words, [3]);
    assert!(f.records().iter().any(|r| r.dropped && r.ch_id == 5));
}

#[test]
fn full_fifo_stalls_ejection_until_received() {
    let mut params = FabricParams::with_max_payload(4);
    params.fifo_capacity = 1;
    let mut f = fabric(&[2], params, &[bind(&[0], 1, 1)]);
    let mut m = meta(&[0], 0, 1);
    m.task_id = 1;
    for w in 0..2 {
        f.send(0, 0, &m, &[w]).unwrap();
        f.step_cycle();
        f.clear_events();
    }
    for _ in 0..20 {
        f.step_cycle();
        f.clear_events();
    }
    assert_eq!(f.fifo_len(0, 1, 0), 1);
    assert!(!f.is_empty());
    let edges = f.wait_edges();
    assert_eq!(
        edges,
        [(
            WaitNode::Eject { node: 0, port: 1, vc: Vc::V0 },
            WaitNode::Fifo { node: 0, port: 1, ch: 0 }
        )]
    );
    assert_eq!(f.receive(0, 1, 0).unwrap().words, [0]);
    run_until_empty(&mut f, 10);
    assert_eq!(f.receive(0, 1, 0).unwrap().words, [1]);
}

#[test]
fn one_send_per_port_per_cycle() {
    let mut f = fabric(&[2], FabricParams::with_max_payload(4), &[]);
    f.send(0, 0, &meta(&[1], 0, 1), &[1]).unwrap();
    assert_eq!(f.send(0, 0, &meta(&[1], 0, 1), &[1]), Err(SendFailure::Full));
    f.send(0, 1, &meta(&[1], 0, 1), &[1]).unwrap();
    assert_eq!(f.port_status(0, 0).send_rejected_full, 1);
    assert!(matches!(
        f.send(0, 0, &meta(&[1], 0, 5), &[1; 5]),
        Err(SendFailure::Invalid(SendError::TooLarge { .. }))
    ));
    assert_eq!(f.port_status(0, 0).send_errors, 1);
}

#[test]
fn try_forward_reports_each_outcome() {
    let mut params = FabricParams::with_max_payload(8);
    params.eject_capacity_flits = 10;
    params.fifo_capacity = 1;
    let mut f = fabric(&[2], params, &[bind(&[0], 3, 1)]);
    f.registers_mut(0).write("route_latency", 0).unwrap();
    let mut to3 = meta(&[0], 0, 1);
    to3.task_id = 3;

    // two heads wanting the same output VC
    f.send(0, 0, &to3, &[1]).unwrap();
    f.send(0, 1, &to3, &[2]).unwrap();
    assert_eq!(f.try_forward(0, PortId::Intra(0), Vc::V0), Some(ForwardOutcome::Forwarded));
    assert_eq!(f.try_forward(0, PortId::Intra(0), Vc::V0), None);
    assert_eq!(f.try_forward(0, PortId::Intra(1), Vc::V0), Some(ForwardOutcome::BlockedArbitration));
    // first packet lands in the FIFO, second stays parked in ejection
    for _ in 0..10 {
        f.step_cycle();
        f.clear_events();
    }
    assert_eq!(f.fifo_len(0, 3, 0), 1);
    assert_eq!(f.eject_buffer(0, 3, Vc::V0).free(), 8);

    // 9 flits do not fit in 8 free; 8 flits do
    let mut big = to3.clone();
    big.size = 8;
    f.send(0, 0, &big, &[0; 8]).unwrap();
    assert_eq!(f.try_forward(0, PortId::Intra(0), Vc::V0), Some(ForwardOutcome::BlockedNoCredit));
    let mut fits = to3.clone();
    fits.size = 7;
    f.send(0, 2, &fits, &[0; 7]).unwrap();
    assert_eq!(f.try_forward(0, PortId::Intra(2), Vc::V0), Some(ForwardOutcome::Forwarded));
}

#[test]
fn arbiter_seed_changes_pointers() {
    let mut a = fabric(&[4, 4], FabricParams::with_max_payload(4), &[]);
    let mut b = a.clone();
    a.randomize_arbiters(1);
    b.randomize_arbiters(2);
    let out = OutputVc { port: PortId::Intra(0), vc: Vc::V0 };
    let pa: Vec<usize> = (0..16).map(|n| a.switch(n).pointer(out)).collect();
    let pb: Vec<usize> = (0..16).map(|n| b.switch(n).pointer(out)).collect();
    assert_ne!(pa, pb);
}

#[test]
fn undersized_buffers_are_rejected() {
    let mut p = FabricParams::with_max_payload(8);
    p.vc_capacity_flits = 8;
    assert!(matches!(
        Fabric::new(Topology::new(vec![2]).unwrap(), p, &[]),
        Err(FabricError::BufferTooSmall { need: 9, .. })
    ));
}

#[test]
fn wait_cycle_finder() {
    assert_eq!(find_cycle(&[(1, 2), (2, 3), (3, 1), (0, 1)]), Some(vec![1, 2, 3]));
    assert_eq!(find_cycle(&[(1, 2), (2, 3)]), None);
    assert_eq!(find_cycle::<u8>(&[]), None);
}

#[test]
fn channel_count_matches_torus() {
    let f = fabric(&[4, 4, 4], FabricParams::with_max_payload(4), &[]);
    assert_eq!(f.node_count(), 64);
    assert_eq!(f.inter_node_channels(), 384);
}

#[test]
#[should_panic(expected = "checksum mismatch")]
fn corrupted_flit_is_fatal_at_dispatch() {
    let mut f = fabric(&[2], FabricParams::with_max_payload(4), &[]);
    f.send(0, 0, &meta(&[0], 0, 2), &[1, 2]).unwrap();
    f.routers[0].inputs[0][0].buf.flit_mut(1).unwrap().flit.word ^= 1;
    run_until_empty(&mut f, 20);
}
