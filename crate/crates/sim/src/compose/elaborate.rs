use std::fmt::Write as _;

use apeiron_core::{Topology, TorusCoord};

use super::validate::{kernel_spec, kernels, ValidatedConfig};
use crate::fabric::{Fabric, PortBinding, PortId, INTRA_PORTS};
use crate::runtime::{Endpoint, SimError, SimOptions, Simulation, TaskInstance, Traffic};

/// An elaborated cluster: wired fabric, bound tasks and a wiring manifest.
pub struct Network {
    pub fabric: Fabric,
    pub tasks: Vec<TaskInstance>,
    pub manifest: String,
}

impl Network {
    pub fn into_simulation(self, traffic: Vec<Traffic>, opts: SimOptions) -> Result<Simulation, SimError> {
        Simulation::new(self.fabric, self.tasks, traffic, opts)
    }
}

impl ValidatedConfig<'_> {
    /// Builds one router per grid coordinate, binds every kernel to its
    /// port and resolves graph edges into send endpoints.
    pub fn elaborate(&self) -> Network {
        let cfg = &self.cfg;
        let topo = Topology::new(cfg.topology.dims.clone()).expect("validated topology");
        let params = cfg.limits.params();
        let refs: Vec<_> = kernels(cfg).collect();
        let bindings: Vec<PortBinding> = refs
            .iter()
            .map(|k| PortBinding {
                coord: cfg.nodes[k.node].coord.clone().into(),
                port: k.kernel.port.get(),
                name: k.kernel.name.clone(),
                in_channels: usize::from(k.kernel.in_channels.get()),
            })
            .collect();
        let fabric = Fabric::new(topo.clone(), params, &bindings).expect("validated fabric parameters");

        let tasks = refs
            .iter()
            .map(|k| {
                let outputs = cfg
                    .graph
                    .iter()
                    .filter(|e| e.from == k.kernel.name)
                    .map(|e| {
                        let to = refs.iter().find(|r| r.kernel.name == e.to).expect("validated edge");
                        Endpoint {
                            coord: cfg.nodes[to.node].coord.clone().into(),
                            port: to.kernel.port.get(),
                            ch: e.ch.get(),
                        }
                    })
                    .collect();
                let spec = kernel_spec(cfg, k);
                TaskInstance {
                    name: k.kernel.name.clone(),
                    node: topo.index_of(&spec.coord),
                    port: spec.port,
                    n_inputs: spec.in_channels,
                    outputs,
                    behavior: self.registry.build(&spec).expect("validated kernel"),
                }
            })
            .collect();

        let manifest = manifest(&fabric, &topo);
        Network {
            fabric,
            tasks,
            manifest,
        }
    }
}

/// Plain-text wiring summary, one stanza per node.
fn manifest(fabric: &Fabric, topo: &Topology) -> String {
    let dims: Vec<String> = topo.sizes().iter().map(u32::to_string).collect();
    let p = fabric.params();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "torus {}: {} routers, {} inter-node channels",
        dims.join("x"),
        fabric.node_count(),
        fabric.inter_node_channels()
    );
    let _ = writeln!(
        s,
        "limits: max_payload_words {} vc_capacity_flits {} eject_capacity_flits {} fifo_capacity {} link_latency {} route_latency {} virtual_channels {}",
        p.max_payload_words,
        p.vc_capacity_flits,
        p.eject_capacity_flits,
        p.fifo_capacity,
        p.link_latency,
        p.route_latency,
        p.virtual_channels
    );
    for n in 0..fabric.node_count() {
        let coord: TorusCoord = topo.coord_of(n);
        let _ = writeln!(s, "\nnode {coord}");
        for port in PortId::all(topo.dims()).filter(|p| p.is_inter()) {
            let _ = writeln!(s, "  {port} -> {}", topo.coord_of(fabric.neighbor(n, port)));
        }
        let node = fabric.node(n);
        for i in 0..INTRA_PORTS {
            let ep = &node.ports[i];
            match &ep.binding {
                Some(name) => {
                    let _ = writeln!(s, "  P{i} {name} ({} input channels)", ep.dispatcher.channels());
                }
                None => {
                    let _ = writeln!(s, "  P{i} unbound");
                }
            }
        }
    }
    s
}
