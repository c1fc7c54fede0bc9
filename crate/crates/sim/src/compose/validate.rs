use std::collections::{BTreeMap, HashMap, HashSet};

use apeiron_core::MAX_DIMS;

use super::{ClusterConfig, Diagnostic, KernelConfig};
use crate::fabric::INTRA_PORTS;
use crate::runtime::{KernelSpec, TaskRegistry};

/// A configuration that passed [`validate`]. The only way to build one, and
/// therefore the only way to reach elaboration.
pub struct ValidatedConfig<'r> {
    pub(super) cfg: ClusterConfig,
    pub(super) registry: &'r TaskRegistry,
}

impl std::fmt::Debug for ValidatedConfig<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ValidatedConfig").field("cfg", &self.cfg).finish_non_exhaustive()
    }
}

impl ValidatedConfig<'_> {
    pub fn config(&self) -> &ClusterConfig {
        &self.cfg
    }
}

/// Where each kernel lives in the document.
pub(super) struct KernelRef<'a> {
    pub node: usize,
    pub index: usize,
    pub kernel: &'a KernelConfig,
}

impl KernelRef<'_> {
    fn path(&self) -> String {
        format!("nodes[{}].kernels[{}]", self.node, self.index)
    }
}

pub(super) fn kernels(cfg: &ClusterConfig) -> impl Iterator<Item = KernelRef<'_>> {
    cfg.nodes.iter().enumerate().flat_map(|(n, node)| {
        node.kernels
            .iter()
            .enumerate()
            .map(move |(i, kernel)| KernelRef { node: n, index: i, kernel })
    })
}

pub(super) fn kernel_spec(cfg: &ClusterConfig, k: &KernelRef<'_>) -> KernelSpec {
    let out_channels = cfg.graph.iter().filter(|e| e.from == k.kernel.name).count();
    KernelSpec {
        name: k.kernel.name.clone(),
        behavior: k.kernel.behavior().unwrap_or_default().to_string(),
        coord: cfg.nodes[k.node].coord.clone().into(),
        port: k.kernel.port.get(),
        in_channels: usize::from(k.kernel.in_channels.get()),
        out_channels,
        params: serde_json::Value::Object(k.kernel.params.clone()),
    }
}

fn check_topology(cfg: &ClusterConfig, out: &mut Vec<Diagnostic>) -> bool {
    let dims = &cfg.topology.dims;
    let mut ok = true;
    if dims.is_empty() || dims.len() > MAX_DIMS {
        out.push(Diagnostic::at(
            "topology.dims",
            format!("{} dimensions given, 1-{MAX_DIMS} supported", dims.len()),
        ));
        ok = false;
    }
    for (d, &k) in dims.iter().enumerate() {
        if k == 0 {
            out.push(Diagnostic::at(format!("topology.dims[{d}]"), "size must be at least 1"));
            ok = false;
        }
    }
    ok
}

fn check_limits(cfg: &ClusterConfig, out: &mut Vec<Diagnostic>) {
    let p = cfg.limits.params();
    let need = p.max_packet_flits();
    if p.max_payload_words == 0 {
        out.push(Diagnostic::at("limits.max_payload_words", "must be at least 1"));
    }
    for (field, have) in [
        ("vc_capacity_flits", p.vc_capacity_flits),
        ("eject_capacity_flits", p.eject_capacity_flits),
    ] {
        if have < need {
            out.push(Diagnostic::at(
                format!("limits.{field}"),
                format!("{have} flits cannot hold a maximal {need}-flit packet"),
            ));
        }
    }
    if p.fifo_capacity == 0 {
        out.push(Diagnostic::at("limits.fifo_capacity", "must be at least 1"));
    }
    if p.link_latency == 0 {
        out.push(Diagnostic::at("limits.link_latency", "must be at least 1"));
    }
    if !(1..=2).contains(&p.virtual_channels) {
        out.push(Diagnostic::at("limits.virtual_channels", "must be 1 or 2"));
    }
}

fn check_nodes(cfg: &ClusterConfig, dims_ok: bool, out: &mut Vec<Diagnostic>) {
    let dims = &cfg.topology.dims;
    let mut seen: HashMap<&[u32], usize> = HashMap::new();
    for (n, node) in cfg.nodes.iter().enumerate() {
        let path = format!("nodes[{n}].coord");
        if dims_ok {
            if node.coord.len() != dims.len() {
                out.push(Diagnostic::at(
                    &path,
                    format!("{} components for a {}-dimensional torus", node.coord.len(), dims.len()),
                ));
            } else if let Some(d) = (0..dims.len()).find(|&d| node.coord[d] >= dims[d]) {
                out.push(Diagnostic::at(
                    format!("{path}[{d}]"),
                    format!("{} outside 0-{}", node.coord[d], dims[d] - 1),
                ));
            }
        }
        if let Some(prev) = seen.insert(&node.coord, n) {
            out.push(Diagnostic::at(&path, format!("coordinate already used by nodes[{prev}]")));
        }
        if node.kernels.len() > INTRA_PORTS {
            out.push(Diagnostic::at(
                format!("nodes[{n}].kernels"),
                format!("{} kernels, a node has {INTRA_PORTS} IntraNode ports", node.kernels.len()),
            ));
        }
        let mut ports: HashMap<u8, usize> = HashMap::new();
        for (i, k) in node.kernels.iter().enumerate() {
            if let Some(prev) = ports.insert(k.port.get(), i) {
                out.push(Diagnostic::at(
                    format!("nodes[{n}].kernels[{i}].port"),
                    format!("port {} already taken by `{}`", k.port.get(), node.kernels[prev].name),
                ));
            }
        }
    }
}

fn check_kernels(cfg: &ClusterConfig, registry: &TaskRegistry, out: &mut Vec<Diagnostic>) {
    let mut names: HashMap<&str, String> = HashMap::new();
    for k in kernels(cfg) {
        let path = k.path();
        if k.kernel.name.is_empty() {
            out.push(Diagnostic::at(format!("{path}.name"), "must not be empty"));
        }
        if let Some(prev) = names.insert(&k.kernel.name, path.clone()) {
            out.push(Diagnostic::at(
                format!("{path}.name"),
                format!("kernel name `{}` already used at {prev}", k.kernel.name),
            ));
        }
        match k.kernel.behavior() {
            None => out.push(Diagnostic::at(format!("{path}.params.behavior"), "must be a string")),
            Some(b) if !registry.contains(b) => {
                let known: Vec<&str> = registry.names().collect();
                out.push(Diagnostic::at(
                    format!("{path}.params.behavior"),
                    format!("unknown behavior `{b}` (known: {})", known.join(", ")),
                ));
            }
            Some(_) => {
                if let Err(e) = registry.build(&kernel_spec(cfg, &k)) {
                    out.push(Diagnostic::at(format!("{path}.params"), e));
                }
            }
        }
    }
}

fn check_graph(cfg: &ClusterConfig, out: &mut Vec<Diagnostic>) {
    let by_name: HashMap<&str, &KernelConfig> = kernels(cfg).map(|k| (k.kernel.name.as_str(), k.kernel)).collect();
    let mut writers: HashMap<(&str, u8), usize> = HashMap::new();
    let mut out_degree: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, e) in cfg.graph.iter().enumerate() {
        if !by_name.contains_key(e.from.as_str()) {
            out.push(Diagnostic::at(format!("graph[{i}].from"), format!("no kernel named `{}`", e.from)));
        } else {
            *out_degree.entry(&e.from).or_default() += 1;
        }
        let Some(to) = by_name.get(e.to.as_str()) else {
            out.push(Diagnostic::at(format!("graph[{i}].to"), format!("no kernel named `{}`", e.to)));
            continue;
        };
        if e.ch.get() >= to.in_channels.get() {
            out.push(Diagnostic::at(
                format!("graph[{i}].ch"),
                format!(
                    "kernel `{}` has {} input channels, ch {} does not exist",
                    e.to,
                    to.in_channels.get(),
                    e.ch.get()
                ),
            ));
        }
        if let Some(prev) = writers.insert((e.to.as_str(), e.ch.get()), i) {
            out.push(Diagnostic::at(
                format!("graph[{i}]"),
                format!(
                    "ch {} of kernel `{}` already written by graph[{prev}]; channels have a single producer",
                    e.ch.get(),
                    e.to
                ),
            ));
        }
    }
    for (name, degree) in out_degree {
        let k = by_name[name];
        if degree > usize::from(k.out_channels.get()) {
            let path = kernels(cfg).find(|r| r.kernel.name == name).expect("exists").path();
            out.push(Diagnostic::at(
                format!("{path}.out_channels"),
                format!(
                    "kernel `{name}` drives {degree} edges but declares {} output channels",
                    k.out_channels.get()
                ),
            ));
        }
    }
}

/// Checks structure, limits, kernel placement and the dataflow graph.
/// Returns every problem found, or the validated configuration.
pub fn validate(cfg: ClusterConfig, registry: &TaskRegistry) -> Result<ValidatedConfig<'_>, Vec<Diagnostic>> {
    let mut out = Vec::new();
    let dims_ok = check_topology(&cfg, &mut out);
    check_limits(&cfg, &mut out);
    check_nodes(&cfg, dims_ok, &mut out);
    check_kernels(&cfg, registry, &mut out);
    check_graph(&cfg, &mut out);
    // one diagnostic per (path, message)
    let mut seen = HashSet::new();
    out.retain(|d| seen.insert((d.path.clone(), d.message.clone())));
    if out.is_empty() {
        Ok(ValidatedConfig { cfg, registry })
    } else {
        Err(out)
    }
}
