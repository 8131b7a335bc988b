//! Random network instances: unit-disk topology at fixed density, interface
//! conflicts, random flows on minimum-hop routes, and uniform link rates.
//!
//! An [`Instance`] is a pure function of `(num_nodes, load, topology seed,
//! realization seed)`. The topology seed fixes node placement; the
//! realization seed fixes flows and link rates. The load only scales the
//! routing matrix, so sweeping it over one realization compares like with
//! like.

mod conflict;
mod flows;
mod topology;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use conflict::ConflictGraph;
pub use flows::{
    flow_count_range, sample_flows, sample_link_rates, shortest_path, shortest_path_routing, Flow, FlowSet,
    RoutingMatrix, BASE_RATE_RANGE, LINK_RATE_RANGE,
};
pub use topology::{
    distance, generate_topology, square_side, ConnectivityGraph, Link, Node, LINK_RANGE, MAX_PLACEMENT_ATTEMPTS,
    NODE_DENSITY,
};

use crate::{Error, Result};

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSeeds {
    pub topology: u64,
    pub realization: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub connectivity: ConnectivityGraph,
    pub conflicts: ConflictGraph,
    pub flows: FlowSet,
    pub routing: RoutingMatrix,
    /// Long-term rate `r_e` per link, packets per slot.
    pub rates: Vec<f64>,
    pub seeds: InstanceSeeds,
}

impl Instance {
    pub fn generate(num_nodes: usize, load: f64, seeds: InstanceSeeds) -> Result<Self> {
        let connectivity = generate_topology(num_nodes, seeds.topology)?;
        Self::on_topology(connectivity, load, seeds)
    }

    /// Draws flows, routes and rates on an existing topology.
    pub fn on_topology(connectivity: ConnectivityGraph, load: f64, seeds: InstanceSeeds) -> Result<Self> {
        let conflicts = ConflictGraph::interface(&connectivity);
        let mut flows = sample_flows(&connectivity, load, seeds.realization)?;
        let routing = shortest_path_routing(&connectivity, &mut flows)?;
        let rates = sample_link_rates(&connectivity, seeds.realization);
        Ok(Instance { connectivity, conflicts, flows, routing, rates, seeds })
    }

    pub fn num_links(&self) -> usize {
        self.connectivity.num_links()
    }

    pub fn load(&self) -> f64 {
        self.flows.load
    }

    /// `λ_e`, the aggregate routed arrival rate per link.
    pub fn link_loads(&self) -> Vec<f64> {
        self.routing.link_loads()
    }

    /// Same instance at a different load (flows and routes unchanged).
    pub fn with_load(&self, load: f64) -> Result<Self> {
        if !(load > 0.0 && load.is_finite()) {
            return Err(Error::InvalidArgument(format!("load must be positive, got {load}")));
        }
        let mut out = self.clone();
        out.flows.load = load;
        for f in 0..out.flows.len() {
            let rate = out.flows.arrival_rate(f);
            for &l in &out.flows.flows[f].path {
                out.routing.set(l, f, rate);
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&InstanceRecord::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: InstanceRecord = serde_json::from_str(text)?;
        record.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// On-disk layout. Field names are a stable contract.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRecord {
    schema_version: u32,
    nodes: Vec<Node>,
    links: Vec<Link>,
    conflicts: Vec<(usize, usize)>,
    flows: Vec<Flow>,
    lambda: Vec<Vec<f64>>,
    rates: Vec<f64>,
    beta: f64,
    seeds: InstanceSeeds,
}

impl From<&Instance> for InstanceRecord {
    fn from(inst: &Instance) -> Self {
        InstanceRecord {
            schema_version: INSTANCE_SCHEMA_VERSION,
            nodes: inst.connectivity.nodes.clone(),
            links: inst.connectivity.links.clone(),
            conflicts: inst.conflicts.edges().to_vec(),
            flows: inst.flows.flows.clone(),
            lambda: inst.routing.rows(),
            rates: inst.rates.clone(),
            beta: inst.flows.load,
            seeds: inst.seeds,
        }
    }
}

impl TryFrom<InstanceRecord> for Instance {
    type Error = Error;

    fn try_from(r: InstanceRecord) -> Result<Self> {
        if r.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported instance schema_version {}",
                r.schema_version
            )));
        }
        let num_links = r.links.len();
        if let Some(&(a, b)) = r.conflicts.iter().find(|&&(a, b)| a >= num_links || b >= num_links) {
            return Err(Error::InvalidArgument(format!("conflict ({a}, {b}) names an unknown link")));
        }
        crate::error::check_len("lambda", r.lambda.len(), num_links)?;
        crate::error::check_len("rates", r.rates.len(), num_links)?;
        let routing = RoutingMatrix::from_rows(r.flows.len(), r.lambda)?;
        Ok(Instance {
            connectivity: ConnectivityGraph { nodes: r.nodes, links: r.links },
            conflicts: ConflictGraph::from_edges(num_links, &r.conflicts),
            flows: FlowSet { flows: r.flows, load: r.beta },
            routing,
            rates: r.rates,
            seeds: r.seeds,
        })
    }
}

/// Every broken structural invariant of `inst`, one message each. Empty
/// means the instance is valid.
pub fn validate_instance(inst: &Instance) -> Vec<String> {
    let mut out = Vec::new();
    let g = &inst.connectivity;
    let n = g.num_nodes();
    let m = g.num_links();

    for (k, node) in g.nodes.iter().enumerate() {
        if node.id != k {
            out.push(format!("node at index {k} has id {}", node.id));
        }
    }
    let mut links_ok = true;
    for (k, l) in g.links.iter().enumerate() {
        if l.id != k {
            out.push(format!("link at index {k} has id {}", l.id));
        }
        if l.src >= n || l.dst >= n || l.src == l.dst {
            out.push(format!("link {k} has invalid endpoints ({}, {})", l.src, l.dst));
            links_ok = false;
            continue;
        }
        let d = distance(&g.nodes[l.src], &g.nodes[l.dst]);
        if d > LINK_RANGE {
            out.push(format!("link {k} spans distance {d:.4} > {LINK_RANGE}"));
        }
        if g.link_between(l.dst, l.src).is_none() {
            out.push(format!("link {k} ({} -> {}) has no reverse link", l.src, l.dst));
        }
    }
    if links_ok {
        let expected = ConnectivityGraph::from_positions(&g.nodes.iter().map(|v| (v.x, v.y)).collect::<Vec<_>>());
        if expected.num_links() != m {
            out.push(format!("{} node pairs within range but {m} links", expected.num_links()));
        }
        if !g.is_connected() {
            out.push("connectivity graph is not strongly connected".into());
        }
    }

    if inst.conflicts.num_links() != m {
        out.push(format!("conflict graph has {} links, connectivity has {m}", inst.conflicts.num_links()));
    } else {
        out.extend(inst.conflicts.violations());
        if links_ok {
            for e in 0..m {
                let mut expected: Vec<usize> =
                    (0..m).filter(|&i| i != e && g.links[e].shares_endpoint(&g.links[i])).collect();
                expected.sort_unstable();
                if inst.conflicts.neighbors(e) != expected.as_slice() {
                    out.push(format!("conflicts of link {e} differ from the interface rule"));
                }
            }
        }
    }

    let load = inst.flows.load;
    if !(load > 0.0 && load.is_finite()) {
        out.push(format!("load {load} is not positive"));
    }
    let (a_lo, a_hi) = BASE_RATE_RANGE;
    for f in &inst.flows.flows {
        if !(a_lo..=a_hi).contains(&f.base_rate) {
            out.push(format!("flow {} base rate {} outside [{a_lo}, {a_hi}]", f.id, f.base_rate));
        }
        if let Some(msg) = path_problem(g, f) {
            out.push(format!("flow {} path: {msg}", f.id));
        }
    }

    let r = &inst.routing;
    if r.num_links() != m || r.num_flows() != inst.flows.len() {
        out.push(format!(
            "routing matrix is {}x{}, expected {m}x{}",
            r.num_links(),
            r.num_flows(),
            inst.flows.len()
        ));
    } else if links_ok {
        for (fi, f) in inst.flows.flows.iter().enumerate() {
            for e in 0..m {
                let v = r.get(e, fi);
                if !(v >= 0.0 && v.is_finite()) {
                    out.push(format!("lambda[{e}][{fi}] = {v} is negative or not finite"));
                } else if v > 0.0 && !f.path.contains(&e) {
                    out.push(format!("lambda[{e}][{fi}] = {v} off the path of flow {fi}"));
                }
            }
            let residual = conservation_residual(inst, fi);
            if residual != 0.0 {
                out.push(format!("flow conservation violated for flow {fi} (residual {residual:e})"));
            }
        }
    }

    if inst.rates.len() != m {
        out.push(format!("{} rates for {m} links", inst.rates.len()));
    }
    let (r_lo, r_hi) = LINK_RATE_RANGE;
    for (e, &rate) in inst.rates.iter().enumerate() {
        if !(r_lo..=r_hi).contains(&rate) {
            out.push(format!("rate of link {e} = {rate} outside [{r_lo}, {r_hi}]"));
        }
    }
    out
}

/// `max_i |(Δ Λ_{*,f})_i - A_{i,f}|` for flow `f`.
pub fn conservation_residual(inst: &Instance, f: usize) -> f64 {
    let g = &inst.connectivity;
    let mut balance = vec![0.0; g.num_nodes()];
    for l in &g.links {
        let v = inst.routing.get(l.id, f);
        balance[l.src] += v;
        balance[l.dst] -= v;
    }
    let flow = &inst.flows.flows[f];
    let rate = inst.flows.arrival_rate(f);
    balance[flow.src] -= rate;
    balance[flow.dst] += rate;
    balance.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn path_problem(g: &ConnectivityGraph, f: &Flow) -> Option<String> {
    if f.src == f.dst {
        return Some("source equals destination".into());
    }
    if f.path.is_empty() {
        return Some("empty".into());
    }
    let mut visited = vec![f.src];
    let mut at = f.src;
    for &l in &f.path {
        let Some(link) = g.links.get(l) else {
            return Some(format!("unknown link {l}"));
        };
        if link.src != at {
            return Some(format!("link {l} does not start at node {at}"));
        }
        if visited.contains(&link.dst) {
            return Some(format!("revisits node {}", link.dst));
        }
        visited.push(link.dst);
        at = link.dst;
    }
    (at != f.dst).then(|| format!("ends at {at}, not {}", f.dst))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Instance {
        Instance::generate(20, 1.5, InstanceSeeds { topology: 3, realization: 9 }).unwrap()
    }

    #[test]
    fn fresh_instance_is_valid() {
        assert_eq!(validate_instance(&sample()), Vec::<String>::new());
    }

    #[test]
    fn negated_lambda_breaks_conservation_once() {
        let mut inst = sample();
        let l = inst.flows.flows[0].path[0];
        let v = inst.routing.get(l, 0);
        inst.routing.set(l, 0, -v);
        let v = validate_instance(&inst);
        assert_eq!(v.iter().filter(|s| s.contains("flow conservation")).count(), 1, "{v:?}");
    }

    #[test]
    fn asymmetric_conflicts_reported() {
        let mut inst = sample();
        let mut adj = inst.conflicts.adjacency();
        let far = (0..inst.num_links()).find(|&i| i != 0 && !adj[0].contains(&i)).unwrap();
        adj[0].push(far);
        inst.conflicts = ConflictGraph::from_adjacency(adj);
        let v = validate_instance(&inst);
        assert!(v.iter().any(|s| s.contains("asymmetry")), "{v:?}");
    }

    #[test]
    fn out_of_range_rate_reported() {
        let mut inst = sample();
        inst.rates[0] = 50.0;
        assert_eq!(validate_instance(&inst).len(), 1);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let inst = sample();
        let text = inst.to_json().unwrap();
        let back = Instance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.to_json().unwrap(), text);
        assert!(validate_instance(&back).is_empty());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["schema_version", "nodes", "links", "conflicts", "flows", "lambda", "rates", "beta", "seeds"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert!(v["flows"][0].get("a_f").is_some());
    }

    #[test]
    fn unknown_schema_version_rejected() {
        let text = sample().to_json().unwrap().replace("\"schema_version\":1", "\"schema_version\":2");
        assert!(Instance::from_json(&text).is_err());
    }

    #[test]
    fn with_load_rescales_routes() {
        let inst = sample();
        let heavy = inst.with_load(3.0).unwrap();
        for (a, b) in inst.link_loads().iter().zip(heavy.link_loads()) {
            assert!((b - 2.0 * a).abs() < 1e-12);
        }
        assert!(validate_instance(&heavy).is_empty());
    }
}
