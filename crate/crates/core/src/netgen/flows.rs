use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::topology::ConnectivityGraph;
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

pub const BASE_RATE_RANGE: (f64, f64) = (0.5, 1.5);
pub const LINK_RATE_RANGE: (f64, f64) = (10.0, 42.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
    /// Load-independent rate factor; packets arrive at `load * base_rate` per slot.
    #[serde(rename = "a_f")]
    pub base_rate: f64,
    /// Link ids from `src` to `dst`; empty until routed.
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSet {
    pub flows: Vec<Flow>,
    pub load: f64,
}

impl FlowSet {
    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    /// Exogenous Poisson arrival rate of flow `f`, packets per slot.
    pub fn arrival_rate(&self, f: usize) -> f64 {
        self.load * self.flows[f].base_rate
    }
}

/// Inclusive range of the flow count for a network of `num_nodes`:
/// `floor(0.15 n) ..= ceil(0.25 n)`.
pub fn flow_count_range(num_nodes: usize) -> (usize, usize) {
    (15 * num_nodes / 100, (25 * num_nodes).div_ceil(100))
}

/// Draws the flow count, endpoints (uniform over ordered pairs of distinct
/// nodes) and base rates. Paths are left empty.
pub fn sample_flows(g: &ConnectivityGraph, load: f64, seed: u64) -> Result<FlowSet> {
    if !(load > 0.0 && load.is_finite()) {
        return Err(Error::InvalidArgument(format!("load must be positive, got {load}")));
    }
    let n = g.num_nodes();
    if n < 2 {
        return Err(Error::InvalidArgument("flows need at least 2 nodes".into()));
    }
    let mut rng = stream_rng(seed, Stream::Flows);
    let (lo, hi) = flow_count_range(n);
    let count = rng.random_range(lo..=hi);
    let (a_lo, a_hi) = BASE_RATE_RANGE;
    let flows = (0..count)
        .map(|id| {
            let src = rng.random_range(0..n);
            let mut dst = rng.random_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            let base_rate = a_lo + (a_hi - a_lo) * rng.random::<f64>();
            Flow { id, src, dst, base_rate, path: Vec::new() }
        })
        .collect();
    Ok(FlowSet { flows, load })
}

/// Minimum-hop path from `src` to `dst` as link ids. Among equal-hop paths
/// the lexicographically smallest node sequence wins.
pub fn shortest_path(g: &ConnectivityGraph, src: usize, dst: usize) -> Result<Vec<usize>> {
    let n = g.num_nodes();
    // hop distance of every node to dst, over reversed links
    let mut into = vec![Vec::new(); n];
    for l in &g.links {
        into[l.dst].push(l.src);
    }
    let mut dist = vec![usize::MAX; n];
    dist[dst] = 0;
    let mut queue = VecDeque::from([dst]);
    while let Some(v) = queue.pop_front() {
        for &u in &into[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    if dist[src] == usize::MAX {
        return Err(Error::Unreachable { src, dst });
    }

    // greedy smallest next hop on the shortest-path DAG
    let out = g.out_links();
    let mut path = Vec::with_capacity(dist[src]);
    let mut at = src;
    while at != dst {
        let next = out[at]
            .iter()
            .map(|&l| &g.links[l])
            .filter(|l| dist[l.dst] + 1 == dist[at])
            .min_by_key(|l| l.dst)
            .expect("BFS layer has a successor");
        path.push(next.id);
        at = next.dst;
    }
    Ok(path)
}

/// Per-link, per-flow rate assignment `|E| x |F|` (packets per slot).
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingMatrix {
    num_links: usize,
    num_flows: usize,
    entries: Vec<f64>,
}

impl RoutingMatrix {
    pub fn zeros(num_links: usize, num_flows: usize) -> Self {
        RoutingMatrix { num_links, num_flows, entries: vec![0.0; num_links * num_flows] }
    }

    pub fn from_rows(num_flows: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_links = rows.len();
        let mut entries = Vec::with_capacity(num_links * num_flows);
        for row in rows {
            crate::error::check_len("routing row", row.len(), num_flows)?;
            entries.extend(row);
        }
        Ok(RoutingMatrix { num_links, num_flows, entries })
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn num_flows(&self) -> usize {
        self.num_flows
    }

    pub fn get(&self, link: usize, flow: usize) -> f64 {
        self.entries[link * self.num_flows + flow]
    }

    pub fn set(&mut self, link: usize, flow: usize, value: f64) {
        self.entries[link * self.num_flows + flow] = value;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        if self.num_flows == 0 {
            return vec![Vec::new(); self.num_links];
        }
        self.entries.chunks(self.num_flows).map(<[f64]>::to_vec).collect()
    }

    /// Aggregate arrival rate per link, `λ_e = Σ_f Λ[e][f]`.
    pub fn link_loads(&self) -> Vec<f64> {
        if self.num_flows == 0 {
            return vec![0.0; self.num_links];
        }
        self.entries.chunks(self.num_flows).map(|row| row.iter().sum()).collect()
    }

    /// Same routes with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.entries.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Routes every flow on its minimum-hop path and assigns `load * a_f` to
/// each link of the path.
pub fn shortest_path_routing(g: &ConnectivityGraph, flows: &mut FlowSet) -> Result<RoutingMatrix> {
    let mut routing = RoutingMatrix::zeros(g.num_links(), flows.len());
    for f in 0..flows.len() {
        let (src, dst) = (flows.flows[f].src, flows.flows[f].dst);
        let path = shortest_path(g, src, dst)?;
        let rate = flows.arrival_rate(f);
        for &l in &path {
            routing.set(l, f, rate);
        }
        flows.flows[f].path = path;
    }
    Ok(routing)
}

/// Long-term link rates, i.i.d. uniform on [10, 42] packets per slot.
pub fn sample_link_rates(g: &ConnectivityGraph, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Rates);
    let (lo, hi) = LINK_RATE_RANGE;
    (0..g.num_links()).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::generate_topology;

    #[test]
    fn flow_count_ranges() {
        assert_eq!(flow_count_range(20), (3, 5));
        assert_eq!(flow_count_range(50), (7, 13));
        assert_eq!(flow_count_range(100), (15, 25));
    }

    #[test]
    fn sampled_counts_stay_in_range() {
        let g = generate_topology(20, 1).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..200 {
            let fs = sample_flows(&g, 1.0, seed).unwrap();
            assert!((3..=5).contains(&fs.len()));
            seen.insert(fs.len());
            for f in &fs.flows {
                assert_ne!(f.src, f.dst);
                assert!((0.5..=1.5).contains(&f.base_rate));
            }
        }
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn zero_load_rejected() {
        let g = generate_topology(20, 1).unwrap();
        assert!(sample_flows(&g, 0.0, 0).is_err());
        assert!(sample_flows(&g, -1.0, 0).is_err());
    }

    #[test]
    fn adjacent_flow_takes_one_hop() {
        let g = ConnectivityGraph::from_positions(&[(0.0, 0.0), (0.5, 0.0), (1.2, 0.0)]);
        let mut fs = FlowSet {
            flows: vec![Flow { id: 0, src: 0, dst: 1, base_rate: 1.0, path: vec![] }],
            load: 2.0,
        };
        let r = shortest_path_routing(&g, &mut fs).unwrap();
        assert_eq!(fs.flows[0].path.len(), 1);
        let nonzero: Vec<f64> = (0..g.num_links()).map(|e| r.get(e, 0)).filter(|&v| v != 0.0).collect();
        assert_eq!(nonzero, vec![2.0]);
    }

    #[test]
    fn diamond_tie_break_prefers_smallest_sequence() {
        // 0 -> {1, 2} -> 3, both two hops; 1 and 2 out of range of each other
        let g = ConnectivityGraph::from_positions(&[(0.0, 0.0), (0.7, 0.7), (0.7, -0.7), (1.4, 0.0)]);
        assert!(g.link_between(0, 3).is_none());
        assert!(g.link_between(1, 2).is_none());
        let path = shortest_path(&g, 0, 3).unwrap();
        let nodes: Vec<usize> = std::iter::once(0).chain(path.iter().map(|&l| g.links[l].dst)).collect();
        assert_eq!(nodes, vec![0, 1, 3]);
        let back = shortest_path(&g, 3, 0).unwrap();
        let nodes: Vec<usize> = std::iter::once(3).chain(back.iter().map(|&l| g.links[l].dst)).collect();
        assert_eq!(nodes, vec![3, 1, 0]);
        assert_eq!(shortest_path(&g, 0, 3).unwrap(), path);
    }

    #[test]
    fn unreachable_destination() {
        let g = ConnectivityGraph::from_positions(&[(0.0, 0.0), (3.0, 0.0)]);
        assert!(matches!(shortest_path(&g, 0, 1), Err(Error::Unreachable { .. })));
    }

    #[test]
    fn link_rates_in_range_and_centered() {
        let positions: Vec<(f64, f64)> = (0..101).map(|i| (i as f64 * 0.9, 0.0)).collect();
        let g = ConnectivityGraph::from_positions(&positions);
        // chain of 101 nodes has 200 links; pool several seeds to reach 10^4 draws
        let mut all = Vec::new();
        for seed in 0..50 {
            let r = sample_link_rates(&g, seed);
            assert_eq!(r, sample_link_rates(&g, seed));
            all.extend(r);
        }
        assert_eq!(all.len(), 10_000);
        assert!(all.iter().all(|v| (10.0..=42.0).contains(v)));
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        assert!((mean - 26.0).abs() < 0.5, "mean {mean}");
    }
}
