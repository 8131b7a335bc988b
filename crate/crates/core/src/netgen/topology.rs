use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{derive_seed, stream_rng, Stream};
use crate::{Error, Result};

/// Nodes per unit area.
pub const NODE_DENSITY: f64 = 8.0 / std::f64::consts::PI;
/// Two nodes are linked iff they are at most this far apart.
pub const LINK_RANGE: f64 = 1.0;
/// Placements tried before giving up on a connected topology.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

/// A directed link `src -> dst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub id: usize,
    pub src: usize,
    pub dst: usize,
}

impl Link {
    pub fn touches(&self, node: usize) -> bool {
        self.src == node || self.dst == node
    }

    pub fn shares_endpoint(&self, other: &Link) -> bool {
        self.touches(other.src) || self.touches(other.dst)
    }
}

/// Directed unit-disk graph over placed nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityGraph {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
}

impl ConnectivityGraph {
    /// Links every ordered pair of distinct nodes within [`LINK_RANGE`].
    /// Link ids follow lexicographic `(src, dst)` order.
    pub fn from_positions(positions: &[(f64, f64)]) -> Self {
        let nodes: Vec<Node> = positions
            .iter()
            .enumerate()
            .map(|(id, &(x, y))| Node { id, x, y })
            .collect();
        let mut links = Vec::new();
        for a in &nodes {
            for b in &nodes {
                if a.id != b.id && distance(a, b) <= LINK_RANGE {
                    links.push(Link { id: links.len(), src: a.id, dst: b.id });
                }
            }
        }
        ConnectivityGraph { nodes, links }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Outgoing link ids per node, in link-id order.
    pub fn out_links(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for l in &self.links {
            out[l.src].push(l.id);
        }
        out
    }

    pub fn link_between(&self, src: usize, dst: usize) -> Option<usize> {
        self.links.iter().find(|l| l.src == src && l.dst == dst).map(|l| l.id)
    }

    /// Connectivity of the underlying undirected graph. With bidirectional
    /// links this is equivalent to strong connectivity.
    pub fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for l in &self.links {
            adj[l.src].push(l.dst);
            adj[l.dst].push(l.src);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Node-edge incidence matrix, `|V|` rows by `|E|` columns: `+1` where the
    /// link leaves the node, `-1` where it enters.
    pub fn incidence_matrix(&self) -> Vec<Vec<i32>> {
        let mut m = vec![vec![0; self.links.len()]; self.nodes.len()];
        for l in &self.links {
            m[l.src][l.id] += 1;
            m[l.dst][l.id] -= 1;
        }
        m
    }
}

pub fn distance(a: &Node, b: &Node) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Side of the square that holds `num_nodes` at [`NODE_DENSITY`].
pub fn square_side(num_nodes: usize) -> f64 {
    (num_nodes as f64 / NODE_DENSITY).sqrt()
}

/// Places `num_nodes` uniformly in a square at the fixed node density and
/// links every pair within range. Placements that leave the graph
/// disconnected are redrawn from a fresh sub-seed.
pub fn generate_topology(num_nodes: usize, seed: u64) -> Result<ConnectivityGraph> {
    if num_nodes < 2 {
        return Err(Error::InvalidArgument(format!(
            "topology needs at least 2 nodes, got {num_nodes}"
        )));
    }
    let side = square_side(num_nodes);
    for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
        let mut rng = stream_rng(derive_seed(seed, attempt as u64), Stream::Topology);
        let positions: Vec<(f64, f64)> = (0..num_nodes)
            .map(|_| (rng.random::<f64>() * side, rng.random::<f64>() * side))
            .collect();
        let g = ConnectivityGraph::from_positions(&positions);
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Disconnected { nodes: num_nodes, seed, attempts: MAX_PLACEMENT_ATTEMPTS })
}
