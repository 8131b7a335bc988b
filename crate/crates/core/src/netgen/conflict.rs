use super::topology::ConnectivityGraph;

/// Undirected conflict graph whose vertices are links.
///
/// Adjacency is kept in compressed rows. Each adjacency entry also carries
/// the id of its undirected edge so per-edge quantities (joint contention
/// probabilities) can be looked up from either endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConflictGraph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    neighbor_edges: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

impl ConflictGraph {
    /// Builds from per-link neighbor lists taken as given. Lists are sorted
    /// and deduplicated but not symmetrized, so a malformed input stays
    /// visible to [`ConflictGraph::violations`].
    pub fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(adjacency.len() + 1);
        let mut neighbors = Vec::new();
        let mut neighbor_edges = Vec::new();
        let mut edges = Vec::new();
        offsets.push(0);
        for (e, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            for &i in list.iter() {
                // an edge to an earlier link was numbered in that link's row
                let earlier = (i < e)
                    .then(|| {
                        let row = offsets[i]..offsets[i + 1];
                        neighbors[row.clone()].binary_search(&e).ok().map(|k| neighbor_edges[row.start + k])
                    })
                    .flatten();
                let id = earlier.unwrap_or_else(|| {
                    edges.push((e.min(i), e.max(i)));
                    edges.len() - 1
                });
                neighbors.push(i);
                neighbor_edges.push(id);
            }
            offsets.push(neighbors.len());
        }
        ConflictGraph { offsets, neighbors, neighbor_edges, edges }
    }

    /// Symmetric graph from an undirected edge list.
    pub fn from_edges(num_links: usize, pairs: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![Vec::new(); num_links];
        for &(a, b) in pairs {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        Self::from_adjacency(adjacency)
    }

    /// Interface conflicts: two distinct links conflict iff they share an
    /// endpoint node, in either role.
    pub fn interface(g: &ConnectivityGraph) -> Self {
        let mut incident = vec![Vec::new(); g.num_nodes()];
        for l in &g.links {
            incident[l.src].push(l.id);
            incident[l.dst].push(l.id);
        }
        let adjacency = g
            .links
            .iter()
            .map(|l| {
                incident[l.src]
                    .iter()
                    .chain(&incident[l.dst])
                    .copied()
                    .filter(|&i| i != l.id)
                    .collect()
            })
            .collect();
        Self::from_adjacency(adjacency)
    }

    pub fn num_links(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges `(a, b)` with `a <= b`, indexed by edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, e: usize) -> &[usize] {
        &self.neighbors[self.offsets[e]..self.offsets[e + 1]]
    }

    /// Edge ids parallel to [`ConflictGraph::neighbors`].
    pub fn neighbor_edges(&self, e: usize) -> &[usize] {
        &self.neighbor_edges[self.offsets[e]..self.offsets[e + 1]]
    }

    pub fn degree(&self, e: usize) -> usize {
        self.offsets[e + 1] - self.offsets[e]
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.num_links()).map(|e| self.neighbors(e).to_vec()).collect()
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// True iff no two selected links conflict.
    pub fn is_independent(&self, selected: &[bool]) -> bool {
        self.edges.iter().all(|&(a, b)| !(selected[a] && selected[b]))
    }

    /// Induced subgraph on `keep` (ascending link ids); link `keep[k]`
    /// becomes link `k`.
    pub fn induced(&self, keep: &[usize]) -> ConflictGraph {
        let mut local = vec![usize::MAX; self.num_links()];
        for (k, &e) in keep.iter().enumerate() {
            local[e] = k;
        }
        let adjacency = keep
            .iter()
            .map(|&e| {
                self.neighbors(e)
                    .iter()
                    .filter_map(|&i| (local[i] != usize::MAX).then_some(local[i]))
                    .collect()
            })
            .collect();
        Self::from_adjacency(adjacency)
    }

    /// Structural problems: self-loops, out-of-range ids, asymmetric entries.
    pub fn violations(&self) -> Vec<String> {
        let n = self.num_links();
        let mut out = Vec::new();
        for e in 0..n {
            for &i in self.neighbors(e) {
                if i >= n {
                    out.push(format!("conflict adjacency of link {e} names unknown link {i}"));
                } else if i == e {
                    out.push(format!("conflict self-loop on link {e}"));
                } else if !self.are_adjacent(i, e) {
                    out.push(format!("conflict asymmetry: {i} in adjacency({e}) but {e} not in adjacency({i})"));
                }
            }
        }
        out
    }
}
