//! Undirected simple graphs over dense node indices.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::hash::Hash;
use std::fmt::Display;

use thiserror::Error;

use crate::attributes::AttributeTable;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge endpoint `{0}` is not in the node list")]
    UnknownNodeId(String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("node id `{0}` appears more than once")]
    DuplicateNodeId(String),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("attribute table has {rows} rows but graph has {n} nodes")]
    AttributeShape { rows: usize, n: usize },
}

/// Undirected simple graph. Neighbour sets are ordered so that every
/// traversal is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    adj: Vec<BTreeSet<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Graph on `n` nodes with no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            adj: vec![BTreeSet::new(); n],
            edge_count: 0,
        }
    }

    /// Builds a graph from index pairs. Duplicates collapse; self-loops and
    /// out-of-range indices are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Graph::empty(n);
        for (i, j) in edges {
            for k in [i, j] {
                if k >= n {
                    return Err(GraphError::IndexOutOfRange { index: k, n });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop(i.to_string()));
            }
            g.add_edge(i, j);
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j);
            }
        }
        g
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Number of unordered node pairs, n(n-1)/2.
    pub fn dyad_count(&self) -> usize {
        let n = self.node_count();
        n * n.saturating_sub(1) / 2
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains(&j)
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].iter().copied()
    }

    /// Adds `{i, j}`; returns false if it was already present.
    ///
    /// Panics on a self-loop.
    pub fn add_edge(&mut self, i: usize, j: usize) -> bool {
        assert_ne!(i, j, "self-loops are not allowed");
        if self.adj[i].insert(j) {
            self.adj[j].insert(i);
            self.edge_count += 1;
            true
        } else {
            false
        }
    }

    /// Removes `{i, j}`; returns false if it was absent.
    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        if self.adj[i].remove(&j) {
            self.adj[j].remove(&i);
            self.edge_count -= 1;
            true
        } else {
            false
        }
    }

    /// Flips the dyad and returns whether the edge is present afterwards.
    pub fn toggle(&mut self, i: usize, j: usize) -> bool {
        if self.remove_edge(i, j) {
            false
        } else {
            self.add_edge(i, j);
            true
        }
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, nb)| {
            nb.range(i + 1..).map(move |&j| (i, j))
        })
    }

    pub fn degree_sequence(&self) -> Vec<usize> {
        self.adj.iter().map(BTreeSet::len).collect()
    }

    /// Subgraph induced by `nodes`; node `k` of the result is `nodes[k]`.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let mut position = vec![usize::MAX; self.node_count()];
        for (k, &v) in nodes.iter().enumerate() {
            position[v] = k;
        }
        let mut sub = Graph::empty(nodes.len());
        for (k, &v) in nodes.iter().enumerate() {
            for u in self.neighbors(v) {
                let m = position[u];
                if m != usize::MAX && k < m {
                    sub.add_edge(k, m);
                }
            }
        }
        sub
    }

    pub fn components(&self) -> ComponentLabeling {
        let n = self.node_count();
        let mut labels = vec![usize::MAX; n];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if labels[start] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            labels[start] = id;
            queue.push_back(start);
            let mut size = 0;
            while let Some(v) = queue.pop_front() {
                size += 1;
                for u in self.neighbors(v) {
                    if labels[u] == usize::MAX {
                        labels[u] = id;
                        queue.push_back(u);
                    }
                }
            }
            sizes.push(size);
        }
        ComponentLabeling { labels, sizes }
    }
}

/// Connected components. Ids are assigned in order of each component's
/// smallest node index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Largest component; ties go to the one holding the smallest node index.
    pub fn largest(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (id, &size) in self.sizes.iter().enumerate() {
            match best {
                Some(b) if self.sizes[b] >= size => {}
                _ => best = Some(id),
            }
        }
        best
    }

    pub fn members(&self, id: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l == id)
            .map(|(v, _)| v)
            .collect()
    }
}

/// Builds a graph from id pairs. Node `k` is `node_ids[k]`; reversed and
/// repeated pairs collapse to a single edge.
pub fn load_graph<T>(edge_list: &[(T, T)], node_ids: &[T]) -> Result<Graph, GraphError>
where
    T: Eq + Hash + Display,
{
    let mut index = HashMap::with_capacity(node_ids.len());
    for (k, id) in node_ids.iter().enumerate() {
        if index.insert(id, k).is_some() {
            return Err(GraphError::DuplicateNodeId(id.to_string()));
        }
    }
    let mut g = Graph::empty(node_ids.len());
    for (a, b) in edge_list {
        let i = *index
            .get(a)
            .ok_or_else(|| GraphError::UnknownNodeId(a.to_string()))?;
        let j = *index
            .get(b)
            .ok_or_else(|| GraphError::UnknownNodeId(b.to_string()))?;
        if i == j {
            return Err(GraphError::SelfLoop(a.to_string()));
        }
        g.add_edge(i, j);
    }
    Ok(g)
}

pub fn degree_sequence(g: &Graph) -> Vec<usize> {
    g.degree_sequence()
}

/// Largest connected component with its attribute rows. The returned map
/// sends each new node index to its index in `g`.
pub fn largest_connected_component(
    g: &Graph,
    attrs: &AttributeTable,
) -> Result<(Graph, AttributeTable, Vec<usize>), GraphError> {
    if g.node_count() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    if attrs.row_count() != g.node_count() {
        return Err(GraphError::AttributeShape {
            rows: attrs.row_count(),
            n: g.node_count(),
        });
    }
    let comps = g.components();
    let id = comps.largest().ok_or(GraphError::EmptyGraph)?;
    let nodes = comps.members(id);
    Ok((g.induced_subgraph(&nodes), attrs.select_rows(&nodes), nodes))
}
