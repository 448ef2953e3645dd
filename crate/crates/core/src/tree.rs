//! Rooted metric trees.
//!
//! Vertex 0 is the root and must be a boundary vertex. Every other vertex
//! hangs below exactly one parent edge, so each edge has an initial node
//! (closer to the root) and a terminal node. The coordinate of a point is
//! its path distance from the root.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One edge of the input description: `parent -> child` with the given length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: usize,
    pub parent: usize,
    pub child: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub coordinate: f64,
    /// Edge arriving from the root side; `None` for the root.
    pub parent_edge: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: usize,
    pub initial: usize,
    pub terminal: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
    boundary: Vec<usize>,
    inner: Vec<usize>,
    order: Vec<usize>,
}

/// Uniform bound `M` of the admissible potential set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialBound(f64);

impl PotentialBound {
    pub fn new(m: f64) -> Result<Self> {
        if m > 0.0 && m.is_finite() {
            Ok(Self(m))
        } else {
            Err(Error::InvalidParameter(format!("potential bound M must be positive, got {m}")))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Membership test for a collection of nodal or parameter values.
    pub fn admits<'a>(&self, values: impl IntoIterator<Item = &'a f64>) -> bool {
        values.into_iter().all(|v| v.abs() <= self.0)
    }
}

/// Validates a parent/child edge list and computes coordinates and incidence sets.
pub fn build_tree(edge_list: &[EdgeSpec]) -> Result<TreeGraph> {
    let n = edge_list.len();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut by_id: Vec<Option<EdgeSpec>> = vec![None; n];
    for e in edge_list {
        if e.id == 0 || e.id > n || by_id[e.id - 1].is_some() {
            return Err(Error::EdgeId { id: e.id, expected: n });
        }
        for v in [e.parent, e.child] {
            if v > n {
                return Err(Error::VertexId { edge: e.id, vertex: v, max: n });
            }
        }
        if !(e.length > 0.0 && e.length.is_finite()) {
            return Err(Error::NonPositiveLength { edge: e.id, length: e.length });
        }
        if e.parent == e.child {
            return Err(Error::Cycle { vertex: e.parent });
        }
        by_id[e.id - 1] = Some(*e);
    }
    let specs: Vec<EdgeSpec> = by_id.into_iter().map(|e| e.expect("dense ids")).collect();

    let mut parent_edge: Vec<Option<usize>> = vec![None; n + 1];
    let mut outgoing = vec![Vec::new(); n + 1];
    let mut incoming = vec![Vec::new(); n + 1];
    for e in &specs {
        if e.child == 0 || parent_edge[e.child].is_some() {
            // A second way into the same vertex closes an undirected cycle.
            return Err(Error::Cycle { vertex: e.child });
        }
        parent_edge[e.child] = Some(e.id);
        outgoing[e.parent].push(e.id);
        incoming[e.child].push(e.id);
    }
    if outgoing[0].len() != 1 {
        return Err(Error::RootNotBoundary { degree: outgoing[0].len() });
    }

    let mut coordinate = vec![f64::NAN; n + 1];
    let mut seen = vec![false; n + 1];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([0usize]);
    coordinate[0] = 0.0;
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &j in &outgoing[v] {
            let e = &specs[j - 1];
            if seen[e.child] {
                return Err(Error::Cycle { vertex: e.child });
            }
            seen[e.child] = true;
            coordinate[e.child] = coordinate[v] + e.length;
            order.push(j);
            queue.push_back(e.child);
        }
    }
    if let Some(v) = (0..=n).find(|&v| !seen[v]) {
        // Unreached vertices either sit on a parent cycle or float free.
        let mut cur = v;
        let mut steps = 0;
        while let Some(j) = parent_edge[cur] {
            cur = specs[j - 1].parent;
            steps += 1;
            if cur == v || steps > n {
                return Err(Error::Cycle { vertex: v });
            }
        }
        return Err(Error::Disconnected { vertex: v });
    }

    let vertices = (0..=n).map(|id| Vertex { id, coordinate: coordinate[id], parent_edge: parent_edge[id] }).collect();
    let edges =
        specs.iter().map(|e| Edge { id: e.id, initial: e.parent, terminal: e.child, length: e.length }).collect();
    for list in outgoing.iter_mut().chain(incoming.iter_mut()) {
        list.sort_unstable();
    }
    let boundary = (0..=n).filter(|&k| outgoing[k].len() + incoming[k].len() == 1).collect();
    let inner = (0..=n).filter(|&k| outgoing[k].len() + incoming[k].len() > 1).collect();

    Ok(TreeGraph { vertices, edges, outgoing, incoming, boundary, inner, order })
}

impl TreeGraph {
    /// Number of edges `N`.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge by 1-based id. Panics on an unknown id; use [`TreeGraph::try_edge`] for input.
    pub fn edge(&self, id: usize) -> &Edge {
        &self.edges[id - 1]
    }

    pub fn try_edge(&self, id: usize) -> Result<&Edge> {
        if id == 0 || id > self.edges.len() {
            return Err(Error::UnknownEdge(id));
        }
        Ok(&self.edges[id - 1])
    }

    pub fn vertex(&self, id: usize) -> &Vertex {
        &self.vertices[id]
    }

    pub fn coordinate(&self, vertex: usize) -> f64 {
        self.vertices[vertex].coordinate
    }

    /// Interval `(x(I_j), x(T_j))` of edge `j`.
    pub fn interval(&self, edge: usize) -> (f64, f64) {
        let e = self.edge(edge);
        (self.coordinate(e.initial), self.coordinate(e.terminal))
    }

    /// `S_I(k)`: edges whose initial node is `k`.
    pub fn starting_at(&self, k: usize) -> &[usize] {
        &self.outgoing[k]
    }

    /// `S_T(k)`: edges whose terminal node is `k`.
    pub fn ending_at(&self, k: usize) -> &[usize] {
        &self.incoming[k]
    }

    /// Boundary vertices (degree one), ascending.
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary
    }

    /// Inner vertices (degree above one), ascending.
    pub fn inner_vertices(&self) -> &[usize] {
        &self.inner
    }

    /// Boundary vertices other than the root.
    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.boundary.iter().copied().filter(|&k| k != 0)
    }

    /// The unique edge incident to a boundary vertex.
    pub fn boundary_edge(&self, k: usize) -> Option<usize> {
        if self.outgoing[k].len() + self.incoming[k].len() != 1 {
            return None;
        }
        self.outgoing[k].first().or(self.incoming[k].first()).copied()
    }

    /// Edge ids in breadth-first order from the root edge.
    pub fn root_to_leaf_order(&self) -> &[usize] {
        &self.order
    }

    pub fn root_edge(&self) -> usize {
        self.outgoing[0][0]
    }

    pub fn max_coordinate(&self) -> f64 {
        self.vertices.iter().map(|v| v.coordinate).fold(0.0, f64::max)
    }

    /// `d(k, j)`: +1 when `j` terminates at `k`, -1 when it starts there, 0 otherwise.
    pub fn direction_sign(&self, k: usize, j: usize) -> Result<i8> {
        if k >= self.vertices.len() {
            return Err(Error::UnknownVertex(k));
        }
        let e = self.try_edge(j)?;
        Ok(if e.terminal == k {
            1
        } else if e.initial == k {
            -1
        } else {
            0
        })
    }

    /// Multipliers `eta_j`: 1 on the root edge and `|S_I(k)|^2 eta_parent` below vertex `k`.
    pub fn eta_multipliers(&self) -> Vec<f64> {
        let mut eta = vec![0.0; self.edges.len()];
        for &j in &self.order {
            let e = self.edge(j);
            eta[j - 1] = match self.vertices[e.initial].parent_edge {
                None => 1.0,
                Some(parent) => {
                    let fan = self.outgoing[e.initial].len() as f64;
                    fan * fan * eta[parent - 1]
                }
            };
        }
        eta
    }

    pub fn edge_specs(&self) -> Vec<EdgeSpec> {
        self.edges
            .iter()
            .map(|e| EdgeSpec { id: e.id, parent: e.initial, child: e.terminal, length: e.length })
            .collect()
    }

    pub fn to_document(&self, horizon: f64) -> GraphDocument {
        GraphDocument { horizon, edges: self.edge_specs() }
    }
}

/// Graph description file: `{ "T": .., "edges": [{"id","parent","child","length"}] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub edges: Vec<EdgeSpec>,
}

impl GraphDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDocument = serde_json::from_str(text)?;
        if !(doc.horizon > 0.0 && doc.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {}", doc.horizon)));
        }
        Ok(doc)
    }

    pub fn build(&self) -> Result<TreeGraph> {
        build_tree(&self.edges)
    }
}

/// The five-edge example tree with unit lengths: V0-V1, V1-{V2,V3}, V2-{V4,V5}.
pub fn five_edge_example() -> TreeGraph {
    let spec = |id, parent, child| EdgeSpec { id, parent, child, length: 1.0 };
    build_tree(&[spec(1, 0, 1), spec(2, 1, 2), spec(3, 1, 3), spec(4, 2, 4), spec(5, 2, 5)])
        .expect("example tree is valid")
}

/// A path of `n` edges with the given common length.
pub fn path_tree(n: usize, length: f64) -> Result<TreeGraph> {
    let specs: Vec<EdgeSpec> = (1..=n).map(|j| EdgeSpec { id: j, parent: j - 1, child: j, length }).collect();
    build_tree(&specs)
}

/// Random tree with `n` edges: each new vertex attaches to a uniformly chosen
/// existing vertex other than the root (except for the first edge). Lengths are
/// drawn from `lengths` and rounded to multiples of 1/64 so they are exact in binary.
pub fn random_tree<R: rand::Rng>(rng: &mut R, n: usize, lengths: (f64, f64)) -> Result<TreeGraph> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut specs = Vec::with_capacity(n);
    for j in 1..=n {
        let parent = if j == 1 { 0 } else { rng.gen_range(1..j) };
        let raw: f64 = rng.gen_range(lengths.0..=lengths.1);
        let length = ((raw * 64.0).round() / 64.0).clamp(lengths.0, lengths.1);
        specs.push(EdgeSpec { id: j, parent, child: j, length });
    }
    build_tree(&specs)
}
