use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::tree::TreeGraph;

/// Per-edge uniform grids including both endpoints. Vertex nodes are shared
/// logically: the last node of an edge and the first node of its children
/// represent the same point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    nodes: Vec<usize>,
    steps: Vec<f64>,
    origins: Vec<f64>,
}

impl GridSpec {
    pub fn new(tree: &TreeGraph, nodes: Vec<usize>) -> Result<Self> {
        if nodes.len() != tree.n_edges() {
            return Err(Error::Shape(format!("{} node counts for {} edges", nodes.len(), tree.n_edges())));
        }
        for (i, &n) in nodes.iter().enumerate() {
            if n < 3 {
                return Err(Error::GridTooCoarse { edge: i + 1, nodes: n, required: 3 });
            }
        }
        let steps = tree.edges().iter().zip(&nodes).map(|(e, &n)| e.length / (n - 1) as f64).collect();
        let origins = tree.edges().iter().map(|e| tree.coordinate(e.initial)).collect();
        Ok(Self { nodes, steps, origins })
    }

    pub fn uniform(tree: &TreeGraph, nodes_per_edge: usize) -> Result<Self> {
        Self::new(tree, vec![nodes_per_edge; tree.n_edges()])
    }

    /// Node counts chosen so every step is at most `h`.
    pub fn with_step(tree: &TreeGraph, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidParameter(format!("grid step must be positive, got {h}")));
        }
        let nodes = tree.edges().iter().map(|e| ((e.length / h).ceil() as usize + 1).max(3)).collect();
        Self::new(tree, nodes)
    }

    /// Same tree, every interval split in two.
    pub fn refined(&self) -> Self {
        let nodes: Vec<usize> = self.nodes.iter().map(|&n| 2 * n - 1).collect();
        let steps = self.steps.iter().map(|h| h / 2.0).collect();
        Self { nodes, steps, origins: self.origins.clone() }
    }

    pub fn n_edges(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self, edge: usize) -> usize {
        self.nodes[edge - 1]
    }

    pub fn step(&self, edge: usize) -> f64 {
        self.steps[edge - 1]
    }

    pub fn max_step(&self) -> f64 {
        self.steps.iter().copied().fold(0.0, f64::max)
    }

    /// Global coordinate of node `i` on `edge`.
    pub fn x(&self, edge: usize, i: usize) -> f64 {
        self.origins[edge - 1] + i as f64 * self.steps[edge - 1]
    }

    pub fn positions(&self, edge: usize) -> Vec<f64> {
        (0..self.nodes(edge)).map(|i| self.x(edge, i)).collect()
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.iter().sum()
    }

    /// Trapezoid weights on `edge`.
    pub fn quadrature_weight(&self, edge: usize, i: usize) -> f64 {
        let n = self.nodes(edge);
        let h = self.step(edge);
        if i == 0 || i == n - 1 {
            0.5 * h
        } else {
            h
        }
    }
}

/// Values sampled on every edge grid, keyed by edge index `id - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeField<T> {
    pub values: Vec<Vec<T>>,
}

pub type GridFunction = EdgeField<Complex64>;
pub type RealField = EdgeField<f64>;

impl<T: Clone> EdgeField<T> {
    pub fn filled(grid: &GridSpec, value: T) -> Self {
        Self { values: (1..=grid.n_edges()).map(|j| vec![value.clone(); grid.nodes(j)]).collect() }
    }

    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(usize, f64) -> T) -> Self {
        Self {
            values: (1..=grid.n_edges()).map(|j| (0..grid.nodes(j)).map(|i| f(j, grid.x(j, i))).collect()).collect(),
        }
    }

    pub fn edge(&self, id: usize) -> &[T] {
        &self.values[id - 1]
    }

    pub fn edge_mut(&mut self, id: usize) -> &mut [T] {
        &mut self.values[id - 1]
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> EdgeField<U> {
        EdgeField { values: self.values.iter().map(|v| v.iter().map(&mut f).collect()).collect() }
    }

    pub fn zip_map<U: Clone, V>(&self, other: &EdgeField<U>, mut f: impl FnMut(&T, &U) -> V) -> EdgeField<V> {
        EdgeField {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(x, y)).collect())
                .collect(),
        }
    }

    pub fn matches(&self, grid: &GridSpec) -> bool {
        self.values.len() == grid.n_edges() && self.values.iter().enumerate().all(|(i, v)| v.len() == grid.nodes(i + 1))
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.values.iter().flatten()
    }
}

impl GridFunction {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self::filled(grid, Complex64::new(0.0, 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.map(|z| z * factor)
    }

    /// Value at vertex `k` read from one of its incident edges.
    pub fn vertex_value(&self, tree: &TreeGraph, k: usize) -> Complex64 {
        if let Some(&j) = tree.ending_at(k).first() {
            *self.edge(j).last().expect("nonempty edge")
        } else {
            self.edge(tree.starting_at(k)[0])[0]
        }
    }

    /// Largest disagreement between copies of the same vertex value.
    pub fn continuity_gap(&self, tree: &TreeGraph) -> f64 {
        let mut gap = 0.0f64;
        for &k in tree.inner_vertices() {
            let v = self.vertex_value(tree, k);
            for &j in tree.starting_at(k) {
                gap = gap.max((self.edge(j)[0] - v).norm());
            }
            for &j in tree.ending_at(k) {
                gap = gap.max((self.edge(j).last().copied().unwrap_or_default() - v).norm());
            }
        }
        gap
    }
}

impl RealField {
    pub fn zeros_real(grid: &GridSpec) -> Self {
        Self::filled(grid, 0.0)
    }

    /// Per-edge constant values.
    pub fn piecewise(grid: &GridSpec, per_edge: &[f64]) -> Result<Self> {
        if per_edge.len() != grid.n_edges() {
            return Err(Error::Shape(format!("{} values for {} edges", per_edge.len(), grid.n_edges())));
        }
        Ok(Self::from_fn(grid, |j, _| per_edge[j - 1]))
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn to_complex(&self) -> GridFunction {
        self.map(|&v| Complex64::new(v, 0.0))
    }
}

/// Trapezoid integral of `f(node value)` over all edges.
pub fn integrate<T>(grid: &GridSpec, field: &EdgeField<T>, f: impl Fn(&T) -> f64) -> f64 {
    let mut total = 0.0;
    for (idx, values) in field.values.iter().enumerate() {
        let j = idx + 1;
        for (i, v) in values.iter().enumerate() {
            total += grid.quadrature_weight(j, i) * f(v);
        }
    }
    total
}
