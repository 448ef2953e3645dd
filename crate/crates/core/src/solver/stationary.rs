//! Stationary problems `U'' + q U = F` on the tree with Kirchhoff coupling.
//!
//! Every edge interior is a tridiagonal block. The interior is eliminated edge
//! by edge, leaving a small dense system in the vertex values: Dirichlet rows at
//! boundary vertices and flux-balance rows at inner vertices. The flux uses the
//! 3-point one-sided stencils, with derivatives taken in the global coordinate.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num::complex::Complex64;
use num::Zero;

use super::grid::{GridFunction, GridSpec, RealField};
use super::tridiag::TridiagLu;
use crate::error::{Error, Result};
use crate::tree::TreeGraph;

/// Condition estimates above this are treated as a (near-)resonant frequency.
pub const CONDITION_LIMIT: f64 = 1e10;

/// Boundary values keyed by boundary vertex id; absent vertices get zero.
pub type BoundaryValues = BTreeMap<usize, Complex64>;

const INITIAL_STENCIL: [f64; 3] = [-1.5, 2.0, -0.5];
const TERMINAL_STENCIL: [f64; 3] = [0.5, -2.0, 1.5];

#[derive(Debug, Clone)]
struct EdgeBlock {
    lu: TridiagLu,
    h: f64,
    from_initial: Vec<Complex64>,
    from_terminal: Vec<Complex64>,
}

impl EdgeBlock {
    /// Full edge vector from interior particular part and endpoint values.
    fn assemble(&self, particular: &[Complex64], ui: Complex64, ut: Complex64) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(particular.len() + 2);
        out.push(ui);
        for ((p, a), b) in particular.iter().zip(&self.from_initial).zip(&self.from_terminal) {
            out.push(p + ui * a + ut * b);
        }
        out.push(ut);
        out
    }

    /// Affine form `(const, coef_initial, coef_terminal)` of the one-sided
    /// derivative at either end.
    fn end_derivative(&self, particular: &[Complex64], at_terminal: bool) -> [Complex64; 3] {
        let zero = Complex64::zero();
        let one = Complex64::new(1.0, 0.0);
        let m = particular.len();
        // node i in 0..m+2 as (particular, initial coef, terminal coef)
        let node = |i: usize| -> [Complex64; 3] {
            if i == 0 {
                [zero, one, zero]
            } else if i == m + 1 {
                [zero, zero, one]
            } else {
                [particular[i - 1], self.from_initial[i - 1], self.from_terminal[i - 1]]
            }
        };
        let (stencil, first) = if at_terminal { (TERMINAL_STENCIL, m - 1) } else { (INITIAL_STENCIL, 0) };
        let mut acc = [zero; 3];
        for (w, i) in stencil.iter().zip(first..first + 3) {
            let v = node(i);
            for c in 0..3 {
                acc[c] += v[c] * (*w / self.h);
            }
        }
        acc
    }
}

/// Factorization of the operator `U -> U'' + q U` with Kirchhoff coupling,
/// reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct HelmholtzFactor {
    tree: TreeGraph,
    grid: GridSpec,
    q: GridFunction,
    blocks: Vec<EdgeBlock>,
    vertex_lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    row_scale: Vec<f64>,
    condition: f64,
}

impl HelmholtzFactor {
    pub fn new(tree: &TreeGraph, grid: &GridSpec, q: &GridFunction) -> Result<Self> {
        if grid.n_edges() != tree.n_edges() || !q.matches(grid) {
            return Err(Error::Shape("coefficient does not match the grid".into()));
        }
        let mut condition = 0.0f64;
        let mut blocks = Vec::with_capacity(tree.n_edges());
        for e in tree.edges() {
            let n = grid.nodes(e.id);
            let h = grid.step(e.id);
            let m = n - 2;
            let qe = q.edge(e.id);
            let off = vec![Complex64::new(1.0, 0.0); m - 1];
            let diag: Vec<Complex64> = (1..=m).map(|i| Complex64::new(-2.0, 0.0) + qe[i] * (h * h)).collect();
            let lu = TridiagLu::factor(&off, &diag, &off)
                .map_err(|p| Error::Singular(format!("edge {} interior pivot {}", e.id, p.0)))?;
            condition = condition.max(lu.condition_estimate().unwrap_or(f64::INFINITY));
            let mut unit = vec![Complex64::zero(); m];
            unit[0] = Complex64::new(-1.0, 0.0);
            let from_initial = lu.solve(&unit);
            unit[0] = Complex64::zero();
            unit[m - 1] = Complex64::new(-1.0, 0.0);
            let from_terminal = lu.solve(&unit);
            blocks.push(EdgeBlock { lu, h, from_initial, from_terminal });
        }

        let nv = tree.n_vertices();
        let mut s = DMatrix::<Complex64>::zeros(nv, nv);
        let zeros: Vec<Vec<Complex64>> = blocks.iter().map(|b| vec![Complex64::zero(); b.from_initial.len()]).collect();
        for k in 0..nv {
            if tree.inner_vertices().binary_search(&k).is_err() {
                s[(k, k)] = Complex64::new(1.0, 0.0);
                continue;
            }
            for &j in tree.ending_at(k) {
                let e = tree.edge(j);
                let [_, ci, ct] = blocks[j - 1].end_derivative(&zeros[j - 1], true);
                s[(k, e.initial)] += ci;
                s[(k, k)] += ct;
            }
            for &j in tree.starting_at(k) {
                let e = tree.edge(j);
                let [_, ci, ct] = blocks[j - 1].end_derivative(&zeros[j - 1], false);
                s[(k, k)] -= ci;
                s[(k, e.terminal)] -= ct;
            }
        }
        let row_scale: Vec<f64> = (0..nv)
            .map(|k| {
                let m = s.row(k).iter().map(|z| z.norm()).fold(0.0, f64::max);
                if m > 0.0 {
                    1.0 / m
                } else {
                    1.0
                }
            })
            .collect();
        for (k, &r) in row_scale.iter().enumerate() {
            let scale = Complex64::new(r, 0.0);
            s.row_mut(k).iter_mut().for_each(|z| *z *= scale);
        }
        let inverse = s.clone().try_inverse().ok_or_else(|| Error::Singular("vertex coupling system".into()))?;
        condition = condition.max(norm1(&s) * norm1(&inverse));
        if !(condition <= CONDITION_LIMIT) {
            return Err(Error::NearSingular { cond: condition, threshold: CONDITION_LIMIT });
        }
        Ok(Self {
            tree: tree.clone(),
            grid: grid.clone(),
            q: q.clone(),
            blocks,
            vertex_lu: s.lu(),
            row_scale,
            condition,
        })
    }

    /// Max of the edge-block and vertex-system 1-norm condition estimates.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn solve(&self, source: &GridFunction, boundary: &BoundaryValues) -> Result<GridFunction> {
        let tree = &self.tree;
        if !source.matches(&self.grid) {
            return Err(Error::Shape("source does not match the grid".into()));
        }
        for &k in boundary.keys() {
            if tree.boundary_vertices().binary_search(&k).is_err() {
                return Err(Error::InvalidParameter(format!("vertex {k} is not a boundary vertex")));
            }
        }
        let particular: Vec<Vec<Complex64>> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(idx, b)| {
                let f = source.edge(idx + 1);
                let h2 = b.h * b.h;
                let rhs: Vec<Complex64> = f[1..f.len() - 1].iter().map(|v| v * h2).collect();
                b.lu.solve(&rhs)
            })
            .collect();

        let nv = tree.n_vertices();
        let mut rhs = DVector::<Complex64>::zeros(nv);
        for k in 0..nv {
            if tree.inner_vertices().binary_search(&k).is_err() {
                rhs[k] = boundary.get(&k).copied().unwrap_or_default();
            } else {
                let mut acc = Complex64::zero();
                for &j in tree.ending_at(k) {
                    acc -= self.blocks[j - 1].end_derivative(&particular[j - 1], true)[0];
                }
                for &j in tree.starting_at(k) {
                    acc += self.blocks[j - 1].end_derivative(&particular[j - 1], false)[0];
                }
                rhs[k] = acc;
            }
            rhs[k] *= self.row_scale[k];
        }
        let vertex = self.vertex_lu.solve(&rhs).ok_or_else(|| Error::Singular("vertex coupling system".into()))?;

        let values = tree
            .edges()
            .iter()
            .map(|e| self.blocks[e.id - 1].assemble(&particular[e.id - 1], vertex[e.initial], vertex[e.terminal]))
            .collect();
        Ok(GridFunction { values })
    }

    /// Max residual of the discrete equations (interior, flux and Dirichlet rows).
    pub fn residual(&self, u: &GridFunction, source: &GridFunction, boundary: &BoundaryValues) -> f64 {
        discrete_residual(&self.tree, &self.grid, &self.q, u, source, boundary)
    }
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Derivatives of `u` at the initial and terminal ends of `edge`.
pub fn end_derivatives(grid: &GridSpec, u: &GridFunction, edge: usize) -> (Complex64, Complex64) {
    let v = u.edge(edge);
    let h = grid.step(edge);
    let n = v.len();
    let di = (INITIAL_STENCIL[0] * v[0] + INITIAL_STENCIL[1] * v[1] + INITIAL_STENCIL[2] * v[2]) / h;
    let dt = (TERMINAL_STENCIL[0] * v[n - 3] + TERMINAL_STENCIL[1] * v[n - 2] + TERMINAL_STENCIL[2] * v[n - 1]) / h;
    (di, dt)
}

/// `sum_{S_T(k)} d_x u - sum_{S_I(k)} d_x u` at an inner vertex.
pub fn flux_imbalance(tree: &TreeGraph, grid: &GridSpec, u: &GridFunction, k: usize) -> Complex64 {
    let mut acc = Complex64::zero();
    for &j in tree.ending_at(k) {
        acc += end_derivatives(grid, u, j).1;
    }
    for &j in tree.starting_at(k) {
        acc -= end_derivatives(grid, u, j).0;
    }
    acc
}

pub fn discrete_residual(
    tree: &TreeGraph,
    grid: &GridSpec,
    q: &GridFunction,
    u: &GridFunction,
    source: &GridFunction,
    boundary: &BoundaryValues,
) -> f64 {
    let mut worst = u.continuity_gap(tree);
    for e in tree.edges() {
        let h = grid.step(e.id);
        let (v, qe, f) = (u.edge(e.id), q.edge(e.id), source.edge(e.id));
        for i in 1..v.len() - 1 {
            let r = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / (h * h) + qe[i] * v[i] - f[i];
            worst = worst.max(r.norm());
        }
    }
    for &k in tree.inner_vertices() {
        worst = worst.max(flux_imbalance(tree, grid, u, k).norm());
    }
    for &k in tree.boundary_vertices() {
        let want = boundary.get(&k).copied().unwrap_or_default();
        worst = worst.max((u.vertex_value(tree, k) - want).norm());
    }
    worst
}

/// Modal stationary problem: `U'' + (p + omega) U = F`.
#[derive(Debug, Clone)]
pub struct StationaryProblem {
    pub omega: f64,
    pub phase: f64,
    pub potential: RealField,
    pub source: GridFunction,
    pub boundary: BoundaryValues,
}

#[derive(Debug, Clone)]
pub struct StationarySolution {
    pub profile: GridFunction,
    pub residual: f64,
    pub condition: f64,
}

pub fn shifted_coefficient(potential: &RealField, shift: Complex64) -> GridFunction {
    potential.map(|&p| Complex64::new(p, 0.0) + shift)
}

pub fn solve_stationary(tree: &TreeGraph, grid: &GridSpec, problem: &StationaryProblem) -> Result<StationarySolution> {
    if problem.omega < 0.0 {
        return Err(Error::InvalidParameter(format!("omega must be nonnegative, got {}", problem.omega)));
    }
    if !problem.potential.matches(grid) {
        return Err(Error::Shape("potential does not match the grid".into()));
    }
    let q = shifted_coefficient(&problem.potential, Complex64::new(problem.omega, 0.0));
    let factor = HelmholtzFactor::new(tree, grid, &q)?;
    let profile = factor.solve(&problem.source, &problem.boundary)?;
    let residual = factor.residual(&profile, &problem.source, &problem.boundary);
    Ok(StationarySolution { profile, residual, condition: factor.condition() })
}

/// Assembles the full node-by-node system and solves it densely. Unknowns are
/// the vertex values followed by each edge's interior nodes. Used as an
/// independent check of the elimination path.
pub fn solve_dense(
    tree: &TreeGraph,
    grid: &GridSpec,
    q: &GridFunction,
    source: &GridFunction,
    boundary: &BoundaryValues,
) -> Result<GridFunction> {
    let nv = tree.n_vertices();
    let mut offset = vec![0usize; tree.n_edges()];
    let mut total = nv;
    for e in tree.edges() {
        offset[e.id - 1] = total;
        total += grid.nodes(e.id) - 2;
    }
    let index = |edge: usize, i: usize| -> usize {
        let e = tree.edge(edge);
        let n = grid.nodes(edge);
        if i == 0 {
            e.initial
        } else if i == n - 1 {
            e.terminal
        } else {
            offset[edge - 1] + i - 1
        }
    };
    let mut a = DMatrix::<Complex64>::zeros(total, total);
    let mut b = DVector::<Complex64>::zeros(total);
    for e in tree.edges() {
        let n = grid.nodes(e.id);
        let h = grid.step(e.id);
        for i in 1..n - 1 {
            let row = index(e.id, i);
            a[(row, index(e.id, i - 1))] += Complex64::new(1.0 / (h * h), 0.0);
            a[(row, index(e.id, i + 1))] += Complex64::new(1.0 / (h * h), 0.0);
            a[(row, row)] += Complex64::new(-2.0 / (h * h), 0.0) + q.edge(e.id)[i];
            b[row] = source.edge(e.id)[i];
        }
    }
    for k in 0..nv {
        if tree.inner_vertices().binary_search(&k).is_err() {
            a[(k, k)] = Complex64::new(1.0, 0.0);
            b[k] = boundary.get(&k).copied().unwrap_or_default();
            continue;
        }
        for &j in tree.ending_at(k) {
            let n = grid.nodes(j);
            let h = grid.step(j);
            for (w, i) in TERMINAL_STENCIL.iter().zip(n - 3..n) {
                a[(k, index(j, i))] += Complex64::new(w / h, 0.0);
            }
        }
        for &j in tree.starting_at(k) {
            let h = grid.step(j);
            for (w, i) in INITIAL_STENCIL.iter().zip(0..3) {
                a[(k, index(j, i))] -= Complex64::new(w / h, 0.0);
            }
        }
    }
    let x = a.lu().solve(&b).ok_or_else(|| Error::Singular("dense system".into()))?;
    Ok(GridFunction {
        values: tree.edges().iter().map(|e| (0..grid.nodes(e.id)).map(|i| x[index(e.id, i)]).collect()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{build_tree, five_edge_example, EdgeSpec};
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn zero_data_gives_zero() {
        let tree = five_edge_example();
        let grid = GridSpec::uniform(&tree, 11).unwrap();
        let problem = StationaryProblem {
            omega: 0.0,
            phase: 0.0,
            potential: RealField::zeros_real(&grid),
            source: GridFunction::zeros(&grid),
            boundary: BoundaryValues::new(),
        };
        let sol = solve_stationary(&tree, &grid, &problem).unwrap();
        assert_eq!(sol.profile.max_abs(), 0.0);
    }

    #[test]
    fn sine_on_single_edge_is_second_order() {
        let tree = build_tree(&[EdgeSpec { id: 1, parent: 0, child: 1, length: PI }]).unwrap();
        let mut errors = Vec::new();
        for n in [21, 41, 81] {
            let grid = GridSpec::uniform(&tree, n).unwrap();
            let problem = StationaryProblem {
                omega: 0.0,
                phase: 0.0,
                potential: RealField::zeros_real(&grid),
                source: GridFunction::from_fn(&grid, |_, x| c(-x.sin())),
                boundary: BoundaryValues::new(),
            };
            let sol = solve_stationary(&tree, &grid, &problem).unwrap();
            let exact = GridFunction::from_fn(&grid, |_, x| c(x.sin()));
            errors.push(sol.profile.zip_map(&exact, |a, b| (a - b).norm()).iter().copied().fold(0.0, f64::max));
        }
        for w in errors.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.9, "order {order}");
        }
    }

    #[test]
    fn elimination_matches_dense_assembly() {
        let tree = five_edge_example();
        let grid = GridSpec::new(&tree, vec![7, 5, 9, 3, 6]).unwrap();
        let q = GridFunction::from_fn(&grid, |j, x| Complex64::new(0.3 * j as f64 - x, 0.1 * x));
        let f = GridFunction::from_fn(&grid, |j, x| Complex64::new((x * j as f64).cos(), x));
        let mut bc = BoundaryValues::new();
        bc.insert(0, c(1.0));
        bc.insert(4, Complex64::new(-0.5, 2.0));
        let fast = HelmholtzFactor::new(&tree, &grid, &q).unwrap().solve(&f, &bc).unwrap();
        let dense = solve_dense(&tree, &grid, &q, &f, &bc).unwrap();
        let diff = fast.zip_map(&dense, |a, b| (a - b).norm()).iter().copied().fold(0.0, f64::max);
        assert!(diff < 1e-10, "diff {diff}");
        let factor = HelmholtzFactor::new(&tree, &grid, &q).unwrap();
        assert!(factor.residual(&fast, &f, &bc) < 1e-9);
    }

    #[test]
    fn resonance_is_reported() {
        // Dirichlet eigenvalue of the discrete Laplacian on one edge.
        let tree = build_tree(&[EdgeSpec { id: 1, parent: 0, child: 1, length: 1.0 }]).unwrap();
        let n = 11;
        let grid = GridSpec::uniform(&tree, n).unwrap();
        let h = 0.1;
        let lambda = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let problem = StationaryProblem {
            omega: lambda,
            phase: 0.0,
            potential: RealField::zeros_real(&grid),
            source: GridFunction::zeros(&grid),
            boundary: BoundaryValues::new(),
        };
        let err = solve_stationary(&tree, &grid, &problem).unwrap_err();
        assert!(matches!(err, Error::NearSingular { .. } | Error::Singular(_)), "{err}");
    }

    #[test]
    fn rejects_non_boundary_data() {
        let tree = five_edge_example();
        let grid = GridSpec::uniform(&tree, 5).unwrap();
        let factor = HelmholtzFactor::new(&tree, &grid, &GridFunction::zeros(&grid)).unwrap();
        let mut bc = BoundaryValues::new();
        bc.insert(1, c(1.0));
        assert!(factor.solve(&GridFunction::zeros(&grid), &bc).is_err());
    }
}
