#![allow(dead_code)]

use std::f64::consts::PI;

use num::complex::Complex64;
use tree_carleman::solver::{
    solve_stationary, BoundaryValues, GridFunction, GridSpec, ModeSpec, RealField, StationaryProblem,
};
use tree_carleman::tree::five_edge_example;
use tree_carleman::weights::{construct_weights, default_root_poly, ratio};
use tree_carleman::{TreeGraph, WeightFamily};

pub const HORIZON: f64 = 2.0;

/// Worked-example weights on the five-edge tree, no extra margin.
pub fn reference_family() -> WeightFamily {
    construct_weights(&five_edge_example(), &default_root_poly(), &ratio(0, 1), HORIZON).unwrap()
}

/// Smooth exact profile: `g(x)` plus, on edges leaving an inner vertex, a
/// bump `alpha (x - a)(x - b)^2 / L^2` that fixes the Kirchhoff balance.
pub struct Manufactured {
    alpha: Vec<f64>,
    intervals: Vec<(f64, f64)>,
}

fn g(x: f64) -> [f64; 3] {
    [
        (1.3 * x).sin() + 0.4 * (2.0 * x).cos(),
        1.3 * (1.3 * x).cos() - 0.8 * (2.0 * x).sin(),
        -1.69 * (1.3 * x).sin() - 1.6 * (2.0 * x).cos(),
    ]
}

impl Manufactured {
    pub fn new(tree: &TreeGraph) -> Self {
        let intervals: Vec<(f64, f64)> = (1..=tree.n_edges()).map(|j| tree.interval(j)).collect();
        let alpha = tree
            .edges()
            .iter()
            .map(|e| {
                let fan = tree.starting_at(e.initial).len() as f64;
                if tree.inner_vertices().contains(&e.initial) {
                    let incoming = tree.ending_at(e.initial).len() as f64;
                    g(tree.coordinate(e.initial))[1] * (incoming - fan) / fan
                } else {
                    0.0
                }
            })
            .collect();
        Self { alpha, intervals }
    }

    /// `[U, U', U'']` on edge `j`.
    pub fn eval(&self, j: usize, x: f64) -> [f64; 3] {
        let (a, b) = self.intervals[j - 1];
        let l2 = (b - a) * (b - a);
        let al = self.alpha[j - 1];
        let [v, d, dd] = g(x);
        [
            v + al * (x - a) * (x - b).powi(2) / l2,
            d + al * ((x - b).powi(2) + 2.0 * (x - a) * (x - b)) / l2,
            dd + al * (4.0 * (x - b) + 2.0 * (x - a)) / l2,
        ]
    }

    /// Sup-norm error of the stationary solve of `U'' + (p + omega) U = F`.
    pub fn error(&self, tree: &TreeGraph, nodes: usize, p: &[f64], omega: f64) -> f64 {
        let grid = GridSpec::uniform(tree, nodes).unwrap();
        let potential = RealField::piecewise(&grid, p).unwrap();
        let source = GridFunction::from_fn(&grid, |j, x| {
            let [v, _, dd] = self.eval(j, x);
            Complex64::new(dd + (p[j - 1] + omega) * v, 0.0)
        });
        let boundary: BoundaryValues = tree
            .boundary_vertices()
            .iter()
            .map(|&k| {
                let j = tree.boundary_edge(k).unwrap();
                (k, Complex64::new(self.eval(j, tree.coordinate(k))[0], 0.0))
            })
            .collect();
        let problem = StationaryProblem { omega, phase: 0.0, potential, source, boundary };
        let sol = solve_stationary(tree, &grid, &problem).unwrap();
        let exact = GridFunction::from_fn(&grid, |j, x| Complex64::new(self.eval(j, x)[0], 0.0));
        sol.profile.zip_map(&exact, |a, b| a - b).max_abs()
    }
}

pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Static mode with unit data (keeps `|z|` away from zero) plus modes
/// `m = 2..=5` with small vertex-dependent amplitudes scaled by `1/omega`.
/// With `T = 2` these frequencies avoid the Dirichlet resonances of the
/// five-edge tree for potentials bounded by 0.5.
pub fn inverse_modes(tree: &TreeGraph, grid: &GridSpec) -> Vec<ModeSpec> {
    let bv = tree.boundary_vertices().to_vec();
    let mode = |m: u32, amps: &[f64]| ModeSpec {
        m,
        phase: 0.0,
        boundary: bv.iter().zip(amps).map(|(&k, &a)| (k, Complex64::new(a, 0.0))).collect(),
        source: GridFunction::zeros(grid),
    };
    let mut modes = vec![mode(0, &[1.0; 4])];
    for m in 2..=5u32 {
        let w = m as f64 * PI / HORIZON;
        let mf = m as f64;
        modes.push(mode(m, &[0.2 / w, 0.1 * mf.cos() / w, 0.15 * (2.0 * mf).sin() / w, (-0.1 + 0.05 * mf) / w]));
    }
    modes
}
