//! Finite modal solutions `u = sum_m U_m(x) exp(-i(omega_m t + phi_m))`, `omega_m = m pi / T`.

use std::f64::consts::PI;

use num::complex::Complex64;

use super::derivative::spatial_derivative;
use super::grid::{GridFunction, GridSpec, RealField};
use super::stationary::{solve_stationary, BoundaryValues, StationaryProblem};
use crate::error::{Error, Result};
use crate::par;
use crate::tree::TreeGraph;

/// Data for one mode before solving.
#[derive(Debug, Clone)]
pub struct ModeSpec {
    pub m: u32,
    pub phase: f64,
    pub boundary: BoundaryValues,
    pub source: GridFunction,
}

#[derive(Debug, Clone)]
pub struct Mode {
    pub m: u32,
    pub omega: f64,
    pub phase: f64,
    pub boundary: BoundaryValues,
    pub source: GridFunction,
    pub profile: GridFunction,
    pub residual: f64,
    pub condition: f64,
}

impl Mode {
    /// `(-i omega)^order exp(-i(omega t + phi))`.
    pub fn time_factor(&self, t: f64, order: u32) -> Complex64 {
        let phase = Complex64::new(0.0, -(self.omega * t + self.phase)).exp();
        Complex64::new(0.0, -self.omega).powu(order) * phase
    }
}

#[derive(Debug, Clone)]
pub struct ModalSolution {
    pub horizon: f64,
    pub modes: Vec<Mode>,
}

pub fn mode_frequency(m: u32, horizon: f64) -> f64 {
    m as f64 * PI / horizon
}

/// Solves one stationary problem per mode; modes are independent and run in parallel.
pub fn solve_modal(
    tree: &TreeGraph,
    grid: &GridSpec,
    potential: &RealField,
    horizon: f64,
    specs: &[ModeSpec],
) -> Result<ModalSolution> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    let solved = par::map(specs, |spec| -> Result<Mode> {
        let omega = mode_frequency(spec.m, horizon);
        let problem = StationaryProblem {
            omega,
            phase: spec.phase,
            potential: potential.clone(),
            source: spec.source.clone(),
            boundary: spec.boundary.clone(),
        };
        let sol = solve_stationary(tree, grid, &problem)?;
        Ok(Mode {
            m: spec.m,
            omega,
            phase: spec.phase,
            boundary: spec.boundary.clone(),
            source: spec.source.clone(),
            profile: sol.profile,
            residual: sol.residual,
            condition: sol.condition,
        })
    });
    let modes = solved.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ModalSolution { horizon, modes })
}

impl ModalSolution {
    /// `d^order/dt^order` of the field at time `t`, built from `select(mode)`.
    pub fn combine(&self, t: f64, order: u32, select: impl Fn(&Mode) -> &GridFunction) -> GridFunction {
        let mut out: Option<GridFunction> = None;
        for mode in &self.modes {
            let factor = mode.time_factor(t, order);
            let term = select(mode);
            out = Some(match out {
                None => term.scale(factor),
                Some(acc) => acc.zip_map(term, |a, b| a + b * factor),
            });
        }
        out.unwrap_or_else(|| GridFunction { values: Vec::new() })
    }

    pub fn value(&self, t: f64, order: u32) -> GridFunction {
        self.combine(t, order, |m| &m.profile)
    }

    pub fn source(&self, t: f64) -> GridFunction {
        self.combine(t, 0, |m| &m.source)
    }

    /// Dirichlet trace at boundary vertex `k` and time `t`.
    pub fn boundary_value(&self, k: usize, t: f64) -> Complex64 {
        self.modes.iter().map(|m| m.boundary.get(&k).copied().unwrap_or_default() * m.time_factor(t, 0)).sum()
    }

    pub fn boundary_at(&self, tree: &TreeGraph, t: f64) -> BoundaryValues {
        tree.boundary_vertices().iter().map(|&k| (k, self.boundary_value(k, t))).collect()
    }

    /// Per-mode spatial derivative profiles.
    pub fn derivative_profiles(&self, grid: &GridSpec) -> Result<Vec<GridFunction>> {
        self.modes.iter().map(|m| spatial_derivative(grid, &m.profile)).collect()
    }
}

/// Samples of `u`, `d_t u`, `d_t^2 u` on a time grid.
#[derive(Debug, Clone)]
pub struct TimeSolution {
    pub times: Vec<f64>,
    pub u: Vec<GridFunction>,
    pub du_dt: Vec<GridFunction>,
    pub d2u_dt2: Vec<GridFunction>,
}

pub fn assemble_time_solution(modal: &ModalSolution, times: &[f64]) -> TimeSolution {
    let sample = |order: u32| times.iter().map(|&t| modal.value(t, order)).collect();
    TimeSolution { times: times.to_vec(), u: sample(0), du_dt: sample(1), d2u_dt2: sample(2) }
}

/// `n` equally spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::derivative::second_derivative;
    use crate::tree::five_edge_example;

    fn setup() -> (TreeGraph, GridSpec, RealField) {
        let tree = five_edge_example();
        let grid = GridSpec::uniform(&tree, 21).unwrap();
        let p = RealField::piecewise(&grid, &[0.5, -1.0, 2.0, 0.0, 1.5]).unwrap();
        (tree, grid, p)
    }

    fn spec(m: u32, grid: &GridSpec) -> ModeSpec {
        let mut boundary = BoundaryValues::new();
        boundary.insert(4, Complex64::new(1.0, 0.0));
        boundary.insert(5, Complex64::new(0.0, -0.5));
        ModeSpec {
            m,
            phase: 0.3 * m as f64,
            boundary,
            source: GridFunction::from_fn(grid, |_, x| Complex64::new(x.cos(), 0.0)),
        }
    }

    #[test]
    fn zero_frequency_is_static() {
        let (tree, grid, p) = setup();
        let mut s = spec(0, &grid);
        s.phase = 0.0;
        let modal = solve_modal(&tree, &grid, &p, 2.0, &[s]).unwrap();
        let a = modal.value(-1.3, 0);
        let b = modal.value(0.7, 0);
        assert_eq!(a, b);
        assert_eq!(modal.value(0.0, 0), modal.modes[0].profile);
        assert_eq!(modal.value(0.4, 1).max_abs(), 0.0);
    }

    #[test]
    fn two_modes_are_periodic_in_2t() {
        let (tree, grid, p) = setup();
        let t_h = PI;
        let modal = solve_modal(&tree, &grid, &p, t_h, &[spec(1, &grid), spec(2, &grid)]).unwrap();
        for t in [-1.0, 0.2, 2.5] {
            let a = modal.value(t, 0);
            let b = modal.value(t + 2.0 * PI, 0);
            let d = a.zip_map(&b, |x, y| (x - y).norm()).iter().copied().fold(0.0, f64::max);
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn assembled_field_satisfies_the_equation() {
        let (tree, grid, p) = setup();
        let modal = solve_modal(&tree, &grid, &p, 2.0, &[spec(1, &grid), spec(3, &grid)]).unwrap();
        let ts = assemble_time_solution(&modal, &[0.1, 0.9]);
        for (i, &t) in ts.times.iter().enumerate() {
            let uxx = second_derivative(&grid, &ts.u[i]).unwrap();
            let f = modal.source(t);
            for j in 1..=5 {
                let n = grid.nodes(j);
                for k in 1..n - 1 {
                    let r =
                        Complex64::i() * ts.du_dt[i].edge(j)[k] + uxx.edge(j)[k] + p.edge(j)[k] * ts.u[i].edge(j)[k]
                            - f.edge(j)[k];
                    assert!(r.norm() < 1e-9, "residual {}", r.norm());
                }
            }
        }
    }
}
