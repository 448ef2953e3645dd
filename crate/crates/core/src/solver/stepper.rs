//! Crank-Nicolson stepping of the full time-dependent system, used to
//! cross-validate modal solutions.

use num::complex::Complex64;

use super::grid::{GridFunction, GridSpec, RealField};
use super::modal::ModalSolution;
use super::stationary::{shifted_coefficient, HelmholtzFactor};
use crate::error::{Error, Result};
use crate::tree::TreeGraph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Deviation (relative to the reference sup norm) above which the run is flagged.
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct CrossCheckReport {
    pub max_deviation: f64,
    pub reference_scale: f64,
    pub steps: usize,
    pub flagged: bool,
    /// Snapshots of the stepped field at every step, including the start.
    pub history: Vec<GridFunction>,
}

impl CrossCheckReport {
    pub fn relative_deviation(&self) -> f64 {
        if self.reference_scale > 0.0 {
            self.max_deviation / self.reference_scale
        } else {
            self.max_deviation
        }
    }
}

/// Growth beyond this multiple of the reference scale is treated as a blow-up.
const BLOWUP_FACTOR: f64 = 1e6;

/// Steps `i u_t + u'' + p u = f` from the modal solution at `t_start`, using the
/// modal source and Dirichlet traces, with potential `potential` (which need
/// not be the one the modal solution was built with).
pub fn time_step_crosscheck(
    tree: &TreeGraph,
    grid: &GridSpec,
    potential: &RealField,
    modal: &ModalSolution,
    config: &StepConfig,
) -> Result<CrossCheckReport> {
    if !(config.dt > 0.0) || !(config.t_end > config.t_start) {
        return Err(Error::InvalidParameter("need dt > 0 and t_end > t_start".into()));
    }
    let steps = ((config.t_end - config.t_start) / config.dt).round().max(1.0) as usize;
    let dt = (config.t_end - config.t_start) / steps as f64;
    let shift = Complex64::new(0.0, 2.0 / dt);
    let factor = HelmholtzFactor::new(tree, grid, &shifted_coefficient(potential, shift))?;

    let mut u = modal.value(config.t_start, 0);
    let mut reference_scale = u.max_abs();
    let mut max_deviation = 0.0f64;
    let mut history = vec![u.clone()];
    let mut f_old = modal.source(config.t_start);
    for n in 0..steps {
        let t_new = config.t_start + (n + 1) as f64 * dt;
        let f_new = modal.source(t_new);
        let lu = apply_operator(grid, potential, &u);
        let rhs = GridFunction {
            values: (0..grid.n_edges())
                .map(|e| {
                    (0..grid.nodes(e + 1))
                        .map(|i| shift * u.values[e][i] - lu.values[e][i] + f_new.values[e][i] + f_old.values[e][i])
                        .collect()
                })
                .collect(),
        };
        u = factor.solve(&rhs, &modal.boundary_at(tree, t_new))?;
        let exact = modal.value(t_new, 0);
        reference_scale = reference_scale.max(exact.max_abs());
        let dev = u.zip_map(&exact, |a, b| (a - b).norm()).iter().copied().fold(0.0, f64::max);
        if !dev.is_finite() || dev > BLOWUP_FACTOR * reference_scale.max(1.0) {
            return Err(Error::Unstable { t: t_new, deviation: dev });
        }
        max_deviation = max_deviation.max(dev);
        history.push(u.clone());
        f_old = f_new;
    }
    let flagged = max_deviation > config.tolerance * reference_scale.max(f64::MIN_POSITIVE);
    Ok(CrossCheckReport { max_deviation, reference_scale, steps, flagged, history })
}

/// `u'' + p u` at interior nodes (3-point stencil); zero at edge ends, where
/// the stepped system carries vertex conditions instead.
fn apply_operator(grid: &GridSpec, potential: &RealField, u: &GridFunction) -> GridFunction {
    GridFunction {
        values: u
            .values
            .iter()
            .enumerate()
            .map(|(e, v)| {
                let h2 = grid.step(e + 1).powi(2);
                let p = potential.edge(e + 1);
                (0..v.len())
                    .map(|i| {
                        if i == 0 || i == v.len() - 1 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            (v[i - 1] - 2.0 * v[i] + v[i + 1]) / h2 + p[i] * v[i]
                        }
                    })
                    .collect()
            })
            .collect(),
    }
}
