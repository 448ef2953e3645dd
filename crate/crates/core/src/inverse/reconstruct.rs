//! Output least-squares reconstruction of piecewise-constant potentials.

use serde::{Deserialize, Serialize};

use super::forward::{observe, ObservationConfig, ObservationSet};
use crate::error::{Error, Result};
use crate::par;
use crate::solver::{solve_modal, GridSpec, ModeSpec, RealField};
use crate::tree::TreeGraph;

/// `n_param` equal-length constant pieces on every edge; parameters are
/// ordered edge by edge, initial end first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parametrization {
    pub n_param: usize,
}

impl Parametrization {
    pub fn new(n_param: usize) -> Result<Self> {
        if n_param == 0 {
            return Err(Error::InvalidParameter("n_param must be at least 1".into()));
        }
        Ok(Self { n_param })
    }

    pub fn len(&self, tree: &TreeGraph) -> usize {
        self.n_param * tree.n_edges()
    }

    pub fn piece(&self, tree: &TreeGraph, edge: usize, x: f64) -> usize {
        let (lo, hi) = tree.interval(edge);
        let raw = ((x - lo) / (hi - lo) * self.n_param as f64).floor();
        (raw.max(0.0) as usize).min(self.n_param - 1)
    }

    pub fn expand(&self, tree: &TreeGraph, grid: &GridSpec, params: &[f64]) -> Result<RealField> {
        if params.len() != self.len(tree) {
            return Err(Error::Shape(format!("{} parameters, expected {}", params.len(), self.len(tree))));
        }
        for j in 1..=grid.n_edges() {
            if grid.nodes(j) < self.n_param {
                return Err(Error::GridTooCoarse { edge: j, nodes: grid.nodes(j), required: self.n_param });
            }
        }
        Ok(RealField::from_fn(grid, |j, x| params[(j - 1) * self.n_param + self.piece(tree, j, x)]))
    }

    /// Exact `sum_j int |a - b|^2 dx` for two parameter vectors.
    pub fn l2_distance_sq(&self, tree: &TreeGraph, a: &[f64], b: &[f64]) -> f64 {
        tree.edges()
            .iter()
            .flat_map(|e| {
                let piece = e.length / self.n_param as f64;
                (0..self.n_param)
                    .map(move |i| (e.id - 1) * self.n_param + i)
                    .map(move |idx| piece * (a[idx] - b[idx]).powi(2))
            })
            .sum()
    }
}

pub fn project(params: &mut [f64], bound: f64) {
    for p in params.iter_mut() {
        *p = p.clamp(-bound, bound);
    }
}

/// Everything fixed during a reconstruction: geometry, modal boundary data
/// (zero sources), and the measured data.
#[derive(Debug, Clone)]
pub struct InverseSetup {
    pub tree: TreeGraph,
    pub grid: GridSpec,
    pub horizon: f64,
    pub modes: Vec<ModeSpec>,
    pub observations: ObservationSet,
    pub observe_root: bool,
}

impl InverseSetup {
    /// Noise-free observations for the potential `potential`.
    pub fn predict(&self, potential: &RealField) -> Result<ObservationSet> {
        let modal = solve_modal(&self.tree, &self.grid, potential, self.horizon, &self.modes)?;
        let config = ObservationConfig { n_time: self.observations.times.len(), observe_root: self.observe_root };
        observe(&self.tree, &self.grid, &modal, config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Step doubled after each success, halved on failure.
    Armijo,
    /// Barzilai-Borwein initial step (long and short formulas alternating), then backtracking.
    BarzilaiBorwein,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructConfig {
    pub lambda: f64,
    pub max_iter: usize,
    pub n_param: usize,
    /// Bound `M` on every coefficient.
    pub bound: f64,
    pub step: StepRule,
    pub prior: Option<Vec<f64>>,
    pub initial: Option<Vec<f64>>,
    pub fd_step: f64,
    pub tolerance: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            max_iter: 500,
            n_param: 1,
            bound: 1.0,
            step: StepRule::BarzilaiBorwein,
            prior: None,
            initial: None,
            fd_step: 1e-6,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialEstimate {
    pub params: Vec<f64>,
    pub n_param: usize,
    pub bound: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PotentialEstimate {
    pub fn potential(&self, tree: &TreeGraph, grid: &GridSpec) -> Result<RealField> {
        Parametrization::new(self.n_param)?.expand(tree, grid, &self.params)
    }

    /// `||p - truth||_{L2} / ||truth||_{L2}` (absolute error when the truth is zero).
    pub fn relative_error(&self, tree: &TreeGraph, truth: &[f64]) -> f64 {
        let param = Parametrization { n_param: self.n_param };
        let zeros = vec![0.0; truth.len()];
        let num = param.l2_distance_sq(tree, &self.params, truth).sqrt();
        let den = param.l2_distance_sq(tree, truth, &zeros).sqrt();
        if den > 0.0 {
            num / den
        } else {
            num
        }
    }
}

struct Objective<'a> {
    setup: &'a InverseSetup,
    param: Parametrization,
    lambda: f64,
    prior: Vec<f64>,
}

impl Objective<'_> {
    fn value(&self, params: &[f64]) -> Result<f64> {
        let potential = self.param.expand(&self.setup.tree, &self.setup.grid, params)?;
        let predicted = self.setup.predict(&potential)?;
        for (a, b) in predicted.series.iter().zip(&self.setup.observations.series) {
            if (a.vertex, a.edge, a.m) != (b.vertex, b.edge, b.m) {
                return Err(Error::Shape("observations do not match the predicted layout".into()));
            }
        }
        let data = predicted.distance_sq(&self.setup.observations)?;
        let penalty: f64 = params.iter().zip(&self.prior).map(|(p, q)| (p - q).powi(2)).sum();
        Ok(data + self.lambda * penalty)
    }

    fn gradient(&self, params: &[f64], step: f64) -> Result<Vec<f64>> {
        let n = params.len();
        let values = par::map_range(2 * n, |k| {
            let i = k / 2;
            let delta = step * params[i].abs().max(1.0);
            let mut shifted = params.to_vec();
            shifted[i] += if k % 2 == 0 { delta } else { -delta };
            self.value(&shifted).map(|v| (v, delta))
        });
        let values = values.into_iter().collect::<Result<Vec<_>>>()?;
        Ok((0..n).map(|i| (values[2 * i].0 - values[2 * i + 1].0) / (2.0 * values[2 * i].1)).collect())
    }
}

fn objective<'a>(setup: &'a InverseSetup, config: &ReconstructConfig) -> Result<Objective<'a>> {
    let param = Parametrization::new(config.n_param)?;
    let n = param.len(&setup.tree);
    let prior = config.prior.clone().unwrap_or_else(|| vec![0.0; n]);
    if prior.len() != n {
        return Err(Error::Shape(format!("prior has {} entries, expected {n}", prior.len())));
    }
    if !(config.lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {}", config.lambda)));
    }
    Ok(Objective { setup, param, lambda: config.lambda, prior })
}

/// `J(p) = sum int |pred - obs|^2 dt + lambda ||p - prior||^2`.
pub fn misfit(setup: &InverseSetup, params: &[f64], config: &ReconstructConfig) -> Result<f64> {
    for &p in params {
        if p.abs() > config.bound {
            return Err(Error::PotentialBound { value: p, bound: config.bound });
        }
    }
    objective(setup, config)?.value(params)
}

/// Central finite-difference gradient of the misfit.
pub fn misfit_gradient(
    setup: &InverseSetup,
    params: &[f64],
    config: &ReconstructConfig,
    step: f64,
) -> Result<Vec<f64>> {
    objective(setup, config)?.gradient(params, step)
}

const MAX_BACKTRACK: usize = 60;
const ARMIJO_C: f64 = 1e-4;

/// Projected gradient descent with monotone backtracking.
pub fn reconstruct(setup: &InverseSetup, config: &ReconstructConfig) -> Result<PotentialEstimate> {
    let obj = objective(setup, config)?;
    let n = obj.param.len(&setup.tree);
    if !(config.bound > 0.0) {
        return Err(Error::InvalidParameter(format!("bound must be positive, got {}", config.bound)));
    }
    let mut x = config.initial.clone().unwrap_or_else(|| obj.prior.clone());
    if x.len() != n {
        return Err(Error::Shape(format!("initial guess has {} entries, expected {n}", x.len())));
    }
    project(&mut x, config.bound);
    let mut value = obj.value(&x)?;
    let mut history = vec![value];
    let mut grad = obj.gradient(&x, config.fd_step)?;
    let mut alpha = initial_step(&grad, config.bound);
    let mut converged = false;
    let mut iterations = 0;
    let estimate = |x: &[f64], history: &[f64], iterations, converged| PotentialEstimate {
        params: x.to_vec(),
        n_param: config.n_param,
        bound: config.bound,
        history: history.to_vec(),
        iterations,
        converged,
    };

    while iterations < config.max_iter {
        if value == 0.0 || grad.iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }
        let mut accepted = None;
        let mut trial_alpha = alpha;
        for _ in 0..MAX_BACKTRACK {
            let mut trial: Vec<f64> = x.iter().zip(&grad).map(|(p, g)| p - trial_alpha * g).collect();
            project(&mut trial, config.bound);
            let moved: f64 = trial.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
            if moved == 0.0 {
                break;
            }
            let trial_value = obj.value(&trial)?;
            if trial_value <= value - ARMIJO_C / trial_alpha * moved {
                accepted = Some((trial, trial_value));
                break;
            }
            trial_alpha *= 0.5;
        }
        let Some((next, next_value)) = accepted else {
            // no admissible step: stationary up to rounding, or stalled
            if value <= f64::EPSILON * history[0] {
                converged = true;
                break;
            }
            return Err(Error::ReconstructionStalled {
                iterations,
                last: Box::new(estimate(&x, &history, iterations, false)),
            });
        };
        iterations += 1;
        let decrease = (value - next_value) / value;
        let next_grad = obj.gradient(&next, config.fd_step)?;
        alpha = match config.step {
            StepRule::Armijo => 2.0 * trial_alpha,
            StepRule::BarzilaiBorwein => {
                let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
                let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
                let ss: f64 = s.iter().map(|a| a * a).sum();
                let yy: f64 = y.iter().map(|a| a * a).sum();
                if sy > 0.0 && iterations % 2 == 0 {
                    ss / sy
                } else if sy > 0.0 {
                    sy / yy
                } else {
                    2.0 * trial_alpha
                }
            }
        };
        x = next;
        value = next_value;
        grad = next_grad;
        history.push(value);
        if decrease < config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(estimate(&x, &history, iterations, converged))
}

fn initial_step(grad: &[f64], bound: f64) -> f64 {
    let g = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
    if g > 0.0 {
        0.1 * bound / g
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::five_edge_example;

    #[test]
    fn pieces_split_edges_evenly() {
        let tree = five_edge_example();
        let param = Parametrization::new(2).unwrap();
        assert_eq!(param.piece(&tree, 2, 1.0), 0);
        assert_eq!(param.piece(&tree, 2, 1.49), 0);
        assert_eq!(param.piece(&tree, 2, 1.5), 1);
        assert_eq!(param.piece(&tree, 2, 2.0), 1);
        let a: Vec<f64> = (0..10).map(f64::from).collect();
        let b = vec![0.0; 10];
        // unit edges, pieces of length 1/2
        let expect: f64 = a.iter().map(|v| 0.5 * v * v).sum();
        assert!((param.l2_distance_sq(&tree, &a, &b) - expect).abs() < 1e-12);
    }

    #[test]
    fn projection_clamps() {
        let mut p = vec![-3.0, 0.5, 2.0];
        project(&mut p, 1.0);
        assert_eq!(p, vec![-1.0, 0.5, 1.0]);
    }
}
