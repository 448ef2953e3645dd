//! Weighted space-time functionals on both sides of the Carleman estimate.
//!
//! Time integrals run over `[-T + clip, T - clip]`. Integrands carry
//! `theta^k exp(2 s theta psi)`, which vanishes at the poles of `theta`; the
//! clip is chosen so the integrand bound at the window edge is below
//! [`TAIL_LIMIT`], and every evaluation re-checks that bound for its `s`.

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::solver::{linspace, spatial_derivative, GridFunction, GridSpec, ModalSolution};
use crate::weights::WeightFamily;

pub const TAIL_LIMIT: f64 = 1e-30;

/// Which boundary term to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryForm {
    /// Terminal-side flux terms at boundary vertices minus the root's initial-side term.
    Theorem1,
    /// `T^-2 sum_{leaves} int |u_x|^2 exp(2 s psi / T^2) dt` over the full window.
    CorollaryBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub clip: f64,
    pub n_time: usize,
}

/// Smallest clip for which `theta^3 exp(2 s theta max_psi) < TAIL_LIMIT` at the
/// window edge, for every `s >= s_min`.
pub fn auto_clip(family: &WeightFamily, s_min: f64) -> Result<f64> {
    if !(s_min > 0.0) {
        return Err(Error::InvalidParameter(format!("s must be positive, got {s_min}")));
    }
    let max_psi = family.max_psi();
    if max_psi >= 0.0 {
        return Err(Error::DecayNotGuaranteed { max_psi });
    }
    let horizon = family.horizon();
    // log of the bound; decreasing in theta once theta > 3 / (2 s |max_psi|)
    let target = (0.5 * TAIL_LIMIT).ln();
    let g = |theta: f64| 3.0 * theta.ln() + 2.0 * s_min * theta * max_psi - target;
    let mut lo = (3.0 / (2.0 * s_min * max_psi.abs())).max(1.0 / (horizon * horizon));
    if g(lo) <= 0.0 {
        // already below the limit at the smallest admissible theta
        return Ok(clip_for_theta(horizon, lo * (1.0 + 1e-12)));
    }
    let mut hi = 2.0 * lo;
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(clip_for_theta(horizon, hi))
}

fn clip_for_theta(horizon: f64, theta: f64) -> f64 {
    // theta(t) = 1/(T^2 - t^2)
    horizon - (horizon * horizon - 1.0 / theta).max(0.0).sqrt()
}

fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = points[i + 1] - points[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

#[derive(Debug, Clone)]
struct BoundaryTrace {
    vertex: usize,
    /// +1 for terminal-side edges, -1 for initial-side edges
    sign: f64,
    node: usize,
    psi: f64,
}

/// Pre-sampled densities `|u|^2`, `|u_x|^2`, `|f|^2` on a space-time grid plus
/// the weight values they are integrated against.
#[derive(Debug, Clone)]
pub struct CarlemanInputs {
    horizon: f64,
    max_psi: f64,
    clip: f64,
    times: Vec<f64>,
    time_weights: Vec<f64>,
    theta: Vec<f64>,
    node_weights: Vec<f64>,
    node_psi: Vec<f64>,
    u2: Vec<f64>,
    ux2: Vec<f64>,
    f2: Vec<f64>,
    mode_f2: Option<Vec<Vec<f64>>>,
    traces: Vec<BoundaryTrace>,
    full_time_weights: Vec<f64>,
    /// per leaf: (psi at the leaf, |u_x|^2 over the full window)
    leaf_full: Vec<(f64, Vec<f64>)>,
    step: f64,
}

struct Layout {
    node_weights: Vec<f64>,
    node_psi: Vec<f64>,
    traces: Vec<BoundaryTrace>,
    leaf_nodes: Vec<(usize, f64)>,
}

fn layout(family: &WeightFamily, grid: &GridSpec) -> Result<Layout> {
    let tree = family.tree();
    if grid.n_edges() != tree.n_edges() {
        return Err(Error::Shape("grid does not match the weight family's tree".into()));
    }
    let mut start = Vec::with_capacity(tree.n_edges());
    let mut node_weights = Vec::new();
    let mut node_psi = Vec::new();
    for e in tree.edges() {
        start.push(node_weights.len());
        for i in 0..grid.nodes(e.id) {
            node_weights.push(grid.quadrature_weight(e.id, i));
            node_psi.push(family.psi(e.id, grid.x(e.id, i), 0));
        }
    }
    let mut traces = Vec::new();
    let mut leaf_nodes = Vec::new();
    for &k in tree.boundary_vertices() {
        for &j in tree.ending_at(k) {
            let node = start[j - 1] + grid.nodes(j) - 1;
            traces.push(BoundaryTrace { vertex: k, sign: 1.0, node, psi: node_psi[node] });
            if k != 0 {
                leaf_nodes.push((node, node_psi[node]));
            }
        }
        for &j in tree.starting_at(k) {
            let node = start[j - 1];
            traces.push(BoundaryTrace { vertex: k, sign: -1.0, node, psi: node_psi[node] });
        }
    }
    Ok(Layout { node_weights, node_psi, traces, leaf_nodes })
}

fn flatten_abs2(field: &GridFunction, out: &mut Vec<f64>) {
    out.extend(field.iter().map(|z| z.norm_sqr()));
}

impl CarlemanInputs {
    /// Samples a modal solution on the clipped window (and the full window
    /// for the corollary bound).
    pub fn from_modal(
        family: &WeightFamily,
        grid: &GridSpec,
        modal: &ModalSolution,
        window: TimeWindow,
    ) -> Result<Self> {
        let horizon = family.horizon();
        if (modal.horizon - horizon).abs() > 1e-12 * horizon {
            return Err(Error::InvalidParameter(format!(
                "modal horizon {} differs from weight horizon {horizon}",
                modal.horizon
            )));
        }
        check_window(horizon, window)?;
        let lay = layout(family, grid)?;
        let derivs = modal.derivative_profiles(grid)?;
        let ux_at = |t: f64| -> GridFunction {
            let mut acc: Option<GridFunction> = None;
            for (mode, d) in modal.modes.iter().zip(&derivs) {
                let factor = mode.time_factor(t, 0);
                acc = Some(match acc {
                    None => d.scale(factor),
                    Some(a) => a.zip_map(d, |x, y| x + y * factor),
                });
            }
            acc.unwrap_or_else(|| GridFunction::zeros(grid))
        };
        let times = linspace(-horizon + window.clip, horizon - window.clip, window.n_time);
        let samples = par::map(&times, |&t| {
            let u = if modal.modes.is_empty() { GridFunction::zeros(grid) } else { modal.value(t, 0) };
            let f = if modal.modes.is_empty() { GridFunction::zeros(grid) } else { modal.source(t) };
            let mut a = Vec::new();
            let mut b = Vec::new();
            let mut c = Vec::new();
            flatten_abs2(&u, &mut a);
            flatten_abs2(&ux_at(t), &mut b);
            flatten_abs2(&f, &mut c);
            (a, b, c)
        });
        let mut u2 = Vec::with_capacity(times.len() * lay.node_weights.len());
        let mut ux2 = Vec::with_capacity(u2.capacity());
        let mut f2 = Vec::with_capacity(u2.capacity());
        for (a, b, c) in samples {
            u2.extend(a);
            ux2.extend(b);
            f2.extend(c);
        }
        let mode_f2 = modal
            .modes
            .iter()
            .map(|m| {
                let mut v = Vec::new();
                flatten_abs2(&m.source, &mut v);
                v
            })
            .collect();
        let full_times = linspace(-horizon, horizon, window.n_time);
        let leaf_full = lay
            .leaf_nodes
            .iter()
            .map(|&(node, psi)| {
                let series = full_times
                    .iter()
                    .map(|&t| {
                        modal
                            .modes
                            .iter()
                            .zip(&derivs)
                            .map(|(m, d)| flat_value(d, node) * m.time_factor(t, 0))
                            .sum::<Complex64>()
                            .norm_sqr()
                    })
                    .collect();
                (psi, series)
            })
            .collect();
        let tf = family.time_factor();
        Ok(Self {
            horizon,
            max_psi: family.max_psi(),
            clip: window.clip,
            theta: times.iter().map(|&t| tf.theta(t)).collect(),
            time_weights: trapezoid_weights(&times),
            times,
            node_weights: lay.node_weights,
            node_psi: lay.node_psi,
            u2,
            ux2,
            f2,
            mode_f2: Some(mode_f2),
            traces: lay.traces,
            full_time_weights: trapezoid_weights(&full_times),
            leaf_full,
            step: grid.max_step(),
        })
    }

    /// Builds inputs from arbitrary samples `u(t_i)`, `f(t_i)` with `|t_i| < T`.
    /// The corollary bound is then evaluated on the same time samples.
    pub fn from_samples(
        family: &WeightFamily,
        grid: &GridSpec,
        times: &[f64],
        u: &[GridFunction],
        f: &[GridFunction],
    ) -> Result<Self> {
        let horizon = family.horizon();
        if times.len() < 2 || u.len() != times.len() || f.len() != times.len() {
            return Err(Error::Shape("need at least two time samples of u and f".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("time samples must be increasing".into()));
        }
        for &t in times {
            if !(t.abs() < horizon) {
                return Err(Error::TimeOutOfRange { t, horizon });
            }
        }
        let lay = layout(family, grid)?;
        let mut u2 = Vec::new();
        let mut ux2 = Vec::new();
        let mut f2 = Vec::new();
        for (ui, fi) in u.iter().zip(f) {
            if !ui.matches(grid) || !fi.matches(grid) {
                return Err(Error::Shape("sample does not match the grid".into()));
            }
            flatten_abs2(ui, &mut u2);
            flatten_abs2(&spatial_derivative(grid, ui)?, &mut ux2);
            flatten_abs2(fi, &mut f2);
        }
        let n = lay.node_weights.len();
        let leaf_full = lay
            .leaf_nodes
            .iter()
            .map(|&(node, psi)| (psi, (0..times.len()).map(|t| ux2[t * n + node]).collect()))
            .collect();
        let tf = family.time_factor();
        let clip = horizon - times[0].abs().max(times[times.len() - 1].abs());
        Ok(Self {
            horizon,
            max_psi: family.max_psi(),
            clip,
            theta: times.iter().map(|&t| tf.theta(t)).collect(),
            time_weights: trapezoid_weights(times),
            times: times.to_vec(),
            node_weights: lay.node_weights,
            node_psi: lay.node_psi,
            u2,
            ux2,
            f2,
            mode_f2: None,
            traces: lay.traces,
            full_time_weights: trapezoid_weights(times),
            leaf_full,
            step: grid.max_step(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn max_step(&self) -> f64 {
        self.step
    }

    /// Integrand bound `theta^3 exp(2 s theta max_psi)` at the window edges.
    pub fn tail_bound(&self, s: f64) -> f64 {
        let edge = self.theta[0].max(self.theta[self.theta.len() - 1]);
        (3.0 * edge.ln() + 2.0 * s * edge * self.max_psi).exp()
    }

    fn check(&self, s: f64) -> Result<()> {
        if !(s > 0.0) {
            return Err(Error::InvalidParameter(format!("s must be positive, got {s}")));
        }
        let bound = self.tail_bound(s);
        if !(bound < TAIL_LIMIT) {
            return Err(Error::TailBound { s, bound, limit: TAIL_LIMIT });
        }
        Ok(())
    }

    fn space_time(&self, s: f64, density: impl Fn(usize, usize, f64) -> f64 + Sync + Send) -> f64 {
        let n = self.node_weights.len();
        let per_time = par::map_range(self.times.len(), |t| {
            let theta = self.theta[t];
            let mut acc = 0.0;
            for i in 0..n {
                let w = (2.0 * s * theta * self.node_psi[i]).exp();
                if w > 0.0 {
                    acc += self.node_weights[i] * density(t, t * n + i, theta) * w;
                }
            }
            acc * self.time_weights[t]
        });
        per_time.iter().sum()
    }

    /// `sum_j int int (s^3 theta^3 |u|^2 + s theta |u_x|^2) exp(2 s phi)`.
    pub fn lhs(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        Ok(self.space_time(s, |_, idx, theta| s.powi(3) * theta.powi(3) * self.u2[idx] + s * theta * self.ux2[idx]))
    }

    /// `sum_j int int |f|^2 exp(2 s phi)`.
    pub fn rhs_data(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        Ok(self.space_time(s, |_, idx, _| self.f2[idx]))
    }

    /// Mode-wise sum `sum_m sum_j int int |F_m|^2 exp(2 s phi)`; equals
    /// [`Self::rhs_data`] when no modal split is known.
    pub fn rhs_data_per_mode(&self, s: f64) -> Result<f64> {
        match &self.mode_f2 {
            None => self.rhs_data(s),
            Some(modes) => {
                self.check(s)?;
                let n = self.node_weights.len();
                Ok(modes.iter().map(|m| self.space_time(s, |_, idx, _| m[idx % n])).sum())
            }
        }
    }

    pub fn boundary_term(&self, s: f64, form: BoundaryForm) -> Result<f64> {
        self.check(s)?;
        let n = self.node_weights.len();
        Ok(match form {
            BoundaryForm::Theorem1 => {
                let mut total = 0.0;
                for tr in &self.traces {
                    let mut acc = 0.0;
                    for t in 0..self.times.len() {
                        let theta = self.theta[t];
                        acc +=
                            self.time_weights[t] * theta * self.ux2[t * n + tr.node] * (2.0 * s * theta * tr.psi).exp();
                    }
                    total += tr.sign * acc;
                }
                total
            }
            BoundaryForm::CorollaryBound => {
                let inv_t2 = 1.0 / (self.horizon * self.horizon);
                self.leaf_full
                    .iter()
                    .map(|(psi, series)| {
                        let w = (2.0 * s * psi * inv_t2).exp();
                        inv_t2 * w * series.iter().zip(&self.full_time_weights).map(|(v, q)| v * q).sum::<f64>()
                    })
                    .sum()
            }
        })
    }

    /// Boundary vertices contributing to the theorem-1 term, with sign.
    pub fn boundary_vertices(&self) -> Vec<(usize, f64)> {
        self.traces.iter().map(|t| (t.vertex, t.sign)).collect()
    }
}

fn check_window(horizon: f64, window: TimeWindow) -> Result<()> {
    if !(window.clip > 0.0 && window.clip < horizon) {
        return Err(Error::InvalidParameter(format!("clip must lie in (0, T), got {}", window.clip)));
    }
    if window.n_time < 2 {
        return Err(Error::InvalidParameter("need at least two time samples".into()));
    }
    Ok(())
}

fn flat_value(field: &GridFunction, node: usize) -> Complex64 {
    let mut offset = node;
    for v in &field.values {
        if offset < v.len() {
            return v[offset];
        }
        offset -= v.len();
    }
    panic!("node index {node} out of range")
}

pub fn lhs_functional(inputs: &CarlemanInputs, s: f64) -> Result<f64> {
    inputs.lhs(s)
}

pub fn rhs_data_functional(inputs: &CarlemanInputs, s: f64, per_mode: bool) -> Result<f64> {
    if per_mode {
        inputs.rhs_data_per_mode(s)
    } else {
        inputs.rhs_data(s)
    }
}

pub fn boundary_term_b(inputs: &CarlemanInputs, s: f64, form: BoundaryForm) -> Result<f64> {
    inputs.boundary_term(s, form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_modal, BoundaryValues, ModeSpec, RealField};
    use crate::tree::five_edge_example;
    use crate::weights::{construct_weights, default_root_poly, ratio};

    fn family(horizon: f64) -> WeightFamily {
        let tree = five_edge_example();
        construct_weights(&tree, &default_root_poly(), &ratio(0, 1), horizon).unwrap()
    }

    #[test]
    fn auto_clip_meets_tail_limit() {
        let f = family(2.0);
        for s in [0.5, 1.0, 10.0] {
            let clip = auto_clip(&f, s).unwrap();
            let theta = f.time_factor().theta(2.0 - clip);
            let bound = (3.0 * theta.ln() + 2.0 * s * theta * f.max_psi()).exp();
            assert!(bound < TAIL_LIMIT && bound > 0.1 * TAIL_LIMIT, "s {s}: {bound}");
        }
    }

    #[test]
    fn zero_field_gives_zero() {
        let f = family(2.0);
        let grid = GridSpec::uniform(f.tree(), 9).unwrap();
        let p = RealField::zeros_real(&grid);
        let spec = ModeSpec { m: 1, phase: 0.0, boundary: BoundaryValues::new(), source: GridFunction::zeros(&grid) };
        let modal = solve_modal(f.tree(), &grid, &p, 2.0, &[spec]).unwrap();
        let clip = auto_clip(&f, 1.0).unwrap();
        let inputs = CarlemanInputs::from_modal(&f, &grid, &modal, TimeWindow { clip, n_time: 51 }).unwrap();
        assert_eq!(inputs.lhs(1.0).unwrap(), 0.0);
        assert_eq!(inputs.rhs_data(1.0).unwrap(), 0.0);
        assert_eq!(inputs.boundary_term(1.0, BoundaryForm::Theorem1).unwrap(), 0.0);
        assert_eq!(inputs.boundary_term(1.0, BoundaryForm::CorollaryBound).unwrap(), 0.0);
    }

    #[test]
    fn short_clip_is_rejected() {
        let f = family(2.0);
        let grid = GridSpec::uniform(f.tree(), 5).unwrap();
        let modal = ModalSolution { horizon: 2.0, modes: Vec::new() };
        let inputs = CarlemanInputs::from_modal(&f, &grid, &modal, TimeWindow { clip: 0.5, n_time: 11 }).unwrap();
        assert!(matches!(inputs.lhs(1.0), Err(Error::TailBound { .. })));
    }
}
