//! Vertex terms `D_{k,1..4}` from the integration by parts with `w = u exp(s phi)`.

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use super::functionals::TimeWindow;
use crate::error::{Error, Result};
use crate::par;
use crate::solver::{linspace, spatial_derivative, GridFunction, GridSpec, ModalSolution, RealField};
use crate::weights::WeightFamily;

/// `w = u exp(s phi(., t))`, split into real and imaginary parts.
pub fn transform_w(
    family: &WeightFamily,
    grid: &GridSpec,
    u: &GridFunction,
    s: f64,
    t: f64,
) -> Result<(RealField, RealField)> {
    let w = scale_by_weight(family, grid, u, s, t)?;
    Ok((w.map(|z| z.re), w.map(|z| z.im)))
}

/// Inverse of [`transform_w`].
pub fn untransform_w(
    family: &WeightFamily,
    grid: &GridSpec,
    w1: &RealField,
    w2: &RealField,
    s: f64,
    t: f64,
) -> Result<GridFunction> {
    let w = w1.zip_map(w2, |a, b| Complex64::new(*a, *b));
    scale_by_weight(family, grid, &w, -s, t)
}

fn scale_by_weight(family: &WeightFamily, grid: &GridSpec, u: &GridFunction, s: f64, t: f64) -> Result<GridFunction> {
    if !(t.abs() < family.horizon()) {
        return Err(Error::TimeOutOfRange { t, horizon: family.horizon() });
    }
    if !u.matches(grid) || grid.n_edges() != family.tree().n_edges() {
        return Err(Error::Shape("field does not match the grid".into()));
    }
    let theta = family.time_factor().theta(t);
    let values = u
        .values
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let j = idx + 1;
            v.iter().enumerate().map(|(i, z)| z * (s * theta * family.psi(j, grid.x(j, i), 0)).exp()).collect()
        })
        .collect();
    Ok(GridFunction { values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexTerms {
    pub vertex: usize,
    /// `D_{k,1}`, ..., `D_{k,4}`
    pub d: [f64; 4],
    /// Same integrals with every edge contribution taken in absolute value.
    pub scale: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofTermTable {
    pub s: f64,
    pub step: f64,
    pub eta: Vec<f64>,
    pub vertices: Vec<VertexTerms>,
}

/// Tolerance factor in `tol = TOLERANCE_FACTOR * h^2 * scale`.
pub const TOLERANCE_FACTOR: f64 = 10.0;

impl ProofTermTable {
    pub fn tolerance(&self, vertex: &VertexTerms, term: usize) -> f64 {
        TOLERANCE_FACTOR * self.step * self.step * vertex.scale[term]
    }

    /// `D1, D2 <= tol` and `|D3|, |D4| <= tol` at every inner vertex.
    pub fn signs_hold(&self) -> bool {
        self.vertices.iter().all(|v| {
            v.d[0] <= self.tolerance(v, 0)
                && v.d[1] <= self.tolerance(v, 1)
                && v.d[2].abs() <= self.tolerance(v, 2)
                && v.d[3].abs() <= self.tolerance(v, 3)
        })
    }
}

/// Evaluates `D_{k,1..4}` at every inner vertex for a modal solution, with the
/// time integral on the clipped window.
pub fn d_terms(
    family: &WeightFamily,
    grid: &GridSpec,
    modal: &ModalSolution,
    s: f64,
    window: TimeWindow,
) -> Result<ProofTermTable> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("s must be positive, got {s}")));
    }
    if modal.modes.is_empty() {
        return Err(Error::InvalidParameter("proof terms need a modal solution with at least one mode".into()));
    }
    let tree = family.tree();
    let horizon = family.horizon();
    if !(window.clip > 0.0 && window.clip < horizon) || window.n_time < 2 {
        return Err(Error::InvalidParameter("invalid time window".into()));
    }
    let eta = tree.eta_multipliers();
    let derivs: Vec<GridFunction> =
        modal.modes.iter().map(|m| spatial_derivative(grid, &m.profile)).collect::<Result<_>>()?;
    let times = linspace(-horizon + window.clip, horizon - window.clip, window.n_time);
    let dt = times[1] - times[0];
    let tf = family.time_factor();

    let vertices = par::map(tree.inner_vertices(), |&k| {
        let x = tree.coordinate(k);
        // (edge, d(k,j), node index)
        let incident: Vec<(usize, f64, usize)> = tree
            .ending_at(k)
            .iter()
            .map(|&j| (j, 1.0, grid.nodes(j) - 1))
            .chain(tree.starting_at(k).iter().map(|&j| (j, -1.0, 0)))
            .collect();
        let mut d = [0.0f64; 4];
        let mut scale = [0.0f64; 4];
        for (ti, &t) in times.iter().enumerate() {
            let q = if ti == 0 || ti == times.len() - 1 { 0.5 * dt } else { dt };
            let theta = tf.theta(t);
            let theta_t = tf.theta_dt(t);
            for &(j, sign, node) in &incident {
                let mut u = Complex64::new(0.0, 0.0);
                let mut ux = u;
                let mut ut = u;
                for (mode, dprof) in modal.modes.iter().zip(&derivs) {
                    let e0 = mode.time_factor(t, 0);
                    u += mode.profile.edge(j)[node] * e0;
                    ux += dprof.edge(j)[node] * e0;
                    ut += mode.profile.edge(j)[node] * mode.time_factor(t, 1);
                }
                let psi = family.psi(j, x, 0);
                let phi_x = theta * family.psi(j, x, 1);
                let phi_xx = theta * family.psi(j, x, 2);
                let phi_t = theta_t * psi;
                let weight = (s * theta * psi).exp();
                let w = u * weight;
                let wx = (ux + s * phi_x * u) * weight;
                let wt = (ut + s * phi_t * u) * weight;
                let eta_j = eta[j - 1];
                let terms = [
                    -2.0 * s * eta_j * phi_x * (w.conj() * wt).im,
                    2.0 * s * eta_j * phi_x * wx.norm_sqr(),
                    2.0 * s * eta_j * phi_xx * (w.conj() * wx).re,
                    2.0 * s.powi(3) * eta_j * phi_x.powi(3) * w.norm_sqr(),
                ];
                for m in 0..4 {
                    d[m] += q * sign * terms[m];
                    scale[m] += q * terms[m].abs();
                }
            }
        }
        VertexTerms { vertex: k, d, scale }
    });
    Ok(ProofTermTable { s, step: grid.max_step(), eta, vertices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::five_edge_example;
    use crate::weights::{construct_weights, default_root_poly, ratio};

    #[test]
    fn transform_round_trips() {
        let tree = five_edge_example();
        let family = construct_weights(&tree, &default_root_poly(), &ratio(1, 1), 2.0).unwrap();
        let grid = GridSpec::uniform(&tree, 7).unwrap();
        let u = GridFunction::from_fn(&grid, |j, x| Complex64::new(x.sin(), j as f64 * x));
        let (w1, w2) = transform_w(&family, &grid, &u, 0.0, 0.3).unwrap();
        assert_eq!(w1, u.map(|z| z.re));
        assert_eq!(w2, u.map(|z| z.im));
        let (w1, w2) = transform_w(&family, &grid, &u, 3.0, -1.2).unwrap();
        let back = untransform_w(&family, &grid, &w1, &w2, 3.0, -1.2).unwrap();
        let err = back.zip_map(&u, |a, b| (a - b).norm() / b.norm().max(1e-300)).iter().copied().fold(0.0, f64::max);
        assert!(err < 1e-14, "{err}");
    }
}
