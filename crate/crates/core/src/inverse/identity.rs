//! Initial-time identities for the difference of two solutions sharing `z`.
//!
//! With `ubar = u~ - u^` and `pbar = p~ - p^`, at `t = 0`:
//!
//! * `d_t ubar = i pbar z`
//! * `d_t^2 ubar = -d_x^2(pbar z) - pbar d_x^2 z - (p~ + p^) pbar z`
//!
//! The second line follows from differentiating the equations once in time and
//! substituting `d_t u^(0) = i (z'' + p^ z)`.

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{second_derivative_reference, GridFunction, GridSpec, ModalSolution, RealField};

/// `u`, `d_t u`, `d_t^2 u` at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialJet {
    pub z: GridFunction,
    pub dt: GridFunction,
    pub dt2: GridFunction,
}

/// Time derivatives at zero read off the modal form.
pub fn modal_jet(modal: &ModalSolution) -> InitialJet {
    InitialJet { z: modal.value(0.0, 0), dt: modal.value(0.0, 1), dt2: modal.value(0.0, 2) }
}

/// Time derivatives at zero implied by `i u_t + u_xx + p u = 0` with `u(0) = z`,
/// using the fourth-order reference second derivative.
pub fn equation_jet(grid: &GridSpec, z: &GridFunction, potential: &RealField) -> Result<InitialJet> {
    let apply = |v: &GridFunction| -> Result<GridFunction> {
        let vxx = second_derivative_reference(grid, v)?;
        Ok(vxx.zip_map(&v.zip_map(potential, |a, p| a * *p), |a, b| Complex64::i() * (a + b)))
    };
    let dt = apply(z)?;
    let dt2 = apply(&dt)?;
    Ok(InitialJet { z: z.clone(), dt, dt2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `max |z~ - z^|`
    pub z_gap: f64,
    /// `max |d_t ubar - i pbar z|`
    pub first: f64,
    /// Residual of the second identity as derived above.
    pub second: f64,
    /// Residual of `d_t^2 ubar = -pbar^2 z - p~ pbar z - d_x^2(pbar z)`.
    pub second_alternative: f64,
}

/// Compares the jets of two solutions against the identities. Residuals are
/// sup norms over edge-interior nodes.
pub fn initial_identity_check(
    grid: &GridSpec,
    tilde: &InitialJet,
    hat: &InitialJet,
    p_tilde: &RealField,
    p_hat: &RealField,
    z_tolerance: f64,
) -> Result<IdentityResiduals> {
    let z_gap = max_interior(&tilde.z.zip_map(&hat.z, |a, b| a - b), true);
    let z_scale = tilde.z.max_abs().max(f64::MIN_POSITIVE);
    if !(z_gap <= z_tolerance * z_scale) {
        return Err(Error::IdentityNotApplicable { gap: z_gap });
    }
    let z = &tilde.z;
    let pbar = p_tilde.zip_map(p_hat, |a, b| a - b);
    let pbar_z = z.zip_map(&pbar, |v, p| v * *p);
    let d2_pbar_z = second_derivative_reference(grid, &pbar_z)?;
    let d2_z = second_derivative_reference(grid, z)?;

    let dt_bar = tilde.dt.zip_map(&hat.dt, |a, b| a - b);
    let dt2_bar = tilde.dt2.zip_map(&hat.dt2, |a, b| a - b);
    let first = max_interior(&dt_bar.zip_map(&pbar_z, |a, b| a - Complex64::i() * b), false);

    let mut second = 0.0f64;
    let mut second_alternative = 0.0f64;
    for e in 0..grid.n_edges() {
        let n = grid.nodes(e + 1);
        for i in 1..n - 1 {
            let (pt, ph, pb) = (p_tilde.values[e][i], p_hat.values[e][i], pbar.values[e][i]);
            let zi = z.values[e][i];
            let lhs = dt2_bar.values[e][i];
            let derived = -d2_pbar_z.values[e][i] - pb * d2_z.values[e][i] - (pt + ph) * pb * zi;
            let alternative = -pb * pb * zi - pt * pb * zi - d2_pbar_z.values[e][i];
            second = second.max((lhs - derived).norm());
            second_alternative = second_alternative.max((lhs - alternative).norm());
        }
    }
    Ok(IdentityResiduals { z_gap, first, second, second_alternative })
}

fn max_interior(f: &GridFunction, include_ends: bool) -> f64 {
    f.values
        .iter()
        .flat_map(|v| {
            let n = v.len();
            let range = if include_ends { 0..n } else { 1..n - 1 };
            v[range].iter().map(|z| z.norm()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}
