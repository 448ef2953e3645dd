//! Finite-difference derivatives along edges, in the global coordinate.

use num::complex::Complex64;

use super::grid::{GridFunction, GridSpec};
use crate::error::{Error, Result};

/// Second-order first derivative: central inside, 3-point one-sided at both ends.
pub fn spatial_derivative(grid: &GridSpec, u: &GridFunction) -> Result<GridFunction> {
    check_shape(grid, u, 3)?;
    let values = u
        .values
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let h = grid.step(idx + 1);
            let n = v.len();
            (0..n)
                .map(|i| {
                    if i == 0 {
                        (-1.5 * v[0] + 2.0 * v[1] - 0.5 * v[2]) / h
                    } else if i == n - 1 {
                        (0.5 * v[n - 3] - 2.0 * v[n - 2] + 1.5 * v[n - 1]) / h
                    } else {
                        (v[i + 1] - v[i - 1]) / (2.0 * h)
                    }
                })
                .collect()
        })
        .collect();
    Ok(GridFunction { values })
}

/// Second-order second derivative: 3-point inside, 4-point one-sided at the ends.
pub fn second_derivative(grid: &GridSpec, u: &GridFunction) -> Result<GridFunction> {
    check_shape(grid, u, 4)?;
    let values = u
        .values
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let h2 = grid.step(idx + 1).powi(2);
            let n = v.len();
            (0..n)
                .map(|i| {
                    if i == 0 {
                        (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
                    } else if i == n - 1 {
                        (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2
                    } else {
                        (v[i - 1] - 2.0 * v[i] + v[i + 1]) / h2
                    }
                })
                .collect()
        })
        .collect();
    Ok(GridFunction { values })
}

const REF_INTERIOR: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
// node 1, offsets -1..=4
const REF_NEAR: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
// node 0, offsets 0..=5
const REF_END: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];

/// Fourth-order second derivative, used where discretisation error of the
/// 3-point stencil would mask the quantity being measured. Needs 6 nodes per edge.
pub fn second_derivative_reference(grid: &GridSpec, u: &GridFunction) -> Result<GridFunction> {
    check_shape(grid, u, 6)?;
    let values = u
        .values
        .iter()
        .enumerate()
        .map(|(idx, v)| {
            let scale = 12.0 * grid.step(idx + 1).powi(2);
            let n = v.len();
            let dot = |w: &[f64], start: usize| -> Complex64 {
                w.iter().zip(&v[start..start + w.len()]).map(|(c, x)| x * *c).sum::<Complex64>() / scale
            };
            let mirrored = |w: &[f64], end: usize| -> Complex64 {
                // w applied backwards from index `end`
                w.iter().enumerate().map(|(k, c)| v[end - k] * *c).sum::<Complex64>() / scale
            };
            (0..n)
                .map(|i| {
                    if i == 0 {
                        dot(&REF_END, 0)
                    } else if i == 1 {
                        dot(&REF_NEAR, 0)
                    } else if i == n - 1 {
                        mirrored(&REF_END, n - 1)
                    } else if i == n - 2 {
                        mirrored(&REF_NEAR, n - 1)
                    } else {
                        dot(&REF_INTERIOR, i - 2)
                    }
                })
                .collect()
        })
        .collect();
    Ok(GridFunction { values })
}

fn check_shape(grid: &GridSpec, u: &GridFunction, required: usize) -> Result<()> {
    if !u.matches(grid) {
        return Err(Error::Shape("field does not match the grid".into()));
    }
    for j in 1..=grid.n_edges() {
        if grid.nodes(j) < required {
            return Err(Error::GridTooCoarse { edge: j, nodes: grid.nodes(j), required });
        }
    }
    Ok(())
}
