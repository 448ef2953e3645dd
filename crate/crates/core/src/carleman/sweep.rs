//! Ratio sweeps over `s`, empirical `s0` and `C`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::functionals::{BoundaryForm, CarlemanInputs};
use crate::error::{Error, Result};
use crate::par;

/// Added to the ratio denominator; rows whose data terms fall below it are flagged.
pub const DENOMINATOR_FLOOR: f64 = 1e-300;
/// Allowed rise above the running maximum when locating `s0`.
pub const S0_SLACK: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: f64,
    pub lhs: f64,
    /// Mode-wise data term (equal to the plain one for a single mode).
    pub rhs_data: f64,
    pub rhs_plain: f64,
    pub b_theorem1: f64,
    pub b_corollary: f64,
    /// `None` when the data terms and `B+` are all exactly zero.
    pub ratio: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanReport {
    pub rows: Vec<SweepRow>,
    pub s0: Option<f64>,
    pub c: Option<f64>,
}

pub fn evaluate_row(inputs: &CarlemanInputs, s: f64) -> Result<SweepRow> {
    let lhs = inputs.lhs(s)?;
    let rhs_data = inputs.rhs_data_per_mode(s)?;
    let rhs_plain = inputs.rhs_data(s)?;
    let b_theorem1 = inputs.boundary_term(s, BoundaryForm::Theorem1)?;
    let b_corollary = inputs.boundary_term(s, BoundaryForm::CorollaryBound)?;
    let data = rhs_data + b_theorem1.max(0.0);
    let (ratio, flagged) =
        if data == 0.0 { (None, true) } else { (Some(lhs / (data + DENOMINATOR_FLOOR)), data < DENOMINATOR_FLOOR) };
    Ok(SweepRow { s, lhs, rhs_data, rhs_plain, b_theorem1, b_corollary, ratio, flagged })
}

pub fn ratio_sweep(inputs: &CarlemanInputs, s_grid: &[f64]) -> Result<CarlemanReport> {
    if s_grid.is_empty() {
        return Err(Error::EmptySweep);
    }
    if s_grid.windows(2).any(|w| w[1] <= w[0]) || s_grid.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidParameter("s grid must be positive and increasing".into()));
    }
    let rows = par::map(s_grid, |&s| evaluate_row(inputs, s)).into_iter().collect::<Result<Vec<_>>>()?;
    let ratios: Vec<Option<f64>> = rows.iter().map(|r| r.ratio).collect();
    let s0_index = empirical_s0(&ratios);
    let c = s0_index.and_then(|i| ratios[i..].iter().flatten().copied().reduce(f64::max));
    Ok(CarlemanReport { s0: s0_index.map(|i| rows[i].s), c, rows })
}

/// Smallest index `i` such that no later defined ratio exceeds the running
/// maximum (started at `i`) by more than [`S0_SLACK`].
pub fn empirical_s0(ratios: &[Option<f64>]) -> Option<usize> {
    'start: for i in 0..ratios.len() {
        let mut running: Option<f64> = None;
        for r in ratios[i..].iter().flatten() {
            if let Some(m) = running {
                if *r > S0_SLACK * m {
                    continue 'start;
                }
                running = Some(m.max(*r));
            } else {
                running = Some(*r);
            }
        }
        if running.is_some() {
            return Some(i);
        }
    }
    None
}

impl CarlemanReport {
    pub fn max_ratio(&self) -> Option<f64> {
        self.rows.iter().filter_map(|r| r.ratio).reduce(f64::max)
    }

    /// CSV with columns `s,lhs,rhs_data,B_theorem1,B_corollary,ratio,flagged`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "s,lhs,rhs_data,B_theorem1,B_corollary,ratio,flagged")?;
        for r in &self.rows {
            let ratio = r.ratio.map(|v| format!("{v:e}")).unwrap_or_else(|| "NaN".into());
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{},{}",
                r.s, r.lhs, r.rhs_data, r.b_theorem1, r.b_corollary, ratio, r.flagged
            )?;
        }
        Ok(())
    }
}
