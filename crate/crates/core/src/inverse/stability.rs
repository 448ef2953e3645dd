//! Empirical Lipschitz ratios between potential differences and observation differences.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forward::{observe, InitialData, ObservationConfig, ObservationSet};
use super::reconstruct::Parametrization;
use crate::error::{Error, Result};
use crate::par;
use crate::solver::{solve_modal, GridSpec, ModeSpec};
use crate::tree::TreeGraph;

/// Denominators at or below this are treated as zero.
pub const STABILITY_FLOOR: f64 = 1e-300;

/// Shared geometry and boundary data for both potentials of a pair.
#[derive(Debug, Clone)]
pub struct StabilitySetup {
    pub tree: TreeGraph,
    pub grid: GridSpec,
    pub horizon: f64,
    pub modes: Vec<ModeSpec>,
    pub n_time: usize,
    pub param: Parametrization,
    /// Required `r` in `|z| >= r` for both solutions.
    pub min_abs_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRow {
    pub numerator: f64,
    /// Leaf observations only.
    pub denominator: f64,
    /// Leaf observations plus the root.
    pub denominator_with_root: f64,
    pub ratio: Option<f64>,
    pub ratio_with_root: Option<f64>,
    /// Nonzero potential difference with a vanishing denominator.
    pub flagged: bool,
    /// Smaller of the two `min |z|`.
    pub min_abs_z: f64,
}

fn ratio(num: f64, den: f64) -> (Option<f64>, bool) {
    if den > STABILITY_FLOOR {
        (Some(num / den), false)
    } else {
        (None, num > 0.0)
    }
}

/// Numerator `sum_j int |p~ - p^|^2 dx` and denominator
/// `sum_k sum_m int |d_t^m d_x (u~ - u^)|^2 dt` for one pair.
pub fn lipschitz_ratio(setup: &StabilitySetup, p_tilde: &[f64], p_hat: &[f64]) -> Result<LipschitzRow> {
    let tree = &setup.tree;
    let config = ObservationConfig { n_time: setup.n_time, observe_root: true };
    let solve = |params: &[f64]| -> Result<(ObservationSet, f64)> {
        let potential = setup.param.expand(tree, &setup.grid, params)?;
        let modal = solve_modal(tree, &setup.grid, &potential, setup.horizon, &setup.modes)?;
        let initial = InitialData::new(modal.value(0.0, 0), setup.min_abs_z)?;
        let min_abs = initial.z.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        Ok((observe(tree, &setup.grid, &modal, config)?, min_abs))
    };
    let (a, za) = solve(p_tilde)?;
    let (b, zb) = solve(p_hat)?;
    let leaves: Vec<usize> = tree.leaves().collect();
    let denominator = a.restrict(&leaves).distance_sq(&b.restrict(&leaves))?;
    let root_part = a.restrict(&[0]).distance_sq(&b.restrict(&[0]))?;
    let denominator_with_root = denominator + root_part;
    let numerator = setup.param.l2_distance_sq(tree, p_tilde, p_hat);
    let (r, flag_a) = ratio(numerator, denominator);
    let (r_root, flag_b) = ratio(numerator, denominator_with_root);
    Ok(LipschitzRow {
        numerator,
        denominator,
        denominator_with_root,
        ratio: r,
        ratio_with_root: r_root,
        flagged: flag_a || flag_b,
        min_abs_z: za.min(zb),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub n_pairs: usize,
    /// Coefficients are drawn uniformly from `[-M, M]`.
    pub bound: f64,
    pub seed: u64,
    /// Redraws allowed when a pair violates the `|z|` condition.
    pub max_retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub pair: usize,
    pub p_tilde: Vec<f64>,
    pub p_hat: Vec<f64>,
    #[serde(flatten)]
    pub row: LipschitzRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub pair: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub skipped: Vec<SkippedPair>,
    /// Max ratio with leaf observations.
    pub empirical_c: Option<f64>,
    /// Max ratio when the root is observed as well.
    pub empirical_c_with_root: Option<f64>,
    pub n_pairs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    #[serde(rename = "empirical_C")]
    pub empirical_c: Option<f64>,
    pub n_pairs: usize,
    pub seed: u64,
}

fn draw(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

/// Pair `i` draws from the ChaCha8 stream `i` of `seed`, so results do not
/// depend on scheduling.
pub fn stability_sweep(setup: &StabilitySetup, config: &StabilityConfig) -> Result<StabilityReport> {
    if !(config.bound > 0.0) {
        return Err(Error::InvalidParameter(format!("bound must be positive, got {}", config.bound)));
    }
    let n = setup.param.len(&setup.tree);
    let outcomes = par::map_range(config.n_pairs, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let mut last = String::new();
        for _ in 0..=config.max_retries {
            let p_tilde = draw(&mut rng, n, config.bound);
            let p_hat = draw(&mut rng, n, config.bound);
            match lipschitz_ratio(setup, &p_tilde, &p_hat) {
                Ok(row) => return Ok(Ok(StabilityRow { pair: i, p_tilde, p_hat, row })),
                Err(e @ (Error::InitialDataBound { .. } | Error::InitialDataPhase { .. })) => last = e.to_string(),
                Err(e) => return Err(e),
            }
        }
        Ok(Err(SkippedPair { pair: i, reason: last }))
    });
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Ok(row) => rows.push(row),
            Err(skip) => {
                log::warn!("pair {} skipped: {}", skip.pair, skip.reason);
                skipped.push(skip);
            }
        }
    }
    let max = |f: fn(&StabilityRow) -> Option<f64>| rows.iter().filter_map(f).reduce(f64::max);
    Ok(StabilityReport {
        empirical_c: max(|r| r.row.ratio),
        empirical_c_with_root: max(|r| r.row.ratio_with_root),
        rows,
        skipped,
        n_pairs: config.n_pairs,
        seed: config.seed,
    })
}

impl StabilityReport {
    pub fn summary(&self) -> StabilitySummary {
        StabilitySummary { empirical_c: self.empirical_c, n_pairs: self.n_pairs, seed: self.seed }
    }

    /// CSV with columns `pair,numerator,denominator,denominator_with_root,ratio,ratio_with_root,flagged`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "pair,numerator,denominator,denominator_with_root,ratio,ratio_with_root,flagged")?;
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:e}")).unwrap_or_else(|| "NaN".into());
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{},{},{}",
                r.pair,
                r.row.numerator,
                r.row.denominator,
                r.row.denominator_with_root,
                fmt(r.row.ratio),
                fmt(r.row.ratio_with_root),
                r.row.flagged
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{BoundaryValues, GridFunction};
    use crate::tree::five_edge_example;
    use num::complex::Complex64;

    fn setup(n_pairs_nodes: usize) -> StabilitySetup {
        let tree = five_edge_example();
        let grid = GridSpec::uniform(&tree, n_pairs_nodes).unwrap();
        let mode = |m: u32, amp: f64| {
            let boundary: BoundaryValues =
                tree.boundary_vertices().iter().map(|&k| (k, Complex64::new(amp, 0.0))).collect();
            ModeSpec { m, phase: 0.0, boundary, source: GridFunction::zeros(&grid) }
        };
        let modes = vec![mode(0, 1.0), mode(1, 0.1)];
        StabilitySetup {
            tree,
            grid,
            horizon: 2.0,
            modes,
            n_time: 41,
            param: Parametrization::new(1).unwrap(),
            min_abs_z: 0.1,
        }
    }

    #[test]
    fn equal_potentials_give_undefined_ratio() {
        let s = setup(11);
        let p = vec![0.1, -0.2, 0.3, 0.0, 0.2];
        let row = lipschitz_ratio(&s, &p, &p).unwrap();
        assert_eq!((row.numerator, row.denominator), (0.0, 0.0));
        assert_eq!(row.ratio, None);
        assert!(!row.flagged);
    }

    #[test]
    fn empty_and_repeated_sweeps() {
        let s = setup(11);
        let mut cfg = StabilityConfig { n_pairs: 0, bound: 0.5, seed: 4, max_retries: 3 };
        let empty = stability_sweep(&s, &cfg).unwrap();
        assert!(empty.rows.is_empty() && empty.empirical_c.is_none());
        cfg.n_pairs = 3;
        let a = stability_sweep(&s, &cfg).unwrap();
        assert_eq!(a, stability_sweep(&s, &cfg).unwrap());
        for r in &a.rows {
            assert!(r.row.denominator_with_root >= r.row.denominator);
        }
        assert!(a.empirical_c_with_root.unwrap() <= a.empirical_c.unwrap());
    }
}
