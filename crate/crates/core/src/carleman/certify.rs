//! One pass/fail document aggregating weight validation, ratio sweeps,
//! refinement stability, boundary-term comparisons and vertex-term signs.

use serde::{Deserialize, Serialize};

use super::functionals::{auto_clip, CarlemanInputs, TimeWindow};
use super::proof_terms::d_terms;
use super::sweep::{ratio_sweep, CarlemanReport};
use crate::error::{Error, Result};
use crate::solver::{solve_modal, GridSpec, ModalSolution, ModeDocument, PotentialSpec};
use crate::weights::{validate_conditions, WeightFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vertex: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge: Option<usize>,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: Option<f64>, pass: bool) -> Self {
        Self { name: name.into(), vertex: None, edge: None, value, tolerance, pass }
    }

    fn failure(name: impl Into<String>) -> Self {
        Self::new(name, f64::NAN, None, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub pass: bool,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    /// Sweep reports per problem (refined sweep last when refinement ran).
    #[serde(skip)]
    pub reports: Vec<(String, CarlemanReport)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyProblem {
    pub name: String,
    pub potential: PotentialSpec,
    pub modes: Vec<ModeDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub s_grid: Vec<f64>,
    pub nodes_per_edge: usize,
    pub n_time: usize,
    /// Fixed clip; chosen from the smallest `s` when absent.
    pub clip: Option<f64>,
    /// Values of `s` at which the vertex terms are evaluated.
    pub proof_s: Vec<f64>,
    /// Rerun each sweep with `h/2`, `dt/2`, `clip/2` and compare maxima.
    pub refine: bool,
    pub refinement_tolerance: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            s_grid: (1..=40).map(f64::from).collect(),
            nodes_per_edge: 41,
            n_time: 801,
            clip: None,
            proof_s: vec![1.0, 5.0],
            refine: true,
            refinement_tolerance: 0.1,
        }
    }
}

pub fn carleman_certify(
    family: &WeightFamily,
    problems: &[CertifyProblem],
    config: &CertifyConfig,
) -> Result<Certificate> {
    if config.s_grid.is_empty() {
        return Err(Error::EmptySweep);
    }
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    let mut reports = Vec::new();

    let validation = validate_conditions(family);
    checks.push(Check::new("weights.conditions", validation.violations.len() as f64, Some(0.0), validation.passes()));
    for v in &validation.violations {
        let mut c = Check::failure(format!("weights.{:?}", v.kind));
        c.vertex = v.vertex;
        c.edge = Some(v.edge);
        checks.push(c);
    }

    if problems.is_empty() {
        let msg = "empty problem set: certificate passes vacuously".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let tree = family.tree();
    let horizon = family.horizon();
    let s_min = config.s_grid[0];
    let clip = match config.clip {
        Some(c) => c,
        None => auto_clip(family, s_min)?,
    };

    for problem in problems {
        let p = &problem.name;
        let solve = |grid: &GridSpec| -> Result<ModalSolution> {
            let potential = problem.potential.sample(grid)?;
            let specs = problem.modes.iter().map(|m| m.to_spec(tree, grid)).collect::<Result<Vec<_>>>()?;
            solve_modal(tree, grid, &potential, horizon, &specs)
        };
        let grid = GridSpec::uniform(tree, config.nodes_per_edge)?;
        let run = |grid: &GridSpec, window: TimeWindow| -> Result<(ModalSolution, CarlemanReport)> {
            let modal = solve(grid)?;
            let inputs = CarlemanInputs::from_modal(family, grid, &modal, window)?;
            let report = ratio_sweep(&inputs, &config.s_grid)?;
            Ok((modal, report))
        };
        let window = TimeWindow { clip, n_time: config.n_time };
        let (modal, report) = match run(&grid, window) {
            Ok(r) => r,
            Err(e) => {
                warnings.push(format!("{p}: {e}"));
                checks.push(Check::failure(format!("{p}.sweep")));
                continue;
            }
        };
        let max_ratio = report.max_ratio();
        reports.push((p.clone(), report.clone()));
        checks.push(Check::new(
            format!("{p}.ratio_max"),
            max_ratio.unwrap_or(f64::NAN),
            None,
            max_ratio.is_some_and(f64::is_finite),
        ));
        if let Some(c) = report.c {
            checks.push(Check::new(format!("{p}.empirical_C"), c, None, c.is_finite()));
        }

        // corollary bound: theta e^{2 s theta psi} <= T^-2 e^{2 s psi / T^2} needs 2 s |psi_leaf| >= T^2
        let leaf_psi_min = tree
            .leaves()
            .filter_map(|k| tree.boundary_edge(k).map(|j| family.psi(j, tree.coordinate(k), 0).abs()))
            .fold(f64::INFINITY, f64::min);
        let s_bound = horizon * horizon / (2.0 * leaf_psi_min);
        let mut skipped = 0;
        for row in &report.rows {
            if row.s < s_bound {
                skipped += 1;
                continue;
            }
            let tol = 1e-6 * row.b_corollary.abs();
            let gap = row.b_theorem1 - row.b_corollary;
            checks.push(Check::new(format!("{p}.B_theorem1_le_corollary[s={}]", row.s), gap, Some(tol), gap <= tol));
        }
        if skipped > 0 {
            warnings.push(format!(
                "{p}: corollary bound comparison skipped for {skipped} values of s below {s_bound:.4} where it is not implied"
            ));
        }

        let single_mode = modal.modes.len() == 1;
        if !single_mode {
            warnings.push(format!("{p}: D1 sign has no claim for multi-mode solutions; reported only"));
        }
        if tree.inner_vertices().is_empty() {
            warnings.push(format!("{p}: no inner vertices, no vertex terms to check"));
        }
        for &s in &config.proof_s {
            match d_terms(family, &grid, &modal, s, window) {
                Ok(table) => {
                    for v in &table.vertices {
                        for m in 0..4 {
                            let tol = table.tolerance(v, m);
                            let value = v.d[m];
                            let pass = match m {
                                0 => !single_mode || value <= tol,
                                1 => value <= tol,
                                _ => value.abs() <= tol,
                            };
                            let mut c = Check::new(format!("{p}.D{}[s={s}]", m + 1), value, Some(tol), pass);
                            c.vertex = Some(v.vertex);
                            checks.push(c);
                        }
                    }
                }
                Err(e) => {
                    warnings.push(format!("{p}: {e}"));
                    checks.push(Check::failure(format!("{p}.D[s={s}]")));
                }
            }
        }

        if config.refine {
            let fine = TimeWindow { clip: 0.5 * clip, n_time: 2 * config.n_time - 1 };
            match run(&grid.refined(), fine) {
                Ok((_, fine_report)) => {
                    let (a, b) = (max_ratio.unwrap_or(f64::NAN), fine_report.max_ratio().unwrap_or(f64::NAN));
                    let change = (a - b).abs() / b.abs();
                    checks.push(Check::new(
                        format!("{p}.ratio_refinement"),
                        change,
                        Some(config.refinement_tolerance),
                        change < config.refinement_tolerance,
                    ));
                    reports.push((format!("{p}.refined"), fine_report));
                }
                Err(e) => {
                    warnings.push(format!("{p}: refinement failed: {e}"));
                    checks.push(Check::failure(format!("{p}.ratio_refinement")));
                }
            }
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(Certificate { pass, checks, warnings, reports })
}
