use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use tree_carleman::carleman::{carleman_certify, CertifyProblem};
use tree_carleman::inverse::{
    observe, reconstruct, stability_sweep, synthesize_forward, ForwardConfig, InverseSetup, ObservationConfig,
    ObservationSet, Parametrization, PotentialEstimate, ReconstructConfig, StabilityConfig, StabilitySetup,
};
use tree_carleman::solver::{linspace, solve_modal, GridSpec, ModeSpec};
use tree_carleman::{validate_conditions, Error as CoreError, TreeGraph};

use crate::error::CliError;
use crate::scenario::{read_input, Loaded};

pub const TOOL: &str = "tree-carleman";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output directory plus the provenance stamped into every file.
pub struct Output {
    dir: PathBuf,
    sha256: String,
}

impl Output {
    pub fn new(dir: &Path, sha256: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), sha256: sha256.to_string() })
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(BufWriter::new(file))
    }

    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> Result<(), CliError> {
        let mut doc = Map::new();
        doc.insert("tool".into(), json!(TOOL));
        doc.insert("version".into(), json!(VERSION));
        doc.insert("scenario_sha256".into(), json!(self.sha256));
        match serde_json::to_value(body)? {
            Value::Object(fields) => doc.extend(fields),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let mut out = self.create(name)?;
        serde_json::to_writer_pretty(&mut out, &Value::Object(doc))?;
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }

    pub fn csv(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let mut out = self.create(name)?;
        writeln!(out, "# {TOOL} {VERSION} scenario_sha256={}", self.sha256)?;
        body(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

fn grid(loaded: &Loaded, tree: &TreeGraph) -> Result<GridSpec, CliError> {
    Ok(GridSpec::uniform(tree, loaded.scenario.grid.nodes_per_edge)?)
}

fn modes(loaded: &Loaded, tree: &TreeGraph, grid: &GridSpec) -> Result<Vec<ModeSpec>, CliError> {
    if loaded.scenario.problem.modes.is_empty() {
        return Err(CliError::Invalid("problem has no modes".into()));
    }
    Ok(loaded.scenario.problem.mode_specs(tree, grid)?)
}

pub fn weights(loaded: &Loaded, out: &Output) -> Result<(), CliError> {
    let (tree, horizon) = loaded.graph()?;
    let family = loaded.family(&tree, horizon)?;
    let report = validate_conditions(&family);
    let pass = report.passes();
    let doc = family.to_document();
    out.json(
        "weights.json",
        &json!({
            "T": doc.horizon,
            "polys": doc.polys,
            "max_psi": family.max_psi(),
            "validation": report,
            "pass": pass,
        }),
    )?;
    if !pass {
        return Err(CliError::Check(format!("{} weight condition violations", report.violations.len())));
    }
    Ok(())
}

pub fn forward(loaded: &Loaded, out: &Output, seed: Option<u64>) -> Result<(), CliError> {
    let (tree, horizon) = loaded.graph()?;
    let grid = grid(loaded, &tree)?;
    let section = &loaded.scenario.forward;
    let specs = modes(loaded, &tree, &grid)?;
    let potential = loaded.scenario.problem.potential.sample(&grid)?;
    let seed = if section.noise > 0.0 { loaded.seed(seed)? } else { seed.or(loaded.scenario.seed).unwrap_or(0) };
    let config = ForwardConfig {
        horizon,
        observation: ObservationConfig { n_time: section.n_time, observe_root: section.observe_root },
        min_abs_z: section.min_abs_z,
        noise: section.noise,
        seed,
    };
    let result = synthesize_forward(&tree, &grid, &potential, &specs, &config)?;
    let min_abs = result.initial.z.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    out.csv("observations.csv", |w| result.observations.write_csv(w))?;
    out.json(
        "forward.json",
        &json!({
            "min_abs_z": min_abs,
            "r": result.initial.r,
            "phase": result.initial.phase,
            "n_modes": specs.len(),
            "n_series": result.observations.series.len(),
            "noise": section.noise,
            "seed": seed,
            "max_residual": result.modal.modes.iter().map(|m| m.residual).fold(0.0, f64::max),
        }),
    )
}

pub fn carleman(loaded: &Loaded, out: &Output) -> Result<(), CliError> {
    let (tree, horizon) = loaded.graph()?;
    let family = loaded.family(&tree, horizon)?;
    let section = &loaded.scenario.carleman;
    let problems = match &section.problems {
        Some(p) => p.clone(),
        None => vec![CertifyProblem {
            name: "problem".into(),
            potential: loaded.scenario.problem.potential.clone(),
            modes: loaded.scenario.problem.modes.clone(),
        }],
    };
    let config = section.config(loaded.scenario.grid.nodes_per_edge);
    let certificate = carleman_certify(&family, &problems, &config)?;
    for (i, (name, report)) in certificate.reports.iter().enumerate() {
        if i == 0 {
            out.csv("carleman.csv", |w| report.write_csv(w))?;
        }
        out.csv(&format!("carleman-{name}.csv"), |w| report.write_csv(w))?;
    }
    let summaries: Vec<Value> = certificate
        .reports
        .iter()
        .map(|(name, r)| json!({ "name": name, "max_ratio": r.max_ratio(), "s0": r.s0, "C": r.c }))
        .collect();
    out.json(
        "certificate.json",
        &json!({
            "pass": certificate.pass,
            "checks": certificate.checks,
            "warnings": certificate.warnings,
            "sweeps": summaries,
        }),
    )?;
    if !certificate.pass {
        let failed = certificate.checks.iter().filter(|c| !c.pass).count();
        return Err(CliError::Check(format!("{failed} certificate checks failed")));
    }
    Ok(())
}

fn estimate_outputs(
    out: &Output,
    estimate: &PotentialEstimate,
    tree: &TreeGraph,
    truth: Option<&[f64]>,
) -> Result<(), CliError> {
    let relative_error = truth.map(|t| estimate.relative_error(tree, t));
    out.json("estimate.json", estimate)?;
    out.csv("misfit.csv", |w| {
        writeln!(w, "iteration,misfit")?;
        for (i, j) in estimate.history.iter().enumerate() {
            writeln!(w, "{i},{j:e}")?;
        }
        Ok(())
    })?;
    out.json(
        "summary.json",
        &json!({
            "relative_error": relative_error,
            "misfit": estimate.history.last(),
            "iterations": estimate.iterations,
            "converged": estimate.converged,
            "n_param": estimate.n_param,
            "M": estimate.bound,
        }),
    )
}

pub fn invert(loaded: &Loaded, out: &Output, seed: Option<u64>) -> Result<(), CliError> {
    let section =
        loaded.scenario.invert.as_ref().ok_or_else(|| CliError::Invalid("scenario has no invert section".into()))?;
    let (tree, horizon) = loaded.graph()?;
    let grid = grid(loaded, &tree)?;
    let specs = modes(loaded, &tree, &grid)?;
    let param = Parametrization::new(section.n_param)?;
    let observations = match &section.observations {
        Some(path) => {
            let bytes = read_input(&loaded.resolve(path))?;
            let obs = ObservationSet::read_csv(BufReader::new(bytes.as_slice()))?;
            let expected = linspace(-horizon, horizon, obs.times.len());
            let off = obs.times.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if obs.times.len() < 2 || off > 1e-9 * horizon {
                return Err(CliError::Invalid("observation times must be uniform on [-T, T]".into()));
            }
            obs
        }
        None => {
            let truth = section
                .truth
                .as_ref()
                .ok_or_else(|| CliError::Invalid("invert needs either observations or truth".into()))?;
            let potential = param.expand(&tree, &grid, truth)?;
            let modal = solve_modal(&tree, &grid, &potential, horizon, &specs)?;
            let f = &loaded.scenario.forward;
            let config = ObservationConfig { n_time: f.n_time, observe_root: f.observe_root };
            let mut obs = observe(&tree, &grid, &modal, config)?;
            if section.noise > 0.0 {
                let noise_seed = match section.seed {
                    Some(s) => s,
                    None => loaded.seed(seed)?,
                };
                obs = obs.with_noise(section.noise, noise_seed)?;
            }
            out.csv("observations.csv", |w| obs.write_csv(w))?;
            obs
        }
    };
    let observe_root = observations.series.iter().any(|s| s.vertex == 0);
    let setup = InverseSetup { tree: tree.clone(), grid, horizon, modes: specs, observations, observe_root };
    let config = ReconstructConfig {
        lambda: section.lambda,
        max_iter: section.max_iter,
        n_param: section.n_param,
        bound: section.bound,
        step: section.step,
        prior: section.prior.clone(),
        initial: None,
        ..ReconstructConfig::default()
    };
    let truth = section.truth.as_deref();
    match reconstruct(&setup, &config) {
        Ok(estimate) => estimate_outputs(out, &estimate, &tree, truth),
        Err(CoreError::ReconstructionStalled { iterations, last }) => {
            estimate_outputs(out, &last, &tree, truth)?;
            Err(CliError::Check(format!("reconstruction stalled after {iterations} iterations")))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn stability(loaded: &Loaded, out: &Output, seed: Option<u64>) -> Result<(), CliError> {
    let section = loaded
        .scenario
        .stability
        .as_ref()
        .ok_or_else(|| CliError::Invalid("scenario has no stability section".into()))?;
    let (tree, horizon) = loaded.graph()?;
    let grid = grid(loaded, &tree)?;
    let specs = modes(loaded, &tree, &grid)?;
    let seed = loaded.seed(seed)?;
    let setup = StabilitySetup {
        tree,
        grid,
        horizon,
        modes: specs,
        n_time: loaded.scenario.forward.n_time,
        param: Parametrization::new(section.n_param)?,
        min_abs_z: section.min_abs_z,
    };
    let config =
        StabilityConfig { n_pairs: section.n_pairs, bound: section.bound, seed, max_retries: section.max_retries };
    let report = stability_sweep(&setup, &config)?;
    out.csv("stability.csv", |w| report.write_csv(w))?;
    let c = if section.observe_root { report.empirical_c_with_root } else { report.empirical_c };
    out.json(
        "summary.json",
        &json!({
            "empirical_C": c,
            "empirical_C_leaves": report.empirical_c,
            "empirical_C_with_root": report.empirical_c_with_root,
            "n_pairs": report.n_pairs,
            "seed": report.seed,
            "skipped": report.skipped,
            "flagged": report.rows.iter().filter(|r| r.row.flagged).count(),
        }),
    )
}
