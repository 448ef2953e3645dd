//! Forward synthesis of boundary observations `d_t^m d_x u` at boundary vertices.

use std::io::{BufRead, Write};

use num::complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{
    linspace, solve_modal, spatial_derivative, GridFunction, GridSpec, ModalSolution, ModeSpec, RealField,
};
use crate::tree::TreeGraph;

/// Whether `z` is real or purely imaginary on every edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Real,
    Imaginary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub z: GridFunction,
    pub r: f64,
    pub phase: Phase,
}

/// Relative size of the discarded component below which `z` counts as real
/// (or imaginary).
pub const PHASE_TOLERANCE: f64 = 1e-12;

impl InitialData {
    /// Checks `|z| >= r` at every node and the real-or-imaginary condition.
    pub fn new(z: GridFunction, r: f64) -> Result<Self> {
        let scale = z.max_abs();
        let min_abs = z.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if !(min_abs >= r) {
            return Err(Error::InitialDataBound { min_abs, r });
        }
        let max_im = z.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        let max_re = z.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let phase = if max_im <= PHASE_TOLERANCE * scale {
            Phase::Real
        } else if max_re <= PHASE_TOLERANCE * scale {
            Phase::Imaginary
        } else {
            return Err(Error::InitialDataPhase { mixed: max_im.min(max_re) / scale });
        };
        Ok(Self { z, r, phase })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    pub vertex: usize,
    pub edge: usize,
    /// Order of the time derivative, 1 or 2.
    pub m: u32,
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub times: Vec<f64>,
    pub series: Vec<ObservationSeries>,
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationConfig {
    pub n_time: usize,
    /// Also observe the root vertex.
    pub observe_root: bool,
}

/// Vertices observed: leaves, plus the root when requested, with their boundary edge.
pub fn observed_vertices(tree: &TreeGraph, observe_root: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if observe_root {
        out.push((0, tree.root_edge()));
    }
    for k in tree.leaves() {
        if let Some(j) = tree.boundary_edge(k) {
            out.push((k, j));
        }
    }
    out
}

/// `d_t^m d_x u` at the observed vertices for `m = 1, 2`, on `n_time` points of `[-T, T]`.
pub fn observe(
    tree: &TreeGraph,
    grid: &GridSpec,
    modal: &ModalSolution,
    config: ObservationConfig,
) -> Result<ObservationSet> {
    if config.n_time < 2 {
        return Err(Error::InvalidParameter("need at least two observation times".into()));
    }
    let times = linspace(-modal.horizon, modal.horizon, config.n_time);
    let derivs: Vec<GridFunction> =
        modal.modes.iter().map(|m| spatial_derivative(grid, &m.profile)).collect::<Result<_>>()?;
    let mut series = Vec::new();
    for (k, j) in observed_vertices(tree, config.observe_root) {
        let node = if k == 0 { 0 } else { grid.nodes(j) - 1 };
        for m in 1..=2u32 {
            let values = times
                .iter()
                .map(|&t| {
                    modal
                        .modes
                        .iter()
                        .zip(&derivs)
                        .map(|(mode, d)| d.edge(j)[node] * mode.time_factor(t, m))
                        .sum::<Complex64>()
                })
                .collect();
            series.push(ObservationSeries { vertex: k, edge: j, m, values });
        }
    }
    Ok(ObservationSet { times, series, noise: 0.0 })
}

impl ObservationSet {
    /// Adds complex Gaussian noise with standard deviation `level * rms` per
    /// series (`E|n|^2 = (level rms)^2`), drawn from a ChaCha8 stream seeded by `seed`.
    pub fn with_noise(&self, level: f64, seed: u64) -> Result<Self> {
        if !(level >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise level must be nonnegative, got {level}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let series = self
            .series
            .iter()
            .map(|s| {
                let rms = (s.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.values.len().max(1) as f64).sqrt();
                let sigma = level * rms / std::f64::consts::SQRT_2;
                let values = s
                    .values
                    .iter()
                    .map(|v| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        v + Complex64::new(sigma * re, sigma * im)
                    })
                    .collect();
                ObservationSeries { values, ..s.clone() }
            })
            .collect();
        Ok(Self { times: self.times.clone(), series, noise: level })
    }

    /// Trapezoid `sum_series int |a - b|^2 dt`; series are matched by position.
    pub fn distance_sq(&self, other: &ObservationSet) -> Result<f64> {
        if self.series.len() != other.series.len() || self.times.len() != other.times.len() {
            return Err(Error::Shape("observation sets differ in layout".into()));
        }
        let w = trapezoid(&self.times);
        Ok(self
            .series
            .iter()
            .zip(&other.series)
            .map(|(a, b)| a.values.iter().zip(&b.values).zip(&w).map(|((x, y), q)| q * (x - y).norm_sqr()).sum::<f64>())
            .sum())
    }

    /// Trapezoid `sum_series int |a|^2 dt`.
    pub fn norm_sq(&self) -> f64 {
        let w = trapezoid(&self.times);
        self.series.iter().map(|s| s.values.iter().zip(&w).map(|(v, q)| q * v.norm_sqr()).sum::<f64>()).sum()
    }

    /// Series restricted to the given vertices.
    pub fn restrict(&self, vertices: &[usize]) -> Self {
        Self {
            times: self.times.clone(),
            series: self.series.iter().filter(|s| vertices.contains(&s.vertex)).cloned().collect(),
            noise: self.noise,
        }
    }

    /// CSV with columns `vertex,edge,m,t,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "vertex,edge,m,t,re,im")?;
        for s in &self.series {
            for (t, v) in self.times.iter().zip(&s.values) {
                writeln!(out, "{},{},{},{},{},{}", s.vertex, s.edge, s.m, t, v.re, v.im)?;
            }
        }
        Ok(())
    }

    /// Reads the CSV written by [`Self::write_csv`]; lines starting with `#` are skipped.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut times: Vec<f64> = Vec::new();
        let mut series: Vec<ObservationSeries> = Vec::new();
        let mut header_seen = false;
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != "vertex,edge,m,t,re,im" {
                    return Err(Error::Parse(format!("line {}: unexpected header {line:?}", lineno + 1)));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 fields", lineno + 1)));
            }
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
            let vertex: usize = fields[0].parse().map_err(|_| bad("vertex"))?;
            let edge: usize = fields[1].parse().map_err(|_| bad("edge"))?;
            let m: u32 = fields[2].parse().map_err(|_| bad("m"))?;
            let t: f64 = fields[3].parse().map_err(|_| bad("t"))?;
            let re: f64 = fields[4].parse().map_err(|_| bad("re"))?;
            let im: f64 = fields[5].parse().map_err(|_| bad("im"))?;
            let same = series.last().is_some_and(|s| s.vertex == vertex && s.edge == edge && s.m == m);
            if !same {
                series.push(ObservationSeries { vertex, edge, m, values: Vec::new() });
            }
            let first = series.len() == 1;
            let current = series.last_mut().expect("just pushed");
            if first {
                times.push(t);
            } else if times.get(current.values.len()) != Some(&t) {
                return Err(Error::Parse(format!("line {}: time grid differs between series", lineno + 1)));
            }
            current.values.push(Complex64::new(re, im));
        }
        if series.iter().any(|s| s.values.len() != times.len()) {
            return Err(Error::Parse("series lengths differ".into()));
        }
        Ok(Self { times, series, noise: 0.0 })
    }
}

pub(crate) fn trapezoid(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = points[i + 1] - points[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardConfig {
    pub horizon: f64,
    pub observation: ObservationConfig,
    /// Required lower bound `r` on `|z|`; no check when absent.
    pub min_abs_z: Option<f64>,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ForwardResult {
    pub modal: ModalSolution,
    pub initial: InitialData,
    pub observations: ObservationSet,
}

/// Solves every mode with the given potential, sets `z = u(., 0)` and extracts
/// the boundary observations.
pub fn synthesize_forward(
    tree: &TreeGraph,
    grid: &GridSpec,
    potential: &RealField,
    modes: &[ModeSpec],
    config: &ForwardConfig,
) -> Result<ForwardResult> {
    let modal = solve_modal(tree, grid, potential, config.horizon, modes)?;
    let z = modal.value(0.0, 0);
    let r = match config.min_abs_z {
        Some(r) => r,
        None => z.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min),
    };
    let initial = InitialData::new(z, r)?;
    let mut observations = observe(tree, grid, &modal, config.observation)?;
    if config.noise > 0.0 {
        observations = observations.with_noise(config.noise, config.seed)?;
    }
    Ok(ForwardResult { modal, initial, observations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::BoundaryValues;
    use crate::tree::five_edge_example;

    fn all_ones(tree: &TreeGraph, grid: &GridSpec, m: u32, amp: f64) -> ModeSpec {
        let boundary: BoundaryValues =
            tree.boundary_vertices().iter().map(|&k| (k, Complex64::new(amp, 0.0))).collect();
        ModeSpec { m, phase: 0.0, boundary, source: GridFunction::zeros(grid) }
    }

    fn config() -> ForwardConfig {
        ForwardConfig {
            horizon: 2.0,
            observation: ObservationConfig { n_time: 41, observe_root: false },
            min_abs_z: Some(0.1),
            noise: 0.0,
            seed: 7,
        }
    }

    #[test]
    fn static_mode_gives_zero_time_derivatives() {
        let tree = five_edge_example();
        let grid = GridSpec::uniform(&tree, 11).unwrap();
        let p = RealField::zeros_real(&grid);
        let out = synthesize_forward(&tree, &grid, &p, &[all_ones(&tree, &grid, 0, 1.0)], &config()).unwrap();
        assert_eq!(out.initial.phase, Phase::Real);
        // harmonic with unit boundary data: u = 1
        assert!(out.initial.z.iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        assert_eq!(out.observations.norm_sq(), 0.0);
        assert_eq!(out.observations.series.len(), 6);
    }

    #[test]
    fn small_z_is_rejected() {
        let tree = five_edge_example();
        let grid = GridSpec::uniform(&tree, 11).unwrap();
        let p = RealField::zeros_real(&grid);
        let mut cfg = config();
        cfg.min_abs_z = Some(2.0);
        let err = synthesize_forward(&tree, &grid, &p, &[all_ones(&tree, &grid, 0, 1.0)], &cfg).unwrap_err();
        assert!(matches!(err, Error::InitialDataBound { .. }));
    }

    #[test]
    fn noise_has_requested_relative_size() {
        let tree = five_edge_example();
        let grid = GridSpec::uniform(&tree, 11).unwrap();
        let p = RealField::zeros_real(&grid);
        let mut cfg = config();
        cfg.observation.n_time = 2001;
        let modes = [all_ones(&tree, &grid, 0, 1.0), all_ones(&tree, &grid, 1, 0.2)];
        let clean = synthesize_forward(&tree, &grid, &p, &modes, &cfg).unwrap().observations;
        let noisy = clean.with_noise(1e-2, 3).unwrap();
        let rel = (clean.distance_sq(&noisy).unwrap() / clean.norm_sq()).sqrt();
        assert!((rel - 1e-2).abs() < 1e-3, "{rel}");
        assert_eq!(noisy, clean.with_noise(1e-2, 3).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let tree = five_edge_example();
        let grid = GridSpec::uniform(&tree, 11).unwrap();
        let p = RealField::filled(&grid, 0.05);
        let modes = [all_ones(&tree, &grid, 0, 1.0), all_ones(&tree, &grid, 1, 0.2)];
        let obs = synthesize_forward(&tree, &grid, &p, &modes, &config()).unwrap().observations;
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let back = ObservationSet::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, obs);
    }
}
