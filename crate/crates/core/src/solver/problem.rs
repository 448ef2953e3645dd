//! JSON description of potentials, sources and mode lists.

use std::collections::BTreeMap;

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{GridFunction, GridSpec, RealField};
use super::modal::ModeSpec;
use super::stationary::BoundaryValues;
use crate::error::{Error, Result};
use crate::tree::TreeGraph;

/// A real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(&self) -> Complex64 {
        match *self {
            ComplexValue::Real(re) => Complex64::new(re, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

/// Constant, per-edge constants, or per-node arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Constant(f64),
    PerEdge(Vec<f64>),
    Nodal(Vec<Vec<f64>>),
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Constant(0.0)
    }
}

impl PotentialSpec {
    pub fn sample(&self, grid: &GridSpec) -> Result<RealField> {
        match self {
            PotentialSpec::Constant(v) => Ok(RealField::filled(grid, *v)),
            PotentialSpec::PerEdge(v) => RealField::piecewise(grid, v),
            PotentialSpec::Nodal(values) => {
                let field = RealField { values: values.clone() };
                if !field.matches(grid) {
                    return Err(Error::Shape("nodal potential does not match the grid".into()));
                }
                Ok(field)
            }
        }
    }
}

/// Closed-form or tabulated source profiles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceSpec {
    #[default]
    Zero,
    /// `amplitude * sin(wavenumber * x + shift)` on every edge.
    Sin {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        wavenumber: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `sum_k coefficients[k] x^k` on every edge.
    Poly { coefficients: Vec<f64> },
    /// Node values per edge; `im` may be omitted.
    Array {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
}

fn one() -> f64 {
    1.0
}

impl SourceSpec {
    pub fn sample(&self, grid: &GridSpec) -> Result<GridFunction> {
        let field = match self {
            SourceSpec::Zero => GridFunction::zeros(grid),
            SourceSpec::Sin { amplitude, wavenumber, shift } => {
                GridFunction::from_fn(grid, |_, x| Complex64::new(amplitude * (wavenumber * x + shift).sin(), 0.0))
            }
            SourceSpec::Poly { coefficients } => GridFunction::from_fn(grid, |_, x| {
                Complex64::new(coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c), 0.0)
            }),
            SourceSpec::Array { re, im } => {
                let values = match im {
                    None => re.iter().map(|r| r.iter().map(|&v| Complex64::new(v, 0.0)).collect()).collect(),
                    Some(im) => {
                        if im.len() != re.len() || im.iter().zip(re).any(|(a, b)| a.len() != b.len()) {
                            return Err(Error::Shape("source re/im arrays differ in shape".into()));
                        }
                        re.iter()
                            .zip(im)
                            .map(|(r, i)| r.iter().zip(i).map(|(&a, &b)| Complex64::new(a, b)).collect())
                            .collect()
                    }
                };
                GridFunction { values }
            }
        };
        if !field.matches(grid) {
            return Err(Error::Shape("source array does not match the grid".into()));
        }
        Ok(field)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeDocument {
    pub m: u32,
    #[serde(default)]
    pub phase: f64,
    /// Boundary vertex id (as a string key) to amplitude.
    #[serde(default)]
    pub boundary: BTreeMap<String, ComplexValue>,
    #[serde(default)]
    pub source: SourceSpec,
}

impl ModeDocument {
    pub fn to_spec(&self, tree: &TreeGraph, grid: &GridSpec) -> Result<ModeSpec> {
        let mut boundary = BoundaryValues::new();
        for (key, value) in &self.boundary {
            let k: usize = key.parse().map_err(|_| Error::Parse(format!("boundary key {key:?} is not a vertex id")))?;
            if tree.boundary_vertices().binary_search(&k).is_err() {
                return Err(Error::InvalidParameter(format!("vertex {k} is not a boundary vertex")));
            }
            boundary.insert(k, value.value());
        }
        Ok(ModeSpec { m: self.m, phase: self.phase, boundary, source: self.source.sample(grid)? })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(default)]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub modes: Vec<ModeDocument>,
}

impl ProblemDocument {
    pub fn mode_specs(&self, tree: &TreeGraph, grid: &GridSpec) -> Result<Vec<ModeSpec>> {
        self.modes.iter().map(|m| m.to_spec(tree, grid)).collect()
    }
}
