//! Scenario documents: one JSON file describing the graph, weights and every pipeline stage.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use tree_carleman::carleman::{CertifyConfig, CertifyProblem};
use tree_carleman::inverse::StepRule;
use tree_carleman::solver::ProblemDocument;
use tree_carleman::weights::{
    construct_weights, default_root_poly, EdgePoly, PolyEntry, RationalValue, WeightDocument,
};
use tree_carleman::{GraphDocument, TreeGraph, WeightFamily};

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Path(PathBuf),
    Inline(GraphDocument),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootPoly {
    pub a: RationalValue,
    pub b: RationalValue,
    pub c: RationalValue,
}

/// Either constructed from a root polynomial or given edge by edge.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Explicit {
        polys: Vec<PolyEntry>,
    },
    Construct {
        #[serde(default)]
        root: Option<RootPoly>,
        #[serde(default)]
        margin: Option<RationalValue>,
    },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Construct { root: None, margin: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nodes_per_edge: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { nodes_per_edge: 41 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanSection {
    #[serde(default)]
    pub s_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub n_time: Option<usize>,
    #[serde(default)]
    pub clip: Option<f64>,
    #[serde(default)]
    pub proof_s: Option<Vec<f64>>,
    #[serde(default)]
    pub refine: Option<bool>,
    #[serde(default)]
    pub refinement_tolerance: Option<f64>,
    /// Problems to certify; the scenario `problem` when absent.
    #[serde(default)]
    pub problems: Option<Vec<CertifyProblem>>,
}

impl CarlemanSection {
    pub fn config(&self, nodes_per_edge: usize) -> CertifyConfig {
        let d = CertifyConfig::default();
        CertifyConfig {
            s_grid: self.s_grid.clone().unwrap_or(d.s_grid),
            nodes_per_edge,
            n_time: self.n_time.unwrap_or(d.n_time),
            clip: self.clip.or(d.clip),
            proof_s: self.proof_s.clone().unwrap_or(d.proof_s),
            refine: self.refine.unwrap_or(d.refine),
            refinement_tolerance: self.refinement_tolerance.unwrap_or(d.refinement_tolerance),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardSection {
    #[serde(default = "default_n_time")]
    pub n_time: usize,
    #[serde(default)]
    pub observe_root: bool,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub min_abs_z: Option<f64>,
}

impl Default for ForwardSection {
    fn default() -> Self {
        Self { n_time: default_n_time(), observe_root: false, noise: 0.0, min_abs_z: None }
    }
}

fn default_n_time() -> usize {
    81
}

fn default_max_iter() -> usize {
    500
}

fn default_n_param() -> usize {
    1
}

fn default_bound() -> f64 {
    1.0
}

fn default_step() -> StepRule {
    StepRule::BarzilaiBorwein
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertSection {
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_n_param")]
    pub n_param: usize,
    #[serde(rename = "M", default = "default_bound")]
    pub bound: f64,
    /// Noise seed; the scenario seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_step")]
    pub step: StepRule,
    /// Parameters used to synthesize data when no observation file is given;
    /// also used to report the reconstruction error.
    #[serde(default)]
    pub truth: Option<Vec<f64>>,
    #[serde(default)]
    pub observations: Option<PathBuf>,
    #[serde(default)]
    pub prior: Option<Vec<f64>>,
}

fn default_pairs() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    #[serde(default = "default_pairs")]
    pub n_pairs: usize,
    #[serde(rename = "M", default = "default_bound")]
    pub bound: f64,
    #[serde(default = "default_n_param")]
    pub n_param: usize,
    #[serde(default)]
    pub observe_root: bool,
    #[serde(default)]
    pub min_abs_z: f64,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

fn default_retries() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub graph: GraphSource,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub weights: WeightSpec,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub problem: ProblemDocument,
    #[serde(default)]
    pub carleman: CarlemanSection,
    #[serde(default)]
    pub forward: ForwardSection,
    #[serde(default)]
    pub invert: Option<InvertSection>,
    #[serde(default)]
    pub stability: Option<StabilitySection>,
}

/// A parsed scenario together with its location and content hash.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub dir: PathBuf,
    pub sha256: String,
}

pub fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::NotFound(path.display().to_string()),
        _ => CliError::Io(format!("{}: {e}", path.display())),
    })
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = read_input(path)?;
    let sha256 = hex::encode(Sha256::digest(&bytes));
    let scenario: Scenario = serde_json::from_slice(&bytes).map_err(|e| CliError::Invalid(format!("scenario: {e}")))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { scenario, dir, sha256 })
}

impl Loaded {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.dir.join(path)
        }
    }

    pub fn graph(&self) -> Result<(TreeGraph, f64), CliError> {
        let doc = match &self.scenario.graph {
            GraphSource::Inline(doc) => doc.clone(),
            GraphSource::Path(p) => {
                let bytes = read_input(&self.resolve(p))?;
                let text = String::from_utf8(bytes).map_err(|e| CliError::Invalid(format!("graph: {e}")))?;
                GraphDocument::from_json(&text)?
            }
        };
        if !(doc.horizon > 0.0 && doc.horizon.is_finite()) {
            return Err(CliError::Invalid(format!("T must be positive, got {}", doc.horizon)));
        }
        Ok((doc.build()?, doc.horizon))
    }

    pub fn family(&self, tree: &TreeGraph, horizon: f64) -> Result<WeightFamily, CliError> {
        match &self.scenario.weights {
            WeightSpec::Explicit { polys } => {
                let doc = WeightDocument { horizon, polys: polys.clone() };
                Ok(doc.into_family(tree)?)
            }
            WeightSpec::Construct { root, margin } => {
                let root = match root {
                    Some(r) => EdgePoly::new(r.a.to_exact()?, r.b.to_exact()?, r.c.to_exact()?),
                    None => default_root_poly(),
                };
                let margin = match margin {
                    Some(m) => m.to_exact()?,
                    None => tree_carleman::weights::ratio(tree_carleman::weights::DEFAULT_MARGIN, 1),
                };
                Ok(construct_weights(tree, &root, &margin, horizon)?)
            }
        }
    }

    /// `--seed` wins over the scenario seed.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        flag.or(self.scenario.seed)
            .ok_or_else(|| CliError::Invalid("a seed is required (scenario \"seed\" or --seed)".into()))
    }
}
