use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("edge ids must be exactly 1..={expected}; offending id {id}")]
    EdgeId { id: usize, expected: usize },
    #[error("vertex id {vertex} on edge {edge} is outside 0..={max}")]
    VertexId { edge: usize, vertex: usize, max: usize },
    #[error("edge {edge} has nonpositive length {length}")]
    NonPositiveLength { edge: usize, length: f64 },
    #[error("cycle detected at vertex {vertex}")]
    Cycle { vertex: usize },
    #[error("graph is disconnected: vertex {vertex} is not reachable from the root")]
    Disconnected { vertex: usize },
    #[error("root vertex 0 must be a boundary vertex with one outgoing edge, found degree {degree}")]
    RootNotBoundary { degree: usize },
    #[error("unknown edge id {0}")]
    UnknownEdge(usize),
    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),

    #[error("root derivative condition violated: b = {b} must be positive")]
    RootDerivative { b: f64 },
    #[error("root curvature condition violated: a = {a} must be positive")]
    RootCurvature { a: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time {t} is outside the open window (-{horizon}, {horizon})")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("x = {x} is outside edge {edge} interval [{lo}, {hi}]")]
    OutsideEdge { edge: usize, x: f64, lo: f64, hi: f64 },
    #[error("unsupported derivative order (dx = {dx}, dt = {dt})")]
    UnsupportedOrder { dx: u8, dt: u8 },
    #[error("weight family has max psi = {max_psi} >= 0; decay at t -> +-T is not guaranteed")]
    DecayNotGuaranteed { max_psi: f64 },

    #[error("grid too coarse on edge {edge}: {nodes} nodes, need at least {required}")]
    GridTooCoarse { edge: usize, nodes: usize, required: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("discrete system is singular ({0})")]
    Singular(String),
    #[error("discrete system is near-singular: condition estimate {cond:.3e} exceeds {threshold:.1e}")]
    NearSingular { cond: f64, threshold: f64 },
    #[error("time stepping unstable at t = {t}: deviation {deviation:.3e}")]
    Unstable { t: f64, deviation: f64 },

    #[error("tail bound violated for s = {s}: integrand bound {bound:.3e} at the window edge exceeds {limit:.1e}")]
    TailBound { s: f64, bound: f64, limit: f64 },
    #[error("empty sweep")]
    EmptySweep,

    #[error("initial data violates |z| >= r: min |z| = {min_abs:.3e}, r = {r:.3e}")]
    InitialDataBound { min_abs: f64, r: f64 },
    #[error("initial data is neither real nor purely imaginary (max mixed part {mixed:.3e})")]
    InitialDataPhase { mixed: f64 },
    #[error("initial identities not applicable: the two solutions differ at t = 0 by {gap:.3e}")]
    IdentityNotApplicable { gap: f64 },
    #[error("potential exceeds bound M = {bound}: found {value}")]
    PotentialBound { value: f64, bound: f64 },
    #[error("reconstruction stalled after {iterations} iterations: backtracking exhausted")]
    ReconstructionStalled { iterations: usize, last: Box<crate::inverse::PotentialEstimate> },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
