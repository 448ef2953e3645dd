//! Both sides of the Carleman estimate, the vertex terms of its proof, and
//! empirical constants.

pub mod certify;
pub mod functionals;
pub mod proof_terms;
pub mod sweep;

pub use certify::{carleman_certify, Certificate, CertifyConfig, CertifyProblem, Check};
pub use functionals::{
    auto_clip, boundary_term_b, lhs_functional, rhs_data_functional, BoundaryForm, CarlemanInputs, TimeWindow,
    TAIL_LIMIT,
};
pub use proof_terms::{d_terms, transform_w, untransform_w, ProofTermTable, VertexTerms, TOLERANCE_FACTOR};
pub use sweep::{empirical_s0, evaluate_row, ratio_sweep, CarlemanReport, SweepRow, DENOMINATOR_FLOOR, S0_SLACK};
