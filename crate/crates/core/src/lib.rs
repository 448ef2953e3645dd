//! Carleman weights, Schrödinger solvers and inverse-potential experiments on
//! rooted metric trees.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod carleman;
pub mod error;
pub mod inverse;
pub mod par;
pub mod solver;
pub mod tree;
pub mod weights;

pub use error::{Error, Result};
pub use tree::{build_tree, GraphDocument, TreeGraph};
pub use weights::{construct_weights, validate_conditions, WeightFamily};
