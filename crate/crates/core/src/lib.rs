//! Coresets for subspace approximation, k-means and Bregman clustering.
//!
//! Every summary is a triple `(S, w, Δ)` whose cost `Σ w_i dist²(S_i, C) + Δ`
//! approximates the cost of the full input against every query shape `C`.

pub mod bregman;
pub mod cli;
pub mod clustering;
pub mod coreset;
pub mod dimred;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod queries;
pub mod sensitivity;
pub mod streaming;
pub mod subspace_coreset;

pub use coreset::Coreset;
pub use error::{Error, Result};
pub use exec::Exec;
pub use linalg::{CenterSet, PointSet, QueryShape, Subspace};
