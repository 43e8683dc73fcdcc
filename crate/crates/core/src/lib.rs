//! Nuclear-norm regularized matrix completion for full-rank matrices.
//!
//! The crate solves
//!
//! ```text
//! min_B  ½ Σ_{(i,j)∈Ω} (B_ij − A_ij)² + λ ‖B‖_*
//! ```
//!
//! for Ω drawn uniformly with replacement, and provides the machinery to
//! check relative recovery guarantees for the best rank-`r` approximation
//! `A_r`: tangent-space projections, coherence, closed-form bounds, and
//! seeded Monte-Carlo verification suites.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod sampling;
pub mod solver;
pub mod verify;

pub use bounds::{BoundInputs, BoundReport, CompetitorExtras, MeasuredErrors};
pub use error::{Error, Result};
pub use experiments::{ExperimentRecord, LambdaMode, PlantedInstance, PlantedSpec};
pub use geometry::{CoherenceProfile, TangentSpace};
pub use linalg::{DenseMatrix, FullSvd, Norms, TruncatedSvd};
pub use sampling::{ObservationSet, SampleMultiset};
pub use solver::{KktResidual, SolverConfig, SolverResult, StepSize};
pub use verify::{Suite, SuiteReport};
