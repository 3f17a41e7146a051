//! Parisi free energy of mixed p-spin models as the Hopf-Lax solution of a
//! Hamilton-Jacobi equation over measures on the half-line, with independent
//! oracles: a Parisi PDE solver, the cascade recursion, the classical Parisi
//! functional and finite-N enumeration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod finite_n;
pub mod hopflax;
pub mod initial_condition;
pub mod measures;
pub mod mixture;
pub mod quadrature;

pub use error::{Error, Result};
pub use finite_n::{CascadeSample, DisorderSample, MeanEstimate};
pub use hopflax::{HopfLaxProblem, HopfLaxResult, SolveOptions};
pub use initial_condition::{FieldGrid, PdeScheme, PsiEvaluator, PsiKind, SingleSiteLaw};
pub use measures::{CommonRefinement, DiscreteMeasure, Interpolation, MeasureCDF};
pub use mixture::MixtureSpec;
