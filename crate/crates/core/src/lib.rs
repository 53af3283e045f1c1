//! RBF SVM hyperparameter search: an SMO solver, the cross-validated response surface over
//! (log2 C, log2 gamma), eighteen searcher families and the post-search selection rules.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`,
//! with `f32` variants for memory-bound use.

// `!(x > 0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dataset;
pub mod error;
pub mod scalar;
pub mod search;
pub mod selection;
pub mod surface;
pub mod svm;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use search::{run_on_data, run_on_surface, Algorithm, Family, OptimizerConfig, SearchRun};
pub use selection::SelectionRule;

pub type Dataset = dataset::Dataset<f64>;
pub type HyperPoint = surface::HyperPoint<f64>;
pub type SearchBox = surface::SearchBox<f64>;
pub type TieSet = selection::TieSet<f64>;
pub type Evaluation = surface::Evaluation<f64>;
pub type CvSurface = surface::CvSurface<f64>;
pub type SvmModel = svm::SvmModel<f64>;
pub type KernelSpec = svm::KernelSpec<f64>;

pub type Dataset32 = dataset::Dataset<f32>;
pub type HyperPoint32 = surface::HyperPoint<f32>;
pub type TieSet32 = selection::TieSet<f32>;
pub type SvmModel32 = svm::SvmModel<f32>;
