//! Missing-data classification pipeline.
//!
//! Ingest a table with missing cells, impute it (mean, k-nearest-neighbour
//! or EM under a multivariate normal), select features with a two-sample
//! t-test, train one of four binary classifiers, and evaluate the whole
//! chain with stratified k-fold cross-validation.

// index loops read closer to the formulas in the numeric kernels; the
// negated comparisons are deliberate so NaN takes the error branch
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod classifiers;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod imputation;
pub mod io;
pub mod numerics;
pub mod selection;

pub use error::Error;
