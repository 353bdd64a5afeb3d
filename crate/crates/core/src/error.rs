use thiserror::Error;

use crate::classifiers::ClassifierError;
use crate::dataset::DatasetError;
use crate::evaluation::EvalError;
use crate::imputation::ImputeError;
use crate::numerics::NumericsError;
use crate::selection::SelectionError;

/// Any pipeline error, tagged by the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    pub fn module(&self) -> &'static str {
        match self {
            Error::Numerics(_) => "numerics",
            Error::Dataset(_) => "dataset",
            Error::Impute(_) => "imputation",
            Error::Selection(_) => "selection",
            Error::Classifier(_) => "classifiers",
            Error::Eval(EvalError::Stage { source, .. }) => source.module(),
            Error::Eval(_) => "evaluation",
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Numerics(e) => e.kind(),
            Error::Dataset(e) => e.kind(),
            Error::Impute(e) => e.kind(),
            Error::Selection(e) => e.kind(),
            Error::Classifier(e) => e.kind(),
            Error::Eval(EvalError::Stage { source, .. }) => source.kind(),
            Error::Eval(e) => e.kind(),
        }
    }
}
