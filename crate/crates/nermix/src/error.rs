//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by dataset validation, the samplers, and the reporting layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("EmptyData: no unit records supplied")]
    EmptyData,
    #[error("RaggedCovariates: record {row} has {found} covariates, expected {expected}")]
    RaggedCovariates {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("NonFiniteValue: {0}")]
    NonFiniteValue(String),
    #[error("NonPositiveValue: {0}")]
    NonPositiveValue(String),
    #[error("RankDeficientDesign: design matrix does not have full column rank {0}")]
    RankDeficientDesign(usize),
    #[error("TooFewAreas: found {found}, need at least {required}")]
    TooFewAreas { found: usize, required: usize },
    #[error("TooFewUnits: found {found}, need at least {required} (q + 3)")]
    TooFewUnits { found: usize, required: usize },
    #[error("AreaMismatch: {0}")]
    AreaMismatch(String),
    #[error("PopulationTooSmall: area {area_id} has N = {n_pop} < n_i = {n_sampled}")]
    PopulationTooSmall {
        area_id: String,
        n_pop: u64,
        n_sampled: usize,
    },
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("SingularPrecision: {0}")]
    SingularPrecision(String),
    #[error("DegenerateState: {0}")]
    DegenerateState(String),
    #[error("SliceFailure: {0}")]
    SliceFailure(String),
    #[error("VariantMismatch: {0}")]
    VariantMismatch(String),
    #[error("ZeroPosteriorVariance: {0}")]
    ZeroPosteriorVariance(String),
    #[error("SampleTooLarge: requested {requested} from area of size {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("NonPositiveTruth: {0}")]
    NonPositiveTruth(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("ChainFailure: chain {chain} at iteration {iteration}: {source}")]
    ChainFailure {
        chain: usize,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("ReplicateFailure: replicate {replicate}, method {method}: {source}")]
    ReplicateFailure {
        replicate: usize,
        method: String,
        #[source]
        source: Box<Error>,
    },
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
    #[error("Csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("Json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable reason code (the variant name).
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyData => "EmptyData",
            Error::RaggedCovariates { .. } => "RaggedCovariates",
            Error::NonFiniteValue(_) => "NonFiniteValue",
            Error::NonPositiveValue(_) => "NonPositiveValue",
            Error::RankDeficientDesign(_) => "RankDeficientDesign",
            Error::TooFewAreas { .. } => "TooFewAreas",
            Error::TooFewUnits { .. } => "TooFewUnits",
            Error::AreaMismatch(_) => "AreaMismatch",
            Error::PopulationTooSmall { .. } => "PopulationTooSmall",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::SingularPrecision(_) => "SingularPrecision",
            Error::DegenerateState(_) => "DegenerateState",
            Error::SliceFailure(_) => "SliceFailure",
            Error::VariantMismatch(_) => "VariantMismatch",
            Error::ZeroPosteriorVariance(_) => "ZeroPosteriorVariance",
            Error::SampleTooLarge { .. } => "SampleTooLarge",
            Error::NonPositiveTruth(_) => "NonPositiveTruth",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::ChainFailure { source, .. } => source.kind(),
            Error::ReplicateFailure { source, .. } => source.kind(),
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }

    /// True for errors raised while a sampler was running (as opposed to
    /// input/validation problems). The CLI maps these to exit code 3.
    pub fn is_sampler_failure(&self) -> bool {
        matches!(
            self,
            Error::SingularPrecision(_)
                | Error::DegenerateState(_)
                | Error::SliceFailure(_)
                | Error::ChainFailure { .. }
                | Error::ReplicateFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
