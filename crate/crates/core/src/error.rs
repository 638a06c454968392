//! Crate-wide error type.

use thiserror::Error;

/// Every fallible operation in this crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    // --- ingest ---
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("missing column {column} in {path}")]
    MissingColumn { path: String, column: String },
    #[error("non-numeric value {value:?} for subject {subject} at t={t}")]
    NonNumericValue {
        subject: String,
        t: String,
        value: String,
    },
    #[error("duplicate observation for subject {subject} at t={t}")]
    DuplicateObservation { subject: String, t: usize },
    #[error("ragged series for subject {subject}: missing t={t}")]
    RaggedSeries { subject: String, t: usize },
    #[error("no subjects")]
    NoSubjects,
    #[error("unmatched subject {subject} in {path}")]
    UnmatchedSubject { subject: String, path: String },
    #[error("risk score {score} for subject {subject} (model {model}) outside [0,1]")]
    RiskScoreOutOfRange {
        model: String,
        subject: String,
        score: f64,
    },
    #[error("panel failed validation:\n{report}")]
    PanelInvalid { report: String },
    #[error("label for subject {subject} must be 0 or 1, got {value:?}")]
    BadLabel { subject: String, value: String },

    // --- effort ---
    #[error("empty series")]
    EmptySeries,
    #[error("series too short: need at least 3 time steps, got {len}")]
    SeriesTooShort { len: usize },
    #[error("no inertia entry for group {group:?} and no fallback configured")]
    UnknownInertiaGroup { group: String },
    #[error("inertia value {value} for group {group:?} outside (0,1]")]
    InertiaOutOfRange { group: String, value: f64 },
    #[error("inertia table is empty")]
    EmptyInertiaTable,
    #[error("inertia table maximum is {max}; the table must be scaled so its maximum is 1")]
    UnscaledInertiaTable { max: f64 },

    // --- eaif ---
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("aggregate feature requires non-negative values, got {0}")]
    NegativeAggregateInput(f64),
    #[error("distance weights must be non-negative and not both zero")]
    BadWeights,
    #[error("distance input {name}={value} outside [0,1]")]
    DistanceOutOfRange { name: &'static str, value: f64 },
    #[error("need at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("missing score for {subject} (model {model})")]
    MissingScore { model: String, subject: String },

    // --- eagf ---
    #[error("bin width must be in (0,1], got {0}")]
    BadBinWidth(f64),
    #[error("min group size must be >= 1")]
    BadMinGroupSize,
    #[error("effort {0} outside (0,1]")]
    EffortOutOfRange(f64),
    #[error("attribute {0:?} not present in panel demographics")]
    UnknownAttribute(String),
    #[error("insufficient groups: need >= 2 groups with enough members, found {found}")]
    InsufficientGroups { found: usize },
    #[error("all qualifying group means are zero; parity undefined")]
    ZeroMeanParity,

    // --- predictors ---
    #[error("dataset and labels misaligned: {rows} rows vs {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("single-class data: logistic regression needs both classes present")]
    SingleClass,
    #[error("feature arity mismatch: model has {expected}, row has {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("need at least {k} rows for {k}-fold scoring, got {rows}")]
    TooFewRows { rows: usize, k: usize },
    #[error("k must be >= 2, got {0}")]
    BadFoldCount(usize),
    #[error("empty input")]
    EmptyInput,
    #[error("percentile must be in [0,100], got {0}")]
    BadPercentile(f64),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },

    // --- stats ---
    #[error("series length mismatch: {0} vs {1}")]
    SeriesLengthMismatch(usize, usize),
    #[error("zero variance in ranks; correlation undefined")]
    ZeroRankVariance,
    #[error("correlation {0} out of open interval (-1,1)")]
    CorrelationOutOfRange(f64),
    #[error("correlation triple is not positive semidefinite (determinant {det})")]
    BadCorrelationTriple { det: f64 },
    #[error("sample size {0} too small; need n >= {1}")]
    SampleTooSmall(usize, usize),
    #[error("bootstrap needs B >= 100, got {0}")]
    TooFewResamples(usize),
    #[error("bootstrap aborted: {failures} degenerate resamples exceeded the retry budget")]
    DegenerateBootstrap { failures: usize },
    #[error("design matrix must have more rows than columns: {rows} x {cols}")]
    UnderdeterminedSystem { rows: usize, cols: usize },
    #[error("design matrix is rank deficient at column {col}")]
    RankDeficient { col: usize },
    #[error("restricted covariance block is singular")]
    SingularCovariance,
    #[error("perfect fit, test undefined")]
    WaldUndefined,
    #[error("p-value {0} outside [0,1]")]
    BadPValue(f64),
    #[error("correction count m={m} is less than the number of tests {tests}")]
    BadCorrectionCount { m: usize, tests: usize },
    #[error("prediction vector for participant {participant} sums to {sum}, expected 1")]
    PredictionNotNormalized { participant: String, sum: f64 },
    #[error("participant {participant} chose answer {answer}, but there are only {choices} choices")]
    AnswerOutOfRange {
        participant: String,
        answer: usize,
        choices: usize,
    },
    #[error("need at least 2 participants and 2 choices, got {participants} and {choices}")]
    TooFewResponses { participants: usize, choices: usize },

    // --- synth ---
    #[error("invalid synthesis config: {0}")]
    BadSynthConfig(String),
    #[error("unknown group {group:?} for attribute {attribute:?}")]
    UnknownGroup { attribute: String, group: String },

    // --- report ---
    // The inner error is folded into Display rather than exposed as a
    // source, so error-chain printers show the message once.
    #[error("{stage}: {inner}")]
    Stage { stage: &'static str, inner: Box<Error> },
}

impl Error {
    /// Tag an error with the pipeline stage it surfaced in.
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            inner: Box::new(self),
        }
    }

    /// True when the error is an input-validation failure (CLI exit code 2).
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Stage { inner, .. } => inner.is_validation(),
            Error::MissingColumn { .. }
            | Error::NonNumericValue { .. }
            | Error::DuplicateObservation { .. }
            | Error::RaggedSeries { .. }
            | Error::NoSubjects
            | Error::UnmatchedSubject { .. }
            | Error::RiskScoreOutOfRange { .. }
            | Error::PanelInvalid { .. }
            | Error::BadLabel { .. } => true,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
