use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report. Variant names are the stable
/// identifiers surfaced by the command-line tool.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("CycleDetected: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("UnknownParent: `{parent}` listed as parent of `{child}` is not a declared variable")]
    UnknownParent { child: String, parent: String },
    #[error("DuplicateVariable: `{0}`")]
    DuplicateVariable(String),
    #[error("DuplicateState: variable `{variable}` declares `{state}` twice")]
    DuplicateState { variable: String, state: String },
    #[error("TooFewStates: variable `{0}` needs at least two states")]
    TooFewStates(String),
    #[error("SelfLoop: `{0}` cannot be its own parent")]
    SelfLoop(String),
    #[error("UnknownVariable: `{0}`")]
    UnknownVariable(String),
    #[error("UnknownState: `{state}` is not a state of `{variable}`{}", location_suffix(*.row, *.column))]
    UnknownState {
        variable: String,
        state: String,
        row: Option<usize>,
        column: Option<usize>,
    },
    #[error("MissingParentValue: parent `{parent}` of `{variable}` is missing")]
    MissingParentValue { variable: String, parent: String },
    #[error("MissingValue: no value for `{0}`")]
    MissingValue(String),
    #[error("IncompleteData: the data set has missing entries; use EM or Gibbs sampling")]
    IncompleteData,
    #[error("SchemaMismatch: {0}")]
    SchemaMismatch(String),
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("InvalidIndex: {0}")]
    InvalidIndex(String),
    #[error("InvalidParameters: {0}")]
    InvalidParameters(String),
    #[error("NonPositiveAlpha: hyperparameter {0} is not strictly positive")]
    NonPositiveAlpha(f64),
    #[error("ZeroPriorProbability: {0}")]
    ZeroPriorProbability(String),
    #[error("ZeroEvidenceProbability: the evidence has probability zero")]
    ZeroEvidenceProbability,
    #[error("OverlapTargetEvidence: `{0}` is both a target and observed")]
    OverlapTargetEvidence(String),
    #[error("ConstraintViolation: {0}")]
    ConstraintViolation(String),
    #[error("EmptyDataset: at least one case is required")]
    EmptyDataset,
    #[error("VariableSetMismatch: the structures are over different variables")]
    VariableSetMismatch,
    #[error("TooLarge: {0}")]
    TooLarge(String),
    #[error("EmptyModelSet: model averaging needs at least one structure")]
    EmptyModelSet,
    #[error("ZeroFamilyMass: {0}")]
    ZeroFamilyMass(String),
    #[error("ZeroCompletionProbability: {0}")]
    ZeroCompletionProbability(String),
    #[error("InvalidSchedule: {0}")]
    InvalidSchedule(String),
    #[error("LengthMismatch: expected {expected} counts, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("NegativeCount: entry {index} is {value}")]
    NegativeCount { index: usize, value: i64 },
    #[error("ParseError: {message}{}", location_suffix(*.line, *.column))]
    ParseError {
        message: String,
        line: Option<usize>,
        column: Option<usize>,
    },
    #[error("InvariantViolation: {0}")]
    InvariantViolation(Box<Error>),
    #[error("Io: {0}")]
    Io(String),
}

fn location_suffix(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!(" (line {l}, column {c})"),
        (Some(l), None) => format!(" (line {l})"),
        (None, Some(c)) => format!(" (column {c})"),
        (None, None) => String::new(),
    }
}

impl Error {
    /// The bare variant identifier, e.g. `CycleDetected`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::CycleDetected(_) => "CycleDetected",
            Error::UnknownParent { .. } => "UnknownParent",
            Error::DuplicateVariable(_) => "DuplicateVariable",
            Error::DuplicateState { .. } => "DuplicateState",
            Error::TooFewStates(_) => "TooFewStates",
            Error::SelfLoop(_) => "SelfLoop",
            Error::UnknownVariable(_) => "UnknownVariable",
            Error::UnknownState { .. } => "UnknownState",
            Error::MissingParentValue { .. } => "MissingParentValue",
            Error::MissingValue(_) => "MissingValue",
            Error::IncompleteData => "IncompleteData",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::InvalidIndex(_) => "InvalidIndex",
            Error::InvalidParameters(_) => "InvalidParameters",
            Error::NonPositiveAlpha(_) => "NonPositiveAlpha",
            Error::ZeroPriorProbability(_) => "ZeroPriorProbability",
            Error::ZeroEvidenceProbability => "ZeroEvidenceProbability",
            Error::OverlapTargetEvidence(_) => "OverlapTargetEvidence",
            Error::ConstraintViolation(_) => "ConstraintViolation",
            Error::EmptyDataset => "EmptyDataset",
            Error::VariableSetMismatch => "VariableSetMismatch",
            Error::TooLarge(_) => "TooLarge",
            Error::EmptyModelSet => "EmptyModelSet",
            Error::ZeroFamilyMass(_) => "ZeroFamilyMass",
            Error::ZeroCompletionProbability(_) => "ZeroCompletionProbability",
            Error::InvalidSchedule(_) => "InvalidSchedule",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::NegativeCount { .. } => "NegativeCount",
            Error::ParseError { .. } => "ParseError",
            Error::InvariantViolation(_) => "InvariantViolation",
            Error::Io(_) => "Io",
        }
    }
}
