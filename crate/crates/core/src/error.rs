use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single parameter-level validation failure, surfaced to clients as a tooltip.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParamError {
    pub param: String,
    pub message: String,
}

impl ParamError {
    pub fn new(param: impl Into<String>, message: impl Into<String>) -> Self {
        ParamError {
            param: param.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    MalformedXml {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("XES schema violation at line {line}, column {column}: {message}")]
    SchemaViolation {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("malformed abstraction: {0}")]
    MalformedAbstraction(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("no mapping for value `{0}`")]
    UnknownValue(String),

    #[error("type mismatch on `{attribute}`: {message}")]
    TypeMismatch { attribute: String, message: String },

    #[error("invalid operation: {0}")]
    InvalidOperation(String),

    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),

    #[error("invalid key: {0}")]
    InvalidKey(String),

    #[error("pseudonym collision: `{first}` and `{second}` map to the same token")]
    PseudonymCollision { first: String, second: String },

    #[error("decryption failed for value on `{0}`")]
    Decryption(String),

    #[error("activity `{0}` clashes with a reserved marker")]
    ReservedSymbolClash(String),

    #[error("token `{0}` matches no dictionary label")]
    UnresolvedToken(String),

    #[error("enforcement suppressed every event; parameters are too strict")]
    EmptyResult,

    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("variant contains activity `{0}` absent from the original log")]
    UnknownVariantSymbol(String),

    #[error("no event carries a resource")]
    NoResources,

    #[error("content does not parse as {kind}: {message}")]
    ParseFailure { kind: String, message: String },

    #[error("unknown technique `{0}`")]
    UnknownTechnique(String),

    #[error("unknown entry `{0}`")]
    UnknownEntry(String),

    #[error("unknown job `{0}`")]
    UnknownJob(String),

    #[error("parameter validation failed: {}", format_param_errors(.0))]
    ParameterValidation(Vec<ParamError>),

    #[error(transparent)]
    Io(#[from] io::Error),
}

fn format_param_errors(errors: &[ParamError]) -> String {
    errors
        .iter()
        .map(|e| format!("{}: {}", e.param, e.message))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn type_mismatch(attribute: &str, message: impl Into<String>) -> Self {
        Error::TypeMismatch {
            attribute: attribute.to_owned(),
            message: message.into(),
        }
    }

    /// Stable machine-readable name for the error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedXml { .. } => "malformed_xml",
            Error::SchemaViolation { .. } => "schema_violation",
            Error::MalformedAbstraction(_) => "malformed_abstraction",
            Error::UnknownAttribute(_) => "unknown_attribute",
            Error::UnknownValue(_) => "unknown_value",
            Error::TypeMismatch { .. } => "type_mismatch",
            Error::InvalidOperation(_) => "invalid_operation",
            Error::InvalidTaxonomy(_) => "invalid_taxonomy",
            Error::InvalidKey(_) => "invalid_key",
            Error::PseudonymCollision { .. } => "pseudonym_collision",
            Error::Decryption(_) => "decryption",
            Error::ReservedSymbolClash(_) => "reserved_symbol_clash",
            Error::UnresolvedToken(_) => "unresolved_token",
            Error::EmptyResult => "empty_result",
            Error::InvalidEpsilon(_) => "invalid_epsilon",
            Error::UnknownVariantSymbol(_) => "unknown_variant_symbol",
            Error::NoResources => "no_resources",
            Error::ParseFailure { .. } => "parse_failure",
            Error::UnknownTechnique(_) => "unknown_technique",
            Error::UnknownEntry(_) => "unknown_entry",
            Error::UnknownJob(_) => "unknown_job",
            Error::ParameterValidation(_) => "parameter_validation",
            Error::Io(_) => "io",
        }
    }
}
