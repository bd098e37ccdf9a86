use chrono::NaiveDate;
use thiserror::Error;

/// Failure while reading or validating snapshot inputs.
///
/// Every variant names the file it came from; row-level errors also carry
/// the 1-based data row and, where it applies, the offending column.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}: malformed header: {message}")]
    Header { file: String, message: String },

    #[error("{file}: row {row}{}: {message}", column.as_deref().map(|c| format!(", column '{c}'")).unwrap_or_default())]
    Row {
        file: String,
        row: usize,
        column: Option<String>,
        message: String,
    },

    #[error("{file}: {message}")]
    Table { file: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("snapshot has no usable regions{}", if excluded.is_empty() { String::new() } else { format!(" (excluded: {})", excluded.join(", ")) })]
    NoUsableRegions { excluded: Vec<String> },

    #[error("invalid manifest: {0}")]
    Manifest(String),
}

impl IngestError {
    pub(crate) fn row(file: &str, row: usize, column: Option<&str>, message: impl Into<String>) -> Self {
        IngestError::Row {
            file: file.to_string(),
            row,
            column: column.map(str::to_string),
            message: message.into(),
        }
    }

    pub(crate) fn header(file: &str, message: impl Into<String>) -> Self {
        IngestError::Header {
            file: file.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn table(file: &str, message: impl Into<String>) -> Self {
        IngestError::Table {
            file: file.to_string(),
            message: message.into(),
        }
    }
}

/// Failure of a risk computation over a loaded snapshot.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum RiskError {
    #[error("region not found: '{0}'")]
    UnknownRegion(String),

    #[error("insufficient case data for '{region}': need cumulative counts from {required_from} to {required_to}, available {available_from} to {available_to}")]
    InsufficientData {
        region: String,
        required_from: NaiveDate,
        required_to: NaiveDate,
        available_from: NaiveDate,
        available_to: NaiveDate,
    },

    #[error("series too short: need at least {needed} days, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("unknown mask '{name}'; valid masks: {}", valid.join("; "))]
    UnknownMask { name: String, valid: Vec<String> },

    #[error("unknown vaccine '{name}'; valid vaccines: {}", valid.join("; "))]
    UnknownVaccine { name: String, valid: Vec<String> },

    #[error("invalid date range: {from} is after {to}")]
    InvalidRange { from: NaiveDate, to: NaiveDate },

    #[error("no assessable days between {from} and {to}")]
    EmptyUsableRange { from: NaiveDate, to: NaiveDate },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input series")]
    EmptyInput,
}
