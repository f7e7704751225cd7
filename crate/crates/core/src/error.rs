use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("no usable sample rows for target `{0}`")]
    NoUsableRows(String),
    #[error("missing reference column `{0}`")]
    MissingReference(String),
    #[error("corrupt auxiliary data for `{column}`: {reason}")]
    CorruptAux { column: String, reason: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("plan does not match table: {0}")]
    PlanMismatch(String),
    #[error("invalid virtual metadata: {0}")]
    Metadata(String),
    #[error("unsupported aggregate {agg} on column `{column}`")]
    UnsupportedAggregate { column: String, agg: String },
    #[error("parquet error: {0}")]
    Parquet(#[from] parquet::errors::ParquetError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.kind() {
            csv::ErrorKind::Io(_) => match err.into_kind() {
                csv::ErrorKind::Io(e) => Error::Io(e),
                _ => unreachable!(),
            },
            csv::ErrorKind::UnequalLengths {
                pos,
                expected_len,
                len,
            } => Error::Format(format!(
                "ragged row{}: expected {expected_len} fields, found {len}",
                pos.as_ref()
                    .map(|p| format!(" at line {}", p.line()))
                    .unwrap_or_default()
            )),
            _ => Error::Format(err.to_string()),
        }
    }
}
