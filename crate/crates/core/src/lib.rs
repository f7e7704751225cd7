//! Lossless table compression through discovered linear functions between
//! numeric columns.
//!
//! The pipeline ingests a CSV into exact scaled-integer columns
//! ([`table`]), fits sparse cluster-wise linear models per target column on a
//! row sample ([`driller`]), picks an acyclic subset worth storing
//! ([`optimizer`]), and writes a Parquet file in which each chosen target is
//! replaced by auxiliary columns ([`codec`], [`storage`]).

pub mod bench;
pub mod codec;
pub mod driller;
pub mod error;
pub mod optimizer;
pub mod pipeline;
pub mod regression;
pub mod storage;
pub mod synth;
pub mod table;

pub use codec::{Aggregate, AggregateResult, AggregateValue};
pub use driller::{DrillConfig, KRegressionCandidate, Lambda};
pub use error::{Error, Result};
pub use optimizer::FunctionPlan;
pub use pipeline::{CompressOptions, RunReport, VerifyReport};
pub use storage::{VirtualReader, WriteOptions};
pub use table::{IngestOptions, NullTokens, Table};
