use alloc::string::String;

/// Errors raised by the core crate.
///
/// Contract violations (bad indices, empty batches, inconsistent episodes) are
/// reported as errors rather than panics so the CLI can map them to exit codes.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("empty batch: {0}")]
    EmptyBatch(&'static str),
    #[error("inconsistent episode: {0}")]
    InconsistentEpisode(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("instance too large to enumerate: {policies} policies exceed limit {limit}")]
    TooLarge { policies: u128, limit: u128 },
    #[error("invalid configuration: {key}: {reason}")]
    Config { key: &'static str, reason: String },
    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index < limit {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, limit })
    }
}
