use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("MalformedRecord: {0}")]
    MalformedRecord(String),
    #[error("VersionMismatch: unsupported format version {found:?}")]
    VersionMismatch { found: String },
    #[error("RangeOverflow: {0}")]
    RangeOverflow(String),
    #[error("BinRangeTooSmall: {num_bins} bins x {bin_width_us} us do not cover {needed_us} us")]
    BinRangeTooSmall {
        num_bins: usize,
        bin_width_us: u64,
        needed_us: u64,
    },
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("MaskLengthMismatch: mask has {found} bins, input has {expected}")]
    MaskLengthMismatch { expected: usize, found: usize },
    #[error("EmptyDataset")]
    EmptyDataset,
    #[error("EmptyGrid")]
    EmptyGrid,
    #[error("MissingFilterParams: threat model {0} requires filter parameters")]
    MissingFilterParams(char),
    #[error("UnexpectedFilterParams: threat model {0} takes no filter parameters")]
    UnexpectedFilterParams(char),
    #[error("InvalidParameter: {0}")]
    InvalidParameter(String),
    #[error("Checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by the content of input data rather than by
    /// configuration or by the computation itself.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedRecord(_)
                | Error::VersionMismatch { .. }
                | Error::RangeOverflow(_)
                | Error::Checkpoint(_)
                | Error::ShapeMismatch(_)
                | Error::EmptyDataset
                | Error::Io(_)
        )
    }

    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::MissingFilterParams(_)
                | Error::UnexpectedFilterParams(_)
                | Error::EmptyGrid
                | Error::MaskLengthMismatch { .. }
                | Error::BinRangeTooSmall { .. }
        )
    }
}
