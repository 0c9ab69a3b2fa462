use std::io;
use std::path::PathBuf;

use sinco::codec::CodecError;
use sinco::imageio::ImageError;
use sinco::metrics::MetricError;
use sinco::nets::NetError;
use sinco::training::TrainError;
use thiserror::Error;

/// Process exit status for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Internal(String),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

fn net_code(e: &NetError) -> i32 {
    match e {
        NetError::UnknownArch(_) | NetError::Config(_) => exit::USAGE,
        NetError::Divisibility { .. } | NetError::UnknownTag(_) => exit::DATA,
        _ => exit::INTERNAL,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Data(_) | CliError::Image(_) => exit::DATA,
            CliError::Codec(e) => match e {
                CodecError::Budget(_) | CodecError::Infeasible { .. } | CodecError::HeaderRange { .. } => exit::USAGE,
                CodecError::Quantization { .. } => exit::INTERNAL,
                CodecError::Net(n) => net_code(n),
                _ => exit::DATA,
            },
            CliError::Train(e) => match e {
                TrainError::Config(_) => exit::USAGE,
                TrainError::EmptyDataset | TrainError::Image(_) => exit::DATA,
                TrainError::Net(n) => net_code(n),
                TrainError::Tensor(_) => exit::INTERNAL,
            },
            CliError::Net(e) => net_code(e),
            CliError::Metric(e) => match e {
                MetricError::Peak(_) => exit::USAGE,
                _ => exit::DATA,
            },
            CliError::Io { .. } | CliError::Internal(_) => exit::INTERNAL,
        }
    }
}

pub(crate) fn read_input(path: &std::path::Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub(crate) fn write_output(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    sinco::imageio::write_atomic(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
