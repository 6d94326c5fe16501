// SPDX-License-Identifier: Apache-2.0

use std::io;

use flitelite_core::ipc::ErrorPayload;
use flitelite_core::{ErrorCode, IpcError, ProtocolViolation, WireError};

use crate::io::{FrameError, PreambleError};

#[derive(Debug, thiserror::Error)]
pub enum FlightError {
    #[error("connect to {addr} failed: {source}")]
    ConnectFailed { addr: String, source: io::Error },
    #[error("protocol violation: {0}")]
    Protocol(#[from] ProtocolViolation),
    #[error("bad preamble: {0}")]
    Preamble(#[from] PreambleError),
    #[error("server error {0}")]
    Server(ErrorPayload),
    #[error("frame error: {0}")]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Ipc(#[from] IpcError),
    #[error("endpoint schemas differ")]
    SchemaMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("assembling parts failed: {0}")]
    AssembleFailed(Box<FlightError>),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FlightError {
    /// Error code when the server answered with ERROR.
    pub fn server_code(&self) -> Option<ErrorCode> {
        match self {
            FlightError::Server(e) => Some(e.code),
            FlightError::AssembleFailed(inner) => inner.server_code(),
            _ => None,
        }
    }
}

pub type Result<T, E = FlightError> = std::result::Result<T, E>;
