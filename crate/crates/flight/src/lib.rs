// SPDX-License-Identifier: Apache-2.0

//! Blocking TCP transport for `flitelite-core`: server, client, benchmark
//! harness and golden-file generator.

pub mod bench;
pub mod client;
pub mod dump;
pub mod error;
pub mod io;
pub mod server;

pub use client::{Client, Reassembly, StreamStats, TransferStats};
pub use error::{FlightError, Result};
pub use server::{CommandRecord, Server, ServerConfig, ServerHandle, Store};
