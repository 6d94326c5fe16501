// SPDX-License-Identifier: Apache-2.0

//! Pure building blocks for the flitelite transfer stack.
//!
//! Everything in this crate is `no_std` (it only needs `alloc`): the
//! columnar in-memory format, the framed binary codec for schemas and
//! record batches, the protocol payloads and message-sequence validator,
//! the SQL-subset query engine and the synthetic perf dataset generator.
//! Sockets, threads and files live in the `flitelite` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod columnar;
pub mod ipc;
pub mod perf;
pub mod query;
pub mod sample;
#[cfg(any(test, feature = "proptest"))]
pub mod testing;
pub mod wire;

pub use columnar::{
    Array, Buffer, ColumnarError, DataType, Dataset, Field, RecordBatch, Scalar, Schema, SchemaRef,
};
pub use ipc::{ErrorCode, ErrorPayload, IpcError, MessageType, WireMessage};
pub use wire::{
    Endpoint, FlightDescriptor, FlightInfo, Location, Peer, ProtocolViolation, PutResult,
    SequenceValidator, Ticket, WireError,
};
