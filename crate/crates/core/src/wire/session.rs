// SPDX-License-Identifier: Apache-2.0

//! Per-connection message-sequence validation.
//!
//! Legal sequences, per command (C = client, S = server):
//!
//! ```text
//! GetFlightInfo  C:GET_FLIGHT_INFO  S:(FLIGHT_INFO | ERROR)
//! DoGet          C:DO_GET           S:SCHEMA S:BATCH* S:EOS
//! DoPut          C:DO_PUT C:SCHEMA C:BATCH* C:EOS   S:(PUT_RESULT | ERROR)
//! ListFlights    C:LIST_FLIGHTS     S:FLIGHT_INFO* S:EOS
//! ```
//!
//! The server may answer ERROR at any point of a command; that ends the
//! connection. Payloads are decoded as part of validation, so a message
//! with the right type but an undecodable payload is also a violation.

use alloc::sync::Arc;

use crate::columnar::{RecordBatch, SchemaRef};
use crate::ipc::{decode_batch, decode_schema, ErrorPayload, MessageType, WireMessage};
use crate::wire::{FlightDescriptor, FlightInfo, Payload, PutResult, Ticket, WireError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Peer {
    Client,
    Server,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolViolation {
    #[error("{from:?} sent {found:?} while {state}")]
    Unexpected { from: Peer, found: MessageType, state: &'static str },
    #[error("bad {found:?} payload: {reason}")]
    BadPayload { found: MessageType, reason: WireError },
    #[error("session ended while {state}")]
    Incomplete { state: &'static str },
}

/// A validated message, decoded.
#[derive(Debug, Clone, PartialEq)]
pub enum Observed {
    GetFlightInfo(FlightDescriptor),
    DoGet(Ticket),
    DoPut(FlightDescriptor),
    ListFlights,
    FlightInfo(FlightInfo),
    Schema(SchemaRef),
    Batch(RecordBatch),
    Eos,
    PutResult(PutResult),
    Error(ErrorPayload),
}

#[derive(Debug, Clone)]
enum State {
    Idle,
    AwaitInfo,
    GetAwaitSchema,
    GetStreaming(SchemaRef),
    PutAwaitSchema,
    PutStreaming(SchemaRef),
    PutAwaitResult,
    Listing,
    Closed,
}

impl State {
    fn describe(&self) -> &'static str {
        match self {
            State::Idle => "idle",
            State::AwaitInfo => "awaiting flight info",
            State::GetAwaitSchema => "awaiting DoGet schema",
            State::GetStreaming(_) => "streaming DoGet batches",
            State::PutAwaitSchema => "awaiting DoPut schema",
            State::PutStreaming(_) => "streaming DoPut batches",
            State::PutAwaitResult => "awaiting put result",
            State::Listing => "listing flights",
            State::Closed => "closed",
        }
    }
}

/// Tracks one connection's message sequence. Both peers run one: the
/// server over what it receives and sends, the client over replies.
#[derive(Debug, Clone)]
pub struct SequenceValidator {
    state: State,
}

impl Default for SequenceValidator {
    fn default() -> Self {
        Self::new()
    }
}

fn payload<T: Payload>(m: &WireMessage) -> Result<T, ProtocolViolation> {
    T::decode(&m.payload).map_err(|reason| ProtocolViolation::BadPayload { found: m.msg_type, reason })
}

fn empty(m: &WireMessage) -> Result<(), ProtocolViolation> {
    if m.payload.is_empty() {
        Ok(())
    } else {
        Err(ProtocolViolation::BadPayload { found: m.msg_type, reason: WireError::Malformed("payload must be empty") })
    }
}

fn schema(m: &WireMessage) -> Result<SchemaRef, ProtocolViolation> {
    decode_schema(&m.payload)
        .map(Arc::new)
        .map_err(|e| ProtocolViolation::BadPayload { found: m.msg_type, reason: e.into() })
}

fn batch(m: &WireMessage, s: &SchemaRef) -> Result<RecordBatch, ProtocolViolation> {
    decode_batch(m, s).map_err(|e| ProtocolViolation::BadPayload { found: m.msg_type, reason: e.into() })
}

fn error(m: &WireMessage) -> Result<ErrorPayload, ProtocolViolation> {
    ErrorPayload::decode(&m.payload).map_err(|e| ProtocolViolation::BadPayload { found: m.msg_type, reason: e.into() })
}

impl SequenceValidator {
    pub fn new() -> Self {
        SequenceValidator { state: State::Idle }
    }

    /// True between commands (or after a clean ERROR close).
    pub fn is_idle(&self) -> bool {
        matches!(self.state, State::Idle | State::Closed)
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.state, State::Closed)
    }

    pub fn state(&self) -> &'static str {
        self.state.describe()
    }

    /// Validates the next message. Any violation closes the session.
    pub fn observe(&mut self, from: Peer, m: &WireMessage) -> Result<Observed, ProtocolViolation> {
        let r = self.step(from, m);
        if r.is_err() {
            self.state = State::Closed;
        }
        r
    }

    fn step(&mut self, from: Peer, m: &WireMessage) -> Result<Observed, ProtocolViolation> {
        use MessageType as T;
        use Peer::{Client, Server};

        let unexpected = |state: &State| ProtocolViolation::Unexpected {
            from,
            found: m.msg_type,
            state: state.describe(),
        };
        if from == Server && m.msg_type == T::Error && !matches!(self.state, State::Idle | State::Closed) {
            let e = error(m)?;
            self.state = State::Closed;
            return Ok(Observed::Error(e));
        }
        let (next, seen) = match (&self.state, from, m.msg_type) {
            (State::Idle, Client, T::GetFlightInfo) => (State::AwaitInfo, Observed::GetFlightInfo(payload(m)?)),
            (State::Idle, Client, T::DoGet) => (State::GetAwaitSchema, Observed::DoGet(payload(m)?)),
            (State::Idle, Client, T::DoPut) => (State::PutAwaitSchema, Observed::DoPut(payload(m)?)),
            (State::Idle, Client, T::ListFlights) => {
                empty(m)?;
                (State::Listing, Observed::ListFlights)
            }
            (State::AwaitInfo, Server, T::FlightInfo) => (State::Idle, Observed::FlightInfo(payload(m)?)),
            (State::GetAwaitSchema, Server, T::Schema) => {
                let s = schema(m)?;
                (State::GetStreaming(s.clone()), Observed::Schema(s))
            }
            (State::GetStreaming(s), Server, T::Batch) => {
                let b = batch(m, s)?;
                (State::GetStreaming(s.clone()), Observed::Batch(b))
            }
            (State::GetStreaming(_), Server, T::Eos) | (State::Listing, Server, T::Eos) => {
                empty(m)?;
                (State::Idle, Observed::Eos)
            }
            (State::PutAwaitSchema, Client, T::Schema) => {
                let s = schema(m)?;
                (State::PutStreaming(s.clone()), Observed::Schema(s))
            }
            (State::PutStreaming(s), Client, T::Batch) => {
                let b = batch(m, s)?;
                (State::PutStreaming(s.clone()), Observed::Batch(b))
            }
            (State::PutStreaming(_), Client, T::Eos) => {
                empty(m)?;
                (State::PutAwaitResult, Observed::Eos)
            }
            (State::PutAwaitResult, Server, T::PutResult) => (State::Idle, Observed::PutResult(payload(m)?)),
            (State::Listing, Server, T::FlightInfo) => (State::Listing, Observed::FlightInfo(payload(m)?)),
            (state, _, _) => return Err(unexpected(state)),
        };
        self.state = next;
        Ok(seen)
    }

    /// Checks that the session ended between commands.
    pub fn finish(&self) -> Result<(), ProtocolViolation> {
        if self.is_idle() {
            Ok(())
        } else {
            Err(ProtocolViolation::Incomplete { state: self.state.describe() })
        }
    }
}

/// Validates a whole recorded session.
pub fn validate_session<'a, I>(messages: I) -> Result<(), ProtocolViolation>
where
    I: IntoIterator<Item = &'a (Peer, WireMessage)>,
{
    let mut v = SequenceValidator::new();
    for (from, m) in messages {
        v.observe(*from, m)?;
    }
    v.finish()
}
