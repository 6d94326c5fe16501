// SPDX-License-Identifier: Apache-2.0

//! Protocol payloads and the legal message sequences for each command.
//!
//! ```text
//! descriptor  u8 kind; kind 0: u16 segment_count, per segment u16 len + utf8
//!                      kind 1: u32 len + bytes
//! ticket      u32 len + bytes
//! flight info u32 schema_len + schema | i64 total_records | i64 total_bytes |
//!             u16 endpoint_count | per endpoint: ticket, u16 location_count,
//!             per location u16 len + utf8 uri
//! put result  u64 records_received | u64 bytes_received
//! ```

mod session;

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use session::{validate_session, Observed, Peer, ProtocolViolation, SequenceValidator};

use crate::columnar::Schema;
use crate::ipc::{decode_schema, encode_schema, IpcError, MessageType, Reader, WireMessage};

/// Sent by the client on connect and echoed by the server.
pub const PREAMBLE: [u8; 5] = *b"FLTL\x01";
pub const LOCATION_SCHEME: &str = "fltl://";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("malformed payload: {0}")]
    Malformed(&'static str),
    #[error("invalid value: {0}")]
    Invalid(&'static str),
}

impl From<IpcError> for WireError {
    fn from(e: IpcError) -> Self {
        match e {
            IpcError::Malformed(why) => WireError::Malformed(why),
            _ => WireError::Malformed("invalid embedded schema"),
        }
    }
}

/// Encode/decode pair for a protocol payload. Decoding is exact: trailing
/// bytes are rejected.
pub trait Payload: Sized {
    fn encode(&self) -> Result<Vec<u8>, WireError>;
    fn decode(bytes: &[u8]) -> Result<Self, WireError>;

    fn to_message(&self, t: MessageType) -> Result<WireMessage, WireError> {
        Ok(WireMessage::new(t, self.encode()?))
    }
}

fn put_u16_str(out: &mut Vec<u8>, s: &str) -> Result<(), WireError> {
    let n = u16::try_from(s.len()).map_err(|_| WireError::Invalid("string longer than 65535 bytes"))?;
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn get_u16_str<'a>(r: &mut Reader<'a>) -> Result<&'a str, WireError> {
    let n = r.u16()? as usize;
    core::str::from_utf8(r.take(n)?).map_err(|_| WireError::Malformed("invalid utf8"))
}

/// Names a dataset (path) or a request the server interprets (command).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FlightDescriptor {
    Path(Vec<String>),
    Cmd(Vec<u8>),
}

impl FlightDescriptor {
    pub fn path<I, S>(segments: I) -> Result<Self, WireError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let d = FlightDescriptor::Path(segments.into_iter().map(Into::into).collect());
        d.validate()?;
        Ok(d)
    }

    pub fn cmd(bytes: impl Into<Vec<u8>>) -> Result<Self, WireError> {
        let d = FlightDescriptor::Cmd(bytes.into());
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), WireError> {
        match self {
            FlightDescriptor::Path(p) if p.is_empty() => Err(WireError::Invalid("empty path")),
            FlightDescriptor::Path(p) if p.iter().any(String::is_empty) => {
                Err(WireError::Invalid("empty path segment"))
            }
            FlightDescriptor::Cmd(c) if c.is_empty() => Err(WireError::Invalid("empty command")),
            _ => Ok(()),
        }
    }
}

impl Payload for FlightDescriptor {
    fn encode(&self) -> Result<Vec<u8>, WireError> {
        self.validate()?;
        let mut out = Vec::new();
        match self {
            FlightDescriptor::Path(segments) => {
                let n = u16::try_from(segments.len()).map_err(|_| WireError::Invalid("too many segments"))?;
                out.push(0);
                out.extend_from_slice(&n.to_le_bytes());
                for s in segments {
                    put_u16_str(&mut out, s)?;
                }
            }
            FlightDescriptor::Cmd(cmd) => {
                let n = u32::try_from(cmd.len()).map_err(|_| WireError::Invalid("command too long"))?;
                out.push(1);
                out.extend_from_slice(&n.to_le_bytes());
                out.extend_from_slice(cmd);
            }
        }
        Ok(out)
    }

    fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let d = match r.u8()? {
            0 => {
                let n = r.u16()?;
                let segments = (0..n).map(|_| get_u16_str(&mut r).map(Into::into)).collect::<Result<_, _>>()?;
                FlightDescriptor::Path(segments)
            }
            1 => {
                let n = r.u32()? as usize;
                FlightDescriptor::Cmd(r.take(n)?.to_vec())
            }
            _ => return Err(WireError::Malformed("unknown descriptor kind")),
        };
        r.finish()?;
        d.validate().map_err(|_| WireError::Malformed("descriptor violates invariants"))?;
        Ok(d)
    }
}

impl fmt::Display for FlightDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlightDescriptor::Path(p) => write!(f, "path:{}", p.join("/")),
            FlightDescriptor::Cmd(c) => write!(f, "cmd:{}", String::from_utf8_lossy(c)),
        }
    }
}

/// Server-issued token for one stream. Clients never look inside.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ticket(Vec<u8>);

impl Ticket {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Result<Self, WireError> {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Err(WireError::Invalid("empty ticket"));
        }
        Ok(Ticket(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    fn write(&self, out: &mut Vec<u8>) -> Result<(), WireError> {
        let n = u32::try_from(self.0.len()).map_err(|_| WireError::Invalid("ticket too long"))?;
        out.extend_from_slice(&n.to_le_bytes());
        out.extend_from_slice(&self.0);
        Ok(())
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let n = r.u32()? as usize;
        Ticket::new(r.take(n)?.to_vec()).map_err(|_| WireError::Malformed("empty ticket"))
    }
}

impl Payload for Ticket {
    fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(4 + self.0.len());
        self.write(&mut out)?;
        Ok(out)
    }

    fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let t = Ticket::read(&mut r)?;
        r.finish()?;
        Ok(t)
    }
}

impl fmt::Display for Ticket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.0))
    }
}

/// `fltl://host:port`
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Location {
    uri: String,
    host_len: usize,
    port: u16,
}

impl Location {
    pub fn new(host: &str, port: u16) -> Result<Self, WireError> {
        Location::parse(&alloc::format!("{LOCATION_SCHEME}{host}:{port}"))
    }

    pub fn parse(uri: &str) -> Result<Self, WireError> {
        let rest = uri.strip_prefix(LOCATION_SCHEME).ok_or(WireError::Invalid("location scheme"))?;
        let (host, port) = rest.rsplit_once(':').ok_or(WireError::Invalid("location port"))?;
        let port: u16 = port.parse().map_err(|_| WireError::Invalid("location port"))?;
        if host.is_empty() || host.contains('/') {
            return Err(WireError::Invalid("location host"));
        }
        Ok(Location { uri: uri.to_string(), host_len: host.len(), port })
    }

    pub fn as_str(&self) -> &str {
        &self.uri
    }

    pub fn host(&self) -> &str {
        let start = LOCATION_SCHEME.len();
        &self.uri[start..start + self.host_len]
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    /// `host:port`, suitable for a socket connect.
    pub fn authority(&self) -> &str {
        &self.uri[LOCATION_SCHEME.len()..]
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.uri)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    ticket: Ticket,
    locations: Vec<Location>,
}

impl Endpoint {
    pub fn new(ticket: Ticket, locations: Vec<Location>) -> Result<Self, WireError> {
        if locations.is_empty() {
            return Err(WireError::Invalid("endpoint without locations"));
        }
        Ok(Endpoint { ticket, locations })
    }

    pub fn ticket(&self) -> &Ticket {
        &self.ticket
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }
}

/// Reply to GetFlightInfo: schema, endpoints and totals (-1 when unknown).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlightInfo {
    schema_bytes: Vec<u8>,
    endpoints: Vec<Endpoint>,
    total_records: i64,
    total_bytes: i64,
}

impl FlightInfo {
    pub fn new(
        schema: &Schema,
        endpoints: Vec<Endpoint>,
        total_records: i64,
        total_bytes: i64,
    ) -> Result<Self, WireError> {
        let schema_bytes = encode_schema(schema).map_err(|_| WireError::Invalid("schema not encodable"))?;
        Self::from_parts(schema_bytes, endpoints, total_records, total_bytes)
    }

    fn from_parts(
        schema_bytes: Vec<u8>,
        endpoints: Vec<Endpoint>,
        total_records: i64,
        total_bytes: i64,
    ) -> Result<Self, WireError> {
        if endpoints.is_empty() {
            return Err(WireError::Invalid("flight info without endpoints"));
        }
        if total_records < -1 || total_bytes < -1 {
            return Err(WireError::Invalid("totals below -1"));
        }
        if endpoints.len() > u16::MAX as usize {
            return Err(WireError::Invalid("too many endpoints"));
        }
        Ok(FlightInfo { schema_bytes, endpoints, total_records, total_bytes })
    }

    pub fn schema_bytes(&self) -> &[u8] {
        &self.schema_bytes
    }

    pub fn schema(&self) -> Schema {
        decode_schema(&self.schema_bytes).expect("validated at construction")
    }

    pub fn endpoints(&self) -> &[Endpoint] {
        &self.endpoints
    }

    pub fn total_records(&self) -> i64 {
        self.total_records
    }

    pub fn total_bytes(&self) -> i64 {
        self.total_bytes
    }
}

impl Payload for FlightInfo {
    fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(32 + self.schema_bytes.len());
        let n = u32::try_from(self.schema_bytes.len()).map_err(|_| WireError::Invalid("schema too long"))?;
        out.extend_from_slice(&n.to_le_bytes());
        out.extend_from_slice(&self.schema_bytes);
        out.extend_from_slice(&self.total_records.to_le_bytes());
        out.extend_from_slice(&self.total_bytes.to_le_bytes());
        out.extend_from_slice(&(self.endpoints.len() as u16).to_le_bytes());
        for ep in &self.endpoints {
            ep.ticket.write(&mut out)?;
            let n = u16::try_from(ep.locations.len()).map_err(|_| WireError::Invalid("too many locations"))?;
            out.extend_from_slice(&n.to_le_bytes());
            for loc in &ep.locations {
                put_u16_str(&mut out, loc.as_str())?;
            }
        }
        Ok(out)
    }

    fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let n = r.u32()? as usize;
        let schema_bytes = r.take(n)?.to_vec();
        decode_schema(&schema_bytes)?;
        let total_records = r.i64()?;
        let total_bytes = r.i64()?;
        let count = r.u16()?;
        let mut endpoints = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let ticket = Ticket::read(&mut r)?;
            let nloc = r.u16()?;
            let mut locations = Vec::with_capacity(nloc as usize);
            for _ in 0..nloc {
                let uri = get_u16_str(&mut r)?;
                locations.push(Location::parse(uri).map_err(|_| WireError::Malformed("bad location"))?);
            }
            endpoints.push(Endpoint::new(ticket, locations).map_err(|_| WireError::Malformed("endpoint without locations"))?);
        }
        r.finish()?;
        FlightInfo::from_parts(schema_bytes, endpoints, total_records, total_bytes)
            .map_err(|_| WireError::Malformed("flight info violates invariants"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PutResult {
    pub records_received: u64,
    pub bytes_received: u64,
}

impl PutResult {
    pub fn new(records_received: u64, bytes_received: u64) -> Self {
        PutResult { records_received, bytes_received }
    }
}

impl core::ops::Add for PutResult {
    type Output = PutResult;

    fn add(self, o: PutResult) -> PutResult {
        PutResult::new(self.records_received + o.records_received, self.bytes_received + o.bytes_received)
    }
}

impl Payload for PutResult {
    fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(16);
        out.extend_from_slice(&self.records_received.to_le_bytes());
        out.extend_from_slice(&self.bytes_received.to_le_bytes());
        Ok(out)
    }

    fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let p = PutResult::new(r.u64()?, r.u64()?);
        r.finish()?;
        Ok(p)
    }
}
