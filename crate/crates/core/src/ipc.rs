// SPDX-License-Identifier: Apache-2.0

//! Binary encoding of schemas and record batches, plus message framing.
//!
//! Every integer is little-endian. A frame on the wire is
//!
//! ```text
//! u32 payload_len | u8 msg_type | payload
//! ```
//!
//! where `payload_len` counts only the payload. Batch payloads carry a
//! small header of buffer descriptors followed by a body in which every
//! buffer starts at a 64-byte aligned offset; padding is zero-filled.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use bytes::Bytes;

use crate::columnar::{Array, Buffer, DataType, Field, RecordBatch, Schema, SchemaRef};

/// Alignment of every buffer inside a batch body.
pub const ALIGNMENT: usize = 64;
/// Length prefix plus type byte.
pub const FRAME_HEADER_LEN: usize = 5;
/// Default cap on a single frame payload (1 GiB).
pub const DEFAULT_FRAME_CAP: usize = 1 << 30;

static ZEROS: [u8; ALIGNMENT] = [0; ALIGNMENT];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IpcError {
    #[error("malformed message: {0}")]
    Malformed(&'static str),
    #[error("field name longer than 65535 bytes")]
    NameTooLong,
    #[error("schema has more than 65535 fields")]
    TooManyFields,
    #[error("unknown message type 0x{0:02x}")]
    UnknownMessageType(u8),
    #[error("expected {expected:?} message, got {found:?}")]
    UnexpectedMessage { expected: MessageType, found: MessageType },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    Schema = 0x01,
    Batch = 0x02,
    Eos = 0x03,
    Error = 0x04,
    GetFlightInfo = 0x10,
    FlightInfo = 0x11,
    DoGet = 0x12,
    DoPut = 0x13,
    PutResult = 0x14,
    ListFlights = 0x15,
}

impl MessageType {
    pub const ALL: [MessageType; 10] = [
        MessageType::Schema,
        MessageType::Batch,
        MessageType::Eos,
        MessageType::Error,
        MessageType::GetFlightInfo,
        MessageType::FlightInfo,
        MessageType::DoGet,
        MessageType::DoPut,
        MessageType::PutResult,
        MessageType::ListFlights,
    ];

    pub const fn code(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for MessageType {
    type Error = IpcError;

    fn try_from(code: u8) -> Result<Self, IpcError> {
        MessageType::ALL
            .into_iter()
            .find(|t| t.code() == code)
            .ok_or(IpcError::UnknownMessageType(code))
    }
}

/// One typed frame. The payload is shared, so decoded batches can alias it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub msg_type: MessageType,
    pub payload: Bytes,
}

impl WireMessage {
    pub fn new(msg_type: MessageType, payload: impl Into<Bytes>) -> Self {
        WireMessage { msg_type, payload: payload.into() }
    }

    pub fn empty(msg_type: MessageType) -> Self {
        WireMessage { msg_type, payload: Bytes::new() }
    }

    pub fn frame_header(&self) -> [u8; FRAME_HEADER_LEN] {
        frame_header(self.msg_type, self.payload.len())
    }

    /// Header and payload as one contiguous frame.
    pub fn to_frame(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FRAME_HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.frame_header());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn expect(&self, t: MessageType) -> Result<&Self, IpcError> {
        if self.msg_type == t {
            Ok(self)
        } else {
            Err(IpcError::UnexpectedMessage { expected: t, found: self.msg_type })
        }
    }
}

pub fn frame_header(msg_type: MessageType, payload_len: usize) -> [u8; FRAME_HEADER_LEN] {
    let len = u32::try_from(payload_len).expect("payload exceeds u32 length");
    let l = len.to_le_bytes();
    [l[0], l[1], l[2], l[3], msg_type.code()]
}

/// Splits a frame header into payload length and raw type code.
pub fn parse_frame_header(h: &[u8; FRAME_HEADER_LEN]) -> (usize, u8) {
    (u32::from_le_bytes([h[0], h[1], h[2], h[3]]) as usize, h[4])
}

// ---- schema ----

pub fn encode_schema(s: &Schema) -> Result<Vec<u8>, IpcError> {
    let count = u16::try_from(s.len()).map_err(|_| IpcError::TooManyFields)?;
    let mut out = Vec::with_capacity(2 + s.len() * 8);
    out.extend_from_slice(&count.to_le_bytes());
    for f in s.fields() {
        let name = u16::try_from(f.name().len()).map_err(|_| IpcError::NameTooLong)?;
        out.extend_from_slice(&name.to_le_bytes());
        out.extend_from_slice(f.name().as_bytes());
        out.push(f.data_type().tag());
        out.push(f.is_nullable() as u8);
    }
    Ok(out)
}

pub fn decode_schema(b: &[u8]) -> Result<Schema, IpcError> {
    let mut r = Reader::new(b);
    let count = r.u16()?;
    let mut fields = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = core::str::from_utf8(r.take(len)?).map_err(|_| IpcError::Malformed("field name not utf8"))?;
        let dtype = DataType::from_tag(r.u8()?).ok_or(IpcError::Malformed("bad type tag"))?;
        let nullable = match r.u8()? {
            0 => false,
            1 => true,
            _ => return Err(IpcError::Malformed("bad nullable flag")),
        };
        fields.push(Field::new(name, dtype, nullable).map_err(|_| IpcError::Malformed("empty field name"))?);
    }
    r.finish()?;
    Schema::new(fields).map_err(|_| IpcError::Malformed("invalid schema"))
}

pub fn schema_message(s: &Schema) -> Result<WireMessage, IpcError> {
    Ok(WireMessage::new(MessageType::Schema, encode_schema(s)?))
}

// ---- batch ----

/// Number of buffers a batch of `schema` carries on the wire.
pub fn buffer_count(schema: &Schema) -> usize {
    schema
        .fields()
        .iter()
        .map(|f| 1 + f.is_nullable() as usize + (f.data_type() == DataType::Utf8) as usize)
        .sum()
}

const fn align(n: usize) -> usize {
    n.div_ceil(ALIGNMENT) * ALIGNMENT
}

/// Encoded shape of a batch without materializing its payload.
///
/// Lets writers emit the header and then each buffer straight from its
/// source allocation, producing exactly the bytes of [`encode_batch`].
pub struct BatchLayout<'a> {
    header: Vec<u8>,
    parts: Vec<(&'a Buffer, usize)>,
    payload_len: usize,
}

impl<'a> BatchLayout<'a> {
    pub fn new(b: &'a RecordBatch) -> Self {
        let buffers: Vec<&Buffer> = b.columns().iter().flat_map(Array::buffers).collect();
        let mut header = Vec::with_capacity(12 + 16 * buffers.len());
        header.extend_from_slice(&(b.num_rows() as u64).to_le_bytes());
        header.extend_from_slice(&(buffers.len() as u32).to_le_bytes());
        let mut parts = Vec::with_capacity(buffers.len());
        let mut offset = 0usize;
        for buf in &buffers {
            header.extend_from_slice(&(offset as u64).to_le_bytes());
            header.extend_from_slice(&(buf.len() as u64).to_le_bytes());
            let end = offset + buf.len();
            let next = align(end);
            parts.push((*buf, next - end));
            offset = next;
        }
        let payload_len = header.len() + offset;
        BatchLayout { header, parts, payload_len }
    }

    pub fn header(&self) -> &[u8] {
        &self.header
    }

    /// Each buffer with the number of zero bytes that follow it.
    pub fn parts(&self) -> &[(&'a Buffer, usize)] {
        &self.parts
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn frame_header(&self) -> [u8; FRAME_HEADER_LEN] {
        frame_header(MessageType::Batch, self.payload_len)
    }

    /// Frame header then every payload chunk, in wire order.
    pub fn chunks(&self) -> impl Iterator<Item = &[u8]> + '_ {
        let pads = self.parts.iter().flat_map(|(buf, pad)| [buf.as_slice(), &ZEROS[..*pad]]);
        core::iter::once(self.header.as_slice()).chain(pads)
    }
}

pub fn zero_padding(n: usize) -> &'static [u8] {
    &ZEROS[..n]
}

pub fn encode_batch(b: &RecordBatch) -> WireMessage {
    let layout = BatchLayout::new(b);
    let mut out = Vec::with_capacity(layout.payload_len());
    for chunk in layout.chunks() {
        out.extend_from_slice(chunk);
    }
    debug_assert_eq!(out.len(), layout.payload_len());
    WireMessage::new(MessageType::Batch, out)
}

/// Decodes a BATCH message against `schema`.
///
/// Buffers in the result are slices of `m.payload`; nothing is copied.
pub fn decode_batch(m: &WireMessage, schema: &SchemaRef) -> Result<RecordBatch, IpcError> {
    m.expect(MessageType::Batch)?;
    let payload = &m.payload;
    let mut r = Reader::new(payload);
    let num_rows = usize::try_from(r.u64()?).map_err(|_| IpcError::Malformed("row count overflow"))?;
    let count = r.u32()? as usize;
    if count != buffer_count(schema) {
        return Err(IpcError::Malformed("buffer count does not match schema"));
    }
    let mut descriptors = Vec::with_capacity(count);
    for _ in 0..count {
        descriptors.push((r.u64()?, r.u64()?));
    }
    let body_start = r.pos;
    let body_len = (payload.len() - body_start) as u64;
    let mut bufs = descriptors.into_iter().map(|(off, len)| {
        if off % ALIGNMENT as u64 != 0 {
            return Err(IpcError::Malformed("buffer offset not 64-byte aligned"));
        }
        match off.checked_add(len) {
            Some(end) if end <= body_len => {
                let start = body_start + off as usize;
                Ok(Buffer::from_bytes(payload.slice(start..start + len as usize)))
            }
            _ => Err(IpcError::Malformed("buffer descriptor out of bounds")),
        }
    });
    let mut columns = Vec::with_capacity(schema.len());
    for f in schema.fields() {
        let validity = if f.is_nullable() { Some(bufs.next().unwrap()?) } else { None };
        let offsets = if f.data_type() == DataType::Utf8 { Some(bufs.next().unwrap()?) } else { None };
        let values = bufs.next().unwrap()?;
        let arr = Array::try_from_parts(f.data_type(), num_rows, validity, offsets, values)
            .map_err(|e| IpcError::Malformed(layout_reason(&e)))?;
        columns.push(arr);
    }
    RecordBatch::try_new(schema.clone(), columns).map_err(|_| IpcError::Malformed("batch does not match schema"))
}

fn layout_reason(e: &crate::ColumnarError) -> &'static str {
    match e {
        crate::ColumnarError::InvalidLayout(why) => why,
        _ => "invalid array",
    }
}

// ---- error payload ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCode {
    NotFound = 1,
    Malformed = 2,
    QueryError = 3,
    Internal = 4,
}

impl ErrorCode {
    pub fn from_code(c: u32) -> Option<Self> {
        Some(match c {
            1 => ErrorCode::NotFound,
            2 => ErrorCode::Malformed,
            3 => ErrorCode::QueryError,
            4 => ErrorCode::Internal,
            _ => return None,
        })
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCode::NotFound => "NotFound",
            ErrorCode::Malformed => "Malformed",
            ErrorCode::QueryError => "QueryError",
            ErrorCode::Internal => "Internal",
        })
    }
}

/// Body of an ERROR frame. Messages are printable text: decoding rejects
/// control characters other than tab and newline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorPayload {
    pub code: ErrorCode,
    pub message: String,
}

impl ErrorPayload {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        let mut message: String = message.into();
        message.retain(|c| !is_disallowed(c));
        ErrorPayload { code, message }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.message.len());
        out.extend_from_slice(&(self.code as u32).to_le_bytes());
        out.extend_from_slice(self.message.as_bytes());
        out
    }

    pub fn decode(b: &[u8]) -> Result<Self, IpcError> {
        let mut r = Reader::new(b);
        let code = ErrorCode::from_code(r.u32()?).ok_or(IpcError::Malformed("unknown error code"))?;
        let message = core::str::from_utf8(r.rest()).map_err(|_| IpcError::Malformed("error message not utf8"))?;
        if message.chars().any(is_disallowed) {
            return Err(IpcError::Malformed("control character in error message"));
        }
        Ok(ErrorPayload { code, message: message.into() })
    }

    pub fn to_message(&self) -> WireMessage {
        WireMessage::new(MessageType::Error, self.encode())
    }
}

fn is_disallowed(c: char) -> bool {
    c.is_control() && c != '\t' && c != '\n'
}

impl fmt::Display for ErrorPayload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

// ---- cursor ----

/// Bounds-checked little-endian cursor used by every decoder in the crate.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], IpcError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(IpcError::Malformed("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], IpcError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub(crate) fn u8(&mut self) -> Result<u8, IpcError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, IpcError> {
        self.array().map(u16::from_le_bytes)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, IpcError> {
        self.array().map(u32::from_le_bytes)
    }

    pub(crate) fn u64(&mut self) -> Result<u64, IpcError> {
        self.array().map(u64::from_le_bytes)
    }

    pub(crate) fn i64(&mut self) -> Result<i64, IpcError> {
        self.array().map(i64::from_le_bytes)
    }

    pub(crate) fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }

    pub(crate) fn finish(&self) -> Result<(), IpcError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(IpcError::Malformed("trailing bytes"))
        }
    }
}
