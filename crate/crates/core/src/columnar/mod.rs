// SPDX-License-Identifier: Apache-2.0

//! In-memory columnar format.
//!
//! A [`RecordBatch`] is a [`Schema`] plus one [`Array`] per field. Each array
//! stores its data in up to three [`Buffer`]s:
//!
//! * a validity bitmap (nullable fields only), least-significant-bit first,
//! * an offsets buffer of `len + 1` little-endian `i32` entries (Utf8 only),
//! * a values buffer.
//!
//! All types are immutable once built and cheap to clone; buffers are
//! reference counted so they can alias a received IPC payload.

mod array;
mod batch;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use bytes::Bytes;

pub use array::{Array, ArrayBuilder};
pub use batch::{Dataset, RecordBatch};

/// Largest Utf8 values buffer a single array may carry (offsets are `i32`).
pub const MAX_UTF8_BYTES: usize = i32::MAX as usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ColumnarError {
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch { expected: DataType, found: DataType },
    #[error("null value in non-nullable field `{0}`")]
    NullNotAllowed(String),
    #[error("index {index} out of bounds for length {len}")]
    IndexOutOfBounds { index: usize, len: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("nullability mismatch for field `{0}`")]
    NullabilityMismatch(String),
    #[error("field name must not be empty")]
    EmptyFieldName,
    #[error("duplicate field name `{0}`")]
    DuplicateField(String),
    #[error("schema must have at least one field")]
    EmptySchema,
    #[error("utf8 values exceed {MAX_UTF8_BYTES} bytes")]
    Utf8Overflow,
    #[error("invalid array layout: {0}")]
    InvalidLayout(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    Int32,
    Int64,
    Float64,
    Utf8,
}

impl DataType {
    pub const ALL: [DataType; 4] = [DataType::Int32, DataType::Int64, DataType::Float64, DataType::Utf8];

    /// Fixed slot width in bytes, `None` for variable-width Utf8.
    pub const fn byte_width(self) -> Option<usize> {
        match self {
            DataType::Int32 => Some(4),
            DataType::Int64 | DataType::Float64 => Some(8),
            DataType::Utf8 => None,
        }
    }

    /// Type tag used on the wire.
    pub const fn tag(self) -> u8 {
        match self {
            DataType::Int32 => 1,
            DataType::Int64 => 2,
            DataType::Float64 => 3,
            DataType::Utf8 => 4,
        }
    }

    pub const fn from_tag(tag: u8) -> Option<DataType> {
        match tag {
            1 => Some(DataType::Int32),
            2 => Some(DataType::Int64),
            3 => Some(DataType::Float64),
            4 => Some(DataType::Utf8),
            _ => None,
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataType::Int32 => "Int32",
            DataType::Int64 => "Int64",
            DataType::Float64 => "Float64",
            DataType::Utf8 => "Utf8",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    name: String,
    dtype: DataType,
    nullable: bool,
}

impl Field {
    pub fn new(name: impl Into<String>, dtype: DataType, nullable: bool) -> Result<Self, ColumnarError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ColumnarError::EmptyFieldName);
        }
        Ok(Field { name, dtype, nullable })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn data_type(&self) -> DataType {
        self.dtype
    }

    pub fn is_nullable(&self) -> bool {
        self.nullable
    }
}

pub type SchemaRef = Arc<Schema>;

/// Ordered, non-empty list of uniquely named fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    fields: Vec<Field>,
}

impl Schema {
    pub fn new(fields: Vec<Field>) -> Result<Self, ColumnarError> {
        if fields.is_empty() {
            return Err(ColumnarError::EmptySchema);
        }
        let mut seen = BTreeSet::new();
        for f in &fields {
            if !seen.insert(f.name.as_str()) {
                return Err(ColumnarError::DuplicateField(f.name.clone()));
            }
        }
        Ok(Schema { fields })
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &Field {
        &self.fields[i]
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Schema of the given field indices, in the given order.
    pub fn project(&self, indices: &[usize]) -> Result<Schema, ColumnarError> {
        Schema::new(indices.iter().map(|&i| self.fields[i].clone()).collect())
    }
}

/// Immutable, reference-counted byte region.
///
/// Cloning and slicing never copy the underlying bytes.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Buffer(Bytes);

impl Buffer {
    pub fn empty() -> Self {
        Buffer(Bytes::new())
    }

    pub fn from_vec(v: Vec<u8>) -> Self {
        Buffer(Bytes::from(v))
    }

    pub fn from_bytes(b: Bytes) -> Self {
        Buffer(b)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_ptr(&self) -> *const u8 {
        self.0.as_ptr()
    }

    /// Sub-range sharing the same allocation.
    pub fn slice(&self, range: Range<usize>) -> Buffer {
        Buffer(self.0.slice(range))
    }

    pub fn into_bytes(self) -> Bytes {
        self.0
    }
}

impl fmt::Debug for Buffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 32;
        write!(f, "Buffer[{}](", self.len())?;
        for b in self.0.iter().take(SHOWN) {
            write!(f, "{b:02x}")?;
        }
        if self.len() > SHOWN {
            f.write_str("..")?;
        }
        f.write_str(")")
    }
}

impl AsRef<[u8]> for Buffer {
    fn as_ref(&self) -> &[u8] {
        self.as_slice()
    }
}

/// A single cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Int32(i32),
    Int64(i64),
    Float64(f64),
    Utf8(String),
}

impl Scalar {
    pub fn data_type(&self) -> DataType {
        match self {
            Scalar::Int32(_) => DataType::Int32,
            Scalar::Int64(_) => DataType::Int64,
            Scalar::Float64(_) => DataType::Float64,
            Scalar::Utf8(_) => DataType::Utf8,
        }
    }
}

impl From<i32> for Scalar {
    fn from(v: i32) -> Self {
        Scalar::Int32(v)
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int64(v)
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float64(v)
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Utf8(v.into())
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int32(v) => write!(f, "{v}"),
            Scalar::Int64(v) => write!(f, "{v}"),
            Scalar::Float64(v) => write!(f, "{v}"),
            Scalar::Utf8(v) => write!(f, "\"{v}\""),
        }
    }
}

pub(crate) fn bitmap_len(rows: usize) -> usize {
    rows.div_ceil(8)
}

#[inline]
pub(crate) fn bit_is_set(bitmap: &[u8], i: usize) -> bool {
    bitmap[i >> 3] & (1 << (i & 7)) != 0
}
