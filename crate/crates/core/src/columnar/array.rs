// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use super::{bit_is_set, bitmap_len, Buffer, ColumnarError, DataType, Field, Scalar, MAX_UTF8_BYTES};

/// One column of data.
///
/// Invariants (checked by every constructor):
/// * `validity`, when present, is `ceil(len / 8)` bytes with unused trailing bits zero,
/// * `null_count` is the number of zero bits among the first `len`,
/// * Utf8 arrays carry `len + 1` non-decreasing `i32` offsets starting at 0 and
///   ending at the values length, each slice being valid UTF-8 (an empty
///   Utf8 array has an empty offsets buffer instead),
/// * fixed-width arrays carry exactly `len * width` value bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    dtype: DataType,
    len: usize,
    null_count: usize,
    validity: Option<Buffer>,
    offsets: Option<Buffer>,
    values: Buffer,
}

impl Array {
    /// Builds an array for `field` from optional cells; `None` is a null.
    ///
    /// Null slots are zero-filled (fixed width) or zero-length (Utf8).
    pub fn from_cells(field: &Field, cells: &[Option<Scalar>]) -> Result<Array, ColumnarError> {
        let mut b = ArrayBuilder::with_capacity(field.data_type(), field.is_nullable(), cells.len());
        for cell in cells {
            match cell {
                Some(v) => b.append_value(v)?,
                None if field.is_nullable() => b.append_null(),
                None => return Err(ColumnarError::NullNotAllowed(field.name().into())),
            }
        }
        b.finish()
    }

    /// Assembles an array from raw buffers, validating every layout invariant.
    pub fn try_from_parts(
        dtype: DataType,
        len: usize,
        validity: Option<Buffer>,
        offsets: Option<Buffer>,
        values: Buffer,
    ) -> Result<Array, ColumnarError> {
        let null_count = match &validity {
            Some(bits) => {
                if bits.len() != bitmap_len(len) {
                    return Err(ColumnarError::InvalidLayout("validity bitmap length"));
                }
                let bits = bits.as_slice();
                if len % 8 != 0 {
                    let tail = bits[bits.len() - 1] >> (len % 8);
                    if tail != 0 {
                        return Err(ColumnarError::InvalidLayout("validity trailing bits set"));
                    }
                }
                let set: usize = bits.iter().map(|b| b.count_ones() as usize).sum();
                len - set
            }
            None => 0,
        };
        match dtype.byte_width() {
            Some(width) => {
                if offsets.is_some() {
                    return Err(ColumnarError::InvalidLayout("offsets on fixed-width array"));
                }
                if len.checked_mul(width) != Some(values.len()) {
                    return Err(ColumnarError::InvalidLayout("values length"));
                }
            }
            None => {
                let Some(offs) = &offsets else {
                    return Err(ColumnarError::InvalidLayout("missing utf8 offsets"));
                };
                validate_utf8_layout(len, offs.as_slice(), values.as_slice())?;
            }
        }
        Ok(Array { dtype, len, null_count, validity, offsets, values })
    }

    pub fn data_type(&self) -> DataType {
        self.dtype
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn null_count(&self) -> usize {
        self.null_count
    }

    pub fn validity(&self) -> Option<&Buffer> {
        self.validity.as_ref()
    }

    pub fn offsets(&self) -> Option<&Buffer> {
        self.offsets.as_ref()
    }

    pub fn values(&self) -> &Buffer {
        &self.values
    }

    /// Buffers in canonical order: validity, offsets, values (absent ones skipped).
    pub fn buffers(&self) -> impl Iterator<Item = &Buffer> {
        self.validity.iter().chain(self.offsets.iter()).chain(core::iter::once(&self.values))
    }

    pub fn byte_size(&self) -> usize {
        self.buffers().map(Buffer::len).sum()
    }

    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        match &self.validity {
            Some(bits) => bit_is_set(bits.as_slice(), i),
            None => true,
        }
    }

    pub fn get(&self, i: usize) -> Result<Option<Scalar>, ColumnarError> {
        if i >= self.len {
            return Err(ColumnarError::IndexOutOfBounds { index: i, len: self.len });
        }
        if !self.is_valid(i) {
            return Ok(None);
        }
        Ok(Some(match self.dtype {
            DataType::Int32 => Scalar::Int32(self.i32_value(i)),
            DataType::Int64 => Scalar::Int64(self.i64_value(i)),
            DataType::Float64 => Scalar::Float64(self.f64_value(i)),
            DataType::Utf8 => Scalar::Utf8(self.str_value(i).into()),
        }))
    }

    // The typed accessors below ignore validity and panic if `i` is out of
    // range or the array has a different type.

    #[inline]
    pub fn i32_value(&self, i: usize) -> i32 {
        assert_eq!(self.dtype, DataType::Int32);
        i32::from_le_bytes(fixed::<4>(self.values.as_slice(), i))
    }

    #[inline]
    pub fn i64_value(&self, i: usize) -> i64 {
        assert_eq!(self.dtype, DataType::Int64);
        i64::from_le_bytes(fixed::<8>(self.values.as_slice(), i))
    }

    #[inline]
    pub fn f64_value(&self, i: usize) -> f64 {
        assert_eq!(self.dtype, DataType::Float64);
        f64::from_le_bytes(fixed::<8>(self.values.as_slice(), i))
    }

    #[inline]
    pub fn str_value(&self, i: usize) -> &str {
        assert_eq!(self.dtype, DataType::Utf8);
        let range = self.utf8_range(i);
        // Every slice was validated at construction.
        core::str::from_utf8(&self.values.as_slice()[range]).expect("validated utf8")
    }

    /// All Int64 slots in row order, nulls included as their stored value.
    pub fn iter_i64(&self) -> impl Iterator<Item = i64> + '_ {
        assert_eq!(self.dtype, DataType::Int64);
        self.values
            .as_slice()
            .chunks_exact(8)
            .map(|c| i64::from_le_bytes(c.try_into().unwrap()))
    }

    fn utf8_range(&self, i: usize) -> core::ops::Range<usize> {
        let offs = self.offsets.as_ref().expect("utf8 offsets").as_slice();
        let start = i32::from_le_bytes(fixed::<4>(offs, i)) as usize;
        let end = i32::from_le_bytes(fixed::<4>(offs, i + 1)) as usize;
        start..end
    }

    /// New array holding rows `indices` in the given order.
    pub fn take(&self, indices: &[usize]) -> Array {
        let mut b = ArrayBuilder::with_capacity(self.dtype, self.validity.is_some(), indices.len());
        for &i in indices {
            if !self.is_valid(i) {
                b.append_null();
                continue;
            }
            match self.dtype {
                DataType::Utf8 => {
                    let r = self.utf8_range(i);
                    b.push_utf8_bytes(&self.values.as_slice()[r]);
                }
                _ => {
                    let w = self.dtype.byte_width().unwrap();
                    b.push_fixed_bytes(&self.values.as_slice()[i * w..(i + 1) * w]);
                }
            }
        }
        // Inputs were valid, so the output is too (subset of a valid utf8 buffer).
        b.finish().expect("take of a valid array")
    }
}

#[inline]
fn fixed<const N: usize>(bytes: &[u8], i: usize) -> [u8; N] {
    bytes[i * N..(i + 1) * N].try_into().unwrap()
}

fn validate_utf8_layout(len: usize, offs: &[u8], values: &[u8]) -> Result<(), ColumnarError> {
    if len == 0 && offs.is_empty() && values.is_empty() {
        return Ok(());
    }
    if len == 0 {
        return Err(ColumnarError::InvalidLayout("empty utf8 array must have empty buffers"));
    }
    if offs.len() != (len + 1) * 4 {
        return Err(ColumnarError::InvalidLayout("offsets length"));
    }
    let text = core::str::from_utf8(values).map_err(|_| ColumnarError::InvalidLayout("invalid utf8"))?;
    let mut prev = 0i32;
    for (k, chunk) in offs.chunks_exact(4).enumerate() {
        let o = i32::from_le_bytes(chunk.try_into().unwrap());
        if k == 0 && o != 0 {
            return Err(ColumnarError::InvalidLayout("first offset not zero"));
        }
        if o < prev {
            return Err(ColumnarError::InvalidLayout("offsets decreasing"));
        }
        if o as usize > values.len() || !text.is_char_boundary(o as usize) {
            return Err(ColumnarError::InvalidLayout("offset not on a char boundary"));
        }
        prev = o;
    }
    if prev as usize != values.len() {
        return Err(ColumnarError::InvalidLayout("last offset != values length"));
    }
    Ok(())
}

/// Single-owner incremental array builder.
#[derive(Debug)]
pub struct ArrayBuilder {
    dtype: DataType,
    len: usize,
    validity: Option<Vec<u8>>,
    offsets: Vec<u8>,
    values: Vec<u8>,
    overflow: bool,
}

impl ArrayBuilder {
    pub fn new(dtype: DataType, nullable: bool) -> Self {
        Self::with_capacity(dtype, nullable, 0)
    }

    pub fn with_capacity(dtype: DataType, nullable: bool, rows: usize) -> Self {
        let (offsets, values) = match dtype.byte_width() {
            Some(w) => (Vec::new(), Vec::with_capacity(rows * w)),
            None => {
                let mut o = Vec::with_capacity((rows + 1) * 4);
                o.extend_from_slice(&0i32.to_le_bytes());
                (o, Vec::new())
            }
        };
        ArrayBuilder {
            dtype,
            len: 0,
            validity: nullable.then(|| Vec::with_capacity(bitmap_len(rows))),
            offsets,
            values,
            overflow: false,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn append_value(&mut self, v: &Scalar) -> Result<(), ColumnarError> {
        if v.data_type() != self.dtype {
            return Err(ColumnarError::TypeMismatch { expected: self.dtype, found: v.data_type() });
        }
        match v {
            Scalar::Int32(x) => self.push_fixed_bytes(&x.to_le_bytes()),
            Scalar::Int64(x) => self.push_fixed_bytes(&x.to_le_bytes()),
            Scalar::Float64(x) => self.push_fixed_bytes(&x.to_le_bytes()),
            Scalar::Utf8(s) => self.push_utf8_bytes(s.as_bytes()),
        }
        Ok(())
    }

    /// Appends a null; on a non-nullable builder this is a logic error and panics.
    pub fn append_null(&mut self) {
        let bits = self.validity.as_mut().expect("append_null on non-nullable builder");
        if self.len % 8 == 0 {
            bits.push(0);
        }
        self.len += 1;
        match self.dtype.byte_width() {
            Some(w) => self.values.resize(self.values.len() + w, 0),
            None => self.push_offset(),
        }
    }

    fn mark_valid(&mut self) {
        if let Some(bits) = self.validity.as_mut() {
            if self.len % 8 == 0 {
                bits.push(0);
            }
            *bits.last_mut().unwrap() |= 1 << (self.len % 8);
        }
        self.len += 1;
    }

    fn push_fixed_bytes(&mut self, b: &[u8]) {
        self.mark_valid();
        self.values.extend_from_slice(b);
    }

    fn push_utf8_bytes(&mut self, b: &[u8]) {
        self.mark_valid();
        self.values.extend_from_slice(b);
        self.push_offset();
    }

    fn push_offset(&mut self) {
        if self.values.len() > MAX_UTF8_BYTES {
            self.overflow = true;
        }
        self.offsets.extend_from_slice(&(self.values.len() as i32).to_le_bytes());
    }

    pub fn finish(self) -> Result<Array, ColumnarError> {
        if self.overflow {
            return Err(ColumnarError::Utf8Overflow);
        }
        let offsets = (self.dtype == DataType::Utf8).then(|| {
            if self.len == 0 {
                Buffer::empty()
            } else {
                Buffer::from_vec(self.offsets)
            }
        });
        Array::try_from_parts(
            self.dtype,
            self.len,
            self.validity.map(Buffer::from_vec),
            offsets,
            Buffer::from_vec(self.values),
        )
    }
}
