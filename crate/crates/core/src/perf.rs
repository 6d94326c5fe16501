// SPDX-License-Identifier: Apache-2.0

//! Synthetic perf dataset: 32-byte records of four Int64 fields where
//! field `j` of row `r` holds `4 * r + j` (wrapping two's complement).

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::columnar::{Array, Buffer, DataType, Field, RecordBatch, Schema, SchemaRef};

pub const PERF_FIELDS: usize = 4;
pub const RECORD_BYTES: u64 = (PERF_FIELDS * 8) as u64;

#[inline]
pub fn perf_value(row: u64, field: usize) -> i64 {
    (row as i64).wrapping_mul(PERF_FIELDS as i64).wrapping_add(field as i64)
}

pub fn perf_schema() -> SchemaRef {
    let fields = (0..PERF_FIELDS).map(|j| Field::new(format!("f{j}"), DataType::Int64, false).unwrap()).collect();
    Arc::new(Schema::new(fields).unwrap())
}

/// Rows served by endpoint `index` of `endpoints`: contiguous chunks of
/// `ceil(total / endpoints)` rows, the tail ones possibly short or empty.
pub fn endpoint_rows(total: u64, endpoints: u64, index: u64) -> Range<u64> {
    assert!(endpoints >= 1 && index < endpoints);
    let chunk = total.div_ceil(endpoints);
    let start = index.saturating_mul(chunk).min(total);
    let end = (index + 1).saturating_mul(chunk).min(total);
    start..end
}

/// One batch holding `rows`.
pub fn perf_batch(schema: &SchemaRef, rows: Range<u64>) -> RecordBatch {
    let n = (rows.end - rows.start) as usize;
    let columns = (0..PERF_FIELDS)
        .map(|j| {
            let mut values = vec![0u8; n * 8];
            for (slot, row) in values.chunks_exact_mut(8).zip(rows.clone()) {
                slot.copy_from_slice(&perf_value(row, j).to_le_bytes());
            }
            Array::try_from_parts(DataType::Int64, n, None, None, Buffer::from_vec(values)).unwrap()
        })
        .collect();
    RecordBatch::try_new(schema.clone(), columns).unwrap()
}

/// Lazily generated batches covering a row range.
#[derive(Debug, Clone)]
pub struct PerfBatches {
    schema: SchemaRef,
    next: u64,
    end: u64,
    batch_rows: u64,
}

impl PerfBatches {
    pub fn new(rows: Range<u64>, batch_rows: u64) -> Self {
        assert!(batch_rows >= 1);
        PerfBatches { schema: perf_schema(), next: rows.start, end: rows.end, batch_rows }
    }

    pub fn schema(&self) -> &SchemaRef {
        &self.schema
    }
}

impl Iterator for PerfBatches {
    type Item = RecordBatch;

    fn next(&mut self) -> Option<RecordBatch> {
        if self.next >= self.end {
            return None;
        }
        let stop = (self.next + self.batch_rows).min(self.end);
        let b = perf_batch(&self.schema, self.next..stop);
        self.next = stop;
        Some(b)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next).div_ceil(self.batch_rows) as usize;
        (n, Some(n))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PerfMismatch {
    #[error("batch schema is not the perf schema")]
    Schema,
    #[error("row {row} field {field}: expected {expected}, found {found}")]
    Value { row: u64, field: usize, expected: i64, found: i64 },
}

/// Checks a batch whose first row is global row `first_row`.
pub fn verify_perf_batch(b: &RecordBatch, first_row: u64) -> Result<(), PerfMismatch> {
    if **b.schema() != *perf_schema() {
        return Err(PerfMismatch::Schema);
    }
    for (j, col) in b.columns().iter().enumerate() {
        for (k, found) in col.iter_i64().enumerate() {
            let row = first_row + k as u64;
            let expected = perf_value(row, j);
            if found != expected {
                return Err(PerfMismatch::Value { row, field: j, expected, found });
            }
        }
    }
    Ok(())
}

/// Verifies consecutive batches starting at `first_row`; returns the row count.
pub fn verify_perf_batches<'a>(
    batches: impl IntoIterator<Item = &'a RecordBatch>,
    first_row: u64,
) -> Result<u64, PerfMismatch> {
    let mut row = first_row;
    for b in batches {
        verify_perf_batch(b, row)?;
        row += b.num_rows() as u64;
    }
    Ok(row - first_row)
}

pub fn generate(rows: Range<u64>, batch_rows: u64) -> Vec<RecordBatch> {
    PerfBatches::new(rows, batch_rows).collect()
}
