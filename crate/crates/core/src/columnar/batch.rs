// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

use super::{Array, ColumnarError, SchemaRef};

/// Equal-length columns tagged with a schema; the unit of transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordBatch {
    schema: SchemaRef,
    columns: Vec<Array>,
    num_rows: usize,
}

impl RecordBatch {
    pub fn try_new(schema: SchemaRef, columns: Vec<Array>) -> Result<RecordBatch, ColumnarError> {
        if columns.len() != schema.len() {
            return Err(ColumnarError::ShapeMismatch("column count differs from field count"));
        }
        let num_rows = columns.first().map_or(0, Array::len);
        for (field, col) in schema.fields().iter().zip(&columns) {
            if col.len() != num_rows {
                return Err(ColumnarError::ShapeMismatch("columns have unequal lengths"));
            }
            if col.data_type() != field.data_type() {
                return Err(ColumnarError::TypeMismatch {
                    expected: field.data_type(),
                    found: col.data_type(),
                });
            }
            if col.validity().is_some() != field.is_nullable() {
                return Err(ColumnarError::NullabilityMismatch(field.name().into()));
            }
        }
        Ok(RecordBatch { schema, columns, num_rows })
    }

    pub fn schema(&self) -> &SchemaRef {
        &self.schema
    }

    pub fn columns(&self) -> &[Array] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> &Array {
        &self.columns[i]
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// Sum of all buffer lengths; excludes schema and framing.
    pub fn byte_size(&self) -> usize {
        self.columns.iter().map(Array::byte_size).sum()
    }
}

/// A schema plus an ordered batch sequence sharing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: SchemaRef,
    batches: Vec<RecordBatch>,
}

impl Dataset {
    pub fn try_new(schema: SchemaRef, batches: Vec<RecordBatch>) -> Result<Dataset, ColumnarError> {
        if batches.iter().any(|b| **b.schema() != *schema) {
            return Err(ColumnarError::ShapeMismatch("batch schema differs from dataset schema"));
        }
        Ok(Dataset { schema, batches })
    }

    pub fn empty(schema: SchemaRef) -> Dataset {
        Dataset { schema, batches: Vec::new() }
    }

    pub fn schema(&self) -> &SchemaRef {
        &self.schema
    }

    pub fn batches(&self) -> &[RecordBatch] {
        &self.batches
    }

    pub fn into_batches(self) -> Vec<RecordBatch> {
        self.batches
    }

    pub fn total_records(&self) -> u64 {
        self.batches.iter().map(|b| b.num_rows() as u64).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.batches.iter().map(|b| b.byte_size() as u64).sum()
    }
}
