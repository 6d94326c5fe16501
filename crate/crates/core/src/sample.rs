// SPDX-License-Identifier: Apache-2.0

//! The three-row example table used throughout docs and tests.
//!
//! | X (Int32, nullable) | Y (Utf8) | Z (Float64) |
//! |---------------------|----------|-------------|
//! | 555                 | "Arrow"  | 5.7866      |
//! | 56565               | "Data"   | 0.0         |
//! | null                | "!"      | 3.14        |

use alloc::sync::Arc;
use alloc::vec;

use crate::columnar::{Array, DataType, Field, RecordBatch, Scalar, Schema, SchemaRef};

pub fn example_schema() -> SchemaRef {
    Arc::new(
        Schema::new(vec![
            Field::new("X", DataType::Int32, true).unwrap(),
            Field::new("Y", DataType::Utf8, false).unwrap(),
            Field::new("Z", DataType::Float64, false).unwrap(),
        ])
        .unwrap(),
    )
}

pub fn example_batch() -> RecordBatch {
    let schema = example_schema();
    let x = Array::from_cells(
        schema.field(0),
        &[Some(Scalar::Int32(555)), Some(Scalar::Int32(56565)), None],
    )
    .unwrap();
    let y = Array::from_cells(schema.field(1), &[Some("Arrow".into()), Some("Data".into()), Some("!".into())])
        .unwrap();
    let z = Array::from_cells(
        schema.field(2),
        &[Some(5.7866.into()), Some(0.0.into()), Some(3.14.into())],
    )
    .unwrap();
    RecordBatch::try_new(schema, vec![x, y, z]).unwrap()
}
