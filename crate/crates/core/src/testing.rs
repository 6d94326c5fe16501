// SPDX-License-Identifier: Apache-2.0

//! proptest strategies for schemas, cells and batches.
//!
//! Enabled for this crate's own tests and, for downstream test suites,
//! through the `proptest` feature.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use proptest::collection::vec;
use proptest::prelude::*;

use crate::columnar::{Array, DataType, Dataset, Field, RecordBatch, Scalar, Schema, SchemaRef};
use crate::query::{CmpOp, Literal, Predicate, Projection, QueryAst};

pub fn data_type() -> impl Strategy<Value = DataType> {
    prop_oneof![
        Just(DataType::Int32),
        Just(DataType::Int64),
        Just(DataType::Float64),
        Just(DataType::Utf8),
    ]
}

/// Schema with 1..=`max_fields` fields named `c0`, `c1`, ...
pub fn schema(max_fields: usize) -> impl Strategy<Value = SchemaRef> {
    vec((data_type(), any::<bool>()), 1..=max_fields).prop_map(|specs| {
        let fields = specs
            .into_iter()
            .enumerate()
            .map(|(i, (t, n))| Field::new(format!("c{i}"), t, n).unwrap())
            .collect();
        Arc::new(Schema::new(fields).unwrap())
    })
}

/// Schema whose field names are arbitrary (possibly non-ASCII) unique strings.
pub fn schema_with_names(max_fields: usize) -> impl Strategy<Value = Schema> {
    vec(("\\PC{1,12}", data_type(), any::<bool>()), 1..=max_fields).prop_map(|specs| {
        let mut fields: Vec<Field> = Vec::new();
        for (i, (name, t, n)) in specs.into_iter().enumerate() {
            let name = if fields.iter().any(|f| f.name() == name) { format!("{name}{i}") } else { name };
            if fields.iter().all(|f| f.name() != name) {
                fields.push(Field::new(name, t, n).unwrap());
            }
        }
        Schema::new(fields).unwrap()
    })
}

pub fn scalar(dtype: DataType) -> BoxedStrategy<Scalar> {
    match dtype {
        DataType::Int32 => prop_oneof![-4i32..4, any::<i32>()].prop_map(Scalar::Int32).boxed(),
        DataType::Int64 => prop_oneof![-4i64..4, any::<i64>()].prop_map(Scalar::Int64).boxed(),
        DataType::Float64 => prop_oneof![
            (-8i32..8).prop_map(|v| v as f64 / 2.0),
            any::<f64>().prop_filter("finite", |v| v.is_finite()),
        ]
        .prop_map(Scalar::Float64)
        .boxed(),
        DataType::Utf8 => prop_oneof![3 => "[a-c]{0,3}", 1 => "\\PC{0,6}"]
            .prop_map(|s: String| Scalar::Utf8(s))
            .boxed(),
    }
}

/// Cells for one field; nulls appear only when the field is nullable.
pub fn cells(field: &Field, rows: usize) -> BoxedStrategy<Vec<Option<Scalar>>> {
    let value = scalar(field.data_type());
    if field.is_nullable() {
        vec(proptest::option::weighted(0.8, value), rows).boxed()
    } else {
        vec(value.prop_map(Some), rows).boxed()
    }
}

/// Row-major cells for a whole batch, one inner vec per column.
pub fn columns(schema: SchemaRef, rows: usize) -> BoxedStrategy<Vec<Vec<Option<Scalar>>>> {
    let per_field: Vec<_> = schema.fields().iter().map(|f| cells(f, rows)).collect();
    per_field.boxed()
}

pub fn batch_for(schema: SchemaRef, max_rows: usize) -> BoxedStrategy<RecordBatch> {
    (0..=max_rows)
        .prop_flat_map(move |rows| {
            let s = schema.clone();
            columns(s.clone(), rows).prop_map(move |cols| build(&s, &cols))
        })
        .boxed()
}

pub fn batch(max_fields: usize, max_rows: usize) -> impl Strategy<Value = RecordBatch> {
    schema(max_fields).prop_flat_map(move |s| batch_for(s, max_rows))
}

/// Schema plus up to `max_batches` batches of up to `max_rows` rows each.
pub fn batches(
    max_fields: usize,
    max_batches: usize,
    max_rows: usize,
) -> impl Strategy<Value = (SchemaRef, Vec<RecordBatch>)> {
    schema(max_fields).prop_flat_map(move |s| {
        let b = vec(batch_for(s.clone(), max_rows), 0..=max_batches);
        (Just(s), b)
    })
}

pub fn build(schema: &SchemaRef, cols: &[Vec<Option<Scalar>>]) -> RecordBatch {
    let arrays = schema
        .fields()
        .iter()
        .zip(cols)
        .map(|(f, c)| Array::from_cells(f, c).unwrap())
        .collect();
    RecordBatch::try_new(schema.clone(), arrays).unwrap()
}

/// Literal of the kind a column of type `t` compares against.
pub fn literal(t: DataType) -> BoxedStrategy<Literal> {
    scalar(t)
        .prop_map(|s| match s {
            Scalar::Int32(v) => Literal::Integer(v as i64),
            Scalar::Int64(v) => Literal::Integer(v),
            Scalar::Float64(v) => Literal::Decimal(v),
            Scalar::Utf8(v) => Literal::Str(v),
        })
        .boxed()
}

/// Dataset (source name `t`) of up to 1,000 rows in up to 6 batches, plus a
/// random query that binds against it.
pub fn dataset_and_query() -> impl Strategy<Value = (Dataset, QueryAst)> {
    batches(5, 6, 170).prop_flat_map(|(schema, batches)| {
        let d = Dataset::try_new(schema.clone(), batches).unwrap();
        let n = schema.len();
        let proj = prop_oneof![
            Just(Projection::All),
            proptest::sample::subsequence((0..n).collect::<Vec<_>>(), 1..=n)
                .prop_shuffle()
                .prop_map({
                    let s = schema.clone();
                    move |idx| Projection::Columns(idx.iter().map(|&i| String::from(s.field(i).name())).collect())
                }),
        ];
        let pred = proptest::option::weighted(
            0.8,
            (0..n, proptest::sample::select(CmpOp::ALL.to_vec())).prop_flat_map({
                let s = schema.clone();
                move |(c, op)| {
                    let name = String::from(s.field(c).name());
                    literal(s.field(c).data_type()).prop_map(move |literal| Predicate { column: name.clone(), op, literal })
                }
            }),
        );
        (Just(d), proj, pred).prop_map(|(d, projection, predicate)| {
            (d, QueryAst { projection, source: "t".into(), predicate })
        })
    })
}
