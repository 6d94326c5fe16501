// SPDX-License-Identifier: Apache-2.0

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::{CmpOp, Literal, Projection, QueryAst, QueryError};
use crate::columnar::{Array, DataType, Dataset, RecordBatch, Schema, SchemaRef};

#[derive(Debug, Clone)]
struct BoundPredicate {
    column: usize,
    op: CmpOp,
    literal: Literal,
}

/// A query resolved against a schema, ready to run batch by batch.
#[derive(Debug, Clone)]
pub struct BoundQuery {
    projection: Vec<usize>,
    output_schema: SchemaRef,
    predicate: Option<BoundPredicate>,
}

/// Resolves column names and checks literal compatibility. The dataset
/// name in `ast.source` is the caller's concern.
pub fn bind(ast: &QueryAst, schema: &Schema) -> Result<BoundQuery, QueryError> {
    let lookup = |name: &str| schema.index_of(name).ok_or_else(|| QueryError::UnknownColumn(name.into()));
    let projection: Vec<usize> = match &ast.projection {
        Projection::All => (0..schema.len()).collect(),
        Projection::Columns(cols) => cols.iter().map(|c| lookup(c)).collect::<Result<_, _>>()?,
    };
    let output_schema = schema.project(&projection).map_err(|e| match e {
        crate::ColumnarError::DuplicateField(name) => QueryError::DuplicateColumn(name),
        other => unreachable!("projection of a valid schema: {other}"),
    })?;
    let predicate = match &ast.predicate {
        None => None,
        Some(p) => {
            let column = lookup(&p.column)?;
            let dtype = schema.field(column).data_type();
            let ok = matches!(
                (dtype, &p.literal),
                (DataType::Int32 | DataType::Int64, Literal::Integer(_))
                    | (DataType::Float64, Literal::Decimal(_))
                    | (DataType::Utf8, Literal::Str(_))
            );
            if !ok {
                return Err(QueryError::TypeMismatch {
                    column: p.column.clone(),
                    column_type: dtype,
                    literal: p.literal.kind(),
                });
            }
            Some(BoundPredicate { column, op: p.op, literal: p.literal.clone() })
        }
    };
    Ok(BoundQuery { projection, output_schema: Arc::new(output_schema), predicate })
}

impl BoundPredicate {
    fn selection(&self, col: &Array) -> Vec<usize> {
        let op = self.op;
        let rows = 0..col.len();
        let valid = |i: &usize| col.is_valid(*i);
        match (&self.literal, col.data_type()) {
            (Literal::Integer(lit), DataType::Int32) => {
                rows.filter(valid).filter(|&i| op.eval(&(col.i32_value(i) as i64), lit)).collect()
            }
            (Literal::Integer(lit), DataType::Int64) => rows.filter(valid).filter(|&i| op.eval(&col.i64_value(i), lit)).collect(),
            (Literal::Decimal(lit), DataType::Float64) => {
                rows.filter(valid).filter(|&i| op.eval(&col.f64_value(i), lit)).collect()
            }
            (Literal::Str(lit), DataType::Utf8) => {
                rows.filter(valid).filter(|&i| op.eval(col.str_value(i).as_bytes(), lit.as_bytes())).collect()
            }
            _ => unreachable!("literal type checked at bind time"),
        }
    }
}

impl BoundQuery {
    pub fn output_schema(&self) -> &SchemaRef {
        &self.output_schema
    }

    /// Filters and projects one batch; `None` when no row survives.
    pub fn execute_batch(&self, b: &RecordBatch) -> Option<RecordBatch> {
        let selected = self.predicate.as_ref().map(|p| p.selection(b.column(p.column)));
        let columns: Vec<Array> = match &selected {
            Some(rows) if rows.len() != b.num_rows() => {
                if rows.is_empty() {
                    return None;
                }
                self.projection.iter().map(|&c| b.column(c).take(rows)).collect()
            }
            _ => {
                if b.num_rows() == 0 {
                    return None;
                }
                self.projection.iter().map(|&c| b.column(c).clone()).collect()
            }
        };
        Some(RecordBatch::try_new(self.output_schema.clone(), columns).expect("projection of a valid batch"))
    }

    pub fn execute<'a>(&'a self, batches: impl IntoIterator<Item = &'a RecordBatch> + 'a) -> impl Iterator<Item = RecordBatch> + 'a {
        batches.into_iter().filter_map(move |b| self.execute_batch(b))
    }
}

/// Binds `ast` to `dataset` and runs it, returning the output schema and
/// batches. Input batch boundaries are kept; batches left empty are dropped.
pub fn execute_query(ast: &QueryAst, dataset: &Dataset) -> Result<Dataset, QueryError> {
    let q = bind(ast, dataset.schema())?;
    let out = q.execute(dataset.batches()).collect();
    Ok(Dataset::try_new(q.output_schema.clone(), out).expect("output batches share the output schema"))
}

#[cfg(test)]
mod tests;
