use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;

use super::*;
use crate::columnar::{Scalar, Schema};
use crate::query::{parse_query, Predicate};
use crate::sample::{example_batch, example_schema};
use crate::testing;

fn table1() -> Dataset {
    Dataset::try_new(example_schema(), vec![example_batch()]).unwrap()
}

fn run(q: &str, d: &Dataset) -> Result<Dataset, QueryError> {
    execute_query(&parse_query(q).unwrap(), d)
}

fn column_values(d: &Dataset, col: usize) -> Vec<Option<Scalar>> {
    d.batches()
        .iter()
        .flat_map(|b| (0..b.num_rows()).map(move |i| b.column(col).get(i).unwrap()))
        .collect()
}

#[test]
fn select_star_is_identity() {
    let out = run("SELECT * FROM t", &table1()).unwrap();
    assert_eq!(out, table1());
}

#[test]
fn float_predicate_projects_utf8() {
    let out = run("SELECT Y FROM t WHERE Z > 1.0", &table1()).unwrap();
    assert_eq!(out.schema().field(0).name(), "Y");
    assert_eq!(column_values(&out, 0), vec![Some("Arrow".into()), Some("!".into())]);
}

#[test]
fn null_row_never_matches() {
    let out = run("SELECT X FROM t WHERE X = 555", &table1()).unwrap();
    assert_eq!(column_values(&out, 0), vec![Some(Scalar::Int32(555))]);
    let out = run("SELECT X FROM t WHERE X != 555", &table1()).unwrap();
    assert_eq!(column_values(&out, 0), vec![Some(Scalar::Int32(56565))]);
}

#[test]
fn empty_results_drop_batches() {
    let out = run("SELECT X FROM t WHERE Y = 'nope'", &table1()).unwrap();
    assert!(out.batches().is_empty());
    assert_eq!(out.schema().len(), 1);
}

#[test]
fn bind_errors() {
    let d = table1();
    assert_eq!(run("SELECT W FROM t", &d), Err(QueryError::UnknownColumn("W".into())));
    assert_eq!(run("SELECT X FROM t WHERE W = 1", &d), Err(QueryError::UnknownColumn("W".into())));
    assert!(matches!(run("SELECT X FROM t WHERE Z = 1", &d), Err(QueryError::TypeMismatch { .. })));
    assert!(matches!(run("SELECT X FROM t WHERE X = 1.0", &d), Err(QueryError::TypeMismatch { .. })));
    assert!(matches!(run("SELECT X FROM t WHERE Y = 1", &d), Err(QueryError::TypeMismatch { .. })));
    assert_eq!(run("SELECT X, X FROM t", &d), Err(QueryError::DuplicateColumn("X".into())));
}

#[test]
fn int32_column_against_wide_literal() {
    let out = run("SELECT X FROM t WHERE X < 10000000000", &table1()).unwrap();
    assert_eq!(out.total_records(), 2);
}

#[test]
fn projection_order_follows_query() {
    let out = run("SELECT Z, X FROM t", &table1()).unwrap();
    let names: Vec<_> = out.schema().fields().iter().map(|f| f.name()).collect();
    assert_eq!(names, ["Z", "X"]);
    assert_eq!(out.batches()[0].column(0), example_batch().column(2));
}

// Row-at-a-time reference evaluator. Works purely on decoded scalars.
fn oracle_matches(cell: &Option<Scalar>, p: &Predicate) -> bool {
    use core::cmp::Ordering;
    let Some(v) = cell else { return false };
    let ord: Option<Ordering> = match (v, &p.literal) {
        (Scalar::Int32(a), Literal::Integer(b)) => Some(i64::from(*a).cmp(b)),
        (Scalar::Int64(a), Literal::Integer(b)) => Some(a.cmp(b)),
        (Scalar::Float64(a), Literal::Decimal(b)) => a.partial_cmp(b),
        (Scalar::Utf8(a), Literal::Str(b)) => Some(a.as_bytes().cmp(b.as_bytes())),
        _ => panic!("oracle given incompatible literal"),
    };
    match (p.op, ord) {
        (CmpOp::Ne, None) => true,
        (_, None) => false,
        (CmpOp::Eq, Some(o)) => o == Ordering::Equal,
        (CmpOp::Ne, Some(o)) => o != Ordering::Equal,
        (CmpOp::Lt, Some(o)) => o == Ordering::Less,
        (CmpOp::Le, Some(o)) => o != Ordering::Greater,
        (CmpOp::Gt, Some(o)) => o == Ordering::Greater,
        (CmpOp::Ge, Some(o)) => o != Ordering::Less,
    }
}

/// Output rows per input batch (empty batches omitted), as scalars.
fn oracle(ast: &QueryAst, d: &Dataset) -> Vec<Vec<Vec<Option<Scalar>>>> {
    let s = d.schema();
    let cols: Vec<usize> = match &ast.projection {
        Projection::All => (0..s.len()).collect(),
        Projection::Columns(c) => c.iter().map(|n| s.index_of(n).unwrap()).collect(),
    };
    let mut out = Vec::new();
    for b in d.batches() {
        let mut rows = Vec::new();
        for r in 0..b.num_rows() {
            let keep = match &ast.predicate {
                None => true,
                Some(p) => oracle_matches(&b.column(s.index_of(&p.column).unwrap()).get(r).unwrap(), p),
            };
            if keep {
                rows.push(cols.iter().map(|&c| b.column(c).get(r).unwrap()).collect::<Vec<_>>());
            }
        }
        if !rows.is_empty() {
            out.push(rows);
        }
    }
    out
}

fn rows_of(d: &Dataset) -> Vec<Vec<Vec<Option<Scalar>>>> {
    d.batches()
        .iter()
        .map(|b| (0..b.num_rows()).map(|r| b.columns().iter().map(|c| c.get(r).unwrap()).collect()).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_row_oracle((d, ast) in testing::dataset_and_query()) {
        let out = execute_query(&ast, &d).unwrap();
        prop_assert_eq!(rows_of(&out), oracle(&ast, &d));
    }

    #[test]
    fn projection_only_keeps_rows((d, mut ast) in testing::dataset_and_query()) {
        ast.predicate = None;
        let out = execute_query(&ast, &d).unwrap();
        prop_assert_eq!(out.total_records(), d.total_records());
        let non_empty: Vec<&RecordBatch> = d.batches().iter().filter(|b| b.num_rows() > 0).collect();
        prop_assert_eq!(out.batches().len(), non_empty.len());
        if ast.projection == Projection::All {
            for (o, i) in out.batches().iter().zip(non_empty) {
                prop_assert_eq!(o, i);
            }
        }
    }
}

#[test]
fn one_column_schema_is_valid() {
    let s = Arc::new(Schema::new(vec![crate::Field::new("a", DataType::Int64, true).unwrap()]).unwrap());
    let d = Dataset::empty(s);
    let out = run("SELECT a FROM t WHERE a > 0", &d).unwrap();
    assert_eq!(out.total_records(), 0);
}
