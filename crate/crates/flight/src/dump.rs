// SPDX-License-Identifier: Apache-2.0

//! Golden-file corpus: frame streams plus JSON expectations, for checking
//! independent decoders without a live server.
//!
//! Each case `NAME` produces `NAME.fltl` (SCHEMA, BATCH*, EOS frames exactly as
//! a DoGet sends them, no preamble) and `NAME.json`:
//!
//! ```text
//! {"schema": [{"name": "X", "type": "Int32", "nullable": true}, ...],
//!  "batches": [{"rows": 3, "columns": [[1, 2, null], ...]}, ...],
//!  "total_records": 3, "total_bytes": 63}
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use flitelite_core::ipc::{encode_batch, schema_message, MessageType, WireMessage};
use flitelite_core::perf::generate;
use flitelite_core::sample::{example_batch, example_schema};
use flitelite_core::{Array, DataType, Dataset, Field, RecordBatch, Scalar, Schema, SchemaRef};

pub struct GoldenCase {
    pub name: String,
    pub dataset: Dataset,
}

/// The frames a DoGet of `d` carries after the request.
pub fn encode_stream(d: &Dataset) -> Vec<u8> {
    let mut out = schema_message(d.schema()).expect("dataset schema encodes").to_frame();
    for b in d.batches() {
        out.extend_from_slice(&encode_batch(b).to_frame());
    }
    out.extend_from_slice(&WireMessage::empty(MessageType::Eos).to_frame());
    out
}

fn scalar_json(s: Option<Scalar>) -> Value {
    match s {
        None => Value::Null,
        Some(Scalar::Int32(v)) => json!(v),
        Some(Scalar::Int64(v)) => json!(v),
        Some(Scalar::Float64(v)) => json!(v),
        Some(Scalar::Utf8(v)) => json!(v),
    }
}

fn column_json(a: &Array) -> Value {
    Value::Array((0..a.len()).map(|i| scalar_json(a.get(i).expect("in range"))).collect())
}

pub fn expectation_json(d: &Dataset) -> Value {
    let schema: Vec<Value> = d
        .schema()
        .fields()
        .iter()
        .map(|f| json!({"name": f.name(), "type": f.data_type().to_string(), "nullable": f.is_nullable()}))
        .collect();
    let batches: Vec<Value> = d
        .batches()
        .iter()
        .map(|b| json!({"rows": b.num_rows(), "columns": b.columns().iter().map(column_json).collect::<Vec<_>>()}))
        .collect();
    json!({
        "schema": schema,
        "batches": batches,
        "total_records": d.total_records(),
        "total_bytes": d.total_bytes(),
    })
}

fn random_string(rng: &mut StdRng) -> String {
    const POOL: &[char] = &['a', 'Z', '0', ' ', ',', '"', '\\', 'é', 'ß', '€', '中', '🦀', '\n'];
    let n = rng.random_range(0..12);
    (0..n).map(|_| POOL[rng.random_range(0..POOL.len())]).collect()
}

fn random_scalar(rng: &mut StdRng, t: DataType) -> Scalar {
    match t {
        DataType::Int32 => Scalar::Int32(match rng.random_range(0..4) {
            0 => [i32::MIN, i32::MAX, 0, -1][rng.random_range(0..4)],
            _ => rng.random(),
        }),
        DataType::Int64 => Scalar::Int64(match rng.random_range(0..4) {
            0 => [i64::MIN, i64::MAX, 0, -1][rng.random_range(0..4)],
            _ => rng.random(),
        }),
        DataType::Float64 => Scalar::Float64(match rng.random_range(0..4) {
            0 => [0.0, -0.0, 1.5e300, f64::MIN_POSITIVE][rng.random_range(0..4)],
            _ => rng.random_range(-1e9..1e9),
        }),
        DataType::Utf8 => Scalar::Utf8(random_string(rng)),
    }
}

fn random_schema(rng: &mut StdRng) -> SchemaRef {
    let n = rng.random_range(1..=5);
    let fields = (0..n)
        .map(|i| {
            let t = DataType::ALL[rng.random_range(0..DataType::ALL.len())];
            Field::new(format!("c{i}"), t, rng.random_bool(0.5)).unwrap()
        })
        .collect();
    Arc::new(Schema::new(fields).unwrap())
}

fn random_batch(rng: &mut StdRng, schema: &SchemaRef) -> RecordBatch {
    let rows = rng.random_range(0..=64);
    let null_rate = [0.0, 0.1, 0.5, 1.0][rng.random_range(0..4)];
    let columns = schema
        .fields()
        .iter()
        .map(|f| {
            let cells: Vec<Option<Scalar>> = (0..rows)
                .map(|_| {
                    if f.is_nullable() && rng.random_bool(null_rate) {
                        None
                    } else {
                        Some(random_scalar(rng, f.data_type()))
                    }
                })
                .collect();
            Array::from_cells(f, &cells).unwrap()
        })
        .collect();
    RecordBatch::try_new(schema.clone(), columns).unwrap()
}

/// Three fixed cases followed by `random` seeded random ones.
pub fn golden_cases(random: usize, seed: u64) -> Vec<GoldenCase> {
    let mut cases = vec![
        GoldenCase { name: "example".into(), dataset: Dataset::try_new(example_schema(), vec![example_batch()]).unwrap() },
        GoldenCase { name: "empty".into(), dataset: Dataset::empty(example_schema()) },
    ];
    let perf = generate(0..1000, 256);
    cases.push(GoldenCase {
        name: "perf_1000".into(),
        dataset: Dataset::try_new(perf[0].schema().clone(), perf).unwrap(),
    });
    let mut rng = StdRng::seed_from_u64(seed);
    for i in 0..random {
        let schema = random_schema(&mut rng);
        let batches = (0..rng.random_range(0..=4)).map(|_| random_batch(&mut rng, &schema)).collect();
        cases.push(GoldenCase { name: format!("random_{i:03}"), dataset: Dataset::try_new(schema, batches).unwrap() });
    }
    cases
}

/// Writes every case into `dir` (created if missing); returns the `.fltl` paths.
pub fn write_corpus(dir: &Path, random: usize, seed: u64) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for case in golden_cases(random, seed) {
        let frames = dir.join(format!("{}.fltl", case.name));
        fs::write(&frames, encode_stream(&case.dataset))?;
        let expect = serde_json::to_string_pretty(&expectation_json(&case.dataset)).map_err(io::Error::other)?;
        fs::write(dir.join(format!("{}.json", case.name)), expect + "\n")?;
        written.push(frames);
    }
    Ok(written)
}
