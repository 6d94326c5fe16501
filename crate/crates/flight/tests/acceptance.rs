// SPDX-License-Identifier: Apache-2.0

//! Exit criteria. Each test prints one `criterion N: PASS|FAIL` line.
//! All tests share one lock so throughput runs never overlap.

mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use flitelite::bench::{efficiency_ratios, run_flight_bench, run_tcp_baseline, BenchConfig, Mode, ServerTarget};
use flitelite::{Client, Reassembly, Server, ServerConfig};
use flitelite_core::ipc::{decode_batch, decode_schema, encode_batch, encode_schema, ALIGNMENT};
use flitelite_core::query::{CmpOp, Literal, Predicate, Projection, QueryAst};
use flitelite_core::sample::{example_batch, example_schema};
use flitelite_core::testing;
use flitelite_core::wire::validate_session;
use flitelite_core::{DataType, Dataset, FlightDescriptor, Scalar};

use common::{physical_cores, recorded_sessions, table1, type_mutations};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes past the test harness's output capture so every line is visible.
fn report(n: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n} ({name}): {verdict} | {detail}");
    let _ = out.flush();
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn sample<S: Strategy>(r: &mut TestRunner, s: &S) -> S::Value {
    s.new_tree(r).unwrap().current()
}

// --- 1 -------------------------------------------------------------------

const C1_LIMIT: Duration = Duration::from_secs(1);

#[test]
fn canonical_example_fidelity() {
    let _g = serial();
    let t0 = Instant::now();
    let b = example_batch();
    let x = b.column(0);
    let y = b.column(1);
    let offsets: Vec<i32> =
        y.offsets().unwrap().as_slice().chunks(4).map(|c| i32::from_le_bytes(c.try_into().unwrap())).collect();
    let mut ok = x.validity().map(|v| v.as_slice()) == Some(&[0x03][..])
        && x.null_count() == 1
        && offsets == [0, 5, 9, 10]
        && y.values().as_slice() == b"ArrowData!"
        && b.byte_size() == 63;
    let encoded = encode_batch(&b);
    let decoded = decode_batch(&encoded, &example_schema()).unwrap();
    ok &= decoded == b && encode_batch(&decoded).to_frame() == encoded.to_frame();
    let schema_bytes = encode_schema(&example_schema()).unwrap();
    ok &= encode_schema(&decode_schema(&schema_bytes).unwrap()).unwrap() == schema_bytes;
    let elapsed = t0.elapsed();
    report(
        1,
        "canonical example",
        ok && elapsed < C1_LIMIT,
        format!("validity/offsets/values/size exact, byte-identical round trip; {elapsed:.2?} (limit {C1_LIMIT:?})"),
    );
}

// --- 2 -------------------------------------------------------------------

const C2_CASES: u32 = 1000;
const C2_LIMIT: Duration = Duration::from_secs(30);

fn raw_descriptors(payload: &[u8]) -> (u64, Vec<(u64, u64)>, usize) {
    let rows = u64::from_le_bytes(payload[..8].try_into().unwrap());
    let count = u32::from_le_bytes(payload[8..12].try_into().unwrap()) as usize;
    let desc = (0..count)
        .map(|i| {
            let at = 12 + 16 * i;
            let off = u64::from_le_bytes(payload[at..at + 8].try_into().unwrap());
            let len = u64::from_le_bytes(payload[at + 8..at + 16].try_into().unwrap());
            (off, len)
        })
        .collect();
    (rows, desc, 12 + 16 * count)
}

#[test]
fn codec_property_suite() {
    let _g = serial();
    let t0 = Instant::now();
    let mut r = runner(C2_CASES);
    let strategy = testing::batch(6, 300);
    let mut seen = BTreeSet::new();
    let mut failures = Vec::new();
    let mut buffers = 0usize;
    for case in 0..C2_CASES {
        let b = sample(&mut r, &strategy);
        let schema = b.schema().clone();
        for (f, col) in schema.fields().iter().zip(b.columns()) {
            seen.insert((f.data_type().tag(), col.null_count() > 0));
        }
        let sb = encode_schema(&schema).unwrap();
        if decode_schema(&sb).as_ref() != Ok(&*schema) {
            failures.push(format!("case {case}: schema"));
        }
        let m = encode_batch(&b);
        let (rows, desc, header) = raw_descriptors(&m.payload);
        let body = m.payload.len() - header;
        buffers += desc.len();
        if rows != b.num_rows() as u64
            || body % ALIGNMENT != 0
            || desc.iter().any(|&(off, len)| off % ALIGNMENT as u64 != 0 || off + len > body as u64)
        {
            failures.push(format!("case {case}: layout {desc:?}"));
        }
        match decode_batch(&m, &schema) {
            Ok(d) if d == b && encode_batch(&d).payload == m.payload => {}
            _ => failures.push(format!("case {case}: batch round trip")),
        }
    }
    let elapsed = t0.elapsed();
    let combos = seen.len();
    report(
        2,
        "codec properties",
        failures.is_empty() && combos == 8 && elapsed < C2_LIMIT,
        format!(
            "{C2_CASES} round trips, {buffers} buffers 64-aligned on raw bytes, {combos}/8 type x null combos, {} failures {:?}; {elapsed:.2?} (limit {C2_LIMIT:?})",
            failures.len(),
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

// --- 3 -------------------------------------------------------------------

const C3_GRID: [usize; 4] = [1, 2, 4, 8];
const C3_MAX_ROWS: u64 = 100_000;
const C3_LIMIT: Duration = Duration::from_secs(120);

#[test]
fn end_to_end_identity() {
    let _g = serial();
    let t0 = Instant::now();
    let mut r = runner(64);
    // one dataset near the row cap, plus fresh small ones per cell
    let big_schema = sample(&mut r, &testing::schema(4));
    let big_batches: Vec<_> =
        (0..8).map(|_| sample(&mut r, &testing::batch_for(big_schema.clone(), 12_500))).collect();
    let big = Dataset::try_new(big_schema, big_batches).unwrap();
    assert!(big.total_records() <= C3_MAX_ROWS);
    let small = testing::batches(5, 10, 500);
    let mut cells = 0;
    let mut mismatches = Vec::new();
    let mut max_rows = big.total_records();
    for e in C3_GRID {
        let h = Server::bind(ServerConfig { endpoint_count: e, ..Default::default() }).unwrap().spawn();
        let c = Client::new(h.addr().to_string());
        for p in C3_GRID {
            let (schema, batches) = sample(&mut r, &small);
            let fresh = Dataset::try_new(schema, batches).unwrap();
            max_rows = max_rows.max(fresh.total_records());
            for (i, d) in [&big, &fresh].into_iter().enumerate() {
                let name = format!("d{p}_{i}");
                if i == 0 {
                    c.do_put_parallel(&name, d.schema(), d.batches(), p).unwrap();
                } else {
                    c.do_put(&FlightDescriptor::path([name.as_str()]).unwrap(), d.schema(), d.batches()).unwrap();
                }
                let info = c.get_flight_info(&FlightDescriptor::path([name.as_str()]).unwrap()).unwrap();
                let (got, _) = c.do_get_all(&info, p, Reassembly::Interleave).unwrap();
                if &got != d || info.endpoints().len() != e {
                    mismatches.push(format!("E={e} P={p} dataset {i}"));
                }
            }
            cells += 1;
        }
    }
    let elapsed = t0.elapsed();
    report(
        3,
        "end-to-end identity",
        mismatches.is_empty() && cells == 16 && max_rows <= C3_MAX_ROWS && elapsed < C3_LIMIT,
        format!(
            "{cells} (endpoints, parallelism) cells x 2 datasets (largest {max_rows} rows), mismatches {mismatches:?}; {elapsed:.2?} (limit {C3_LIMIT:?})"
        ),
    );
}

// --- 4 -------------------------------------------------------------------

const C4_MIN_CASES: usize = 500;
const C4_LIMIT: Duration = Duration::from_secs(60);

#[test]
fn protocol_conformance() {
    let _g = serial();
    let t0 = Instant::now();
    let sessions = recorded_sessions();
    let accepted = sessions.iter().filter(|s| validate_session(s.iter()).is_ok()).count();
    let mutants = type_mutations(&sessions);
    let rejected = mutants.iter().filter(|m| validate_session(m.iter()).is_err()).count();
    let elapsed = t0.elapsed();
    report(
        4,
        "protocol conformance",
        accepted == sessions.len() && rejected == mutants.len() && mutants.len() >= C4_MIN_CASES && elapsed < C4_LIMIT,
        format!(
            "accepted {accepted}/{} recorded sessions, rejected {rejected}/{} type mutations (need >= {C4_MIN_CASES}); {elapsed:.2?} (limit {C4_LIMIT:?})",
            sessions.len(),
            mutants.len()
        ),
    );
}

// --- 5 -------------------------------------------------------------------

const C5_CASES: u32 = 250;
const C5_LIMIT: Duration = Duration::from_secs(60);

type Rows = Vec<Vec<Option<Scalar>>>;

/// Row at a time over decoded scalars; null never satisfies a comparison.
fn oracle_keep(cell: &Option<Scalar>, p: &Predicate) -> bool {
    use std::cmp::Ordering::*;
    let Some(v) = cell else { return false };
    let ord = match (v, &p.literal) {
        (Scalar::Int32(a), Literal::Integer(b)) => (*a as i128).partial_cmp(&(*b as i128)),
        (Scalar::Int64(a), Literal::Integer(b)) => (*a as i128).partial_cmp(&(*b as i128)),
        (Scalar::Float64(a), Literal::Decimal(b)) => a.partial_cmp(b),
        (Scalar::Utf8(a), Literal::Str(b)) => Some(a.as_bytes().cmp(b.as_bytes())),
        _ => unreachable!("queries bind against the schema"),
    };
    match (p.op, ord) {
        (CmpOp::Ne, None) => true,
        (_, None) => false,
        (CmpOp::Eq, Some(o)) => o == Equal,
        (CmpOp::Ne, Some(o)) => o != Equal,
        (CmpOp::Lt, Some(o)) => o == Less,
        (CmpOp::Le, Some(o)) => o != Greater,
        (CmpOp::Gt, Some(o)) => o == Greater,
        (CmpOp::Ge, Some(o)) => o != Less,
    }
}

fn oracle(ast: &QueryAst, d: &Dataset) -> (Rows, usize) {
    let s = d.schema();
    let cols: Vec<usize> = match &ast.projection {
        Projection::All => (0..s.len()).collect(),
        Projection::Columns(c) => c.iter().map(|n| s.index_of(n).unwrap()).collect(),
    };
    let mut rows = Vec::new();
    let mut null_tested = 0;
    for b in d.batches() {
        for r in 0..b.num_rows() {
            let keep = match &ast.predicate {
                None => true,
                Some(p) => {
                    let cell = b.column(s.index_of(&p.column).unwrap()).get(r).unwrap();
                    null_tested += cell.is_none() as usize;
                    oracle_keep(&cell, p)
                }
            };
            if keep {
                rows.push(cols.iter().map(|&c| b.column(c).get(r).unwrap()).collect());
            }
        }
    }
    (rows, null_tested)
}

fn rows_of(d: &Dataset) -> Rows {
    d.batches()
        .iter()
        .flat_map(|b| (0..b.num_rows()).map(move |r| b.columns().iter().map(|c| c.get(r).unwrap()).collect()))
        .collect()
}

#[test]
fn query_oracle_equivalence() {
    let _g = serial();
    let t0 = Instant::now();
    let h = Server::bind(ServerConfig::default()).unwrap().spawn();
    let c = Client::new(h.addr().to_string());
    let run = |q: &str| -> Dataset {
        let info = c.get_flight_info(&FlightDescriptor::cmd(q).unwrap()).unwrap();
        c.do_get_all(&info, 1, Reassembly::Concatenate).unwrap().0
    };
    let mut r = runner(C5_CASES);
    let strategy = testing::dataset_and_query();
    let (mut matched, mut null_rows, mut empty_batches) = (0, 0, 0);
    let mut failures = Vec::new();
    for case in 0..C5_CASES {
        let (d, ast) = sample(&mut r, &strategy);
        h.store().insert("t", d.clone());
        let got = run(&ast.to_string());
        let (want, nulls) = oracle(&ast, &d);
        null_rows += nulls;
        empty_batches += got.batches().iter().filter(|b| b.num_rows() == 0).count();
        if rows_of(&got) == want {
            matched += 1;
        } else {
            failures.push(format!("case {case}: {ast}"));
        }
    }

    h.store().insert("t", table1());
    let star = run("SELECT * FROM t") == table1();
    let y = rows_of(&run("SELECT Y FROM t WHERE Z > 1.0"));
    let y_ok = y == vec![vec![Some(Scalar::from("Arrow"))], vec![Some(Scalar::from("!"))]];
    let x = rows_of(&run("SELECT X FROM t WHERE X = 555"));
    let x_ok = x == vec![vec![Some(Scalar::Int32(555))]];
    assert_eq!(example_schema().field(0).data_type(), DataType::Int32);

    let elapsed = t0.elapsed();
    report(
        5,
        "query oracle",
        matched == C5_CASES as usize && null_rows > 0 && empty_batches == 0 && star && y_ok && x_ok && elapsed < C5_LIMIT,
        format!(
            "{matched}/{C5_CASES} random queries match the row oracle ({null_rows} null predicate cells), example queries star={star} Z>1.0={y_ok} X=555={x_ok}, failures {:?}; {elapsed:.2?} (limit {C5_LIMIT:?})",
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    );
}

// --- 6 -------------------------------------------------------------------

const C6_MIN_CORES: usize = 4;
const C6_RECORDS: u64 = 1_000_000;
const C6_MIN_SPEEDUP: f64 = 1.5;
const C6_LIMIT: Duration = Duration::from_secs(180);

fn get_config(streams: Vec<usize>, records: Vec<u64>) -> BenchConfig {
    BenchConfig {
        mode: Mode::Get,
        streams,
        records_per_stream: records,
        server: ServerTarget::Spawn,
        repetitions: 3,
        ..BenchConfig::default()
    }
}

#[test]
fn multi_stream_scaling() {
    let _g = serial();
    let t0 = Instant::now();
    let cores = physical_cores();
    let mut attempts = Vec::new();
    for _ in 0..2 {
        let r = run_flight_bench(&get_config(vec![1, 4], vec![C6_RECORDS])).unwrap();
        let one = r.row(Mode::Get, 1, C6_RECORDS).unwrap().throughput_mbps;
        let four = r.row(Mode::Get, 4, C6_RECORDS).unwrap().throughput_mbps;
        attempts.push((one, four, four / one));
        if four / one >= C6_MIN_SPEEDUP {
            break;
        }
    }
    let &(one, four, speedup) = attempts.last().unwrap();
    let elapsed = t0.elapsed();
    let host = if cores >= C6_MIN_CORES {
        format!("{cores} physical cores")
    } else {
        format!("host has {cores} physical core(s), criterion requires >= {C6_MIN_CORES}")
    };
    report(
        6,
        "multi-stream scaling",
        cores >= C6_MIN_CORES && speedup >= C6_MIN_SPEEDUP && elapsed < C6_LIMIT,
        format!(
            "4 streams {four:.1} MB/s vs 1 stream {one:.1} MB/s = {speedup:.2}x (need >= {C6_MIN_SPEEDUP}x, {} attempt(s)); {host}; {elapsed:.2?} (limit {C6_LIMIT:?})",
            attempts.len()
        ),
    );
}

// --- 7 -------------------------------------------------------------------

const C7_RECORDS: u64 = 8_000_000;
const C7_MIN_RATIO: f64 = 0.5;
const C7_LIMIT: Duration = Duration::from_secs(180);

#[test]
fn protocol_efficiency() {
    let _g = serial();
    let t0 = Instant::now();
    let flight = run_flight_bench(&get_config(vec![1], vec![C7_RECORDS])).unwrap();
    let baseline = run_tcp_baseline(&BenchConfig { mode: Mode::TcpBaseline, ..get_config(vec![1], vec![C7_RECORDS]) }).unwrap();
    let (_, _, ratio) = efficiency_ratios(&flight, &baseline)[0];
    let f = &flight.rows[0];
    let b = &baseline.rows[0];
    let elapsed = t0.elapsed();
    report(
        7,
        "protocol efficiency",
        f.bytes_total >= 256_000_000 && ratio >= C7_MIN_RATIO && elapsed < C7_LIMIT,
        format!(
            "{} MB payload, DoGet {:.1} MB/s vs raw TCP {:.1} MB/s, ratio {ratio:.3} (need >= {C7_MIN_RATIO}), batch {} rows; {elapsed:.2?} (limit {C7_LIMIT:?})",
            f.bytes_total / 1_000_000,
            f.throughput_mbps,
            b.throughput_mbps,
            f.records_per_batch
        ),
    );
}

// --- 8 -------------------------------------------------------------------

const C8_SMALL: u64 = 1_000;
const C8_LARGE: u64 = 1_000_000;
const C8_MAX_RATIO: f64 = 0.5;
const C8_LIMIT: Duration = Duration::from_secs(60);

#[test]
fn per_message_overhead() {
    let _g = serial();
    let t0 = Instant::now();
    let r = run_flight_bench(&get_config(vec![1], vec![C8_SMALL, C8_LARGE])).unwrap();
    let small = r.row(Mode::Get, 1, C8_SMALL).unwrap().throughput_mbps;
    let large = r.row(Mode::Get, 1, C8_LARGE).unwrap().throughput_mbps;
    let ratio = small / large;
    let elapsed = t0.elapsed();
    report(
        8,
        "per-message overhead",
        ratio < C8_MAX_RATIO && elapsed < C8_LIMIT,
        format!(
            "{C8_SMALL} records {small:.1} MB/s vs {C8_LARGE} records {large:.1} MB/s, ratio {ratio:.3} (need < {C8_MAX_RATIO}); {elapsed:.2?} (limit {C8_LIMIT:?})"
        ),
    );
}

