// SPDX-License-Identifier: Apache-2.0

//! Throughput harness: multi-stream DoGet/DoPut sweeps and a raw-TCP
//! baseline, reported as CSV.

use std::fmt;
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::str::FromStr;
use std::thread;
use std::time::Instant;

use flitelite_core::perf::{generate, perf_schema, verify_perf_batches, PerfMismatch, RECORD_BYTES};
use flitelite_core::FlightDescriptor;

use crate::client::{Client, Reassembly};
use crate::error::FlightError;
use crate::server::{Server, ServerConfig, ServerHandle, PERF_PATH};

/// Dataset name the put benchmark uploads to.
pub const PUT_DATASET: &str = "bench_put";
const SINK_BLOCK: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Get,
    Put,
    TcpBaseline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Get => "get",
            Mode::Put => "put",
            Mode::TcpBaseline => "tcp-baseline",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "get" => Ok(Mode::Get),
            "put" => Ok(Mode::Put),
            "tcp-baseline" => Ok(Mode::TcpBaseline),
            _ => Err(format!("unknown mode `{s}` (get, put, tcp-baseline)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServerTarget {
    /// Run a server (or byte sink) in-process.
    Spawn,
    Address(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchConfig {
    pub mode: Mode,
    pub streams: Vec<usize>,
    pub records_per_stream: Vec<u64>,
    pub records_per_batch: u64,
    pub server: ServerTarget,
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            mode: Mode::Get,
            streams: vec![1, 2, 4, 8, 16],
            records_per_stream: vec![100_000],
            records_per_batch: 131_072,
            server: ServerTarget::Spawn,
            repetitions: 3,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m| Err(BenchError::Config(m));
        if self.streams.is_empty() || self.streams.contains(&0) {
            return bad("stream counts must be >= 1");
        }
        if !self.streams.windows(2).all(|w| w[0] < w[1]) {
            return bad("stream counts must be strictly ascending");
        }
        if self.streams.iter().any(|&s| s > u16::MAX as usize) {
            return bad("at most 65535 streams");
        }
        if self.records_per_stream.is_empty() || self.records_per_stream.contains(&0) {
            return bad("record counts must be >= 1");
        }
        if self.records_per_batch == 0 {
            return bad("records per batch must be >= 1");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub mode: Mode,
    pub streams: usize,
    pub records_per_stream: u64,
    pub records_per_batch: u64,
    pub bytes_total: u64,
    pub seconds_median: f64,
    pub throughput_mbps: f64,
}

impl BenchRow {
    fn new(mode: Mode, streams: usize, records_per_stream: u64, records_per_batch: u64, bytes_total: u64, seconds: &mut [f64]) -> Self {
        let seconds_median = median(seconds);
        BenchRow {
            mode,
            streams,
            records_per_stream,
            records_per_batch,
            bytes_total,
            seconds_median,
            throughput_mbps: bytes_total as f64 / 1e6 / seconds_median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, mode: Mode, streams: usize, records_per_stream: u64) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.mode == mode && r.streams == streams && r.records_per_stream == records_per_stream)
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| (a.mode, a.streams, a.records_per_stream).cmp(&(b.mode, b.streams, b.records_per_stream)));
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Flight(#[from] FlightError),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad report: {0}")]
    Parse(String),
}

impl From<PerfMismatch> for BenchError {
    fn from(e: PerfMismatch) -> Self {
        BenchError::Verification(e.to_string())
    }
}

/// Median; mean of the middle pair for even counts.
pub fn median(xs: &mut [f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

pub fn run_flight_bench(c: &BenchConfig) -> Result<BenchReport, BenchError> {
    c.validate()?;
    if c.mode == Mode::TcpBaseline {
        return Err(BenchError::Config("run_flight_bench needs mode get or put"));
    }
    let spawned: Option<ServerHandle> = match c.server {
        ServerTarget::Spawn => {
            let config = ServerConfig { perf_batch_rows: c.records_per_batch, ..Default::default() };
            Some(Server::bind(config)?.spawn())
        }
        ServerTarget::Address(_) => None,
    };
    let addr = match (&c.server, &spawned) {
        (ServerTarget::Address(a), _) => a.clone(),
        (_, Some(h)) => h.addr().to_string(),
        _ => unreachable!(),
    };
    let client = Client::new(addr);
    let mut report = BenchReport::default();
    for &records in &c.records_per_stream {
        for &streams in &c.streams {
            let total = records.checked_mul(streams as u64).ok_or(BenchError::Config("record count overflows"))?;
            let bytes_total = total * RECORD_BYTES;
            let mut seconds = Vec::with_capacity(c.repetitions);
            match c.mode {
                Mode::Get => {
                    let d = FlightDescriptor::path([
                        PERF_PATH.to_string(),
                        total.to_string(),
                        streams.to_string(),
                        c.records_per_batch.to_string(),
                    ])
                    .map_err(FlightError::from)?;
                    let info = client.get_flight_info(&d)?;
                    for _ in 0..c.repetitions {
                        let (data, stats) = client.do_get_all(&info, streams, Reassembly::Concatenate)?;
                        seconds.push(stats.elapsed_seconds);
                        check_totals(total, bytes_total, verify_perf_batches(data.batches(), 0)?, stats.bytes)?;
                    }
                }
                Mode::Put => {
                    let schema = perf_schema();
                    let batches = generate(0..total, c.records_per_batch);
                    let back = FlightDescriptor::path([PUT_DATASET]).map_err(FlightError::from)?;
                    for _ in 0..c.repetitions {
                        let (result, stats) = client.do_put_parallel(PUT_DATASET, &schema, &batches, streams)?;
                        seconds.push(stats.elapsed_seconds);
                        check_totals(total, bytes_total, result.records_received, result.bytes_received)?;
                        let info = client.get_flight_info(&back)?;
                        let (data, _) = client.do_get_all(&info, streams, Reassembly::Interleave)?;
                        check_totals(total, bytes_total, verify_perf_batches(data.batches(), 0)?, data.total_bytes())?;
                    }
                }
                Mode::TcpBaseline => unreachable!(),
            }
            let row = BenchRow::new(c.mode, streams, records, c.records_per_batch, bytes_total, &mut seconds);
            log::info!("{} streams={} records={} {:.2} MB/s", row.mode, streams, records, row.throughput_mbps);
            report.rows.push(row);
        }
    }
    report.sort();
    Ok(report)
}

fn check_totals(records: u64, bytes: u64, got_records: u64, got_bytes: u64) -> Result<(), BenchError> {
    if got_records != records || got_bytes != bytes {
        return Err(BenchError::Verification(format!(
            "expected {records} records / {bytes} bytes, got {got_records} / {got_bytes}"
        )));
    }
    Ok(())
}

/// Raw byte sink: per connection, counts bytes until the peer shuts down
/// its write side, then answers with the count as u64le.
pub struct ByteSink {
    addr: SocketAddr,
}

impl ByteSink {
    pub fn spawn(listen: &str) -> io::Result<ByteSink> {
        let listener = TcpListener::bind(listen)?;
        let addr = listener.local_addr()?;
        thread::spawn(move || serve_sink(listener));
        Ok(ByteSink { addr })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }
}

/// Blocking sink accept loop.
pub fn serve_sink(listener: TcpListener) {
    for conn in listener.incoming().flatten() {
        thread::spawn(move || {
            if let Err(e) = sink_connection(conn) {
                log::debug!("sink connection failed: {e}");
            }
        });
    }
}

fn sink_connection(mut s: TcpStream) -> io::Result<()> {
    let mut buf = vec![0u8; SINK_BLOCK];
    let mut total = 0u64;
    loop {
        match s.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => total += n as u64,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    s.write_all(&total.to_le_bytes())
}

fn send_raw(addr: &str, block: &[u8], bytes: u64) -> io::Result<u64> {
    let mut s = TcpStream::connect(addr)?;
    s.set_nodelay(true)?;
    let mut left = bytes;
    while left > 0 {
        let n = left.min(block.len() as u64) as usize;
        s.write_all(&block[..n])?;
        left -= n as u64;
    }
    s.shutdown(std::net::Shutdown::Write)?;
    let mut confirmed = [0u8; 8];
    s.read_exact(&mut confirmed)?;
    Ok(u64::from_le_bytes(confirmed))
}

pub fn run_tcp_baseline(c: &BenchConfig) -> Result<BenchReport, BenchError> {
    c.validate()?;
    if c.mode != Mode::TcpBaseline {
        return Err(BenchError::Config("run_tcp_baseline needs mode tcp-baseline"));
    }
    let addr = match &c.server {
        ServerTarget::Spawn => ByteSink::spawn("127.0.0.1:0")?.addr().to_string(),
        ServerTarget::Address(a) => a.clone(),
    };
    let block: Vec<u8> = (0..SINK_BLOCK).map(|i| i as u8).collect();
    let mut report = BenchReport::default();
    for &records in &c.records_per_stream {
        for &streams in &c.streams {
            let per_stream = records * RECORD_BYTES;
            let bytes_total = per_stream * streams as u64;
            let mut seconds = Vec::with_capacity(c.repetitions);
            for _ in 0..c.repetitions {
                let started = Instant::now();
                let confirmed: io::Result<Vec<u64>> = thread::scope(|s| {
                    let handles: Vec<_> =
                        (0..streams).map(|_| s.spawn(|| send_raw(&addr, &block, per_stream))).collect();
                    handles.into_iter().map(|h| h.join().expect("sender panicked")).collect()
                });
                seconds.push(started.elapsed().as_secs_f64());
                let confirmed: u64 = confirmed?.iter().sum();
                if confirmed != bytes_total {
                    return Err(BenchError::Verification(format!("sink confirmed {confirmed} of {bytes_total} bytes")));
                }
            }
            let row = BenchRow::new(Mode::TcpBaseline, streams, records, c.records_per_batch, bytes_total, &mut seconds);
            log::info!("tcp-baseline streams={} records={} {:.2} MB/s", streams, records, row.throughput_mbps);
            report.rows.push(row);
        }
    }
    report.sort();
    Ok(report)
}

pub fn run(c: &BenchConfig) -> Result<BenchReport, BenchError> {
    match c.mode {
        Mode::TcpBaseline => run_tcp_baseline(c),
        _ => run_flight_bench(c),
    }
}

pub const CSV_HEADER: [&str; 7] =
    ["mode", "streams", "records_per_stream", "records_per_batch", "bytes_total", "seconds_median", "throughput_mbps"];

pub fn emit_csv(r: &BenchReport) -> String {
    let mut rows = r.clone();
    rows.sort();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for row in &rows.rows {
        w.write_record([
            row.mode.to_string(),
            row.streams.to_string(),
            row.records_per_stream.to_string(),
            row.records_per_batch.to_string(),
            row.bytes_total.to_string(),
            row.seconds_median.to_string(),
            format!("{:.2}", row.throughput_mbps),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of ASCII")
}

pub fn parse_csv(text: &str) -> Result<BenchReport, BenchError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    if rd.headers()?.iter().ne(CSV_HEADER) {
        return Err(BenchError::Parse("unexpected header".into()));
    }
    let mut report = BenchReport::default();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).ok_or_else(|| BenchError::Parse(format!("short row {rec:?}")));
        fn num<T: FromStr>(s: &str) -> Result<T, BenchError> {
            s.parse().map_err(|_| BenchError::Parse(format!("bad number `{s}`")))
        }
        report.rows.push(BenchRow {
            mode: field(0)?.parse().map_err(BenchError::Parse)?,
            streams: num(field(1)?)?,
            records_per_stream: num(field(2)?)?,
            records_per_batch: num(field(3)?)?,
            bytes_total: num(field(4)?)?,
            seconds_median: num(field(5)?)?,
            throughput_mbps: num(field(6)?)?,
        });
    }
    Ok(report)
}

/// `flight / baseline` throughput for every (streams, records) cell both reports share.
pub fn efficiency_ratios(flight: &BenchReport, baseline: &BenchReport) -> Vec<(usize, u64, f64)> {
    let mut out = Vec::new();
    for f in &flight.rows {
        if let Some(b) = baseline.row(Mode::TcpBaseline, f.streams, f.records_per_stream) {
            let ratio = f.throughput_mbps / b.throughput_mbps;
            log::info!(
                "efficiency {} streams={} records={}: {:.2} / {:.2} MB/s = {ratio:.3}",
                f.mode, f.streams, f.records_per_stream, f.throughput_mbps, b.throughput_mbps
            );
            out.push((f.streams, f.records_per_stream, ratio));
        }
    }
    out
}
