// SPDX-License-Identifier: Apache-2.0

//! Blocking client with parallel multi-endpoint transfers.

use std::io::{BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use flitelite_core::ipc::{schema_message, MessageType, WireMessage};
use flitelite_core::wire::{Observed, Payload};
use flitelite_core::{
    Dataset, Endpoint, FlightDescriptor, FlightInfo, Peer, PutResult, RecordBatch, SchemaRef,
    SequenceValidator, Ticket,
};

use crate::error::{FlightError, Result};
use crate::io::{client_preamble, read_message, write_batch, write_message, FrameError, DEFAULT_FRAME_CAP};

/// How `do_get_all` orders batches from several endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reassembly {
    /// Endpoint 0's batches, then endpoint 1's, ... (perf partitions).
    #[default]
    Concatenate,
    /// Batch 0 of every endpoint, then batch 1, ... (stored datasets).
    Interleave,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamStats {
    pub endpoint: usize,
    pub records: u64,
    pub bytes: u64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferStats {
    pub streams: usize,
    pub records: u64,
    pub bytes: u64,
    pub elapsed_seconds: f64,
    pub per_stream: Vec<StreamStats>,
}

impl TransferStats {
    /// Decimal megabytes per second.
    pub fn throughput_mb_s(&self) -> f64 {
        self.bytes as f64 / 1e6 / self.elapsed_seconds
    }
}

/// One connection and its sequence validator.
struct Conn {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    validator: SequenceValidator,
    cap: usize,
}

impl Conn {
    fn open(addr: &str, cap: usize) -> Result<Conn> {
        let stream =
            TcpStream::connect(addr).map_err(|source| FlightError::ConnectFailed { addr: addr.to_string(), source })?;
        stream.set_nodelay(true)?;
        client_preamble(&mut &stream)?;
        Ok(Conn {
            reader: BufReader::with_capacity(1 << 16, stream.try_clone()?),
            writer: BufWriter::with_capacity(1 << 16, stream),
            validator: SequenceValidator::new(),
            cap,
        })
    }

    fn send(&mut self, m: &WireMessage) -> Result<()> {
        self.validator.observe(Peer::Client, m)?;
        write_message(&mut self.writer, m)?;
        Ok(())
    }

    fn flush(&mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }

    fn recv(&mut self) -> Result<Observed> {
        let m = match read_message(&mut self.reader, self.cap) {
            Ok(m) => m,
            Err(FrameError::ConnectionClosed) => {
                return Err(FlightError::Protocol(self.validator.finish().expect_err("reply outstanding")))
            }
            Err(e) => return Err(e.into()),
        };
        match self.validator.observe(Peer::Server, &m)? {
            Observed::Error(e) => Err(FlightError::Server(e)),
            o => Ok(o),
        }
    }

    /// After a failed write: prefer the server's ERROR over the IO error.
    fn write_failed(&mut self, e: FlightError) -> FlightError {
        match self.recv() {
            Err(server @ FlightError::Server(_)) => server,
            _ => e,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    addr: String,
    frame_cap: usize,
}

impl Client {
    pub fn new(addr: impl Into<String>) -> Client {
        Client { addr: addr.into(), frame_cap: DEFAULT_FRAME_CAP }
    }

    pub fn with_frame_cap(mut self, cap: usize) -> Client {
        self.frame_cap = cap;
        self
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    pub fn get_flight_info(&self, d: &FlightDescriptor) -> Result<FlightInfo> {
        let mut c = Conn::open(&self.addr, self.frame_cap)?;
        c.send(&d.to_message(MessageType::GetFlightInfo)?)?;
        c.flush()?;
        match c.recv()? {
            Observed::FlightInfo(info) => Ok(info),
            other => unreachable!("validator allowed {other:?}"),
        }
    }

    pub fn list_flights(&self) -> Result<Vec<FlightInfo>> {
        let mut c = Conn::open(&self.addr, self.frame_cap)?;
        c.send(&WireMessage::empty(MessageType::ListFlights))?;
        c.flush()?;
        let mut out = Vec::new();
        loop {
            match c.recv()? {
                Observed::FlightInfo(info) => out.push(info),
                Observed::Eos => return Ok(out),
                other => unreachable!("validator allowed {other:?}"),
            }
        }
    }

    /// Fetches one endpoint, trying its locations in order.
    pub fn do_get(&self, endpoint: &Endpoint) -> Result<Dataset> {
        let mut last = None;
        for loc in endpoint.locations() {
            let mut c = match Conn::open(loc.authority(), self.frame_cap) {
                Ok(c) => c,
                Err(e @ FlightError::ConnectFailed { .. }) => {
                    last = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            return Self::fetch(&mut c, endpoint.ticket());
        }
        Err(last.expect("endpoints carry at least one location"))
    }

    fn fetch(c: &mut Conn, t: &Ticket) -> Result<Dataset> {
        c.send(&t.to_message(MessageType::DoGet)?)?;
        c.flush()?;
        let schema = match c.recv()? {
            Observed::Schema(s) => s,
            other => unreachable!("validator allowed {other:?}"),
        };
        let mut batches = Vec::new();
        loop {
            match c.recv()? {
                Observed::Batch(b) => batches.push(b),
                Observed::Eos => break,
                other => unreachable!("validator allowed {other:?}"),
            }
        }
        Ok(Dataset::try_new(schema, batches).expect("decoded against the stream schema"))
    }

    pub fn do_put(&self, d: &FlightDescriptor, schema: &SchemaRef, batches: &[RecordBatch]) -> Result<PutResult> {
        if batches.iter().any(|b| b.schema() != schema) {
            return Err(FlightError::SchemaMismatch);
        }
        let mut c = Conn::open(&self.addr, self.frame_cap)?;
        let sent = (|| -> Result<()> {
            c.send(&d.to_message(MessageType::DoPut)?)?;
            c.send(&schema_message(schema)?)?;
            for b in batches {
                // Outgoing batches come from the encoder and are not re-validated.
                write_batch(&mut c.writer, b)?;
            }
            c.send(&WireMessage::empty(MessageType::Eos))?;
            c.flush()
        })();
        if let Err(e) = sent {
            return Err(c.write_failed(e));
        }
        match c.recv()? {
            Observed::PutResult(r) => Ok(r),
            other => unreachable!("validator allowed {other:?}"),
        }
    }

    /// Fetches every endpoint over up to `parallelism` concurrent streams.
    pub fn do_get_all(&self, info: &FlightInfo, parallelism: usize, order: Reassembly) -> Result<(Dataset, TransferStats)> {
        if parallelism == 0 {
            return Err(FlightError::InvalidArgument("parallelism must be >= 1"));
        }
        let schema: SchemaRef = info.schema().into();
        let endpoints = info.endpoints();
        let n = endpoints.len();
        let streams = parallelism.min(n);
        let results: Vec<Mutex<Option<(Dataset, StreamStats)>>> = (0..n).map(|_| Mutex::new(None)).collect();
        let abort = AtomicBool::new(false);
        let first_error: Mutex<Option<FlightError>> = Mutex::new(None);
        let started = Instant::now();
        thread::scope(|s| {
            for w in 0..streams {
                let (results, abort, first_error, schema) = (&results, &abort, &first_error, &schema);
                s.spawn(move || {
                    for i in (w..n).step_by(streams) {
                        if abort.load(Ordering::SeqCst) {
                            return;
                        }
                        let t0 = Instant::now();
                        let got = self.do_get(&endpoints[i]).and_then(|d| {
                            if d.schema() != schema {
                                Err(FlightError::SchemaMismatch)
                            } else {
                                Ok(d)
                            }
                        });
                        match got {
                            Ok(d) => {
                                let stats = StreamStats {
                                    endpoint: i,
                                    records: d.total_records(),
                                    bytes: d.total_bytes(),
                                    elapsed_seconds: t0.elapsed().as_secs_f64(),
                                };
                                *results[i].lock().unwrap() = Some((d, stats));
                            }
                            Err(e) => {
                                abort.store(true, Ordering::SeqCst);
                                first_error.lock().unwrap().get_or_insert(e);
                                return;
                            }
                        }
                    }
                });
            }
        });
        let elapsed_seconds = started.elapsed().as_secs_f64();
        if let Some(e) = first_error.into_inner().unwrap() {
            return Err(e);
        }
        let (parts, per_stream): (Vec<Dataset>, Vec<StreamStats>) =
            results.into_iter().map(|m| m.into_inner().unwrap().expect("every endpoint fetched")).unzip();
        let batches = match order {
            Reassembly::Concatenate => parts.into_iter().flat_map(Dataset::into_batches).collect(),
            Reassembly::Interleave => interleave(parts),
        };
        let dataset = Dataset::try_new(schema, batches).expect("schemas checked");
        let stats = TransferStats {
            streams,
            records: dataset.total_records(),
            bytes: dataset.total_bytes(),
            elapsed_seconds,
            per_stream,
        };
        Ok((dataset, stats))
    }

    /// Uploads `batches` to `name` over `streams` connections: batch `k` goes to
    /// part `k % streams`, then one final request splices the parts, so the
    /// dataset appears whole or not at all.
    pub fn do_put_parallel(
        &self,
        name: &str,
        schema: &SchemaRef,
        batches: &[RecordBatch],
        streams: usize,
    ) -> Result<(PutResult, TransferStats)> {
        if streams == 0 {
            return Err(FlightError::InvalidArgument("streams must be >= 1"));
        }
        let started = Instant::now();
        let first_error: Mutex<Option<FlightError>> = Mutex::new(None);
        let per_stream: Vec<Mutex<Option<StreamStats>>> = (0..streams).map(|_| Mutex::new(None)).collect();
        thread::scope(|s| {
            for i in 0..streams {
                let (first_error, per_stream) = (&first_error, &per_stream);
                s.spawn(move || {
                    let t0 = Instant::now();
                    let mine: Vec<RecordBatch> = batches.iter().skip(i).step_by(streams).cloned().collect();
                    let d = FlightDescriptor::path([name, "part", &i.to_string()]);
                    match d.map_err(FlightError::from).and_then(|d| self.do_put(&d, schema, &mine)) {
                        Ok(r) => {
                            *per_stream[i].lock().unwrap() = Some(StreamStats {
                                endpoint: i,
                                records: r.records_received,
                                bytes: r.bytes_received,
                                elapsed_seconds: t0.elapsed().as_secs_f64(),
                            })
                        }
                        Err(e) => {
                            first_error.lock().unwrap().get_or_insert(e);
                        }
                    }
                });
            }
        });
        if let Some(e) = first_error.into_inner().unwrap() {
            return Err(e);
        }
        let assemble = FlightDescriptor::path([name, "assemble", &streams.to_string()])?;
        let result = self.do_put(&assemble, schema, &[]).map_err(|e| FlightError::AssembleFailed(Box::new(e)))?;
        let elapsed_seconds = started.elapsed().as_secs_f64();
        let stats = TransferStats {
            streams,
            records: result.records_received,
            bytes: result.bytes_received,
            elapsed_seconds,
            per_stream: per_stream.into_iter().map(|m| m.into_inner().unwrap().expect("stream finished")).collect(),
        };
        Ok((result, stats))
    }
}

fn interleave(parts: Vec<Dataset>) -> Vec<RecordBatch> {
    let mut iters: Vec<_> = parts.into_iter().map(|d| d.into_batches().into_iter()).collect();
    let mut out = Vec::new();
    loop {
        let before = out.len();
        for it in &mut iters {
            out.extend(it.next());
        }
        if out.len() == before {
            return out;
        }
    }
}
