// SPDX-License-Identifier: Apache-2.0

//! TCP server: dataset store, synthetic perf datasets and query execution.
//!
//! Tickets are UTF-8 and server-defined:
//!
//! * `perf:R#i` / `perf:R:E:B#i` - endpoint `i` of a synthetic dataset of `R`
//!   records split over `E` endpoints, generated in batches of `B` rows,
//! * `name#i` - every `E`-th batch of stored dataset `name`, starting at `i`,
//! * `q:<query text>` - the result of a query.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use flitelite_core::ipc::{schema_message, ErrorCode, ErrorPayload, MessageType, WireMessage};
use flitelite_core::perf::{endpoint_rows, perf_schema, PerfBatches, RECORD_BYTES};
use flitelite_core::query::{bind, parse_query, QueryError};
use flitelite_core::wire::{Observed, Payload};
use flitelite_core::{
    Dataset, Endpoint, FlightDescriptor, FlightInfo, Location, Peer, PutResult, RecordBatch, SchemaRef,
    SequenceValidator, Ticket,
};

use crate::io::{read_message, server_preamble, write_batch, write_message, FrameError, DEFAULT_FRAME_CAP};

/// Dataset name used by synthetic perf descriptors.
pub const PERF_PATH: &str = "perf";
const LOG_CAPACITY: usize = 4096;
const LINGER: Duration = Duration::from_secs(2);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub listen: String,
    /// Endpoints per dataset unless a perf descriptor overrides it.
    pub endpoint_count: usize,
    pub perf_batch_rows: u64,
    pub frame_cap: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: "127.0.0.1:0".into(),
            endpoint_count: 1,
            perf_batch_rows: 4096,
            frame_cap: DEFAULT_FRAME_CAP,
        }
    }
}

impl ServerConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.endpoint_count < 1 || self.endpoint_count > u16::MAX as usize {
            return Err("endpoint_count must be in 1..=65535");
        }
        if self.perf_batch_rows < 1 {
            return Err("perf_batch_rows must be >= 1");
        }
        Ok(())
    }
}

/// One completed command, as logged.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandRecord {
    pub command: &'static str,
    pub target: String,
    pub rows: u64,
    pub bytes: u64,
    pub seconds: f64,
}

/// Named datasets plus the staging area for parallel uploads. Readers
/// always see a whole dataset: replacement swaps one `Arc`.
#[derive(Debug, Default)]
pub struct Store {
    datasets: RwLock<BTreeMap<String, Arc<Dataset>>>,
    parts: Mutex<BTreeMap<(String, usize), Arc<Dataset>>>,
}

impl Store {
    pub fn get(&self, name: &str) -> Option<Arc<Dataset>> {
        self.datasets.read().unwrap().get(name).cloned()
    }

    pub fn insert(&self, name: impl Into<String>, d: Dataset) {
        self.datasets.write().unwrap().insert(name.into(), Arc::new(d));
    }

    pub fn names(&self) -> Vec<String> {
        self.datasets.read().unwrap().keys().cloned().collect()
    }

    fn snapshot(&self) -> Vec<(String, Arc<Dataset>)> {
        self.datasets.read().unwrap().iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }

    fn insert_part(&self, name: &str, index: usize, d: Dataset) {
        self.parts.lock().unwrap().insert((name.into(), index), Arc::new(d));
    }

    /// Splices parts `0..n` round-robin into `name`, removing them.
    fn assemble(&self, name: &str, n: usize, schema: &SchemaRef) -> Result<Arc<Dataset>, ErrorPayload> {
        let mut parts = self.parts.lock().unwrap();
        let mut taken = Vec::with_capacity(n);
        for i in 0..n {
            match parts.get(&(name.to_string(), i)) {
                Some(p) if p.schema() == schema => taken.push(p.clone()),
                Some(_) => return Err(ErrorPayload::new(ErrorCode::Malformed, format!("part {i} of `{name}` has a different schema"))),
                None => return Err(ErrorPayload::new(ErrorCode::NotFound, format!("part {i} of `{name}` not uploaded"))),
            }
        }
        let total: usize = taken.iter().map(|p| p.batches().len()).sum();
        let mut batches = Vec::with_capacity(total);
        for k in 0..total {
            match taken[k % n].batches().get(k / n) {
                Some(b) => batches.push(b.clone()),
                None => return Err(ErrorPayload::new(ErrorCode::Malformed, "part sizes are not a round-robin split")),
            }
        }
        for i in 0..n {
            parts.remove(&(name.to_string(), i));
        }
        let d = Arc::new(Dataset::try_new(schema.clone(), batches).expect("parts share the schema"));
        self.datasets.write().unwrap().insert(name.into(), d.clone());
        Ok(d)
    }
}

struct Shared {
    config: ServerConfig,
    location: Location,
    store: Store,
    log: Mutex<VecDeque<CommandRecord>>,
    shutdown: AtomicBool,
}

/// A bound, not yet serving, server.
pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Server {
    pub fn bind(config: ServerConfig) -> io::Result<Server> {
        config.validate().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        let addr = config
            .listen
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "listen address resolves to nothing"))?;
        let listener = TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        let host = if local.ip().is_unspecified() { "127.0.0.1".to_string() } else { authority_host(&local) };
        let location = Location::new(&host, local.port()).expect("valid location");
        let shared = Arc::new(Shared {
            config,
            location,
            store: Store::default(),
            log: Mutex::new(VecDeque::new()),
            shutdown: AtomicBool::new(false),
        });
        Ok(Server { listener, shared })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener")
    }

    pub fn store(&self) -> &Store {
        &self.shared.store
    }

    /// Accepts connections until shut down, one thread per connection.
    pub fn serve(self) -> io::Result<()> {
        for conn in self.listener.incoming() {
            if self.shared.shutdown.load(Ordering::SeqCst) {
                break;
            }
            let stream = match conn {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let shared = self.shared.clone();
            thread::spawn(move || {
                let peer = stream.peer_addr().ok();
                if let Err(e) = shared.handle_connection(stream) {
                    log::debug!("connection {peer:?} ended: {e}");
                }
            });
        }
        Ok(())
    }

    pub fn spawn(self) -> ServerHandle {
        let addr = self.local_addr();
        let shared = self.shared.clone();
        let thread = thread::spawn(move || {
            if let Err(e) = self.serve() {
                log::error!("server stopped: {e}");
            }
        });
        ServerHandle { addr, shared, thread: Some(thread) }
    }
}

fn authority_host(a: &SocketAddr) -> String {
    match a {
        SocketAddr::V4(v4) => v4.ip().to_string(),
        SocketAddr::V6(v6) => format!("[{}]", v6.ip()),
    }
}

/// A server running on a background thread; stops on drop.
pub struct ServerHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn store(&self) -> &Store {
        &self.shared.store
    }

    pub fn config(&self) -> &ServerConfig {
        &self.shared.config
    }

    pub fn command_log(&self) -> Vec<CommandRecord> {
        self.shared.log.lock().unwrap().iter().cloned().collect()
    }

    pub fn handle_get_flight_info(&self, d: &FlightDescriptor) -> Result<FlightInfo, ErrorPayload> {
        self.shared.get_flight_info(d)
    }

    pub fn handle_list_flights(&self) -> Vec<FlightInfo> {
        self.shared.list_flights()
    }

    pub fn shutdown(&mut self) {
        if let Some(t) = self.thread.take() {
            self.shared.shutdown.store(true, Ordering::SeqCst);
            // unblock accept()
            let _ = TcpStream::connect(self.addr);
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn not_found(what: impl std::fmt::Display) -> ErrorPayload {
    ErrorPayload::new(ErrorCode::NotFound, format!("no such flight: {what}"))
}

fn malformed(what: impl std::fmt::Display) -> ErrorPayload {
    ErrorPayload::new(ErrorCode::Malformed, what.to_string())
}

fn query_error(e: QueryError) -> ErrorPayload {
    ErrorPayload::new(ErrorCode::QueryError, e.to_string())
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PerfSpec {
    records: u64,
    endpoints: usize,
    batch_rows: u64,
    explicit: bool,
}

impl PerfSpec {
    fn ticket(&self, i: usize) -> Ticket {
        let t = if self.explicit {
            format!("perf:{}:{}:{}#{i}", self.records, self.endpoints, self.batch_rows)
        } else {
            format!("perf:{}#{i}", self.records)
        };
        Ticket::new(t).unwrap()
    }
}

enum PutTarget {
    Replace(String),
    Part(String, usize),
    Assemble(String, usize),
}

impl PutTarget {
    fn parse(d: &FlightDescriptor) -> Result<PutTarget, ErrorPayload> {
        let FlightDescriptor::Path(p) = d else {
            return Err(malformed("DoPut needs a path descriptor"));
        };
        if !is_identifier(&p[0]) {
            return Err(malformed(format!("dataset name `{}` is not an identifier", p[0])));
        }
        let name = p[0].clone();
        match p.len() {
            1 => Ok(PutTarget::Replace(name)),
            3 => {
                let n: usize = p[2].parse().map_err(|_| malformed("part index must be a decimal number"))?;
                match p[1].as_str() {
                    "part" => Ok(PutTarget::Part(name, n)),
                    "assemble" if n >= 1 => Ok(PutTarget::Assemble(name, n)),
                    _ => Err(malformed("expected [name], [name, part, i] or [name, assemble, n]")),
                }
            }
            _ => Err(malformed("expected [name], [name, part, i] or [name, assemble, n]")),
        }
    }
}

/// What a ticket streams.
enum Source {
    Perf(PerfBatches),
    Batches(Vec<RecordBatch>),
}

enum Failure {
    /// Answer with ERROR, then close.
    Reply(ErrorPayload),
    /// The connection is unusable.
    Io(FrameError),
}

impl From<ErrorPayload> for Failure {
    fn from(e: ErrorPayload) -> Self {
        Failure::Reply(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(FrameError::Io(e))
    }
}

impl From<FrameError> for Failure {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::FrameTooLarge { .. } | FrameError::UnknownType(_) => Failure::Reply(malformed(e)),
            other => Failure::Io(other),
        }
    }
}

type Reader = BufReader<TcpStream>;
type Writer = BufWriter<TcpStream>;

impl Shared {
    fn record(&self, command: &'static str, target: String, rows: u64, bytes: u64, started: Instant) {
        let seconds = started.elapsed().as_secs_f64();
        log::info!("{command} {target} rows={rows} bytes={bytes} seconds={seconds:.6}");
        let mut log = self.log.lock().unwrap();
        if log.len() == LOG_CAPACITY {
            log.pop_front();
        }
        log.push_back(CommandRecord { command, target, rows, bytes, seconds });
    }

    fn endpoint(&self, ticket: Ticket) -> Endpoint {
        Endpoint::new(ticket, vec![self.location.clone()]).unwrap()
    }

    fn parse_perf_path(&self, segments: &[String]) -> Result<PerfSpec, ErrorPayload> {
        let num = |s: &String, what: &str| s.parse::<u64>().map_err(|_| malformed(format!("perf {what} `{s}` is not a number")));
        let records = num(&segments[1], "record count")?;
        let mut spec = PerfSpec {
            records,
            endpoints: self.config.endpoint_count,
            batch_rows: self.config.perf_batch_rows,
            explicit: segments.len() > 2,
        };
        if let Some(e) = segments.get(2) {
            spec.endpoints = num(e, "endpoint count")? as usize;
        }
        if let Some(b) = segments.get(3) {
            spec.batch_rows = num(b, "batch rows")?;
        }
        if spec.endpoints < 1 || spec.endpoints > u16::MAX as usize || spec.batch_rows < 1 || segments.len() > 4 {
            return Err(malformed("perf path is [perf, records[, endpoints[, batch_rows]]] with counts >= 1"));
        }
        Ok(spec)
    }

    fn dataset_info(&self, name: &str, d: &Dataset) -> FlightInfo {
        let endpoints = (0..self.config.endpoint_count)
            .map(|i| self.endpoint(Ticket::new(format!("{name}#{i}")).unwrap()))
            .collect();
        FlightInfo::new(d.schema(), endpoints, d.total_records() as i64, d.total_bytes() as i64).unwrap()
    }

    fn get_flight_info(&self, d: &FlightDescriptor) -> Result<FlightInfo, ErrorPayload> {
        match d {
            FlightDescriptor::Path(p) if p[0] == PERF_PATH && p.len() >= 2 => {
                let spec = self.parse_perf_path(p)?;
                let endpoints = (0..spec.endpoints).map(|i| self.endpoint(spec.ticket(i))).collect();
                let bytes = spec.records.checked_mul(RECORD_BYTES).ok_or_else(|| malformed("perf size overflows"))?;
                FlightInfo::new(&perf_schema(), endpoints, spec.records as i64, bytes as i64).map_err(malformed)
            }
            FlightDescriptor::Path(p) if p.len() == 1 => match self.store.get(&p[0]) {
                Some(ds) => Ok(self.dataset_info(&p[0], &ds)),
                None => Err(not_found(d)),
            },
            FlightDescriptor::Path(_) => Err(not_found(d)),
            FlightDescriptor::Cmd(cmd) => {
                let text = std::str::from_utf8(cmd).map_err(|_| malformed("query is not UTF-8"))?;
                let ast = parse_query(text).map_err(query_error)?;
                let ds = self.store.get(&ast.source).ok_or_else(|| query_error(QueryError::UnknownDataset(ast.source.clone())))?;
                let q = bind(&ast, ds.schema()).map_err(query_error)?;
                let ticket = Ticket::new(format!("q:{text}")).unwrap();
                FlightInfo::new(q.output_schema(), vec![self.endpoint(ticket)], -1, -1).map_err(malformed)
            }
        }
    }

    fn list_flights(&self) -> Vec<FlightInfo> {
        self.store.snapshot().iter().map(|(name, d)| self.dataset_info(name, d)).collect()
    }

    fn open_ticket(&self, t: &Ticket) -> Result<(SchemaRef, Source), ErrorPayload> {
        let text = std::str::from_utf8(t.as_bytes()).map_err(|_| malformed("ticket is not UTF-8"))?;
        if let Some(query) = text.strip_prefix("q:") {
            let ast = parse_query(query).map_err(query_error)?;
            let ds = self.store.get(&ast.source).ok_or_else(|| query_error(QueryError::UnknownDataset(ast.source.clone())))?;
            let q = bind(&ast, ds.schema()).map_err(query_error)?;
            let out = q.execute(ds.batches()).collect();
            return Ok((q.output_schema().clone(), Source::Batches(out)));
        }
        let (name, index) = text.rsplit_once('#').ok_or_else(|| not_found(text))?;
        let index: usize = index.parse().map_err(|_| not_found(text))?;
        if let Some(spec) = name.strip_prefix("perf:") {
            let mut segments = vec![PERF_PATH.to_string()];
            segments.extend(spec.split(':').map(String::from));
            if segments.len() != 2 && segments.len() != 4 {
                return Err(not_found(text));
            }
            let spec = self.parse_perf_path(&segments)?;
            if index >= spec.endpoints {
                return Err(not_found(text));
            }
            let rows = endpoint_rows(spec.records, spec.endpoints as u64, index as u64);
            let batches = PerfBatches::new(rows, spec.batch_rows);
            return Ok((batches.schema().clone(), Source::Perf(batches)));
        }
        let ds = self.store.get(name).ok_or_else(|| not_found(text))?;
        let e = self.config.endpoint_count;
        if index >= e {
            return Err(not_found(text));
        }
        let batches = ds.batches().iter().skip(index).step_by(e).cloned().collect();
        Ok((ds.schema().clone(), Source::Batches(batches)))
    }

    fn handle_connection(&self, stream: TcpStream) -> Result<(), FrameError> {
        stream.set_nodelay(true)?;
        let mut raw = &stream;
        if let Err(e) = server_preamble(&mut raw) {
            log::debug!("closing connection: {e}");
            return Ok(());
        }
        let mut reader = BufReader::with_capacity(1 << 16, stream.try_clone()?);
        let mut writer = BufWriter::with_capacity(1 << 16, stream.try_clone()?);
        let mut validator = SequenceValidator::new();
        loop {
            let m = match read_message(&mut reader, self.config.frame_cap) {
                Ok(m) => m,
                Err(FrameError::ConnectionClosed) => return Ok(()),
                Err(e) => match Failure::from(e) {
                    Failure::Reply(err) => return self.fail(&stream, reader, writer, &mut validator, err),
                    Failure::Io(e) => return Err(e),
                },
            };
            let outcome = match validator.observe(Peer::Client, &m) {
                Ok(Observed::GetFlightInfo(d)) => {
                    let started = Instant::now();
                    self.get_flight_info(&d).map_err(Failure::Reply).and_then(|info| {
                        let reply = info.to_message(MessageType::FlightInfo).expect("encodable info");
                        self.reply(&mut writer, &mut validator, &reply)?;
                        self.record("GetFlightInfo", d.to_string(), 0, 0, started);
                        Ok(())
                    })
                }
                Ok(Observed::DoGet(t)) => self.do_get(&t, &mut writer, &mut validator),
                Ok(Observed::DoPut(d)) => self.do_put(&d, &mut reader, &mut writer, &mut validator),
                Ok(Observed::ListFlights) => self.do_list(&mut writer, &mut validator),
                Ok(other) => unreachable!("validator accepted {other:?} from an idle client"),
                Err(v) => Err(Failure::Reply(malformed(v))),
            };
            match outcome {
                Ok(()) => {}
                Err(Failure::Reply(err)) => return self.fail(&stream, reader, writer, &mut validator, err),
                Err(Failure::Io(e)) => return Err(e),
            }
        }
    }

    fn reply(&self, w: &mut Writer, v: &mut SequenceValidator, m: &WireMessage) -> Result<(), Failure> {
        v.observe(Peer::Server, m).expect("server reply follows the protocol");
        write_message(w, m)?;
        w.flush()?;
        Ok(())
    }

    /// Sends ERROR, then drains the peer briefly so the error is not lost to a reset.
    fn fail(
        &self,
        stream: &TcpStream,
        mut reader: Reader,
        mut writer: Writer,
        v: &mut SequenceValidator,
        err: ErrorPayload,
    ) -> Result<(), FrameError> {
        log::info!("ERROR {err}");
        let m = err.to_message();
        let _ = v.observe(Peer::Server, &m);
        write_message(&mut writer, &m)?;
        writer.flush()?;
        let _ = stream.shutdown(std::net::Shutdown::Write);
        let _ = stream.set_read_timeout(Some(LINGER));
        let _ = io::copy(&mut (&mut reader).take(self.config.frame_cap as u64), &mut io::sink());
        Ok(())
    }

    fn do_get(&self, t: &Ticket, w: &mut Writer, v: &mut SequenceValidator) -> Result<(), Failure> {
        let started = Instant::now();
        let (schema, source) = self.open_ticket(t)?;
        let sm = schema_message(&schema).map_err(malformed)?;
        v.observe(Peer::Server, &sm).expect("schema reply");
        write_message(w, &sm)?;
        let (mut rows, mut bytes) = (0u64, 0u64);
        let mut send = |b: &RecordBatch| -> io::Result<()> {
            // Outgoing batches come from the encoder and are not re-validated.
            write_batch(w, b)?;
            rows += b.num_rows() as u64;
            bytes += b.byte_size() as u64;
            Ok(())
        };
        match source {
            Source::Perf(gen) => gen.into_iter().try_for_each(|b| send(&b))?,
            Source::Batches(batches) => batches.iter().try_for_each(&mut send)?,
        }
        self.reply(w, v, &WireMessage::empty(MessageType::Eos))?;
        self.record("DoGet", t.to_string(), rows, bytes, started);
        Ok(())
    }

    fn do_put(
        &self,
        d: &FlightDescriptor,
        r: &mut Reader,
        w: &mut Writer,
        v: &mut SequenceValidator,
    ) -> Result<(), Failure> {
        let started = Instant::now();
        let target = PutTarget::parse(d)?;
        let mut schema = None;
        let mut batches = Vec::new();
        loop {
            let m = read_message(r, self.config.frame_cap)?;
            match v.observe(Peer::Client, &m).map_err(malformed)? {
                Observed::Schema(s) => schema = Some(s),
                Observed::Batch(b) => batches.push(b),
                Observed::Eos => break,
                other => unreachable!("validator accepted {other:?} in DoPut"),
            }
        }
        let schema = schema.expect("validator requires a schema before EOS");
        let dataset = Dataset::try_new(schema.clone(), batches).expect("batches decoded against the stream schema");
        let mut result = PutResult::new(dataset.total_records(), dataset.total_bytes());
        match target {
            PutTarget::Replace(name) => self.store.insert(name, dataset),
            PutTarget::Part(name, i) => self.store.insert_part(&name, i, dataset),
            PutTarget::Assemble(name, n) => {
                if !dataset.batches().is_empty() {
                    return Err(malformed("assemble carries no batches").into());
                }
                let d = self.store.assemble(&name, n, &schema)?;
                result = PutResult::new(d.total_records(), d.total_bytes());
            }
        }
        let reply = result.to_message(MessageType::PutResult).unwrap();
        self.reply(w, v, &reply)?;
        self.record("DoPut", d.to_string(), result.records_received, result.bytes_received, started);
        Ok(())
    }

    fn do_list(&self, w: &mut Writer, v: &mut SequenceValidator) -> Result<(), Failure> {
        let started = Instant::now();
        let infos = self.list_flights();
        for info in &infos {
            let m = info.to_message(MessageType::FlightInfo).unwrap();
            v.observe(Peer::Server, &m).expect("flight info reply");
            write_message(w, &m)?;
        }
        self.reply(w, v, &WireMessage::empty(MessageType::Eos))?;
        self.record("ListFlights", format!("{} flights", infos.len()), 0, 0, started);
        Ok(())
    }
}
