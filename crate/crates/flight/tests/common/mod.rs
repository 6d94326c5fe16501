// SPDX-License-Identifier: Apache-2.0

//! Shared fixtures: servers, a frame-recording proxy and session corpora.

#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use flitelite::io::{read_message, write_message, DEFAULT_FRAME_CAP};
use flitelite::{Client, Reassembly, Server, ServerConfig, ServerHandle};
use flitelite_core::ipc::{schema_message, MessageType, WireMessage};
use flitelite_core::sample::{example_batch, example_schema};
use flitelite_core::wire::{Payload, PREAMBLE};
use flitelite_core::{Dataset, Endpoint, FlightDescriptor, FlightInfo, Location, Peer, Ticket};

pub fn server(endpoints: usize) -> ServerHandle {
    let config = ServerConfig { endpoint_count: endpoints, ..Default::default() };
    Server::bind(config).unwrap().spawn()
}

pub fn table1() -> Dataset {
    Dataset::try_new(example_schema(), vec![example_batch()]).unwrap()
}

pub type Session = Vec<(Peer, WireMessage)>;

/// Forwards connections to `upstream`, recording every frame per connection.
pub struct Recorder {
    pub addr: String,
    sessions: Arc<Mutex<Vec<Arc<Mutex<Session>>>>>,
    active: Arc<AtomicUsize>,
}

fn pump(mut from: TcpStream, mut to: TcpStream, peer: Peer, log: Arc<Mutex<Session>>) {
    loop {
        let m = match read_message(&mut from, DEFAULT_FRAME_CAP) {
            Ok(m) => m,
            Err(_) => break,
        };
        log.lock().unwrap().push((peer, m.clone()));
        if write_message(&mut to, &m).and_then(|_| to.flush()).is_err() {
            break;
        }
    }
    let _ = to.shutdown(Shutdown::Write);
}

impl Recorder {
    pub fn new(upstream: std::net::SocketAddr) -> Recorder {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        let sessions: Arc<Mutex<Vec<Arc<Mutex<Session>>>>> = Arc::default();
        let active = Arc::new(AtomicUsize::new(0));
        let (s2, a2) = (sessions.clone(), active.clone());
        thread::spawn(move || {
            for client in listener.incoming().flatten() {
                let (sessions, active) = (s2.clone(), a2.clone());
                active.fetch_add(1, Ordering::SeqCst);
                thread::spawn(move || {
                    let mut client = client;
                    let mut upstream = TcpStream::connect(upstream).unwrap();
                    let mut pre = [0u8; 5];
                    if client.read_exact(&mut pre).is_ok() && upstream.write_all(&pre).is_ok() {
                        if upstream.read_exact(&mut pre).is_ok() && client.write_all(&pre).is_ok() {
                            let log: Arc<Mutex<Session>> = Arc::default();
                            sessions.lock().unwrap().push(log.clone());
                            let (c2, u2) = (client.try_clone().unwrap(), upstream.try_clone().unwrap());
                            let l2 = log.clone();
                            let up = thread::spawn(move || pump(c2, u2, Peer::Client, l2));
                            pump(upstream, client, Peer::Server, log);
                            let _ = up.join();
                        }
                    }
                    active.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        Recorder { addr, sessions, active }
    }

    /// Completed sessions so far, in connection order.
    pub fn sessions(&self) -> Vec<Session> {
        let deadline = Instant::now() + Duration::from_secs(10);
        while self.active.load(Ordering::SeqCst) > 0 && Instant::now() < deadline {
            thread::sleep(Duration::from_millis(5));
        }
        self.sessions.lock().unwrap().iter().map(|s| s.lock().unwrap().clone()).collect()
    }
}

/// Raw connection for hand-driven sessions.
pub struct Raw(pub TcpStream);

impl Raw {
    pub fn connect(addr: &str) -> Raw {
        let mut s = TcpStream::connect(addr).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        s.write_all(&PREAMBLE).unwrap();
        let mut echo = [0u8; 5];
        s.read_exact(&mut echo).unwrap();
        assert_eq!(echo, PREAMBLE);
        Raw(s)
    }

    pub fn send(&mut self, m: &WireMessage) {
        write_message(&mut self.0, m).unwrap();
    }

    pub fn recv(&mut self) -> Option<WireMessage> {
        read_message(&mut self.0, DEFAULT_FRAME_CAP).ok()
    }
}

/// The same flight with every endpoint pointing at `addr`.
pub fn relocated(info: &FlightInfo, addr: &str) -> FlightInfo {
    let loc = Location::parse(&format!("fltl://{addr}")).unwrap();
    let endpoints = info.endpoints().iter().map(|e| Endpoint::new(e.ticket().clone(), vec![loc.clone()]).unwrap()).collect();
    FlightInfo::new(&info.schema(), endpoints, info.total_records(), info.total_bytes()).unwrap()
}

/// A corpus of correct sessions recorded from live traffic: every command,
/// successes and server errors, several commands per connection.
pub fn recorded_sessions() -> Vec<Session> {
    let h = server(2);
    h.store().insert("t", table1());
    let rec = Recorder::new(h.addr());
    let c = Client::new(rec.addr.clone());

    let perf = c.get_flight_info(&FlightDescriptor::path(["perf", "3000", "2", "700"]).unwrap()).unwrap();
    c.do_get_all(&relocated(&perf, &rec.addr), 2, Reassembly::Concatenate).unwrap();
    c.list_flights().unwrap();
    c.do_put(&FlightDescriptor::path(["u"]).unwrap(), &example_schema(), &[example_batch(), example_batch()]).unwrap();
    let t = c.get_flight_info(&FlightDescriptor::path(["t"]).unwrap()).unwrap();
    c.do_get_all(&relocated(&t, &rec.addr), 2, Reassembly::Interleave).unwrap();
    let q = c.get_flight_info(&FlightDescriptor::cmd("SELECT Y FROM t WHERE Z > 1.0").unwrap()).unwrap();
    c.do_get(&relocated(&q, &rec.addr).endpoints()[0]).unwrap();
    c.do_put(&FlightDescriptor::path(["empty"]).unwrap(), &example_schema(), &[]).unwrap();
    c.do_put_parallel("par", &example_schema(), &[example_batch(), example_batch(), example_batch()], 2).unwrap();
    c.list_flights().unwrap();

    // server errors
    assert!(c.get_flight_info(&FlightDescriptor::path(["missing"]).unwrap()).is_err());
    assert!(c.get_flight_info(&FlightDescriptor::cmd("SELECT FROM t").unwrap()).is_err());
    assert!(c.do_get(&Endpoint::new(Ticket::new("missing#0").unwrap(), vec![Location::parse(&format!("fltl://{}", rec.addr)).unwrap()]).unwrap()).is_err());
    assert!(c.do_put(&FlightDescriptor::path(["w", "assemble", "2"]).unwrap(), &example_schema(), &[]).is_err());

    // several commands on one connection
    let mut raw = Raw::connect(&rec.addr);
    raw.send(&FlightDescriptor::path(["t"]).unwrap().to_message(MessageType::GetFlightInfo).unwrap());
    let info = raw.recv().unwrap();
    let info = FlightInfo::decode(&info.payload).unwrap();
    raw.send(&info.endpoints()[1].ticket().to_message(MessageType::DoGet).unwrap());
    while raw.recv().unwrap().msg_type != MessageType::Eos {}
    raw.send(&WireMessage::empty(MessageType::ListFlights));
    while raw.recv().unwrap().msg_type != MessageType::Eos {}
    raw.send(&FlightDescriptor::path(["v"]).unwrap().to_message(MessageType::DoPut).unwrap());
    raw.send(&schema_message(&example_schema()).unwrap());
    raw.send(&flitelite_core::ipc::encode_batch(&example_batch()));
    raw.send(&WireMessage::empty(MessageType::Eos));
    assert_eq!(raw.recv().unwrap().msg_type, MessageType::PutResult);
    drop(raw);
    let mut raw = Raw::connect(&rec.addr);
    raw.send(&WireMessage::empty(MessageType::ListFlights));
    while raw.recv().unwrap().msg_type != MessageType::Eos {}
    raw.send(&FlightDescriptor::path(["gone"]).unwrap().to_message(MessageType::GetFlightInfo).unwrap());
    assert_eq!(raw.recv().unwrap().msg_type, MessageType::Error);
    drop(raw);

    rec.sessions()
}

/// Every single-message type substitution of every session that completes
/// without ERROR. A request answered only by ERROR stays a correct session
/// when retyped to another request with the same payload layout, so those
/// sessions seed no fault cases.
pub fn type_mutations(sessions: &[Session]) -> Vec<Session> {
    let mut out = Vec::new();
    for s in sessions.iter().filter(|s| s.iter().all(|(_, m)| m.msg_type != MessageType::Error)) {
        for i in 0..s.len() {
            for t in MessageType::ALL {
                if t != s[i].1.msg_type {
                    let mut m = s.clone();
                    m[i].1 = WireMessage::new(t, m[i].1.payload.clone());
                    out.push(m);
                }
            }
        }
    }
    out
}

/// Physical cores on Linux (distinct core ids per package), else logical CPUs.
pub fn physical_cores() -> usize {
    if let Ok(info) = std::fs::read_to_string("/proc/cpuinfo") {
        let mut cores = std::collections::BTreeSet::new();
        let mut package = "";
        for line in info.lines() {
            if let Some((k, v)) = line.split_once(':') {
                match k.trim() {
                    "physical id" => package = v.trim(),
                    "core id" => {
                        cores.insert((package.to_string(), v.trim().to_string()));
                    }
                    _ => {}
                }
            }
        }
        if !cores.is_empty() {
            return cores.len();
        }
    }
    thread::available_parallelism().map_or(1, |n| n.get())
}
