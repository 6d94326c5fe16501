// SPDX-License-Identifier: Apache-2.0

mod common;

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use flitelite_core::ipc::{encode_batch, ErrorCode, ErrorPayload, MessageType, WireMessage};
use flitelite_core::sample::example_batch;
use flitelite_core::wire::validate_session;
use flitelite_core::{FlightDescriptor, Peer};

use common::{recorded_sessions, server, type_mutations, Raw};

#[test]
fn recorded_sessions_validate() {
    let sessions = recorded_sessions();
    assert!(sessions.len() >= 15, "only {} sessions", sessions.len());
    for s in &sessions {
        validate_session(s.iter()).unwrap_or_else(|e| panic!("{e}: {:?}", s.iter().map(|(p, m)| (p, m.msg_type)).collect::<Vec<_>>()));
    }
    let errors = sessions.iter().filter(|s| s.iter().any(|(_, m)| m.msg_type == MessageType::Error)).count();
    assert_eq!(errors, 5);
    assert!(sessions.iter().any(|s| s.len() > 10));
    assert!(sessions.iter().any(|s| s.iter().filter(|(p, _)| *p == Peer::Client).count() >= 7));
}

#[test]
fn type_mutations_rejected() {
    let mutants = type_mutations(&recorded_sessions());
    assert!(mutants.len() >= 500, "{} cases", mutants.len());
    for m in &mutants {
        assert!(
            validate_session(m.iter()).is_err(),
            "accepted {:?}",
            m.iter().map(|(p, m)| (p, m.msg_type)).collect::<Vec<_>>()
        );
    }
}

#[test]
fn truncated_sessions_are_incomplete() {
    for s in recorded_sessions() {
        let last_idle = s.len();
        for cut in 1..last_idle {
            let prefix = &s[..cut];
            // a prefix is valid only if it ends between commands
            let complete = matches!(prefix.last().unwrap().1.msg_type, MessageType::PutResult | MessageType::Eos | MessageType::Error)
                && prefix.last().unwrap().0 == Peer::Server
                || matches!(prefix.last().unwrap().1.msg_type, MessageType::FlightInfo)
                    && !prefix.iter().any(|(_, m)| m.msg_type == MessageType::ListFlights);
            if !complete {
                assert!(validate_session(prefix.iter()).is_err());
            }
        }
    }
}

#[test]
fn server_rejects_out_of_order_client() {
    let h = server(1);
    let mut raw = Raw::connect(&h.addr().to_string());
    raw.send(&encode_batch(&example_batch()));
    let reply = raw.recv().unwrap();
    assert_eq!(reply.msg_type, MessageType::Error);
    assert_eq!(ErrorPayload::decode(&reply.payload).unwrap().code, ErrorCode::Malformed);
    assert!(raw.recv().is_none(), "connection must close after ERROR");
}

#[test]
fn server_rejects_bad_payload() {
    let h = server(1);
    let mut raw = Raw::connect(&h.addr().to_string());
    raw.send(&WireMessage::new(MessageType::GetFlightInfo, vec![7u8, 0, 0]));
    let reply = raw.recv().unwrap();
    assert_eq!(ErrorPayload::decode(&reply.payload).unwrap().code, ErrorCode::Malformed);
}

#[test]
fn server_rejects_unknown_frame_type() {
    let h = server(1);
    let mut raw = Raw::connect(&h.addr().to_string());
    raw.0.write_all(&[0, 0, 0, 0, 0x7f]).unwrap();
    let reply = raw.recv().unwrap();
    assert_eq!(ErrorPayload::decode(&reply.payload).unwrap().code, ErrorCode::Malformed);
}

#[test]
fn server_rejects_oversized_frame() {
    let config = flitelite::ServerConfig { frame_cap: 1024, ..Default::default() };
    let h = flitelite::Server::bind(config).unwrap().spawn();
    let mut raw = Raw::connect(&h.addr().to_string());
    raw.0.write_all(&[0, 0, 1, 0, 0x13]).unwrap();
    let reply = raw.recv().unwrap();
    assert_eq!(reply.msg_type, MessageType::Error);
}

#[test]
fn bad_preamble_gets_no_reply() {
    let h = server(1);
    let mut s = TcpStream::connect(h.addr()).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    s.write_all(b"GET / HTTP/1.1\r\n\r\n").unwrap();
    let mut buf = Vec::new();
    let _ = s.read_to_end(&mut buf);
    assert!(buf.is_empty());
}

#[test]
fn error_mid_put_reaches_client() {
    // part index that is not a number fails after the request, before the schema
    let h = server(1);
    let c = flitelite::Client::new(h.addr().to_string());
    let d = FlightDescriptor::path(["t", "part", "x"]).unwrap();
    let batches: Vec<_> = (0..2000).map(|_| example_batch()).collect();
    let err = c.do_put(&d, &flitelite_core::sample::example_schema(), &batches).unwrap_err();
    assert_eq!(err.server_code(), Some(ErrorCode::Malformed));
}

#[test]
fn error_payload_is_text() {
    let h = server(1);
    let c = flitelite::Client::new(h.addr().to_string());
    let err = c.get_flight_info(&FlightDescriptor::path(["nope"]).unwrap()).unwrap_err();
    match err {
        flitelite::FlightError::Server(e) => {
            assert_eq!(e.code, ErrorCode::NotFound);
            assert!(e.message.contains("nope"));
        }
        other => panic!("{other}"),
    }
}
