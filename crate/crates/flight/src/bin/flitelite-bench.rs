// SPDX-License-Identifier: Apache-2.0

use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use flitelite::bench::{emit_csv, run, serve_sink, BenchConfig, BenchError, Mode, ServerTarget};

/// DoGet/DoPut throughput sweeps and a raw-TCP baseline; prints CSV.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long, default_value = "get")]
    mode: Mode,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    streams: Vec<usize>,
    /// Records per stream.
    #[arg(long, value_delimiter = ',', default_value = "100000")]
    records: Vec<u64>,
    /// Rows per perf batch; 4 MiB frames by default.
    #[arg(long, default_value_t = 131_072)]
    batch_rows: u64,
    /// Use a running server (or, for tcp-baseline, a running sink).
    #[arg(long, value_name = "HOST:PORT", conflicts_with = "spawn")]
    server: Option<String>,
    /// Run the server in-process (default).
    #[arg(long)]
    spawn: bool,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Also write the CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Only run a byte sink on this address, for remote tcp-baseline runs.
    #[arg(long, value_name = "ADDR", exclusive = true)]
    sink_listen: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let a = Args::parse();
    if let Some(addr) = a.sink_listen {
        return match TcpListener::bind(&addr) {
            Ok(l) => {
                eprintln!("sink listening on {addr}");
                serve_sink(l);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("flitelite-bench: {e}");
                ExitCode::FAILURE
            }
        };
    }
    let mut streams = a.streams;
    streams.sort_unstable();
    streams.dedup();
    let mut records = a.records;
    records.sort_unstable();
    records.dedup();
    let config = BenchConfig {
        mode: a.mode,
        streams,
        records_per_stream: records,
        records_per_batch: a.batch_rows,
        server: a.server.map_or(ServerTarget::Spawn, ServerTarget::Address),
        repetitions: a.reps,
    };
    match run(&config) {
        Ok(report) => {
            let text = emit_csv(&report);
            print!("{text}");
            if let Some(path) = a.csv {
                if let Err(e) = std::fs::write(&path, &text) {
                    eprintln!("flitelite-bench: writing {}: {e}", path.display());
                    return ExitCode::FAILURE;
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("flitelite-bench: {e}");
            ExitCode::from(match e {
                BenchError::Config(_) => 2,
                BenchError::Verification(_) => 3,
                _ => 1,
            })
        }
    }
}
