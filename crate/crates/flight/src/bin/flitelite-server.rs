// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;
use flitelite::{Server, ServerConfig};
use flitelite_core::sample::{example_batch, example_schema};
use flitelite_core::Dataset;

/// Serve perf datasets, uploads and queries over TCP.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:31337")]
    listen: String,
    /// Endpoints advertised per dataset.
    #[arg(long, default_value_t = 1)]
    endpoints: usize,
    /// Rows per generated perf batch.
    #[arg(long, default_value_t = 4096)]
    batch_rows: u64,
    /// Largest accepted frame payload, in bytes.
    #[arg(long, default_value_t = flitelite::io::DEFAULT_FRAME_CAP)]
    frame_cap: usize,
    /// Preload the three-row example table under this name.
    #[arg(long, value_name = "NAME")]
    example_dataset: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let a = Args::parse();
    let config =
        ServerConfig { listen: a.listen, endpoint_count: a.endpoints, perf_batch_rows: a.batch_rows, frame_cap: a.frame_cap };
    let server = match Server::bind(config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("flitelite-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Some(name) = a.example_dataset {
        server.store().insert(name, Dataset::try_new(example_schema(), vec![example_batch()]).unwrap());
    }
    log::info!("listening on {}", server.local_addr());
    match server.serve() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flitelite-server: {e}");
            ExitCode::FAILURE
        }
    }
}
