// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Write a golden corpus of frame streams with JSON expectations.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// Output directory.
    #[arg(long, default_value = "golden")]
    out: PathBuf,
    /// Number of random cases (three fixed cases are always added).
    #[arg(long, default_value_t = 60)]
    cases: usize,
    #[arg(long, default_value_t = 20240607)]
    seed: u64,
}

fn main() -> ExitCode {
    let a = Args::parse();
    match flitelite::dump::write_corpus(&a.out, a.cases, a.seed) {
        Ok(files) => {
            println!("wrote {} cases to {}", files.len(), a.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("flitelite-dump: {e}");
            ExitCode::FAILURE
        }
    }
}
