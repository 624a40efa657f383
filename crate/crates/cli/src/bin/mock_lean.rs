//! Stand-in toolchain worker: answers the JSON-lines protocol on stdin /
//! stdout from the bundled fixtures, so the process pool can be exercised
//! without a Lean installation.

use std::io::{BufRead, BufWriter, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use forge_core::lean::mock::{MockFixtures, MockLean};
use forge_core::lean::protocol::{Request, Response};

#[derive(Parser)]
#[command(
    version,
    about = "Fixture-driven toolchain worker speaking the forge JSON-lines protocol"
)]
struct Args {
    /// Extra fixture file merged over the bundled set.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Sleep this long before answering each request.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let mut fixtures = MockFixtures::bundled();
    if let Some(path) = &args.fixtures {
        fixtures = fixtures.merge(MockFixtures::load(path)?);
    }
    let engine = MockLean::new(fixtures);
    let stdin = std::io::stdin();
    let mut out = BufWriter::new(std::io::stdout().lock());
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(req) => {
                if args.delay_ms > 0 {
                    std::thread::sleep(Duration::from_millis(args.delay_ms));
                }
                engine.handle(&req)
            }
            Err(e) => Response::failure(0, format!("bad request: {e}")),
        };
        serde_json::to_writer(&mut out, &response)?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    Ok(())
}
