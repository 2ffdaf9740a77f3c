// SPDX-License-Identifier: Apache-2.0

//! Parse a Verilog file and print its modules, ports and size metrics.
//!
//! ```text
//! cargo run --example parse_and_metrics [FILE.v]
//! ```

use std::path::PathBuf;

use rtlbench::frontend::{default_complexity, loc_count, parse, Direction};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/modules/uart_tx.v"));
    let source = std::fs::read_to_string(&path)?;
    let unit = parse(&source)?;

    for m in &unit.modules {
        let text = m.span.slice(&source);
        println!("module {} ({} LOC, complexity {})", m.name, loc_count(text), default_complexity(text));
        for p in &m.params {
            println!("  param {:<12} = {:?}", p.name, p.default);
        }
        for p in &m.ports {
            let dir = match p.direction {
                Direction::In => "input",
                Direction::Out => "output",
                Direction::Inout => "inout",
            };
            println!("  {dir:<6} {:<12} [{}]", p.name, p.width);
        }
    }
    Ok(())
}
