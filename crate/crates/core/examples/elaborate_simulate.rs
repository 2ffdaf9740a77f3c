// SPDX-License-Identifier: Apache-2.0

//! Elaborate a module into an and-inverter graph and simulate it.
//!
//! ```text
//! cargo run --example elaborate_simulate [FILE.v] [TOP]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtlbench::frontend::parse;
use rtlbench::netlist::{elaborate, Bits, SimTrace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/modules/counter.v"));
    let source = std::fs::read_to_string(&path)?;
    let unit = parse(&source)?;
    let top = args.next().unwrap_or_else(|| unit.modules.last().map(|m| m.name.clone()).unwrap_or_default());
    let net = elaborate(&unit, &top, &BTreeMap::new())?;

    println!(
        "{top}: {} input bits, {} output bits, {} registers, {} AND gates",
        net.input_bit_count(),
        net.output_bit_count(),
        net.registers.len(),
        net.and_count()
    );
    for note in &net.notes {
        println!("note: {note}");
    }

    // Reset for the first cycle, random data afterwards.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut stimulus = SimTrace::default();
    for cycle in 0..12u64 {
        let mut row = BTreeMap::new();
        for p in &net.inputs {
            let name = p.name.to_ascii_lowercase();
            let reset = name.contains("rst") || name.contains("reset");
            let active_low = name.ends_with("_n") || name.ends_with("_b");
            let value = if reset {
                if (cycle == 0) != active_low { u64::MAX } else { 0 }
            } else {
                rng.gen()
            };
            row.insert(p.name.clone(), Bits::from_u64(value, p.bits.len()));
        }
        stimulus.cycles.push(row);
    }
    let outputs = net.simulate(&stimulus)?;
    let shown: BTreeSet<&String> = outputs.cycles.iter().flat_map(|c| c.keys()).collect();
    println!("outputs: {shown:?}\n{}", outputs.table());
    Ok(())
}
