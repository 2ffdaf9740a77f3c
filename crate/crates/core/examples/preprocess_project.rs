// SPDX-License-Identifier: Apache-2.0

//! Merge a multi-file project into one design and show where lines came from.
//!
//! ```text
//! cargo run --example preprocess_project [SHUTTLE_DIR] [PROJECT]
//! ```

use std::path::PathBuf;

use rtlbench::corpus::{scan_corpus, ShuttleId};
use rtlbench::preprocess::preprocess_project;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus/tt01"));
    let project = args.next().unwrap_or_else(|| "tt_um_alu_calc".into());

    let records = scan_corpus(&root, &ShuttleId::new("local", 0))?;
    let record = records
        .iter()
        .find(|r| r.project_id == project)
        .ok_or_else(|| format!("no project {project} under {}", root.display()))?;
    let merged = preprocess_project(record)?;

    for (i, line) in merged.source.lines().enumerate() {
        let origin = merged
            .origin_map
            .get(i)
            .map(|o| format!("{}:{}", o.file, o.line))
            .unwrap_or_default();
        println!("{:>4} {:<28} {line}", i + 1, origin);
    }
    Ok(())
}
