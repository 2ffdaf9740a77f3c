// SPDX-License-Identifier: Apache-2.0

//! Turn one project into masked-module tasks and print a prompt.
//!
//! ```text
//! cargo run --example build_tasks [SHUTTLE_DIR] [PROJECT]
//! ```

use std::path::PathBuf;

use rtlbench::corpus::{scan_corpus, ShuttleId};
use rtlbench::frontend::parse;
use rtlbench::preprocess::preprocess_project;
use rtlbench::taskgen::build_tasks;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus/tt01"));
    let project = args.next().unwrap_or_else(|| "tt_um_alu_calc".into());

    let records = scan_corpus(&root, &ShuttleId::new("tt01", 1))?;
    let record = records.iter().find(|r| r.project_id == project).ok_or("project not found")?;
    let merged = preprocess_project(record)?;
    let unit = parse(&merged.source)?;
    let tasks = build_tasks(&merged, &unit);

    for t in &tasks {
        assert_eq!(t.reconstruct(), merged.source);
        println!("{:<36} golden {} bytes", t.task_id, t.golden_source.len());
    }
    if let Some(t) = tasks.first() {
        println!("\n{}", t.prompt);
    }
    Ok(())
}
