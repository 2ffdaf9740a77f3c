// SPDX-License-Identifier: Apache-2.0

//! Scan a shuttle directory and print the filter verdict for every project.
//!
//! ```text
//! cargo run --example scan_corpus [SHUTTLE_DIR] [NAME] [ORDINAL]
//! ```

use std::path::PathBuf;

use rtlbench::corpus::{filter_project, scan_corpus, FilterVerdict, ShuttleId};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus/tt02"));
    let name = args.next().unwrap_or_else(|| "tt02".into());
    let ordinal = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2);

    let shuttle = ShuttleId::new(name, ordinal);
    for record in scan_corpus(&root, &shuttle)? {
        let verdict = match filter_project(&record) {
            FilterVerdict::Accept => "accept".to_string(),
            FilterVerdict::Reject(r) => format!("reject ({r})"),
        };
        println!("{:<24} {:<22} src={} tests={}", record.project_id, verdict, record.src_files.len(), record.test_files.len());
    }
    Ok(())
}
