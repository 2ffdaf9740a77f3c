// SPDX-License-Identifier: Apache-2.0

//! Score candidate completions for one fixture task: the golden module, a
//! fenced variant with a bug, and a response that does not parse.
//!
//! ```text
//! cargo run --example evaluate_candidate
//! ```

use std::path::PathBuf;

use rtlbench::corpus::{scan_corpus, ShuttleId};
use rtlbench::equiv::{evaluate_candidate, strip_fences, EquivConfig, Stx};
use rtlbench::frontend::parse;
use rtlbench::preprocess::preprocess_project;
use rtlbench::taskgen::build_tasks;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus/tt01");
    let records = scan_corpus(&root, &ShuttleId::new("tt01", 1))?;
    let record = records.iter().find(|r| r.project_id == "tt_um_blinky").ok_or("fixture missing")?;
    let merged = preprocess_project(record)?;
    let tasks = build_tasks(&merged, &parse(&merged.source)?);
    let task = tasks.iter().find(|t| t.target_module == "blink_prescaler").ok_or("task missing")?;

    let buggy = task.golden_source.replace("assign tick = &cnt;", "assign tick = |cnt;");
    let candidates = [
        ("golden", task.golden_source.clone()),
        ("buggy", format!("Here is the module:\n```verilog\n{buggy}\n```\n")),
        ("garbage", "module blink_prescaler(; endmodule".to_string()),
    ];

    let cfg = EquivConfig::default();
    for (label, text) in &candidates {
        let r = evaluate_candidate(task, strip_fences(text), &cfg);
        let stx = match &r.stx {
            Stx::Pass => "pass".to_string(),
            Stx::Fail { reason } => format!("fail: {reason}"),
        };
        println!("{label:<8} stx {stx}; eqv {}; coverage {:.1}%", r.eqv.label(), r.coverage);
    }
    Ok(())
}
