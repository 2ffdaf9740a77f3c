// SPDX-License-Identifier: Apache-2.0

//! Build the fixture benchmark, score the golden modules against it and
//! print the dataset statistics.
//!
//! ```text
//! cargo run --release --example full_pipeline [OUT_DIR]
//! ```

use std::fs;
use std::path::PathBuf;

use rtlbench::pipeline::{candidate_file_name, cmd_build, cmd_eval, cmd_stats, score_table, stats_table, Config};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("rtlbench-full-pipeline"));

    let mut cfg = Config::load(&fixtures.join("fixture.toml"))?;
    for s in &mut cfg.shuttles {
        s.root = fixtures.join(&s.root);
    }

    let build = cmd_build(&cfg, &out)?;
    let s = &build.stages;
    println!(
        "scanned {} accepted {} tasks {} after dedup {} verified {}",
        s.scanned, s.accepted, s.tasks, s.after_module_dedup, s.verified
    );

    let cands = out.join("candidates");
    fs::create_dir_all(&cands)?;
    for t in &build.tasks {
        fs::write(cands.join(candidate_file_name(&t.task_id)), &t.golden_source)?;
    }
    let tasks = out.join("tasks.jsonl");
    let eval = cmd_eval(&cfg, &tasks, &cands, &out.join("eval"))?;
    print!("\n{}", score_table(&eval.summary));
    print!("\n{}", stats_table(&cmd_stats(&cfg, &tasks)?));
    println!("\nartifacts in {}", out.display());
    Ok(())
}
