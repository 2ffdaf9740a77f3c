// SPDX-License-Identifier: Apache-2.0

//! Min-K curves for two synthetic models: one that has memorized the text
//! and one that has not.
//!
//! ```text
//! cargo run --example contamination_curve
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtlbench::contamination::{min_k, min_k_curve, LogprobRecord};

fn records(model: &str, spread: f64, rng: &mut ChaCha8Rng) -> Vec<LogprobRecord> {
    (0..20)
        .map(|i| LogprobRecord {
            task_id: format!("task{i}"),
            model_id: model.into(),
            tokens: Vec::new(),
            logprobs: (0..200).map(|_| -rng.gen::<f64>() * spread).collect(),
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0];

    let hand = LogprobRecord {
        task_id: "hand".into(),
        model_id: "hand".into(),
        tokens: Vec::new(),
        logprobs: vec![-1.0, -2.0, -6.0, -0.5, -4.0],
    };
    println!("min-20% of {:?} = {}", hand.logprobs, min_k(&hand, 20.0)?);

    for (model, spread) in [("memorized", 0.5), ("fresh", 6.0)] {
        let curve = min_k_curve(&records(model, spread, &mut rng), &grid)?;
        let vals: Vec<String> = curve.values.iter().map(|v| format!("{v:.3}")).collect();
        println!("{model:<10} auc {:.3}  [{}]", curve.auc, vals.join(" "));
    }
    Ok(())
}
