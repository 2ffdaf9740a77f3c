// SPDX-License-Identifier: Apache-2.0

//! Near-duplicate removal across shuttles: the oldest copy of each cluster
//! survives.
//!
//! ```text
//! cargo run --example dedup_shuttles
//! ```

use rtlbench::corpus::ShuttleId;
use rtlbench::dedup::{deduplicate, estimate_jaccard, exact_jaccard, minhash, shingle, DedupConfig, DedupItem};

const COUNTER: &str = "module counter (input clk, input rst, output reg [7:0] q);
  always @(posedge clk) begin
    if (rst) q <= 8'd0;
    else q <= q + 8'd1;
  end
endmodule";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let renamed = COUNTER.replace("counter", "tick_counter");
    let widened = COUNTER.replace("8'd1", "8'd2").replace("[7:0]", "[15:0]");
    let other = "module inv (input a, output y); assign y = ~a; endmodule";

    let item = |id: &str, shuttle: (&str, u32), text: &str| DedupItem {
        id: id.into(),
        shuttle: ShuttleId::new(shuttle.0, shuttle.1),
        group: None,
        text: text.into(),
    };
    let items = vec![
        item("tt03/counter", ("tt03", 3), COUNTER),
        item("tt01/counter", ("tt01", 1), COUNTER),
        item("tt02/tick_counter", ("tt02", 2), &renamed),
        item("tt02/wide_counter", ("tt02", 2), &widened),
        item("tt01/inv", ("tt01", 1), other),
    ];

    let cfg = DedupConfig::default();
    let a = shingle("a", COUNTER, cfg.shingle_words);
    for it in &items[1..] {
        let b = shingle(&it.id, &it.text, cfg.shingle_words);
        let sa = minhash(&a, cfg.num_perms, cfg.seed)?;
        let sb = minhash(&b, cfg.num_perms, cfg.seed)?;
        println!(
            "J(counter, {:<18}) exact {:.3} minhash {:.3}",
            it.id,
            exact_jaccard(&a, &b),
            estimate_jaccard(&sa, &sb)?
        );
    }

    let out = deduplicate(&items, &cfg)?;
    println!("\nbands {} x rows {}, {} candidate pairs", out.bands, out.rows, out.candidates);
    for c in &out.components {
        let members: Vec<&str> = c.members.iter().map(|m| m.id.as_str()).collect();
        println!("survivor {} <- {:?}", c.survivor, members);
    }
    println!("retained {:?}", out.retained);
    Ok(())
}
