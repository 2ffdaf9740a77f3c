// SPDX-License-Identifier: Apache-2.0

//! Combinational and sequential equivalence checking on hand-written pairs.
//!
//! ```text
//! cargo run --example equivalence_check
//! ```

use rtlbench::equiv::{
    build_miter, check_combinational, check_inductive, counterexample_table, elaborate_source, EquivConfig, SeqStatus,
};

const MAJ_GOLDEN: &str = "module maj (input a, input b, input c, output y);
  assign y = (a & b) | (a & c) | (b & c);
endmodule";

const MAJ_SUM: &str = "module maj (input a, input b, input c, output y);
  wire [1:0] s = a + b + c;
  assign y = s[1];
endmodule";

const MAJ_WRONG: &str = "module maj (input a, input b, input c, output y);
  assign y = (a & b) | (a & c) | (b ^ c);
endmodule";

const TOGGLE_GOLDEN: &str = "module toggle (input clk, input rst, input en, output reg q);
  always @(posedge clk)
    if (rst) q <= 1'b0;
    else if (en) q <= ~q;
endmodule";

const TOGGLE_INVERTED: &str = "module toggle (input clk, input rst, input en, output q);
  reg nq;
  assign q = ~nq;
  always @(posedge clk)
    if (rst) nq <= 1'b1;
    else nq <= nq ^ en;
endmodule";

const TOGGLE_LATE: &str = "module toggle (input clk, input rst, input en, output reg q);
  reg [1:0] n;
  always @(posedge clk)
    if (rst) begin n <= 2'd0; q <= 1'b0; end
    else if (en) begin n <= n + 2'd1; if (n == 2'd2) q <= q; else q <= ~q; end
endmodule";

fn main() -> Result<(), String> {
    let cfg = EquivConfig::default();

    let golden = elaborate_source(MAJ_GOLDEN, "maj")?;
    for (label, src) in [("sum", MAJ_SUM), ("wrong", MAJ_WRONG)] {
        let cand = elaborate_source(src, "maj")?;
        let miter = build_miter(&golden, &cand).map_err(|e| e.to_string())?;
        let (bits, stats) = check_combinational(&miter, cfg.conflict_budget);
        for b in bits {
            println!("maj/{label}: {} {:?} ({} SAT calls)", b.output, b.verdict, stats.sat_calls);
            if let Some(w) = b.witness {
                let inputs: Vec<String> = w.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("  witness {}", inputs.join(" "));
            }
        }
    }

    let golden = elaborate_source(TOGGLE_GOLDEN, "toggle")?;
    for (label, src) in [("inverted", TOGGLE_INVERTED), ("late", TOGGLE_LATE)] {
        let cand = elaborate_source(src, "toggle")?;
        let miter = build_miter(&golden, &cand).map_err(|e| e.to_string())?;
        let res = check_inductive(&miter, &cfg);
        match &res.status {
            SeqStatus::Equivalent => println!("toggle/{label}: equivalent, corresponding {:?}", res.corresponding),
            SeqStatus::NotEquivalent(trace) => {
                println!("toggle/{label}: differs after {} cycles", trace.len());
                print!("{}", counterexample_table(&golden, &cand, trace));
            }
            SeqStatus::Unknown(why) => println!("toggle/{label}: unknown ({why})"),
        }
    }
    Ok(())
}
