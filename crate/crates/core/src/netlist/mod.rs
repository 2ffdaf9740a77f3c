// SPDX-License-Identifier: Apache-2.0

//! Flat bit-level netlists: and-inverter gates plus clocked registers.
//!
//! [`elaborate`] lowers a parsed module hierarchy into a [`Netlist`];
//! [`Netlist::simulate`] runs it cycle by cycle from the reset state.

pub mod aig;
mod elab;

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aig::{const_word, shift_const, word_value, Aig, Lit, Node};
pub use elab::{elaborate, ElabError, ElabErrorKind};

use crate::frontend::Direction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortInfo {
    pub name: String,
    pub direction: Direction,
    pub width: u32,
}

/// A named group of netlist bits, LSB first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortBits {
    pub name: String,
    pub signed: bool,
    pub bits: Vec<Lit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub var: u32,
    pub next: Lit,
    pub reset: bool,
}

#[derive(Debug, Clone)]
pub struct Netlist {
    pub top: String,
    /// The top module's declared interface, clock included.
    pub ports: Vec<PortInfo>,
    pub aig: Aig,
    /// Data inputs; the clock is not among them.
    pub inputs: Vec<PortBits>,
    pub outputs: Vec<PortBits>,
    pub registers: Vec<Register>,
    pub clock: Option<String>,
    /// Normalizations applied during elaboration (async resets, ...).
    pub notes: Vec<String>,
}

/// Bits of one port value, LSB first. Displays MSB first as binary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bits(pub Vec<bool>);

impl Bits {
    pub fn from_u64(v: u64, width: usize) -> Bits {
        Bits((0..width).map(|i| i < 64 && v >> i & 1 == 1).collect())
    }

    pub fn to_u64(&self) -> u64 {
        self.0.iter().take(64).enumerate().fold(0, |acc, (i, b)| acc | u64::from(*b) << i)
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.0.iter().rev() {
            f.write_char(if *b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Bits {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.chars()
            .rev()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(format!("invalid bit `{c}`")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Bits)
    }
}

impl Serialize for Bits {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-cycle port values.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimTrace {
    pub cycles: Vec<BTreeMap<String, Bits>>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Fixed-width text table, one row per cycle.
    pub fn table(&self) -> String {
        let names: Vec<&String> = self.cycles.iter().flat_map(|c| c.keys()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let mut widths: Vec<usize> = names.iter().map(|n| n.len()).collect();
        for c in &self.cycles {
            for (i, n) in names.iter().enumerate() {
                if let Some(v) = c.get(*n) {
                    widths[i] = widths[i].max(v.width());
                }
            }
        }
        let mut out = String::from("cycle");
        for (n, w) in names.iter().zip(&widths) {
            let _ = write!(out, "  {n:>w$}");
        }
        out.push('\n');
        for (t, c) in self.cycles.iter().enumerate() {
            let _ = write!(out, "{t:>5}");
            for (n, w) in names.iter().zip(&widths) {
                let v = c.get(*n).map(|b| b.to_string()).unwrap_or_else(|| "-".into());
                let _ = write!(out, "  {v:>w$}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("cycle {cycle}: no value for input `{name}`")]
    MissingInput { cycle: usize, name: String },
    #[error("cycle {cycle}: input `{name}` has {got} bits, expected {expected}")]
    Width {
        cycle: usize,
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("stimulus has no cycles")]
    Empty,
}

impl Netlist {
    pub fn is_combinational(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn and_count(&self) -> usize {
        self.aig.and_count()
    }

    pub fn input_bit_count(&self) -> usize {
        self.inputs.iter().map(|p| p.bits.len()).sum()
    }

    pub fn output_bit_count(&self) -> usize {
        self.outputs.iter().map(|p| p.bits.len()).sum()
    }

    /// `name` for 1-bit ports, `name[i]` otherwise.
    pub fn bit_name(port: &PortBits, i: usize) -> String {
        if port.bits.len() == 1 {
            port.name.clone()
        } else {
            format!("{}[{}]", port.name, i)
        }
    }

    pub fn output_bits(&self) -> Vec<(String, Lit)> {
        self.outputs
            .iter()
            .flat_map(|p| p.bits.iter().enumerate().map(move |(i, l)| (Self::bit_name(p, i), *l)))
            .collect()
    }

    pub fn input_bits(&self) -> Vec<(String, Lit)> {
        self.inputs
            .iter()
            .flat_map(|p| p.bits.iter().enumerate().map(move |(i, l)| (Self::bit_name(p, i), *l)))
            .collect()
    }

    pub fn reset_state(&self) -> Vec<bool> {
        self.registers.iter().map(|r| r.reset).collect()
    }

    /// Evaluates every node for 64 parallel lanes. `inputs` holds one word
    /// per flattened input bit, `state` one word per register.
    pub fn eval_lanes(&self, inputs: &[u64], state: &[u64]) -> Vec<u64> {
        let mut val = vec![0u64; self.aig.len()];
        for (v, n) in self.aig.nodes().iter().enumerate() {
            val[v] = match *n {
                Node::Const | Node::Wire(_) => 0,
                Node::Input(i) => inputs[i as usize],
                Node::Latch(r) => state[r as usize],
                Node::And(a, b) => lit_val(&val, a) & lit_val(&val, b),
            };
        }
        val
    }

    /// One clock cycle over 64 lanes: returns (output words, next state words).
    pub fn step_lanes(&self, inputs: &[u64], state: &[u64]) -> (Vec<u64>, Vec<u64>) {
        let val = self.eval_lanes(inputs, state);
        let outs = self.outputs.iter().flat_map(|p| p.bits.iter().map(|l| lit_val(&val, *l))).collect();
        let next = self.registers.iter().map(|r| lit_val(&val, r.next)).collect();
        (outs, next)
    }

    pub fn reset_lanes(&self) -> Vec<u64> {
        self.registers.iter().map(|r| if r.reset { !0 } else { 0 }).collect()
    }

    /// Runs the stimulus from the reset state; one output map per cycle.
    pub fn simulate(&self, stimulus: &SimTrace) -> Result<SimTrace, SimError> {
        if stimulus.cycles.is_empty() {
            return Err(SimError::Empty);
        }
        let mut state = self.reset_lanes();
        let mut out = SimTrace::default();
        for (t, cyc) in stimulus.cycles.iter().enumerate() {
            let mut words = Vec::with_capacity(self.input_bit_count());
            for p in &self.inputs {
                let v = cyc.get(&p.name).ok_or_else(|| SimError::MissingInput {
                    cycle: t,
                    name: p.name.clone(),
                })?;
                if v.width() != p.bits.len() {
                    return Err(SimError::Width {
                        cycle: t,
                        name: p.name.clone(),
                        got: v.width(),
                        expected: p.bits.len(),
                    });
                }
                words.extend(v.0.iter().map(|b| if *b { !0u64 } else { 0 }));
            }
            let (outs, next) = self.step_lanes(&words, &state);
            let mut row = BTreeMap::new();
            let mut k = 0;
            for p in &self.outputs {
                let bits = outs[k..k + p.bits.len()].iter().map(|w| w & 1 == 1).collect();
                k += p.bits.len();
                row.insert(p.name.clone(), Bits(bits));
            }
            out.cycles.push(row);
            state = next;
        }
        Ok(out)
    }

    /// AND nodes in the transitive fan-in of `lit`. With `sequential`,
    /// register next-state cones are followed as well.
    pub fn cone_and_count(&self, lit: Lit, sequential: bool) -> usize {
        let mut seen = vec![false; self.aig.len()];
        let mut stack = vec![lit.var()];
        let mut count = 0;
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut seen[v as usize], true) {
                continue;
            }
            match self.aig.node(v) {
                Node::And(a, b) => {
                    count += 1;
                    stack.push(a.var());
                    stack.push(b.var());
                }
                Node::Latch(r) if sequential => stack.push(self.registers[r as usize].next.var()),
                _ => {}
            }
        }
        count
    }

    /// Debug dump: one node per line.
    pub fn dump(&self) -> String {
        let mut out = format!("netlist {}\n", self.top);
        if let Some(c) = &self.clock {
            let _ = writeln!(out, "clock {c}");
        }
        for (name, l) in self.input_bits() {
            let _ = writeln!(out, "input {name} = {l}");
        }
        for (v, n) in self.aig.nodes().iter().enumerate() {
            if let Node::And(a, b) = n {
                let _ = writeln!(out, "n{v} = AND({a}, {b})");
            }
        }
        for r in &self.registers {
            let _ = writeln!(out, "reg n{} {} next={} reset={}", r.var, r.name, r.next, u8::from(r.reset));
        }
        for (name, l) in self.output_bits() {
            let _ = writeln!(out, "output {name} = {l}");
        }
        out
    }

    /// Copy with nodes renumbered in a structure-determined order: inputs
    /// in port order, registers by name, gates in depth-first post-order
    /// from the outputs with fan-ins visited by structural hash.
    pub fn canonical(&self) -> Netlist {
        let shash = self.structural_hashes();
        let mut order: Vec<usize> = (0..self.registers.len()).collect();
        order.sort_by(|a, b| self.registers[*a].name.cmp(&self.registers[*b].name));

        let mut g = Aig::new();
        let mut map: HashMap<u32, Lit> = HashMap::new();
        let mut inputs = Vec::new();
        let mut k = 0u32;
        for p in &self.inputs {
            let mut bits = Vec::new();
            for l in &p.bits {
                let nl = g.add_source(Node::Input(k));
                k += 1;
                map.insert(l.var(), nl);
                bits.push(nl);
            }
            inputs.push(PortBits {
                name: p.name.clone(),
                signed: p.signed,
                bits,
            });
        }
        for (new_idx, old) in order.iter().enumerate() {
            let nl = g.add_source(Node::Latch(new_idx as u32));
            map.insert(self.registers[*old].var, nl);
        }
        let mut roots: Vec<Lit> = self.outputs.iter().flat_map(|p| p.bits.iter().copied()).collect();
        roots.extend(order.iter().map(|r| self.registers[*r].next));
        for root in &roots {
            let mut stack = vec![(root.var(), false)];
            while let Some((v, expanded)) = stack.pop() {
                if map.contains_key(&v) || v == 0 {
                    continue;
                }
                let Node::And(a, b) = self.aig.node(v) else { continue };
                if expanded {
                    let la = resolve(&map, a);
                    let lb = resolve(&map, b);
                    let nl = g.and(la, lb);
                    map.insert(v, nl);
                } else {
                    stack.push((v, true));
                    let (first, second) = if (shash[a.var() as usize], a.is_neg()) <= (shash[b.var() as usize], b.is_neg()) {
                        (a, b)
                    } else {
                        (b, a)
                    };
                    stack.push((second.var(), false));
                    stack.push((first.var(), false));
                }
            }
        }
        let outputs = self
            .outputs
            .iter()
            .map(|p| PortBits {
                name: p.name.clone(),
                signed: p.signed,
                bits: p.bits.iter().map(|l| resolve(&map, *l)).collect(),
            })
            .collect();
        let registers = order
            .iter()
            .map(|old| {
                let r = &self.registers[*old];
                Register {
                    name: r.name.clone(),
                    var: map[&r.var].var(),
                    next: resolve(&map, r.next),
                    reset: r.reset,
                }
            })
            .collect();
        Netlist {
            top: self.top.clone(),
            ports: self.ports.clone(),
            aig: g,
            inputs,
            outputs,
            registers,
            clock: self.clock.clone(),
            notes: self.notes.clone(),
        }
    }

    fn structural_hashes(&self) -> Vec<u64> {
        use crate::dedup::hash_bytes;
        let mut input_names = HashMap::new();
        for (name, l) in self.input_bits() {
            input_names.insert(l.var(), name);
        }
        let nodes = self.aig.nodes();
        let mut h = vec![0u64; nodes.len()];
        for (v, n) in nodes.iter().enumerate() {
            h[v] = match *n {
                Node::Const => 1,
                Node::Input(_) => hash_bytes(format!("i:{}", input_names.get(&(v as u32)).map_or("", |s| s)).as_bytes()),
                Node::Latch(r) => hash_bytes(format!("r:{}", self.registers[r as usize].name).as_bytes()),
                Node::Wire(w) => hash_bytes(format!("w:{w}").as_bytes()),
                Node::And(a, b) => {
                    let x = (h[a.var() as usize], a.is_neg());
                    let y = (h[b.var() as usize], b.is_neg());
                    let (x, y) = if x <= y { (x, y) } else { (y, x) };
                    hash_bytes(format!("a:{}:{}:{}:{}", x.0, u8::from(x.1), y.0, u8::from(y.1)).as_bytes())
                }
            };
        }
        h
    }
}

fn resolve(map: &HashMap<u32, Lit>, l: Lit) -> Lit {
    if l.var() == 0 {
        return l;
    }
    map[&l.var()] ^ l.is_neg()
}

fn lit_val(val: &[u64], l: Lit) -> u64 {
    let v = val[l.var() as usize];
    if l.is_neg() {
        !v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn elab(src: &str, top: &str) -> Netlist {
        elaborate(&parse(src).unwrap(), top, &BTreeMap::new()).unwrap()
    }

    fn run(n: &Netlist, cycles: &[&[(&str, u64, usize)]]) -> SimTrace {
        let stim = SimTrace {
            cycles: cycles
                .iter()
                .map(|c| c.iter().map(|(k, v, w)| (k.to_string(), Bits::from_u64(*v, *w))).collect())
                .collect(),
        };
        n.simulate(&stim).unwrap()
    }

    #[test]
    fn single_and_gate() {
        let n = elab("module m(input a, input b, output y); assign y = a & b; endmodule", "m");
        assert_eq!(n.and_count(), 1);
        assert_eq!(n.outputs[0].bits[0], Lit::new(3, false));
        assert!(n.dump().contains("n3 = AND(n1, n2)"));
    }

    #[test]
    fn xor_truth_table() {
        let n = elab("module m(input a, input b, output y); assign y = a ^ b; endmodule", "m");
        let t = run(
            &n,
            &[
                &[("a", 0, 1), ("b", 0, 1)],
                &[("a", 0, 1), ("b", 1, 1)],
                &[("a", 1, 1), ("b", 0, 1)],
                &[("a", 1, 1), ("b", 1, 1)],
            ],
        );
        let ys: Vec<u64> = t.cycles.iter().map(|c| c["y"].to_u64()).collect();
        assert_eq!(ys, [0, 1, 1, 0]);
    }

    #[test]
    fn constant_output() {
        let n = elab("module m(input [3:0] a, output [1:0] y); assign y = 2'b00; endmodule", "m");
        let t = run(&n, &[&[("a", 9, 4)], &[("a", 15, 4)]]);
        assert!(t.cycles.iter().all(|c| c["y"].to_u64() == 0));
    }

    #[test]
    fn ripple_adder_exhaustive() {
        let n = elab("module m(input [1:0] a, input [1:0] b, output [1:0] s); assign s = a + b; endmodule", "m");
        for a in 0..4u64 {
            for b in 0..4u64 {
                let t = run(&n, &[&[("a", a, 2), ("b", b, 2)]]);
                assert_eq!(t.cycles[0]["s"].to_u64(), (a + b) % 4);
            }
        }
    }

    #[test]
    fn toggle_flip_flop() {
        let src = "module t(input clk, input rst, output reg q);\n always @(posedge clk) if (rst) q <= 1'b0; else q <= ~q;\nendmodule";
        let n = elab(src, "t");
        assert_eq!(n.clock.as_deref(), Some("clk"));
        assert_eq!(n.inputs.len(), 1);
        let t = run(&n, &[&[("rst", 0, 1)], &[("rst", 0, 1)], &[("rst", 0, 1)], &[("rst", 0, 1)]]);
        let qs: Vec<u64> = t.cycles.iter().map(|c| c["q"].to_u64()).collect();
        assert_eq!(qs, [0, 1, 0, 1]);
    }

    #[test]
    fn missing_input_is_an_error() {
        let n = elab("module m(input a, input b, output y); assign y = a | b; endmodule", "m");
        let stim = SimTrace {
            cycles: vec![[("a".to_string(), Bits(vec![true]))].into_iter().collect()],
        };
        assert!(matches!(n.simulate(&stim), Err(SimError::MissingInput { .. })));
    }

    #[test]
    fn canonical_form_is_stable() {
        let src = "module m(input [3:0] a, input [3:0] b, input clk, output reg [3:0] q, output c);\n\
            assign c = a < b;\n always @(posedge clk) q <= a + b;\nendmodule";
        let n1 = elab(src, "m");
        let n2 = elab(src, "m");
        assert_eq!(n1.canonical().dump(), n2.canonical().dump());
        let c = n1.canonical();
        assert_eq!(c.canonical().dump(), c.dump());
    }

    #[test]
    fn cone_counts() {
        let n = elab("module m(input a, input b, input c, output x, output y); assign x = a & b; assign y = a & b & c; endmodule", "m");
        let outs = n.output_bits();
        assert_eq!(n.cone_and_count(outs[0].1, false), 1);
        assert_eq!(n.cone_and_count(outs[1].1, false), 2);
    }

    #[test]
    fn bits_round_trip() {
        let b = Bits::from_u64(0b1011, 6);
        assert_eq!(b.to_string(), "001011");
        assert_eq!("001011".parse::<Bits>().unwrap(), b);
        assert_eq!(serde_json::to_string(&b).unwrap(), "\"001011\"");
    }
}
