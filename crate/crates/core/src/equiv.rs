// SPDX-License-Identifier: Apache-2.0

//! Equivalence of a candidate module against the golden one.
//!
//! Both netlists are merged into a [`Miter`] that shares inputs by name and
//! compares outputs bit by bit. Combinational designs are settled per output
//! bit with one SAT query each. Sequential designs go through bounded
//! k-induction: first a register-correspondence invariant is proved for
//! same-name register pairs, then a bounded check from reset, then the
//! inductive step under that invariant.
//!
//! Every output bit of the golden design is a partition; its weight is the
//! AND-gate count of its cone of influence, registers included.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{parse, Direction};
use crate::netlist::{elaborate, Aig, Bits, Lit, Netlist, Node, PortBits, SimTrace};
use crate::sat::{AigEncoder, Lit as SLit, SolveResult, Solver, DEFAULT_CONFLICT_BUDGET};
use crate::taskgen::Task;

pub const DEFAULT_K: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivConfig {
    pub k: u32,
    pub conflict_budget: u64,
}

impl Default for EquivConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            conflict_budget: DEFAULT_CONFLICT_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceMismatch {
    pub missing: Vec<String>,
    pub extra: Vec<String>,
    /// `name: golden vs candidate` descriptions.
    pub mismatched: Vec<String>,
}

impl fmt::Display for InterfaceMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.missing.is_empty() {
            parts.push(format!("missing ports: {}", self.missing.join(", ")));
        }
        if !self.extra.is_empty() {
            parts.push(format!("extra ports: {}", self.extra.join(", ")));
        }
        if !self.mismatched.is_empty() {
            parts.push(format!("mismatched ports: {}", self.mismatched.join(", ")));
        }
        f.write_str(&parts.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("interface mismatch: {0}")]
    Interface(InterfaceMismatch),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiterOutput {
    /// Output bit name, `port` or `port[i]`.
    pub name: String,
    pub golden: Lit,
    pub candidate: Lit,
    /// XNOR of the two.
    pub eq: Lit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiterReg {
    pub name: String,
    pub var: u32,
    pub next: Lit,
    pub reset: bool,
}

/// Golden and candidate copies over shared inputs.
///
/// Registers are indexed by latch number: the golden copy's first, then the
/// candidate's.
#[derive(Debug, Clone)]
pub struct Miter {
    pub aig: Aig,
    pub inputs: Vec<PortBits>,
    pub registers: Vec<MiterReg>,
    pub golden_regs: usize,
    pub outputs: Vec<MiterOutput>,
    pub eq_all: Lit,
    pub golden: Netlist,
    pub candidate: Netlist,
}

impl Miter {
    pub fn golden_registers(&self) -> &[MiterReg] {
        &self.registers[..self.golden_regs]
    }

    pub fn candidate_registers(&self) -> &[MiterReg] {
        &self.registers[self.golden_regs..]
    }

    pub fn input_bit_count(&self) -> usize {
        self.inputs.iter().map(|p| p.bits.len()).sum()
    }

    /// Values of every node for one input/state assignment.
    pub fn eval(&self, inputs: &[bool], state: &[bool]) -> Vec<bool> {
        let mut val = vec![false; self.aig.len()];
        for (v, n) in self.aig.nodes().iter().enumerate() {
            val[v] = match *n {
                Node::Const | Node::Wire(_) => false,
                Node::Input(i) => inputs[i as usize],
                Node::Latch(r) => state[r as usize],
                Node::And(a, b) => (val[a.var() as usize] ^ a.is_neg()) & (val[b.var() as usize] ^ b.is_neg()),
            };
        }
        val
    }

    pub fn eval_eq_all(&self, inputs: &[bool], state: &[bool]) -> bool {
        let val = self.eval(inputs, state);
        val[self.eq_all.var() as usize] ^ self.eq_all.is_neg()
    }
}

/// Checks that both netlists declare the same ports (order may differ).
pub fn match_interfaces(golden: &Netlist, candidate: &Netlist) -> Result<(), InterfaceMismatch> {
    let g: BTreeMap<&str, (Direction, u32)> = golden.ports.iter().map(|p| (p.name.as_str(), (p.direction, p.width))).collect();
    let c: BTreeMap<&str, (Direction, u32)> =
        candidate.ports.iter().map(|p| (p.name.as_str(), (p.direction, p.width))).collect();
    let mut mm = InterfaceMismatch::default();
    for (name, gd) in &g {
        match c.get(name) {
            None => mm.missing.push(name.to_string()),
            Some(cd) if cd != gd => mm.mismatched.push(format!(
                "{name}: {} [{}] vs {} [{}]",
                dir_name(gd.0),
                gd.1,
                dir_name(cd.0),
                cd.1
            )),
            Some(_) => {}
        }
    }
    for name in c.keys() {
        if !g.contains_key(name) {
            mm.extra.push(name.to_string());
        }
    }
    if mm.missing.is_empty() && mm.extra.is_empty() && mm.mismatched.is_empty() {
        Ok(())
    } else {
        Err(mm)
    }
}

fn dir_name(d: Direction) -> &'static str {
    match d {
        Direction::In => "input",
        Direction::Out => "output",
        Direction::Inout => "inout",
    }
}

pub fn build_miter(golden: &Netlist, candidate: &Netlist) -> Result<Miter, EquivError> {
    match_interfaces(golden, candidate).map_err(EquivError::Interface)?;
    let mut aig = Aig::new();
    let mut inputs: Vec<PortBits> = Vec::new();
    let mut by_name: HashMap<String, usize> = HashMap::new();
    let mut k = 0u32;
    for p in golden.inputs.iter().chain(&candidate.inputs) {
        if by_name.contains_key(&p.name) {
            continue;
        }
        let bits = (0..p.bits.len())
            .map(|_| {
                let l = aig.add_source(Node::Input(k));
                k += 1;
                l
            })
            .collect();
        by_name.insert(p.name.clone(), inputs.len());
        inputs.push(PortBits {
            name: p.name.clone(),
            signed: p.signed,
            bits,
        });
    }
    let mut registers = Vec::new();
    let gmap = copy_into(&mut aig, golden, &inputs, &by_name, &mut registers);
    let golden_regs = registers.len();
    let cmap = copy_into(&mut aig, candidate, &inputs, &by_name, &mut registers);
    let map = |m: &[Lit], l: Lit| m[l.var() as usize] ^ l.is_neg();
    for (i, r) in golden.registers.iter().enumerate() {
        registers[i].next = map(&gmap, r.next);
    }
    for (i, r) in candidate.registers.iter().enumerate() {
        registers[golden_regs + i].next = map(&cmap, r.next);
    }
    let cand_out: HashMap<&str, &PortBits> = candidate.outputs.iter().map(|p| (p.name.as_str(), p)).collect();
    let mut outputs = Vec::new();
    for p in &golden.outputs {
        let cp = cand_out[p.name.as_str()];
        for (i, gl) in p.bits.iter().enumerate() {
            let g = map(&gmap, *gl);
            let c = map(&cmap, cp.bits[i]);
            let eq = aig.xnor(g, c);
            outputs.push(MiterOutput {
                name: Netlist::bit_name(p, i),
                golden: g,
                candidate: c,
                eq,
            });
        }
    }
    let eqs: Vec<Lit> = outputs.iter().map(|o| o.eq).collect();
    let eq_all = aig.and_all(&eqs);
    Ok(Miter {
        aig,
        inputs,
        registers,
        golden_regs,
        outputs,
        eq_all,
        golden: golden.clone(),
        candidate: candidate.clone(),
    })
}

fn copy_into(
    aig: &mut Aig,
    n: &Netlist,
    inputs: &[PortBits],
    by_name: &HashMap<String, usize>,
    registers: &mut Vec<MiterReg>,
) -> Vec<Lit> {
    let flat: Vec<Lit> = n
        .inputs
        .iter()
        .flat_map(|p| inputs[by_name[&p.name]].bits.iter().copied())
        .collect();
    let base = registers.len();
    let mut map = vec![Lit::FALSE; n.aig.len()];
    for (v, node) in n.aig.nodes().iter().enumerate() {
        map[v] = match *node {
            Node::Const | Node::Wire(_) => Lit::FALSE,
            Node::Input(i) => flat[i as usize],
            Node::Latch(r) => {
                let l = aig.add_source(Node::Latch((base + r as usize) as u32));
                let reg = &n.registers[r as usize];
                registers.push(MiterReg {
                    name: reg.name.clone(),
                    var: l.var(),
                    next: Lit::FALSE,
                    reset: reg.reset,
                });
                l
            }
            Node::And(a, b) => {
                let la = map[a.var() as usize] ^ a.is_neg();
                let lb = map[b.var() as usize] ^ b.is_neg();
                aig.and(la, lb)
            }
        };
    }
    map
}

// ----------------------------------------------------------------- verdicts

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Unknown,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverStats {
    pub sat_calls: u64,
    pub conflicts: u64,
}

impl SolverStats {
    fn absorb(&mut self, s: &Solver, calls: u64) {
        self.sat_calls += calls;
        self.conflicts += s.conflicts();
    }
}

/// Distinguishing assignment for one output bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombWitness {
    pub inputs: BTreeMap<String, Bits>,
    /// Cut-point register values, keyed by register name.
    pub golden_state: BTreeMap<String, bool>,
    pub candidate_state: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitVerdict {
    pub output: String,
    pub verdict: Verdict,
    pub witness: Option<CombWitness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeqStatus {
    Equivalent,
    NotEquivalent(SimTrace),
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqResult {
    pub status: SeqStatus,
    /// Per output bit, in miter output order.
    pub verdicts: Vec<Verdict>,
    /// Register pairs proved equal in every reachable state.
    pub corresponding: Vec<String>,
    pub stats: SolverStats,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Init {
    Reset,
    Free,
    /// Free, but same-name registers share one value.
    Cut,
}

struct Unroll<'m> {
    m: &'m Miter,
    solver: Solver,
    frames: Vec<AigEncoder>,
    inputs: Vec<Vec<SLit>>,
    states: Vec<Vec<SLit>>,
    init: Init,
    calls: u64,
}

impl<'m> Unroll<'m> {
    fn new(m: &'m Miter, init: Init) -> Self {
        Self {
            m,
            solver: Solver::new(),
            frames: Vec::new(),
            inputs: Vec::new(),
            states: Vec::new(),
            init,
            calls: 0,
        }
    }

    fn push_frame(&mut self) -> usize {
        let t = self.frames.len();
        let m = self.m;
        let state: Vec<SLit> = if t == 0 {
            match self.init {
                Init::Reset => {
                    let tr = self.solver.const_true();
                    m.registers.iter().map(|r| if r.reset { tr } else { !tr }).collect()
                }
                Init::Free => m.registers.iter().map(|_| SLit::pos(self.solver.new_var())).collect(),
                Init::Cut => {
                    let mut by_name: HashMap<&str, SLit> = HashMap::new();
                    let mut v = Vec::new();
                    for (i, r) in m.registers.iter().enumerate() {
                        let l = match by_name.get(r.name.as_str()) {
                            Some(l) if i >= m.golden_regs => *l,
                            _ => SLit::pos(self.solver.new_var()),
                        };
                        if i < m.golden_regs {
                            by_name.insert(&r.name, l);
                        }
                        v.push(l);
                    }
                    v
                }
            }
        } else {
            let nexts: Vec<Lit> = m.registers.iter().map(|r| r.next).collect();
            nexts.into_iter().map(|n| self.lit(t - 1, n)).collect()
        };
        let mut enc = AigEncoder::new(&m.aig);
        for (r, l) in m.registers.iter().zip(&state) {
            enc.bind(r.var, *l);
        }
        let mut ins = Vec::new();
        for p in &m.inputs {
            for b in &p.bits {
                let l = SLit::pos(self.solver.new_var());
                enc.bind(b.var(), l);
                ins.push(l);
            }
        }
        self.frames.push(enc);
        self.inputs.push(ins);
        self.states.push(state);
        t
    }

    fn lit(&mut self, t: usize, l: Lit) -> SLit {
        self.frames[t].encode(&mut self.solver, &self.m.aig, l, &mut |_, _, _| unreachable!("sources are bound"))
    }

    fn solve(&mut self, assumptions: &[SLit], budget: u64) -> SolveResult {
        self.calls += 1;
        self.solver.solve(assumptions, Some(budget))
    }

    /// Literal that, when assumed, forces at least one of `lits`.
    fn any(&mut self, lits: &[SLit]) -> SLit {
        let act = SLit::pos(self.solver.new_var());
        let mut c = vec![!act];
        c.extend_from_slice(lits);
        self.solver.add_clause(&c);
        act
    }

    fn xnor(&mut self, a: SLit, b: SLit) -> SLit {
        let e = SLit::pos(self.solver.new_var());
        self.solver.add_clause(&[!e, !a, b]);
        self.solver.add_clause(&[!e, a, !b]);
        self.solver.add_clause(&[e, a, b]);
        self.solver.add_clause(&[e, !a, !b]);
        e
    }

    fn input_values(&self, t: usize) -> BTreeMap<String, Bits> {
        let mut k = 0;
        let mut row = BTreeMap::new();
        for p in &self.m.inputs {
            let bits = (0..p.bits.len())
                .map(|_| {
                    let b = self.solver.model_lit(self.inputs[t][k]);
                    k += 1;
                    b
                })
                .collect();
            row.insert(p.name.clone(), Bits(bits));
        }
        row
    }

    fn trace(&self, last: usize) -> SimTrace {
        SimTrace {
            cycles: (0..=last).map(|t| self.input_values(t)).collect(),
        }
    }

    fn stats(&self) -> SolverStats {
        let mut s = SolverStats::default();
        s.absorb(&self.solver, self.calls);
        s
    }
}

/// Per-output-bit check with same-name registers cut to shared free values.
pub fn check_combinational(m: &Miter, budget: u64) -> (Vec<BitVerdict>, SolverStats) {
    let mut u = Unroll::new(m, Init::Cut);
    u.push_frame();
    let mut out = Vec::with_capacity(m.outputs.len());
    for o in &m.outputs {
        let d = !u.lit(0, o.eq);
        let (verdict, witness) = match u.solve(&[d], budget) {
            SolveResult::Unsat => (Verdict::Equivalent, None),
            SolveResult::Unknown => (Verdict::Unknown, None),
            SolveResult::Sat => {
                let state = |range: std::ops::Range<usize>| -> BTreeMap<String, bool> {
                    range
                        .map(|i| (m.registers[i].name.clone(), u.solver.model_lit(u.states[0][i])))
                        .collect()
                };
                let w = CombWitness {
                    inputs: u.input_values(0),
                    golden_state: state(0..m.golden_regs),
                    candidate_state: state(m.golden_regs..m.registers.len()),
                };
                (Verdict::NotEquivalent, Some(w))
            }
        };
        out.push(BitVerdict {
            output: o.name.clone(),
            verdict,
            witness,
        });
    }
    let stats = u.stats();
    (out, stats)
}

/// Same-name register pairs with equal reset values that stay equal in
/// every reachable state, found as the greatest inductive subset.
fn register_correspondence(m: &Miter, budget: u64, stats: &mut SolverStats) -> Vec<(usize, usize)> {
    let cand: HashMap<&str, usize> = m
        .candidate_registers()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.name.as_str(), m.golden_regs + i))
        .collect();
    let pairs: Vec<(usize, usize)> = m
        .golden_registers()
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            cand.get(r.name.as_str())
                .filter(|c| m.registers[**c].reset == r.reset)
                .map(|c| (i, *c))
        })
        .collect();
    if pairs.is_empty() {
        return pairs;
    }
    let mut u = Unroll::new(m, Init::Free);
    u.push_frame();
    let mut eqs = Vec::new();
    let mut diffs = Vec::new();
    for &(g, c) in &pairs {
        let (sg, sc) = (u.states[0][g], u.states[0][c]);
        eqs.push(u.xnor(sg, sc));
        let ng = u.lit(0, m.registers[g].next);
        let nc = u.lit(0, m.registers[c].next);
        diffs.push(!u.xnor(ng, nc));
    }
    let mut alive = vec![true; pairs.len()];
    let result = loop {
        let idx: Vec<usize> = (0..pairs.len()).filter(|i| alive[*i]).collect();
        if idx.is_empty() {
            break Vec::new();
        }
        let ds: Vec<SLit> = idx.iter().map(|i| diffs[*i]).collect();
        let act = u.any(&ds);
        let mut asm = vec![act];
        asm.extend(idx.iter().map(|i| eqs[*i]));
        match u.solve(&asm, budget) {
            SolveResult::Unsat => break idx.iter().map(|i| pairs[*i]).collect(),
            SolveResult::Unknown => break Vec::new(),
            SolveResult::Sat => {
                for i in idx {
                    if u.solver.model_lit(diffs[i]) {
                        alive[i] = false;
                    }
                }
            }
        }
    };
    let s = u.stats();
    stats.sat_calls += s.sat_calls;
    stats.conflicts += s.conflicts;
    result
}

/// Rebuilds the miter with each corresponding candidate register read as its
/// golden partner. Exact in every reachable state, and lets structural
/// hashing merge logic the two copies share.
fn merge_corresponding(m: &Miter, corr: &[(usize, usize)]) -> Miter {
    let partner: HashMap<usize, usize> = corr.iter().map(|&(g, c)| (c, g)).collect();
    let mut aig = Aig::new();
    let mut map = vec![Lit::FALSE; m.aig.len()];
    let mut latch = vec![Lit::FALSE; m.registers.len()];
    for (v, node) in m.aig.nodes().iter().enumerate() {
        map[v] = match *node {
            Node::Const | Node::Wire(_) => Lit::FALSE,
            Node::Input(i) => aig.add_source(Node::Input(i)),
            Node::Latch(r) => {
                let l = aig.add_source(Node::Latch(r));
                latch[r as usize] = l;
                match partner.get(&(r as usize)) {
                    Some(g) => latch[*g],
                    None => l,
                }
            }
            Node::And(a, b) => {
                let la = map[a.var() as usize] ^ a.is_neg();
                let lb = map[b.var() as usize] ^ b.is_neg();
                aig.and(la, lb)
            }
        };
    }
    let tr = |l: Lit| map[l.var() as usize] ^ l.is_neg();
    let inputs = m
        .inputs
        .iter()
        .map(|p| PortBits {
            name: p.name.clone(),
            signed: p.signed,
            bits: p.bits.iter().map(|b| tr(*b)).collect(),
        })
        .collect();
    let registers = m
        .registers
        .iter()
        .enumerate()
        .map(|(i, r)| MiterReg {
            name: r.name.clone(),
            var: latch[i].var(),
            next: tr(r.next),
            reset: r.reset,
        })
        .collect();
    let outputs: Vec<MiterOutput> = m
        .outputs
        .iter()
        .map(|o| {
            let (g, c) = (tr(o.golden), tr(o.candidate));
            MiterOutput {
                name: o.name.clone(),
                golden: g,
                candidate: c,
                eq: aig.xnor(g, c),
            }
        })
        .collect();
    let eqs: Vec<Lit> = outputs.iter().map(|o| o.eq).collect();
    let eq_all = aig.and_all(&eqs);
    Miter {
        aig,
        inputs,
        registers,
        golden_regs: m.golden_regs,
        outputs,
        eq_all,
        golden: m.golden.clone(),
        candidate: m.candidate.clone(),
    }
}

/// Bounded check from reset over cycles `0..k`, then the inductive step at
/// depth `k` under the register-correspondence invariant.
pub fn check_inductive(m: &Miter, cfg: &EquivConfig) -> SeqResult {
    let k = cfg.k.max(1) as usize;
    let budget = cfg.conflict_budget;
    let n = m.outputs.len();
    let mut stats = SolverStats::default();
    let corr = register_correspondence(m, budget, &mut stats);
    let reduced = merge_corresponding(m, &corr);
    let m = &reduced;
    let mut verdicts: Vec<Option<Verdict>> = vec![None; n];
    let mut trace = None;
    let mut unknown: Option<String> = None;

    let mut u = Unroll::new(m, Init::Reset);
    'bmc: for t in 0..k {
        u.push_frame();
        let diffs: Vec<SLit> = m.outputs.iter().map(|o| o.eq).collect::<Vec<_>>().into_iter().map(|e| !u.lit(t, e)).collect();
        loop {
            let open: Vec<usize> = (0..n).filter(|j| verdicts[*j].is_none()).collect();
            if open.is_empty() {
                break 'bmc;
            }
            let ds: Vec<SLit> = open.iter().map(|j| diffs[*j]).collect();
            let act = u.any(&ds);
            match u.solve(&[act], budget) {
                SolveResult::Unsat => break,
                SolveResult::Unknown => {
                    unknown = Some(format!("conflict budget exhausted in the bounded check at cycle {t}"));
                    break 'bmc;
                }
                SolveResult::Sat => {
                    for j in open {
                        if u.solver.model_lit(diffs[j]) {
                            verdicts[j] = Some(Verdict::NotEquivalent);
                        }
                    }
                    if trace.is_none() {
                        trace = Some(u.trace(t));
                    }
                }
            }
        }
    }
    let s = u.stats();
    stats.sat_calls += s.sat_calls;
    stats.conflicts += s.conflicts;

    let open: Vec<usize> = (0..n).filter(|j| verdicts[*j].is_none()).collect();
    if unknown.is_some() {
        for j in &open {
            verdicts[*j] = Some(Verdict::Unknown);
        }
    } else if !open.is_empty() {
        let mut u = Unroll::new(m, Init::Free);
        for t in 0..=k {
            u.push_frame();
            for &(g, c) in &corr {
                let (a, b) = (u.states[t][g], u.states[t][c]);
                u.solver.add_clause(&[!a, b]);
                u.solver.add_clause(&[a, !b]);
            }
        }
        let mut hyps = Vec::new();
        let mut last = Vec::new();
        for &j in &open {
            let h = SLit::pos(u.solver.new_var());
            for t in 0..k {
                let e = u.lit(t, m.outputs[j].eq);
                u.solver.add_clause(&[!h, e]);
            }
            hyps.push(h);
            last.push(!u.lit(k, m.outputs[j].eq));
        }
        let act = u.any(&last);
        let mut asm = vec![act];
        asm.extend_from_slice(&hyps);
        if u.solve(&asm, budget) == SolveResult::Unsat {
            for j in &open {
                verdicts[*j] = Some(Verdict::Equivalent);
            }
        } else {
            for (i, &j) in open.iter().enumerate() {
                verdicts[j] = Some(match u.solve(&[hyps[i], last[i]], budget) {
                    SolveResult::Unsat => Verdict::Equivalent,
                    _ => Verdict::Unknown,
                });
            }
        }
        let s = u.stats();
        stats.sat_calls += s.sat_calls;
        stats.conflicts += s.conflicts;
    }

    let verdicts: Vec<Verdict> = verdicts.into_iter().map(|v| v.expect("every bit decided")).collect();
    let status = if let Some(t) = trace {
        SeqStatus::NotEquivalent(t)
    } else if verdicts.iter().all(|v| *v == Verdict::Equivalent) {
        SeqStatus::Equivalent
    } else {
        SeqStatus::Unknown(unknown.unwrap_or_else(|| format!("inductive step failed at depth {k}")))
    };
    SeqResult {
        status,
        verdicts,
        corresponding: corr.iter().map(|(g, _)| m.registers[*g].name.clone()).collect(),
        stats,
    }
}

/// `100 · Σ weight(equivalent) / Σ weight`. Unknown counts as not equivalent.
pub fn partition_coverage(verdicts: &[Verdict], weights: &[u64]) -> f64 {
    assert_eq!(verdicts.len(), weights.len(), "one weight per partition");
    let total: u64 = weights.iter().sum();
    if total == 0 {
        return if verdicts.iter().all(|v| *v == Verdict::Equivalent) { 100.0 } else { 0.0 };
    }
    let good: u64 = verdicts
        .iter()
        .zip(weights)
        .filter(|(v, _)| **v == Verdict::Equivalent)
        .map(|(_, w)| *w)
        .sum();
    100.0 * good as f64 / total as f64
}

/// Cone-of-influence AND count of each golden output bit, at least 1.
pub fn partition_weights(golden: &Netlist) -> Vec<u64> {
    golden
        .output_bits()
        .into_iter()
        .map(|(_, l)| golden.cone_and_count(l, true).max(1) as u64)
        .collect()
}

/// First cycle at which the two netlists' outputs differ under `trace`.
pub fn replay_mismatch(golden: &Netlist, candidate: &Netlist, trace: &SimTrace) -> Option<usize> {
    let g = golden.simulate(trace).ok()?;
    let c = candidate.simulate(trace).ok()?;
    (0..trace.len()).find(|t| g.cycles[*t] != c.cycles[*t])
}

/// Inputs and both designs' outputs, one row per cycle.
pub fn counterexample_table(golden: &Netlist, candidate: &Netlist, trace: &SimTrace) -> String {
    let g = golden.simulate(trace).unwrap_or_default();
    let c = candidate.simulate(trace).unwrap_or_default();
    let mut cols: Vec<(String, Vec<String>)> = Vec::new();
    let ins: BTreeSet<&String> = trace.cycles.iter().flat_map(|r| r.keys()).collect();
    let cell = |row: Option<&BTreeMap<String, Bits>>, n: &str| {
        row.and_then(|r| r.get(n)).map(|b| b.to_string()).unwrap_or_else(|| "-".into())
    };
    for n in ins {
        cols.push((n.clone(), trace.cycles.iter().map(|r| cell(Some(r), n)).collect()));
    }
    for p in &golden.outputs {
        let rows = (0..trace.len())
            .map(|t| {
                let a = cell(g.cycles.get(t), &p.name);
                let b = cell(c.cycles.get(t), &p.name);
                if a == b {
                    a
                } else {
                    format!("{a}/{b}")
                }
            })
            .collect();
        cols.push((p.name.clone(), rows));
    }
    let mut out = String::from("cycle");
    let widths: Vec<usize> = cols
        .iter()
        .map(|(n, rows)| rows.iter().map(|r| r.len()).max().unwrap_or(0).max(n.len()))
        .collect();
    for ((n, _), w) in cols.iter().zip(&widths) {
        let _ = write!(out, "  {n:>w$}");
    }
    out.push('\n');
    for t in 0..trace.len() {
        let _ = write!(out, "{t:>5}");
        for ((_, rows), w) in cols.iter().zip(&widths) {
            let _ = write!(out, "  {:>w$}", rows[t]);
        }
        out.push('\n');
    }
    out.push_str("(outputs shown as golden/candidate where they differ)\n");
    out
}

// --------------------------------------------------------------- evaluation

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Stx {
    Pass,
    Fail { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EqvStatus {
    Equivalent,
    NotEquivalent { counterexample: SimTrace, table: String },
    Unknown { reason: String },
    Error { reason: String },
}

impl EqvStatus {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EqvStatus::Equivalent)
    }

    pub fn label(&self) -> &'static str {
        match self {
            EqvStatus::Equivalent => "equivalent",
            EqvStatus::NotEquivalent { .. } => "not_equivalent",
            EqvStatus::Unknown { .. } => "unknown",
            EqvStatus::Error { .. } => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub output: String,
    pub verdict: Verdict,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub task_id: String,
    pub stx: Stx,
    pub eqv: EqvStatus,
    pub partitions: Vec<Partition>,
    pub coverage: f64,
    pub unweighted_coverage: f64,
    /// `combinational` or `inductive`; empty when no check ran.
    pub method: String,
    pub runtime_ms: u64,
    pub stats: SolverStats,
}

impl EvalResult {
    fn failed(task_id: &str, stx: Stx, reason: String, start: Instant) -> Self {
        Self {
            task_id: task_id.to_string(),
            stx,
            eqv: EqvStatus::Error { reason },
            partitions: Vec::new(),
            coverage: 0.0,
            unweighted_coverage: 0.0,
            method: String::new(),
            runtime_ms: start.elapsed().as_millis() as u64,
            stats: SolverStats::default(),
        }
    }
}

/// The code inside the first fenced block, if the text has one.
pub fn strip_fences(text: &str) -> &str {
    let Some(open) = text.find("```") else { return text };
    let body = &text[open + 3..];
    let body = body.find('\n').map_or(body, |nl| &body[nl + 1..]);
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

/// Elaborates `target` from `source`; errors are reported as text.
pub fn elaborate_source(source: &str, target: &str) -> Result<Netlist, String> {
    let unit = parse(source).map_err(|e| format!("parse error: {e}"))?;
    let mut seen = BTreeSet::new();
    for m in &unit.modules {
        if !seen.insert(m.name.as_str()) {
            return Err(format!("module `{}` is defined more than once", m.name));
        }
    }
    elaborate(&unit, target, &BTreeMap::new()).map_err(|e| format!("elaboration error: {e}"))
}

pub fn golden_netlist(task: &Task) -> Result<Netlist, String> {
    elaborate_source(&task.reconstruct(), &task.target_module)
}

pub fn evaluate_candidate(task: &Task, candidate_source: &str, cfg: &EquivConfig) -> EvalResult {
    let start = Instant::now();
    let golden = match golden_netlist(task) {
        Ok(g) => g,
        Err(e) => {
            let cand = elaborate_source(&task.splice(candidate_source), &task.target_module);
            let stx = match cand {
                Ok(_) => Stx::Pass,
                Err(reason) => Stx::Fail { reason },
            };
            return EvalResult::failed(&task.task_id, stx, format!("golden design: {e}"), start);
        }
    };
    evaluate_against(&task.task_id, &golden, &task.splice(candidate_source), &task.target_module, cfg, start)
}

/// Evaluation against an already elaborated golden netlist.
pub fn evaluate_against(
    task_id: &str,
    golden: &Netlist,
    spliced_source: &str,
    target: &str,
    cfg: &EquivConfig,
    start: Instant,
) -> EvalResult {
    let cand = match elaborate_source(spliced_source, target) {
        Ok(c) => c,
        Err(reason) => {
            return EvalResult::failed(task_id, Stx::Fail { reason: reason.clone() }, reason, start);
        }
    };
    let miter = match build_miter(golden, &cand) {
        Ok(m) => m,
        Err(e) => {
            let reason = e.to_string();
            return EvalResult::failed(task_id, Stx::Fail { reason: reason.clone() }, reason, start);
        }
    };
    let weights = partition_weights(golden);
    if golden.clock.is_some() && cand.clock.is_some() && golden.clock != cand.clock {
        let reason = format!(
            "candidate is clocked by `{}`, golden by `{}`",
            cand.clock.as_deref().unwrap_or_default(),
            golden.clock.as_deref().unwrap_or_default()
        );
        let mut r = EvalResult::failed(task_id, Stx::Pass, String::new(), start);
        r.eqv = EqvStatus::Unknown { reason };
        r.partitions = partitions(&miter, &vec![Verdict::Unknown; weights.len()], &weights);
        return r;
    }

    let (verdicts, trace, method, stats, unknown_reason) = if golden.is_combinational() && cand.is_combinational() {
        let (bits, stats) = check_combinational(&miter, cfg.conflict_budget);
        let trace = bits.iter().find_map(|b| {
            b.witness.as_ref().map(|w| SimTrace {
                cycles: vec![w.inputs.clone()],
            })
        });
        let verdicts: Vec<Verdict> = bits.iter().map(|b| b.verdict).collect();
        (verdicts, trace, "combinational", stats, "conflict budget exhausted".to_string())
    } else {
        let r = check_inductive(&miter, cfg);
        let (trace, reason) = match r.status {
            SeqStatus::NotEquivalent(t) => (Some(t), String::new()),
            SeqStatus::Unknown(s) => (None, s),
            SeqStatus::Equivalent => (None, String::new()),
        };
        (r.verdicts, trace, "inductive", r.stats, reason)
    };

    let eqv = match trace {
        Some(t) => match replay_mismatch(golden, &cand, &t) {
            Some(at) => {
                let t = SimTrace {
                    cycles: t.cycles[..=at].to_vec(),
                };
                let table = counterexample_table(golden, &cand, &t);
                EqvStatus::NotEquivalent { counterexample: t, table }
            }
            None => EqvStatus::Error {
                reason: "counterexample did not reproduce in simulation".into(),
            },
        },
        None if verdicts.iter().all(|v| *v == Verdict::Equivalent) => EqvStatus::Equivalent,
        None => EqvStatus::Unknown { reason: unknown_reason },
    };
    let verdicts = if matches!(eqv, EqvStatus::Error { .. }) {
        vec![Verdict::Unknown; verdicts.len()]
    } else {
        verdicts
    };
    let ones = vec![1; weights.len()];
    EvalResult {
        task_id: task_id.to_string(),
        stx: Stx::Pass,
        coverage: partition_coverage(&verdicts, &weights),
        unweighted_coverage: partition_coverage(&verdicts, &ones),
        partitions: partitions(&miter, &verdicts, &weights),
        eqv,
        method: method.to_string(),
        runtime_ms: start.elapsed().as_millis() as u64,
        stats,
    }
}

fn partitions(m: &Miter, verdicts: &[Verdict], weights: &[u64]) -> Vec<Partition> {
    m.outputs
        .iter()
        .zip(verdicts)
        .zip(weights)
        .map(|((o, v), w)| Partition {
            output: o.name.clone(),
            verdict: *v,
            weight: *w,
        })
        .collect()
}

/// The golden module judged against itself.
pub fn self_verify(task: &Task, cfg: &EquivConfig) -> Result<(), String> {
    let r = evaluate_candidate(task, &task.golden_source, cfg);
    match (&r.stx, &r.eqv) {
        (Stx::Fail { reason }, _) => Err(reason.clone()),
        (Stx::Pass, EqvStatus::Equivalent) => Ok(()),
        (Stx::Pass, EqvStatus::Error { reason }) | (Stx::Pass, EqvStatus::Unknown { reason }) => Err(reason.clone()),
        (Stx::Pass, EqvStatus::NotEquivalent { .. }) => Err("golden design is not equivalent to itself".into()),
    }
}
