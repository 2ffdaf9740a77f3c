// SPDX-License-Identifier: Apache-2.0

//! Elaboration of a parsed module hierarchy into a flat netlist.
//!
//! Every declared signal bit first becomes a placeholder wire node. Drivers
//! (continuous assigns, always blocks, port connections) are attached to
//! wires, and a final depth-first pass from the outputs substitutes each
//! wire by its driver. That pass is where undriven reads and combinational
//! loops surface.
//!
//! Conventions: two-valued logic; one clock, which must be a primary input;
//! asynchronous resets are treated as synchronous; a register's reset value
//! comes from the constant assigned under a top-level reset `if`, else its
//! declaration initializer, else 0; dynamic reads outside a vector or
//! memory return 0.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::aig::{const_word, shift_const, word_value, Aig, Lit, Node};
use super::{Netlist, PortBits, PortInfo, Register};
use crate::frontend::{
    Always, BinaryOp, CaseKind, Connections, Direction, Edge, Expr, Instance, ItemKind, ModuleDecl, NetKind, Number,
    ParamAssigns, Range, Sensitivity, SourceUnit, Stmt, UnaryOp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElabErrorKind {
    Unsupported,
    LatchInferred,
    MultipleDrivers,
    CombinationalLoop,
    Undriven,
    Clock,
    UnknownModule,
    Undeclared,
    NotConstant,
    Width,
}

impl fmt::Display for ElabErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElabErrorKind::Unsupported => "unsupported construct",
            ElabErrorKind::LatchInferred => "latch inferred",
            ElabErrorKind::MultipleDrivers => "multiple drivers",
            ElabErrorKind::CombinationalLoop => "combinational loop",
            ElabErrorKind::Undriven => "undriven signal",
            ElabErrorKind::Clock => "clocking",
            ElabErrorKind::UnknownModule => "unknown module",
            ElabErrorKind::Undeclared => "undeclared identifier",
            ElabErrorKind::NotConstant => "not constant",
            ElabErrorKind::Width => "width",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElabError {
    pub kind: ElabErrorKind,
    pub message: String,
    pub module: String,
    /// Byte offset of the offending item in the parsed source.
    pub offset: Option<usize>,
}

impl fmt::Display for ElabError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)?;
        if !self.module.is_empty() {
            write!(f, " (module `{}`", self.module)?;
            if let Some(o) = self.offset {
                write!(f, ", byte {o}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl std::error::Error for ElabError {}

type R<T> = Result<T, ElabError>;

const MAX_SIGNAL_BITS: i64 = 1 << 16;
const MAX_MEMORY_BITS: usize = 256;
const MAX_MUL_WIDTH: usize = 16;
const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone)]
struct ConstVal {
    bits: Vec<Lit>,
    signed: bool,
    msb: i64,
    lsb: i64,
}

impl ConstVal {
    fn new(bits: Vec<Lit>, signed: bool) -> Self {
        let msb = bits.len() as i64 - 1;
        Self {
            bits,
            signed,
            msb,
            lsb: 0,
        }
    }
}

struct Sig {
    name: String,
    width: usize,
    words: usize,
    signed: bool,
    msb: i64,
    lsb: i64,
    word_first: i64,
    word_last: i64,
    is_reg: bool,
    is_memory: bool,
    base: usize,
}

impl Sig {
    fn word_pos(&self, idx: i64) -> Option<usize> {
        range_pos(self.word_last, self.word_first, idx).map(|p| {
            // storage order: word_first is word 0
            if self.word_first <= self.word_last {
                (idx - self.word_first) as usize
            } else {
                p
            }
        })
    }

    fn word_index(&self, k: usize) -> i64 {
        if self.word_first <= self.word_last {
            self.word_first + k as i64
        } else {
            self.word_first - k as i64
        }
    }

    fn bit_index(&self, p: usize) -> i64 {
        if self.msb >= self.lsb {
            self.lsb + p as i64
        } else {
            self.lsb - p as i64
        }
    }

    fn bit_name(&self, bit: usize) -> String {
        if self.is_memory {
            let w = bit / self.width;
            let b = bit % self.width;
            format!("{}[{}][{}]", self.name, self.word_index(w), self.bit_index(b))
        } else if self.width == 1 && self.msb == 0 && self.lsb == 0 {
            self.name.clone()
        } else {
            format!("{}[{}]", self.name, self.bit_index(bit))
        }
    }
}

/// Position (LSB = 0) of declared index `idx` in a `[msb:lsb]` range.
fn range_pos(msb: i64, lsb: i64, idx: i64) -> Option<usize> {
    if msb >= lsb {
        (lsb..=msb).contains(&idx).then(|| (idx - lsb) as usize)
    } else {
        (msb..=lsb).contains(&idx).then(|| (lsb - idx) as usize)
    }
}

struct WireSlot {
    lit: Lit,
    sig: usize,
    bit: usize,
    driver: Option<Lit>,
    owner: u32,
}

struct RawReg {
    name: String,
    next: Lit,
    reset: bool,
}

struct Scope<'u> {
    module: &'u ModuleDecl,
    prefix: String,
    params: HashMap<String, ConstVal>,
    sigs: HashMap<String, usize>,
    offset: usize,
}

enum Ref {
    Sig(usize),
    Param(ConstVal),
}

type View<'a> = Option<&'a BTreeMap<usize, Option<Lit>>>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Comb,
    Seq,
}

#[derive(Clone, Default)]
struct BlockState {
    next: BTreeMap<usize, Option<Lit>>,
    view: BTreeMap<usize, Option<Lit>>,
}

/// Per value bit (LSB first): the wires it may land in, each under a condition.
type Targets = Vec<Vec<(usize, Lit)>>;

struct Elab<'u> {
    unit: &'u SourceUnit,
    g: Aig,
    sigs: Vec<Sig>,
    wires: Vec<WireSlot>,
    regs: Vec<RawReg>,
    reg_init: HashMap<usize, bool>,
    owners: u32,
    clocks: Vec<(Lit, String, usize)>,
    raw_inputs: Vec<(usize, usize)>,
    notes: Vec<String>,
    stack: Vec<String>,
}

/// Flattens `top` and everything it instantiates into a netlist.
///
/// `overrides` replaces default values of the top module's parameters.
pub fn elaborate(unit: &SourceUnit, top: &str, overrides: &BTreeMap<String, i64>) -> Result<Netlist, ElabError> {
    let m = unit.module(top).ok_or_else(|| ElabError {
        kind: ElabErrorKind::UnknownModule,
        message: format!("no module named `{top}`"),
        module: String::new(),
        offset: None,
    })?;
    let mut e = Elab {
        unit,
        g: Aig::new(),
        sigs: Vec::new(),
        wires: Vec::new(),
        regs: Vec::new(),
        reg_init: HashMap::new(),
        owners: 0,
        clocks: Vec::new(),
        raw_inputs: Vec::new(),
        notes: Vec::new(),
        stack: Vec::new(),
    };
    let ov = overrides
        .iter()
        .map(|(k, v)| (k.clone(), ConstVal::new(const_word(*v, 32), true)))
        .collect();
    let sc = e.instantiate(m, String::new(), ov)?;
    e.finish(&sc)
}

impl<'u> Elab<'u> {
    fn err(&self, sc: &Scope, kind: ElabErrorKind, message: impl Into<String>) -> ElabError {
        ElabError {
            kind,
            message: message.into(),
            module: sc.module.name.clone(),
            offset: Some(sc.offset),
        }
    }

    fn new_owner(&mut self) -> u32 {
        self.owners += 1;
        self.owners
    }

    fn wire_name(&self, w: usize) -> String {
        let slot = &self.wires[w];
        self.sigs[slot.sig].bit_name(slot.bit)
    }

    fn drive(&mut self, sc: &Scope, w: usize, lit: Lit, owner: u32) -> R<()> {
        let slot = &mut self.wires[w];
        if slot.owner != 0 && slot.owner != owner {
            let name = self.wire_name(w);
            return Err(self.err(sc, ElabErrorKind::MultipleDrivers, format!("`{name}` has more than one driver")));
        }
        slot.owner = owner;
        slot.driver = Some(lit);
        Ok(())
    }

    // ----------------------------------------------------------- hierarchy

    fn instantiate(&mut self, m: &'u ModuleDecl, prefix: String, overrides: HashMap<String, ConstVal>) -> R<Scope<'u>> {
        let mut sc = Scope {
            module: m,
            prefix,
            params: HashMap::new(),
            sigs: HashMap::new(),
            offset: m.span.start,
        };
        if self.stack.iter().any(|n| *n == m.name) || self.stack.len() >= MAX_DEPTH {
            return Err(self.err(&sc, ElabErrorKind::Unsupported, format!("recursive instantiation of `{}`", m.name)));
        }
        for name in overrides.keys() {
            if !m.params.iter().any(|p| &p.name == name && !p.local) {
                return Err(self.err(&sc, ElabErrorKind::Undeclared, format!("module has no parameter `{name}`")));
            }
        }
        self.stack.push(m.name.clone());
        for p in &m.params {
            sc.offset = p.span.start;
            let v = match overrides.get(&p.name) {
                Some(v) if !p.local => v.clone(),
                _ => self.const_val(&sc, &p.value)?,
            };
            let v = if p.integer {
                ConstVal::new(fit(&v.bits, 32, v.signed), true)
            } else if let Some(r) = &p.range {
                let (msb, lsb) = self.range(&sc, r)?;
                let w = (msb - lsb).unsigned_abs() as usize + 1;
                ConstVal {
                    bits: fit(&v.bits, w, v.signed),
                    signed: p.signed,
                    msb,
                    lsb,
                }
            } else if p.signed {
                ConstVal::new(v.bits, true)
            } else {
                v
            };
            sc.params.insert(p.name.clone(), v);
        }
        sc.offset = m.span.start;
        for p in &m.ports {
            let (msb, lsb) = match &p.range {
                Some(r) => self.range(&sc, r)?,
                None => (0, 0),
            };
            let id = self.declare(&sc, &p.name, msb, lsb, None, p.signed, p.is_reg)?;
            sc.sigs.insert(p.name.clone(), id);
        }
        for item in &m.items {
            sc.offset = item.span.start;
            let ItemKind::Net(decl) = &item.kind else { continue };
            let is_reg = decl.kind == NetKind::Reg;
            for n in &decl.names {
                if let Some(&id) = sc.sigs.get(&n.name) {
                    let is_port = m.port(&n.name).is_some();
                    if !is_port || !n.dims.is_empty() {
                        return Err(self.err(&sc, ElabErrorKind::Undeclared, format!("`{}` is declared twice", n.name)));
                    }
                    let s = &mut self.sigs[id];
                    s.is_reg |= is_reg;
                    s.signed |= decl.signed;
                    continue;
                }
                if sc.params.contains_key(&n.name) {
                    return Err(self.err(&sc, ElabErrorKind::Undeclared, format!("`{}` is declared twice", n.name)));
                }
                let (msb, lsb) = match &decl.range {
                    Some(r) => self.range(&sc, r)?,
                    None => (0, 0),
                };
                let dims = match n.dims.as_slice() {
                    [] => None,
                    [d] => Some(self.range(&sc, d)?),
                    _ => {
                        return Err(self.err(&sc, ElabErrorKind::Unsupported, "multi-dimensional memory"));
                    }
                };
                let id = self.declare(&sc, &n.name, msb, lsb, dims, decl.signed, is_reg)?;
                sc.sigs.insert(n.name.clone(), id);
            }
        }
        for item in &m.items {
            sc.offset = item.span.start;
            match &item.kind {
                ItemKind::Net(decl) => {
                    for n in &decl.names {
                        let Some(init) = &n.init else { continue };
                        let id = sc.sigs[&n.name];
                        if decl.kind == NetKind::Wire {
                            let owner = self.new_owner();
                            self.cont_assign(&sc, &Expr::Ident(n.name.clone()), init, owner)?;
                        } else {
                            let s = &self.sigs[id];
                            let (w, base) = (s.width * s.words, s.base);
                            let (rw, rs) = self.ty(&sc, init)?;
                            let v = self.eval(&sc, None, init, w.max(rw), rs)?;
                            for k in 0..w {
                                let b = v[k].const_value().ok_or_else(|| {
                                    self.err(&sc, ElabErrorKind::NotConstant, format!("initializer of `{}`", n.name))
                                })?;
                                self.reg_init.insert(base + k, b);
                            }
                        }
                    }
                }
                ItemKind::Assign { lhs, rhs } => {
                    let owner = self.new_owner();
                    self.cont_assign(&sc, lhs, rhs, owner)?;
                }
                ItemKind::Always(a) => self.always(&sc, a)?,
                ItemKind::Instance(inst) => self.instance(&sc, inst)?,
                ItemKind::Opaque { keyword } => {
                    return Err(self.err(&sc, ElabErrorKind::Unsupported, format!("`{keyword}` is not supported")));
                }
                ItemKind::PortDir(_) | ItemKind::Param(_) => {}
            }
        }
        self.stack.pop();
        Ok(sc)
    }

    fn declare(
        &mut self,
        sc: &Scope,
        name: &str,
        msb: i64,
        lsb: i64,
        dims: Option<(i64, i64)>,
        signed: bool,
        is_reg: bool,
    ) -> R<usize> {
        let width = (msb - lsb).abs() + 1;
        let (words, word_first, word_last) = match dims {
            Some((a, b)) => ((a - b).abs() + 1, a, b),
            None => (1, 0, 0),
        };
        if width > MAX_SIGNAL_BITS || words * width > MAX_SIGNAL_BITS {
            return Err(self.err(sc, ElabErrorKind::Width, format!("`{name}` is too wide")));
        }
        if dims.is_some() && (words * width) as usize > MAX_MEMORY_BITS {
            return Err(self.err(
                sc,
                ElabErrorKind::Unsupported,
                format!("memory `{name}` exceeds {MAX_MEMORY_BITS} bits"),
            ));
        }
        let id = self.sigs.len();
        let base = self.wires.len();
        self.sigs.push(Sig {
            name: format!("{}{}", sc.prefix, name),
            width: width as usize,
            words: words as usize,
            signed,
            msb,
            lsb,
            word_first,
            word_last,
            is_reg,
            is_memory: dims.is_some(),
            base,
        });
        for bit in 0..(width * words) as usize {
            let w = self.wires.len();
            let lit = self.g.add_source(Node::Wire(w as u32));
            self.wires.push(WireSlot {
                lit,
                sig: id,
                bit,
                driver: None,
                owner: 0,
            });
        }
        Ok(id)
    }

    fn instance(&mut self, sc: &Scope<'u>, inst: &Instance) -> R<()> {
        let unit = self.unit;
        let child = unit.module(&inst.module).ok_or_else(|| {
            self.err(sc, ElabErrorKind::UnknownModule, format!("no module named `{}`", inst.module))
        })?;
        let mut ov = HashMap::new();
        match &inst.params {
            ParamAssigns::Named(v) => {
                for (n, e) in v {
                    if let Some(e) = e {
                        ov.insert(n.clone(), self.const_val(sc, e)?);
                    }
                }
            }
            ParamAssigns::Positional(v) => {
                let names: Vec<&String> = child.params.iter().filter(|p| !p.local).map(|p| &p.name).collect();
                if v.len() > names.len() {
                    return Err(self.err(sc, ElabErrorKind::Width, format!("too many parameters for `{}`", inst.module)));
                }
                for (n, e) in names.into_iter().zip(v) {
                    ov.insert(n.clone(), self.const_val(sc, e)?);
                }
            }
        }
        let child_sc = self.instantiate(child, format!("{}{}.", sc.prefix, inst.name), ov)?;
        let mut conns: Vec<(usize, Expr)> = Vec::new();
        match &inst.conns {
            Connections::Named(v) => {
                for (n, e) in v {
                    let Some(i) = child.ports.iter().position(|p| &p.name == n) else {
                        return Err(self.err(sc, ElabErrorKind::Undeclared, format!("`{}` has no port `{n}`", inst.module)));
                    };
                    if conns.iter().any(|(j, _)| *j == i) {
                        return Err(self.err(sc, ElabErrorKind::MultipleDrivers, format!("port `{n}` connected twice")));
                    }
                    if let Some(e) = e {
                        conns.push((i, e.clone()));
                    }
                }
            }
            Connections::Positional(v) => {
                if v.len() > child.ports.len() {
                    return Err(self.err(sc, ElabErrorKind::Width, format!("too many ports for `{}`", inst.module)));
                }
                for (i, e) in v.iter().enumerate() {
                    if let Some(e) = e {
                        conns.push((i, e.clone()));
                    }
                }
            }
            Connections::Wildcard => {
                for (i, p) in child.ports.iter().enumerate() {
                    conns.push((i, Expr::Ident(p.name.clone())));
                }
            }
        }
        for (i, e) in conns {
            let port = &child.ports[i];
            let cid = child_sc.sigs[&port.name];
            let (cw, cbase, csigned) = {
                let s = &self.sigs[cid];
                (s.width, s.base, s.signed)
            };
            let owner = self.new_owner();
            match port.direction {
                Direction::In => {
                    let (rw, rs) = self.ty(sc, &e)?;
                    let v = self.eval(sc, None, &e, cw.max(rw), rs)?;
                    for k in 0..cw {
                        self.drive(sc, cbase + k, v[k], owner)?;
                    }
                }
                Direction::Out => {
                    let t = self.lvalue(sc, None, &e)?;
                    let t = static_targets(&t).ok_or_else(|| {
                        self.err(sc, ElabErrorKind::Unsupported, "dynamic select in an output connection")
                    })?;
                    let src: Vec<Lit> = (0..cw).map(|k| self.wires[cbase + k].lit).collect();
                    let v = fit(&src, t.len(), csigned);
                    for (k, w) in t.into_iter().enumerate() {
                        self.drive(sc, w, v[k], owner)?;
                    }
                }
                Direction::Inout => {
                    return Err(self.err(sc, ElabErrorKind::Unsupported, format!("inout port `{}`", port.name)));
                }
            }
        }
        Ok(())
    }

    // ---------------------------------------------------------- statements

    fn cont_assign(&mut self, sc: &Scope, lhs: &Expr, rhs: &Expr, owner: u32) -> R<()> {
        let t = self.lvalue(sc, None, lhs)?;
        let t = static_targets(&t)
            .ok_or_else(|| self.err(sc, ElabErrorKind::Unsupported, "dynamic select on the left of `assign`"))?;
        for w in &t {
            let s = &self.sigs[self.wires[*w].sig];
            if s.is_reg {
                let name = s.name.clone();
                return Err(self.err(sc, ElabErrorKind::Unsupported, format!("continuous assignment to reg `{name}`")));
            }
        }
        let (rw, rs) = self.ty(sc, rhs)?;
        let v = self.eval(sc, None, rhs, t.len().max(rw), rs)?;
        for (k, w) in t.into_iter().enumerate() {
            self.drive(sc, w, v[k], owner)?;
        }
        Ok(())
    }

    fn always(&mut self, sc: &Scope, a: &Always) -> R<()> {
        let owner = self.new_owner();
        match &a.sens {
            Sensitivity::Comb => {
                let mut st = BlockState::default();
                self.exec(sc, Mode::Comb, &a.body, &mut st)?;
                for (w, v) in st.next {
                    match v {
                        Some(l) => self.drive(sc, w, l, owner)?,
                        None => {
                            let name = self.sigs[self.wires[w].sig].name.clone();
                            return Err(self.err(
                                sc,
                                ElabErrorKind::LatchInferred,
                                format!("latch inferred for `{name}`: not assigned on every path"),
                            ));
                        }
                    }
                }
                Ok(())
            }
            Sensitivity::Edges(edges) => self.clocked(sc, a, edges, owner),
            Sensitivity::Other => Err(self.err(sc, ElabErrorKind::Unsupported, "event control expression")),
        }
    }

    fn clocked(&mut self, sc: &Scope, a: &Always, edges: &[(Edge, String)], owner: u32) -> R<()> {
        let body = unwrap_block(&a.body);
        let (clock, async_reset) = if edges.len() == 1 {
            (&edges[0], None)
        } else {
            let Stmt::If { cond, .. } = body else {
                return Err(self.err(sc, ElabErrorKind::Clock, "several edges without a reset `if`"));
            };
            let ids = distinct_idents(cond);
            let [r] = ids.as_slice() else {
                return Err(self.err(sc, ElabErrorKind::Clock, "unrecognized asynchronous reset condition"));
            };
            let Some(reset_edge) = edges.iter().find(|(_, n)| n == r) else {
                return Err(self.err(sc, ElabErrorKind::Clock, "unrecognized asynchronous reset condition"));
            };
            let rest: Vec<&(Edge, String)> = edges.iter().filter(|(_, n)| n != r).collect();
            let [clk] = rest.as_slice() else {
                return Err(self.err(sc, ElabErrorKind::Clock, "more than one clock in one always block"));
            };
            (*clk, Some(reset_edge))
        };
        if clock.0 != Edge::Pos {
            return Err(self.err(sc, ElabErrorKind::Clock, format!("negedge clock `{}`", clock.1)));
        }
        let clk_lit = match self.lookup(sc, &clock.1)? {
            Ref::Sig(id) if self.sigs[id].width == 1 && !self.sigs[id].is_memory => self.wires[self.sigs[id].base].lit,
            _ => return Err(self.err(sc, ElabErrorKind::Clock, format!("clock `{}` is not a 1-bit signal", clock.1))),
        };
        self.clocks.push((clk_lit, sc.module.name.clone(), sc.offset));

        // Reset values from a top-level reset `if`.
        let mut reset_vals: BTreeMap<usize, bool> = BTreeMap::new();
        if let Stmt::If { cond, then, els } = body {
            let ids = distinct_idents(cond);
            if let [r] = ids.as_slice() {
                let active_high = match async_reset {
                    Some((edge, n)) if n == r => Some(*edge == Edge::Pos),
                    Some(_) => None,
                    None => reset_name_polarity(r),
                };
                if let (Some(active_high), Ok(Ref::Sig(id))) = (active_high, self.lookup(sc, r)) {
                    let s = &self.sigs[id];
                    if s.width == 1 && !s.is_memory {
                        let rl = self.wires[s.base].lit;
                        let c = self.cond_lit(sc, None, cond)?;
                        let branch = if c == rl {
                            Some(if active_high { Some(&**then) } else { els.as_deref() })
                        } else if c == !rl {
                            Some(if active_high { els.as_deref() } else { Some(&**then) })
                        } else {
                            None
                        };
                        match branch {
                            Some(Some(b)) => {
                                let mut st = BlockState::default();
                                self.exec(sc, Mode::Comb, b, &mut st)?;
                                for (w, v) in st.next {
                                    if let Some(b) = v.and_then(Lit::const_value) {
                                        reset_vals.insert(w, b);
                                    }
                                }
                            }
                            Some(None) => {}
                            None if async_reset.is_some() => {
                                return Err(self.err(sc, ElabErrorKind::Clock, "unrecognized asynchronous reset condition"));
                            }
                            None => {}
                        }
                        if async_reset.is_some() {
                            let note = format!("asynchronous reset `{}{}` treated as synchronous", sc.prefix, r);
                            if !self.notes.contains(&note) {
                                self.notes.push(note);
                            }
                        }
                    }
                }
            }
        }

        let mut st = BlockState::default();
        self.exec(sc, Mode::Seq, &a.body, &mut st)?;
        for (w, v) in st.next {
            let next = v.expect("sequential state is always defined");
            let reset = reset_vals
                .get(&w)
                .or_else(|| self.reg_init.get(&w))
                .copied()
                .unwrap_or(false);
            let latch = self.g.add_source(Node::Latch(self.regs.len() as u32));
            self.regs.push(RawReg {
                name: self.wire_name(w),
                next,
                reset,
            });
            self.drive(sc, w, latch, owner)?;
        }
        Ok(())
    }

    fn base_next(&self, mode: Mode, w: usize) -> Option<Lit> {
        match mode {
            Mode::Comb => None,
            Mode::Seq => Some(self.wires[w].lit),
        }
    }

    fn mux_opt(&mut self, c: Lit, a: Option<Lit>, b: Option<Lit>) -> Option<Lit> {
        match c.const_value() {
            Some(true) => a,
            Some(false) => b,
            None => match (a, b) {
                (Some(x), Some(y)) => Some(self.g.mux(c, x, y)),
                _ => None,
            },
        }
    }

    fn merge(&mut self, mode: Mode, c: Lit, a: BlockState, b: BlockState) -> BlockState {
        let mut out = BlockState::default();
        let keys: std::collections::BTreeSet<usize> = a.next.keys().chain(b.next.keys()).copied().collect();
        for w in keys {
            let x = a.next.get(&w).copied().unwrap_or_else(|| self.base_next(mode, w));
            let y = b.next.get(&w).copied().unwrap_or_else(|| self.base_next(mode, w));
            let v = self.mux_opt(c, x, y);
            out.next.insert(w, v);
        }
        let keys: std::collections::BTreeSet<usize> = a.view.keys().chain(b.view.keys()).copied().collect();
        for w in keys {
            let wl = Some(self.wires[w].lit);
            let x = a.view.get(&w).copied().unwrap_or(wl);
            let y = b.view.get(&w).copied().unwrap_or(wl);
            let v = self.mux_opt(c, x, y);
            out.view.insert(w, v);
        }
        out
    }

    fn exec(&mut self, sc: &Scope, mode: Mode, s: &Stmt, st: &mut BlockState) -> R<()> {
        match s {
            Stmt::Block(v) => {
                for x in v {
                    self.exec(sc, mode, x, st)?;
                }
            }
            Stmt::Null => {}
            Stmt::Opaque { keyword, span } => {
                return Err(ElabError {
                    kind: ElabErrorKind::Unsupported,
                    message: format!("`{keyword}` statement is not supported"),
                    module: sc.module.name.clone(),
                    offset: Some(span.start),
                });
            }
            Stmt::If { cond, then, els } => {
                let c = self.cond_lit(sc, Some(&st.view), cond)?;
                match c.const_value() {
                    Some(true) => self.exec(sc, mode, then, st)?,
                    Some(false) => {
                        if let Some(e) = els {
                            self.exec(sc, mode, e, st)?;
                        }
                    }
                    None => {
                        let mut t = st.clone();
                        self.exec(sc, mode, then, &mut t)?;
                        let mut e = st.clone();
                        if let Some(x) = els {
                            self.exec(sc, mode, x, &mut e)?;
                        }
                        *st = self.merge(mode, c, t, e);
                    }
                }
            }
            Stmt::Case {
                kind,
                subject,
                arms,
                default,
            } => self.case(sc, mode, *kind, subject, arms, default.as_deref(), st)?,
            Stmt::Assign { blocking, lhs, rhs } => {
                let t = self.lvalue(sc, Some(&st.view), lhs)?;
                for ws in &t {
                    for (w, _) in ws {
                        let s = &self.sigs[self.wires[*w].sig];
                        if !s.is_reg {
                            let name = s.name.clone();
                            return Err(self.err(
                                sc,
                                ElabErrorKind::Unsupported,
                                format!("procedural assignment to wire `{name}`"),
                            ));
                        }
                    }
                }
                let (rw, rs) = self.ty(sc, rhs)?;
                let v = self.eval(sc, Some(&st.view), rhs, t.len().max(rw), rs)?;
                for (k, ws) in t.iter().enumerate() {
                    for (w, c) in ws {
                        let old = st.next.get(w).copied().unwrap_or_else(|| self.base_next(mode, *w));
                        let new = self.mux_opt(*c, Some(v[k]), old);
                        st.next.insert(*w, new);
                        if *blocking {
                            let old = st.view.get(w).copied().unwrap_or(Some(self.wires[*w].lit));
                            let new = self.mux_opt(*c, Some(v[k]), old);
                            st.view.insert(*w, new);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn case(
        &mut self,
        sc: &Scope,
        mode: Mode,
        kind: CaseKind,
        subject: &Expr,
        arms: &[crate::frontend::CaseArm],
        default: Option<&Stmt>,
        st: &mut BlockState,
    ) -> R<()> {
        let (mut m, mut t) = self.ty(sc, subject)?;
        for arm in arms {
            for l in &arm.labels {
                let (lw, ls) = self.ty(sc, l)?;
                m = m.max(lw);
                t &= ls;
            }
        }
        let subj = self.eval(sc, Some(&st.view), subject, m, t)?;
        let mut conds = Vec::with_capacity(arms.len());
        // (care mask, value) per label, for the coverage check.
        let mut patterns: Option<Vec<(Vec<bool>, Vec<bool>)>> = Some(Vec::new());
        for arm in arms {
            let mut any = Lit::FALSE;
            for l in &arm.labels {
                let wild = match l {
                    Expr::Number(n) => {
                        let b = n.bits().ok_or_else(|| self.err(sc, ElabErrorKind::Unsupported, "malformed literal"))?;
                        b.unknown.iter().any(|u| *u).then_some(b)
                    }
                    _ => None,
                };
                let c = match wild {
                    Some(b) => {
                        if kind == CaseKind::Case {
                            return Err(self.err(sc, ElabErrorKind::Unsupported, "x/z in a case label"));
                        }
                        let vals: Vec<Lit> = b.bits.iter().map(|x| Lit::from_bool(*x)).collect();
                        let vals = fit(&vals, m, t && b.signed);
                        let care: Vec<bool> = (0..m).map(|p| !b.unknown.get(p).copied().unwrap_or(false)).collect();
                        let mut eqs = Vec::new();
                        for p in 0..m {
                            if care[p] {
                                eqs.push(self.g.xnor(subj[p], vals[p]));
                            }
                        }
                        if let Some(pats) = patterns.as_mut() {
                            pats.push((care, vals.iter().map(|l| l == &Lit::TRUE).collect()));
                        }
                        self.g.and_all(&eqs)
                    }
                    None => {
                        let v = self.eval(sc, Some(&st.view), l, m, t)?;
                        match (patterns.as_mut(), v.iter().map(|x| x.const_value()).collect::<Option<Vec<bool>>>()) {
                            (Some(pats), Some(bits)) => pats.push((vec![true; m], bits)),
                            _ => patterns = None,
                        }
                        self.g.eq(&subj, &v)
                    }
                };
                any = self.g.or(any, c);
            }
            conds.push(any);
        }
        let full = default.is_none()
            && !arms.is_empty()
            && m <= 16
            && patterns.is_some_and(|pats| {
                (0u32..1 << m).all(|v| {
                    pats.iter()
                        .any(|(care, val)| (0..m).all(|p| !care[p] || ((v >> p & 1 == 1) == val[p])))
                })
            });
        let mut acc = st.clone();
        if let Some(d) = default {
            self.exec(sc, mode, d, &mut acc)?;
        }
        for (i, arm) in arms.iter().enumerate().rev() {
            let mut s = st.clone();
            self.exec(sc, mode, &arm.body, &mut s)?;
            if full && i == arms.len() - 1 {
                acc = s;
                continue;
            }
            acc = self.merge(mode, conds[i], s, acc);
        }
        *st = acc;
        Ok(())
    }

    // ------------------------------------------------------------ lvalues

    fn lvalue(&mut self, sc: &Scope, view: View, e: &Expr) -> R<Targets> {
        match e {
            Expr::Concat(items) => {
                let mut out = Vec::new();
                for it in items.iter().rev() {
                    out.extend(self.lvalue(sc, view, it)?);
                }
                Ok(out)
            }
            Expr::Index { base, index } if self.is_memory_ident(sc, base) => self.lv_base(sc, view, e).map(|(t, _, _)| t),
            Expr::Ident(_) => self.lv_base(sc, view, e).map(|(t, _, _)| t),
            Expr::Index { base, index } => {
                let (t, msb, lsb) = self.lv_base(sc, view, base)?;
                let (iw, is) = self.ty(sc, index)?;
                let idx = self.eval(sc, view, index, iw, is)?;
                if let Some(i) = word_value(&idx, is) {
                    let p = range_pos(msb, lsb, i)
                        .ok_or_else(|| self.err(sc, ElabErrorKind::Width, format!("index {i} out of range")))?;
                    return Ok(vec![t[p].clone()]);
                }
                let mut bit = Vec::new();
                for (p, ws) in t.iter().enumerate() {
                    let di = if msb >= lsb { lsb + p as i64 } else { lsb - p as i64 };
                    let c = self.eq_const(&idx, is, di);
                    for (w, c0) in ws {
                        let cc = self.g.and(*c0, c);
                        if cc != Lit::FALSE {
                            bit.push((*w, cc));
                        }
                    }
                }
                Ok(vec![bit])
            }
            Expr::Slice { base, msb: hi, lsb: lo } => {
                let (t, msb, lsb) = self.lv_base(sc, view, base)?;
                let a = self.const_int(sc, hi)?;
                let b = self.const_int(sc, lo)?;
                let (pa, pb) = self.slice_positions(sc, msb, lsb, a, b)?;
                Ok(t[pb..=pa].to_vec())
            }
            Expr::IndexedSlice {
                base,
                start,
                width,
                up,
            } => {
                let (t, msb, lsb) = self.lv_base(sc, view, base)?;
                let w = self.const_int(sc, width)?;
                if w < 1 {
                    return Err(self.err(sc, ElabErrorKind::Width, "part-select width must be positive"));
                }
                let (sw, ss) = self.ty(sc, start)?;
                let sv = self.eval(sc, view, start, sw, ss)?;
                let lo_of = |s: i64| if *up { s } else { s - w + 1 };
                if let Some(s) = word_value(&sv, ss) {
                    let (pa, pb) = self.slice_positions(sc, msb, lsb, lo_of(s) + w - 1, lo_of(s))?;
                    return Ok(t[pb..=pa].to_vec());
                }
                let mut out: Targets = vec![Vec::new(); w as usize];
                let (lo_idx, hi_idx) = (msb.min(lsb), msb.max(lsb));
                for s in (lo_idx - w + 1)..=hi_idx {
                    let (lo, hi) = (lo_of(s), lo_of(s) + w - 1);
                    if lo < lo_idx || hi > hi_idx {
                        continue;
                    }
                    let c = self.eq_const(&sv, ss, s);
                    if c == Lit::FALSE {
                        continue;
                    }
                    let pl = range_pos(msb, lsb, lo).expect("in range");
                    let ph = range_pos(msb, lsb, hi).expect("in range");
                    let p0 = pl.min(ph);
                    for k in 0..w as usize {
                        for (wire, c0) in &t[p0 + k] {
                            let cc = self.g.and(*c0, c);
                            out[k].push((*wire, cc));
                        }
                    }
                }
                Ok(out)
            }
            _ => Err(self.err(sc, ElabErrorKind::Unsupported, "expression is not assignable")),
        }
    }

    fn is_memory_ident(&self, sc: &Scope, e: &Expr) -> bool {
        matches!(e, Expr::Ident(n) if sc.sigs.get(n).is_some_and(|id| self.sigs[*id].is_memory))
    }

    /// Assignable base: a whole vector, or one memory word.
    fn lv_base(&mut self, sc: &Scope, view: View, e: &Expr) -> R<(Targets, i64, i64)> {
        match e {
            Expr::Ident(n) => match self.lookup(sc, n)? {
                Ref::Sig(id) => {
                    let s = &self.sigs[id];
                    if s.is_memory {
                        return Err(self.err(sc, ElabErrorKind::Unsupported, format!("memory `{n}` used without a word index")));
                    }
                    Ok(((0..s.width).map(|k| vec![(s.base + k, Lit::TRUE)]).collect(), s.msb, s.lsb))
                }
                Ref::Param(_) => Err(self.err(sc, ElabErrorKind::Unsupported, format!("assignment to parameter `{n}`"))),
            },
            Expr::Index { base, index } if self.is_memory_ident(sc, base) => {
                let Expr::Ident(n) = &**base else { unreachable!() };
                let id = sc.sigs[n];
                let (iw, is) = self.ty(sc, index)?;
                let idx = self.eval(sc, view, index, iw, is)?;
                let (width, words, base_w, msb, lsb) = {
                    let s = &self.sigs[id];
                    (s.width, s.words, s.base, s.msb, s.lsb)
                };
                if let Some(i) = word_value(&idx, is) {
                    let k = self.sigs[id]
                        .word_pos(i)
                        .ok_or_else(|| self.err(sc, ElabErrorKind::Width, format!("word {i} of `{n}` out of range")))?;
                    return Ok(((0..width).map(|b| vec![(base_w + k * width + b, Lit::TRUE)]).collect(), msb, lsb));
                }
                let mut t: Targets = vec![Vec::new(); width];
                for k in 0..words {
                    let di = self.sigs[id].word_index(k);
                    let c = self.eq_const(&idx, is, di);
                    if c == Lit::FALSE {
                        continue;
                    }
                    for (b, slot) in t.iter_mut().enumerate() {
                        slot.push((base_w + k * width + b, c));
                    }
                }
                Ok((t, msb, lsb))
            }
            _ => Err(self.err(sc, ElabErrorKind::Unsupported, "select on a non-identifier")),
        }
    }

    /// Positions (high, low) of a constant `[a:b]` select.
    fn slice_positions(&self, sc: &Scope, msb: i64, lsb: i64, a: i64, b: i64) -> R<(usize, usize)> {
        let pa = range_pos(msb, lsb, a);
        let pb = range_pos(msb, lsb, b);
        match (pa, pb) {
            (Some(x), Some(y)) if x >= y => Ok((x, y)),
            (Some(_), Some(_)) => Err(self.err(sc, ElabErrorKind::Width, format!("reversed part-select [{a}:{b}]"))),
            _ => Err(self.err(sc, ElabErrorKind::Width, format!("part-select [{a}:{b}] out of range"))),
        }
    }

    // --------------------------------------------------------- expressions

    fn lookup(&self, sc: &Scope, n: &str) -> R<Ref> {
        if let Some(id) = sc.sigs.get(n) {
            return Ok(Ref::Sig(*id));
        }
        if let Some(p) = sc.params.get(n) {
            return Ok(Ref::Param(p.clone()));
        }
        Err(self.err(sc, ElabErrorKind::Undeclared, format!("`{n}` is not declared")))
    }

    fn const_val(&mut self, sc: &Scope, e: &Expr) -> R<ConstVal> {
        let (w, s) = self.ty(sc, e)?;
        let bits = self.eval(sc, None, e, w, s)?;
        if bits.iter().any(|l| !l.is_const()) {
            return Err(self.err(sc, ElabErrorKind::NotConstant, "expected a constant expression"));
        }
        Ok(ConstVal::new(bits, s))
    }

    fn const_int(&mut self, sc: &Scope, e: &Expr) -> R<i64> {
        let v = self.const_val(sc, e)?;
        word_value(&v.bits, v.signed).ok_or_else(|| self.err(sc, ElabErrorKind::NotConstant, "constant does not fit 64 bits"))
    }

    fn range(&mut self, sc: &Scope, r: &Range) -> R<(i64, i64)> {
        Ok((self.const_int(sc, &r.msb)?, self.const_int(sc, &r.lsb)?))
    }

    fn number(&self, sc: &Scope, n: &Number) -> R<(Vec<Lit>, bool)> {
        let b = n
            .bits()
            .ok_or_else(|| self.err(sc, ElabErrorKind::Unsupported, "malformed literal"))?;
        if b.unknown.iter().any(|u| *u) {
            return Err(self.err(sc, ElabErrorKind::Unsupported, "x/z literal in two-valued logic"));
        }
        Ok((b.bits.iter().map(|x| Lit::from_bool(*x)).collect(), b.signed))
    }

    /// Self-determined (width, signedness).
    fn ty(&mut self, sc: &Scope, e: &Expr) -> R<(usize, bool)> {
        Ok(match e {
            Expr::Ident(n) => match self.lookup(sc, n)? {
                Ref::Sig(id) => {
                    let s = &self.sigs[id];
                    if s.is_memory {
                        return Err(self.err(sc, ElabErrorKind::Unsupported, format!("memory `{n}` used without a word index")));
                    }
                    (s.width, s.signed)
                }
                Ref::Param(p) => (p.bits.len(), p.signed),
            },
            Expr::Number(n) => {
                let b = n
                    .bits()
                    .ok_or_else(|| self.err(sc, ElabErrorKind::Unsupported, "malformed literal"))?;
                (b.width as usize, b.signed)
            }
            Expr::Str(_) => return Err(self.err(sc, ElabErrorKind::Unsupported, "string literal")),
            Expr::Index { base, .. } => {
                if self.is_memory_ident(sc, base) {
                    let Expr::Ident(n) = &**base else { unreachable!() };
                    let s = &self.sigs[sc.sigs[n]];
                    (s.width, s.signed)
                } else {
                    (1, false)
                }
            }
            Expr::Slice { msb, lsb, .. } => {
                let a = self.const_int(sc, msb)?;
                let b = self.const_int(sc, lsb)?;
                ((a - b).unsigned_abs() as usize + 1, false)
            }
            Expr::IndexedSlice { width, .. } => {
                let w = self.const_int(sc, width)?;
                if w < 1 {
                    return Err(self.err(sc, ElabErrorKind::Width, "part-select width must be positive"));
                }
                (w as usize, false)
            }
            Expr::Concat(items) => {
                let mut w = 0;
                for it in items {
                    w += self.ty(sc, it)?.0;
                }
                (w, false)
            }
            Expr::Repeat { count, items } => {
                let n = self.const_int(sc, count)?;
                if n < 1 {
                    return Err(self.err(sc, ElabErrorKind::Width, "replication count must be positive"));
                }
                let mut w = 0;
                for it in items {
                    w += self.ty(sc, it)?.0;
                }
                (w * n as usize, false)
            }
            Expr::Unary { op, operand } => match op {
                UnaryOp::Plus | UnaryOp::Neg | UnaryOp::Not => self.ty(sc, operand)?,
                _ => {
                    self.ty(sc, operand)?;
                    (1, false)
                }
            },
            Expr::Binary { op, lhs, rhs } => {
                let (lw, ls) = self.ty(sc, lhs)?;
                let (rw, rs) = self.ty(sc, rhs)?;
                match op {
                    BinaryOp::Add
                    | BinaryOp::Sub
                    | BinaryOp::Mul
                    | BinaryOp::Div
                    | BinaryOp::Mod
                    | BinaryOp::And
                    | BinaryOp::Or
                    | BinaryOp::Xor
                    | BinaryOp::Xnor => (lw.max(rw), ls && rs),
                    BinaryOp::Pow | BinaryOp::Shl | BinaryOp::Shr | BinaryOp::AShl | BinaryOp::AShr => (lw, ls),
                    _ => (1, false),
                }
            }
            Expr::Ternary { cond, then, els } => {
                self.ty(sc, cond)?;
                let (a, sa) = self.ty(sc, then)?;
                let (b, sb) = self.ty(sc, els)?;
                (a.max(b), sa && sb)
            }
            Expr::Call { name, args } => match (name.as_str(), args.as_slice()) {
                ("$signed", [x]) => (self.ty(sc, x)?.0, true),
                ("$unsigned", [x]) => (self.ty(sc, x)?.0, false),
                ("$clog2", [_]) => (32, true),
                _ => return Err(self.err(sc, ElabErrorKind::Unsupported, format!("call to `{name}`"))),
            },
        })
    }

    fn self_eval(&mut self, sc: &Scope, view: View, e: &Expr) -> R<(Vec<Lit>, bool)> {
        let (w, s) = self.ty(sc, e)?;
        Ok((self.eval(sc, view, e, w, s)?, s))
    }

    fn cond_lit(&mut self, sc: &Scope, view: View, e: &Expr) -> R<Lit> {
        let (v, _) = self.self_eval(sc, view, e)?;
        Ok(self.g.or_all(&v))
    }

    fn read_sig(&self, id: usize, view: View, range: std::ops::Range<usize>) -> Vec<Lit> {
        let base = self.sigs[id].base;
        range
            .map(|k| {
                let w = base + k;
                match view.and_then(|v| v.get(&w)) {
                    Some(Some(l)) => *l,
                    _ => self.wires[w].lit,
                }
            })
            .collect()
    }

    fn eq_const(&mut self, v: &[Lit], signed: bool, value: i64) -> Lit {
        let w = v.len();
        let fits = if w >= 64 {
            signed || value >= 0
        } else if signed {
            let half = 1i64 << (w - 1);
            (-half..half).contains(&value)
        } else {
            (0..1i64 << w).contains(&value)
        };
        if !fits {
            return Lit::FALSE;
        }
        let c = const_word(value, w);
        self.g.eq(v, &c)
    }

    /// Readable base of a select: (bits, msb, lsb).
    fn read_base(&mut self, sc: &Scope, view: View, e: &Expr) -> R<(Vec<Lit>, i64, i64)> {
        match e {
            Expr::Ident(n) => match self.lookup(sc, n)? {
                Ref::Sig(id) => {
                    let s = &self.sigs[id];
                    if s.is_memory {
                        return Err(self.err(sc, ElabErrorKind::Unsupported, format!("memory `{n}` used without a word index")));
                    }
                    let (w, msb, lsb) = (s.width, s.msb, s.lsb);
                    Ok((self.read_sig(id, view, 0..w), msb, lsb))
                }
                Ref::Param(p) => Ok((p.bits.clone(), p.msb, p.lsb)),
            },
            Expr::Index { base, index } if self.is_memory_ident(sc, base) => {
                let Expr::Ident(n) = &**base else { unreachable!() };
                let id = sc.sigs[n];
                let (idx, is) = self.self_eval(sc, view, index)?;
                let (width, words, msb, lsb) = {
                    let s = &self.sigs[id];
                    (s.width, s.words, s.msb, s.lsb)
                };
                if let Some(i) = word_value(&idx, is) {
                    let k = self.sigs[id]
                        .word_pos(i)
                        .ok_or_else(|| self.err(sc, ElabErrorKind::Width, format!("word {i} of `{n}` out of range")))?;
                    return Ok((self.read_sig(id, view, k * width..(k + 1) * width), msb, lsb));
                }
                let mut acc = vec![Lit::FALSE; width];
                for k in 0..words {
                    let di = self.sigs[id].word_index(k);
                    let c = self.eq_const(&idx, is, di);
                    if c == Lit::FALSE {
                        continue;
                    }
                    let word = self.read_sig(id, view, k * width..(k + 1) * width);
                    for b in 0..width {
                        let t = self.g.and(c, word[b]);
                        acc[b] = self.g.or(acc[b], t);
                    }
                }
                Ok((acc, msb, lsb))
            }
            _ => Err(self.err(sc, ElabErrorKind::Unsupported, "select on a non-identifier")),
        }
    }

    /// Evaluates `e` in a context of width `w` and signedness `s`.
    fn eval(&mut self, sc: &Scope, view: View, e: &Expr, w: usize, s: bool) -> R<Vec<Lit>> {
        let bits = match e {
            Expr::Ident(_) => {
                let (bits, _, _) = self.read_base(sc, view, e)?;
                return Ok(fit(&bits, w, s));
            }
            Expr::Number(n) => {
                let (bits, _) = self.number(sc, n)?;
                return Ok(fit(&bits, w, s));
            }
            Expr::Str(_) => return Err(self.err(sc, ElabErrorKind::Unsupported, "string literal")),
            Expr::Index { base, index } => {
                if self.is_memory_ident(sc, base) {
                    let (bits, _, _) = self.read_base(sc, view, e)?;
                    return Ok(fit(&bits, w, s));
                }
                let (bits, msb, lsb) = self.read_base(sc, view, base)?;
                let (idx, is) = self.self_eval(sc, view, index)?;
                let bit = if let Some(i) = word_value(&idx, is) {
                    match range_pos(msb, lsb, i) {
                        Some(p) => bits[p],
                        None => return Err(self.err(sc, ElabErrorKind::Width, format!("index {i} out of range"))),
                    }
                } else {
                    let mut acc = Lit::FALSE;
                    for (p, b) in bits.iter().enumerate() {
                        let di = if msb >= lsb { lsb + p as i64 } else { lsb - p as i64 };
                        let c = self.eq_const(&idx, is, di);
                        let t = self.g.and(c, *b);
                        acc = self.g.or(acc, t);
                    }
                    acc
                };
                vec![bit]
            }
            Expr::Slice { base, msb: hi, lsb: lo } => {
                let (bits, msb, lsb) = self.read_base(sc, view, base)?;
                let a = self.const_int(sc, hi)?;
                let b = self.const_int(sc, lo)?;
                let (pa, pb) = self.slice_positions(sc, msb, lsb, a, b)?;
                bits[pb..=pa].to_vec()
            }
            Expr::IndexedSlice {
                base,
                start,
                width,
                up,
            } => {
                let (bits, msb, lsb) = self.read_base(sc, view, base)?;
                let wd = self.const_int(sc, width)?;
                if wd < 1 {
                    return Err(self.err(sc, ElabErrorKind::Width, "part-select width must be positive"));
                }
                let wd = wd as usize;
                let (sv, ss) = self.self_eval(sc, view, start)?;
                if let Some(st) = word_value(&sv, ss) {
                    let lo = if *up { st } else { st - wd as i64 + 1 };
                    let hi = lo + wd as i64 - 1;
                    (0..wd)
                        .map(|k| {
                            let idx = if msb >= lsb { lo + k as i64 } else { hi - k as i64 };
                            range_pos(msb, lsb, idx).map_or(Lit::FALSE, |p| bits[p])
                        })
                        .collect()
                } else {
                    // Position of the result's LSB, as a signed word, then a
                    // right shift over the vector padded with zeros on both sides.
                    let aw = sv.len().max(32) + 4;
                    let sx = fit(&sv, aw, ss);
                    let wdi = wd as i64;
                    let p_low = if msb >= lsb {
                        let off = if *up { -lsb } else { -(wdi - 1) - lsb };
                        self.g.add(&sx, &const_word(off, aw))
                    } else {
                        let off = if *up { lsb - (wdi - 1) } else { lsb };
                        let neg = self.g.neg(&sx);
                        self.g.add(&neg, &const_word(off, aw))
                    };
                    let amount = self.g.add(&p_low, &const_word(wdi, aw));
                    let mut padded = vec![Lit::FALSE; wd];
                    padded.extend_from_slice(&bits);
                    padded.extend(std::iter::repeat(Lit::FALSE).take(wd));
                    // A negative amount has its top bit set and shifts everything out.
                    let shifted = self.g.shift(&padded, &amount, false, Lit::FALSE);
                    shifted[..wd].to_vec()
                }
            }
            Expr::Concat(items) => {
                let mut out = Vec::new();
                for it in items.iter().rev() {
                    out.extend(self.self_eval(sc, view, it)?.0);
                }
                out
            }
            Expr::Repeat { count, items } => {
                let n = self.const_int(sc, count)?;
                if n < 1 {
                    return Err(self.err(sc, ElabErrorKind::Width, "replication count must be positive"));
                }
                let mut one = Vec::new();
                for it in items.iter().rev() {
                    one.extend(self.self_eval(sc, view, it)?.0);
                }
                let mut out = Vec::with_capacity(one.len() * n as usize);
                for _ in 0..n {
                    out.extend_from_slice(&one);
                }
                out
            }
            Expr::Unary { op, operand } => match op {
                UnaryOp::Plus => return self.eval(sc, view, operand, w, s),
                UnaryOp::Neg => {
                    let v = self.eval(sc, view, operand, w, s)?;
                    return Ok(self.g.neg(&v));
                }
                UnaryOp::Not => {
                    let v = self.eval(sc, view, operand, w, s)?;
                    return Ok(v.iter().map(|l| !*l).collect());
                }
                _ => {
                    let (v, _) = self.self_eval(sc, view, operand)?;
                    let r = match op {
                        UnaryOp::RedAnd => self.g.and_all(&v),
                        UnaryOp::RedNand => !self.g.and_all(&v),
                        UnaryOp::RedOr => self.g.or_all(&v),
                        UnaryOp::RedNor | UnaryOp::LogNot => !self.g.or_all(&v),
                        UnaryOp::RedXor => self.g.xor_all(&v),
                        UnaryOp::RedXnor => !self.g.xor_all(&v),
                        UnaryOp::Plus | UnaryOp::Neg | UnaryOp::Not => unreachable!(),
                    };
                    vec![r]
                }
            },
            Expr::Binary { op, lhs, rhs } => return self.binary(sc, view, *op, lhs, rhs, w, s),
            Expr::Ternary { cond, then, els } => {
                let c = self.cond_lit(sc, view, cond)?;
                match c.const_value() {
                    Some(true) => return self.eval(sc, view, then, w, s),
                    Some(false) => return self.eval(sc, view, els, w, s),
                    None => {
                        let a = self.eval(sc, view, then, w, s)?;
                        let b = self.eval(sc, view, els, w, s)?;
                        return Ok(self.g.mux_word(c, &a, &b));
                    }
                }
            }
            Expr::Call { name, args } => match (name.as_str(), args.as_slice()) {
                ("$signed", [x]) | ("$unsigned", [x]) => self.self_eval(sc, view, x)?.0,
                ("$clog2", [x]) => {
                    let v = self.const_int(sc, x)?;
                    const_word(crate::frontend::clog2(v), 32)
                }
                _ => return Err(self.err(sc, ElabErrorKind::Unsupported, format!("call to `{name}`"))),
            },
        };
        Ok(fit(&bits, w, s))
    }

    #[allow(clippy::too_many_arguments)]
    fn binary(&mut self, sc: &Scope, view: View, op: BinaryOp, lhs: &Expr, rhs: &Expr, w: usize, s: bool) -> R<Vec<Lit>> {
        use BinaryOp::*;
        match op {
            Add | Sub | And | Or | Xor | Xnor => {
                let a = self.eval(sc, view, lhs, w, s)?;
                let b = self.eval(sc, view, rhs, w, s)?;
                Ok(match op {
                    Add => self.g.add(&a, &b),
                    Sub => self.g.sub(&a, &b),
                    And => self.g.bitwise(&a, &b, Aig::and),
                    Or => self.g.bitwise(&a, &b, Aig::or),
                    Xor => self.g.bitwise(&a, &b, Aig::xor),
                    _ => self.g.bitwise(&a, &b, Aig::xnor),
                })
            }
            Mul => {
                let a = self.eval(sc, view, lhs, w, s)?;
                let b = self.eval(sc, view, rhs, w, s)?;
                for (x, e) in [(&a, lhs), (&b, rhs)] {
                    if x.iter().any(|l| !l.is_const()) && self.ty(sc, e)?.0 > MAX_MUL_WIDTH {
                        return Err(self.err(
                            sc,
                            ElabErrorKind::Unsupported,
                            format!("multiplication of operands wider than {MAX_MUL_WIDTH} bits"),
                        ));
                    }
                }
                Ok(self.g.mul(&a, &b))
            }
            Div | Mod | Pow => {
                let a = self.eval(sc, view, lhs, w, s)?;
                let (b, bs) = if op == Pow {
                    self.self_eval(sc, view, rhs)?
                } else {
                    (self.eval(sc, view, rhs, w, s)?, s)
                };
                let av = word_value(&a, s);
                let bv = word_value(&b, bs);
                if let (Some(x), Some(y)) = (av, bv) {
                    let r = match op {
                        Div | Mod if y == 0 => {
                            return Err(self.err(sc, ElabErrorKind::Unsupported, "division by zero"));
                        }
                        Div => x.wrapping_div(y),
                        Mod => x.wrapping_rem(y),
                        _ if y < 0 => return Err(self.err(sc, ElabErrorKind::Unsupported, "negative exponent")),
                        _ => {
                            let mut r: i64 = 1;
                            for _ in 0..y.min(128) {
                                r = r.wrapping_mul(x);
                            }
                            r
                        }
                    };
                    return Ok(const_word(r, w));
                }
                if !s && op != Pow {
                    if let Some(y) = bv.filter(|y| *y > 0 && (*y as u64).is_power_of_two()) {
                        let k = y.trailing_zeros() as usize;
                        return Ok(if op == Div {
                            shift_const(&a, k, false, Lit::FALSE)
                        } else {
                            (0..w).map(|i| if i < k { a[i] } else { Lit::FALSE }).collect()
                        });
                    }
                }
                Err(self.err(sc, ElabErrorKind::Unsupported, "division, modulo or power of non-constant operands"))
            }
            Shl | AShl | Shr | AShr => {
                let a = self.eval(sc, view, lhs, w, s)?;
                let (amt, _) = self.self_eval(sc, view, rhs)?;
                let left = matches!(op, Shl | AShl);
                let fill = if op == AShr && s { a[w - 1] } else { Lit::FALSE };
                if let Some(k) = word_value(&amt, false) {
                    return Ok(shift_const(&a, usize::try_from(k).unwrap_or(usize::MAX).min(w), left, fill));
                }
                Ok(self.g.shift(&a, &amt, left, fill))
            }
            Eq | Ne | CaseEq | CaseNe | Lt | Le | Gt | Ge => {
                let (lw, ls) = self.ty(sc, lhs)?;
                let (rw, rs) = self.ty(sc, rhs)?;
                let m = lw.max(rw);
                let t = ls && rs;
                let a = self.eval(sc, view, lhs, m, t)?;
                let b = self.eval(sc, view, rhs, m, t)?;
                let r = match op {
                    Eq | CaseEq => self.g.eq(&a, &b),
                    Ne | CaseNe => !self.g.eq(&a, &b),
                    Lt => self.g.lt(&a, &b, t),
                    Ge => !self.g.lt(&a, &b, t),
                    Gt => self.g.lt(&b, &a, t),
                    _ => !self.g.lt(&b, &a, t),
                };
                Ok(fit(&[r], w, false))
            }
            LogAnd | LogOr => {
                let a = self.cond_lit(sc, view, lhs)?;
                let b = self.cond_lit(sc, view, rhs)?;
                let r = if op == LogAnd { self.g.and(a, b) } else { self.g.or(a, b) };
                Ok(fit(&[r], w, false))
            }
        }
    }

    // -------------------------------------------------------------- finish

    fn finish(mut self, sc: &Scope) -> R<Netlist> {
        let m = sc.module;
        let mut ports = Vec::new();
        let mut outputs_raw: Vec<(String, bool, Vec<Lit>)> = Vec::new();
        let mut in_ports: Vec<(String, bool, Vec<u32>)> = Vec::new();
        let port_owner = self.new_owner();
        for p in &m.ports {
            let id = sc.sigs[&p.name];
            let (w, base, signed) = {
                let s = &self.sigs[id];
                (s.width, s.base, s.signed)
            };
            ports.push(PortInfo {
                name: p.name.clone(),
                direction: p.direction,
                width: w as u32,
            });
            match p.direction {
                Direction::In => {
                    let mut vars = Vec::new();
                    for k in 0..w {
                        let raw = self.g.add_source(Node::Input(self.raw_inputs.len() as u32));
                        self.raw_inputs.push((in_ports.len(), k));
                        vars.push(raw.var());
                        self.drive(sc, base + k, raw, port_owner)?;
                    }
                    in_ports.push((p.name.clone(), signed, vars));
                }
                Direction::Out => {
                    outputs_raw.push((p.name.clone(), signed, (0..w).map(|k| self.wires[base + k].lit).collect()));
                }
                Direction::Inout => {
                    return Err(self.err(sc, ElabErrorKind::Unsupported, format!("inout port `{}`", p.name)));
                }
            }
        }

        // The clock: every clocked block must trace back to the same 1-bit input.
        let mut clock_var: Option<u32> = None;
        let clocks = std::mem::take(&mut self.clocks);
        for (lit, module, offset) in &clocks {
            let cerr = |msg: String| ElabError {
                kind: ElabErrorKind::Clock,
                message: msg,
                module: module.clone(),
                offset: Some(*offset),
            };
            let mut l = *lit;
            let mut hops = 0;
            loop {
                match self.g.node(l.var()) {
                    Node::Wire(w) => {
                        let name = self.wire_name(w as usize);
                        let d = self.wires[w as usize]
                            .driver
                            .ok_or_else(|| cerr(format!("clock `{name}` is undriven")))?;
                        l = d ^ l.is_neg();
                    }
                    Node::Input(_) if !l.is_neg() => break,
                    Node::Input(_) => return Err(cerr("inverted clock".into())),
                    _ => return Err(cerr("clock is not driven by a primary input".into())),
                }
                hops += 1;
                if hops > self.wires.len() {
                    return Err(cerr("clock is driven by a loop".into()));
                }
            }
            match clock_var {
                None => clock_var = Some(l.var()),
                Some(v) if v == l.var() => {}
                Some(_) => return Err(cerr("more than one clock domain".into())),
            }
        }
        let clock_port = clock_var.map(|v| {
            let Node::Input(i) = self.g.node(v) else { unreachable!() };
            self.raw_inputs[i as usize].0
        });
        if let Some(cp) = clock_port {
            if in_ports[cp].2.len() != 1 {
                return Err(self.err(sc, ElabErrorKind::Clock, format!("clock `{}` is wider than one bit", in_ports[cp].0)));
            }
        }

        let mut f = Aig::new();
        let mut map: Vec<Option<Lit>> = vec![None; self.g.len()];
        map[0] = Some(Lit::FALSE);
        let mut inputs = Vec::new();
        let mut k = 0u32;
        for (pi, (name, signed, vars)) in in_ports.iter().enumerate() {
            if Some(pi) == clock_port {
                continue;
            }
            let mut bits = Vec::new();
            for v in vars {
                let l = f.add_source(Node::Input(k));
                k += 1;
                map[*v as usize] = Some(l);
                bits.push(l);
            }
            inputs.push(PortBits {
                name: name.clone(),
                signed: *signed,
                bits,
            });
        }
        let mut c = Collapse {
            map,
            state: vec![0; self.g.len()],
            regs_final: Vec::new(),
            reg_of_raw: HashMap::new(),
            queue: VecDeque::new(),
            clock_var,
        };
        let mut outputs = Vec::new();
        for (name, signed, lits) in &outputs_raw {
            let mut bits = Vec::new();
            for l in lits {
                bits.push(self.resolve(sc, &mut f, &mut c, *l)?);
            }
            outputs.push(PortBits {
                name: name.clone(),
                signed: *signed,
                bits,
            });
        }
        let mut registers: Vec<Register> = Vec::new();
        while let Some(raw) = c.queue.pop_front() {
            let next = self.resolve(sc, &mut f, &mut c, self.regs[raw].next)?;
            let idx = c.reg_of_raw[&raw];
            let r = &self.regs[raw];
            if registers.len() <= idx {
                registers.resize(
                    idx + 1,
                    Register {
                        name: String::new(),
                        var: 0,
                        next: Lit::FALSE,
                        reset: false,
                    },
                );
            }
            registers[idx] = Register {
                name: r.name.clone(),
                var: c.regs_final[idx],
                next,
                reset: r.reset,
            };
        }
        let clock = clock_port.map(|cp| in_ports[cp].0.clone());
        Ok(Netlist {
            top: m.name.clone(),
            ports,
            aig: f,
            inputs,
            outputs,
            registers,
            clock,
            notes: self.notes,
        })
    }

    fn resolve(&self, sc: &Scope, f: &mut Aig, c: &mut Collapse, root: Lit) -> R<Lit> {
        const IN_PROGRESS: u8 = 1;
        let mut stack: Vec<(u32, bool)> = vec![(root.var(), false)];
        while let Some((v, expanded)) = stack.pop() {
            let vi = v as usize;
            if c.map[vi].is_some() {
                continue;
            }
            if !expanded && c.state[vi] == IN_PROGRESS {
                let name = stack
                    .iter()
                    .rev()
                    .filter(|(x, e)| *e && matches!(self.g.node(*x), Node::Wire(_)))
                    .map(|(x, _)| match self.g.node(*x) {
                        Node::Wire(w) => self.wire_name(w as usize),
                        _ => unreachable!(),
                    })
                    .next()
                    .unwrap_or_default();
                return Err(self.err(sc, ElabErrorKind::CombinationalLoop, format!("through `{name}`")));
            }
            match self.g.node(v) {
                Node::Const => c.map[vi] = Some(Lit::FALSE),
                Node::Input(_) => {
                    if Some(v) == c.clock_var {
                        return Err(self.err(sc, ElabErrorKind::Clock, "clock input used as data"));
                    }
                    unreachable!("data inputs are mapped up front");
                }
                Node::Latch(r) => {
                    let idx = c.regs_final.len();
                    let l = f.add_source(Node::Latch(idx as u32));
                    c.regs_final.push(l.var());
                    c.reg_of_raw.insert(r as usize, idx);
                    c.queue.push_back(r as usize);
                    c.map[vi] = Some(l);
                }
                Node::Wire(w) => {
                    let slot = &self.wires[w as usize];
                    let Some(d) = slot.driver else {
                        let name = self.wire_name(w as usize);
                        return Err(self.err(sc, ElabErrorKind::Undriven, format!("`{name}` is read but never driven")));
                    };
                    if expanded {
                        let dl = c.map[d.var() as usize].expect("driver resolved");
                        c.map[vi] = Some(dl ^ d.is_neg());
                        c.state[vi] = 0;
                    } else {
                        c.state[vi] = IN_PROGRESS;
                        stack.push((v, true));
                        stack.push((d.var(), false));
                    }
                }
                Node::And(a, b) => {
                    if expanded {
                        let la = c.map[a.var() as usize].expect("operand resolved") ^ a.is_neg();
                        let lb = c.map[b.var() as usize].expect("operand resolved") ^ b.is_neg();
                        c.map[vi] = Some(f.and(la, lb));
                        c.state[vi] = 0;
                    } else {
                        c.state[vi] = IN_PROGRESS;
                        stack.push((v, true));
                        stack.push((b.var(), false));
                        stack.push((a.var(), false));
                    }
                }
            }
        }
        Ok(c.map[root.var() as usize].expect("root resolved") ^ root.is_neg())
    }
}

struct Collapse {
    map: Vec<Option<Lit>>,
    state: Vec<u8>,
    regs_final: Vec<u32>,
    reg_of_raw: HashMap<usize, usize>,
    queue: VecDeque<usize>,
    clock_var: Option<u32>,
}

/// Resizes `bits` to `w`, sign-extending when `signed`.
fn fit(bits: &[Lit], w: usize, signed: bool) -> Vec<Lit> {
    if bits.len() >= w {
        return bits[..w].to_vec();
    }
    let ext = if signed && !bits.is_empty() { bits[bits.len() - 1] } else { Lit::FALSE };
    let mut out = bits.to_vec();
    out.resize(w, ext);
    out
}

fn static_targets(t: &Targets) -> Option<Vec<usize>> {
    t.iter()
        .map(|ws| match ws.as_slice() {
            [(w, c)] if *c == Lit::TRUE => Some(*w),
            _ => None,
        })
        .collect()
}

fn unwrap_block(s: &Stmt) -> &Stmt {
    match s {
        Stmt::Block(v) if v.len() == 1 => unwrap_block(&v[0]),
        _ => s,
    }
}

fn distinct_idents(e: &Expr) -> Vec<String> {
    let mut ids = Vec::new();
    e.idents(&mut ids);
    let mut out: Vec<String> = Vec::new();
    for i in ids {
        if !out.iter().any(|o| o == i) {
            out.push(i.to_string());
        }
    }
    out
}

/// Active level implied by a reset signal's name, if it looks like a reset.
fn reset_name_polarity(name: &str) -> Option<bool> {
    let l = name.to_ascii_lowercase();
    if !(l.contains("rst") || l.contains("reset")) {
        return None;
    }
    let active_low = l.ends_with('n') || l.ends_with("_b") || l.ends_with("_l") || l.starts_with('n');
    Some(!active_low)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::netlist::{Bits, SimTrace};

    fn elab(src: &str, top: &str) -> Result<Netlist, ElabError> {
        elaborate(&parse(src).unwrap(), top, &BTreeMap::new())
    }

    fn comb_eval(n: &Netlist, ins: &[(&str, u64)]) -> BTreeMap<String, u64> {
        let widths: HashMap<&str, usize> = n.inputs.iter().map(|p| (p.name.as_str(), p.bits.len())).collect();
        let stim = SimTrace {
            cycles: vec![ins.iter().map(|(k, v)| (k.to_string(), Bits::from_u64(*v, widths[k]))).collect()],
        };
        n.simulate(&stim).unwrap().cycles[0].iter().map(|(k, v)| (k.clone(), v.to_u64())).collect()
    }

    #[test]
    fn latch_is_reported() {
        let e = elab("module m(input a, input b, output reg y); always @(*) if (a) y = b; endmodule", "m").unwrap_err();
        assert_eq!(e.kind, ElabErrorKind::LatchInferred);
        assert!(e.to_string().contains("latch inferred"));
        // A default assignment before the `if` removes the latch.
        assert!(elab("module m(input a, input b, output reg y); always @(*) begin y = 0; if (a) y = b; end endmodule", "m").is_ok());
    }

    #[test]
    fn full_case_without_default_is_not_a_latch() {
        let src = "module m(input [1:0] s, output reg [1:0] y);\n always @(*) case (s) 2'd0: y = 3; 2'd1: y = 2; 2'd2: y = 1; 2'd3: y = 0; endcase\nendmodule";
        let n = elab(src, "m").unwrap();
        for s in 0..4 {
            assert_eq!(comb_eval(&n, &[("s", s)])["y"], 3 - s);
        }
        let partial = "module m(input [1:0] s, output reg y);\n always @(*) case (s) 2'd0: y = 1; 2'd1: y = 0; endcase\nendmodule";
        assert_eq!(elab(partial, "m").unwrap_err().kind, ElabErrorKind::LatchInferred);
    }

    #[test]
    fn multiple_drivers_and_loops() {
        let md = "module m(input a, output y); assign y = a; assign y = ~a; endmodule";
        assert_eq!(elab(md, "m").unwrap_err().kind, ElabErrorKind::MultipleDrivers);
        let lp = "module m(input a, output y); wire t; assign t = y & a; assign y = ~t; endmodule";
        assert_eq!(elab(lp, "m").unwrap_err().kind, ElabErrorKind::CombinationalLoop);
        // Bit-level dependencies are not loops.
        let ok = "module m(input a, output [1:0] y); assign y[0] = a; assign y[1] = ~y[0]; endmodule";
        assert!(elab(ok, "m").is_ok());
    }

    #[test]
    fn unsupported_constructs() {
        let g = "module m(input a, output y); genvar i; assign y = a; endmodule";
        assert_eq!(elab(g, "m").unwrap_err().kind, ElabErrorKind::Unsupported);
        let io = "module m(inout a, output y); assign y = a; endmodule";
        assert_eq!(elab(io, "m").unwrap_err().kind, ElabErrorKind::Unsupported);
        let x = "module m(input a, output y); assign y = 1'bx; endmodule";
        assert_eq!(elab(x, "m").unwrap_err().kind, ElabErrorKind::Unsupported);
        let wide = "module m(input [31:0] a, input [31:0] b, output [31:0] y); assign y = a * b; endmodule";
        assert_eq!(elab(wide, "m").unwrap_err().kind, ElabErrorKind::Unsupported);
        let undriven = "module m(input a, output y); wire t; assign y = t; endmodule";
        assert_eq!(elab(undriven, "m").unwrap_err().kind, ElabErrorKind::Undriven);
    }

    #[test]
    fn width_and_sign_rules() {
        let src = "module m(input signed [3:0] a, input [3:0] b, output [7:0] s, output [7:0] u, output lt, output [4:0] c);\n\
            assign s = a;\n assign u = a + b;\n assign lt = a < $signed(b);\n assign c = a + b;\nendmodule";
        let n = elab(src, "m").unwrap();
        let r = comb_eval(&n, &[("a", 0b1111), ("b", 1)]);
        assert_eq!(r["s"], 0xFF);
        assert_eq!(r["u"], 16);
        assert_eq!(r["lt"], 1);
        assert_eq!(r["c"], 16);
    }

    #[test]
    fn hierarchy_and_params() {
        let src = "module top(input [7:0] a, output [7:0] y);\n  inc #(.W(8), .STEP(3)) u(.x(a), .y(y));\nendmodule\n\
            module inc #(parameter W = 4, parameter STEP = 1) (input [W-1:0] x, output [W-1:0] y);\n  assign y = x + STEP;\nendmodule";
        let n = elab(src, "top").unwrap();
        assert_eq!(comb_eval(&n, &[("a", 250)])["y"], 253);
        let mut ov = BTreeMap::new();
        ov.insert("STEP".to_string(), 2);
        let n2 = elaborate(&parse(src).unwrap(), "inc", &ov).unwrap();
        assert_eq!(n2.inputs[0].bits.len(), 4);
        assert_eq!(comb_eval(&n2, &[("x", 15)])["y"], 1);
    }

    #[test]
    fn async_reset_is_normalized() {
        let src = "module c(input clk, input rst_n, output reg [1:0] q);\n\
            always @(posedge clk or negedge rst_n) if (!rst_n) q <= 2'd2; else q <= q + 1;\nendmodule";
        let n = elab(src, "c").unwrap();
        assert_eq!(n.registers.iter().map(|r| r.reset).collect::<Vec<_>>(), [false, true]);
        assert_eq!(n.notes.len(), 1);
    }

    #[test]
    fn clock_rules() {
        let two = "module m(input c1, input c2, input d, output reg a, output reg b);\n always @(posedge c1) a <= d;\n always @(posedge c2) b <= d;\nendmodule";
        assert_eq!(elab(two, "m").unwrap_err().kind, ElabErrorKind::Clock);
        let neg = "module m(input clk, input d, output reg a); always @(negedge clk) a <= d; endmodule";
        assert_eq!(elab(neg, "m").unwrap_err().kind, ElabErrorKind::Clock);
        let data = "module m(input clk, input d, output reg a, output y); always @(posedge clk) a <= d; assign y = clk; endmodule";
        assert_eq!(elab(data, "m").unwrap_err().kind, ElabErrorKind::Clock);
    }

    #[test]
    fn memory_read_write() {
        let src = "module r(input clk, input we, input [1:0] wa, input [1:0] ra, input [3:0] d, output [3:0] q);\n\
            reg [3:0] mem [0:3];\n always @(posedge clk) if (we) mem[wa] <= d;\n assign q = mem[ra];\nendmodule";
        let n = elab(src, "r").unwrap();
        assert_eq!(n.registers.len(), 16);
        let step = |we: u64, wa: u64, ra: u64, d: u64| -> BTreeMap<String, Bits> {
            [
                ("we".to_string(), Bits::from_u64(we, 1)),
                ("wa".to_string(), Bits::from_u64(wa, 2)),
                ("ra".to_string(), Bits::from_u64(ra, 2)),
                ("d".to_string(), Bits::from_u64(d, 4)),
            ]
            .into_iter()
            .collect()
        };
        let t = n
            .simulate(&SimTrace {
                cycles: vec![step(1, 2, 0, 9), step(0, 0, 2, 0), step(1, 1, 2, 5), step(0, 0, 1, 0)],
            })
            .unwrap();
        let q: Vec<u64> = t.cycles.iter().map(|c| c["q"].to_u64()).collect();
        assert_eq!(q, [0, 9, 9, 5]);
    }
}
