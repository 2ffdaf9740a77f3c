// SPDX-License-Identifier: Apache-2.0

//! Reference simulator that runs the parsed AST directly.
//!
//! Values are arbitrary-precision integers sized by the usual Verilog
//! expression rules. Combinational logic is settled by iterating every
//! continuous process to a fixpoint; clocked blocks run once per cycle with
//! blocking updates visible inside the block and nonblocking updates
//! committed after every block has run.
//!
//! Conventions shared with the netlist builder: two-valued logic, reads
//! outside a vector or memory return 0, writes outside are dropped, an
//! asynchronous reset behaves synchronously, and registers start from the
//! constants their reset branch assigns (else their initializer, else 0).

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use num_bigint::{BigInt, BigUint};
use rtlbench::frontend::{
    BinaryOp, CaseKind, Connections, Direction, Edge, Expr, ItemKind, ModuleDecl, NetKind, ParamAssigns, Sensitivity,
    SourceUnit, Stmt, UnaryOp,
};
use rtlbench::netlist::Bits;

type U = BigUint;

fn one() -> U {
    U::from(1u8)
}

fn ones(w: usize) -> U {
    (one() << w) - one()
}

fn mask(v: U, w: usize) -> U {
    v & ones(w)
}

fn bit(v: &U, i: usize) -> bool {
    v.bit(i as u64)
}

fn nz(v: &U) -> bool {
    v.bits() > 0
}

fn fit(v: &U, from: usize, to: usize, signed: bool) -> U {
    if to <= from {
        return mask(v.clone(), to);
    }
    if signed && from > 0 && bit(v, from - 1) {
        v | (ones(to) ^ ones(from))
    } else {
        v.clone()
    }
}

fn to_int(v: &U, w: usize, signed: bool) -> BigInt {
    let i = BigInt::from(v.clone());
    if signed && w > 0 && bit(v, w - 1) {
        i - (BigInt::from(1) << w)
    } else {
        i
    }
}

fn from_int(i: &BigInt, w: usize) -> U {
    let m = BigInt::from(1) << w;
    let r = ((i % &m) + &m) % &m;
    r.to_biguint().expect("non-negative")
}

fn small(i: &BigInt) -> Option<i64> {
    i64::try_from(i.clone()).ok()
}

#[derive(Debug, Clone)]
struct PVal {
    v: U,
    w: usize,
    s: bool,
    msb: i64,
    lsb: i64,
}

#[derive(Debug, Clone)]
struct Sig {
    w: usize,
    s: bool,
    msb: i64,
    lsb: i64,
    words: Option<(i64, i64)>,
}

impl Sig {
    fn pos(&self, idx: i64) -> Option<usize> {
        vec_pos(self.msb, self.lsb, idx)
    }

    fn word(&self, idx: i64) -> Option<usize> {
        let (a, b) = self.words?;
        let (lo, hi) = (a.min(b), a.max(b));
        (lo..=hi).contains(&idx).then(|| (idx - lo) as usize)
    }

    fn word_count(&self) -> usize {
        self.words.map_or(1, |(a, b)| (a - b).unsigned_abs() as usize + 1)
    }
}

fn vec_pos(msb: i64, lsb: i64, idx: i64) -> Option<usize> {
    let p = if msb >= lsb { idx - lsb } else { lsb - idx };
    let w = (msb - lsb).abs() + 1;
    (0..w).contains(&p).then_some(p as usize)
}

struct Scope {
    m: usize,
    params: HashMap<String, PVal>,
    sigs: HashMap<String, usize>,
}

enum Proc {
    Assign { sc: usize, lhs: Expr, rhs: Expr },
    PortIn { parent: usize, e: Expr, child: usize },
    PortOut { child: usize, parent: usize, lhs: Expr },
    Comb { sc: usize, body: Stmt },
}

/// Bit destination: (signal, word, position); `None` drops the bit.
type Target = (usize, usize, Option<usize>);

#[derive(Default, Clone)]
struct Frame {
    view: HashMap<usize, Vec<U>>,
    next: HashMap<usize, Vec<U>>,
}

/// How expressions read signals.
#[derive(Clone, Copy)]
enum Mode<'a> {
    Run(&'a Frame),
    /// Constant folding; `pin` optionally fixes one 1-bit signal.
    Const(Option<(usize, bool)>),
}

pub struct Interp {
    unit: SourceUnit,
    scopes: Vec<Scope>,
    sigs: Vec<Sig>,
    vals: Vec<Vec<U>>,
    procs: Vec<Proc>,
    seq: Vec<(usize, Stmt)>,
    init: Vec<Vec<U>>,
    top: usize,
    empty: Frame,
}

impl Interp {
    pub fn new(unit: &SourceUnit, top: &str) -> Interp {
        let m = unit.modules.iter().position(|m| m.name == top).expect("top module exists");
        let mut it = Interp {
            unit: unit.clone(),
            scopes: Vec::new(),
            sigs: Vec::new(),
            vals: Vec::new(),
            procs: Vec::new(),
            seq: Vec::new(),
            init: Vec::new(),
            top: 0,
            empty: Frame::default(),
        };
        let mut reset: HashMap<(usize, usize, usize), bool> = HashMap::new();
        let mut inits: HashMap<usize, U> = HashMap::new();
        it.top = it.instantiate(m, HashMap::new(), &mut reset, &mut inits);
        let mut state: Vec<Vec<U>> = it.sigs.iter().map(|s| vec![U::default(); s.word_count()]).collect();
        for (sig, v) in inits {
            let w = it.sigs[sig].w;
            for (k, word) in state[sig].iter_mut().enumerate() {
                *word = mask(v.clone() >> (k * w), w);
            }
        }
        for ((sig, word, pos), b) in reset {
            state[sig][word].set_bit(pos as u64, b);
        }
        it.init = state.clone();
        it.vals = state;
        it
    }

    fn module(&self, sc: usize) -> &ModuleDecl {
        &self.unit.modules[self.scopes[sc].m]
    }

    fn instantiate(
        &mut self,
        m: usize,
        overrides: HashMap<String, PVal>,
        reset: &mut HashMap<(usize, usize, usize), bool>,
        inits: &mut HashMap<usize, U>,
    ) -> usize {
        let sc = self.scopes.len();
        self.scopes.push(Scope {
            m,
            params: HashMap::new(),
            sigs: HashMap::new(),
        });
        let module = self.unit.modules[m].clone();
        for p in &module.params {
            let mut v = match overrides.get(&p.name) {
                Some(v) if !p.local => v.clone(),
                _ => self.const_val(sc, &p.value),
            };
            if p.integer {
                v = PVal {
                    v: fit(&v.v, v.w, 32, v.s),
                    w: 32,
                    s: true,
                    msb: 31,
                    lsb: 0,
                };
            } else if let Some(r) = &p.range {
                let (msb, lsb) = (self.const_int(sc, &r.msb), self.const_int(sc, &r.lsb));
                let w = (msb - lsb).unsigned_abs() as usize + 1;
                v = PVal {
                    v: fit(&v.v, v.w, w, v.s),
                    w,
                    s: p.signed,
                    msb,
                    lsb,
                };
            } else if p.signed {
                v.s = true;
            }
            self.scopes[sc].params.insert(p.name.clone(), v);
        }
        for p in &module.ports {
            let (msb, lsb) = match &p.range {
                Some(r) => (self.const_int(sc, &r.msb), self.const_int(sc, &r.lsb)),
                None => (0, 0),
            };
            self.declare(sc, &p.name, msb, lsb, None, p.signed);
        }
        for item in &module.items {
            let ItemKind::Net(decl) = &item.kind else { continue };
            for n in &decl.names {
                if let Some(&id) = self.scopes[sc].sigs.get(&n.name) {
                    self.sigs[id].s |= decl.signed;
                    continue;
                }
                let (msb, lsb) = match &decl.range {
                    Some(r) => (self.const_int(sc, &r.msb), self.const_int(sc, &r.lsb)),
                    None => (0, 0),
                };
                let words = n.dims.first().map(|d| (self.const_int(sc, &d.msb), self.const_int(sc, &d.lsb)));
                self.declare(sc, &n.name, msb, lsb, words, decl.signed);
            }
        }
        for item in &module.items {
            match &item.kind {
                ItemKind::Net(decl) => {
                    for n in &decl.names {
                        let Some(e) = &n.init else { continue };
                        if decl.kind == NetKind::Wire {
                            self.procs.push(Proc::Assign {
                                sc,
                                lhs: Expr::Ident(n.name.clone()),
                                rhs: e.clone(),
                            });
                        } else {
                            let id = self.scopes[sc].sigs[&n.name];
                            let total = self.sigs[id].w * self.sigs[id].word_count();
                            let (rw, rs) = self.ty(sc, e);
                            let v = self.eval(sc, Mode::Const(None), e, total.max(rw), rs).expect("constant initializer");
                            inits.insert(id, mask(v, total));
                        }
                    }
                }
                ItemKind::Assign { lhs, rhs } => self.procs.push(Proc::Assign {
                    sc,
                    lhs: lhs.clone(),
                    rhs: rhs.clone(),
                }),
                ItemKind::Always(a) => match &a.sens {
                    Sensitivity::Comb => self.procs.push(Proc::Comb {
                        sc,
                        body: a.body.clone(),
                    }),
                    Sensitivity::Edges(edges) => {
                        self.reset_values(sc, &a.body, edges, reset);
                        self.seq.push((sc, a.body.clone()));
                    }
                    Sensitivity::Other => panic!("unsupported event control"),
                },
                ItemKind::Instance(inst) => {
                    let cm = self
                        .unit
                        .modules
                        .iter()
                        .position(|x| x.name == inst.module)
                        .expect("instantiated module exists");
                    let child_decl = self.unit.modules[cm].clone();
                    let mut ov = HashMap::new();
                    match &inst.params {
                        ParamAssigns::Named(v) => {
                            for (n, e) in v {
                                if let Some(e) = e {
                                    ov.insert(n.clone(), self.const_val(sc, e));
                                }
                            }
                        }
                        ParamAssigns::Positional(v) => {
                            let names = child_decl.params.iter().filter(|p| !p.local).map(|p| p.name.clone());
                            for (n, e) in names.zip(v) {
                                ov.insert(n, self.const_val(sc, e));
                            }
                        }
                    }
                    let child = self.instantiate(cm, ov, reset, inits);
                    let conns: Vec<(usize, Expr)> = match &inst.conns {
                        Connections::Named(v) => v
                            .iter()
                            .filter_map(|(n, e)| {
                                let i = child_decl.ports.iter().position(|p| &p.name == n).expect("port exists");
                                e.clone().map(|e| (i, e))
                            })
                            .collect(),
                        Connections::Positional(v) => {
                            v.iter().enumerate().filter_map(|(i, e)| e.clone().map(|e| (i, e))).collect()
                        }
                        Connections::Wildcard => child_decl
                            .ports
                            .iter()
                            .enumerate()
                            .map(|(i, p)| (i, Expr::Ident(p.name.clone())))
                            .collect(),
                    };
                    for (i, e) in conns {
                        let port = &child_decl.ports[i];
                        let cs = self.scopes[child].sigs[&port.name];
                        match port.direction {
                            Direction::In => self.procs.push(Proc::PortIn { parent: sc, e, child: cs }),
                            Direction::Out => self.procs.push(Proc::PortOut {
                                child: cs,
                                parent: sc,
                                lhs: e,
                            }),
                            Direction::Inout => panic!("inout port"),
                        }
                    }
                }
                ItemKind::Opaque { keyword } => panic!("unsupported item `{keyword}`"),
                ItemKind::PortDir(_) | ItemKind::Param(_) => {}
            }
        }
        sc
    }

    fn declare(&mut self, sc: usize, name: &str, msb: i64, lsb: i64, words: Option<(i64, i64)>, s: bool) {
        let id = self.sigs.len();
        self.sigs.push(Sig {
            w: (msb - lsb).unsigned_abs() as usize + 1,
            s,
            msb,
            lsb,
            words,
        });
        self.scopes[sc].sigs.insert(name.to_string(), id);
    }

    fn const_val(&self, sc: usize, e: &Expr) -> PVal {
        let (w, s) = self.ty(sc, e);
        let v = self.eval(sc, Mode::Const(None), e, w, s).expect("constant expression");
        PVal {
            v,
            w,
            s,
            msb: w as i64 - 1,
            lsb: 0,
        }
    }

    fn const_int(&self, sc: usize, e: &Expr) -> i64 {
        let p = self.const_val(sc, e);
        small(&to_int(&p.v, p.w, p.s)).expect("constant fits i64")
    }

    fn sig_of(&self, sc: usize, name: &str) -> Option<usize> {
        self.scopes[sc].sigs.get(name).copied()
    }

    fn is_mem(&self, sc: usize, e: &Expr) -> bool {
        matches!(e, Expr::Ident(n) if self.sig_of(sc, n).is_some_and(|id| self.sigs[id].words.is_some()))
    }

    // ------------------------------------------------------------ types

    fn ty(&self, sc: usize, e: &Expr) -> (usize, bool) {
        match e {
            Expr::Ident(n) => match self.sig_of(sc, n) {
                Some(id) => (self.sigs[id].w, self.sigs[id].s),
                None => {
                    let p = &self.scopes[sc].params[n];
                    (p.w, p.s)
                }
            },
            Expr::Number(n) => {
                let b = n.bits().expect("literal");
                (b.width as usize, b.signed)
            }
            Expr::Index { base, .. } => {
                if self.is_mem(sc, base) {
                    let Expr::Ident(n) = &**base else { unreachable!() };
                    let s = &self.sigs[self.sig_of(sc, n).unwrap()];
                    (s.w, s.s)
                } else {
                    (1, false)
                }
            }
            Expr::Slice { msb, lsb, .. } => {
                ((self.const_int(sc, msb) - self.const_int(sc, lsb)).unsigned_abs() as usize + 1, false)
            }
            Expr::IndexedSlice { width, .. } => (self.const_int(sc, width) as usize, false),
            Expr::Concat(items) => (items.iter().map(|x| self.ty(sc, x).0).sum(), false),
            Expr::Repeat { count, items } => (
                self.const_int(sc, count) as usize * items.iter().map(|x| self.ty(sc, x).0).sum::<usize>(),
                false,
            ),
            Expr::Unary { op, operand } => match op {
                UnaryOp::Plus | UnaryOp::Neg | UnaryOp::Not => self.ty(sc, operand),
                _ => (1, false),
            },
            Expr::Binary { op, lhs, rhs } => {
                let (lw, ls) = self.ty(sc, lhs);
                let (rw, rs) = self.ty(sc, rhs);
                use BinaryOp::*;
                match op {
                    Add | Sub | Mul | Div | Mod | And | Or | Xor | Xnor => (lw.max(rw), ls && rs),
                    Pow | Shl | Shr | AShl | AShr => (lw, ls),
                    _ => (1, false),
                }
            }
            Expr::Ternary { then, els, .. } => {
                let (a, sa) = self.ty(sc, then);
                let (b, sb) = self.ty(sc, els);
                (a.max(b), sa && sb)
            }
            Expr::Call { name, args } => match name.as_str() {
                "$signed" => (self.ty(sc, &args[0]).0, true),
                "$unsigned" => (self.ty(sc, &args[0]).0, false),
                "$clog2" => (32, true),
                _ => panic!("unsupported call {name}"),
            },
            Expr::Str(_) => panic!("string literal"),
        }
    }

    // ------------------------------------------------------------ reads

    fn read_word(&self, mode: Mode, sig: usize, k: usize) -> Option<U> {
        match mode {
            Mode::Run(f) => Some(f.view.get(&sig).map_or_else(|| self.vals[sig][k].clone(), |ws| ws[k].clone())),
            Mode::Const(Some((pin, b))) if pin == sig => Some(U::from(u8::from(b))),
            Mode::Const(_) => None,
        }
    }

    /// Value, msb and lsb of a selectable base (vector, parameter or memory word).
    fn read_base(&self, sc: usize, mode: Mode, e: &Expr) -> Option<(U, i64, i64)> {
        match e {
            Expr::Ident(n) => match self.sig_of(sc, n) {
                Some(id) => {
                    let s = &self.sigs[id];
                    Some((self.read_word(mode, id, 0)?, s.msb, s.lsb))
                }
                None => {
                    let p = &self.scopes[sc].params[n];
                    Some((p.v.clone(), p.msb, p.lsb))
                }
            },
            Expr::Index { base, index } if self.is_mem(sc, base) => {
                let Expr::Ident(n) = &**base else { unreachable!() };
                let id = self.sig_of(sc, n).unwrap();
                let idx = self.self_int(sc, mode, index)?;
                let s = &self.sigs[id];
                let v = match small(&idx).and_then(|i| s.word(i)) {
                    Some(k) => self.read_word(mode, id, k)?,
                    None => U::default(),
                };
                Some((v, s.msb, s.lsb))
            }
            _ => panic!("select on a non-identifier"),
        }
    }

    fn self_eval(&self, sc: usize, mode: Mode, e: &Expr) -> Option<(U, usize, bool)> {
        let (w, s) = self.ty(sc, e);
        Some((self.eval(sc, mode, e, w, s)?, w, s))
    }

    fn self_int(&self, sc: usize, mode: Mode, e: &Expr) -> Option<BigInt> {
        let (v, w, s) = self.self_eval(sc, mode, e)?;
        Some(to_int(&v, w, s))
    }

    fn truth(&self, sc: usize, mode: Mode, e: &Expr) -> Option<bool> {
        Some(nz(&self.self_eval(sc, mode, e)?.0))
    }

    /// Evaluates `e` in a context of width `w` and signedness `s`.
    fn eval(&self, sc: usize, mode: Mode, e: &Expr, w: usize, s: bool) -> Option<U> {
        let (v, from, ext) = match e {
            Expr::Ident(_) => {
                let (v, _, _) = self.read_base(sc, mode, e)?;
                (v, self.ty(sc, e).0, s)
            }
            Expr::Number(n) => {
                let b = n.bits().expect("literal");
                let mut v = U::default();
                for (i, x) in b.bits.iter().enumerate() {
                    if *x {
                        v.set_bit(i as u64, true);
                    }
                }
                (v, b.width as usize, s)
            }
            Expr::Index { base, index } => {
                if self.is_mem(sc, base) {
                    let (v, _, _) = self.read_base(sc, mode, e)?;
                    (v, self.ty(sc, e).0, s)
                } else {
                    let (v, msb, lsb) = self.read_base(sc, mode, base)?;
                    let idx = self.self_int(sc, mode, index)?;
                    let b = small(&idx).and_then(|i| vec_pos(msb, lsb, i)).is_some_and(|p| bit(&v, p));
                    (U::from(u8::from(b)), 1, s)
                }
            }
            Expr::Slice { base, msb: a, lsb: b } => {
                let (v, msb, lsb) = self.read_base(sc, mode, base)?;
                let pa = vec_pos(msb, lsb, self.const_int(sc, a)).expect("slice in range");
                let pb = vec_pos(msb, lsb, self.const_int(sc, b)).expect("slice in range");
                (mask(v >> pb, pa - pb + 1), pa - pb + 1, s)
            }
            Expr::IndexedSlice {
                base,
                start,
                width,
                up,
            } => {
                let (v, msb, lsb) = self.read_base(sc, mode, base)?;
                let wd = self.const_int(sc, width);
                let st = self.self_int(sc, mode, start)?;
                let mut out = U::default();
                if let Some(st) = small(&st) {
                    let lo = if *up { st } else { st - wd + 1 };
                    let hi = lo + wd - 1;
                    for k in 0..wd {
                        let idx = if msb >= lsb { lo + k } else { hi - k };
                        if vec_pos(msb, lsb, idx).is_some_and(|p| bit(&v, p)) {
                            out.set_bit(k as u64, true);
                        }
                    }
                }
                (out, wd as usize, s)
            }
            Expr::Concat(items) => {
                let (v, w0) = self.concat(sc, mode, items)?;
                (v, w0, s)
            }
            Expr::Repeat { count, items } => {
                let n = self.const_int(sc, count) as usize;
                let (one_v, w1) = self.concat(sc, mode, items)?;
                let mut v = U::default();
                for _ in 0..n {
                    v = (v << w1) | &one_v;
                }
                (v, w1 * n, s)
            }
            Expr::Unary { op, operand } => match op {
                UnaryOp::Plus => return self.eval(sc, mode, operand, w, s),
                UnaryOp::Neg => {
                    let x = self.eval(sc, mode, operand, w, s)?;
                    return Some(from_int(&-BigInt::from(x), w));
                }
                UnaryOp::Not => {
                    let x = self.eval(sc, mode, operand, w, s)?;
                    return Some(x ^ ones(w));
                }
                _ => {
                    let (x, xw, _) = self.self_eval(sc, mode, operand)?;
                    let all = x == ones(xw);
                    let any = nz(&x);
                    let par = x.count_ones() % 2 == 1;
                    let b = match op {
                        UnaryOp::RedAnd => all,
                        UnaryOp::RedNand => !all,
                        UnaryOp::RedOr => any,
                        UnaryOp::RedNor | UnaryOp::LogNot => !any,
                        UnaryOp::RedXor => par,
                        UnaryOp::RedXnor => !par,
                        _ => unreachable!(),
                    };
                    (U::from(u8::from(b)), 1, false)
                }
            },
            Expr::Binary { op, lhs, rhs } => return self.binary(sc, mode, *op, lhs, rhs, w, s),
            Expr::Ternary { cond, then, els } => {
                return if self.truth(sc, mode, cond)? {
                    self.eval(sc, mode, then, w, s)
                } else {
                    self.eval(sc, mode, els, w, s)
                };
            }
            Expr::Call { name, args } => match name.as_str() {
                "$signed" | "$unsigned" => {
                    let (x, xw, _) = self.self_eval(sc, mode, &args[0])?;
                    (x, xw, s)
                }
                "$clog2" => {
                    let x = self.const_int(sc, &args[0]);
                    let mut r = 0;
                    while (1i64 << r) < x {
                        r += 1;
                    }
                    (U::from(r as u64), 32, s)
                }
                _ => panic!("unsupported call {name}"),
            },
            Expr::Str(_) => panic!("string literal"),
        };
        Some(fit(&v, from, w, ext))
    }

    fn concat(&self, sc: usize, mode: Mode, items: &[Expr]) -> Option<(U, usize)> {
        let mut v = U::default();
        let mut w = 0;
        for it in items {
            let (x, xw, _) = self.self_eval(sc, mode, it)?;
            v = (v << xw) | x;
            w += xw;
        }
        Some((v, w))
    }

    #[allow(clippy::too_many_arguments)]
    fn binary(&self, sc: usize, mode: Mode, op: BinaryOp, lhs: &Expr, rhs: &Expr, w: usize, s: bool) -> Option<U> {
        use BinaryOp::*;
        match op {
            Add | Sub | Mul | Div | Mod | And | Or | Xor | Xnor => {
                let a = self.eval(sc, mode, lhs, w, s)?;
                let b = self.eval(sc, mode, rhs, w, s)?;
                let (ia, ib) = (to_int(&a, w, s), to_int(&b, w, s));
                Some(match op {
                    Add => from_int(&(ia + ib), w),
                    Sub => from_int(&(ia - ib), w),
                    Mul => from_int(&(ia * ib), w),
                    // BigInt division truncates toward zero; the remainder takes the dividend's sign.
                    Div => from_int(&(ia / ib), w),
                    Mod => from_int(&(ia % ib), w),
                    And => a & b,
                    Or => a | b,
                    Xor => a ^ b,
                    _ => (a ^ b) ^ ones(w),
                })
            }
            Pow => {
                let a = self.eval(sc, mode, lhs, w, s)?;
                let e = self.self_int(sc, mode, rhs)?;
                let e = u32::try_from(e).expect("non-negative exponent");
                Some(from_int(&to_int(&a, w, s).pow(e), w))
            }
            Shl | AShl | Shr | AShr => {
                let a = self.eval(sc, mode, lhs, w, s)?;
                let (amt, _, _) = self.self_eval(sc, mode, rhs)?;
                let n = usize::try_from(amt).unwrap_or(usize::MAX).min(w);
                Some(match op {
                    Shl | AShl => mask(a << n, w),
                    Shr => a >> n,
                    _ => {
                        let neg = s && bit(&a, w - 1);
                        let r = a >> n;
                        if neg {
                            r | (ones(w) ^ ones(w - n))
                        } else {
                            r
                        }
                    }
                })
            }
            Eq | Ne | CaseEq | CaseNe | Lt | Le | Gt | Ge => {
                let (lw, ls) = self.ty(sc, lhs);
                let (rw, rs) = self.ty(sc, rhs);
                let (m, t) = (lw.max(rw), ls && rs);
                let a = to_int(&self.eval(sc, mode, lhs, m, t)?, m, t);
                let b = to_int(&self.eval(sc, mode, rhs, m, t)?, m, t);
                let r = match op {
                    Eq | CaseEq => a == b,
                    Ne | CaseNe => a != b,
                    Lt => a < b,
                    Le => a <= b,
                    Gt => a > b,
                    _ => a >= b,
                };
                Some(U::from(u8::from(r)))
            }
            LogAnd | LogOr => {
                let a = self.truth(sc, mode, lhs)?;
                let b = self.truth(sc, mode, rhs)?;
                Some(U::from(u8::from(if op == LogAnd { a && b } else { a || b })))
            }
        }
    }

    // ---------------------------------------------------------- writes

    fn lv_base(&self, sc: usize, mode: Mode, e: &Expr) -> Option<(Vec<Target>, i64, i64)> {
        match e {
            Expr::Ident(n) => {
                let id = self.sig_of(sc, n).expect("assignable signal");
                let s = &self.sigs[id];
                Some(((0..s.w).map(|p| (id, 0, Some(p))).collect(), s.msb, s.lsb))
            }
            Expr::Index { base, index } if self.is_mem(sc, base) => {
                let Expr::Ident(n) = &**base else { unreachable!() };
                let id = self.sig_of(sc, n).unwrap();
                let idx = self.self_int(sc, mode, index)?;
                let s = &self.sigs[id];
                let t = match small(&idx).and_then(|i| s.word(i)) {
                    Some(k) => (0..s.w).map(|p| (id, k, Some(p))).collect(),
                    None => (0..s.w).map(|_| (id, 0, None)).collect(),
                };
                Some((t, s.msb, s.lsb))
            }
            _ => panic!("not assignable"),
        }
    }

    fn lvalue(&self, sc: usize, mode: Mode, e: &Expr) -> Option<Vec<Target>> {
        match e {
            Expr::Concat(items) => {
                let mut out = Vec::new();
                for it in items.iter().rev() {
                    out.extend(self.lvalue(sc, mode, it)?);
                }
                Some(out)
            }
            Expr::Ident(_) => Some(self.lv_base(sc, mode, e)?.0),
            Expr::Index { base, .. } if self.is_mem(sc, base) => Some(self.lv_base(sc, mode, e)?.0),
            Expr::Index { base, index } => {
                let (t, msb, lsb) = self.lv_base(sc, mode, base)?;
                let idx = self.self_int(sc, mode, index)?;
                Some(vec![match small(&idx).and_then(|i| vec_pos(msb, lsb, i)) {
                    Some(p) => t[p],
                    None => (t[0].0, t[0].1, None),
                }])
            }
            Expr::Slice { base, msb: a, lsb: b } => {
                let (t, msb, lsb) = self.lv_base(sc, mode, base)?;
                let pa = vec_pos(msb, lsb, self.const_int(sc, a)).expect("slice in range");
                let pb = vec_pos(msb, lsb, self.const_int(sc, b)).expect("slice in range");
                Some(t[pb..=pa].to_vec())
            }
            Expr::IndexedSlice {
                base,
                start,
                width,
                up,
            } => {
                let (t, msb, lsb) = self.lv_base(sc, mode, base)?;
                let wd = self.const_int(sc, width);
                let st = self.self_int(sc, mode, start)?;
                let dropped = vec![(t[0].0, t[0].1, None); wd as usize];
                let Some(st) = small(&st) else { return Some(dropped) };
                let lo = if *up { st } else { st - wd + 1 };
                let hi = lo + wd - 1;
                match (vec_pos(msb, lsb, lo), vec_pos(msb, lsb, hi)) {
                    (Some(a), Some(b)) => Some(t[a.min(b)..=a.max(b)].to_vec()),
                    _ => Some(dropped),
                }
            }
            _ => panic!("not assignable"),
        }
    }

    fn current(&self, f: &Frame, sig: usize) -> Vec<U> {
        f.view.get(&sig).cloned().unwrap_or_else(|| self.vals[sig].clone())
    }

    fn assign(&self, sc: usize, f: &mut Frame, lhs: &Expr, rhs: &Expr, blocking: bool) {
        let t = self.lvalue(sc, Mode::Run(f), lhs).unwrap();
        let (rw, rs) = self.ty(sc, rhs);
        let v = self.eval(sc, Mode::Run(f), rhs, t.len().max(rw), rs).unwrap();
        for (k, (sig, word, pos)) in t.into_iter().enumerate() {
            let Some(p) = pos else { continue };
            let b = bit(&v, k);
            if !f.next.contains_key(&sig) {
                let cur = self.vals[sig].clone();
                f.next.insert(sig, cur);
            }
            f.next.get_mut(&sig).unwrap()[word].set_bit(p as u64, b);
            if blocking {
                let mut cur = self.current(f, sig);
                cur[word].set_bit(p as u64, b);
                f.view.insert(sig, cur);
            }
        }
    }

    fn exec(&self, sc: usize, f: &mut Frame, s: &Stmt) {
        match s {
            Stmt::Block(v) => v.iter().for_each(|x| self.exec(sc, f, x)),
            Stmt::Null => {}
            Stmt::If { cond, then, els } => {
                if self.truth(sc, Mode::Run(f), cond).unwrap() {
                    self.exec(sc, f, then);
                } else if let Some(e) = els {
                    self.exec(sc, f, e);
                }
            }
            Stmt::Case {
                kind,
                subject,
                arms,
                default,
            } => {
                let arm = self.case_arm(sc, Mode::Run(f), *kind, subject, arms).unwrap();
                match arm {
                    Some(i) => self.exec(sc, f, &arms[i].body),
                    None => {
                        if let Some(d) = default {
                            self.exec(sc, f, d);
                        }
                    }
                }
            }
            Stmt::Assign { blocking, lhs, rhs } => self.assign(sc, f, lhs, rhs, *blocking),
            Stmt::Opaque { keyword, .. } => panic!("unsupported statement `{keyword}`"),
        }
    }

    /// Index of the first matching arm.
    fn case_arm(
        &self,
        sc: usize,
        mode: Mode,
        kind: CaseKind,
        subject: &Expr,
        arms: &[rtlbench::frontend::CaseArm],
    ) -> Option<Option<usize>> {
        let (mut m, mut t) = self.ty(sc, subject);
        for a in arms {
            for l in &a.labels {
                let (lw, ls) = self.ty(sc, l);
                m = m.max(lw);
                t &= ls;
            }
        }
        let subj = self.eval(sc, mode, subject, m, t)?;
        for (i, a) in arms.iter().enumerate() {
            for l in &a.labels {
                let hit = match l {
                    Expr::Number(n) if n.bits().is_some_and(|b| b.unknown.iter().any(|u| *u)) => {
                        assert!(kind != CaseKind::Case, "x/z label in a plain case");
                        let b = n.bits().unwrap();
                        let top = b.bits.len() - 1;
                        (0..m).all(|p| {
                            let (val, unk) = if p < b.bits.len() {
                                (b.bits[p], b.unknown[p])
                            } else {
                                (t && b.signed && b.bits[top], false)
                            };
                            unk || bit(&subj, p) == val
                        })
                    }
                    _ => self.eval(sc, mode, l, m, t)? == subj,
                };
                if hit {
                    return Some(Some(i));
                }
            }
        }
        Some(None)
    }

    // ---------------------------------------------------------- resets

    fn reset_values(
        &self,
        sc: usize,
        body: &Stmt,
        edges: &[(Edge, String)],
        out: &mut HashMap<(usize, usize, usize), bool>,
    ) {
        let mut b = body;
        while let Stmt::Block(v) = b {
            if v.len() != 1 {
                break;
            }
            b = &v[0];
        }
        let Stmt::If { cond, then, els } = b else { return };
        let mut ids = Vec::new();
        cond.idents(&mut ids);
        ids.sort();
        ids.dedup();
        let r = match ids.as_slice() {
            [r] => *r,
            _ => return,
        };
        let active_high = if edges.len() > 1 {
            match edges.iter().find(|(_, n)| n == r) {
                Some((e, _)) => *e == Edge::Pos,
                None => return,
            }
        } else {
            let l = r.to_ascii_lowercase();
            if !(l.contains("rst") || l.contains("reset")) {
                return;
            }
            !(l.ends_with('n') || l.ends_with("_b") || l.ends_with("_l") || l.starts_with('n'))
        };
        let Some(id) = self.sig_of(sc, r) else { return };
        if self.sigs[id].w != 1 || self.sigs[id].words.is_some() {
            return;
        }
        let at = |v: bool| self.truth(sc, Mode::Const(Some((id, v))), cond).expect("reset condition");
        let branch = match (at(false), at(true)) {
            (false, true) => Some(if active_high { Some(&**then) } else { els.as_deref() }),
            (true, false) => Some(if active_high { els.as_deref() } else { Some(&**then) }),
            _ => None,
        };
        if let Some(Some(br)) = branch {
            let mut known = HashMap::new();
            self.const_exec(sc, br, &mut known);
            out.extend(known);
        }
    }

    fn const_exec(&self, sc: usize, s: &Stmt, known: &mut HashMap<(usize, usize, usize), bool>) {
        let mode = Mode::Const(None);
        match s {
            Stmt::Block(v) => v.iter().for_each(|x| self.const_exec(sc, x, known)),
            Stmt::Null => {}
            Stmt::Assign { lhs, rhs, .. } => {
                let Some(t) = self.lvalue(sc, mode, lhs) else { return };
                let (rw, rs) = self.ty(sc, rhs);
                let v = self.eval(sc, mode, rhs, t.len().max(rw), rs);
                for (k, (sig, word, pos)) in t.into_iter().enumerate() {
                    let Some(p) = pos else { continue };
                    match &v {
                        Some(v) => known.insert((sig, word, p), bit(v, k)),
                        None => known.remove(&(sig, word, p)),
                    };
                }
            }
            Stmt::If { cond, then, els } => match self.truth(sc, mode, cond) {
                Some(true) => self.const_exec(sc, then, known),
                Some(false) => {
                    if let Some(e) = els {
                        self.const_exec(sc, e, known);
                    }
                }
                None => {
                    let mut a = known.clone();
                    self.const_exec(sc, then, &mut a);
                    let mut b = known.clone();
                    if let Some(e) = els {
                        self.const_exec(sc, e, &mut b);
                    }
                    *known = a.into_iter().filter(|(k, v)| b.get(k) == Some(v)).collect();
                }
            },
            Stmt::Case {
                kind,
                subject,
                arms,
                default,
            } => match self.case_arm(sc, mode, *kind, subject, arms) {
                Some(Some(i)) => self.const_exec(sc, &arms[i].body, known),
                Some(None) => {
                    if let Some(d) = default {
                        self.const_exec(sc, d, known);
                    }
                }
                None => panic!("reset branch with a data-dependent case"),
            },
            Stmt::Opaque { keyword, .. } => panic!("unsupported statement `{keyword}`"),
        }
    }

    // ------------------------------------------------------ simulation

    /// Back to the power-on state.
    pub fn reset(&mut self) {
        self.vals = self.init.clone();
    }

    fn settle(&mut self) {
        for _ in 0..10_000 {
            let mut changed = false;
            for i in 0..self.procs.len() {
                let writes = self.run_proc(i);
                for (sig, words) in writes {
                    if self.vals[sig] != words {
                        self.vals[sig] = words;
                        changed = true;
                    }
                }
            }
            if !changed {
                return;
            }
        }
        panic!("combinational logic does not settle");
    }

    fn run_proc(&self, i: usize) -> Vec<(usize, Vec<U>)> {
        let mut f = Frame::default();
        match &self.procs[i] {
            Proc::Assign { sc, lhs, rhs } => self.assign(*sc, &mut f, lhs, rhs, true),
            Proc::Comb { sc, body } => self.exec(*sc, &mut f, body),
            Proc::PortIn { parent, e, child } => {
                let cw = self.sigs[*child].w;
                let (rw, rs) = self.ty(*parent, e);
                let v = self.eval(*parent, Mode::Run(&self.empty), e, cw.max(rw), rs).unwrap();
                return vec![(*child, vec![mask(v, cw)])];
            }
            Proc::PortOut { child, parent, lhs } => {
                let t = self.lvalue(*parent, Mode::Run(&self.empty), lhs).unwrap();
                let c = &self.sigs[*child];
                let v = fit(&self.vals[*child][0], c.w, t.len(), c.s);
                for (k, (sig, word, pos)) in t.into_iter().enumerate() {
                    let Some(p) = pos else { continue };
                    let cur = f.next.entry(sig).or_insert_with(|| self.vals[sig].clone());
                    cur[word].set_bit(p as u64, bit(&v, k));
                }
            }
        }
        f.next.into_iter().collect()
    }

    fn clock_edge(&mut self) {
        let mut commits = Vec::new();
        for (sc, body) in &self.seq {
            let mut f = Frame::default();
            self.exec(*sc, &mut f, body);
            commits.extend(f.next);
        }
        for (sig, words) in commits {
            self.vals[sig] = words;
        }
    }

    /// Applies `inputs` (missing ones read 0), returns the outputs of this
    /// cycle, then advances the clock.
    pub fn step(&mut self, inputs: &BTreeMap<String, Bits>) -> BTreeMap<String, Bits> {
        let top = self.top;
        let ports = self.unit.modules[self.scopes[top].m].ports.clone();
        for p in &ports {
            if p.direction == Direction::In {
                let id = self.scopes[top].sigs[&p.name];
                let mut v = U::default();
                if let Some(b) = inputs.get(&p.name) {
                    for (i, x) in b.0.iter().enumerate() {
                        if *x {
                            v.set_bit(i as u64, true);
                        }
                    }
                }
                self.vals[id][0] = mask(v, self.sigs[id].w);
            }
        }
        self.settle();
        let mut out = BTreeMap::new();
        for p in &ports {
            if p.direction == Direction::Out {
                let id = self.scopes[top].sigs[&p.name];
                let w = self.sigs[id].w;
                out.insert(p.name.clone(), Bits((0..w).map(|i| bit(&self.vals[id][0], i)).collect()));
            }
        }
        self.clock_edge();
        out
    }
}
