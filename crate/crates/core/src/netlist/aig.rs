// SPDX-License-Identifier: Apache-2.0

//! And-inverter graph with structural hashing and word-level helpers.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// `var << 1 | negated`. Variable 0 is the constant false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lit(pub u32);

impl Lit {
    pub const FALSE: Lit = Lit(0);
    pub const TRUE: Lit = Lit(1);

    pub fn new(var: u32, neg: bool) -> Lit {
        Lit(var << 1 | u32::from(neg))
    }

    pub fn var(self) -> u32 {
        self.0 >> 1
    }

    pub fn is_neg(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn is_const(self) -> bool {
        self.var() == 0
    }

    pub fn from_bool(b: bool) -> Lit {
        if b {
            Lit::TRUE
        } else {
            Lit::FALSE
        }
    }

    pub fn const_value(self) -> Option<bool> {
        self.is_const().then(|| self.is_neg())
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl std::ops::BitXor<bool> for Lit {
    type Output = Lit;
    fn bitxor(self, rhs: bool) -> Lit {
        Lit(self.0 ^ u32::from(rhs))
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.const_value() {
            Some(false) => write!(f, "0"),
            Some(true) => write!(f, "1"),
            None if self.is_neg() => write!(f, "!n{}", self.var()),
            None => write!(f, "n{}", self.var()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Node {
    Const,
    /// Index into the owning netlist's flattened input bits.
    Input(u32),
    /// Index into the owning netlist's registers.
    Latch(u32),
    /// Placeholder for a named signal bit; only present during elaboration.
    Wire(u32),
    And(Lit, Lit),
}

#[derive(Debug, Clone, Default)]
pub struct Aig {
    nodes: Vec<Node>,
    strash: HashMap<(Lit, Lit), Lit>,
}

impl Aig {
    pub fn new() -> Self {
        Self {
            nodes: vec![Node::Const],
            strash: HashMap::new(),
        }
    }

    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        let mut strash = HashMap::new();
        for (v, n) in nodes.iter().enumerate() {
            if let Node::And(a, b) = n {
                strash.insert((*a, *b), Lit::new(v as u32, false));
            }
        }
        Self { nodes, strash }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, var: u32) -> Node {
        self.nodes[var as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn and_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::And(..))).count()
    }

    pub fn add_source(&mut self, node: Node) -> Lit {
        debug_assert!(!matches!(node, Node::And(..) | Node::Const));
        self.nodes.push(node);
        Lit::new(self.nodes.len() as u32 - 1, false)
    }

    /// Redirects a source node (used to turn wires into inputs when cutting).
    pub fn set_source(&mut self, var: u32, node: Node) {
        debug_assert!(!matches!(self.nodes[var as usize], Node::And(..)));
        self.nodes[var as usize] = node;
    }

    pub fn and(&mut self, a: Lit, b: Lit) -> Lit {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == Lit::FALSE || a == !b {
            return Lit::FALSE;
        }
        if a == Lit::TRUE || a == b {
            return b;
        }
        if let Some(l) = self.strash.get(&(a, b)) {
            return *l;
        }
        self.nodes.push(Node::And(a, b));
        let l = Lit::new(self.nodes.len() as u32 - 1, false);
        self.strash.insert((a, b), l);
        l
    }

    pub fn or(&mut self, a: Lit, b: Lit) -> Lit {
        !self.and(!a, !b)
    }

    pub fn xor(&mut self, a: Lit, b: Lit) -> Lit {
        if let (Some(x), _) | (_, Some(x)) = (a.const_value(), b.const_value()) {
            let other = if a.is_const() { b } else { a };
            return other ^ x;
        }
        if a == b {
            return Lit::FALSE;
        }
        if a == !b {
            return Lit::TRUE;
        }
        let p = self.and(a, !b);
        let q = self.and(!a, b);
        self.or(p, q)
    }

    pub fn xnor(&mut self, a: Lit, b: Lit) -> Lit {
        !self.xor(a, b)
    }

    /// `s ? t : e`
    pub fn mux(&mut self, s: Lit, t: Lit, e: Lit) -> Lit {
        match s.const_value() {
            Some(true) => return t,
            Some(false) => return e,
            None => {}
        }
        if t == e {
            return t;
        }
        if t == !e {
            return self.xnor(s, t);
        }
        let a = self.and(s, t);
        let b = self.and(!s, e);
        self.or(a, b)
    }

    pub fn and_all(&mut self, lits: &[Lit]) -> Lit {
        let mut acc = Lit::TRUE;
        for l in lits {
            acc = self.and(acc, *l);
        }
        acc
    }

    pub fn or_all(&mut self, lits: &[Lit]) -> Lit {
        let mut acc = Lit::FALSE;
        for l in lits {
            acc = self.or(acc, *l);
        }
        acc
    }

    pub fn xor_all(&mut self, lits: &[Lit]) -> Lit {
        let mut acc = Lit::FALSE;
        for l in lits {
            acc = self.xor(acc, *l);
        }
        acc
    }

    // ------------------------------------------------------------ word ops
    // Words are LSB-first vectors of literals, all of equal width.

    pub fn bitwise(&mut self, a: &[Lit], b: &[Lit], f: fn(&mut Aig, Lit, Lit) -> Lit) -> Vec<Lit> {
        a.iter().zip(b).map(|(x, y)| f(self, *x, *y)).collect()
    }

    fn full_add(&mut self, a: Lit, b: Lit, c: Lit) -> (Lit, Lit) {
        let t = self.xor(a, b);
        let s = self.xor(t, c);
        let g = self.and(a, b);
        let p = self.and(t, c);
        (s, self.or(g, p))
    }

    /// Ripple-carry sum with carry in; returns (sum, carry out).
    pub fn add_carry(&mut self, a: &[Lit], b: &[Lit], cin: Lit) -> (Vec<Lit>, Lit) {
        let mut c = cin;
        let mut out = Vec::with_capacity(a.len());
        for (x, y) in a.iter().zip(b) {
            let (s, co) = self.full_add(*x, *y, c);
            out.push(s);
            c = co;
        }
        (out, c)
    }

    pub fn add(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        self.add_carry(a, b, Lit::FALSE).0
    }

    /// `a - b` as `a + ~b + 1`; the carry out is 1 iff `a >= b` unsigned.
    pub fn sub_carry(&mut self, a: &[Lit], b: &[Lit]) -> (Vec<Lit>, Lit) {
        let nb: Vec<Lit> = b.iter().map(|l| !*l).collect();
        self.add_carry(a, &nb, Lit::TRUE)
    }

    pub fn sub(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        self.sub_carry(a, b).0
    }

    pub fn neg(&mut self, a: &[Lit]) -> Vec<Lit> {
        let zero = vec![Lit::FALSE; a.len()];
        self.sub(&zero, a)
    }

    pub fn eq(&mut self, a: &[Lit], b: &[Lit]) -> Lit {
        let bits: Vec<Lit> = a.iter().zip(b).map(|(x, y)| self.xnor(*x, *y)).collect();
        self.and_all(&bits)
    }

    /// `a < b`, computed from the borrow of `a - b`.
    pub fn lt(&mut self, a: &[Lit], b: &[Lit], signed: bool) -> Lit {
        if a.is_empty() {
            return Lit::FALSE;
        }
        if signed {
            // Flipping the sign bits maps signed order onto unsigned order.
            let n = a.len() - 1;
            let mut a2 = a.to_vec();
            let mut b2 = b.to_vec();
            a2[n] = !a2[n];
            b2[n] = !b2[n];
            let (_, ge) = self.sub_carry(&a2, &b2);
            !ge
        } else {
            let (_, ge) = self.sub_carry(a, b);
            !ge
        }
    }

    /// Shift-add multiply truncated to the operand width.
    pub fn mul(&mut self, a: &[Lit], b: &[Lit]) -> Vec<Lit> {
        let w = a.len();
        let mut acc = vec![Lit::FALSE; w];
        for (i, bi) in b.iter().enumerate().take(w) {
            if *bi == Lit::FALSE {
                continue;
            }
            let mut partial = vec![Lit::FALSE; w];
            for j in 0..w - i {
                partial[i + j] = self.and(a[j], *bi);
            }
            acc = self.add(&acc, &partial);
        }
        acc
    }

    pub fn mux_word(&mut self, s: Lit, t: &[Lit], e: &[Lit]) -> Vec<Lit> {
        t.iter().zip(e).map(|(x, y)| self.mux(s, *x, *y)).collect()
    }

    /// Logical/arithmetic shift by a variable amount: a ladder of muxes, one
    /// per amount bit. Amount bits beyond the width saturate to `fill`.
    pub fn shift(&mut self, a: &[Lit], amount: &[Lit], left: bool, fill: Lit) -> Vec<Lit> {
        let w = a.len();
        let mut cur = a.to_vec();
        let mut overflow = Lit::FALSE;
        for (k, s) in amount.iter().enumerate() {
            let step = 1usize.checked_shl(k as u32).unwrap_or(usize::MAX);
            if step >= w {
                overflow = self.or(overflow, *s);
                continue;
            }
            let shifted = shift_const(&cur, step, left, fill);
            cur = self.mux_word(*s, &shifted, &cur);
        }
        let full = vec![fill; w];
        self.mux_word(overflow, &full, &cur)
    }
}

/// Shift by a constant amount: pure rewiring.
pub fn shift_const(a: &[Lit], amount: usize, left: bool, fill: Lit) -> Vec<Lit> {
    let w = a.len();
    (0..w)
        .map(|i| {
            if left {
                if i >= amount {
                    a[i - amount]
                } else {
                    Lit::FALSE
                }
            } else {
                a.get(i + amount).copied().unwrap_or(fill)
            }
        })
        .collect()
}

/// Constant word of `width` bits holding `v` (two's complement).
pub fn const_word(v: i64, width: usize) -> Vec<Lit> {
    (0..width).map(|i| Lit::from_bool(if i < 64 { v >> i & 1 == 1 } else { v < 0 })).collect()
}

/// Integer value of an all-constant word, if it fits.
pub fn word_value(w: &[Lit], signed: bool) -> Option<i64> {
    let bits = w.iter().map(|l| l.const_value()).collect::<Option<Vec<bool>>>()?;
    let ext = signed && bits.last() == Some(&true);
    let n = bits.len();
    let v: i128 = if n <= 64 {
        let mut v: i128 = 0;
        for (i, b) in bits.iter().enumerate() {
            if *b {
                v |= 1 << i;
            }
        }
        if ext {
            v -= 1 << n;
        }
        v
    } else {
        if bits[63..].iter().any(|b| *b != ext) {
            return None;
        }
        let mut v: i128 = 0;
        for (i, b) in bits.iter().enumerate().take(63) {
            if *b {
                v |= 1 << i;
            }
        }
        if ext {
            v -= 1 << 63;
        }
        v
    };
    i64::try_from(v).ok()
}
