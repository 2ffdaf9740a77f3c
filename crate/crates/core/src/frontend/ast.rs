// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

/// Byte range into the merged source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn slice<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub modules: Vec<ModuleDecl>,
    /// Text outside any module, in order.
    pub trailing_text: String,
}

impl SourceUnit {
    pub fn module(&self, name: &str) -> Option<&ModuleDecl> {
        self.modules.iter().find(|m| m.name == name)
    }

    /// Instantiated module names that have no declaration in this unit.
    pub fn external_instances(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for m in &self.modules {
            for inst in m.instances() {
                if self.module(&inst.module).is_none() {
                    out.push((m.name.clone(), inst.module.clone()));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
    Inout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortDecl {
    pub name: String,
    pub direction: Direction,
    /// Width under the module's default parameters.
    pub width: u32,
    pub signed: bool,
    #[serde(skip)]
    pub range: Option<Range>,
    #[serde(skip)]
    pub is_reg: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDecl {
    pub name: String,
    pub local: bool,
    pub signed: bool,
    pub range: Option<Range>,
    /// `parameter integer P`.
    pub integer: bool,
    pub value: Expr,
    /// Default value when it folds to an integer.
    pub default: Option<i64>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleDecl {
    pub name: String,
    pub ports: Vec<PortDecl>,
    pub params: Vec<ParamDecl>,
    pub items: Vec<Item>,
    /// From the `module` keyword to the end of `endmodule`.
    pub span: Span,
    /// End of the header (just past the `;` after the port list).
    pub header_end: usize,
    /// True when port directions are declared in the header itself.
    pub ansi: bool,
}

impl ModuleDecl {
    pub fn port(&self, name: &str) -> Option<&PortDecl> {
        self.ports.iter().find(|p| p.name == name)
    }

    /// Copy with every span shifted left by `offset` bytes.
    pub fn rebased(&self, offset: usize) -> ModuleDecl {
        let shift = |s: Span| Span::new(s.start - offset, s.end - offset);
        let mut m = self.clone();
        m.span = shift(m.span);
        m.header_end -= offset;
        for p in &mut m.params {
            p.span = shift(p.span);
        }
        for it in &mut m.items {
            it.span = shift(it.span);
            if let ItemKind::Always(a) = &mut it.kind {
                a.body.visit_mut(&mut |s| {
                    if let Stmt::Opaque { span, .. } = s {
                        *span = shift(*span);
                    }
                });
            }
        }
        m
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> {
        self.items.iter().filter_map(|it| match &it.kind {
            ItemKind::Instance(i) => Some(i),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Item {
    pub kind: ItemKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ItemKind {
    Net(NetDecl),
    /// Body-level `input`/`output` declaration of a non-ANSI port.
    PortDir(Vec<String>),
    Param(String),
    Assign { lhs: Expr, rhs: Expr },
    Always(Always),
    Instance(Instance),
    /// Recognized but unsupported construct (generate, function, initial...).
    Opaque { keyword: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    Wire,
    Reg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetDecl {
    pub kind: NetKind,
    pub signed: bool,
    pub range: Option<Range>,
    pub names: Vec<NetName>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetName {
    pub name: String,
    /// Unpacked dimensions (memories); unsupported at elaboration.
    pub dims: Vec<Range>,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Pos,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sensitivity {
    /// `@(*)`, `@*`, or a plain signal list.
    Comb,
    Edges(Vec<(Edge, String)>),
    /// Mixed or unparsable event expressions.
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Always {
    pub sens: Sensitivity,
    pub body: Stmt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamAssigns {
    Named(Vec<(String, Option<Expr>)>),
    Positional(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Connections {
    Named(Vec<(String, Option<Expr>)>),
    Positional(Vec<Option<Expr>>),
    /// `.*`
    Wildcard,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub params: ParamAssigns,
    pub conns: Connections,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Case,
    Casez,
    Casex,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseArm {
    pub labels: Vec<Expr>,
    pub body: Stmt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Block(Vec<Stmt>),
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    Case {
        kind: CaseKind,
        subject: Expr,
        arms: Vec<CaseArm>,
        default: Option<Box<Stmt>>,
    },
    Assign {
        blocking: bool,
        lhs: Expr,
        rhs: Expr,
    },
    Null,
    Opaque {
        keyword: String,
        span: Span,
    },
}

impl Stmt {
    /// Pre-order traversal over this statement and its children.
    pub fn visit_mut(&mut self, f: &mut impl FnMut(&mut Stmt)) {
        f(self);
        match self {
            Stmt::Block(v) => v.iter_mut().for_each(|s| s.visit_mut(f)),
            Stmt::If { then, els, .. } => {
                then.visit_mut(f);
                if let Some(e) = els {
                    e.visit_mut(f);
                }
            }
            Stmt::Case { arms, default, .. } => {
                arms.iter_mut().for_each(|a| a.body.visit_mut(f));
                if let Some(d) = default {
                    d.visit_mut(f);
                }
            }
            Stmt::Assign { .. } | Stmt::Null | Stmt::Opaque { .. } => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Plus,
    Neg,
    Not,
    LogNot,
    RedAnd,
    RedNand,
    RedOr,
    RedNor,
    RedXor,
    RedXnor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
    And,
    Or,
    Xor,
    Xnor,
    LogAnd,
    LogOr,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    Lt,
    Le,
    Gt,
    Ge,
    Shl,
    Shr,
    AShl,
    AShr,
}

/// A literal as written: `size'[s]base digits` or a plain decimal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Number {
    pub size: Option<u32>,
    pub signed: bool,
    pub base: u32,
    pub digits: String,
}

/// Bit-level value of a literal, LSB first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiteralBits {
    pub width: u32,
    pub signed: bool,
    pub bits: Vec<bool>,
    /// Positions holding `x`, `z` or `?`.
    pub unknown: Vec<bool>,
}

impl Number {
    pub fn parse(text: &str) -> Option<Number> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        match compact.find('\'') {
            None => {
                let digits: String = compact.chars().filter(|c| *c != '_').collect();
                if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
                    return None;
                }
                Some(Number {
                    size: None,
                    signed: true,
                    base: 10,
                    digits,
                })
            }
            Some(q) => {
                let size = if q == 0 {
                    None
                } else {
                    let s: String = compact[..q].chars().filter(|c| *c != '_').collect();
                    Some(s.parse::<u32>().ok().filter(|s| *s > 0)?)
                };
                let mut rest = compact[q + 1..].chars().peekable();
                let signed = matches!(rest.peek(), Some('s' | 'S'));
                if signed {
                    rest.next();
                }
                let base = match rest.next()?.to_ascii_lowercase() {
                    'b' => 2,
                    'o' => 8,
                    'd' => 10,
                    'h' => 16,
                    _ => return None,
                };
                let digits: String = rest.filter(|c| *c != '_').collect::<String>().to_ascii_lowercase();
                if digits.is_empty() {
                    return None;
                }
                Some(Number {
                    size,
                    signed,
                    base,
                    digits,
                })
            }
        }
    }

    /// Expands the literal to bits. Unsized literals are at least 32 bits.
    pub fn bits(&self) -> Option<LiteralBits> {
        let mut bits: Vec<bool> = Vec::new();
        let mut unknown: Vec<bool> = Vec::new();
        match self.base {
            10 => {
                if self.digits.chars().all(|c| matches!(c, 'x' | 'z' | '?')) && self.digits.len() == 1 {
                    let w = self.size.unwrap_or(32) as usize;
                    return Some(LiteralBits {
                        width: w as u32,
                        signed: self.signed,
                        bits: vec![false; w],
                        unknown: vec![true; w],
                    });
                }
                // Decimal digits into a little-endian bit vector.
                let mut limbs: Vec<u32> = vec![0];
                for c in self.digits.chars() {
                    let d = c.to_digit(10)?;
                    let mut carry = d as u64;
                    for limb in limbs.iter_mut() {
                        let v = *limb as u64 * 10 + carry;
                        *limb = v as u32;
                        carry = v >> 32;
                    }
                    if carry > 0 {
                        limbs.push(carry as u32);
                    }
                }
                for limb in &limbs {
                    for k in 0..32 {
                        bits.push(limb >> k & 1 == 1);
                    }
                }
                while bits.len() > 1 && !bits[bits.len() - 1] {
                    bits.pop();
                }
                unknown = vec![false; bits.len()];
            }
            base => {
                let per = match base {
                    2 => 1,
                    8 => 3,
                    _ => 4,
                };
                for c in self.digits.chars().rev() {
                    let (v, unk) = match c {
                        'x' | 'z' | '?' => (0, true),
                        c => (c.to_digit(base)?, false),
                    };
                    for k in 0..per {
                        bits.push(v >> k & 1 == 1);
                        unknown.push(unk);
                    }
                }
            }
        }
        let natural = bits.len() as u32;
        let width = match self.size {
            Some(s) => s,
            None => natural.max(32),
        };
        // Extension: x/z in the top digit extends with x/z, else zeros.
        let top_unknown = unknown.last().copied().unwrap_or(false);
        bits.resize(width as usize, false);
        unknown.resize(width as usize, top_unknown);
        Some(LiteralBits {
            width,
            signed: self.signed,
            bits,
            unknown,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Ident(String),
    Number(Number),
    Str(String),
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Slice {
        base: Box<Expr>,
        msb: Box<Expr>,
        lsb: Box<Expr>,
    },
    /// `base[start +: width]` (`up`) or `base[start -: width]`.
    IndexedSlice {
        base: Box<Expr>,
        start: Box<Expr>,
        width: Box<Expr>,
        up: bool,
    },
    Concat(Vec<Expr>),
    Repeat {
        count: Box<Expr>,
        items: Vec<Expr>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Ternary {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn ident(name: &str) -> Expr {
        Expr::Ident(name.to_string())
    }

    /// Identifiers read by this expression.
    pub fn idents<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Ident(n) => out.push(n),
            Expr::Number(_) | Expr::Str(_) => {}
            Expr::Index { base, index } => {
                base.idents(out);
                index.idents(out);
            }
            Expr::Slice { base, msb, lsb } => {
                base.idents(out);
                msb.idents(out);
                lsb.idents(out);
            }
            Expr::IndexedSlice { base, start, width, .. } => {
                base.idents(out);
                start.idents(out);
                width.idents(out);
            }
            Expr::Concat(items) => items.iter().for_each(|e| e.idents(out)),
            Expr::Repeat { count, items } => {
                count.idents(out);
                items.iter().for_each(|e| e.idents(out));
            }
            Expr::Unary { operand, .. } => operand.idents(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.idents(out);
                rhs.idents(out);
            }
            Expr::Ternary { cond, then, els } => {
                cond.idents(out);
                then.idents(out);
                els.idents(out);
            }
            Expr::Call { args, .. } => args.iter().for_each(|e| e.idents(out)),
        }
    }
}
