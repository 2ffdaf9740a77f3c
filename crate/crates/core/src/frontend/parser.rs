// SPDX-License-Identifier: Apache-2.0

//! Recursive-descent parser for the synthesizable Verilog subset.
//!
//! Constructs outside the subset but with recognizable extent (generate
//! blocks, functions, initial blocks, loops inside always blocks...) are kept
//! as opaque items so that parsing stays total; elaboration rejects them.

use std::collections::HashMap;

use thiserror::Error;

use super::ast::*;
use super::consteval::eval_const;
use super::lexer::{tokenize, TokKind, Token};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub message: String,
    pub offset: usize,
    pub line: usize,
    pub col: usize,
}

impl ParseError {
    fn at(src: &str, offset: usize, message: impl Into<String>) -> Self {
        let offset = offset.min(src.len());
        let before = &src[..offset];
        let line = before.matches('\n').count() + 1;
        let col = offset - before.rfind('\n').map_or(0, |p| p + 1) + 1;
        Self {
            message: message.into(),
            offset,
            line,
            col,
        }
    }
}

type PResult<T> = Result<T, ParseError>;

const OPAQUE_BLOCKS: &[(&str, &str)] = &[
    ("generate", "endgenerate"),
    ("function", "endfunction"),
    ("task", "endtask"),
    ("specify", "endspecify"),
    ("primitive", "endprimitive"),
];

const OPAQUE_DECLS: &[&str] = &[
    "genvar", "defparam", "real", "realtime", "time", "event", "supply0", "supply1", "tri", "tri0", "tri1", "triand",
    "trior", "trireg", "wand", "wor", "uwire",
];

const GATES: &[&str] = &[
    "and", "nand", "or", "nor", "xor", "xnor", "not", "buf", "bufif0", "bufif1", "notif0", "notif1", "pullup",
    "pulldown",
];

const RESERVED: &[&str] = &[
    "module", "endmodule", "input", "output", "inout", "wire", "reg", "assign", "always", "begin", "end", "if",
    "else", "case", "casez", "casex", "endcase", "default", "posedge", "negedge", "or", "parameter", "localparam",
    "initial", "integer", "generate", "endgenerate", "function", "endfunction", "for", "signed",
];

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token<'a>>,
    pos: usize,
}

pub fn parse(source: &str) -> PResult<SourceUnit> {
    let mut p = Parser {
        src: source,
        toks: tokenize(source),
        pos: 0,
    };
    let mut modules: Vec<ModuleDecl> = Vec::new();
    loop {
        let t = p.peek();
        match t.kind {
            TokKind::Eof => break,
            _ if t.is("module") || t.is("macromodule") => {
                let m = p.module()?;
                if modules.iter().any(|o| o.name == m.name) {
                    return Err(ParseError::at(source, m.span.start, format!("duplicate module `{}`", m.name)));
                }
                modules.push(m);
            }
            _ if t.is("endmodule") => return Err(p.err_here("`endmodule` without matching `module`")),
            _ => {
                p.bump();
            }
        }
    }
    let mut trailing = Vec::new();
    let mut cursor = 0;
    for m in &modules {
        let gap = source[cursor..m.span.start].trim();
        if !gap.is_empty() {
            trailing.push(gap);
        }
        cursor = m.span.end;
    }
    let gap = source[cursor..].trim();
    if !gap.is_empty() {
        trailing.push(gap);
    }
    Ok(SourceUnit {
        modules,
        trailing_text: trailing.join("\n"),
    })
}

/// Parses a standalone expression (tests and tools).
pub fn parse_expr_str(text: &str) -> PResult<Expr> {
    let mut p = Parser {
        src: text,
        toks: tokenize(text),
        pos: 0,
    };
    let e = p.expr()?;
    if p.peek().kind != TokKind::Eof {
        return Err(p.err_here("trailing input after expression"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Token<'a> {
        self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> Token<'a> {
        self.toks[(self.pos + k).min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token<'a> {
        let t = self.toks[self.pos];
        if t.kind != TokKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> ParseError {
        ParseError::at(self.src, self.peek().start, msg)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.peek().is(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<Token<'a>> {
        if self.peek().is(s) {
            Ok(self.bump())
        } else {
            let t = self.peek();
            let found = if t.kind == TokKind::Eof { "end of input" } else { t.text };
            Err(self.err_here(format!("expected `{s}`, found `{found}`")))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        let t = self.peek();
        if t.kind == TokKind::Ident && !RESERVED.contains(&t.text) {
            self.bump();
            Ok(t.text.trim_start_matches('\\').to_string())
        } else {
            Err(self.err_here(format!("expected identifier, found `{}`", t.text)))
        }
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].end
        }
    }

    // ---------------------------------------------------------------- module

    fn module(&mut self) -> PResult<ModuleDecl> {
        let start = self.bump().start;
        let name = self.ident()?;
        let mut params = Vec::new();
        let mut items = Vec::new();
        if self.eat("#") {
            self.expect("(")?;
            if !self.peek().is(")") {
                loop {
                    let decl_start = self.peek().start;
                    let local = self.peek().is("localparam");
                    self.eat("parameter");
                    self.eat("localparam");
                    let decls = self.param_body(local, decl_start, true)?;
                    for d in decls {
                        items.push(Item {
                            kind: ItemKind::Param(d.name.clone()),
                            span: d.span,
                        });
                        params.push(d);
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.expect(")")?;
        }
        let mut ports = Vec::new();
        let mut ansi = false;
        if self.eat("(") {
            if !self.peek().is(")") {
                if ["input", "output", "inout"].iter().any(|d| self.peek().is(d)) {
                    ansi = true;
                    ports = self.ansi_ports()?;
                } else {
                    loop {
                        let t = self.peek();
                        if t.is(".") {
                            return Err(self.err_here("explicit port expressions are not supported"));
                        }
                        let name = self.ident()?;
                        ports.push(PortDecl {
                            name,
                            direction: Direction::Inout,
                            width: 1,
                            signed: false,
                            range: None,
                            is_reg: false,
                        });
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
            }
            self.expect(")")?;
        }
        let header_end = self.expect(";")?.end;
        let mut directions_seen: HashMap<String, bool> = HashMap::new();
        loop {
            let t = self.peek();
            if t.kind == TokKind::Eof {
                return Err(ParseError::at(self.src, start, format!("module `{name}` has no `endmodule`")));
            }
            if t.is("endmodule") {
                break;
            }
            if t.is("module") {
                return Err(self.err_here(format!("`module` inside module `{name}` (missing `endmodule`?)")));
            }
            self.item(&mut items, &mut params, &mut ports, ansi, &mut directions_seen)?;
        }
        let end = self.bump().end;
        if !ansi {
            if let Some(p) = ports.iter().find(|p| !directions_seen.contains_key(&p.name)) {
                return Err(ParseError::at(
                    self.src,
                    start,
                    format!("port `{}` of `{name}` has no direction declaration", p.name),
                ));
            }
        }
        let mut module = ModuleDecl {
            name,
            ports,
            params,
            items,
            span: Span::new(start, end),
            header_end,
            ansi,
        };
        resolve_widths(&mut module).map_err(|msg| ParseError::at(self.src, start, msg))?;
        Ok(module)
    }

    fn ansi_ports(&mut self) -> PResult<Vec<PortDecl>> {
        let mut ports = Vec::new();
        let mut dir = Direction::In;
        let mut signed = false;
        let mut range: Option<Range> = None;
        let mut is_reg = false;
        loop {
            let t = self.peek();
            let mut fresh = false;
            if let Some(d) = direction_of(t.text).filter(|_| t.kind == TokKind::Ident) {
                self.bump();
                dir = d;
                fresh = true;
            }
            if fresh || ["wire", "reg", "logic", "signed", "["].iter().any(|k| self.peek().is(k)) {
                is_reg = false;
                signed = false;
                range = None;
                if self.eat("reg") || self.eat("logic") {
                    is_reg = true;
                } else {
                    self.eat("wire");
                }
                if self.eat("signed") {
                    signed = true;
                }
                self.eat("unsigned");
                if self.peek().is("[") {
                    range = Some(self.range()?);
                }
            }
            let name = self.ident()?;
            ports.push(PortDecl {
                name,
                direction: dir,
                width: 1,
                signed,
                range: range.clone(),
                is_reg,
            });
            if !self.eat(",") {
                break;
            }
        }
        Ok(ports)
    }

    fn range(&mut self) -> PResult<Range> {
        self.expect("[")?;
        let msb = self.expr()?;
        self.expect(":")?;
        let lsb = self.expr()?;
        self.expect("]")?;
        Ok(Range { msb, lsb })
    }

    /// `[signed] [integer] [range] NAME = expr {, NAME = expr}` after the
    /// parameter keyword. In a header list, stops before `, parameter`.
    fn param_body(&mut self, local: bool, decl_start: usize, in_header: bool) -> PResult<Vec<ParamDecl>> {
        let mut signed = self.eat("signed");
        let integer = self.eat("integer");
        if integer {
            signed = true;
        }
        let range = if self.peek().is("[") { Some(self.range()?) } else { None };
        let mut out = Vec::new();
        loop {
            let name_start = self.peek().start;
            let name = self.ident()?;
            self.expect("=")?;
            let value = self.expr()?;
            out.push(ParamDecl {
                name,
                local,
                signed,
                range: range.clone(),
                integer,
                value,
                default: None,
                span: Span::new(if out.is_empty() { decl_start } else { name_start }, self.prev_end()),
            });
            // `, NAME =` continues this declaration; `, parameter` starts a new one.
            if self.peek().is(",") && self.peek_at(1).kind == TokKind::Ident && self.peek_at(2).is("=") {
                self.bump();
                continue;
            }
            break;
        }
        if !in_header {
            let end = self.expect(";")?.end;
            for d in &mut out {
                d.span.end = end;
            }
        }
        Ok(out)
    }

    fn item(
        &mut self,
        items: &mut Vec<Item>,
        params: &mut Vec<ParamDecl>,
        ports: &mut Vec<PortDecl>,
        ansi: bool,
        directions_seen: &mut HashMap<String, bool>,
    ) -> PResult<()> {
        let t = self.peek();
        let start = t.start;
        let word = t.text;
        let push = |items: &mut Vec<Item>, kind, end| items.push(Item { kind, span: Span::new(start, end) });

        if t.is(";") {
            self.bump();
            return Ok(());
        }
        if t.kind != TokKind::Ident {
            return Err(self.err_here(format!("unexpected `{}` in module body", t.text)));
        }
        if let Some(dir) = direction_of(word) {
            self.bump();
            let mut is_reg = self.eat("reg") || self.eat("logic");
            if !is_reg {
                self.eat("wire");
            }
            let signed = self.eat("signed");
            let range = if self.peek().is("[") { Some(self.range()?) } else { None };
            let mut names = Vec::new();
            loop {
                let name = self.ident()?;
                let Some(port) = ports.iter_mut().find(|p| p.name == name) else {
                    return Err(self.err_here(format!("`{name}` is not in the port list")));
                };
                if ansi {
                    return Err(self.err_here(format!("port `{name}` redeclared in an ANSI module")));
                }
                port.direction = dir;
                port.signed |= signed;
                port.range = range.clone();
                is_reg |= port.is_reg;
                port.is_reg = is_reg;
                directions_seen.insert(name.clone(), true);
                names.push(name);
                if !self.eat(",") {
                    break;
                }
            }
            let end = self.expect(";")?.end;
            push(items, ItemKind::PortDir(names), end);
            return Ok(());
        }
        match word {
            "wire" | "reg" | "logic" | "integer" => {
                self.bump();
                let (kind, mut signed, mut range) = match word {
                    "integer" => (
                        NetKind::Reg,
                        true,
                        Some(Range {
                            msb: Expr::Number(Number::parse("31").expect("literal")),
                            lsb: Expr::Number(Number::parse("0").expect("literal")),
                        }),
                    ),
                    "wire" => (NetKind::Wire, false, None),
                    _ => (NetKind::Reg, false, None),
                };
                if self.peek().is("#") {
                    self.bump();
                    self.skip_delay_value();
                }
                if self.eat("signed") {
                    signed = true;
                }
                if self.peek().is("[") {
                    range = Some(self.range()?);
                }
                let mut names = Vec::new();
                loop {
                    let name = self.ident()?;
                    let mut dims = Vec::new();
                    while self.peek().is("[") {
                        dims.push(self.range()?);
                    }
                    let init = if self.eat("=") { Some(self.expr()?) } else { None };
                    if kind == NetKind::Reg {
                        if let Some(p) = ports.iter_mut().find(|p| p.name == name) {
                            p.is_reg = true;
                        }
                    }
                    names.push(NetName { name, dims, init });
                    if !self.eat(",") {
                        break;
                    }
                }
                let end = self.expect(";")?.end;
                push(
                    items,
                    ItemKind::Net(NetDecl {
                        kind,
                        signed,
                        range,
                        names,
                    }),
                    end,
                );
            }
            "parameter" | "localparam" => {
                self.bump();
                let decls = self.param_body(word == "localparam", start, false)?;
                for d in decls {
                    items.push(Item {
                        kind: ItemKind::Param(d.name.clone()),
                        span: d.span,
                    });
                    params.push(d);
                }
            }
            "assign" => {
                self.bump();
                if self.peek().is("#") {
                    self.bump();
                    self.skip_delay_value();
                }
                let mut pairs = Vec::new();
                loop {
                    let lhs = self.lvalue()?;
                    self.expect("=")?;
                    let rhs = self.expr()?;
                    pairs.push((lhs, rhs));
                    if !self.eat(",") {
                        break;
                    }
                }
                let end = self.expect(";")?.end;
                for (lhs, rhs) in pairs {
                    push(items, ItemKind::Assign { lhs, rhs }, end);
                }
            }
            "always" | "always_comb" | "always_ff" | "always_latch" => {
                self.bump();
                let sens = if word == "always_comb" {
                    Some(Sensitivity::Comb)
                } else if self.peek().is("@") {
                    Some(self.event_control()?)
                } else {
                    None
                };
                match sens {
                    Some(sens) if word != "always_latch" => {
                        let body = self.stmt()?;
                        push(items, ItemKind::Always(Always { sens, body }), self.prev_end());
                    }
                    _ => {
                        self.skip_stmt();
                        push(
                            items,
                            ItemKind::Opaque {
                                keyword: word.to_string(),
                            },
                            self.prev_end(),
                        );
                    }
                }
            }
            "initial" | "final" => {
                self.bump();
                self.skip_stmt();
                push(
                    items,
                    ItemKind::Opaque {
                        keyword: word.to_string(),
                    },
                    self.prev_end(),
                );
            }
            "for" | "if" | "case" | "begin" => {
                // Bare generate constructs.
                self.skip_stmt();
                push(
                    items,
                    ItemKind::Opaque {
                        keyword: "generate".to_string(),
                    },
                    self.prev_end(),
                );
            }
            w if OPAQUE_BLOCKS.iter().any(|(b, _)| *b == w) => {
                let close = OPAQUE_BLOCKS.iter().find(|(b, _)| *b == w).expect("checked").1;
                self.bump();
                let mut depth = 1;
                loop {
                    let t = self.bump();
                    if t.kind == TokKind::Eof {
                        return Err(ParseError::at(self.src, start, format!("`{w}` without `{close}`")));
                    }
                    if t.is(w) {
                        depth += 1;
                    } else if t.is(close) {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    } else if t.is("endmodule") {
                        return Err(ParseError::at(self.src, start, format!("`{w}` without `{close}`")));
                    }
                }
                push(
                    items,
                    ItemKind::Opaque {
                        keyword: w.to_string(),
                    },
                    self.prev_end(),
                );
            }
            w if OPAQUE_DECLS.contains(&w) || GATES.contains(&w) => {
                self.skip_to_semicolon();
                push(
                    items,
                    ItemKind::Opaque {
                        keyword: w.to_string(),
                    },
                    self.prev_end(),
                );
            }
            _ if RESERVED.contains(&word) => {
                return Err(self.err_here(format!("unexpected `{word}` in module body")));
            }
            _ => self.instances(items, start)?,
        }
        Ok(())
    }

    fn instances(&mut self, items: &mut Vec<Item>, start: usize) -> PResult<()> {
        let module = self.ident()?;
        let params = if self.eat("#") {
            if self.peek().is("(") {
                self.bump();
                let p = if self.peek().is(".") {
                    let mut named = Vec::new();
                    loop {
                        self.expect(".")?;
                        let n = self.ident()?;
                        self.expect("(")?;
                        let v = if self.peek().is(")") { None } else { Some(self.expr()?) };
                        self.expect(")")?;
                        named.push((n, v));
                        if !self.eat(",") {
                            break;
                        }
                    }
                    ParamAssigns::Named(named)
                } else if self.peek().is(")") {
                    ParamAssigns::Positional(Vec::new())
                } else {
                    let mut pos = vec![self.expr()?];
                    while self.eat(",") {
                        pos.push(self.expr()?);
                    }
                    ParamAssigns::Positional(pos)
                };
                self.expect(")")?;
                p
            } else {
                ParamAssigns::Positional(vec![self.primary()?])
            }
        } else {
            ParamAssigns::Positional(Vec::new())
        };
        let mut insts = Vec::new();
        loop {
            let name = self.ident()?;
            if self.peek().is("[") {
                return Err(self.err_here("instance arrays are not supported"));
            }
            self.expect("(")?;
            let conns = if self.peek().is(")") {
                Connections::Positional(Vec::new())
            } else if self.peek().is(".") && self.peek_at(1).is("*") {
                self.bump();
                self.bump();
                Connections::Wildcard
            } else if self.peek().is(".") {
                let mut named = Vec::new();
                loop {
                    self.expect(".")?;
                    let n = self.ident()?;
                    let v = if self.eat("(") {
                        let v = if self.peek().is(")") { None } else { Some(self.expr()?) };
                        self.expect(")")?;
                        v
                    } else {
                        // `.name` shorthand
                        Some(Expr::Ident(n.clone()))
                    };
                    named.push((n, v));
                    if !self.eat(",") {
                        break;
                    }
                }
                Connections::Named(named)
            } else {
                let mut pos = Vec::new();
                loop {
                    if self.peek().is(",") || self.peek().is(")") {
                        pos.push(None);
                    } else {
                        pos.push(Some(self.expr()?));
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
                Connections::Positional(pos)
            };
            self.expect(")")?;
            insts.push(Instance {
                module: module.clone(),
                name,
                params: params.clone(),
                conns,
            });
            if !self.eat(",") {
                break;
            }
        }
        let end = self.expect(";")?.end;
        for inst in insts {
            items.push(Item {
                kind: ItemKind::Instance(inst),
                span: Span::new(start, end),
            });
        }
        Ok(())
    }

    fn event_control(&mut self) -> PResult<Sensitivity> {
        self.expect("@")?;
        if self.eat("*") {
            return Ok(Sensitivity::Comb);
        }
        self.expect("(")?;
        if self.eat("*") {
            self.expect(")")?;
            return Ok(Sensitivity::Comb);
        }
        let mut edges = Vec::new();
        let mut levels = 0;
        let mut other = false;
        loop {
            let edge = if self.eat("posedge") {
                Some(Edge::Pos)
            } else if self.eat("negedge") {
                Some(Edge::Neg)
            } else {
                None
            };
            let e = self.expr()?;
            match (edge, e) {
                (Some(edge), Expr::Ident(n)) => edges.push((edge, n)),
                (Some(_), _) => other = true,
                (None, _) => levels += 1,
            }
            if !(self.eat("or") || self.eat(",")) {
                break;
            }
        }
        self.expect(")")?;
        Ok(match (edges.is_empty(), levels, other) {
            (_, _, true) => Sensitivity::Other,
            (true, _, _) => Sensitivity::Comb,
            (false, 0, _) => Sensitivity::Edges(edges),
            _ => Sensitivity::Other,
        })
    }

    // ------------------------------------------------------------ statements

    fn stmt(&mut self) -> PResult<Stmt> {
        let t = self.peek();
        let start = t.start;
        if t.is(";") {
            self.bump();
            return Ok(Stmt::Null);
        }
        if t.is("begin") {
            self.bump();
            if self.eat(":") {
                self.ident()?;
            }
            let mut stmts = Vec::new();
            while !self.peek().is("end") {
                if self.peek().kind == TokKind::Eof {
                    return Err(ParseError::at(self.src, start, "`begin` without `end`"));
                }
                if self.peek().is("endmodule") {
                    return Err(self.err_here("`endmodule` inside `begin` block"));
                }
                stmts.push(self.stmt()?);
            }
            self.bump();
            if self.peek().is(":") {
                self.bump();
                self.ident()?;
            }
            return Ok(Stmt::Block(stmts));
        }
        if t.is("if") {
            self.bump();
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let then = Box::new(self.stmt()?);
            let els = if self.eat("else") { Some(Box::new(self.stmt()?)) } else { None };
            return Ok(Stmt::If { cond, then, els });
        }
        if t.is("unique") || t.is("priority") {
            self.bump();
            return self.stmt();
        }
        if t.is("case") || t.is("casez") || t.is("casex") {
            let kind = match t.text {
                "case" => CaseKind::Case,
                "casez" => CaseKind::Casez,
                _ => CaseKind::Casex,
            };
            self.bump();
            self.expect("(")?;
            let subject = self.expr()?;
            self.expect(")")?;
            let mut arms = Vec::new();
            let mut default = None;
            while !self.peek().is("endcase") {
                if self.peek().kind == TokKind::Eof || self.peek().is("endmodule") {
                    return Err(ParseError::at(self.src, start, "`case` without `endcase`"));
                }
                if self.eat("default") {
                    self.eat(":");
                    default = Some(Box::new(self.stmt()?));
                    continue;
                }
                let mut labels = vec![self.expr()?];
                while self.eat(",") {
                    labels.push(self.expr()?);
                }
                self.expect(":")?;
                let body = self.stmt()?;
                arms.push(CaseArm { labels, body });
            }
            self.bump();
            return Ok(Stmt::Case {
                kind,
                subject,
                arms,
                default,
            });
        }
        let opaque = |p: &mut Self, kw: &str| {
            p.skip_stmt();
            Ok(Stmt::Opaque {
                keyword: kw.to_string(),
                span: Span::new(start, p.prev_end()),
            })
        };
        if t.kind == TokKind::SysIdent {
            return opaque(self, t.text);
        }
        if t.kind == TokKind::Op && (t.is("#") || t.is("@") || t.is("->")) {
            return opaque(self, t.text);
        }
        if t.kind == TokKind::Ident
            && [
                "for", "while", "repeat", "forever", "wait", "disable", "fork", "force", "release", "deassign",
            ]
            .contains(&t.text)
        {
            return opaque(self, t.text);
        }
        if t.kind == TokKind::Ident && (self.peek_at(1).is("(") || self.peek_at(1).is(";")) {
            return opaque(self, "task call");
        }
        if t.is("assign") {
            return opaque(self, "procedural assign");
        }
        let lhs = self.lvalue()?;
        let blocking = if self.eat("=") {
            true
        } else if self.eat("<=") {
            false
        } else {
            return Err(self.err_here(format!("expected `=` or `<=`, found `{}`", self.peek().text)));
        };
        if self.peek().is("#") || self.peek().is("@") {
            return Err(self.err_here("intra-assignment timing controls are not supported"));
        }
        let rhs = self.expr()?;
        self.expect(";")?;
        Ok(Stmt::Assign { blocking, lhs, rhs })
    }

    fn lvalue(&mut self) -> PResult<Expr> {
        if self.peek().is("{") {
            self.bump();
            let mut items = vec![self.lvalue()?];
            while self.eat(",") {
                items.push(self.lvalue()?);
            }
            self.expect("}")?;
            return Ok(Expr::Concat(items));
        }
        let name = self.ident()?;
        self.selects(Expr::Ident(name))
    }

    fn skip_balanced(&mut self, open: &str, close: &str) {
        if !self.eat(open) {
            return;
        }
        let mut depth = 1;
        while depth > 0 {
            let t = self.bump();
            if t.kind == TokKind::Eof {
                return;
            }
            if t.is(open) {
                depth += 1;
            } else if t.is(close) {
                depth -= 1;
            }
        }
    }

    fn skip_to_semicolon(&mut self) {
        let mut depth = 0i32;
        loop {
            let t = self.peek();
            if t.kind == TokKind::Eof || t.is("endmodule") {
                return;
            }
            self.bump();
            match t.text {
                "(" | "[" | "{" if t.kind == TokKind::Op => depth += 1,
                ")" | "]" | "}" if t.kind == TokKind::Op => depth -= 1,
                ";" if depth <= 0 => return,
                _ => {}
            }
        }
    }

    fn skip_delay_value(&mut self) {
        if self.peek().is("(") {
            self.skip_balanced("(", ")");
        } else {
            self.bump();
        }
    }

    /// Skips one statement by token structure, without interpreting it.
    fn skip_stmt(&mut self) {
        let t = self.peek();
        if t.kind == TokKind::Eof || t.is("endmodule") {
            return;
        }
        match t.text {
            "begin" if t.kind == TokKind::Ident => {
                self.bump();
                let mut depth = 1;
                while depth > 0 {
                    let t = self.peek();
                    if t.kind == TokKind::Eof || t.is("endmodule") {
                        return;
                    }
                    self.bump();
                    if t.is("begin") {
                        depth += 1;
                    } else if t.is("end") {
                        depth -= 1;
                    }
                }
                if self.peek().is(":") {
                    self.bump();
                    self.bump();
                }
            }
            "fork" => {
                self.bump();
                let mut depth = 1;
                while depth > 0 {
                    let t = self.bump();
                    if t.kind == TokKind::Eof {
                        return;
                    }
                    if t.is("fork") {
                        depth += 1;
                    } else if t.is("join") || t.is("join_any") || t.is("join_none") {
                        depth -= 1;
                    }
                }
            }
            "if" => {
                self.bump();
                self.skip_balanced("(", ")");
                self.skip_stmt();
                if self.eat("else") {
                    self.skip_stmt();
                }
            }
            "case" | "casez" | "casex" => {
                self.bump();
                let mut depth = 1;
                while depth > 0 {
                    let t = self.bump();
                    if t.kind == TokKind::Eof {
                        return;
                    }
                    if t.is("case") || t.is("casez") || t.is("casex") {
                        depth += 1;
                    } else if t.is("endcase") {
                        depth -= 1;
                    }
                }
            }
            "for" | "while" | "repeat" => {
                self.bump();
                self.skip_balanced("(", ")");
                self.skip_stmt();
            }
            "forever" => {
                self.bump();
                self.skip_stmt();
            }
            "@" => {
                self.bump();
                if self.peek().is("(") {
                    self.skip_balanced("(", ")");
                } else {
                    self.bump();
                }
                self.skip_stmt();
            }
            "#" => {
                self.bump();
                self.skip_delay_value();
                self.skip_stmt();
            }
            _ => self.skip_to_semicolon(),
        }
    }

    // ----------------------------------------------------------- expressions

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(1)?;
        if self.eat("?") {
            let then = self.expr()?;
            self.expect(":")?;
            let els = self.expr()?;
            return Ok(Expr::Ternary {
                cond: Box::new(cond),
                then: Box::new(then),
                els: Box::new(els),
            });
        }
        Ok(cond)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let t = self.peek();
            if t.kind != TokKind::Op {
                break;
            }
            let Some((op, prec)) = binary_op(t.text) else {
                break;
            };
            if prec < min_prec {
                break;
            }
            self.bump();
            // `**` is right-associative; everything else left.
            let next = if op == BinaryOp::Pow { prec } else { prec + 1 };
            let rhs = self.binary(next)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let t = self.peek();
        if t.kind == TokKind::Op {
            let op = match t.text {
                "+" => Some(UnaryOp::Plus),
                "-" => Some(UnaryOp::Neg),
                "~" => Some(UnaryOp::Not),
                "!" => Some(UnaryOp::LogNot),
                "&" => Some(UnaryOp::RedAnd),
                "~&" => Some(UnaryOp::RedNand),
                "|" => Some(UnaryOp::RedOr),
                "~|" => Some(UnaryOp::RedNor),
                "^" => Some(UnaryOp::RedXor),
                "~^" | "^~" => Some(UnaryOp::RedXnor),
                _ => None,
            };
            if let Some(op) = op {
                self.bump();
                let operand = self.unary()?;
                return Ok(Expr::Unary {
                    op,
                    operand: Box::new(operand),
                });
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek();
        match t.kind {
            TokKind::Number => {
                self.bump();
                let n = Number::parse(t.text)
                    .ok_or_else(|| ParseError::at(self.src, t.start, format!("malformed number `{}`", t.text)))?;
                Ok(Expr::Number(n))
            }
            TokKind::Str => {
                self.bump();
                Ok(Expr::Str(t.text.trim_matches('"').to_string()))
            }
            TokKind::SysIdent => {
                self.bump();
                let mut args = Vec::new();
                if self.eat("(") {
                    if !self.peek().is(")") {
                        args.push(self.expr()?);
                        while self.eat(",") {
                            args.push(self.expr()?);
                        }
                    }
                    self.expect(")")?;
                }
                Ok(Expr::Call {
                    name: t.text.to_string(),
                    args,
                })
            }
            TokKind::MacroUse => Err(self.err_here(format!("undefined macro `{}`", t.text))),
            TokKind::Ident => {
                let name = self.ident()?;
                if self.peek().is("(") {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.peek().is(")") {
                        args.push(self.expr()?);
                        while self.eat(",") {
                            args.push(self.expr()?);
                        }
                    }
                    self.expect(")")?;
                    return Ok(Expr::Call { name, args });
                }
                self.selects(Expr::Ident(name))
            }
            TokKind::Op if t.is("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            TokKind::Op if t.is("{") => {
                self.bump();
                let first = self.expr()?;
                if self.peek().is("{") {
                    self.bump();
                    let mut items = vec![self.expr()?];
                    while self.eat(",") {
                        items.push(self.expr()?);
                    }
                    self.expect("}")?;
                    self.expect("}")?;
                    let rep = Expr::Repeat {
                        count: Box::new(first),
                        items,
                    };
                    return self.selects(rep);
                }
                let mut items = vec![first];
                while self.eat(",") {
                    items.push(self.expr()?);
                }
                self.expect("}")?;
                Ok(Expr::Concat(items))
            }
            TokKind::Eof => Err(self.err_here("unexpected end of input in expression")),
            _ => Err(self.err_here(format!("unexpected `{}` in expression", t.text))),
        }
    }

    fn selects(&mut self, mut base: Expr) -> PResult<Expr> {
        while self.peek().is("[") {
            self.bump();
            let first = self.expr()?;
            if self.eat(":") {
                let lsb = self.expr()?;
                self.expect("]")?;
                base = Expr::Slice {
                    base: Box::new(base),
                    msb: Box::new(first),
                    lsb: Box::new(lsb),
                };
            } else if self.peek().is("+:") || self.peek().is("-:") {
                let up = self.bump().text == "+:";
                let width = self.expr()?;
                self.expect("]")?;
                base = Expr::IndexedSlice {
                    base: Box::new(base),
                    start: Box::new(first),
                    width: Box::new(width),
                    up,
                };
            } else {
                self.expect("]")?;
                base = Expr::Index {
                    base: Box::new(base),
                    index: Box::new(first),
                };
            }
        }
        Ok(base)
    }
}

fn direction_of(word: &str) -> Option<Direction> {
    match word {
        "input" => Some(Direction::In),
        "output" => Some(Direction::Out),
        "inout" => Some(Direction::Inout),
        _ => None,
    }
}

fn binary_op(text: &str) -> Option<(BinaryOp, u8)> {
    use BinaryOp::*;
    Some(match text {
        "||" => (LogOr, 1),
        "&&" => (LogAnd, 2),
        "|" => (Or, 3),
        "^" => (Xor, 4),
        "~^" | "^~" => (Xnor, 4),
        "&" => (And, 5),
        "==" => (Eq, 6),
        "!=" => (Ne, 6),
        "===" => (CaseEq, 6),
        "!==" => (CaseNe, 6),
        "<" => (Lt, 7),
        "<=" => (Le, 7),
        ">" => (Gt, 7),
        ">=" => (Ge, 7),
        "<<" => (Shl, 8),
        ">>" => (Shr, 8),
        "<<<" => (AShl, 8),
        ">>>" => (AShr, 8),
        "+" => (Add, 9),
        "-" => (Sub, 9),
        "*" => (Mul, 10),
        "/" => (Div, 10),
        "%" => (Mod, 10),
        "**" => (Pow, 11),
        _ => return None,
    })
}

/// Folds parameter defaults in declaration order, then port widths.
fn resolve_widths(m: &mut ModuleDecl) -> Result<(), String> {
    let mut env: HashMap<String, i64> = HashMap::new();
    for p in &mut m.params {
        p.default = eval_const(&p.value, &env);
        if let Some(v) = p.default {
            env.insert(p.name.clone(), v);
        }
    }
    for port in &mut m.ports {
        port.width = match &port.range {
            None => 1,
            Some(r) => {
                let msb = eval_const(&r.msb, &env);
                let lsb = eval_const(&r.lsb, &env);
                match (msb, lsb) {
                    (Some(a), Some(b)) => u32::try_from((a - b).abs() + 1)
                        .map_err(|_| format!("port `{}` is too wide", port.name))?,
                    _ => return Err(format!("cannot evaluate the range of port `{}`", port.name)),
                }
            }
        };
    }
    Ok(())
}
