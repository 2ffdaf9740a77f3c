// SPDX-License-Identifier: Apache-2.0

//! Total tokenizer for preprocessed Verilog. Comments, attributes and
//! compiler directives are skipped; nothing here fails.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    /// `$display`, `$signed`, ...
    SysIdent,
    Number,
    Str,
    /// Unexpanded `` `NAME `` macro use.
    MacroUse,
    Op,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokKind,
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

impl<'a> Token<'a> {
    pub fn is(&self, s: &str) -> bool {
        matches!(self.kind, TokKind::Ident | TokKind::Op) && self.text == s
    }
}

const OPS: &[&str] = &[
    "<<<=", ">>>=", "===", "!==", "<<<", ">>>", "**", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "~&", "~|",
    "~^", "^~", "+:", "-:", "->", "::",
];

pub const DIRECTIVES_TO_SKIP: &[&str] = &[
    "timescale",
    "default_nettype",
    "resetall",
    "celldefine",
    "endcelldefine",
    "line",
    "pragma",
    "begin_keywords",
    "end_keywords",
    "unconnected_drive",
    "nounconnected_drive",
];

fn ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

pub fn tokenize(src: &str) -> Vec<Token<'_>> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let n = b.len();
    while i < n {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && i + 1 < n && b[i + 1] == b'/' {
            while i < n && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && i + 1 < n && b[i + 1] == b'*' {
            i += 2;
            while i < n && !(b[i] == b'*' && i + 1 < n && b[i + 1] == b'/') {
                i += 1;
            }
            i = (i + 2).min(n);
            continue;
        }
        // (* attribute *), but not @(*)
        if c == b'(' && i + 1 < n && b[i + 1] == b'*' {
            let mut j = i + 2;
            while j < n && (b[j] == b' ' || b[j] == b'\t') {
                j += 1;
            }
            if j < n && b[j] != b')' {
                i += 2;
                while i < n && !(b[i] == b'*' && i + 1 < n && b[i + 1] == b')') {
                    i += 1;
                }
                i = (i + 2).min(n);
                continue;
            }
        }
        let start = i;
        let kind;
        if c == b'`' {
            i += 1;
            while i < n && ident_char(b[i]) {
                i += 1;
            }
            let word = &src[start + 1..i];
            if DIRECTIVES_TO_SKIP.contains(&word) {
                while i < n && b[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            kind = TokKind::MacroUse;
        } else if ident_start(c) {
            while i < n && ident_char(b[i]) {
                i += 1;
            }
            kind = TokKind::Ident;
        } else if c == b'\\' {
            i += 1;
            while i < n && !b[i].is_ascii_whitespace() {
                i += 1;
            }
            kind = TokKind::Ident;
        } else if c == b'$' && i + 1 < n && ident_start(b[i + 1]) {
            i += 1;
            while i < n && ident_char(b[i]) {
                i += 1;
            }
            kind = TokKind::SysIdent;
        } else if c.is_ascii_digit() || (c == b'\'' && i + 1 < n && is_base_start(&b[i + 1..])) {
            i = lex_number(b, i);
            kind = TokKind::Number;
        } else if c == b'"' {
            i += 1;
            while i < n && b[i] != b'"' && b[i] != b'\n' {
                i += if b[i] == b'\\' { 2 } else { 1 };
            }
            i = (i + 1).min(n);
            kind = TokKind::Str;
        } else {
            let rest = &src[i..];
            let len = OPS.iter().find(|op| rest.starts_with(*op)).map_or_else(
                || rest.chars().next().map_or(1, char::len_utf8),
                |op| op.len(),
            );
            i += len;
            kind = TokKind::Op;
        }
        out.push(Token {
            kind,
            text: &src[start..i.min(n)],
            start,
            end: i.min(n),
        });
    }
    out.push(Token {
        kind: TokKind::Eof,
        text: "",
        start: n,
        end: n,
    });
    out
}

fn is_base_start(rest: &[u8]) -> bool {
    let mut j = 0;
    if j < rest.len() && (rest[j] == b's' || rest[j] == b'S') {
        j += 1;
    }
    j < rest.len() && matches!(rest[j], b'b' | b'B' | b'o' | b'O' | b'd' | b'D' | b'h' | b'H')
}

/// Lexes `123`, `8'hFF`, `4 'b 1010`, `'sd5`, `1_000`. Returns the end offset.
fn lex_number(b: &[u8], mut i: usize) -> usize {
    let n = b.len();
    while i < n && (b[i].is_ascii_digit() || b[i] == b'_') {
        i += 1;
    }
    // Optional base part, possibly separated by whitespace from the size.
    let mut j = i;
    while j < n && (b[j] == b' ' || b[j] == b'\t') {
        j += 1;
    }
    if j < n && b[j] == b'\'' && is_base_start(&b[j + 1..]) {
        j += 1;
        if b[j] == b's' || b[j] == b'S' {
            j += 1;
        }
        j += 1;
        while j < n && (b[j] == b' ' || b[j] == b'\t') {
            j += 1;
        }
        while j < n && (b[j].is_ascii_hexdigit() || matches!(b[j], b'_' | b'x' | b'X' | b'z' | b'Z' | b'?')) {
            j += 1;
        }
        return j;
    }
    // Real literals are lexed as one token so they fail cleanly later.
    if i < n && b[i] == b'.' && i + 1 < n && b[i + 1].is_ascii_digit() {
        i += 1;
        while i < n && (b[i].is_ascii_digit() || b[i] == b'_') {
            i += 1;
        }
    }
    i
}
