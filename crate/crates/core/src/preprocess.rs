// SPDX-License-Identifier: Apache-2.0

//! Include/macro/conditional expansion that merges a project's sources into
//! one self-contained design text.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::corpus::{ProjectRecord, ShuttleId};

pub const MAX_INCLUDE_DEPTH: usize = 16;
pub const MAX_MACRO_REWRITES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("{file}:{line}: cannot find include `{target}`")]
    MissingInclude { file: String, line: usize, target: String },
    #[error("{file}:{line}: includes nested deeper than {MAX_INCLUDE_DEPTH}")]
    IncludeDepth { file: String, line: usize },
    #[error("{file}:{line}: macro `{name}` exceeded {MAX_MACRO_REWRITES} rewrites")]
    MacroLimit { file: String, line: usize, name: String },
    #[error("{file}:{line}: {message}")]
    Directive { file: String, line: usize, message: String },
    #[error("{file}: unterminated conditional block")]
    UnterminatedConditional { file: String },
    #[error("cannot read {file}: {message}")]
    Io { file: String, message: String },
    #[error("project has no usable manifest")]
    NoManifest,
}

/// Where one merged line came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    pub merged_line: usize,
    pub file: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedDesign {
    pub project_id: String,
    pub shuttle: ShuttleId,
    pub source: String,
    pub origin_map: Vec<Origin>,
}

impl MergedDesign {
    /// Tab-separated `merged_line  file  source_line` rows.
    pub fn origin_tsv(&self) -> String {
        let mut out = String::new();
        for o in &self.origin_map {
            let _ = writeln!(out, "{}\t{}\t{}", o.merged_line, o.file, o.line);
        }
        out
    }

    /// Maps a 1-based merged line back to its source location.
    pub fn origin_of(&self, merged_line: usize) -> Option<&Origin> {
        self.origin_map.get(merged_line.checked_sub(1)?)
    }
}

#[derive(Debug, Clone)]
struct Macro {
    params: Option<Vec<(String, Option<String>)>>,
    body: String,
}

const PASSTHROUGH: &[&str] = &[
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

#[derive(Debug, Clone, Copy)]
struct Cond {
    /// Whether this branch emits text.
    active: bool,
    /// Whether any branch of this chain has been taken.
    taken: bool,
    parent_active: bool,
    seen_else: bool,
}

/// Output accumulator that records one origin per emitted line.
#[derive(Default)]
struct Sink {
    text: String,
    line: String,
    line_origin: Option<(String, usize)>,
    had_directive: bool,
    origins: Vec<Origin>,
}

impl Sink {
    fn push(&mut self, s: &str, file: &str, line: usize) {
        for c in s.chars() {
            if c == '\n' {
                self.end_line(file, line);
            } else {
                if self.line_origin.is_none() {
                    self.line_origin = Some((file.to_string(), line));
                }
                self.line.push(c);
            }
        }
    }

    fn end_line(&mut self, file: &str, line: usize) {
        let blank = self.line.trim().is_empty();
        if !(blank && self.had_directive) {
            let (f, l) = self.line_origin.take().unwrap_or_else(|| (file.to_string(), line));
            self.text.push_str(self.line.trim_end_matches(['\r']));
            self.text.push('\n');
            self.origins.push(Origin {
                merged_line: self.origins.len() + 1,
                file: f,
                line: l,
            });
        }
        self.line.clear();
        self.line_origin = None;
        self.had_directive = false;
    }

    fn finish(mut self, file: &str, line: usize) -> (String, Vec<Origin>) {
        if !self.line.is_empty() {
            self.end_line(file, line);
        }
        (self.text, self.origins)
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_' || c == b'$'
}

/// Preprocessor state shared across all files of one project.
pub struct Preprocessor {
    macros: HashMap<String, Macro>,
    src_dir: PathBuf,
    display_root: PathBuf,
}

struct FileCtx<'a> {
    name: String,
    dir: PathBuf,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> FileCtx<'a> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn rest_starts_with(&self, s: &str) -> bool {
        self.bytes[self.pos..].starts_with(s.as_bytes())
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned()
    }

    fn skip_spaces(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t')) {
            self.pos += 1;
        }
    }

    /// Rest of the directive line, honoring backslash continuations. Stops
    /// before the newline; `//` comments are dropped.
    fn directive_tail(&mut self) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek() {
            if c == b'\\' && matches!(self.bytes.get(self.pos + 1), Some(b'\n')) {
                out.push(' ');
                self.pos += 2;
                self.line += 1;
                continue;
            }
            if c == b'\\' && self.bytes[self.pos + 1..].starts_with(b"\r\n") {
                out.push(' ');
                self.pos += 3;
                self.line += 1;
                continue;
            }
            if c == b'\n' {
                break;
            }
            if c == b'/' && self.bytes.get(self.pos + 1) == Some(&b'/') {
                while self.peek().is_some_and(|c| c != b'\n') {
                    self.pos += 1;
                }
                break;
            }
            out.push(c as char);
            self.pos += 1;
        }
        out.trim_end().to_string()
    }
}

impl Preprocessor {
    pub fn new(src_dir: impl Into<PathBuf>, display_root: impl Into<PathBuf>) -> Self {
        Self {
            macros: HashMap::new(),
            src_dir: src_dir.into(),
            display_root: display_root.into(),
        }
    }

    fn display(&self, path: &Path) -> String {
        path.strip_prefix(&self.display_root)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    pub fn is_defined(&self, name: &str) -> bool {
        self.macros.contains_key(name)
    }

    fn read(&self, path: &Path) -> Result<String, PreprocessError> {
        fs::read(path)
            .map(|b| String::from_utf8_lossy(&b).into_owned())
            .map_err(|e| PreprocessError::Io {
                file: self.display(path),
                message: e.to_string(),
            })
    }

    /// Expands one file from disk into `sink`.
    fn run_file(&mut self, path: &Path, depth: usize, sink: &mut Sink) -> Result<(), PreprocessError> {
        let text = self.read(path)?;
        let name = self.display(path);
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        self.run_text(&text, name, dir, depth, sink)
    }

    /// Expands an in-memory text (already-merged designs, tests).
    pub fn expand_str(&mut self, text: &str, name: &str) -> Result<(String, Vec<Origin>), PreprocessError> {
        let mut sink = Sink::default();
        self.run_text(text, name.to_string(), self.src_dir.clone(), 0, &mut sink)?;
        Ok(sink.finish(name, text.lines().count()))
    }

    fn run_text(
        &mut self,
        text: &str,
        name: String,
        dir: PathBuf,
        depth: usize,
        sink: &mut Sink,
    ) -> Result<(), PreprocessError> {
        let mut cx = FileCtx {
            name,
            dir,
            bytes: text.as_bytes(),
            pos: 0,
            line: 1,
        };
        let mut conds: Vec<Cond> = Vec::new();
        let active = |conds: &[Cond]| conds.last().map_or(true, |c| c.active);

        while let Some(c) = cx.peek() {
            let on = active(&conds);
            match c {
                b'\n' => {
                    cx.pos += 1;
                    if on || sink.had_directive || !sink.line.is_empty() {
                        sink.end_line(&cx.name, cx.line);
                    }
                    cx.line += 1;
                }
                b'/' if cx.rest_starts_with("//") => {
                    let start = cx.pos;
                    while cx.peek().is_some_and(|c| c != b'\n') {
                        cx.pos += 1;
                    }
                    if on {
                        sink.push(&text[start..cx.pos], &cx.name, cx.line);
                    }
                }
                b'/' if cx.rest_starts_with("/*") => {
                    let start = cx.pos;
                    let start_line = cx.line;
                    cx.pos += 2;
                    while cx.pos < cx.bytes.len() && !cx.rest_starts_with("*/") {
                        cx.pos += 1;
                    }
                    cx.pos = (cx.pos + 2).min(cx.bytes.len());
                    let body = &text[start..cx.pos];
                    if on {
                        // Keep per-line origins accurate across the comment.
                        let mut ln = start_line;
                        for (i, part) in body.split('\n').enumerate() {
                            if i > 0 {
                                sink.end_line(&cx.name, ln);
                                ln += 1;
                            }
                            sink.push(part, &cx.name, ln);
                        }
                    }
                    cx.line += body.matches('\n').count();
                }
                b'"' => {
                    let start = cx.pos;
                    cx.pos += 1;
                    while let Some(c) = cx.peek() {
                        cx.pos += 1;
                        if c == b'\\' {
                            cx.pos += 1;
                        } else if c == b'"' || c == b'\n' {
                            break;
                        }
                    }
                    let s = &text[start..cx.pos.min(text.len())];
                    cx.line += s.matches('\n').count();
                    if on {
                        sink.push(s, &cx.name, cx.line);
                    }
                }
                b'`' if cx.bytes.get(cx.pos + 1).is_some_and(|&c| is_ident_start(c)) => {
                    let dir_start = cx.pos;
                    let dir_line = cx.line;
                    cx.pos += 1;
                    let word = cx.ident();
                    self.directive(&word, dir_start, dir_line, &mut cx, &mut conds, depth, sink, text)?;
                }
                _ => {
                    // Copy a run of ordinary characters.
                    let start = cx.pos;
                    cx.pos += 1;
                    while let Some(c) = cx.peek() {
                        if matches!(c, b'\n' | b'/' | b'"' | b'`') {
                            break;
                        }
                        cx.pos += 1;
                    }
                    if on {
                        sink.push(&text[start..cx.pos], &cx.name, cx.line);
                    }
                }
            }
        }
        if !conds.is_empty() {
            return Err(PreprocessError::UnterminatedConditional { file: cx.name });
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn directive(
        &mut self,
        word: &str,
        dir_start: usize,
        dir_line: usize,
        cx: &mut FileCtx<'_>,
        conds: &mut Vec<Cond>,
        depth: usize,
        sink: &mut Sink,
        text: &str,
    ) -> Result<(), PreprocessError> {
        let on = conds.last().map_or(true, |c| c.active);
        let err = |cx: &FileCtx<'_>, message: &str| PreprocessError::Directive {
            file: cx.name.clone(),
            line: dir_line,
            message: message.to_string(),
        };
        match word {
            "ifdef" | "ifndef" | "elsif" => {
                cx.skip_spaces();
                let name = cx.ident();
                if name.is_empty() {
                    return Err(err(cx, &format!("`{word} without a macro name")));
                }
                let defined = self.macros.contains_key(&name);
                if word == "elsif" {
                    let Some(top) = conds.last_mut() else {
                        return Err(err(cx, "`elsif without `ifdef"));
                    };
                    if top.seen_else {
                        return Err(err(cx, "`elsif after `else"));
                    }
                    top.active = top.parent_active && !top.taken && defined;
                    top.taken |= top.active;
                } else {
                    let want = if word == "ifdef" { defined } else { !defined };
                    let active = on && want;
                    conds.push(Cond {
                        active,
                        taken: active,
                        parent_active: on,
                        seen_else: false,
                    });
                }
                sink.had_directive = true;
            }
            "else" => {
                let Some(top) = conds.last_mut() else {
                    return Err(err(cx, "`else without `ifdef"));
                };
                if top.seen_else {
                    return Err(err(cx, "duplicate `else"));
                }
                top.seen_else = true;
                top.active = top.parent_active && !top.taken;
                top.taken = true;
                sink.had_directive = true;
            }
            "endif" => {
                if conds.pop().is_none() {
                    return Err(err(cx, "`endif without `ifdef"));
                }
                sink.had_directive = true;
            }
            _ if !on => {
                // Inactive region: only conditionals matter; skip directive lines
                // so `define bodies cannot confuse the scanner.
                if matches!(word, "define" | "include" | "undef") {
                    cx.directive_tail();
                }
            }
            "define" => {
                cx.skip_spaces();
                let name = cx.ident();
                if name.is_empty() {
                    return Err(err(cx, "`define without a name"));
                }
                let params = if cx.peek() == Some(b'(') {
                    cx.pos += 1;
                    let start = cx.pos;
                    while cx.peek().is_some_and(|c| c != b')' && c != b'\n') {
                        cx.pos += 1;
                    }
                    if cx.peek() != Some(b')') {
                        return Err(err(cx, "unterminated macro parameter list"));
                    }
                    let list = &text[start..cx.pos];
                    cx.pos += 1;
                    let params = list
                        .split(',')
                        .filter(|p| !p.trim().is_empty())
                        .map(|p| match p.split_once('=') {
                            Some((n, d)) => (n.trim().to_string(), Some(d.trim().to_string())),
                            None => (p.trim().to_string(), None),
                        })
                        .collect();
                    Some(params)
                } else {
                    None
                };
                let body = cx.directive_tail().trim().to_string();
                self.macros.insert(name, Macro { params, body });
                sink.had_directive = true;
            }
            "undef" => {
                cx.skip_spaces();
                let name = cx.ident();
                self.macros.remove(&name);
                sink.had_directive = true;
            }
            "include" => {
                cx.skip_spaces();
                let tail = cx.directive_tail();
                let target = tail.trim().trim_matches(|c| c == '"' || c == '<' || c == '>').to_string();
                if target.is_empty() {
                    return Err(err(cx, "`include without a file name"));
                }
                if depth + 1 > MAX_INCLUDE_DEPTH {
                    return Err(PreprocessError::IncludeDepth {
                        file: cx.name.clone(),
                        line: dir_line,
                    });
                }
                let found = [cx.dir.join(&target), self.src_dir.join(&target)]
                    .into_iter()
                    .find(|p| p.is_file());
                let Some(path) = found else {
                    return Err(PreprocessError::MissingInclude {
                        file: cx.name.clone(),
                        line: dir_line,
                        target,
                    });
                };
                // The include replaces the directive; text before it on the
                // same line stays on its own line.
                if !sink.line.trim().is_empty() {
                    sink.end_line(&cx.name, dir_line);
                }
                sink.line.clear();
                sink.line_origin = None;
                self.run_file(&path, depth + 1, sink)?;
                if !sink.line.is_empty() {
                    sink.end_line(&cx.name, dir_line);
                }
                sink.had_directive = true;
            }
            w if PASSTHROUGH.contains(&w) => {
                let _ = cx.directive_tail();
                sink.push(&text[dir_start..cx.pos], &cx.name, dir_line);
            }
            _ => {
                let Some(m) = self.macros.get(word).cloned() else {
                    // Not ours: leave it for the consumer.
                    sink.push(&text[dir_start..cx.pos], &cx.name, dir_line);
                    return Ok(());
                };
                let mut budget = MAX_MACRO_REWRITES;
                let expansion = match &m.params {
                    None => m.body.clone(),
                    Some(params) => {
                        let args = read_macro_args(cx).ok_or_else(|| err(cx, &format!("bad arguments to `{word}")))?;
                        substitute(&m.body, params, &args)
                            .ok_or_else(|| err(cx, &format!("wrong number of arguments to `{word}")))?
                    }
                };
                budget -= 1;
                let expanded = self.rescan(&expansion, &mut budget).ok_or_else(|| PreprocessError::MacroLimit {
                    file: cx.name.clone(),
                    line: dir_line,
                    name: word.to_string(),
                })?;
                sink.push(&expanded, &cx.name, dir_line);
            }
        }
        Ok(())
    }

    /// Expands macro uses inside a macro expansion, sharing the rewrite budget.
    fn rescan(&self, text: &str, budget: &mut usize) -> Option<String> {
        let bytes = text.as_bytes();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c == b'"' {
                let start = i;
                i += 1;
                while i < bytes.len() && bytes[i] != b'"' {
                    i += if bytes[i] == b'\\' { 2 } else { 1 };
                }
                i = (i + 1).min(bytes.len());
                out.push_str(&text[start..i]);
                continue;
            }
            if c == b'`' && bytes.get(i + 1).is_some_and(|&c| is_ident_start(c)) {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && is_ident_char(bytes[j]) {
                    j += 1;
                }
                let name = &text[start..j];
                if let Some(m) = self.macros.get(name) {
                    if *budget == 0 {
                        return None;
                    }
                    *budget -= 1;
                    let (body, next) = match &m.params {
                        None => (m.body.clone(), j),
                        Some(params) => {
                            let mut cx = FileCtx {
                                name: String::new(),
                                dir: PathBuf::new(),
                                bytes,
                                pos: j,
                                line: 0,
                            };
                            let args = read_macro_args(&mut cx)?;
                            (substitute(&m.body, params, &args)?, cx.pos)
                        }
                    };
                    out.push_str(&self.rescan(&body, budget)?);
                    i = next;
                    continue;
                }
                out.push_str(&text[i..j]);
                i = j;
                continue;
            }
            let ch = text[i..].chars().next().expect("in bounds");
            out.push(ch);
            i += ch.len_utf8();
        }
        Some(out)
    }
}

/// Reads `( a, b, ... )` after a function-like macro name.
fn read_macro_args(cx: &mut FileCtx<'_>) -> Option<Vec<String>> {
    let save = cx.pos;
    while matches!(cx.peek(), Some(b' ' | b'\t')) {
        cx.pos += 1;
    }
    if cx.peek() != Some(b'(') {
        cx.pos = save;
        return None;
    }
    cx.pos += 1;
    let mut args = Vec::new();
    let mut cur = String::new();
    let mut depth = 0usize;
    loop {
        let c = cx.peek()?;
        cx.pos += 1;
        match c {
            b'(' | b'[' | b'{' => {
                depth += 1;
                cur.push(c as char);
            }
            b')' if depth == 0 => {
                args.push(cur.trim().to_string());
                return Some(args);
            }
            b')' | b']' | b'}' => {
                depth = depth.saturating_sub(1);
                cur.push(c as char);
            }
            b',' if depth == 0 => {
                args.push(cur.trim().to_string());
                cur.clear();
            }
            b'\n' => {
                cx.line += 1;
                cur.push(' ');
            }
            _ => cur.push(c as char),
        }
    }
}

fn substitute(body: &str, params: &[(String, Option<String>)], args: &[String]) -> Option<String> {
    let args: Vec<String> = if params.is_empty() && args.len() == 1 && args[0].is_empty() {
        Vec::new()
    } else {
        args.to_vec()
    };
    if args.len() > params.len() {
        return None;
    }
    let mut values = HashMap::new();
    for (i, (name, default)) in params.iter().enumerate() {
        let v = match args.get(i) {
            Some(a) if !a.is_empty() => a.clone(),
            _ => default.clone()?,
        };
        values.insert(name.as_str(), v);
    }
    let bytes = body.as_bytes();
    let mut out = String::with_capacity(body.len());
    let mut i = 0;
    while i < bytes.len() {
        if is_ident_start(bytes[i]) && (i == 0 || !(is_ident_char(bytes[i - 1]) || bytes[i - 1] == b'`')) {
            let start = i;
            while i < bytes.len() && is_ident_char(bytes[i]) {
                i += 1;
            }
            let word = &body[start..i];
            match values.get(word) {
                Some(v) => out.push_str(v),
                None => out.push_str(word),
            }
            continue;
        }
        let ch = body[i..].chars().next().expect("in bounds");
        out.push(ch);
        i += ch.len_utf8();
    }
    Some(out)
}

/// Merges all manifest-listed sources of an accepted project, in manifest
/// order, into one design with every project macro and include resolved.
pub fn preprocess_project(record: &ProjectRecord) -> Result<MergedDesign, PreprocessError> {
    if record.manifest().is_none() {
        return Err(PreprocessError::NoManifest);
    }
    let mut pp = Preprocessor::new(record.root.join("src"), record.root.clone());
    let mut sink = Sink::default();
    for file in &record.src_files {
        let path = record.root.join(file);
        pp.run_file(&path, 0, &mut sink)?;
        if !sink.line.is_empty() {
            sink.end_line(&pp.display(&path), 0);
        }
    }
    let (source, origin_map) = sink.finish("", 0);
    Ok(MergedDesign {
        project_id: record.project_id.clone(),
        shuttle: record.shuttle.clone(),
        source,
        origin_map,
    })
}

/// Runs the preprocessor over an in-memory text with no include search path
/// beyond `src_dir`.
pub fn preprocess_text(text: &str, src_dir: &Path) -> Result<(String, Vec<Origin>), PreprocessError> {
    Preprocessor::new(src_dir, src_dir).expand_str(text, "<text>")
}
