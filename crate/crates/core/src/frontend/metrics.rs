// SPDX-License-Identifier: Apache-2.0

//! Size and complexity metrics over source text.

use std::path::{Path, PathBuf};

use super::lexer::{tokenize, TokKind};

pub const DEFAULT_COMPLEXITY_KEYWORDS: [&str; 5] = ["always", "assign", "generate", "wire", "reg"];

/// Lines that are neither blank nor entirely inside `//` or `/* */` comments.
pub fn loc_count(text: &str) -> usize {
    let mut in_block = false;
    let mut count = 0;
    for line in text.lines() {
        let b = line.as_bytes();
        let mut has_code = false;
        let mut in_str = false;
        let mut i = 0;
        while i < b.len() {
            if in_block {
                if b[i] == b'*' && b.get(i + 1) == Some(&b'/') {
                    in_block = false;
                    i += 2;
                } else {
                    i += 1;
                }
                continue;
            }
            if in_str {
                match b[i] {
                    b'\\' => i += 2,
                    b'"' => {
                        in_str = false;
                        i += 1;
                    }
                    _ => i += 1,
                }
                continue;
            }
            match b[i] {
                b'/' if b.get(i + 1) == Some(&b'/') => break,
                b'/' if b.get(i + 1) == Some(&b'*') => {
                    in_block = true;
                    i += 2;
                }
                c if c.is_ascii_whitespace() => i += 1,
                c => {
                    has_code = true;
                    in_str = c == b'"';
                    i += 1;
                }
            }
        }
        if has_code {
            count += 1;
        }
    }
    count
}

/// Standalone-token occurrences of `keywords` outside comments and strings.
pub fn complexity_score(text: &str, keywords: &[&str]) -> usize {
    tokenize(text)
        .iter()
        .filter(|t| t.kind == TokKind::Ident && keywords.contains(&t.text))
        .count()
}

pub fn default_complexity(text: &str) -> usize {
    complexity_score(text, &DEFAULT_COMPLEXITY_KEYWORDS)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertionCount {
    pub total: usize,
    /// Files that could not be read; each counts as 0.
    pub errors: Vec<(PathBuf, String)>,
}

/// Counts `assert` tokens across test files. Python files use Python
/// comment and string rules; everything else uses Verilog rules.
pub fn count_assertions<P: AsRef<Path>>(files: &[P]) -> AssertionCount {
    let mut out = AssertionCount {
        total: 0,
        errors: Vec::new(),
    };
    for f in files {
        let path = f.as_ref();
        match std::fs::read(path) {
            Ok(bytes) => {
                let text = String::from_utf8_lossy(&bytes);
                let python = path.extension().is_some_and(|e| e == "py");
                out.total += if python {
                    count_python_word(&text, "assert")
                } else {
                    complexity_score(&text, &["assert"])
                };
            }
            Err(e) => out.errors.push((path.to_path_buf(), e.to_string())),
        }
    }
    out
}

/// Occurrences of `word` as an identifier in Python source.
pub fn count_python_word(text: &str, word: &str) -> usize {
    let b = text.as_bytes();
    let n = b.len();
    let mut i = 0;
    let mut count = 0;
    while i < n {
        let c = b[i];
        if c == b'#' {
            while i < n && b[i] != b'\n' {
                i += 1;
            }
        } else if c == b'"' || c == b'\'' {
            let triple = i + 2 < n && b[i + 1] == c && b[i + 2] == c;
            if triple {
                i += 3;
                while i < n && !(b[i] == c && i + 2 < n && b[i + 1] == c && b[i + 2] == c) {
                    i += if b[i] == b'\\' { 2 } else { 1 };
                }
                i = (i + 3).min(n);
            } else {
                i += 1;
                while i < n && b[i] != c && b[i] != b'\n' {
                    i += if b[i] == b'\\' { 2 } else { 1 };
                }
                i = (i + 1).min(n);
            }
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < n && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            // String prefixes such as f"..." or rb'...' are skipped with the string.
            if i < n && (b[i] == b'"' || b[i] == b'\'') && i - start <= 2 {
                continue;
            }
            if &text[start..i] == word {
                count += 1;
            }
        } else {
            i += 1;
        }
    }
    count
}
