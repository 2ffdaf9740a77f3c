// SPDX-License-Identifier: Apache-2.0

//! Corpus discovery, `info.yaml` manifests and the structural project filter.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus root {path}: {source}")]
    Root { path: PathBuf, source: io::Error },
}

/// A fabrication shuttle. Lower ordinals are older.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShuttleId {
    pub ordinal: u32,
    pub name: String,
}

impl ShuttleId {
    pub fn new(name: impl Into<String>, ordinal: u32) -> Self {
        Self {
            ordinal,
            name: name.into(),
        }
    }
}

impl fmt::Display for ShuttleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectManifest {
    pub top_module: String,
    pub source_files: Vec<String>,
    /// Every other scalar key, flattened to a dotted path.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ManifestError {
    #[error("missing `top_module`")]
    MissingTop,
    #[error("`top_module` is not an identifier: {0:?}")]
    BadTop(String),
    #[error("missing or empty `source_files`")]
    MissingSources,
    #[error("line {0}: unsupported syntax")]
    Syntax(usize),
}

fn strip_comment(line: &str) -> &str {
    let mut in_single = false;
    let mut in_double = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' if !in_double => in_single = !in_single,
            '"' if !in_single => in_double = !in_double,
            '#' if !in_single && !in_double && (i == 0 || line[..i].ends_with(char::is_whitespace)) => {
                return &line[..i];
            }
            _ => {}
        }
    }
    line
}

fn unquote(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2 && ((s.starts_with('"') && s.ends_with('"')) || (s.starts_with('\'') && s.ends_with('\''))) {
        s[1..s.len() - 1].to_string()
    } else {
        s.to_string()
    }
}

fn split_inline_list(s: &str) -> Option<Vec<String>> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    Some(inner.split(',').map(unquote).collect())
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

#[derive(Debug, Clone)]
enum YamlValue {
    Scalar(String),
    List(Vec<String>),
}

/// Parses the flat YAML subset used by project manifests: nested mappings of
/// scalars, inline `[a, b]` lists and bulleted lists of scalars. Block scalars
/// (`|`, `>`) are folded into one line.
fn parse_flat_yaml(text: &str) -> Result<BTreeMap<String, YamlValue>, ManifestError> {
    let mut out: BTreeMap<String, YamlValue> = BTreeMap::new();
    let mut stack: Vec<(usize, String)> = Vec::new();
    let mut open_list: Option<(usize, String)> = None;
    let mut block: Option<(usize, String, Vec<String>)> = None;

    for (lineno, raw) in text.lines().enumerate() {
        let indent = raw.len() - raw.trim_start().len();
        if let Some((bind, key, lines)) = block.as_mut() {
            if raw.trim().is_empty() || indent > *bind {
                lines.push(raw.trim().to_string());
                continue;
            }
            let joined = lines.iter().filter(|l| !l.is_empty()).cloned().collect::<Vec<_>>().join(" ");
            out.insert(key.clone(), YamlValue::Scalar(joined));
            block = None;
        }
        let line = strip_comment(raw);
        if line.trim().is_empty() || line.trim() == "---" {
            continue;
        }
        let content = line.trim();
        if let Some(item) = content.strip_prefix("- ").or_else(|| (content == "-").then_some("")) {
            let Some((_, key)) = open_list.as_ref() else {
                return Err(ManifestError::Syntax(lineno + 1));
            };
            if let Some(YamlValue::List(items)) = out.get_mut(key) {
                items.push(unquote(item));
            }
            continue;
        }
        let Some(colon) = find_key_colon(content) else {
            return Err(ManifestError::Syntax(lineno + 1));
        };
        let key = unquote(&content[..colon]);
        let value = content[colon + 1..].trim();
        while stack.last().is_some_and(|(i, _)| *i >= indent) {
            stack.pop();
        }
        let path = stack
            .iter()
            .map(|(_, k)| k.as_str())
            .chain(std::iter::once(key.as_str()))
            .collect::<Vec<_>>()
            .join(".");
        open_list = None;
        if value.is_empty() {
            // Either a nested mapping or a bulleted list follows.
            stack.push((indent, key));
            out.insert(path.clone(), YamlValue::List(Vec::new()));
            open_list = Some((indent, path));
        } else if value == "|" || value == ">" || value.starts_with("|-") || value.starts_with(">-") {
            block = Some((indent, path, Vec::new()));
        } else if let Some(items) = split_inline_list(value) {
            out.insert(path, YamlValue::List(items));
        } else {
            out.insert(path, YamlValue::Scalar(unquote(value)));
        }
    }
    if let Some((_, key, lines)) = block {
        let joined = lines.iter().filter(|l| !l.is_empty()).cloned().collect::<Vec<_>>().join(" ");
        out.insert(key, YamlValue::Scalar(joined));
    }
    Ok(out)
}

fn find_key_colon(content: &str) -> Option<usize> {
    let mut in_quote: Option<char> = None;
    for (i, c) in content.char_indices() {
        match (in_quote, c) {
            (None, '"' | '\'') => in_quote = Some(c),
            (Some(q), c) if c == q => in_quote = None,
            (None, ':') if content[i + 1..].is_empty() || content[i + 1..].starts_with(char::is_whitespace) => {
                return Some(i)
            }
            _ => {}
        }
    }
    None
}

impl ProjectManifest {
    pub fn parse(text: &str) -> Result<Self, ManifestError> {
        let fields = parse_flat_yaml(text)?;
        let lookup = |name: &str| {
            fields
                .iter()
                .filter(|(k, _)| k.as_str() == name || k.ends_with(&format!(".{name}")))
                .min_by_key(|(k, _)| k.len())
                .map(|(k, v)| (k.clone(), v.clone()))
        };
        let (top_key, top) = match lookup("top_module") {
            Some((k, YamlValue::Scalar(s))) => (k, s),
            _ => return Err(ManifestError::MissingTop),
        };
        if !is_identifier(&top) {
            return Err(ManifestError::BadTop(top));
        }
        let (src_key, sources) = match lookup("source_files") {
            Some((k, YamlValue::List(items))) if !items.is_empty() => (k, items),
            Some((k, YamlValue::Scalar(s))) if !s.is_empty() => (k, vec![s]),
            _ => return Err(ManifestError::MissingSources),
        };
        let extra = fields
            .into_iter()
            .filter(|(k, _)| *k != top_key && *k != src_key)
            .filter_map(|(k, v)| match v {
                YamlValue::Scalar(s) => Some((k, s)),
                YamlValue::List(items) if !items.is_empty() => Some((k, items.join(", "))),
                YamlValue::List(_) => None,
            })
            .collect();
        Ok(Self {
            top_module: top,
            source_files: sources,
            extra,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    SrcDir,
    TestDir,
    Makefile,
    Manifest,
    UnresolvedSource,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::SrcDir => "src-dir",
            RejectReason::TestDir => "test-dir",
            RejectReason::Makefile => "makefile",
            RejectReason::Manifest => "manifest",
            RejectReason::UnresolvedSource => "unresolved-source",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterVerdict {
    Accept,
    Reject(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestStatus {
    Valid(ProjectManifest),
    Missing,
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectRecord {
    pub project_id: String,
    pub shuttle: ShuttleId,
    pub root: PathBuf,
    pub manifest: ManifestStatus,
    /// Paths relative to `root`: manifest sources under `src/`, or every
    /// RTL file in `src/` when there is no usable manifest.
    pub src_files: Vec<PathBuf>,
    pub test_files: Vec<PathBuf>,
    pub makefile_present: bool,
    /// Set when the project directory could not be listed.
    pub scan_error: Option<String>,
}

impl ProjectRecord {
    pub fn manifest(&self) -> Option<&ProjectManifest> {
        match &self.manifest {
            ManifestStatus::Valid(m) => Some(m),
            _ => None,
        }
    }

    pub fn manifest_missing(&self) -> bool {
        self.manifest == ManifestStatus::Missing
    }
}

const MANIFEST_NAME: &str = "info.yaml";

fn is_rtl(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("v" | "sv" | "vh" | "svh"))
}

fn is_testbench(name: &str) -> bool {
    name.starts_with("tb")
        || name.starts_with("test")
        || [".py", ".v", ".sv"].iter().any(|ext| name.ends_with(ext))
}

fn list_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            out.push(PathBuf::from(entry.file_name()));
        }
    }
    out.sort();
    Ok(out)
}

fn scan_project(dir: &Path, project_id: String, shuttle: &ShuttleId) -> ProjectRecord {
    let mut record = ProjectRecord {
        project_id,
        shuttle: shuttle.clone(),
        root: dir.to_path_buf(),
        manifest: ManifestStatus::Missing,
        src_files: Vec::new(),
        test_files: Vec::new(),
        makefile_present: false,
        scan_error: None,
    };
    if let Err(e) = fs::read_dir(dir) {
        record.scan_error = Some(e.to_string());
        return record;
    }
    let manifest_path = dir.join(MANIFEST_NAME);
    if manifest_path.is_file() {
        record.manifest = match fs::read_to_string(&manifest_path) {
            Ok(text) => match ProjectManifest::parse(&text) {
                Ok(m) => ManifestStatus::Valid(m),
                Err(e) => ManifestStatus::Invalid(e.to_string()),
            },
            Err(e) => ManifestStatus::Invalid(e.to_string()),
        };
    }
    record.src_files = match &record.manifest {
        ManifestStatus::Valid(m) => m.source_files.iter().map(|f| Path::new("src").join(f)).collect(),
        _ => list_files(&dir.join("src"))
            .unwrap_or_default()
            .into_iter()
            .filter(|p| is_rtl(p))
            .map(|p| Path::new("src").join(p))
            .collect(),
    };
    record.test_files = list_files(&dir.join("test"))
        .unwrap_or_default()
        .into_iter()
        .map(|p| Path::new("test").join(p))
        .collect();
    record.makefile_present = ["Makefile", "makefile"]
        .iter()
        .any(|m| dir.join("test").join(m).is_file() || dir.join(m).is_file());
    record
}

/// One record per immediate subdirectory of `root`, sorted by directory name.
pub fn scan_corpus(root: &Path, shuttle: &ShuttleId) -> Result<Vec<ProjectRecord>, CorpusError> {
    let err = |source| CorpusError::Root {
        path: root.to_path_buf(),
        source,
    };
    let mut dirs = Vec::new();
    for entry in fs::read_dir(root).map_err(err)? {
        let entry = entry.map_err(err)?;
        if entry.file_type().map_err(err)?.is_dir() {
            dirs.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    dirs.sort();
    Ok(dirs
        .into_iter()
        .map(|name| scan_project(&root.join(&name), name, shuttle))
        .collect())
}

/// Applies the five structural conditions in fixed order and reports the
/// first one that fails.
pub fn filter_project(record: &ProjectRecord) -> FilterVerdict {
    use RejectReason::*;
    let src = record.root.join("src");
    let has_rtl = record.scan_error.is_none()
        && list_files(&src).is_ok_and(|files| files.iter().any(|f| is_rtl(f)));
    if !has_rtl {
        return FilterVerdict::Reject(SrcDir);
    }
    let has_tb = record
        .test_files
        .iter()
        .filter_map(|p| p.file_name().and_then(|n| n.to_str()))
        .any(is_testbench);
    if !has_tb {
        return FilterVerdict::Reject(TestDir);
    }
    if !record.makefile_present {
        return FilterVerdict::Reject(Makefile);
    }
    if record.manifest().is_none() {
        return FilterVerdict::Reject(Manifest);
    }
    if record.src_files.is_empty() || !record.src_files.iter().all(|f| record.root.join(f).is_file()) {
        return FilterVerdict::Reject(UnresolvedSource);
    }
    FilterVerdict::Accept
}

/// One line of `projects.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectLine {
    pub project_id: String,
    pub shuttle: String,
    pub accepted: bool,
    pub reject_reason: Option<RejectReason>,
    pub src_files: Vec<String>,
    pub test_files: Vec<String>,
}

impl ProjectLine {
    pub fn new(record: &ProjectRecord, verdict: FilterVerdict) -> Self {
        let paths = |v: &[PathBuf]| v.iter().map(|p| p.to_string_lossy().replace('\\', "/")).collect();
        Self {
            project_id: record.project_id.clone(),
            shuttle: record.shuttle.name.clone(),
            accepted: verdict == FilterVerdict::Accept,
            reject_reason: match verdict {
                FilterVerdict::Accept => None,
                FilterVerdict::Reject(r) => Some(r),
            },
            src_files: paths(&record.src_files),
            test_files: paths(&record.test_files),
        }
    }
}
