// SPDX-License-Identifier: Apache-2.0

//! End-to-end commands: `build`, `eval`, `stats` and `audit`.
//!
//! Every command reads a [`Config`] and writes its artifacts into an output
//! directory. Per-item failures (a project that does not preprocess, a task
//! that fails self-verification, a skipped log-probability record) are
//! logged and counted in [`Outcome::partial_failures`]; fatal errors are
//! returned as [`PipelineError`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::contamination::{self, LogprobRecord, DEFAULT_K_GRID};
use crate::corpus::{filter_project, scan_corpus, FilterVerdict, ProjectLine, ShuttleId};
use crate::dedup::{self, ComponentReport, DedupConfig, DedupItem};
use crate::equiv::{self, EquivConfig, EvalResult, EqvStatus, Stx};
use crate::frontend::{self, complexity_score, loc_count, DEFAULT_COMPLEXITY_KEYWORDS};
use crate::preprocess::preprocess_project;
use crate::taskgen::{self, Task};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("no samples")]
    NoSamples,
    #[error("{0}")]
    Stage(String),
}

type Result<T> = std::result::Result<T, PipelineError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuttleSource {
    pub name: String,
    pub ordinal: u32,
    pub root: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Release tag written into the manifest.
    pub version: String,
    pub seed: u64,
    pub threshold: f64,
    pub num_perms: usize,
    pub shingle_words: usize,
    pub k: u32,
    pub conflict_budget: u64,
    pub keywords: Vec<String>,
    pub k_grid: Vec<f64>,
    pub max_tokens: usize,
    pub shuttles: Vec<ShuttleSource>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            version: "dev".into(),
            seed: 0,
            threshold: dedup::DEFAULT_THRESHOLD,
            num_perms: dedup::DEFAULT_NUM_PERMS,
            shingle_words: dedup::DEFAULT_SHINGLE_WORDS,
            k: equiv::DEFAULT_K,
            conflict_budget: crate::sat::DEFAULT_CONFLICT_BUDGET,
            keywords: DEFAULT_COMPLEXITY_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            k_grid: DEFAULT_K_GRID.to_vec(),
            max_tokens: 2000,
            shuttles: Vec::new(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: Config = toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold must lie in (0, 1), got {}", self.threshold));
        }
        if self.num_perms < dedup::MIN_NUM_PERMS {
            return bad(format!("num_perms must be at least {}", dedup::MIN_NUM_PERMS));
        }
        if self.shingle_words == 0 || self.k == 0 {
            return bad("shingle_words and k must be positive".into());
        }
        if self.keywords.is_empty() {
            return bad("keyword set is empty".into());
        }
        let grid: Vec<String> = self.k_grid.iter().map(|k| k.to_string()).collect();
        contamination::parse_k_grid(&grid.join(",")).map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut names = BTreeSet::new();
        let mut ords = BTreeSet::new();
        for s in &self.shuttles {
            if !names.insert(&s.name) || !ords.insert(s.ordinal) {
                return bad(format!("shuttle `{}` (ordinal {}) is listed twice", s.name, s.ordinal));
            }
        }
        Ok(())
    }

    pub fn equiv(&self) -> EquivConfig {
        EquivConfig {
            k: self.k,
            conflict_budget: self.conflict_budget,
        }
    }

    pub fn dedup(&self) -> DedupConfig {
        DedupConfig {
            shingle_words: self.shingle_words,
            num_perms: self.num_perms,
            threshold: self.threshold,
            seed: self.seed,
        }
    }
}

/// Result of a command that completed, possibly with per-item failures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub partial_failures: usize,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.partial_failures > 0 {
            2
        } else {
            0
        }
    }
}

fn write_file(path: &Path, text: &str, out: &mut Outcome) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))?;
    out.written.push(path.to_path_buf());
    Ok(())
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(&it).expect("serializable"));
        s.push('\n');
    }
    s
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

// -------------------------------------------------------------------- build

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub scanned: usize,
    pub accepted: usize,
    pub merged: usize,
    pub parsed: usize,
    pub tasks: usize,
    pub after_design_dedup: usize,
    pub after_module_dedup: usize,
    pub verified: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub seed: u64,
    pub threshold: f64,
    pub num_perms: usize,
    pub shingle_words: usize,
    pub k: u32,
    pub conflict_budget: u64,
    pub keywords: Vec<String>,
    pub k_grid: Vec<f64>,
    pub prompt_template: String,
    pub shuttles: Vec<ShuttleId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseManifest {
    pub version: String,
    pub config: ConfigSnapshot,
    pub stages: StageCounts,
    pub per_shuttle: BTreeMap<String, usize>,
    pub task_ids: Vec<String>,
    /// sha256 of each emitted artifact, by file name.
    pub artifacts: BTreeMap<String, String>,
}

/// One line of `dedup_report.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DedupReportLine {
    /// `design` or `module`.
    pub level: String,
    #[serde(flatten)]
    pub component: ComponentReport,
}

/// One line of `self_verify.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyLine {
    pub task_id: String,
    pub passed: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    pub stages: StageCounts,
    pub manifest: ReleaseManifest,
    pub tasks: Vec<Task>,
    pub outcome: Outcome,
}

fn design_id(shuttle: &ShuttleId, project: &str) -> String {
    format!("{}/{}", shuttle.name, project)
}

/// corpus → preprocess → parse → taskgen → dedup → self-verify.
///
/// Writes `projects.jsonl`, `merged/`, `tasks.jsonl`, `dedup_report.jsonl`,
/// `self_verify.jsonl` and `release.json` into `out_dir`.
pub fn cmd_build(cfg: &Config, out_dir: &Path) -> Result<BuildReport> {
    cfg.validate()?;
    if cfg.shuttles.is_empty() {
        return Err(PipelineError::Config("no shuttles configured".into()));
    }
    let mut outcome = Outcome::default();
    let mut stages = StageCounts::default();
    let mut shuttles: Vec<&ShuttleSource> = cfg.shuttles.iter().collect();
    shuttles.sort_by_key(|s| s.ordinal);

    let mut records = Vec::new();
    for s in &shuttles {
        let id = ShuttleId::new(s.name.clone(), s.ordinal);
        records.extend(scan_corpus(&s.root, &id).map_err(|e| PipelineError::Stage(e.to_string()))?);
    }
    stages.scanned = records.len();
    let verdicts: Vec<FilterVerdict> = records.par_iter().map(filter_project).collect();
    let lines: Vec<ProjectLine> = records.iter().zip(&verdicts).map(|(r, v)| ProjectLine::new(r, *v)).collect();
    write_file(&out_dir.join("projects.jsonl"), &jsonl(&lines), &mut outcome)?;
    let accepted: Vec<_> = records
        .iter()
        .zip(&verdicts)
        .filter(|(_, v)| **v == FilterVerdict::Accept)
        .map(|(r, _)| r)
        .collect();
    stages.accepted = accepted.len();
    info!("corpus: {} scanned, {} accepted", stages.scanned, stages.accepted);

    let merged: Vec<_> = accepted.par_iter().map(|r| (r, preprocess_project(r))).collect();
    let mut designs = Vec::new();
    for (r, m) in merged {
        match m {
            Ok(m) => designs.push(m),
            Err(e) => {
                warn!("preprocess {}: {e}", design_id(&r.shuttle, &r.project_id));
                outcome.partial_failures += 1;
            }
        }
    }
    stages.merged = designs.len();
    for d in &designs {
        let base = out_dir.join("merged").join(&d.shuttle.name);
        write_file(&base.join(format!("{}.merged.v", d.project_id)), &d.source, &mut outcome)?;
        write_file(&base.join(format!("{}.origin.tsv", d.project_id)), &d.origin_tsv(), &mut outcome)?;
    }

    let parsed: Vec<_> = designs.par_iter().map(|d| (d, frontend::parse(&d.source))).collect();
    let mut tasks: Vec<Task> = Vec::new();
    let mut design_items = Vec::new();
    for (d, unit) in parsed {
        match unit {
            Ok(unit) => {
                stages.parsed += 1;
                tasks.extend(taskgen::build_tasks(d, &unit));
                design_items.push(DedupItem {
                    id: design_id(&d.shuttle, &d.project_id),
                    shuttle: d.shuttle.clone(),
                    group: None,
                    text: d.source.clone(),
                });
            }
            Err(e) => {
                warn!("parse {}: {e}", design_id(&d.shuttle, &d.project_id));
                outcome.partial_failures += 1;
            }
        }
    }
    stages.tasks = tasks.len();
    info!("{} merged, {} parsed, {} tasks", stages.merged, stages.parsed, stages.tasks);

    let dcfg = cfg.dedup();
    let by_design = dedup::deduplicate(&design_items, &dcfg).map_err(|e| PipelineError::Stage(e.to_string()))?;
    tasks.retain(|t| by_design.retained.contains(&design_id(&t.shuttle, &t.project_id)));
    stages.after_design_dedup = tasks.len();
    let module_items: Vec<DedupItem> = tasks
        .iter()
        .map(|t| DedupItem {
            id: t.task_id.clone(),
            shuttle: t.shuttle.clone(),
            group: Some(design_id(&t.shuttle, &t.project_id)),
            text: t.golden_source.clone(),
        })
        .collect();
    let by_module = dedup::deduplicate(&module_items, &dcfg).map_err(|e| PipelineError::Stage(e.to_string()))?;
    tasks.retain(|t| by_module.retained.contains(&t.task_id));
    stages.after_module_dedup = tasks.len();
    let report: Vec<DedupReportLine> = by_design
        .components
        .into_iter()
        .map(|c| DedupReportLine {
            level: "design".into(),
            component: c,
        })
        .chain(by_module.components.into_iter().map(|c| DedupReportLine {
            level: "module".into(),
            component: c,
        }))
        .collect();
    let report_text = jsonl(&report);
    write_file(&out_dir.join("dedup_report.jsonl"), &report_text, &mut outcome)?;
    info!(
        "dedup: {} after design level, {} after module level",
        stages.after_design_dedup, stages.after_module_dedup
    );

    let ecfg = cfg.equiv();
    let checks: Vec<VerifyLine> = tasks
        .par_iter()
        .map(|t| {
            let r = equiv::self_verify(t, &ecfg);
            VerifyLine {
                task_id: t.task_id.clone(),
                passed: r.is_ok(),
                reason: r.err(),
            }
        })
        .collect();
    write_file(&out_dir.join("self_verify.jsonl"), &jsonl(&checks), &mut outcome)?;
    let passed: BTreeSet<&str> = checks.iter().filter(|c| c.passed).map(|c| c.task_id.as_str()).collect();
    for c in checks.iter().filter(|c| !c.passed) {
        info!("self-verify dropped {}: {}", c.task_id, c.reason.as_deref().unwrap_or(""));
    }
    let tasks: Vec<Task> = tasks.into_iter().filter(|t| passed.contains(t.task_id.as_str())).collect();
    stages.verified = tasks.len();
    info!("self-verify: {} of {} tasks pass", stages.verified, stages.after_module_dedup);

    let tasks_text = jsonl(&tasks);
    write_file(&out_dir.join("tasks.jsonl"), &tasks_text, &mut outcome)?;
    let mut per_shuttle: BTreeMap<String, usize> = shuttles.iter().map(|s| (s.name.clone(), 0)).collect();
    for t in &tasks {
        *per_shuttle.entry(t.shuttle.name.clone()).or_default() += 1;
    }
    let manifest = ReleaseManifest {
        version: cfg.version.clone(),
        config: ConfigSnapshot {
            seed: cfg.seed,
            threshold: cfg.threshold,
            num_perms: cfg.num_perms,
            shingle_words: cfg.shingle_words,
            k: cfg.k,
            conflict_budget: cfg.conflict_budget,
            keywords: cfg.keywords.clone(),
            k_grid: cfg.k_grid.clone(),
            prompt_template: taskgen::PROMPT_TEMPLATE_VERSION.into(),
            shuttles: shuttles.iter().map(|s| ShuttleId::new(s.name.clone(), s.ordinal)).collect(),
        },
        stages: stages.clone(),
        per_shuttle,
        task_ids: tasks.iter().map(|t| t.task_id.clone()).collect(),
        artifacts: [
            ("tasks.jsonl".to_string(), sha256_hex(tasks_text.as_bytes())),
            ("dedup_report.jsonl".to_string(), sha256_hex(report_text.as_bytes())),
        ]
        .into_iter()
        .collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
    write_file(&out_dir.join("release.json"), &text, &mut outcome)?;
    Ok(BuildReport {
        stages,
        manifest,
        tasks,
        outcome,
    })
}

pub fn read_tasks(path: &Path) -> Result<Vec<Task>> {
    read_jsonl(path)
}

// --------------------------------------------------------------------- eval

pub fn candidate_file_name(task_id: &str) -> String {
    format!("{}.v", task_id.replace('/', "__"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub subset: String,
    pub samples: usize,
    pub stx: f64,
    pub eqv: f64,
    pub cov_mu: f64,
}

/// STX%, EQV% and mean coverage per shuttle, then overall.
pub fn summarize(tasks: &[Task], results: &[EvalResult]) -> Vec<ScoreRow> {
    let shuttle_of: HashMap<&str, &ShuttleId> = tasks.iter().map(|t| (t.task_id.as_str(), &t.shuttle)).collect();
    let mut groups: BTreeMap<(u32, String), Vec<&EvalResult>> = BTreeMap::new();
    for r in results {
        let key = shuttle_of
            .get(r.task_id.as_str())
            .map_or((u32::MAX, "?".to_string()), |s| (s.ordinal, s.name.clone()));
        groups.entry(key).or_default().push(r);
    }
    let row = |subset: String, rs: &[&EvalResult]| {
        let n = rs.len();
        let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
        ScoreRow {
            subset,
            samples: n,
            stx: pct(rs.iter().filter(|r| r.stx == Stx::Pass).count()),
            eqv: pct(rs.iter().filter(|r| r.eqv.is_equivalent()).count()),
            cov_mu: if n == 0 { 0.0 } else { rs.iter().map(|r| r.coverage).sum::<f64>() / n as f64 },
        }
    };
    let mut rows: Vec<ScoreRow> = groups.iter().map(|((_, name), rs)| row(name.clone(), rs)).collect();
    let all: Vec<&EvalResult> = results.iter().collect();
    rows.push(row("all".into(), &all));
    rows
}

pub fn score_table(rows: &[ScoreRow]) -> String {
    let mut s = format!("{:<12} {:>8} {:>8} {:>8} {:>8}\n", "subset", "samples", "STX", "EQV", "Cov_mu");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>8} {:>8.2} {:>8.2} {:>8.2}",
            r.subset, r.samples, r.stx, r.eqv, r.cov_mu
        );
    }
    s
}

pub struct EvalReport {
    pub results: Vec<EvalResult>,
    pub summary: Vec<ScoreRow>,
    pub outcome: Outcome,
}

/// Evaluates `<candidates>/<task_id with / → __>.v` for every task.
///
/// Writes `results.jsonl`, `summary.json` and `summary.txt`.
pub fn cmd_eval(cfg: &Config, tasks_path: &Path, candidates: &Path, out_dir: &Path) -> Result<EvalReport> {
    cfg.validate()?;
    let tasks = read_tasks(tasks_path)?;
    if !candidates.is_dir() {
        return Err(PipelineError::Io {
            path: candidates.to_path_buf(),
            source: io::Error::new(io::ErrorKind::NotFound, "candidate directory not found"),
        });
    }
    let ecfg = cfg.equiv();
    let results: Vec<EvalResult> = tasks
        .par_iter()
        .map(|t| {
            let path = candidates.join(candidate_file_name(&t.task_id));
            match fs::read(&path) {
                Ok(bytes) => match String::from_utf8(bytes) {
                    Ok(text) => equiv::evaluate_candidate(t, equiv::strip_fences(&text), &ecfg),
                    Err(_) => missing(t, "candidate is not valid UTF-8"),
                },
                Err(_) => missing(t, "no candidate file"),
            }
        })
        .collect();
    let summary = summarize(&tasks, &results);
    let mut outcome = Outcome::default();
    write_file(&out_dir.join("results.jsonl"), &jsonl(&results), &mut outcome)?;
    write_file(
        &out_dir.join("summary.json"),
        &(serde_json::to_string_pretty(&summary).expect("serializable") + "\n"),
        &mut outcome,
    )?;
    write_file(&out_dir.join("summary.txt"), &score_table(&summary), &mut outcome)?;
    Ok(EvalReport {
        results,
        summary,
        outcome,
    })
}

fn missing(t: &Task, reason: &str) -> EvalResult {
    EvalResult {
        task_id: t.task_id.clone(),
        stx: Stx::Fail { reason: reason.into() },
        eqv: EqvStatus::Error { reason: reason.into() },
        partitions: Vec::new(),
        coverage: 0.0,
        unweighted_coverage: 0.0,
        method: String::new(),
        runtime_ms: 0,
        stats: Default::default(),
    }
}

// -------------------------------------------------------------------- stats

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub subset: String,
    pub samples: usize,
    pub mean_loc: f64,
    pub mean_complexity: f64,
}

/// Sample count, mean LOC and mean keyword complexity of the golden modules.
pub fn task_stats(tasks: &[Task], keywords: &[String]) -> Result<Vec<StatsRow>> {
    if tasks.is_empty() {
        return Err(PipelineError::NoSamples);
    }
    let kw: Vec<&str> = keywords.iter().map(|s| s.as_str()).collect();
    let mut groups: BTreeMap<(u32, String), Vec<(usize, usize)>> = BTreeMap::new();
    for t in tasks {
        let m = (loc_count(&t.golden_source), complexity_score(&t.golden_source, &kw));
        groups.entry((t.shuttle.ordinal, t.shuttle.name.clone())).or_default().push(m);
    }
    let row = |subset: String, v: &[(usize, usize)]| StatsRow {
        subset,
        samples: v.len(),
        mean_loc: v.iter().map(|x| x.0 as f64).sum::<f64>() / v.len() as f64,
        mean_complexity: v.iter().map(|x| x.1 as f64).sum::<f64>() / v.len() as f64,
    };
    let mut rows: Vec<StatsRow> = groups.iter().map(|((_, n), v)| row(n.clone(), v)).collect();
    let all: Vec<(usize, usize)> = groups.into_values().flatten().collect();
    rows.push(row("all".into(), &all));
    Ok(rows)
}

pub fn stats_table(rows: &[StatsRow]) -> String {
    let mut s = format!("{:<12} {:>8} {:>8} {:>11}\n", "subset", "Samples", "LOCs", "Complexity");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<12} {:>8} {:>8.2} {:>11.2}",
            r.subset, r.samples, r.mean_loc, r.mean_complexity
        );
    }
    s
}

pub fn cmd_stats(cfg: &Config, tasks_path: &Path) -> Result<Vec<StatsRow>> {
    cfg.validate()?;
    task_stats(&read_tasks(tasks_path)?, &cfg.keywords)
}

// -------------------------------------------------------------------- audit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub model_id: String,
    pub subset: String,
    pub samples: usize,
    pub values: Vec<f64>,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub k_grid: Vec<f64>,
    pub max_tokens: usize,
    pub curves: Vec<CurveReport>,
    /// Records skipped: unknown task, invalid, or over the length limit.
    pub skipped_records: usize,
    pub tasks_without_dumps: usize,
}

/// Min-K curves per (model, shuttle subset) and over all tasks.
pub fn audit(tasks: &[Task], records: &[LogprobRecord], k_grid: &[f64], max_tokens: usize) -> Result<(ContaminationReport, usize)> {
    let by_id: HashMap<&str, &Task> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    let mut skipped = 0;
    let mut usable: Vec<&LogprobRecord> = Vec::new();
    for r in records {
        let Some(t) = by_id.get(r.task_id.as_str()) else {
            warn!("logprobs for unknown task `{}` skipped", r.task_id);
            skipped += 1;
            continue;
        };
        if let Err(e) = r.validate() {
            warn!("{e}");
            skipped += 1;
            continue;
        }
        let n = if r.tokens.is_empty() {
            contamination::word_count(&t.golden_source)
        } else {
            r.tokens.len()
        };
        if n > max_tokens {
            skipped += 1;
            continue;
        }
        usable.push(r);
    }
    let covered: BTreeSet<&str> = usable.iter().map(|r| r.task_id.as_str()).collect();
    let without = tasks.iter().filter(|t| !covered.contains(t.task_id.as_str())).count();
    if without > 0 {
        warn!("{without} tasks have no usable log-probability dump");
    }
    let mut groups: BTreeMap<(String, (u32, String)), Vec<LogprobRecord>> = BTreeMap::new();
    for r in &usable {
        let s = &by_id[r.task_id.as_str()].shuttle;
        groups
            .entry((r.model_id.clone(), (s.ordinal, s.name.clone())))
            .or_default()
            .push((*r).clone());
        groups
            .entry((r.model_id.clone(), (u32::MAX, "all".into())))
            .or_default()
            .push((*r).clone());
    }
    if groups.is_empty() {
        return Err(PipelineError::NoSamples);
    }
    let mut curves = Vec::new();
    for ((model, (_, subset)), recs) in groups {
        let c = contamination::min_k_curve(&recs, k_grid).map_err(|e| PipelineError::Stage(e.to_string()))?;
        curves.push(CurveReport {
            model_id: model,
            subset,
            samples: c.samples,
            values: c.values,
            auc: c.auc,
        });
    }
    Ok((
        ContaminationReport {
            k_grid: k_grid.to_vec(),
            max_tokens,
            curves,
            skipped_records: skipped,
            tasks_without_dumps: without,
        },
        skipped + without,
    ))
}

/// Writes `contamination_report.json`.
pub fn cmd_audit(cfg: &Config, tasks_path: &Path, logprobs: &Path, out_dir: &Path) -> Result<(ContaminationReport, Outcome)> {
    cfg.validate()?;
    let tasks = read_tasks(tasks_path)?;
    let records: Vec<LogprobRecord> = read_jsonl(logprobs)?;
    let (report, failures) = audit(&tasks, &records, &cfg.k_grid, cfg.max_tokens)?;
    let mut outcome = Outcome {
        partial_failures: failures,
        written: Vec::new(),
    };
    write_file(
        &out_dir.join("contamination_report.json"),
        &(serde_json::to_string_pretty(&report).expect("serializable") + "\n"),
        &mut outcome,
    )?;
    Ok((report, outcome))
}

pub fn audit_table(report: &ContaminationReport) -> String {
    let mut s = format!("{:<16} {:<10} {:>7}", "model", "subset", "samples");
    for k in &report.k_grid {
        let _ = write!(s, " {:>9}", format!("K={k}"));
    }
    s.push_str("       AUC\n");
    for c in &report.curves {
        let _ = write!(s, "{:<16} {:<10} {:>7}", c.model_id, c.subset, c.samples);
        for v in &c.values {
            let _ = write!(s, " {v:>9.5}");
        }
        let _ = writeln!(s, " {:>9.5}", c.auc);
    }
    s
}
