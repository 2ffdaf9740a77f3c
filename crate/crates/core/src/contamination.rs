// SPDX-License-Identifier: Apache-2.0

//! Min-K contamination metric over per-token log-probability dumps.
//!
//! A dump holds the log-probabilities a model assigned to each token of a
//! golden module (without any prompt context). Min-K averages the least
//! likely K% of them; higher values hint that the model has seen the text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ContaminationError {
    #[error("record `{0}` has no tokens")]
    EmptyRecord(String),
    #[error("record `{task_id}`: {tokens} tokens but {logprobs} log-probabilities")]
    LengthMismatch {
        task_id: String,
        tokens: usize,
        logprobs: usize,
    },
    #[error("record `{0}` has a non-finite or positive log-probability")]
    BadLogprob(String),
    #[error("K must lie in (0, 100], got {0}")]
    BadPercent(f64),
    #[error("K grid must be non-empty and strictly ascending")]
    BadGrid,
    #[error("no records to aggregate")]
    NoRecords,
}

/// One model's per-token log-probabilities over one golden module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogprobRecord {
    pub task_id: String,
    pub model_id: String,
    #[serde(default)]
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
}

impl LogprobRecord {
    pub fn validate(&self) -> Result<(), ContaminationError> {
        if self.logprobs.is_empty() {
            return Err(ContaminationError::EmptyRecord(self.task_id.clone()));
        }
        // Dumps without a token list are accepted; the count then comes from logprobs.
        if !self.tokens.is_empty() && self.tokens.len() != self.logprobs.len() {
            return Err(ContaminationError::LengthMismatch {
                task_id: self.task_id.clone(),
                tokens: self.tokens.len(),
                logprobs: self.logprobs.len(),
            });
        }
        if self.logprobs.iter().any(|lp| !lp.is_finite() || *lp > 0.0) {
            return Err(ContaminationError::BadLogprob(self.task_id.clone()));
        }
        Ok(())
    }
}

/// Mean of the lowest `ceil(k/100 * n)` log-probabilities.
pub fn min_k(rec: &LogprobRecord, k_percent: f64) -> Result<f64, ContaminationError> {
    rec.validate()?;
    min_k_of(&rec.logprobs, k_percent).ok_or(ContaminationError::BadPercent(k_percent))
}

fn min_k_of(logprobs: &[f64], k_percent: f64) -> Option<f64> {
    if !(k_percent > 0.0 && k_percent <= 100.0) || logprobs.is_empty() {
        return None;
    }
    let mut sorted = logprobs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let take = ((k_percent / 100.0) * n as f64).ceil() as usize;
    let take = take.clamp(1, n);
    Some(sorted[..take].iter().sum::<f64>() / take as f64)
}

/// Averaged `exp(min_k)` over a K grid, plus the grid-normalized area under it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinKCurve {
    pub k_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub auc: f64,
    pub samples: usize,
}

pub fn min_k_curve(records: &[LogprobRecord], k_grid: &[f64]) -> Result<MinKCurve, ContaminationError> {
    if records.is_empty() {
        return Err(ContaminationError::NoRecords);
    }
    validate_grid(k_grid)?;
    for rec in records {
        rec.validate()?;
    }
    let values: Vec<f64> = k_grid
        .iter()
        .map(|&k| {
            let total: f64 = records
                .iter()
                .map(|r| min_k_of(&r.logprobs, k).expect("validated").exp())
                .sum();
            total / records.len() as f64
        })
        .collect();
    Ok(MinKCurve {
        k_grid: k_grid.to_vec(),
        auc: normalized_auc(k_grid, &values),
        values,
        samples: records.len(),
    })
}

fn validate_grid(k_grid: &[f64]) -> Result<(), ContaminationError> {
    if k_grid.is_empty() || k_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ContaminationError::BadGrid);
    }
    if let Some(&k) = k_grid.iter().find(|k| !(**k > 0.0 && **k <= 100.0)) {
        return Err(ContaminationError::BadPercent(k));
    }
    Ok(())
}

/// Trapezoid area divided by the grid span. A one-point grid has no span;
/// its "area" is the single value.
pub fn normalized_auc(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.len() == 1 {
        return ys[0];
    }
    let area: f64 = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
        .sum();
    area / (xs[xs.len() - 1] - xs[0])
}

/// Whitespace word count, used when a dump carries no token list.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Keeps items whose token count is at most `max_tokens`.
pub fn filter_by_length<T, F>(items: Vec<T>, max_tokens: usize, token_count: F) -> Vec<T>
where
    F: Fn(&T) -> usize,
{
    items.into_iter().filter(|t| token_count(t) <= max_tokens).collect()
}

pub fn parse_k_grid(text: &str) -> Result<Vec<f64>, ContaminationError> {
    let grid = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| ContaminationError::BadGrid))
        .collect::<Result<Vec<_>, _>>()?;
    validate_grid(&grid)?;
    Ok(grid)
}

pub const DEFAULT_K_GRID: [f64; 5] = [10.0, 15.0, 20.0, 25.0, 30.0];
