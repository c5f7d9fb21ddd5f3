//! Commit mining: first-parent history streaming, commit-level filters and
//! added-line computation.

mod diff;
mod git;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use diff::{added_lines, added_lines_in, inserted_mask, AddedLine};
pub use git::{BlobReader, GitRepo};

#[derive(Debug, thiserror::Error)]
pub enum MineError {
    #[error("repository at {path} is unreadable: {detail}")]
    RepoUnreadable { path: PathBuf, detail: String },
    #[error("branch {branch:?} not found in {path}")]
    BranchMissing { path: PathBuf, branch: String },
    #[error("malformed git log record: {0:?}")]
    Malformed(String),
    #[error("outlier filter needs at least one commit")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub repo_id: String,
    pub sha: String,
    pub author_name: String,
    pub author_email: String,
    /// Author time, UTC seconds.
    pub timestamp: i64,
    pub first_parent_sha: Option<String>,
    pub changed_java_files: Vec<String>,
    pub files_changed_count: usize,
    /// Lines added to `.java` files according to the diff stat.
    #[serde(default)]
    pub java_lines_added: u64,
}

impl CommitRecord {
    /// Checks the record-level invariants.
    pub fn validate(&self) -> Result<(), String> {
        if self.timestamp <= 0 {
            return Err(format!("{}: non-positive timestamp", self.sha));
        }
        if self.sha.len() != 40 || !self.sha.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("{}: sha is not 40 hex chars", self.sha));
        }
        if self.files_changed_count < self.changed_java_files.len() {
            return Err(format!("{}: fewer changed files than java files", self.sha));
        }
        Ok(())
    }
}

/// Rule for automated-account commits: the author name contains `[bot]` or
/// `github`, compared case-insensitively.
pub fn is_bot_author(name: &str) -> bool {
    let lower = name.to_lowercase();
    lower.contains("[bot]") || lower.contains("github")
}

pub fn filter_bots(commits: Vec<CommitRecord>) -> Vec<CommitRecord> {
    commits.into_iter().filter(|c| !is_bot_author(&c.author_name)).collect()
}

pub fn filter_non_java(commits: Vec<CommitRecord>) -> Vec<CommitRecord> {
    commits.into_iter().filter(|c| !c.changed_java_files.is_empty()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierThreshold {
    pub q3: f64,
    pub iqr: f64,
    pub cutoff: f64,
}

impl OutlierThreshold {
    pub fn from_counts(counts: &[usize]) -> Result<OutlierThreshold, MineError> {
        if counts.is_empty() {
            return Err(MineError::EmptyInput);
        }
        let mut sorted: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&sorted, 0.25);
        let q3 = quantile_sorted(&sorted, 0.75);
        let iqr = q3 - q1;
        Ok(OutlierThreshold { q3, iqr, cutoff: q3 + 1.5 * iqr })
    }

    pub fn is_outlier(&self, files_changed: usize) -> bool {
        files_changed as f64 > self.cutoff
    }

    /// Removes commits above the cutoff. Idempotent for a fixed threshold.
    pub fn apply(&self, commits: Vec<CommitRecord>) -> Vec<CommitRecord> {
        commits.into_iter().filter(|c| !self.is_outlier(c.files_changed_count)).collect()
    }
}

/// Linear interpolation between order statistics (Hyndman–Fan type 7).
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Single-pass `Q3 + 1.5·IQR` filter over `files_changed_count`.
pub fn filter_outliers(commits: Vec<CommitRecord>) -> Result<(Vec<CommitRecord>, OutlierThreshold), MineError> {
    let counts: Vec<usize> = commits.iter().map(|c| c.files_changed_count).collect();
    let threshold = OutlierThreshold::from_counts(&counts)?;
    Ok((threshold.apply(commits), threshold))
}

/// Stable order used whenever commits of several repositories are merged.
pub fn sort_commits(commits: &mut [CommitRecord]) {
    commits.sort_by(|a, b| (&a.repo_id, a.timestamp, &a.sha).cmp(&(&b.repo_id, b.timestamp, &b.sha)));
}
