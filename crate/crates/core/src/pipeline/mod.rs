//! Configured, resumable stage runner.
//!
//! Stages write under `<output_dir>/<stage>/` and finish by writing a
//! `stamp.json` that records the config hash, a hash of the stage inputs and
//! the hash of every file the stage produced. A stage whose stamp matches the
//! current inputs is skipped. A stage refuses to read a predecessor stamped
//! by a different configuration.

mod assemble;
mod config;
mod evaluate;
mod mine;
mod verify;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::io::{read_json, write_json, IoError};
use crate::seed::{bytes_hash, content_hash};

pub use assemble::{assemble, load_dataset, AssemblyIndex, DeveloperStatus, IndexEntry, ManifestFile, SkippedDataset};
pub use config::{Caps, CrystalBleuConfig, RepoSpec, RunConfig};
pub use evaluate::{compare, insight, load_scenarios, score, ComparisonFile, CoverageEntry, InsightSummary, ScoreReport};
pub use mine::{mine, Funnel, FunnelCounts};
pub use verify::{audit_anchored, audit_developer, verify, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("stage {stage} was produced by config {found}, current config is {expected}")]
    ConfigHashMismatch { stage: String, expected: String, found: String },
    #[error("stage {0} has not been run")]
    MissingStage(String),
    #[error(transparent)]
    Mine(#[from] crate::mining::MineError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Data(String),
}

impl PipelineError {
    /// Process exit code: 2 for configuration problems, 3 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::ConfigHashMismatch { .. } => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Mine,
    Assemble,
    Score,
    Compare,
    Insight,
    Verify,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Mine => "mine",
            Stage::Assemble => "assemble",
            Stage::Score => "score",
            Stage::Compare => "compare",
            Stage::Insight => "insight",
            Stage::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub stage: String,
    pub config_hash: String,
    pub input_hash: String,
    /// Path relative to the stage directory → content hash.
    pub files: BTreeMap<String, String>,
}

pub const STAMP_FILE: &str = "stamp.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageOutcome {
    Ran,
    UpToDate,
}

/// A loaded configuration plus its hash.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: RunConfig,
    pub config_hash: String,
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Context, PipelineError> {
        config.validate()?;
        let config_hash = config.config_hash()?;
        Ok(Context { config, config_hash })
    }

    pub fn load(path: &Path) -> Result<Context, PipelineError> {
        Context::new(RunConfig::load(path)?)
    }

    pub fn out(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.out().join(stage.as_str())
    }

    /// Reads the stamp of a finished predecessor stage, checking it belongs
    /// to this configuration.
    pub fn require(&self, dir: &Path, stage: Stage) -> Result<Stamp, PipelineError> {
        let path = dir.join(STAMP_FILE);
        if !path.exists() {
            return Err(PipelineError::MissingStage(stage.as_str().to_string()));
        }
        let stamp: Stamp = read_json(&path)?;
        if stamp.config_hash != self.config_hash {
            return Err(PipelineError::ConfigHashMismatch {
                stage: stage.as_str().to_string(),
                expected: self.config_hash.clone(),
                found: stamp.config_hash,
            });
        }
        Ok(stamp)
    }

    /// Runs `body` on the thread pool sized by `workers`.
    pub fn install<T: Send>(&self, body: impl FnOnce() -> T + Send) -> T {
        match self.config.workers {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool")
                .install(body),
            None => body(),
        }
    }
}

/// Stable digest of a stamp, used as the input hash of its successors.
pub fn stamp_digest(stamp: &Stamp) -> String {
    content_hash(&[&serde_json::to_string(stamp).expect("stamp serializes")])
}

fn walk(dir: &Path, base: &Path, out: &mut BTreeMap<String, String>) -> Result<(), PipelineError> {
    let io = |source| IoError::Fs { path: dir.to_path_buf(), source };
    let mut entries: Vec<PathBuf> = fs::read_dir(dir).map_err(io)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>().map_err(io)?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            walk(&path, base, out)?;
        } else {
            let rel = path.strip_prefix(base).expect("walk stays below base").to_string_lossy().replace('\\', "/");
            if rel != STAMP_FILE {
                let bytes = fs::read(&path).map_err(|source| IoError::Fs { path: path.clone(), source })?;
                out.insert(rel, bytes_hash(&bytes));
            }
        }
    }
    Ok(())
}

/// Hashes of every file under `dir` except its stamp.
pub fn hash_tree(dir: &Path) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut files = BTreeMap::new();
    if dir.exists() {
        walk(dir, dir, &mut files)?;
    }
    Ok(files)
}

/// Runs one stage into `dir` unless an identical stamp is already there and
/// the files it lists are intact.
pub fn run_stage(
    ctx: &Context,
    dir: &Path,
    stage: Stage,
    input_hash: &str,
    body: impl FnOnce(&Path) -> Result<(), PipelineError>,
) -> Result<StageOutcome, PipelineError> {
    let stamp_path = dir.join(STAMP_FILE);
    if stamp_path.exists() {
        if let Ok(old) = read_json::<Stamp>(&stamp_path) {
            if old.config_hash == ctx.config_hash && old.input_hash == input_hash && hash_tree(dir)? == old.files {
                return Ok(StageOutcome::UpToDate);
            }
        }
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|source| IoError::Fs { path: dir.to_path_buf(), source })?;
    }
    fs::create_dir_all(dir).map_err(|source| IoError::Fs { path: dir.to_path_buf(), source })?;
    body(dir)?;
    let stamp = Stamp {
        stage: stage.as_str().to_string(),
        config_hash: ctx.config_hash.clone(),
        input_hash: input_hash.to_string(),
        files: hash_tree(dir)?,
    };
    write_json(&stamp_path, &stamp)?;
    Ok(StageOutcome::Ran)
}

/// Replaces characters that are unsafe in file names.
pub fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub stages: Vec<(Stage, StageOutcome)>,
}

/// Mining through verification. Scoring and comparison need external
/// predictions and run separately.
pub fn run_all(ctx: &Context) -> Result<RunSummary, PipelineError> {
    let mut stages = Vec::new();
    for stage in [Stage::Mine, Stage::Assemble, Stage::Insight, Stage::Verify] {
        stages.push((stage, run_one(ctx, stage)?));
    }
    Ok(RunSummary { config_hash: ctx.config_hash.clone(), stages })
}

/// Runs a single stage that needs no extra arguments.
pub fn run_one(ctx: &Context, stage: Stage) -> Result<StageOutcome, PipelineError> {
    match stage {
        Stage::Mine => mine(ctx),
        Stage::Assemble => assemble(ctx),
        Stage::Insight => insight(ctx).map(|(o, _)| o),
        Stage::Verify => verify(ctx).map(|_| StageOutcome::Ran),
        Stage::Score | Stage::Compare => {
            Err(PipelineError::Config(format!("stage {} needs prediction inputs; use its own command", stage.as_str())))
        }
    }
}
