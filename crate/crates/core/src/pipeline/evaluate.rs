use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assemble::{load_dataset, AssemblyIndex, INDEX_FILE};
use super::{file_safe, run_stage, stamp_digest, Context, PipelineError, Stage, StageOutcome};
use crate::assembly::{DatasetRole, Dataset};
use crate::forge::CompletionInstance;
use crate::insight::{
    breakeven_report, cost_curve, cost_curve_csv, coverage_report, default_scenarios, BreakevenReport, CoverageReport, InsightError,
    NamedScenario,
};
use crate::io::{read_json, read_jsonl, write_json, write_text, IoError};
use crate::metrics::{code_tokens, corpus_report, trivially_shared_ngrams, CorpusReport, PredictionRecord};
use crate::seed::{bytes_hash, content_hash};
use crate::stats::{compare_models, ModelComparison};

pub const REPORT_FILE: &str = "report.json";
pub const ROWS_FILE: &str = "rows.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub config_hash: String,
    /// Hashes of the prediction files, in argument order.
    pub prediction_hashes: Vec<String>,
    #[serde(flatten)]
    pub report: CorpusReport,
}

fn load_index(ctx: &Context) -> Result<(PathBuf, AssemblyIndex, String), PipelineError> {
    let dir = ctx.stage_dir(Stage::Assemble);
    let stamp = ctx.require(&dir, Stage::Assemble)?;
    let index: AssemblyIndex = read_json(&dir.join(INDEX_FILE))?;
    Ok((dir, index, stamp_digest(&stamp)))
}

/// Targets of every developer training split: the organization's own code
/// supplies the trivially shared n-grams.
fn trivial_corpus(dir: &Path, index: &AssemblyIndex) -> Result<Vec<Vec<String>>, PipelineError> {
    let mut corpus = Vec::new();
    for e in index.datasets.iter().filter(|e| e.role == DatasetRole::Developer) {
        let ds: Dataset = load_dataset(dir, e)?;
        corpus.extend(ds.train.iter().map(|i| code_tokens(&i.target)));
    }
    Ok(corpus)
}

/// Scores prediction files against the test split of `dataset_id`. Output
/// goes to `score/<dataset_id>/`.
pub fn score(ctx: &Context, dataset_id: &str, predictions: &[PathBuf]) -> Result<(StageOutcome, PathBuf), PipelineError> {
    let (assemble_dir, index, assemble_digest) = load_index(ctx)?;
    let entry = index
        .entry(dataset_id)
        .ok_or_else(|| PipelineError::Data(format!("unknown dataset {dataset_id}")))?
        .clone();
    let mut hashes = Vec::new();
    for p in predictions {
        let bytes = fs::read(p).map_err(|source| IoError::Fs { path: p.clone(), source })?;
        hashes.push(bytes_hash(&bytes));
    }
    let mut parts = vec![assemble_digest.as_str(), dataset_id];
    parts.extend(hashes.iter().map(String::as_str));
    let input = content_hash(&parts);
    let dir = ctx.stage_dir(Stage::Score).join(file_safe(dataset_id));
    let outcome = ctx.install(|| {
        run_stage(ctx, &dir, Stage::Score, &input, |dir| {
            let ds: Dataset = load_dataset(&assemble_dir, &entry)?;
            let mut records: Vec<PredictionRecord> = Vec::new();
            for p in predictions {
                records.extend(read_jsonl::<PredictionRecord>(p)?);
            }
            let declared: Vec<String> = records.iter().map(|r| r.model_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
            let cb = ctx.config.crystal_bleu;
            let trivial = trivially_shared_ngrams(&trivial_corpus(&assemble_dir, &index)?, cb.k, cb.max_order);
            let report = corpus_report(dataset_id, &ds.test, &records, &declared, &trivial, cb.k, cb.max_order)
                .map_err(|e| PipelineError::Data(e.to_string()))?;
            write_text(&dir.join(ROWS_FILE), &report.rows_csv())?;
            write_json(
                &dir.join(REPORT_FILE),
                &ScoreReport { config_hash: ctx.config_hash.clone(), prediction_hashes: hashes.clone(), report },
            )?;
            Ok(())
        })
    })?;
    Ok((outcome, dir.join(REPORT_FILE)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFile {
    pub config_hash: String,
    pub dataset_a: String,
    pub dataset_b: String,
    #[serde(flatten)]
    pub comparison: ModelComparison,
}

fn read_report(ctx: &Context, path: &Path) -> Result<ScoreReport, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingStage(format!("score ({})", path.display())));
    }
    let report: ScoreReport = read_json(path)?;
    if report.config_hash != ctx.config_hash {
        return Err(PipelineError::ConfigHashMismatch {
            stage: Stage::Score.as_str().to_string(),
            expected: ctx.config_hash.clone(),
            found: report.config_hash,
        });
    }
    Ok(report)
}

/// Paired comparison of `model_a` in one score report with `model_b` in
/// another (or the same). Written to `compare/<a>-vs-<b>.json`.
pub fn compare(
    ctx: &Context,
    report_a: &Path,
    model_a: &str,
    report_b: &Path,
    model_b: &str,
) -> Result<(ComparisonFile, PathBuf), PipelineError> {
    let (ra, rb) = (read_report(ctx, report_a)?, read_report(ctx, report_b)?);
    let rows = |r: &ScoreReport, m: &str| {
        r.report
            .rows
            .get(m)
            .cloned()
            .ok_or_else(|| PipelineError::Data(format!("model {m} not in report for {}", r.report.dataset_id)))
    };
    let comparison = compare_models(model_a, &rows(&ra, model_a)?, model_b, &rows(&rb, model_b)?)
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    let file = ComparisonFile {
        config_hash: ctx.config_hash.clone(),
        dataset_a: ra.report.dataset_id.clone(),
        dataset_b: rb.report.dataset_id.clone(),
        comparison,
    };
    let name = file_safe(&format!("{}.{model_a}-vs-{}.{model_b}", ra.report.dataset_id, rb.report.dataset_id));
    let path = ctx.stage_dir(Stage::Compare).join(format!("{name}.json"));
    write_json(&path, &file)?;
    Ok((file, path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageEntry {
    pub developer: String,
    pub role: DatasetRole,
    #[serde(flatten)]
    pub report: CoverageReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageFile {
    pub config_hash: String,
    #[serde(flatten)]
    pub entry: CoverageEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsightSummary {
    pub config_hash: String,
    pub coverage: Vec<CoverageEntry>,
    pub breakeven: Vec<BreakevenReport>,
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const COVERAGE_DIR: &str = "coverage";
pub const SCENARIOS_FILE: &str = "scenarios.json";
/// Points per emitted cost curve, beyond the origin.
pub const CURVE_STEPS: u64 = 100;

pub fn load_scenarios(path: Option<&Path>) -> Result<Vec<NamedScenario>, PipelineError> {
    match path {
        Some(p) => read_json(p).map_err(|e| PipelineError::Config(e.to_string())),
        None => Ok(default_scenarios()),
    }
}

fn coverage_for(
    dir: &Path,
    index: &AssemblyIndex,
    developer: &str,
    generic_train: &[CompletionInstance],
) -> Result<Vec<CoverageEntry>, PipelineError> {
    let dev_entry = index.anchored(DatasetRole::Developer, developer).expect("developer listed");
    let dev: Dataset = load_dataset(dir, dev_entry)?;
    let mut out = Vec::new();
    let mut push = |role: DatasetRole, train: &[CompletionInstance]| -> Result<(), PipelineError> {
        match coverage_report(&format!("{}-{developer}", role.as_str()), &dev.test, train) {
            Ok(report) => out.push(CoverageEntry { developer: developer.to_string(), role, report }),
            Err(InsightError::EmptyTrainSet | InsightError::EmptyTestSet) => {}
            Err(e) => return Err(PipelineError::Data(e.to_string())),
        }
        Ok(())
    };
    push(DatasetRole::Developer, &dev.train)?;
    for role in [DatasetRole::Organization, DatasetRole::OrgSubset, DatasetRole::BaselinePlus] {
        if let Some(e) = index.anchored(role, developer) {
            let ds: Dataset = load_dataset(dir, e)?;
            push(role, &ds.train)?;
        }
    }
    if !generic_train.is_empty() {
        push(DatasetRole::GenericFinetune, generic_train)?;
    }
    Ok(out)
}

/// Coverage of every developer test set by each training set built for
/// that developer, plus the breakeven analysis for each cost scenario.
pub fn insight(ctx: &Context) -> Result<(StageOutcome, InsightSummary), PipelineError> {
    let (assemble_dir, index, digest) = load_index(ctx)?;
    let dir = ctx.stage_dir(Stage::Insight);
    let outcome = ctx.install(|| {
        run_stage(ctx, &dir, Stage::Insight, &digest, |dir| {
            let generic_train: Vec<CompletionInstance> = match index.datasets.iter().find(|e| e.role == DatasetRole::GenericFinetune) {
                Some(e) => load_dataset::<CompletionInstance>(&assemble_dir, e)?.train,
                None => Vec::new(),
            };
            let developers: Vec<&str> = index
                .datasets
                .iter()
                .filter(|e| e.role == DatasetRole::Developer)
                .filter_map(|e| e.anchor_developer.as_deref())
                .collect();
            let per_dev: Vec<Vec<CoverageEntry>> = developers
                .par_iter()
                .map(|d| coverage_for(&assemble_dir, &index, d, &generic_train))
                .collect::<Result<_, _>>()?;
            let coverage: Vec<CoverageEntry> = per_dev.into_iter().flatten().collect();

            let scenarios = load_scenarios(ctx.config.cost_scenarios.as_deref())?;
            let breakeven: Vec<BreakevenReport> = scenarios
                .iter()
                .map(|s| breakeven_report(s).map_err(|e| PipelineError::Data(format!("scenario {}: {e}", s.name))))
                .collect::<Result<_, _>>()?;
            for (s, b) in scenarios.iter().zip(&breakeven) {
                let max = (2.0 * b.breakeven_inferences).ceil().max(1.0) as u64;
                let curve = cost_curve(&s.scenario, max, CURVE_STEPS);
                write_text(&dir.join(format!("cost-curve-{}.csv", file_safe(&s.name))), &cost_curve_csv(&curve))?;
            }
            for c in &coverage {
                let name = format!("{}.{}.json", file_safe(&c.developer), c.role.as_str());
                write_json(&dir.join(COVERAGE_DIR).join(name), &CoverageFile { config_hash: ctx.config_hash.clone(), entry: c.clone() })?;
            }
            write_json(&dir.join(SCENARIOS_FILE), &scenarios)?;
            write_json(&dir.join(SUMMARY_FILE), &InsightSummary { config_hash: ctx.config_hash.clone(), coverage, breakeven })?;
            Ok(())
        })
    })?;
    Ok((outcome, read_json(&dir.join(SUMMARY_FILE))?))
}
