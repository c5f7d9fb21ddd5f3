use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::assemble::{load_dataset, AssemblyIndex, IndexEntry, ManifestFile, INDEX_FILE, MANIFEST_FILE, SPLIT_FILES};
use super::{hash_tree, Context, PipelineError, Stage};
use crate::assembly::{dedup_key, Dataset, DatasetRole};
use crate::forge::{CompletionInstance, MAX_MASKED, MIN_MASKED, SENTINEL};
use crate::io::{read_json, write_json};
use crate::seed::bytes_hash;

pub const VERIFY_REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub datasets_checked: usize,
    pub instances_checked: usize,
    pub violations: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn ts_max(v: &[CompletionInstance]) -> Option<i64> {
    v.iter().map(|i| i.timestamp).max()
}

fn ts_min<'a>(v: impl IntoIterator<Item = &'a CompletionInstance>) -> Option<i64> {
    v.into_iter().map(|i| i.timestamp).min()
}

fn check_instance(id: &str, i: &CompletionInstance, out: &mut Vec<String>) {
    let cap = MAX_MASKED.min(i.segment_tokens.saturating_sub(1));
    if i.n < MIN_MASKED || i.n > cap {
        out.push(format!("{id}: instance {} masks {} of {} tokens", i.instance_id, i.n, i.segment_tokens));
    }
    if i.context.matches(SENTINEL).count() != 1 {
        out.push(format!("{id}: instance {} context does not hold exactly one sentinel", i.instance_id));
    }
}

fn overlap(train: &[CompletionInstance], holdout: &[CompletionInstance]) -> usize {
    let keys: HashSet<String> = holdout.iter().map(dedup_key).collect();
    train.iter().filter(|i| keys.contains(&dedup_key(i))).count()
}

/// Time-ordered developer split: no training instance is newer than any
/// val/test instance, none duplicates one, and the cutoff is the last
/// training timestamp.
pub fn audit_developer(ds: &Dataset) -> Vec<String> {
    let id = &ds.manifest.dataset_id;
    let mut out = Vec::new();
    let holdout: Vec<CompletionInstance> = ds.val.iter().chain(&ds.test).cloned().collect();
    if let (Some(max_train), Some(min_hold)) = (ts_max(&ds.train), ts_min(&holdout)) {
        if max_train > min_hold {
            out.push(format!("{id}: train reaches {max_train}, holdout starts at {min_hold}"));
        }
    }
    if ds.manifest.cutoff_ts != ts_max(&ds.train) {
        out.push(format!("{id}: cutoff {:?} is not the last training timestamp", ds.manifest.cutoff_ts));
    }
    let dup = overlap(&ds.train, &holdout);
    if dup > 0 {
        out.push(format!("{id}: {dup} training instances duplicate val/test instances"));
    }
    out
}

/// Leak audit for a dataset anchored on a developer: every training
/// instance is at or before the cutoff, the cutoff precedes the anchor's
/// first val/test instance, training shares nothing with the anchor's
/// val/test, and the test set is the anchor's.
pub fn audit_anchored(ds: &Dataset, anchor: &Dataset) -> Vec<String> {
    let id = &ds.manifest.dataset_id;
    let mut out = Vec::new();
    let Some(cutoff) = ds.manifest.cutoff_ts else {
        return vec![format!("{id}: anchored dataset without cutoff")];
    };
    if ds.manifest.anchor_developer != anchor.manifest.anchor_developer {
        out.push(format!("{id}: anchor mismatch"));
    }
    if let Some(max_train) = ts_max(&ds.train) {
        if max_train > cutoff {
            out.push(format!("{id}: train reaches {max_train} past cutoff {cutoff}"));
        }
    }
    if let Some(first) = ts_min(anchor.val.iter().chain(&anchor.test)) {
        if cutoff >= first {
            out.push(format!("{id}: cutoff {cutoff} not before anchor holdout start {first}"));
        }
    }
    let holdout: Vec<CompletionInstance> = anchor.val.iter().chain(&anchor.test).cloned().collect();
    let dup = overlap(&ds.train, &holdout);
    if dup > 0 {
        out.push(format!("{id}: {dup} training instances duplicate anchor val/test instances"));
    }
    let ids = |v: &[CompletionInstance]| v.iter().map(|i| i.instance_id.clone()).collect::<BTreeSet<_>>();
    if ids(&ds.test) != ids(&anchor.test) {
        out.push(format!("{id}: test set differs from the anchor's"));
    }
    out
}

fn check_files(assemble_dir: &Path, e: &IndexEntry, out: &mut Vec<String>) -> Result<(), PipelineError> {
    let dir = assemble_dir.join(&e.path);
    let manifest_bytes = fs::read(dir.join(MANIFEST_FILE)).map_err(|e| PipelineError::Data(e.to_string()))?;
    if bytes_hash(&manifest_bytes) != e.manifest_hash {
        out.push(format!("{}: manifest hash differs from index", e.dataset_id));
    }
    let file: ManifestFile = read_json(&dir.join(MANIFEST_FILE))?;
    for (name, expected) in SPLIT_FILES.iter().zip(&file.manifest.source_hashes) {
        let bytes = fs::read(dir.join(name)).map_err(|e| PipelineError::Data(e.to_string()))?;
        if &bytes_hash(&bytes) != expected {
            out.push(format!("{}: {name} does not match its manifest hash", e.dataset_id));
        }
    }
    Ok(())
}

/// Re-checks every assembled dataset: file hashes, manifest counts, instance
/// bounds, time-ordering and the temporal leak audit. The report is written
/// to `verify/report.json`; violations make the command fail.
pub fn verify(ctx: &Context) -> Result<VerifyReport, PipelineError> {
    let assemble_dir = ctx.stage_dir(Stage::Assemble);
    let stamp = ctx.require(&assemble_dir, Stage::Assemble)?;
    let index: AssemblyIndex = read_json(&assemble_dir.join(INDEX_FILE))?;
    let mut violations = Vec::new();
    if hash_tree(&assemble_dir)? != stamp.files {
        violations.push("assemble: files differ from the stage stamp".to_string());
    }
    if index.config_hash != ctx.config_hash {
        violations.push("assemble: index written by another configuration".to_string());
    }
    let org_repos: BTreeSet<&str> = ctx.config.repos.iter().map(|r| r.id.as_str()).collect();
    let mut instances_checked = 0;
    let mut developer_tests = Vec::new();
    let mut generic = None;
    for e in &index.datasets {
        check_files(&assemble_dir, e, &mut violations)?;
        if e.role == DatasetRole::Pretrain {
            continue;
        }
        let ds: Dataset = load_dataset(&assemble_dir, e)?;
        let counts = (ds.train.len(), ds.val.len(), ds.test.len());
        if counts != (e.counts.train, e.counts.val, e.counts.test) || ds.manifest.counts != e.counts {
            violations.push(format!("{}: counts do not match files", e.dataset_id));
        }
        for i in ds.train.iter().chain(&ds.val).chain(&ds.test) {
            check_instance(&e.dataset_id, i, &mut violations);
        }
        instances_checked += counts.0 + counts.1 + counts.2;
        match e.role {
            DatasetRole::Developer => {
                violations.extend(audit_developer(&ds));
                developer_tests.extend(ds.test.iter().cloned());
            }
            DatasetRole::Organization | DatasetRole::OrgSubset | DatasetRole::BaselinePlus => {
                let anchor_id = e.anchor_developer.as_deref().unwrap_or_default();
                match index.anchored(DatasetRole::Developer, anchor_id) {
                    Some(anchor_entry) => violations.extend(audit_anchored(&ds, &load_dataset(&assemble_dir, anchor_entry)?)),
                    None => violations.push(format!("{}: anchor {anchor_id} has no developer dataset", e.dataset_id)),
                }
                if e.role == DatasetRole::BaselinePlus {
                    if let Some(i) = ds.train.iter().chain(&ds.val).find(|i| org_repos.contains(i.repo_id.as_str())) {
                        violations.push(format!("{}: generic data from organization repository {}", e.dataset_id, i.repo_id));
                    }
                }
            }
            DatasetRole::GenericFinetune => generic = Some(ds),
            DatasetRole::Pretrain => {}
        }
    }
    if let Some(g) = generic {
        let pool: Vec<CompletionInstance> = g.train.iter().chain(&g.val).cloned().collect();
        if let Some(i) = pool.iter().find(|i| org_repos.contains(i.repo_id.as_str())) {
            violations.push(format!("generic-finetune: organization repository {}", i.repo_id));
        }
        let dup = overlap(&pool, &developer_tests);
        if dup > 0 {
            violations.push(format!("generic-finetune: {dup} instances duplicate developer test instances"));
        }
    }
    let report = VerifyReport {
        config_hash: ctx.config_hash.clone(),
        datasets_checked: index.datasets.len(),
        instances_checked,
        violations,
    };
    write_json(&ctx.stage_dir(Stage::Verify).join(VERIFY_REPORT_FILE), &report)?;
    if report.ok() {
        Ok(report)
    } else {
        Err(PipelineError::Data(format!("verification found {} violations", report.violations.len())))
    }
}
