use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_stage, Context, PipelineError, RepoSpec, Stage, StageOutcome};
use crate::forge::{forge_instances, CompletionInstance, GenericMethod, Provenance};
use crate::identity::{alias_index, resolve_identities_with, top_contributors, Alias, IdentityOverride, RawAuthor};
use crate::io::{read_jsonl, write_json, write_jsonl};
use crate::java::{apply_method_filters, extract_methods, is_parsable, map_added_lines, FilterReason, MethodUnit};
use crate::mining::{added_lines_in, filter_bots, filter_non_java, sort_commits, CommitRecord, GitRepo, OutlierThreshold};
use crate::seed::content_hash;

pub const COMMITS_FILE: &str = "commits.jsonl";
pub const IDENTITIES_FILE: &str = "identities.json";
pub const INSTANCES_FILE: &str = "instances.jsonl";
pub const GENERIC_METHODS_FILE: &str = "generic_methods.jsonl";
pub const FUNNEL_FILE: &str = "funnel.json";

/// Author id given to generic-pool methods, which are never attributed.
pub const GENERIC_AUTHOR: &str = "generic";

/// Attrition counts for one commit population.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub commits_mined: usize,
    pub after_bot_filter: usize,
    pub after_non_java_filter: usize,
    pub after_outlier_filter: usize,
    pub outlier_threshold: Option<OutlierThreshold>,
    pub java_files_read: usize,
    /// Files that were not valid UTF-8.
    pub files_undecodable: usize,
    /// Files whose brackets do not balance.
    pub files_unparsable: usize,
    pub methods_changed: usize,
    pub methods_by_reason: BTreeMap<FilterReason, usize>,
    pub methods_kept: usize,
    pub instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Funnel {
    pub config_hash: String,
    pub organization: String,
    pub organization_funnel: FunnelCounts,
    pub generic_funnel: BTreeMap<String, FunnelCounts>,
    pub authors_resolved: usize,
    pub authors_selected: usize,
    pub instances_by_author: BTreeMap<String, usize>,
    pub generic_methods: usize,
}

/// A method touched by a commit, with its added lines.
struct ChangedMethod {
    commit: usize,
    file: String,
    method: MethodUnit,
    lines: Vec<u32>,
}

#[derive(Default)]
struct Extraction {
    changed: Vec<ChangedMethod>,
    counts: FunnelCounts,
}

fn blob_text(reader: &mut crate::mining::BlobReader, rev: &str, path: &str, counts: &mut FunnelCounts) -> Result<Option<String>, PipelineError> {
    let bytes = reader
        .read(rev, path)
        .map_err(|e| PipelineError::Data(format!("reading {rev}:{path}: {e}")))?;
    match bytes.map(String::from_utf8) {
        None => Ok(None),
        Some(Ok(text)) => Ok(Some(text)),
        Some(Err(_)) => {
            counts.files_undecodable += 1;
            Ok(None)
        }
    }
}

/// Changed, filter-passing methods of the kept commits of one repository.
fn extract_repo(spec: &RepoSpec, commits: &[CommitRecord]) -> Result<Extraction, PipelineError> {
    let mut out = Extraction::default();
    if commits.is_empty() {
        return Ok(out);
    }
    let repo = GitRepo::open(&spec.path)?;
    let mut reader = repo.blobs()?;
    for (ci, commit) in commits.iter().enumerate() {
        for file in &commit.changed_java_files {
            out.counts.java_files_read += 1;
            let Some(child) = blob_text(&mut reader, &commit.sha, file, &mut out.counts)? else {
                continue;
            };
            let parent = match &commit.first_parent_sha {
                Some(p) => blob_text(&mut reader, p, file, &mut out.counts)?.unwrap_or_default(),
                None => String::new(),
            };
            let added = added_lines_in(&parent, &child, file);
            if added.is_empty() {
                continue;
            }
            if !is_parsable(&child) {
                out.counts.files_unparsable += 1;
                continue;
            }
            let methods = extract_methods(&child);
            for (method, lines) in map_added_lines(&methods, &added) {
                out.counts.methods_changed += 1;
                let verdict = apply_method_filters(method);
                *out.counts.methods_by_reason.entry(verdict.reason).or_default() += 1;
                if verdict.kept {
                    out.counts.methods_kept += 1;
                    out.changed.push(ChangedMethod { commit: ci, file: file.clone(), method: method.clone(), lines });
                }
            }
        }
    }
    Ok(out)
}

/// Bot, non-Java and outlier filters with a threshold computed over the
/// whole population before any filter runs.
fn commit_funnel(all: Vec<CommitRecord>) -> (Vec<CommitRecord>, FunnelCounts) {
    let mut counts = FunnelCounts { commits_mined: all.len(), ..Default::default() };
    let threshold = OutlierThreshold::from_counts(&all.iter().map(|c| c.files_changed_count).collect::<Vec<_>>()).ok();
    let kept = filter_bots(all);
    counts.after_bot_filter = kept.len();
    let kept = filter_non_java(kept);
    counts.after_non_java_filter = kept.len();
    let kept = match &threshold {
        Some(t) => t.apply(kept),
        None => kept,
    };
    counts.after_outlier_filter = kept.len();
    counts.outlier_threshold = threshold;
    (kept, counts)
}

fn merge_counts(into: &mut FunnelCounts, from: &FunnelCounts) {
    into.java_files_read += from.java_files_read;
    into.files_undecodable += from.files_undecodable;
    into.files_unparsable += from.files_unparsable;
    into.methods_changed += from.methods_changed;
    into.methods_kept += from.methods_kept;
    for (reason, n) in &from.methods_by_reason {
        *into.methods_by_reason.entry(*reason).or_default() += n;
    }
}

fn stream_all(specs: &[RepoSpec]) -> Result<Vec<Vec<CommitRecord>>, PipelineError> {
    specs
        .par_iter()
        .map(|s| {
            let repo = GitRepo::open(&s.path)?;
            Ok(repo.stream_commits(&s.branch, &s.id)?)
        })
        .collect()
}

fn by_repo(specs: &[RepoSpec], kept: &[CommitRecord]) -> Vec<Vec<CommitRecord>> {
    specs.iter().map(|s| kept.iter().filter(|c| c.repo_id == s.id).cloned().collect()).collect()
}

fn load_overrides(path: Option<&Path>) -> Result<Vec<IdentityOverride>, PipelineError> {
    match path {
        Some(p) => read_jsonl(p).map_err(|e| PipelineError::Config(e.to_string())),
        None => Ok(Vec::new()),
    }
}

/// Input hash: configuration plus the tip of every configured branch.
fn mine_inputs(ctx: &Context) -> Result<String, PipelineError> {
    let mut parts = vec![ctx.config_hash.clone()];
    for spec in ctx.config.repos.iter().chain(&ctx.config.generic_repos) {
        let tip = GitRepo::open(&spec.path)?.resolve_branch(&spec.branch)?.unwrap_or_default();
        parts.push(format!("{}={tip}", spec.id));
    }
    let refs: Vec<&str> = parts.iter().map(String::as_str).collect();
    Ok(content_hash(&refs))
}

pub fn mine(ctx: &Context) -> Result<StageOutcome, PipelineError> {
    let input = mine_inputs(ctx)?;
    let dir = ctx.stage_dir(Stage::Mine);
    ctx.install(|| run_stage(ctx, &dir, Stage::Mine, &input, |dir| mine_into(ctx, dir)))
}

fn mine_into(ctx: &Context, dir: &Path) -> Result<(), PipelineError> {
    let cfg = &ctx.config;
    let overrides = load_overrides(cfg.overrides.as_deref())?;

    let org_streams = stream_all(&cfg.repos)?;
    let generic_streams = stream_all(&cfg.generic_repos)?;
    let mut all_commits: Vec<CommitRecord> = org_streams.iter().chain(&generic_streams).flatten().cloned().collect();
    sort_commits(&mut all_commits);

    let mut org_all: Vec<CommitRecord> = org_streams.into_iter().flatten().collect();
    sort_commits(&mut org_all);
    let (org_kept, mut org_counts) = commit_funnel(org_all);
    let org_by_repo = by_repo(&cfg.repos, &org_kept);
    let org_extracted: Vec<Extraction> = cfg
        .repos
        .par_iter()
        .zip(&org_by_repo)
        .map(|(s, commits)| extract_repo(s, commits))
        .collect::<Result<_, _>>()?;
    for e in &org_extracted {
        merge_counts(&mut org_counts, &e.counts);
    }

    let raw: Vec<RawAuthor> = org_kept
        .iter()
        .map(|c| RawAuthor { name: c.author_name.clone(), email: c.author_email.clone(), added_lines: c.java_lines_added })
        .collect();
    let identities = resolve_identities_with(&raw, &overrides);
    let ranked = top_contributors(&identities, identities.len());
    let selected = top_contributors(&identities, cfg.caps.top_contributors);
    let index = alias_index(&selected);

    let jobs: Vec<(&CommitRecord, &ChangedMethod, &String)> = org_by_repo
        .iter()
        .zip(&org_extracted)
        .flat_map(|(commits, ex)| {
            ex.changed.iter().filter_map(|cm| {
                let c = &commits[cm.commit];
                let alias = Alias { name: c.author_name.clone(), email: c.author_email.clone() };
                index.get(&alias).map(|author| (c, cm, author))
            })
        })
        .collect();
    let mut instances: Vec<CompletionInstance> = jobs
        .par_iter()
        .flat_map_iter(|(c, cm, author)| {
            let prov = Provenance {
                repo_id: c.repo_id.clone(),
                commit_sha: c.sha.clone(),
                author_id: (*author).clone(),
                timestamp: c.timestamp,
                file: cm.file.clone(),
            };
            forge_instances(&cm.method, &cm.lines, &prov, cfg.seed)
        })
        .collect();
    instances.sort_by(|a, b| {
        (&a.author_id, crate::assembly::chronological_key(a)).cmp(&(&b.author_id, crate::assembly::chronological_key(b)))
    });
    instances.dedup_by(|a, b| a.instance_id == b.instance_id);
    org_counts.instances = instances.len();

    let mut generic_funnel = BTreeMap::new();
    let mut generic_methods = Vec::new();
    for (spec, stream) in cfg.generic_repos.iter().zip(generic_streams) {
        let (kept, mut counts) = commit_funnel(stream);
        let ex = extract_repo(spec, &kept)?;
        merge_counts(&mut counts, &ex.counts);
        let mut seen = BTreeSet::new();
        for cm in ex.changed {
            if !seen.insert(cm.method.text.clone()) {
                continue;
            }
            let c = &kept[cm.commit];
            generic_methods.push(GenericMethod {
                provenance: Provenance {
                    repo_id: c.repo_id.clone(),
                    commit_sha: c.sha.clone(),
                    author_id: GENERIC_AUTHOR.to_string(),
                    timestamp: c.timestamp,
                    file: cm.file,
                },
                method: cm.method,
            });
        }
        generic_funnel.insert(spec.id.clone(), counts);
    }

    let mut instances_by_author = BTreeMap::new();
    for i in &instances {
        *instances_by_author.entry(i.author_id.clone()).or_default() += 1;
    }
    let funnel = Funnel {
        config_hash: ctx.config_hash.clone(),
        organization: cfg.organization.clone(),
        organization_funnel: org_counts,
        generic_funnel,
        authors_resolved: identities.len(),
        authors_selected: selected.len(),
        instances_by_author,
        generic_methods: generic_methods.len(),
    };

    write_jsonl(&dir.join(COMMITS_FILE), &all_commits)?;
    write_json(&dir.join(IDENTITIES_FILE), &ranked)?;
    write_jsonl(&dir.join(INSTANCES_FILE), &instances)?;
    write_jsonl(&dir.join(GENERIC_METHODS_FILE), &generic_methods)?;
    write_json(&dir.join(FUNNEL_FILE), &funnel)?;
    Ok(())
}
