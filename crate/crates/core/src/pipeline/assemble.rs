use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::mine::{GENERIC_METHODS_FILE, INSTANCES_FILE};
use super::{file_safe, run_stage, stamp_digest, Context, PipelineError, Stage, StageOutcome};
use crate::assembly::{
    baseline_plus_dataset, build_org_dataset, cap_methods_per_repo, dedup, developer_dataset, eligible, mlm_pretrain_instances,
    org_subset_dataset, random_split, select_developers, split_developer, split_repos, AssemblyError, Dataset, DatasetManifest,
    DatasetRole, SplitAssignment, SplitCounts,
};
use crate::forge::{generate_generic_corpus, CompletionInstance, GenericMethod, MaskLengthDistribution, MaskLengthModel};
use crate::io::{read_json, read_jsonl, write_json, write_jsonl, IoError};
use crate::seed::{bytes_hash, rng_for};

pub const INDEX_FILE: &str = "index.json";
pub const DATASETS_DIR: &str = "datasets";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPLIT_FILES: [&str; 3] = ["train.jsonl", "val.jsonl", "test.jsonl"];

/// A manifest as written to disk, tagged with the producing configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub config_hash: String,
    #[serde(flatten)]
    pub manifest: DatasetManifest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeveloperStatus {
    pub author_id: String,
    pub instances: usize,
    pub counts: Option<SplitCounts>,
    pub removed_duplicates: usize,
    pub eligible: bool,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub dataset_id: String,
    pub role: DatasetRole,
    pub anchor_developer: Option<String>,
    /// Directory relative to the assemble stage directory.
    pub path: String,
    pub manifest_hash: String,
    pub counts: SplitCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDataset {
    pub dataset_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssemblyIndex {
    pub config_hash: String,
    pub organization: String,
    /// Where the generic target distribution came from: `config`,
    /// `developer-test-sets` or `default`.
    pub mask_distribution_source: String,
    pub mask_distribution: Option<MaskLengthDistribution>,
    pub mask_model: Option<MaskLengthModel>,
    pub developers: Vec<DeveloperStatus>,
    pub datasets: Vec<IndexEntry>,
    pub skipped: Vec<SkippedDataset>,
}

impl AssemblyIndex {
    pub fn entry(&self, dataset_id: &str) -> Option<&IndexEntry> {
        self.datasets.iter().find(|e| e.dataset_id == dataset_id)
    }

    /// Entries of one role anchored on `developer`.
    pub fn anchored(&self, role: DatasetRole, developer: &str) -> Option<&IndexEntry> {
        self.datasets.iter().find(|e| e.role == role && e.anchor_developer.as_deref() == Some(developer))
    }
}

fn write_dataset<T: Serialize>(
    root: &Path,
    ctx: &Context,
    mut ds: Dataset<T>,
    index: &mut Vec<IndexEntry>,
) -> Result<(), PipelineError> {
    let rel = format!("{DATASETS_DIR}/{}", file_safe(&ds.manifest.dataset_id));
    let dir = root.join(&rel);
    let mut hashes = Vec::with_capacity(3);
    for (name, items) in SPLIT_FILES.iter().zip([&ds.train, &ds.val, &ds.test]) {
        let path = dir.join(name);
        write_jsonl(&path, items)?;
        let bytes = fs::read(&path).map_err(|source| IoError::Fs { path: path.clone(), source })?;
        hashes.push(bytes_hash(&bytes));
    }
    ds.manifest.source_hashes = hashes;
    ds.manifest.counts = SplitCounts { train: ds.train.len(), val: ds.val.len(), test: ds.test.len() };
    let file = ManifestFile { config_hash: ctx.config_hash.clone(), manifest: ds.manifest };
    let manifest_path = dir.join(MANIFEST_FILE);
    write_json(&manifest_path, &file)?;
    let bytes = fs::read(&manifest_path).map_err(|source| IoError::Fs { path: manifest_path.clone(), source })?;
    index.push(IndexEntry {
        dataset_id: file.manifest.dataset_id.clone(),
        role: file.manifest.role,
        anchor_developer: file.manifest.anchor_developer.clone(),
        path: rel,
        manifest_hash: bytes_hash(&bytes),
        counts: file.manifest.counts,
    });
    Ok(())
}

/// Reads a dataset written by the assemble stage.
pub fn load_dataset<T: DeserializeOwned>(assemble_dir: &Path, entry: &IndexEntry) -> Result<Dataset<T>, PipelineError> {
    let dir = assemble_dir.join(&entry.path);
    let file: ManifestFile = read_json(&dir.join(MANIFEST_FILE))?;
    Ok(Dataset {
        manifest: file.manifest,
        train: read_jsonl(&dir.join(SPLIT_FILES[0]))?,
        val: read_jsonl(&dir.join(SPLIT_FILES[1]))?,
        test: read_jsonl(&dir.join(SPLIT_FILES[2]))?,
    })
}

pub fn assemble(ctx: &Context) -> Result<StageOutcome, PipelineError> {
    let mine_dir = ctx.stage_dir(Stage::Mine);
    let mine_stamp = ctx.require(&mine_dir, Stage::Mine)?;
    let input = stamp_digest(&mine_stamp);
    let dir = ctx.stage_dir(Stage::Assemble);
    ctx.install(|| run_stage(ctx, &dir, Stage::Assemble, &input, |dir| assemble_into(ctx, &mine_dir, dir)))
}

fn skip(skipped: &mut Vec<SkippedDataset>, dataset_id: String, err: AssemblyError) {
    skipped.push(SkippedDataset { dataset_id, reason: err.to_string() });
}

fn assemble_into(ctx: &Context, mine_dir: &Path, dir: &Path) -> Result<(), PipelineError> {
    let cfg = &ctx.config;
    let seed = cfg.seed;
    let policy = cfg.split_policy();
    let instances: Vec<CompletionInstance> = read_jsonl(&mine_dir.join(INSTANCES_FILE))?;
    let generic_methods: Vec<GenericMethod> = read_jsonl(&mine_dir.join(GENERIC_METHODS_FILE))?;

    let mut by_author: BTreeMap<String, Vec<CompletionInstance>> = BTreeMap::new();
    for i in instances {
        by_author.entry(i.author_id.clone()).or_default().push(i);
    }
    let split_results: Vec<(String, Result<SplitAssignment, AssemblyError>)> =
        by_author.par_iter().map(|(a, v)| (a.clone(), split_developer(v, &policy))).collect();
    let splits: BTreeMap<String, SplitAssignment> =
        split_results.iter().filter_map(|(a, r)| r.as_ref().ok().map(|s| (a.clone(), s.clone()))).collect();
    let selected = select_developers(&splits, &policy, cfg.caps.top_developers);
    let selected_set: BTreeSet<&String> = selected.iter().collect();
    let developers: Vec<DeveloperStatus> = split_results
        .iter()
        .map(|(a, r)| DeveloperStatus {
            author_id: a.clone(),
            instances: by_author[a].len(),
            counts: r.as_ref().ok().map(SplitAssignment::counts),
            removed_duplicates: r.as_ref().map(|s| s.removed_duplicates).unwrap_or(0),
            eligible: r.as_ref().map(|s| eligible(s, &policy)).unwrap_or(false),
            selected: selected_set.contains(a),
        })
        .collect();

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    let mut index = AssemblyIndex {
        config_hash: ctx.config_hash.clone(),
        organization: cfg.organization.clone(),
        mask_distribution_source: "none".to_string(),
        mask_distribution: None,
        mask_model: None,
        developers,
        datasets: Vec::new(),
        skipped: Vec::new(),
    };
    if selected.is_empty() {
        write_json(&dir.join(INDEX_FILE), &index)?;
        return Ok(());
    }

    let org_instances: BTreeMap<String, Vec<CompletionInstance>> =
        selected.iter().map(|a| (a.clone(), by_author[a].clone())).collect();
    let dev_tests: Vec<CompletionInstance> = selected.iter().flat_map(|a| splits[a].test.iter().cloned()).collect();

    let (dist, source) = match (&cfg.mask_distribution, MaskLengthDistribution::from_lengths(&dev_tests.iter().map(|i| i.n).collect::<Vec<_>>())) {
        (Some(d), _) => (*d, "config"),
        (None, Some(d)) => (d, "developer-test-sets"),
        (None, None) => (MaskLengthDistribution::APACHE, "default"),
    };
    index.mask_distribution = Some(dist);
    index.mask_distribution_source = source.to_string();

    // generic pool: capped per repository, repositories split between
    // pre-training and fine-tuning
    let mut methods_by_repo: BTreeMap<String, Vec<GenericMethod>> = BTreeMap::new();
    for m in generic_methods {
        methods_by_repo.entry(m.provenance.repo_id.clone()).or_default().push(m);
    }
    let capped = cap_methods_per_repo(&methods_by_repo, cfg.caps.methods_per_repo, seed);
    let generic_ids: Vec<String> = cfg.generic_repos.iter().map(|r| r.id.clone()).collect();
    let (pretrain_repos, finetune_repos) = split_repos(&generic_ids, cfg.caps.generic_pretrain_percent, seed);
    let pick = |repos: &[String]| -> Vec<GenericMethod> { repos.iter().flat_map(|r| capped.get(r).cloned().unwrap_or_default()).collect() };

    let finetune_methods = pick(&finetune_repos);
    let mut generic_pool = Vec::new();
    if !finetune_methods.is_empty() {
        let (generated, model) = generate_generic_corpus(&finetune_methods, &dist, seed);
        index.mask_model = Some(model);
        generic_pool = dedup(&generated, &dev_tests);
        let (train, val) = random_split(&generic_pool, cfg.caps.train_percent, seed);
        let ds = Dataset {
            manifest: DatasetManifest {
                dataset_id: "generic-finetune".to_string(),
                role: DatasetRole::GenericFinetune,
                anchor_developer: None,
                cutoff_ts: None,
                counts: SplitCounts::default(),
                seed,
                source_hashes: Vec::new(),
            },
            train,
            val,
            test: Vec::new(),
        };
        write_dataset(dir, ctx, ds, &mut entries)?;
    }

    let pretrain_methods = pick(&pretrain_repos);
    if !pretrain_methods.is_empty() {
        let records: Vec<_> = pretrain_methods
            .par_iter()
            .map(|m| {
                let p = &m.provenance;
                mlm_pretrain_instances(&m.method, &mut rng_for(seed, &["mlm", &p.repo_id, &p.commit_sha, &p.file, &m.method.signature]))
            })
            .collect();
        let (train, val) = random_split(&records, cfg.caps.train_percent, seed);
        let ds = Dataset {
            manifest: DatasetManifest {
                dataset_id: "pretrain".to_string(),
                role: DatasetRole::Pretrain,
                anchor_developer: None,
                cutoff_ts: None,
                counts: SplitCounts::default(),
                seed,
                source_hashes: Vec::new(),
            },
            train,
            val,
            test: Vec::new(),
        };
        write_dataset(dir, ctx, ds, &mut entries)?;
    }

    let org_repos: BTreeSet<String> = cfg.repos.iter().map(|r| r.id.clone()).collect();
    type Built = (Vec<Dataset>, Vec<SkippedDataset>);
    let per_anchor: Vec<Built> = selected
        .par_iter()
        .map(|anchor| {
            let split = &splits[anchor];
            let mut built = vec![developer_dataset(anchor, split, seed)];
            let mut skipped = Vec::new();
            match build_org_dataset(&org_instances, anchor, split, &policy, seed) {
                Ok(org) => {
                    match org_subset_dataset(&org, split, seed) {
                        Ok(ds) => built.push(ds),
                        Err(e) => skip(&mut skipped, format!("org-subset-{anchor}"), e),
                    }
                    if generic_pool.is_empty() {
                        skipped.push(SkippedDataset { dataset_id: format!("baseline-plus-{anchor}"), reason: "no generic pool".to_string() });
                    } else {
                        match baseline_plus_dataset(&org, split, &generic_pool, &org_repos, seed) {
                            Ok(ds) => built.push(ds),
                            Err(e) => skip(&mut skipped, format!("baseline-plus-{anchor}"), e),
                        }
                    }
                    built.insert(1, org);
                }
                Err(e) => skip(&mut skipped, format!("organization-{anchor}"), e),
            }
            (built, skipped)
        })
        .collect();
    for (built, skipped_here) in per_anchor {
        for ds in built {
            write_dataset(dir, ctx, ds, &mut entries)?;
        }
        skipped.extend(skipped_here);
    }

    index.datasets = entries;
    index.skipped = skipped;
    write_json(&dir.join(INDEX_FILE), &index)?;
    Ok(())
}
