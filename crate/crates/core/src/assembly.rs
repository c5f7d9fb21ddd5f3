//! Dataset builders: developer splits, organization datasets aligned to a
//! developer's training cutoff, size-controlled subsets and generic pools.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::forge::CompletionInstance;
use crate::java::{lex, MethodUnit, TokenKind};
use crate::seed::{content_hash, rng_for};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AssemblyError {
    #[error("{have} instances, need at least {need}")]
    TooFewInstances { have: usize, need: usize },
    #[error("anchor developer {0} is not eligible")]
    AnchorIneligible(String),
    #[error("requested {target} items from a pool of {available}")]
    TargetTooLarge { target: usize, available: usize },
    #[error("generic pool contains organization repository {0}")]
    OrganizationLeak(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetRole {
    Developer,
    Organization,
    OrgSubset,
    BaselinePlus,
    GenericFinetune,
    Pretrain,
}

impl DatasetRole {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetRole::Developer => "developer",
            DatasetRole::Organization => "organization",
            DatasetRole::OrgSubset => "org-subset",
            DatasetRole::BaselinePlus => "baseline-plus",
            DatasetRole::GenericFinetune => "generic-finetune",
            DatasetRole::Pretrain => "pretrain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub role: DatasetRole,
    pub anchor_developer: Option<String>,
    /// Latest timestamp allowed in the training split.
    pub cutoff_ts: Option<i64>,
    pub counts: SplitCounts,
    pub seed: u64,
    /// Content hashes of the train, val and test files, in that order.
    pub source_hashes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPolicy {
    pub test_size: usize,
    pub train_percent: usize,
    pub min_train: usize,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        SplitPolicy { test_size: 500, train_percent: 90, min_train: 1000 }
    }
}

impl SplitPolicy {
    /// Training share of `remainder` items, rounded down.
    pub fn train_share(&self, remainder: usize) -> usize {
        remainder * self.train_percent / 100
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// A time-ordered three-way split of one developer's instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<CompletionInstance>,
    pub val: Vec<CompletionInstance>,
    pub test: Vec<CompletionInstance>,
    /// Training instances dropped as duplicates of val/test instances.
    pub removed_duplicates: usize,
}

impl SplitAssignment {
    pub fn counts(&self) -> SplitCounts {
        SplitCounts { train: self.train.len(), val: self.val.len(), test: self.test.len() }
    }

    pub fn assignment(&self) -> BTreeMap<String, Split> {
        let tag = |v: &[CompletionInstance], s: Split| v.iter().map(move |i| (i.instance_id.clone(), s)).collect::<Vec<_>>();
        tag(&self.train, Split::Train)
            .into_iter()
            .chain(tag(&self.val, Split::Val))
            .chain(tag(&self.test, Split::Test))
            .collect()
    }

    pub fn max_train_ts(&self) -> Option<i64> {
        self.train.iter().map(|i| i.timestamp).max()
    }

    pub fn min_holdout_ts(&self) -> Option<i64> {
        self.val.iter().chain(&self.test).map(|i| i.timestamp).min()
    }

    pub fn first_test_ts(&self) -> Option<i64> {
        self.test.iter().map(|i| i.timestamp).min()
    }

    pub fn holdout(&self) -> Vec<CompletionInstance> {
        self.val.iter().chain(&self.test).cloned().collect()
    }
}

pub fn chronological_key(i: &CompletionInstance) -> (i64, &str, &str) {
    (i.timestamp, &i.commit_sha, &i.instance_id)
}

pub fn sort_chronologically(instances: &mut [CompletionInstance]) {
    instances.sort_by(|a, b| chronological_key(a).cmp(&chronological_key(b)));
}

/// Most recent `test_size` to test, the oldest share of the rest to train,
/// the remainder to val; training duplicates of val/test are then removed.
pub fn split_developer(instances: &[CompletionInstance], policy: &SplitPolicy) -> Result<SplitAssignment, AssemblyError> {
    let need = policy.test_size + 1;
    if instances.len() < need {
        return Err(AssemblyError::TooFewInstances { have: instances.len(), need });
    }
    let mut sorted = instances.to_vec();
    sort_chronologically(&mut sorted);
    let test = sorted.split_off(sorted.len() - policy.test_size);
    let val = sorted.split_off(policy.train_share(sorted.len()));
    let holdout: Vec<CompletionInstance> = val.iter().chain(&test).cloned().collect();
    let before = sorted.len();
    let train = dedup(&sorted, &holdout);
    Ok(SplitAssignment { removed_duplicates: before - train.len(), train, val, test })
}

pub fn eligible(split: &SplitAssignment, policy: &SplitPolicy) -> bool {
    split.train.len() >= policy.min_train && split.test.len() == policy.test_size
}

/// Eligible developers ordered by total instance count (descending, ties by
/// id), truncated to `top`.
pub fn select_developers(splits: &BTreeMap<String, SplitAssignment>, policy: &SplitPolicy, top: usize) -> Vec<String> {
    let mut ranked: Vec<(usize, &String)> = splits
        .iter()
        .filter(|(_, s)| eligible(s, policy))
        .map(|(id, s)| (s.train.len() + s.val.len() + s.test.len() + s.removed_duplicates, id))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    ranked.into_iter().take(top).map(|(_, id)| id.clone()).collect()
}

/// Equality key: lexical tokens of context and target with whitespace dropped.
pub fn dedup_key(instance: &CompletionInstance) -> String {
    let tokens = |s: &str| {
        let lexed = lex(s);
        let texts: Vec<String> = lexed.into_iter().filter(|t| t.kind != TokenKind::Whitespace).map(|t| t.text).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        content_hash(&refs)
    };
    content_hash(&[&tokens(&instance.context), &tokens(&instance.target)])
}

/// Training instances that do not equal any holdout instance, order kept.
pub fn dedup(train: &[CompletionInstance], holdout: &[CompletionInstance]) -> Vec<CompletionInstance> {
    let keys: HashSet<String> = holdout.iter().map(dedup_key).collect();
    train.iter().filter(|i| !keys.contains(&dedup_key(i))).cloned().collect()
}

/// A built dataset: manifest plus the three splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset<T = CompletionInstance> {
    pub manifest: DatasetManifest,
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

fn counts_of<T>(train: &[T], val: &[T], test: &[T]) -> SplitCounts {
    SplitCounts { train: train.len(), val: val.len(), test: test.len() }
}

pub fn developer_dataset(author_id: &str, split: &SplitAssignment, seed: u64) -> Dataset {
    Dataset {
        manifest: DatasetManifest {
            dataset_id: format!("developer-{author_id}"),
            role: DatasetRole::Developer,
            anchor_developer: Some(author_id.to_string()),
            cutoff_ts: split.max_train_ts(),
            counts: split.counts(),
            seed,
            source_hashes: Vec::new(),
        },
        train: split.train.clone(),
        val: split.val.clone(),
        test: split.test.clone(),
    }
}

/// Training cutoff for organization data anchored on `split`: the anchor's
/// last training timestamp, lowered below the first val/test timestamp when
/// the two coincide.
pub fn org_cutoff(split: &SplitAssignment) -> Option<i64> {
    let max_train = split.max_train_ts()?;
    Some(match split.min_holdout_ts() {
        Some(first_holdout) => max_train.min(first_holdout - 1),
        None => max_train,
    })
}

/// Organization dataset evaluated on the anchor's test set.
///
/// The pool is every selected developer's instances up to the cutoff, minus
/// duplicates of the anchor's val/test, split 90/10 by recency.
pub fn build_org_dataset(
    all_dev_instances: &BTreeMap<String, Vec<CompletionInstance>>,
    anchor: &str,
    anchor_split: &SplitAssignment,
    policy: &SplitPolicy,
    seed: u64,
) -> Result<Dataset, AssemblyError> {
    if !eligible(anchor_split, policy) {
        return Err(AssemblyError::AnchorIneligible(anchor.to_string()));
    }
    let cutoff = org_cutoff(anchor_split).ok_or_else(|| AssemblyError::AnchorIneligible(anchor.to_string()))?;
    let mut seen = BTreeSet::new();
    let mut pool: Vec<CompletionInstance> = all_dev_instances
        .values()
        .flatten()
        .filter(|i| i.timestamp <= cutoff && seen.insert(i.instance_id.clone()))
        .cloned()
        .collect();
    pool = dedup(&pool, &anchor_split.holdout());
    sort_chronologically(&mut pool);
    let val = pool.split_off(policy.train_share(pool.len()));
    let train = pool;
    Ok(Dataset {
        manifest: DatasetManifest {
            dataset_id: format!("organization-{anchor}"),
            role: DatasetRole::Organization,
            anchor_developer: Some(anchor.to_string()),
            cutoff_ts: Some(cutoff),
            counts: counts_of(&train, &val, &anchor_split.test),
            seed,
            source_hashes: Vec::new(),
        },
        train,
        val,
        test: anchor_split.test.clone(),
    })
}

/// Uniform sample of exactly `target` items without replacement, in input order.
pub fn sample_exact<T: Clone, R: Rng>(items: &[T], target: usize, rng: &mut R) -> Result<Vec<T>, AssemblyError> {
    if target > items.len() {
        return Err(AssemblyError::TargetTooLarge { target, available: items.len() });
    }
    let mut picked = index::sample(rng, items.len(), target).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| items[i].clone()).collect())
}

pub fn build_org_subset(org_set: &[CompletionInstance], target_size: usize, seed: u64) -> Result<Vec<CompletionInstance>, AssemblyError> {
    sample_exact(org_set, target_size, &mut rng_for(seed, &["org-subset"]))
}

/// Organization data shrunk to the size of the anchor's developer dataset.
pub fn org_subset_dataset(org: &Dataset, developer: &SplitAssignment, seed: u64) -> Result<Dataset, AssemblyError> {
    let anchor = org.manifest.anchor_developer.clone().unwrap_or_default();
    let train = sample_exact(&org.train, developer.train.len(), &mut rng_for(seed, &["org-subset", &anchor, "train"]))?;
    let val_size = developer.val.len().min(org.val.len());
    let val = sample_exact(&org.val, val_size, &mut rng_for(seed, &["org-subset", &anchor, "val"]))?;
    Ok(Dataset {
        manifest: DatasetManifest {
            dataset_id: format!("org-subset-{anchor}"),
            role: DatasetRole::OrgSubset,
            counts: counts_of(&train, &val, &org.test),
            ..org.manifest.clone()
        },
        train,
        val,
        test: org.test.clone(),
    })
}

/// Seeded sample of `target_size` generic instances older than the anchor's
/// first test instance. The pool must not contain organization repositories.
pub fn build_baseline_plus(
    generic_pool: &[CompletionInstance],
    target_size: usize,
    first_test_ts: i64,
    org_repos: &BTreeSet<String>,
    seed: u64,
) -> Result<Vec<CompletionInstance>, AssemblyError> {
    if let Some(i) = generic_pool.iter().find(|i| org_repos.contains(&i.repo_id)) {
        return Err(AssemblyError::OrganizationLeak(i.repo_id.clone()));
    }
    let eligible: Vec<CompletionInstance> = generic_pool.iter().filter(|i| i.timestamp < first_test_ts).cloned().collect();
    sample_exact(&eligible, target_size, &mut rng_for(seed, &["baseline-plus"]))
}

/// Generic data of the same train/val size as `org`, drawn disjointly and
/// no newer than the organization cutoff.
pub fn baseline_plus_dataset(
    org: &Dataset,
    anchor_split: &SplitAssignment,
    generic_pool: &[CompletionInstance],
    org_repos: &BTreeSet<String>,
    seed: u64,
) -> Result<Dataset, AssemblyError> {
    let anchor = org.manifest.anchor_developer.clone().unwrap_or_default();
    let first_test = anchor_split.first_test_ts().ok_or_else(|| AssemblyError::AnchorIneligible(anchor.clone()))?;
    // the organization cutoff also keeps the sample older than the anchor's val split
    let bound = match org.manifest.cutoff_ts {
        Some(cutoff) => first_test.min(cutoff + 1),
        None => first_test,
    };
    let wanted = org.train.len() + org.val.len();
    let sub_seed = crate::seed::sub_seed(seed, &["baseline-plus", &anchor]);
    let mut drawn = build_baseline_plus(generic_pool, wanted, bound, org_repos, sub_seed)?;
    // the sample is in pool order; a seeded shuffle decides which part is val
    let order = index::sample(&mut rng_for(sub_seed, &["val"]), drawn.len(), org.val.len()).into_vec();
    let val_idx: BTreeSet<usize> = order.into_iter().collect();
    let mut train = Vec::with_capacity(org.train.len());
    let mut val = Vec::with_capacity(org.val.len());
    for (i, inst) in drawn.drain(..).enumerate() {
        if val_idx.contains(&i) {
            val.push(inst);
        } else {
            train.push(inst);
        }
    }
    Ok(Dataset {
        manifest: DatasetManifest {
            dataset_id: format!("baseline-plus-{anchor}"),
            role: DatasetRole::BaselinePlus,
            anchor_developer: Some(anchor),
            cutoff_ts: Some(bound - 1),
            counts: counts_of(&train, &val, &org.test),
            seed,
            source_hashes: Vec::new(),
        },
        train,
        val,
        test: org.test.clone(),
    })
}

/// Keeps at most `cap` items per repository, sampled uniformly with a
/// per-repository sub-seed.
pub fn cap_methods_per_repo<T: Clone>(methods: &BTreeMap<String, Vec<T>>, cap: usize, seed: u64) -> BTreeMap<String, Vec<T>> {
    methods
        .iter()
        .map(|(repo, items)| {
            let kept = if items.len() <= cap {
                items.clone()
            } else {
                sample_exact(items, cap, &mut rng_for(seed, &["cap", repo])).expect("cap below length")
            };
            (repo.clone(), kept)
        })
        .collect()
}

/// Splits repository ids into pre-training and fine-tuning groups, with
/// `pretrain_percent` of them (rounded down) going to pre-training.
pub fn split_repos(repos: &[String], pretrain_percent: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let mut sorted = repos.to_vec();
    sorted.sort();
    sorted.dedup();
    let k = sorted.len() * pretrain_percent / 100;
    let picked: BTreeSet<usize> = index::sample(&mut rng_for(seed, &["repo-split"]), sorted.len(), k).into_iter().collect();
    let (pre, fine): (Vec<_>, Vec<_>) = sorted.into_iter().enumerate().partition(|(i, _)| picked.contains(i));
    (pre.into_iter().map(|(_, r)| r).collect(), fine.into_iter().map(|(_, r)| r).collect())
}

/// Seeded 90/10-style random split used for the generic sets.
pub fn random_split<T: Clone>(items: &[T], train_percent: usize, seed: u64) -> (Vec<T>, Vec<T>) {
    let n_val = items.len() - items.len() * train_percent / 100;
    let val_idx: BTreeSet<usize> = index::sample(&mut rng_for(seed, &["random-split"]), items.len(), n_val).into_iter().collect();
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, item) in items.iter().enumerate() {
        if val_idx.contains(&i) {
            val.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    (train, val)
}

pub const MLM_PERCENT: usize = 15;

/// Masked-language-model record: the method with chosen tokens replaced by
/// numbered sentinels, and the hidden tokens in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlmRecord {
    pub id: String,
    pub input: String,
    pub targets: Vec<String>,
}

pub fn mlm_sentinel(k: usize) -> String {
    format!("<extra_id_{k}>")
}

/// Masks `⌈15% · tokens⌉` significant tokens chosen uniformly.
pub fn mlm_pretrain_instances<R: Rng>(method: &MethodUnit, rng: &mut R) -> MlmRecord {
    let tc = method.tokens.len();
    let k = (tc * MLM_PERCENT).div_ceil(100);
    let mut picked = index::sample(rng, tc, k.min(tc)).into_vec();
    picked.sort_unstable();
    let mut input = String::with_capacity(method.text.len());
    let mut targets = Vec::with_capacity(picked.len());
    let mut cursor = 0;
    for (slot, &i) in picked.iter().enumerate() {
        let tok = &method.tokens[i];
        let a = tok.offset - method.start_offset;
        input.push_str(&method.text[cursor..a]);
        input.push_str(&mlm_sentinel(slot));
        targets.push(tok.text.clone());
        cursor = a + tok.text.len();
    }
    input.push_str(&method.text[cursor..]);
    let id = content_hash(&[&method.text, &input])[..32].to_string();
    MlmRecord { id, input, targets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::SegmentKind;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inst(id: usize, ts: i64, author: &str) -> CompletionInstance {
        CompletionInstance {
            instance_id: format!("{id:08}"),
            context: format!("void m{id}() {{ x = <FILL_ME> }}"),
            target: format!("y{id} + 1;"),
            n: 4,
            segment_tokens: 6,
            kind: SegmentKind::IsolatedLine,
            repo_id: "r".into(),
            commit_sha: format!("{ts:040}"),
            author_id: author.into(),
            timestamp: ts,
            file: "A.java".into(),
            signature: format!("void m{id}()"),
        }
    }

    fn history(n: usize) -> Vec<CompletionInstance> {
        (0..n).map(|i| inst(i, 1_000 + i as i64, "d")).collect()
    }

    #[test]
    fn split_arithmetic() {
        let policy = SplitPolicy::default();
        assert_eq!(split_developer(&history(5500), &policy).unwrap().counts(), SplitCounts { train: 4500, val: 500, test: 500 });
        assert_eq!(split_developer(&history(1501), &policy).unwrap().counts(), SplitCounts { train: 900, val: 101, test: 500 });
        assert_eq!(
            split_developer(&history(500), &policy),
            Err(AssemblyError::TooFewInstances { have: 500, need: 501 })
        );
    }

    #[test]
    fn split_is_time_ordered() {
        let mut h = history(1600);
        h.reverse();
        let s = split_developer(&h, &SplitPolicy::default()).unwrap();
        assert!(s.max_train_ts().unwrap() < s.min_holdout_ts().unwrap());
        assert!(s.val.iter().map(|i| i.timestamp).max() < s.first_test_ts());
    }

    #[test]
    fn train_duplicate_of_test_is_dropped() {
        let mut h = history(1600);
        h[0].context = h[1599].context.clone();
        h[0].target = h[1599].target.clone();
        let s = split_developer(&h, &SplitPolicy::default()).unwrap();
        assert_eq!(s.removed_duplicates, 1);
        assert_eq!(s.train.len(), 989);
        assert!(!s.train.iter().any(|i| i.instance_id == h[0].instance_id));
    }

    #[test]
    fn eligibility_boundary() {
        let policy = SplitPolicy::default();
        // r = n − 500, train = ⌊0.9·r⌋: n = 1611 → 999, n = 1612 → 1000
        let s = split_developer(&history(1611), &policy).unwrap();
        assert_eq!(s.train.len(), 999);
        assert!(!eligible(&s, &policy));
        let s = split_developer(&history(1612), &policy).unwrap();
        assert_eq!(s.train.len(), 1000);
        assert!(eligible(&s, &policy));
        // dedup pushes the second one below the threshold
        let mut h = history(1612);
        h[3].context = h[1611].context.clone();
        h[3].target = h[1611].target.clone();
        assert!(!eligible(&split_developer(&h, &policy).unwrap(), &policy));
    }

    #[test]
    fn dedup_rules() {
        let a = inst(1, 1, "d");
        let mut same_target = inst(2, 1, "d");
        same_target.target = a.target.clone();
        let mut spaced = a.clone();
        spaced.instance_id = "other".into();
        spaced.context = spaced.context.replace(" = ", "=").replace("{ ", "{\n\t");
        let kept = dedup(&[a.clone(), same_target.clone(), spaced], std::slice::from_ref(&a));
        assert_eq!(kept, vec![same_target]);
    }

    fn small_policy() -> SplitPolicy {
        SplitPolicy { test_size: 5, train_percent: 90, min_train: 10 }
    }

    #[test]
    fn org_cutoff_rule() {
        let policy = small_policy();
        // 22 instances: test 5, remainder 17, train ⌊15.3⌋ = 15 (ts 0..=140), val 2
        let anchor: Vec<_> = (0..22).map(|i| inst(i, i as i64 * 10, "anchor")).collect();
        let split = split_developer(&anchor, &policy).unwrap();
        let cutoff = split.max_train_ts().unwrap();
        let other = vec![inst(100, cutoff - 10, "other"), inst(101, cutoff + 10, "other")];
        let all = BTreeMap::from([("anchor".to_string(), anchor.clone()), ("other".to_string(), other)]);
        let org = build_org_dataset(&all, "anchor", &split, &policy, 1).unwrap();
        let ids: BTreeSet<_> = org.train.iter().chain(&org.val).map(|i| i.instance_id.clone()).collect();
        assert!(ids.contains(&format!("{:08}", 100)));
        assert!(!ids.contains(&format!("{:08}", 101)));
        for t in &split.train {
            assert!(ids.contains(&t.instance_id));
        }
        assert_eq!(org.manifest.cutoff_ts, Some(cutoff));
        assert_eq!(org.test, split.test);
    }

    #[test]
    fn org_drops_copies_of_anchor_holdout() {
        let policy = small_policy();
        let anchor: Vec<_> = (0..22).map(|i| inst(i, i as i64 * 10, "anchor")).collect();
        let split = split_developer(&anchor, &policy).unwrap();
        let mut copy = split.test[0].clone();
        copy.instance_id = "copy".into();
        copy.timestamp = 1;
        copy.author_id = "other".into();
        let all = BTreeMap::from([("anchor".to_string(), anchor), ("other".to_string(), vec![copy])]);
        let org = build_org_dataset(&all, "anchor", &split, &policy, 1).unwrap();
        assert!(org.train.iter().chain(&org.val).all(|i| i.instance_id != "copy"));
    }

    #[test]
    fn tied_timestamps_are_excluded() {
        let policy = small_policy();
        let mut anchor: Vec<_> = (0..22).map(|i| inst(i, i as i64 * 10, "anchor")).collect();
        // last train (index 14) and first val (index 15) share a timestamp
        anchor[15].timestamp = anchor[14].timestamp;
        let split = split_developer(&anchor, &policy).unwrap();
        let cutoff = org_cutoff(&split).unwrap();
        assert!(cutoff < split.min_holdout_ts().unwrap());
        let all = BTreeMap::from([("anchor".to_string(), anchor)]);
        let org = build_org_dataset(&all, "anchor", &split, &policy, 1).unwrap();
        assert!(org.train.iter().all(|i| i.timestamp <= cutoff));
    }

    #[test]
    fn ineligible_anchor_is_rejected() {
        let policy = small_policy();
        let anchor: Vec<_> = (0..12).map(|i| inst(i, i as i64, "a")).collect();
        let split = split_developer(&anchor, &policy).unwrap();
        let all = BTreeMap::from([("a".to_string(), anchor)]);
        assert_eq!(build_org_dataset(&all, "a", &split, &policy, 1), Err(AssemblyError::AnchorIneligible("a".into())));
    }

    #[test]
    fn subset_sampling() {
        let pool = history(50);
        assert_eq!(build_org_subset(&pool, 50, 3).unwrap(), pool);
        assert!(build_org_subset(&pool, 0, 3).unwrap().is_empty());
        assert_eq!(build_org_subset(&pool, 20, 3).unwrap(), build_org_subset(&pool, 20, 3).unwrap());
        assert_eq!(build_org_subset(&pool, 20, 3).unwrap().len(), 20);
        assert_eq!(build_org_subset(&pool, 51, 3), Err(AssemblyError::TargetTooLarge { target: 51, available: 50 }));
    }

    #[test]
    fn baseline_plus_respects_time_and_repos() {
        let pool: Vec<_> = (0..40).map(|i| inst(i, i as i64, "g")).collect();
        let picked = build_baseline_plus(&pool, 20, 25, &BTreeSet::new(), 9).unwrap();
        assert_eq!(picked.len(), 20);
        assert!(picked.iter().all(|i| i.timestamp < 25));
        assert!(matches!(build_baseline_plus(&pool, 26, 25, &BTreeSet::new(), 9), Err(AssemblyError::TargetTooLarge { .. })));
        let org: BTreeSet<String> = ["r".to_string()].into();
        assert_eq!(build_baseline_plus(&pool, 1, 25, &org, 9), Err(AssemblyError::OrganizationLeak("r".into())));
    }

    #[test]
    fn repo_cap() {
        let methods = BTreeMap::from([("small".to_string(), (0..1200).collect::<Vec<_>>()), ("big".to_string(), (0..5000).collect())]);
        let capped = cap_methods_per_repo(&methods, 1500, 4);
        assert_eq!(capped["small"].len(), 1200);
        assert_eq!(capped["big"].len(), 1500);
        assert_eq!(capped, cap_methods_per_repo(&methods, 1500, 4));
        assert_ne!(capped["big"], cap_methods_per_repo(&methods, 1500, 5)["big"]);
    }

    #[test]
    fn repo_split_partitions() {
        let repos: Vec<String> = (0..10).map(|i| format!("g{i}")).collect();
        let (pre, fine) = split_repos(&repos, 40, 1);
        assert_eq!((pre.len(), fine.len()), (4, 6));
        assert!(pre.iter().all(|r| !fine.contains(r)));
    }

    fn method_with_tokens(n: usize) -> MethodUnit {
        // `void f ( ) { }` is 6 tokens, each `x ;` adds 2
        assert!(n >= 6 && n.is_multiple_of(2));
        let body = "x; ".repeat((n - 6) / 2);
        MethodUnit::from_text(&format!("void f() {{ {body}}}")).unwrap()
    }

    #[test]
    fn mlm_masks_ceiling_share() {
        let m = method_with_tokens(20);
        let rec = mlm_pretrain_instances(&m, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(rec.targets.len(), 3);
        assert_eq!(rec.input.matches("<extra_id_").count(), 3);
        assert_eq!(rec, mlm_pretrain_instances(&m, &mut ChaCha8Rng::seed_from_u64(0)));
        // restoring the targets gives the method back
        let mut restored = rec.input.clone();
        for (k, t) in rec.targets.iter().enumerate() {
            restored = restored.replacen(&mlm_sentinel(k), t, 1);
        }
        assert_eq!(restored, m.text);
    }

    #[test]
    fn mlm_single_token_masks_one() {
        let mut m = method_with_tokens(6);
        m.tokens.truncate(1);
        assert_eq!(mlm_pretrain_instances(&m, &mut ChaCha8Rng::seed_from_u64(0)).targets, vec!["void"]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn split_sizes_and_disjointness(n in 501usize..1800, dup_every in 3usize..50) {
            let mut h = history(n);
            for i in (0..n).step_by(dup_every) {
                let src = n - 1 - (i % 500);
                h[i].context = h[src].context.clone();
                h[i].target = h[src].target.clone();
            }
            let s = split_developer(&h, &SplitPolicy::default()).unwrap();
            let r = n - 500;
            prop_assert_eq!(s.test.len(), 500);
            prop_assert_eq!(s.val.len(), r - r * 9 / 10);
            let holdout: HashSet<String> = s.holdout().iter().map(dedup_key).collect();
            prop_assert!(s.train.iter().all(|i| !holdout.contains(&dedup_key(i))));
        }
    }
}
