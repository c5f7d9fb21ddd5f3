use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::forge::MaskLengthDistribution;
use crate::metrics::{DEFAULT_MAX_ORDER, DEFAULT_TRIVIAL_K};
use crate::seed::{bytes_hash, content_hash};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepoSpec {
    pub id: String,
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default = "default_branch")]
    pub branch: String,
}

fn default_branch() -> String {
    "main".to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    /// Authors kept after ranking by added lines.
    pub top_contributors: usize,
    /// Eligible developers kept, by instance count.
    pub top_developers: usize,
    pub methods_per_repo: usize,
    pub test_size: usize,
    pub min_train: usize,
    pub train_percent: usize,
    /// Share of generic repositories reserved for pre-training.
    pub generic_pretrain_percent: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            top_contributors: 1000,
            top_developers: 100,
            methods_per_repo: 1500,
            test_size: 500,
            min_train: 1000,
            train_percent: 90,
            generic_pretrain_percent: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrystalBleuConfig {
    pub k: usize,
    pub max_order: usize,
}

impl Default for CrystalBleuConfig {
    fn default() -> Self {
        CrystalBleuConfig { k: DEFAULT_TRIVIAL_K, max_order: DEFAULT_MAX_ORDER }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub organization: String,
    pub repos: Vec<RepoSpec>,
    #[serde(default)]
    pub generic_repos: Vec<RepoSpec>,
    pub seed: u64,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default)]
    pub crystal_bleu: CrystalBleuConfig,
    /// Target mask-length distribution for generic instances. When absent it
    /// is measured on the developer test sets.
    #[serde(default)]
    pub mask_distribution: Option<MaskLengthDistribution>,
    /// JSONL of identity overrides.
    #[serde(default)]
    pub overrides: Option<PathBuf>,
    /// JSON list of cost scenarios; the built-in defaults apply when absent.
    #[serde(default)]
    pub cost_scenarios: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Thread count; results do not depend on it.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// The fields that define a run's results. Locations and thread count are
/// left out so moved or re-parallelized runs keep their hash.
#[derive(Serialize)]
struct HashView<'a> {
    organization: &'a str,
    repos: Vec<(&'a str, &'a str)>,
    generic_repos: Vec<(&'a str, &'a str)>,
    seed: u64,
    caps: &'a Caps,
    crystal_bleu: &'a CrystalBleuConfig,
    mask_distribution: &'a Option<MaskLengthDistribution>,
    overrides: Option<String>,
    cost_scenarios: Option<String>,
}

fn repo_keys(v: &[RepoSpec]) -> Vec<(&str, &str)> {
    v.iter().map(|r| (r.id.as_str(), r.branch.as_str())).collect()
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

impl RunConfig {
    /// Parses, resolves relative paths against the file's directory and validates.
    pub fn load(path: &Path) -> Result<RunConfig, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for r in self.repos.iter_mut().chain(self.generic_repos.iter_mut()) {
            fix(&mut r.path);
        }
        fix(&mut self.output_dir);
        if let Some(p) = self.overrides.as_mut() {
            fix(p);
        }
        if let Some(p) = self.cost_scenarios.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.organization.trim().is_empty() {
            return Err(config_err("organization name is empty"));
        }
        if self.repos.is_empty() {
            return Err(config_err("no organization repositories configured"));
        }
        let mut ids = BTreeSet::new();
        for r in self.repos.iter().chain(&self.generic_repos) {
            if r.id.trim().is_empty() {
                return Err(config_err("repository id is empty"));
            }
            if !ids.insert(r.id.as_str()) {
                return Err(config_err(format!("repository id {:?} is used twice", r.id)));
            }
        }
        let c = &self.caps;
        let positive = [
            ("top_contributors", c.top_contributors),
            ("top_developers", c.top_developers),
            ("methods_per_repo", c.methods_per_repo),
            ("test_size", c.test_size),
            ("min_train", c.min_train),
            ("train_percent", c.train_percent),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(config_err(format!("caps.{name} must be positive")));
        }
        if c.train_percent >= 100 {
            return Err(config_err("caps.train_percent must be below 100"));
        }
        if c.generic_pretrain_percent > 100 {
            return Err(config_err("caps.generic_pretrain_percent must be at most 100"));
        }
        if self.crystal_bleu.max_order == 0 {
            return Err(config_err("crystal_bleu.max_order must be positive"));
        }
        if self.workers == Some(0) {
            return Err(config_err("workers must be positive"));
        }
        if let Some(d) = &self.mask_distribution {
            if d.min > d.max || !(d.min as f64..=d.max as f64).contains(&d.median) || !(d.min as f64..=d.max as f64).contains(&d.mean) {
                return Err(config_err("mask_distribution must satisfy min ≤ median, mean ≤ max"));
            }
        }
        Ok(())
    }

    pub fn split_policy(&self) -> crate::assembly::SplitPolicy {
        crate::assembly::SplitPolicy {
            test_size: self.caps.test_size,
            train_percent: self.caps.train_percent,
            min_train: self.caps.min_train,
        }
    }

    /// Hash of everything that affects results, including the contents of
    /// the override and scenario files.
    pub fn config_hash(&self) -> Result<String, PipelineError> {
        let file_hash = |p: &Option<PathBuf>| -> Result<Option<String>, PipelineError> {
            p.as_ref()
                .map(|p| std::fs::read(p).map(|b| bytes_hash(&b)).map_err(|e| config_err(format!("{}: {e}", p.display()))))
                .transpose()
        };
        let view = HashView {
            organization: &self.organization,
            repos: repo_keys(&self.repos),
            generic_repos: repo_keys(&self.generic_repos),
            seed: self.seed,
            caps: &self.caps,
            crystal_bleu: &self.crystal_bleu,
            mask_distribution: &self.mask_distribution,
            overrides: file_hash(&self.overrides)?,
            cost_scenarios: file_hash(&self.cost_scenarios)?,
        };
        let json = serde_json::to_string(&view).expect("config serializes");
        Ok(content_hash(&["run-config", &json])[..16].to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> RunConfig {
        serde_json::from_str(r#"{"organization":"acme","repos":[{"id":"a","path":"repos/a"}],"seed":7}"#).unwrap()
    }

    #[test]
    fn defaults_mirror_published_caps() {
        let cfg = minimal();
        assert_eq!(cfg.caps, Caps::default());
        assert_eq!((cfg.caps.top_developers, cfg.caps.methods_per_repo, cfg.caps.test_size, cfg.caps.min_train), (100, 1500, 500, 1000));
        assert_eq!(cfg.repos[0].branch, "main");
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn seed_is_required() {
        let r: Result<RunConfig, _> = serde_json::from_str(r#"{"organization":"acme","repos":[{"id":"a","path":"p"}]}"#);
        assert!(r.is_err());
    }

    #[test]
    fn zero_caps_and_duplicate_ids_rejected() {
        let mut cfg = minimal();
        cfg.caps.test_size = 0;
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
        let mut cfg = minimal();
        cfg.generic_repos.push(cfg.repos[0].clone());
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
    }

    #[test]
    fn hash_ignores_locations_and_workers() {
        let a = minimal();
        let mut b = minimal();
        b.output_dir = PathBuf::from("/elsewhere");
        b.repos[0].path = PathBuf::from("/moved");
        b.workers = Some(8);
        assert_eq!(a.config_hash().unwrap(), b.config_hash().unwrap());
        b.seed = 8;
        assert_ne!(a.config_hash().unwrap(), b.config_hash().unwrap());
    }
}
