//! Author alias merging.
//!
//! Raw `(name, email)` pairs are merged with a union-find over three rules:
//! same email (case-insensitive), same email local-part of at least
//! [`MIN_LOCAL_PART`] characters, and same normalized name. An optional
//! override list pins aliases to fixed identities; pinned aliases only merge
//! with aliases pinned to the same id.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::seed::content_hash;

pub const MIN_LOCAL_PART: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Alias {
    pub name: String,
    pub email: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawAuthor {
    pub name: String,
    pub email: String,
    pub added_lines: u64,
}

/// One line of the override file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityOverride {
    pub name: String,
    pub email: String,
    pub author_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorIdentity {
    pub author_id: String,
    pub aliases: BTreeSet<Alias>,
    pub added_lines_total: u64,
}

/// Lowercase, strip diacritics, drop punctuation, sort whitespace tokens.
pub fn normalize_name(name: &str) -> String {
    let cleaned: String = name
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    let mut tokens: Vec<&str> = cleaned.split_whitespace().collect();
    tokens.sort_unstable();
    tokens.join(" ")
}

fn email_key(email: &str) -> String {
    email.trim().to_lowercase()
}

fn local_part(email: &str) -> Option<String> {
    let lower = email_key(email);
    let (local, _) = lower.split_once('@')?;
    (local.chars().count() >= MIN_LOCAL_PART).then(|| local.to_string())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index wins so the structure does not depend on call order
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub fn resolve_identities(raw: &[RawAuthor]) -> Vec<AuthorIdentity> {
    resolve_identities_with(raw, &[])
}

pub fn resolve_identities_with(raw: &[RawAuthor], overrides: &[IdentityOverride]) -> Vec<AuthorIdentity> {
    let mut totals: BTreeMap<Alias, u64> = BTreeMap::new();
    for r in raw {
        *totals.entry(Alias { name: r.name.clone(), email: r.email.clone() }).or_default() += r.added_lines;
    }
    let aliases: Vec<Alias> = totals.keys().cloned().collect();
    let pinned: HashMap<Alias, &str> = overrides
        .iter()
        .map(|o| (Alias { name: o.name.clone(), email: o.email.clone() }, o.author_id.as_str()))
        .collect();

    let mut uf = UnionFind::new(aliases.len());
    let mut first_by_key: HashMap<(u8, String), usize> = HashMap::new();
    for (i, alias) in aliases.iter().enumerate() {
        let keys: Vec<(u8, String)> = match pinned.get(alias) {
            Some(id) => vec![(0, id.to_string())],
            None => {
                let mut keys = vec![(1, email_key(&alias.email))];
                if let Some(local) = local_part(&alias.email) {
                    keys.push((2, local));
                }
                let norm = normalize_name(&alias.name);
                if !norm.is_empty() {
                    keys.push((3, norm));
                }
                keys
            }
        };
        for key in keys {
            if key.1.is_empty() {
                continue;
            }
            match first_by_key.get(&key) {
                Some(&j) => uf.union(i, j),
                None => {
                    first_by_key.insert(key, i);
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..aliases.len() {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut identities: Vec<AuthorIdentity> = groups
        .into_values()
        .map(|members| {
            let set: BTreeSet<Alias> = members.iter().map(|&i| aliases[i].clone()).collect();
            let added_lines_total = members.iter().map(|&i| totals[&aliases[i]]).sum();
            let author_id = members
                .iter()
                .find_map(|&i| pinned.get(&aliases[i]).map(|s| s.to_string()))
                .unwrap_or_else(|| derived_id(&set));
            AuthorIdentity { author_id, aliases: set, added_lines_total }
        })
        .collect();
    identities.sort_by(|a, b| a.author_id.cmp(&b.author_id));
    identities
}

fn derived_id(aliases: &BTreeSet<Alias>) -> String {
    let first = aliases.iter().next().expect("identity has at least one alias");
    let hash = content_hash(&[&email_key(&first.email), &first.name]);
    format!("dev-{}", &hash[..12])
}

/// Descending by added lines, ties by `author_id`; the first `k`.
pub fn top_contributors(identities: &[AuthorIdentity], k: usize) -> Vec<AuthorIdentity> {
    let mut sorted = identities.to_vec();
    sorted.sort_by(|a, b| b.added_lines_total.cmp(&a.added_lines_total).then_with(|| a.author_id.cmp(&b.author_id)));
    sorted.truncate(k);
    sorted
}

/// Lookup from raw alias to the resolved `author_id`.
pub fn alias_index(identities: &[AuthorIdentity]) -> HashMap<Alias, String> {
    identities
        .iter()
        .flat_map(|id| id.aliases.iter().map(move |a| (a.clone(), id.author_id.clone())))
        .collect()
}
