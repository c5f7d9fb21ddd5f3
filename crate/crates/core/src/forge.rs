//! Segmentation of added lines and fill-in-the-middle masking.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::java::{MethodUnit, SourceToken};
use crate::seed::{content_hash, rng_for};

pub const SENTINEL: &str = "<FILL_ME>";
pub const MIN_MASKED: usize = 3;
pub const MAX_MASKED: usize = 50;
/// Lines a block may hold, not counting empty and single-token lines.
pub const MAX_COUNTED_LINES: usize = 3;
pub const MAX_GENERIC_PER_METHOD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    IsolatedLine,
    Block,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSegment {
    pub line_numbers: Vec<u32>,
    pub counted_line_count: usize,
    pub kind: SegmentKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub repo_id: String,
    pub commit_sha: String,
    pub author_id: String,
    pub timestamp: i64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionInstance {
    #[serde(rename = "id")]
    pub instance_id: String,
    pub context: String,
    pub target: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub segment_tokens: usize,
    pub kind: SegmentKind,
    #[serde(rename = "repo")]
    pub repo_id: String,
    #[serde(rename = "sha")]
    pub commit_sha: String,
    #[serde(rename = "author")]
    pub author_id: String,
    #[serde(rename = "ts")]
    pub timestamp: i64,
    pub file: String,
    pub signature: String,
}

impl CompletionInstance {
    /// The method text with the target put back in place of the sentinel.
    pub fn reconstruct(&self) -> String {
        self.context.replacen(SENTINEL, &self.target, 1)
    }
}

/// A line counts towards the block limit when it has at least two tokens.
fn is_counted(method: &MethodUnit, line: u32) -> bool {
    method.tokens_on_line(line).nth(1).is_some()
}

/// Splits the sorted added-line set `lines` into isolated lines and blocks.
///
/// Runs of consecutive line numbers are cut greedily so that no block holds
/// more than [`MAX_COUNTED_LINES`] counted lines; uncounted lines join the
/// block being built. A run without any counted line stays one block.
pub fn segment(lines: &[u32], method: &MethodUnit) -> Vec<MaskSegment> {
    let mut sorted = lines.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut runs: Vec<Vec<u32>> = Vec::new();
    for l in sorted {
        match runs.last_mut() {
            Some(run) if run.last() == Some(&(l - 1)) => run.push(l),
            _ => runs.push(vec![l]),
        }
    }

    let mut out = Vec::new();
    for run in runs {
        if run.len() == 1 {
            out.push(MaskSegment {
                counted_line_count: usize::from(is_counted(method, run[0])),
                line_numbers: run,
                kind: SegmentKind::IsolatedLine,
            });
            continue;
        }
        let mut current: Vec<u32> = Vec::new();
        let mut counted = 0;
        for l in run {
            let c = is_counted(method, l);
            if c && counted == MAX_COUNTED_LINES {
                out.push(MaskSegment {
                    line_numbers: std::mem::take(&mut current),
                    counted_line_count: counted,
                    kind: SegmentKind::Block,
                });
                counted = 0;
            }
            current.push(l);
            counted += usize::from(c);
        }
        out.push(MaskSegment { line_numbers: current, counted_line_count: counted, kind: SegmentKind::Block });
    }
    out
}

/// Significant tokens that start on one of the segment's lines.
pub fn segment_tokens<'m>(segment: &MaskSegment, method: &'m MethodUnit) -> Vec<&'m SourceToken> {
    method.tokens.iter().filter(|t| segment.line_numbers.binary_search(&t.line).is_ok()).collect()
}

/// Largest legal mask length for a segment of `n_tokens`, or `None` when no
/// length is legal.
pub fn mask_capacity(n_tokens: usize) -> Option<usize> {
    (n_tokens > MIN_MASKED).then(|| MAX_MASKED.min(n_tokens - 1))
}

/// Masks the last `n` tokens of `segment`, with `n` uniform over
/// `[3, min(50, N − 1)]`. `None` when `N ≤ 3`.
pub fn mask<R: Rng>(segment: &MaskSegment, method: &MethodUnit, prov: &Provenance, rng: &mut R) -> Option<CompletionInstance> {
    let tokens = segment_tokens(segment, method);
    let cap = mask_capacity(tokens.len())?;
    let n = rng.random_range(MIN_MASKED..=cap);
    mask_last(segment, method, prov, n)
}

/// Masks exactly the last `n` segment tokens. `n` must be legal for the segment.
pub fn mask_last(segment: &MaskSegment, method: &MethodUnit, prov: &Provenance, n: usize) -> Option<CompletionInstance> {
    let tokens = segment_tokens(segment, method);
    let cap = mask_capacity(tokens.len())?;
    if !(MIN_MASKED..=cap).contains(&n) || method.text.contains(SENTINEL) {
        return None;
    }
    let first = tokens[tokens.len() - n];
    let last = tokens[tokens.len() - 1];
    let a = first.offset - method.start_offset;
    let b = last.end() - method.start_offset;
    let context = format!("{}{}{}", &method.text[..a], SENTINEL, &method.text[b..]);
    let target = method.text[a..b].to_string();
    let ts = prov.timestamp.to_string();
    let hash = content_hash(&[
        &context,
        &target,
        &prov.repo_id,
        &prov.commit_sha,
        &prov.author_id,
        &ts,
        &prov.file,
        &method.signature,
    ]);
    Some(CompletionInstance {
        instance_id: hash[..32].to_string(),
        context,
        target,
        n,
        segment_tokens: tokens.len(),
        kind: segment.kind,
        repo_id: prov.repo_id.clone(),
        commit_sha: prov.commit_sha.clone(),
        author_id: prov.author_id.clone(),
        timestamp: prov.timestamp,
        file: prov.file.clone(),
        signature: method.signature.clone(),
    })
}

/// All instances for one changed method: segments `lines`, then masks each
/// segment with its own sub-seed derived from the provenance.
pub fn forge_instances(method: &MethodUnit, lines: &[u32], prov: &Provenance, seed: u64) -> Vec<CompletionInstance> {
    segment(lines, method)
        .iter()
        .filter_map(|seg| {
            let first = seg.line_numbers[0].to_string();
            let mut rng = rng_for(
                seed,
                &["forge", &prov.repo_id, &prov.commit_sha, &prov.file, &method.signature, &first],
            );
            mask(seg, method, prov, &mut rng)
        })
        .collect()
}

/// Summary of the mask lengths of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskLengthDistribution {
    pub mean: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
}

impl MaskLengthDistribution {
    /// Mask lengths of the Apache developer test sets.
    pub const APACHE: MaskLengthDistribution = MaskLengthDistribution { mean: 11.0, median: 8.0, min: 3, max: 50 };
    /// Mask lengths of the Spring developer test sets.
    pub const SPRING: MaskLengthDistribution = MaskLengthDistribution { mean: 13.0, median: 10.0, min: 3, max: 50 };

    pub fn from_lengths(lengths: &[usize]) -> Option<MaskLengthDistribution> {
        if lengths.is_empty() {
            return None;
        }
        let mut sorted = lengths.to_vec();
        sorted.sort_unstable();
        let len = sorted.len();
        let median = if len % 2 == 1 {
            sorted[len / 2] as f64
        } else {
            (sorted[len / 2 - 1] + sorted[len / 2]) as f64 / 2.0
        };
        Some(MaskLengthDistribution {
            mean: sorted.iter().sum::<usize>() as f64 / len as f64,
            median,
            min: sorted[0],
            max: sorted[len - 1],
        })
    }
}

/// Discretized, clipped log-normal over mask lengths:
/// `n = min(base + ⌊X⌋, cap)` with `X ~ LogNormal(mu, sigma)` and `cap` the
/// per-segment capacity (also bounded by the target maximum).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskLengthModel {
    pub base: usize,
    pub max: usize,
    /// `None` for a degenerate target where every length equals `base`.
    pub params: Option<(f64, f64)>,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl MaskLengthModel {
    /// Fits `mu` to the median and `sigma` to the mean, for a corpus whose
    /// segment capacities are `capacities` (each `min(50, N − 1)`).
    pub fn fit(dist: &MaskLengthDistribution, capacities: &[usize]) -> MaskLengthModel {
        let base = dist.min.max(MIN_MASKED);
        let max = dist.max.min(MAX_MASKED).max(base);
        if base == max || capacities.is_empty() {
            return MaskLengthModel { base, max, params: None };
        }
        let mut hist: BTreeMap<usize, f64> = BTreeMap::new();
        for &c in capacities {
            *hist.entry(c.min(max)).or_default() += 1.0;
        }
        let total = capacities.len() as f64;
        let weighted: Vec<(usize, f64)> = hist.into_iter().map(|(c, w)| (c, w / total)).collect();
        let probe = |mu: f64, sigma: f64| MaskLengthModel { base, max, params: Some((mu, sigma)) };

        let fit_mu = |sigma: f64| {
            let (mut lo, mut hi) = (-8.0f64, 8.0f64);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let m = probe(mid, sigma);
                let below = m.mixture_cdf(&weighted, dist.median - 1.0);
                let at = m.mixture_cdf(&weighted, dist.median);
                if 0.5 * (below + at) > 0.5 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };

        let (mut lo, mut hi) = (0.05f64, 4.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let m = probe(fit_mu(mid), mid);
            if m.mixture_mean(&weighted) < dist.mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let sigma = 0.5 * (lo + hi);
        probe(fit_mu(sigma), sigma)
    }

    /// `P(base + ⌊X⌋ ≤ v)` before clipping.
    fn raw_cdf(&self, v: f64) -> f64 {
        let Some((mu, sigma)) = self.params else {
            return if v >= self.base as f64 { 1.0 } else { 0.0 };
        };
        // base + ⌊X⌋ ≤ v  ⇔  X < ⌊v⌋ − base + 1
        let x = v.floor() - self.base as f64 + 1.0;
        if x <= 0.0 {
            0.0
        } else {
            std_normal_cdf((x.ln() - mu) / sigma)
        }
    }

    fn cdf(&self, v: f64, cap: usize) -> f64 {
        if v >= cap as f64 {
            1.0
        } else {
            self.raw_cdf(v)
        }
    }

    fn mixture_cdf(&self, weighted: &[(usize, f64)], v: f64) -> f64 {
        weighted.iter().map(|&(c, w)| w * self.cdf(v, c)).sum()
    }

    /// Expected length for capacity `cap`.
    pub fn expected(&self, cap: usize) -> f64 {
        let cap = cap.min(self.max);
        (self.base..cap).map(|v| 1.0 - self.raw_cdf(v as f64)).sum::<f64>() + self.base.min(cap) as f64
    }

    fn mixture_mean(&self, weighted: &[(usize, f64)]) -> f64 {
        weighted.iter().map(|&(c, w)| w * self.expected(c)).sum()
    }

    pub fn sample<R: Rng>(&self, cap: usize, rng: &mut R) -> usize {
        let cap = cap.min(self.max);
        let Some((mu, sigma)) = self.params else {
            return self.base.min(cap);
        };
        let x: f64 = LogNormal::new(mu, sigma).expect("positive sigma").sample(rng);
        let steps = if x.is_finite() { x.floor().min(MAX_MASKED as f64) as usize } else { MAX_MASKED };
        (self.base + steps).min(cap)
    }
}

/// Lines eligible for generic masking: everything after the declaration line.
fn body_lines(method: &MethodUnit) -> Vec<u32> {
    (method.start_line + 1..=method.end_line).collect()
}

/// Up to three distinct maskable segments of the method body, in source order.
pub fn select_generic_segments<R: Rng>(method: &MethodUnit, rng: &mut R) -> Vec<MaskSegment> {
    let lines = body_lines(method);
    if lines.is_empty() {
        return Vec::new();
    }
    let candidates: Vec<MaskSegment> = segment(&lines, method)
        .into_iter()
        .filter(|s| mask_capacity(segment_tokens(s, method).len()).is_some())
        .collect();
    let k = candidates.len().min(MAX_GENERIC_PER_METHOD);
    let mut picked = index::sample(rng, candidates.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| candidates[i].clone()).collect()
}

/// Capacities of the segments [`generate_generic`] would mask with this rng.
pub fn generic_capacities<R: Rng>(method: &MethodUnit, rng: &mut R) -> Vec<usize> {
    select_generic_segments(method, rng)
        .iter()
        .filter_map(|s| mask_capacity(segment_tokens(s, method).len()))
        .collect()
}

/// Up to three instances of one method with lengths drawn from `model`.
pub fn generate_generic<R: Rng>(method: &MethodUnit, model: &MaskLengthModel, prov: &Provenance, rng: &mut R) -> Vec<CompletionInstance> {
    let segments = select_generic_segments(method, rng);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for seg in &segments {
        let Some(cap) = mask_capacity(segment_tokens(seg, method).len()) else {
            continue;
        };
        let n = model.sample(cap, rng);
        if let Some(inst) = mask_last(seg, method, prov, n) {
            if seen.insert((inst.context.clone(), inst.target.clone())) {
                out.push(inst);
            }
        }
    }
    out
}

/// One method of the generic pool together with where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericMethod {
    pub provenance: Provenance,
    pub method: MethodUnit,
}

impl GenericMethod {
    fn labels(&self) -> [&str; 5] {
        let p = &self.provenance;
        ["generic", &p.repo_id, &p.commit_sha, &p.file, &self.method.signature]
    }
}

/// Generates the generic corpus in two passes: the first collects segment
/// capacities and fits the length model, the second masks. Each method uses
/// the same sub-seeded rng in both passes.
pub fn generate_generic_corpus(
    methods: &[GenericMethod],
    dist: &MaskLengthDistribution,
    seed: u64,
) -> (Vec<CompletionInstance>, MaskLengthModel) {
    let capacities: Vec<usize> = methods
        .iter()
        .flat_map(|m| generic_capacities(&m.method, &mut rng_for(seed, &m.labels())))
        .collect();
    let model = MaskLengthModel::fit(dist, &capacities);
    let instances = methods
        .iter()
        .flat_map(|m| generate_generic(&m.method, &model, &m.provenance, &mut rng_for(seed, &m.labels())))
        .collect();
    (instances, model)
}
