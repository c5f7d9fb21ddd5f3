//! Prediction scoring: token-level Exact Match and CrystalBLEU.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forge::CompletionInstance;
use crate::java::significant;

pub const DEFAULT_TRIVIAL_K: usize = 500;
pub const DEFAULT_MAX_ORDER: usize = 4;
/// Stand-in for a zero modified precision inside the geometric mean.
pub const ZERO_PRECISION: f64 = 1e-9;

pub type NGram = Vec<String>;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("prediction for unknown instance {0}")]
    DatasetMismatch(String),
    #[error("model {model} has more than one prediction for {instance_id}")]
    DuplicatePrediction { model: String, instance_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(rename = "id")]
    pub instance_id: String,
    #[serde(rename = "model")]
    pub model_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub instance_id: String,
    pub em: bool,
    pub crystal_bleu: f64,
    pub bleu: f64,
}

/// Significant token texts; comments and whitespace are dropped.
pub fn code_tokens(text: &str) -> Vec<String> {
    significant(text).into_iter().map(|t| t.text).collect()
}

pub fn exact_match(prediction: &str, target: &str) -> bool {
    code_tokens(prediction) == code_tokens(target)
}

fn ngram_counts(tokens: &[String], order: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= order {
        for w in tokens.windows(order) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// The `k` most frequent n-grams of orders `1..=max_order` across `corpus`,
/// frequency ties broken by lexicographic n-gram order.
pub fn trivially_shared_ngrams(corpus: &[Vec<String>], k: usize, max_order: usize) -> HashSet<NGram> {
    if k == 0 {
        return HashSet::new();
    }
    let mut freq: HashMap<&[String], usize> = HashMap::new();
    for tokens in corpus {
        for order in 1..=max_order {
            for (g, c) in ngram_counts(tokens, order) {
                *freq.entry(g).or_insert(0) += c;
            }
        }
    }
    let mut ranked: Vec<(&[String], usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.into_iter().take(k).map(|(g, _)| g.to_vec()).collect()
}

/// CrystalBLEU of one pair and whether it fell back to plain BLEU because
/// every reference n-gram was excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub score: f64,
    pub plain_fallback: bool,
}

fn bleu_core(candidate: &[String], reference: &[String], trivial: &HashSet<NGram>, max_order: usize) -> Option<f64> {
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for order in 1..=max_order {
        let keep = |g: &&[String]| trivial.is_empty() || !trivial.contains(*g);
        let reference_counts: HashMap<&[String], usize> =
            ngram_counts(reference, order).into_iter().filter(|(g, _)| keep(g)).collect();
        if reference_counts.is_empty() {
            continue;
        }
        let candidate_counts: Vec<(&[String], usize)> =
            ngram_counts(candidate, order).into_iter().filter(|(g, _)| keep(g)).collect();
        let total: usize = candidate_counts.iter().map(|(_, c)| c).sum();
        let clipped: usize =
            candidate_counts.iter().map(|(g, c)| (*c).min(reference_counts.get(g).copied().unwrap_or(0))).sum();
        let p = if clipped == 0 { ZERO_PRECISION } else { clipped as f64 / total as f64 };
        log_sum += p.ln();
        orders += 1;
    }
    if orders == 0 {
        return None;
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Some(bp * (log_sum / orders as f64).exp())
}

pub fn crystal_bleu_scored(candidate: &[String], reference: &[String], trivial: &HashSet<NGram>, max_order: usize) -> BleuScore {
    if candidate.is_empty() {
        return BleuScore { score: 0.0, plain_fallback: false };
    }
    match bleu_core(candidate, reference, trivial, max_order) {
        Some(score) => BleuScore { score, plain_fallback: false },
        None if trivial.is_empty() => BleuScore { score: 0.0, plain_fallback: false },
        None => BleuScore { score: bleu(candidate, reference, max_order), plain_fallback: true },
    }
}

/// Modified n-gram precision BLEU with brevity penalty after removing every
/// n-gram in `trivial`. Orders without reference n-grams are left out of the
/// geometric mean; zero precisions count as [`ZERO_PRECISION`].
pub fn crystal_bleu(candidate: &[String], reference: &[String], trivial: &HashSet<NGram>, max_order: usize) -> f64 {
    crystal_bleu_scored(candidate, reference, trivial, max_order).score
}

/// CrystalBLEU with nothing excluded.
pub fn bleu(candidate: &[String], reference: &[String], max_order: usize) -> f64 {
    if candidate.is_empty() {
        return 0.0;
    }
    bleu_core(candidate, reference, &HashSet::new(), max_order).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub test_size: usize,
    pub em_count: usize,
    pub em_percent: f64,
    pub mean_crystal_bleu: f64,
    pub mean_bleu: f64,
    pub missing: usize,
    /// Pairs scored with plain BLEU because all reference n-grams were trivial.
    pub plain_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub dataset_id: String,
    pub trivial_k: usize,
    pub max_order: usize,
    pub models: BTreeMap<String, ModelSummary>,
    /// Per-model rows in test-set order.
    pub rows: BTreeMap<String, Vec<ScoreRow>>,
}

impl CorpusReport {
    /// Score rows as CSV: `model,instance_id,em,crystal_bleu,bleu`.
    pub fn rows_csv(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            model: &'a str,
            instance_id: &'a str,
            em: bool,
            crystal_bleu: f64,
            bleu: f64,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for (model, rows) in &self.rows {
            for r in rows {
                w.serialize(Line {
                    model,
                    instance_id: &r.instance_id,
                    em: r.em,
                    crystal_bleu: r.crystal_bleu,
                    bleu: r.bleu,
                })
                .expect("in-memory csv");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

/// Scores every model's predictions on `test`. Missing predictions score
/// `em = false`, `cb = 0`. Models listed in `declared` are reported even
/// when they have no predictions.
pub fn corpus_report(
    dataset_id: &str,
    test: &[CompletionInstance],
    predictions: &[PredictionRecord],
    declared: &[String],
    trivial: &HashSet<NGram>,
    trivial_k: usize,
    max_order: usize,
) -> Result<CorpusReport, MetricsError> {
    let known: HashSet<&str> = test.iter().map(|i| i.instance_id.as_str()).collect();
    let mut by_model: BTreeMap<&str, HashMap<&str, &str>> =
        declared.iter().map(|m| (m.as_str(), HashMap::new())).collect();
    for p in predictions {
        if !known.contains(p.instance_id.as_str()) {
            return Err(MetricsError::DatasetMismatch(p.instance_id.clone()));
        }
        let slot = by_model.entry(&p.model_id).or_default();
        if slot.insert(&p.instance_id, &p.text).is_some() {
            return Err(MetricsError::DuplicatePrediction { model: p.model_id.clone(), instance_id: p.instance_id.clone() });
        }
    }
    let references: Vec<Vec<String>> = test.par_iter().map(|i| code_tokens(&i.target)).collect();

    let mut models = BTreeMap::new();
    let mut rows = BTreeMap::new();
    for (model, preds) in by_model {
        let scored: Vec<(ScoreRow, bool)> = test
            .par_iter()
            .zip(&references)
            .map(|(inst, reference)| match preds.get(inst.instance_id.as_str()) {
                None => (ScoreRow { instance_id: inst.instance_id.clone(), em: false, crystal_bleu: 0.0, bleu: 0.0 }, false),
                Some(text) => {
                    let cand = code_tokens(text);
                    let cb = crystal_bleu_scored(&cand, reference, trivial, max_order);
                    let row = ScoreRow {
                        instance_id: inst.instance_id.clone(),
                        em: &cand == reference,
                        crystal_bleu: cb.score,
                        bleu: bleu(&cand, reference, max_order),
                    };
                    (row, cb.plain_fallback)
                }
            })
            .collect();
        let n = test.len();
        let em_count = scored.iter().filter(|(r, _)| r.em).count();
        let mean = |f: fn(&ScoreRow) -> f64| if n == 0 { 0.0 } else { scored.iter().map(|(r, _)| f(r)).sum::<f64>() / n as f64 };
        models.insert(
            model.to_string(),
            ModelSummary {
                test_size: n,
                em_count,
                em_percent: if n == 0 { 0.0 } else { 100.0 * em_count as f64 / n as f64 },
                mean_crystal_bleu: mean(|r| r.crystal_bleu),
                mean_bleu: mean(|r| r.bleu),
                missing: n - preds.len(),
                plain_fallbacks: scored.iter().filter(|(_, f)| *f).count(),
            },
        );
        rows.insert(model.to_string(), scored.into_iter().map(|(r, _)| r).collect());
    }
    Ok(CorpusReport { dataset_id: dataset_id.to_string(), trivial_k, max_order, models, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::SegmentKind;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn set(grams: &[&str]) -> HashSet<NGram> {
        grams.iter().map(|g| toks(g)).collect()
    }

    #[test]
    fn em_is_token_level() {
        assert!(exact_match("a+b;", "a + b;"));
        assert!(!exact_match("a+b;", "a-b;"));
        assert!(exact_match("", ""));
        assert!(exact_match("x = 1; // c", "x=1;"));
    }

    #[test]
    fn trivial_ngram_extraction() {
        assert!(trivially_shared_ngrams(&[toks("a a a b")], 0, 1).is_empty());
        assert_eq!(trivially_shared_ngrams(&[toks("a a a b")], 1, 1), set(&["a"]));
        assert_eq!(trivially_shared_ngrams(&[toks("a a a b")], 10, 1), set(&["a", "b"]));
        // b and c tie at 2; b wins lexicographically
        assert_eq!(trivially_shared_ngrams(&[toks("c b a"), toks("b c")], 1, 1), set(&["b"]));
        // x, y and "x y" all occur twice; lexicographic order puts "x y" before "y"
        assert_eq!(trivially_shared_ngrams(&[toks("x y x y")], 2, 2), set(&["x", "x y"]));
    }

    #[test]
    fn identity_scores_one() {
        let x = toks("if ( a == b ) return c ;");
        assert_eq!(crystal_bleu(&x, &x, &HashSet::new(), 4), 1.0);
        assert_eq!(crystal_bleu(&x, &x, &set(&["(", ")", ";"]), 4), 1.0);
    }

    #[test]
    fn hand_computed_pair() {
        // cand: a b c d ; ref: a b c e
        // p1 = 3/4, p2 = 2/3, p3 = 1/2, p4 = 0 → 1e-9; equal lengths, BP = 1
        let c = toks("a b c d");
        let r = toks("a b c e");
        let expected = (0.75f64 * (2.0 / 3.0) * 0.5 * 1e-9).powf(0.25);
        assert!((bleu(&c, &r, 4) - expected).abs() < 1e-15);
        // excluding "a" and "a b": p1 = 2/3, p2 = 1/2, p3 = 1/2, p4 = 1e-9
        let cb = crystal_bleu(&c, &r, &set(&["a", "a b"]), 4);
        let expected = ((2.0 / 3.0) * 0.5f64 * 0.5 * 1e-9).powf(0.25);
        assert!((cb - expected).abs() < 1e-15);
    }

    #[test]
    fn brevity_penalty_and_short_references() {
        // ref has no 3- or 4-grams: those orders are skipped
        let c = toks("x y");
        let r = toks("x y");
        assert_eq!(bleu(&c, &r, 4), 1.0);
        let short = toks("x");
        let long = toks("x y z");
        // orders 2 and 3 exist in the reference, so they stay in the mean at 1e-9
        let expected = (1.0f64 - 3.0).exp() * (1e-9f64 * 1e-9).powf(1.0 / 3.0);
        assert!((bleu(&short, &long, 4) - expected).abs() < 1e-15);
        assert_eq!(bleu(&[], &long, 4), 0.0);
    }

    #[test]
    fn sharing_only_trivial_ngrams_scores_lower() {
        let c = toks("( ) ; foo");
        let r = toks("( ) ; bar");
        let plain = bleu(&c, &r, 4);
        let cb = crystal_bleu(&c, &r, &set(&["(", ")", ";", "( )", ") ;", "( ) ;"]), 4);
        assert!(cb < plain, "{cb} vs {plain}");
    }

    #[test]
    fn fully_trivial_reference_falls_back() {
        let x = toks("( )");
        let s = crystal_bleu_scored(&x, &x, &set(&["(", ")", "( )"]), 4);
        assert!(s.plain_fallback);
        assert_eq!(s.score, 1.0);
    }

    fn instance(id: &str, target: &str) -> CompletionInstance {
        CompletionInstance {
            instance_id: id.into(),
            context: "<FILL_ME>".into(),
            target: target.into(),
            n: 3,
            segment_tokens: 4,
            kind: SegmentKind::IsolatedLine,
            repo_id: "r".into(),
            commit_sha: "s".into(),
            author_id: "a".into(),
            timestamp: 1,
            file: "F.java".into(),
            signature: "void f()".into(),
        }
    }

    fn pred(id: &str, model: &str, text: &str) -> PredictionRecord {
        PredictionRecord { instance_id: id.into(), model_id: model.into(), text: text.into() }
    }

    #[test]
    fn four_instance_report() {
        let test = vec![
            instance("1", "a + b;"),
            instance("2", "return x;"),
            instance("3", "foo(a, b);"),
            instance("4", "i++;"),
        ];
        let preds = vec![
            pred("1", "m", "a+b;"),
            pred("2", "m", "return x ;"),
            pred("3", "m", "foo(a, c);"),
            pred("4", "m", "j--;"),
        ];
        let report = corpus_report("d", &test, &preds, &[], &HashSet::new(), 0, 4).unwrap();
        let m = &report.models["m"];
        assert_eq!(m.em_percent, 50.0);
        // pair 3: ref foo ( a , b ) ; cand foo ( a , c ) ; (7 tokens each)
        //   p1 = 6/7, p2 = 4/6, p3 = 2/5, p4 = 1/4
        // pair 4: ref i ++ ; cand j -- ; (3 tokens each): p1 = 1/3, p2 = 0, p3 = 0
        let p3 = ((6.0f64 / 7.0) * (4.0 / 6.0) * (2.0 / 5.0) * 0.25).powf(0.25);
        let p4 = ((1.0f64 / 3.0) * 1e-9 * 1e-9).powf(1.0 / 3.0);
        let expected = (1.0 + 1.0 + p3 + p4) / 4.0;
        assert!((m.mean_crystal_bleu - expected).abs() < 1e-12, "{} vs {expected}", m.mean_crystal_bleu);
        assert_eq!(report.rows["m"].len(), 4);
        assert!(report.rows_csv().starts_with("model,instance_id,em,crystal_bleu,bleu\nm,1,true,1.0,1.0\n"));
    }

    #[test]
    fn missing_and_unknown_predictions() {
        let test = vec![instance("1", "a;"), instance("2", "b;")];
        let report = corpus_report("d", &test, &[pred("1", "m", "a;")], &[], &HashSet::new(), 0, 4).unwrap();
        assert_eq!(report.models["m"].missing, 1);
        assert_eq!(report.models["m"].em_percent, 50.0);
        assert_eq!(
            corpus_report("d", &test, &[pred("9", "m", "x")], &[], &HashSet::new(), 0, 4),
            Err(MetricsError::DatasetMismatch("9".into()))
        );
        let empty = corpus_report("d", &test, &[], &["m".to_string()], &HashSet::new(), 0, 4).unwrap();
        assert_eq!((empty.models["m"].em_percent, empty.models["m"].missing), (0.0, 2));
        assert!(matches!(
            corpus_report("d", &test, &[pred("1", "m", "x"), pred("1", "m", "y")], &[], &HashSet::new(), 0, 4),
            Err(MetricsError::DuplicatePrediction { .. })
        ));
    }

    fn word() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "(", ")", ";"]), 0..15)
            .prop_map(|v| v.into_iter().map(str::to_string).collect())
    }

    proptest! {
        #[test]
        fn bounded_and_reflexive(c in word(), r in word(), k in 0usize..8) {
            let trivial = trivially_shared_ngrams(&[r.clone(), c.clone()], k, 4);
            let s = crystal_bleu(&c, &r, &trivial, 4);
            prop_assert!((0.0..=1.0).contains(&s));
            if !c.is_empty() {
                prop_assert!((crystal_bleu(&c, &c, &HashSet::new(), 4) - 1.0).abs() < 1e-12);
                prop_assert!((crystal_bleu(&c, &c, &trivial, 4) - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn report_em_is_order_invariant(targets in prop::collection::vec("[ab+;]{1,6}", 1..12), rot in 0usize..12) {
            let test: Vec<_> = targets.iter().enumerate().map(|(i, t)| instance(&i.to_string(), t)).collect();
            let preds: Vec<_> = test.iter().enumerate().map(|(i, t)| pred(&t.instance_id, "m", if i % 2 == 0 { &t.target } else { "zz" })).collect();
            let a = corpus_report("d", &test, &preds, &[], &HashSet::new(), 0, 4).unwrap();
            let mut shuffled = test.clone();
            shuffled.rotate_left(rot % test.len());
            let b = corpus_report("d", &shuffled, &preds, &[], &HashSet::new(), 0, 4).unwrap();
            prop_assert_eq!(a.models["m"].em_count, b.models["m"].em_count);
        }
    }
}
