//! Explanatory analyses: how well training data covers a test set, and when
//! a fine-tuned small model pays for itself against a larger generic one.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::forge::CompletionInstance;
use crate::java::lex;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum InsightError {
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("inference cost delta must be positive")]
    NonPositiveDelta,
}

/// Distinct identifier and literal texts of the instances' full methods.
pub fn vocabulary(instances: &[CompletionInstance]) -> BTreeSet<String> {
    instances
        .iter()
        .flat_map(|i| lex(&i.reconstruct()))
        .filter(|t| t.kind.is_vocabulary())
        .map(|t| t.text)
        .collect()
}

fn signatures(instances: &[CompletionInstance]) -> BTreeSet<&str> {
    instances.iter().map(|i| i.signature.as_str()).collect()
}

/// Share of `of` also present in `within`; an empty `of` counts as covered.
fn share(of: &BTreeSet<String>, within: &BTreeSet<String>) -> f64 {
    if of.is_empty() {
        return 1.0;
    }
    of.intersection(within).count() as f64 / of.len() as f64
}

/// Fraction of test instances whose signature occurs in the training set.
pub fn signature_coverage(test: &[CompletionInstance], train: &[CompletionInstance]) -> Result<f64, InsightError> {
    if test.is_empty() {
        return Err(InsightError::EmptyTestSet);
    }
    let known = signatures(train);
    Ok(test.iter().filter(|t| known.contains(t.signature.as_str())).count() as f64 / test.len() as f64)
}

/// Fraction of distinct test identifiers/literals that also occur in training.
pub fn vocab_coverage(test: &[CompletionInstance], train: &[CompletionInstance]) -> Result<f64, InsightError> {
    if test.is_empty() {
        return Err(InsightError::EmptyTestSet);
    }
    Ok(share(&vocabulary(test), &vocabulary(train)))
}

/// Fraction of distinct training identifiers/literals that occur in the test set.
pub fn training_relevance(train: &[CompletionInstance], test: &[CompletionInstance]) -> Result<f64, InsightError> {
    if train.is_empty() {
        return Err(InsightError::EmptyTrainSet);
    }
    Ok(share(&vocabulary(train), &vocabulary(test)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub dataset_id: String,
    pub signature_coverage: f64,
    pub vocab_coverage: f64,
    pub training_relevance: f64,
    pub test_instances: usize,
    pub train_instances: usize,
    pub test_signatures: usize,
    pub test_vocabulary: usize,
    pub train_vocabulary: usize,
    pub shared_vocabulary: usize,
}

pub fn coverage_report(dataset_id: &str, test: &[CompletionInstance], train: &[CompletionInstance]) -> Result<CoverageReport, InsightError> {
    if test.is_empty() {
        return Err(InsightError::EmptyTestSet);
    }
    if train.is_empty() {
        return Err(InsightError::EmptyTrainSet);
    }
    let (vt, vr) = (vocabulary(test), vocabulary(train));
    Ok(CoverageReport {
        dataset_id: dataset_id.to_string(),
        signature_coverage: signature_coverage(test, train)?,
        vocab_coverage: share(&vt, &vr),
        training_relevance: share(&vr, &vt),
        test_instances: test.len(),
        train_instances: train.len(),
        test_signatures: signatures(test).len(),
        test_vocabulary: vt.len(),
        train_vocabulary: vr.len(),
        shared_vocabulary: vt.intersection(&vr).count(),
    })
}

/// Currency-agnostic cost inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostScenario {
    pub training_cost: f64,
    /// Per prediction.
    pub inference_cost_small: f64,
    /// Per prediction.
    pub inference_cost_large: f64,
    pub developers: u32,
    /// Predictions per developer per week.
    pub weekly_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedScenario {
    pub name: String,
    #[serde(flatten)]
    pub scenario: CostScenario,
}

/// Cheapest and most expensive organization fine-tuning runs, in USD.
pub const TRAINING_COST_BEST: f64 = 0.75;
pub const TRAINING_COST_WORST: f64 = 4.53;
/// Weekly completions shown to one developer.
pub const WEEKLY_RATE: f64 = 1150.0;
/// Per-prediction prices on one T4 GPU. Only their difference matters for
/// the breakeven; it is set so that the cheapest run breaks even after
/// about 44,948 predictions.
pub const INFERENCE_COST_SMALL: f64 = 5.0e-6;
pub const INFERENCE_COST_LARGE: f64 = 2.1686e-5;

/// The shipped scenarios: best and worst training cost for 10 and 40 developers.
pub fn default_scenarios() -> Vec<NamedScenario> {
    let mut out = Vec::new();
    for developers in [10, 40] {
        for (label, training_cost) in [("best", TRAINING_COST_BEST), ("worst", TRAINING_COST_WORST)] {
            out.push(NamedScenario {
                name: format!("{label}-case-{developers}-devs"),
                scenario: CostScenario {
                    training_cost,
                    inference_cost_small: INFERENCE_COST_SMALL,
                    inference_cost_large: INFERENCE_COST_LARGE,
                    developers,
                    weekly_rate: WEEKLY_RATE,
                },
            });
        }
    }
    out
}

impl CostScenario {
    pub fn delta(&self) -> f64 {
        self.inference_cost_large - self.inference_cost_small
    }
}

/// Predictions after which training cost is recovered: `training / Δcost`.
pub fn breakeven_inferences(s: &CostScenario) -> Result<f64, InsightError> {
    let delta = s.delta();
    if delta <= 0.0 || !delta.is_finite() {
        return Err(InsightError::NonPositiveDelta);
    }
    Ok(s.training_cost / delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weeks {
    pub raw: f64,
    pub whole: u64,
}

pub fn weeks_to_breakeven(n_star: f64, s: &CostScenario) -> Weeks {
    let raw = n_star / (s.developers as f64 * s.weekly_rate);
    Weeks { raw, whole: raw.ceil() as u64 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub inferences: u64,
    pub small_personalized: f64,
    pub large_generic: f64,
}

/// Cumulative cost of both options at `steps + 1` evenly spaced inference counts.
pub fn cost_curve(s: &CostScenario, max_inferences: u64, steps: u64) -> Vec<CostPoint> {
    let steps = steps.max(1);
    (0..=steps)
        .map(|k| {
            let x = max_inferences * k / steps;
            CostPoint {
                inferences: x,
                small_personalized: s.training_cost + s.inference_cost_small * x as f64,
                large_generic: s.inference_cost_large * x as f64,
            }
        })
        .collect()
}

pub fn cost_curve_csv(points: &[CostPoint]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points {
        w.serialize(p).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// Where the two cost lines cross, interpolated between curve samples.
pub fn curve_crossing(points: &[CostPoint]) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let d0 = w[0].small_personalized - w[0].large_generic;
        let d1 = w[1].small_personalized - w[1].large_generic;
        (d0 > 0.0 && d1 <= 0.0).then(|| {
            let (x0, x1) = (w[0].inferences as f64, w[1].inferences as f64);
            x0 + (x1 - x0) * d0 / (d0 - d1)
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakevenReport {
    pub name: String,
    pub scenario: CostScenario,
    pub breakeven_inferences: f64,
    pub weeks: Weeks,
}

pub fn breakeven_report(named: &NamedScenario) -> Result<BreakevenReport, InsightError> {
    let n_star = breakeven_inferences(&named.scenario)?;
    Ok(BreakevenReport {
        name: named.name.clone(),
        scenario: named.scenario,
        breakeven_inferences: n_star,
        weeks: weeks_to_breakeven(n_star, &named.scenario),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::SegmentKind;
    use proptest::prelude::*;

    fn inst(sig: &str, body: &str) -> CompletionInstance {
        CompletionInstance {
            instance_id: format!("{sig}{body}"),
            context: format!("void {sig}() {{ <FILL_ME> }}"),
            target: body.to_string(),
            n: 3,
            segment_tokens: 4,
            kind: SegmentKind::IsolatedLine,
            repo_id: "r".into(),
            commit_sha: "s".into(),
            author_id: "a".into(),
            timestamp: 1,
            file: "F.java".into(),
            signature: format!("void {sig}()"),
        }
    }

    fn scenario(training_cost: f64, developers: u32) -> CostScenario {
        CostScenario {
            training_cost,
            inference_cost_small: INFERENCE_COST_SMALL,
            inference_cost_large: INFERENCE_COST_LARGE,
            developers,
            weekly_rate: WEEKLY_RATE,
        }
    }

    #[test]
    fn signature_coverage_counts() {
        let test: Vec<_> = (0..8).map(|i| inst(&format!("m{i}"), "x;")).collect();
        assert_eq!(signature_coverage(&test, &test).unwrap(), 1.0);
        assert_eq!(signature_coverage(&test, &[inst("other", "x;")]).unwrap(), 0.0);
        assert_eq!(signature_coverage(&test, &test[..2]).unwrap(), 0.25);
        assert_eq!(signature_coverage(&[], &test), Err(InsightError::EmptyTestSet));
    }

    #[test]
    fn vocabulary_excludes_keywords_and_operators() {
        let v = vocabulary(&[inst("f", "return alpha + 42 + \"s\";")]);
        let expected: BTreeSet<String> = ["f", "alpha", "42", "\"s\""].iter().map(|s| s.to_string()).collect();
        assert_eq!(v, expected);
    }

    #[test]
    fn vocab_coverage_cases() {
        let a = vec![inst("f", "alpha = beta;")];
        let b = vec![inst("g", "gamma = delta;")];
        assert_eq!(vocab_coverage(&a, &a).unwrap(), 1.0);
        assert_eq!(vocab_coverage(&a, &b).unwrap(), 0.0);
        assert_eq!(training_relevance(&b, &a).unwrap(), 0.0);
        assert_eq!(training_relevance(&[], &a), Err(InsightError::EmptyTrainSet));
    }

    #[test]
    fn developer_data_is_more_relevant_than_a_large_generic_pool() {
        let test = vec![inst("load", "cache = store.fetch(key);")];
        let developer = vec![inst("save", "store.put(key, cache);")];
        let generic: Vec<_> = (0..300)
            .map(|i| inst(&format!("g{i}"), &format!("v{i} = w{i} + {i};")))
            .chain(developer.iter().cloned())
            .collect();
        let dev = training_relevance(&developer, &test).unwrap();
        let gen = training_relevance(&generic, &test).unwrap();
        assert!(gen < dev, "{gen} vs {dev}");
        assert!(gen < 0.01);
    }

    #[test]
    fn breakeven_matches_reported_points() {
        let best = breakeven_inferences(&scenario(TRAINING_COST_BEST, 10)).unwrap();
        let worst = breakeven_inferences(&scenario(TRAINING_COST_WORST, 10)).unwrap();
        assert!((best - 44_948.0).abs() / 44_948.0 < 0.01, "{best}");
        assert!((worst - 272_824.0).abs() / 272_824.0 < 0.01, "{worst}");
        assert_eq!(weeks_to_breakeven(44_948.0, &scenario(0.0, 10)).whole, 4);
        assert_eq!(weeks_to_breakeven(272_824.0, &scenario(0.0, 10)).whole, 24);
        let w = weeks_to_breakeven(44_948.0, &scenario(0.0, 40));
        assert_eq!(w.whole, 1);
        assert!((w.raw - 0.977).abs() < 1e-3);
        assert_eq!(breakeven_inferences(&scenario(0.0, 10)).unwrap(), 0.0);
        let mut flat = scenario(1.0, 1);
        flat.inference_cost_large = flat.inference_cost_small;
        assert_eq!(breakeven_inferences(&flat), Err(InsightError::NonPositiveDelta));
    }

    #[test]
    fn curve_shape() {
        let s = scenario(TRAINING_COST_BEST, 10);
        let curve = cost_curve(&s, 100_000, 10);
        assert_eq!((curve[0].small_personalized, curve[0].large_generic), (0.75, 0.0));
        let crossings = curve.windows(2).filter(|w| {
            (w[0].small_personalized > w[0].large_generic) != (w[1].small_personalized > w[1].large_generic)
        });
        assert_eq!(crossings.count(), 1);
        let csv = cost_curve_csv(&curve[..2]);
        assert_eq!(csv.lines().next(), Some("inferences,small_personalized,large_generic"));
        assert_eq!(csv.lines().nth(1), Some("0,0.75,0.0"));
    }

    proptest! {
        #[test]
        fn crossing_equals_breakeven(cost in 0.01f64..50.0, small in 1e-7f64..1e-4, extra in 1e-7f64..1e-4, steps in 1u64..200) {
            let s = CostScenario { training_cost: cost, inference_cost_small: small, inference_cost_large: small + extra, developers: 3, weekly_rate: 100.0 };
            let n = breakeven_inferences(&s).unwrap();
            let curve = cost_curve(&s, (n * 2.0).ceil() as u64 + 1, steps);
            let x = curve_crossing(&curve).unwrap();
            prop_assert!((x - n).abs() / n < 1e-6, "{} vs {}", x, n);
            let doubled = CostScenario { training_cost: 2.0 * cost, ..s };
            prop_assert!((breakeven_inferences(&doubled).unwrap() - 2.0 * n).abs() < 1e-6 * n);
            let wider = CostScenario { inference_cost_large: s.inference_cost_large + 1e-6, ..s };
            prop_assert!(breakeven_inferences(&wider).unwrap() < n);
        }

        #[test]
        fn coverage_in_unit_interval_and_monotone(
            a in prop::collection::vec("[a-e]{1,3}", 1..6),
            b in prop::collection::vec("[a-e]{1,3}", 1..6),
            c in prop::collection::vec("[a-e]{1,3}", 0..6),
        ) {
            let mk = |v: &[String]| v.iter().enumerate().map(|(i, w)| inst(&format!("m{i}"), &format!("{w} = 1;"))).collect::<Vec<_>>();
            let (test, train, extra) = (mk(&a), mk(&b), mk(&c));
            let base = vocab_coverage(&test, &train).unwrap();
            prop_assert!((0.0..=1.0).contains(&base));
            let mut bigger = train.clone();
            bigger.extend(extra);
            prop_assert!(vocab_coverage(&test, &bigger).unwrap() >= base);
            prop_assert_eq!(vocab_coverage(&test, &test).unwrap(), 1.0);
            prop_assert_eq!(training_relevance(&test, &test).unwrap(), 1.0);
            let r = training_relevance(&train, &test).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
