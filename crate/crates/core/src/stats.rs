//! Paired comparison of two models on one test set.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::erf::erfc;

use crate::metrics::ScoreRow;

pub const ALPHA: f64 = 0.05;
/// Discordant-pair count from which McNemar switches to the chi-square form.
pub const MCNEMAR_EXACT_BELOW: u64 = 25;
/// Largest number of non-zero differences handled with the exact distribution.
pub const WILCOXON_EXACT_MAX: usize = 20;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired samples are empty")]
    EmptySample,
    #[error("score rows cover different instances (first difference: {0})")]
    InstanceSetMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairedOutcome {
    pub n11: u64,
    pub n10: u64,
    pub n01: u64,
    pub n00: u64,
}

impl PairedOutcome {
    pub fn from_flags(a: &[bool], b: &[bool]) -> PairedOutcome {
        let mut o = PairedOutcome::default();
        for (&x, &y) in a.iter().zip(b) {
            match (x, y) {
                (true, true) => o.n11 += 1,
                (true, false) => o.n10 += 1,
                (false, true) => o.n01 += 1,
                (false, false) => o.n00 += 1,
            }
        }
        o
    }

    pub fn total(&self) -> u64 {
        self.n11 + self.n10 + self.n01 + self.n00
    }

    pub fn swapped(&self) -> PairedOutcome {
        PairedOutcome { n10: self.n01, n01: self.n10, ..*self }
    }
}

/// Effect size that serializes infinities as `"∞"` / `"-∞"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Effect(pub f64);

impl Effect {
    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            v if v == f64::INFINITY => f.write_str("∞"),
            v if v == f64::NEG_INFINITY => f.write_str("-∞"),
            v => write!(f, "{v}"),
        }
    }
}

impl Serialize for Effect {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&self.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Effect {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Effect, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Effect;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"∞\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Effect, E> {
                Ok(Effect(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Effect, E> {
                Ok(Effect(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Effect, E> {
                Ok(Effect(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Effect, E> {
                match v {
                    "∞" => Ok(Effect(f64::INFINITY)),
                    "-∞" => Ok(Effect(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    Mcnemar,
    Wilcoxon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    ExactBinomial,
    ChiSquare,
    ExactDistribution,
    NormalApproximation,
    /// No informative pairs; p fixed at 1.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    A,
    B,
    #[serde(rename = "none")]
    None,
}

impl Direction {
    fn of(sign: f64) -> Direction {
        if sign > 0.0 {
            Direction::A
        } else if sign < 0.0 {
            Direction::B
        } else {
            Direction::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatFlag {
    InfiniteOddsRatio,
    AllZeroDifferences,
    EmptySample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatResult {
    pub test: TestKind,
    pub method: PMethod,
    pub p_value: f64,
    /// Odds ratio for McNemar, paired Cliff's delta for Wilcoxon.
    pub effect: Effect,
    pub significant: bool,
    pub direction: Direction,
    pub sample_size: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<StatFlag>,
}

/// `C(n, k)` for small `n`, exact in `u128`.
fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Two-sided exact binomial test of `k` successes out of `n` at p = 0.5.
pub fn binomial_two_sided(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let tail: u128 = (0..=k.min(n - k)).map(|i| binomial(n, i)).sum();
    let p = 2.0 * tail as f64 / 2f64.powi(n as i32);
    p.min(1.0)
}

/// Upper tail of the chi-square distribution with one degree of freedom.
pub fn chi_square_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        erfc((x / 2.0).sqrt())
    }
}

/// McNemar p-value: exact binomial below 25 discordant pairs, otherwise the
/// continuity-corrected chi-square with the correction floored at zero.
pub fn mcnemar_p(n10: u64, n01: u64) -> (f64, PMethod) {
    let n = n10 + n01;
    if n < MCNEMAR_EXACT_BELOW {
        (binomial_two_sided(n10, n), PMethod::ExactBinomial)
    } else {
        let diff = (n10 as f64 - n01 as f64).abs();
        let stat = (diff - 1.0).max(0.0).powi(2) / n as f64;
        (chi_square_1_sf(stat), PMethod::ChiSquare)
    }
}

pub fn odds_ratio(n10: u64, n01: u64) -> f64 {
    match (n10, n01) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        _ => n10 as f64 / n01 as f64,
    }
}

pub fn mcnemar(outcome: &PairedOutcome) -> StatResult {
    let (p, method) = mcnemar_p(outcome.n10, outcome.n01);
    let or = odds_ratio(outcome.n10, outcome.n01);
    StatResult {
        test: TestKind::Mcnemar,
        method,
        p_value: p,
        effect: Effect(or),
        significant: p < ALPHA,
        direction: Direction::of(outcome.n10 as f64 - outcome.n01 as f64),
        sample_size: outcome.total(),
        flags: if or.is_infinite() { vec![StatFlag::InfiniteOddsRatio] } else { Vec::new() },
    }
}

fn check_paired(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(StatsError::EmptySample);
    }
    Ok(())
}

/// Non-zero differences and their doubled mid-ranks by absolute value.
fn signed_doubled_ranks(a: &[f64], b: &[f64]) -> Vec<(bool, u64)> {
    let mut diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    diffs.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let mut out = Vec::with_capacity(diffs.len());
    let mut i = 0;
    while i < diffs.len() {
        let mut j = i;
        while j + 1 < diffs.len() && diffs[j + 1].abs() == diffs[i].abs() {
            j += 1;
        }
        // ranks i+1..=j+1 share (i+1 + j+1)/2; doubled: i + j + 2
        let doubled = (i + j + 2) as u64;
        out.extend(diffs[i..=j].iter().map(|d| (*d > 0.0, doubled)));
        i = j + 1;
    }
    out
}

/// Exact two-sided p from the null distribution of the doubled rank sum.
fn wilcoxon_exact_p(ranks: &[(bool, u64)]) -> f64 {
    let total: u64 = ranks.iter().map(|r| r.1).sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    for &(_, r) in ranks {
        for s in (r as usize..=total as usize).rev() {
            counts[s] += counts[s - r as usize];
        }
    }
    let w: u64 = ranks.iter().filter(|r| r.0).map(|r| r.1).sum();
    let all = 2f64.powi(ranks.len() as i32);
    let lower: f64 = counts[..=w as usize].iter().sum::<f64>() / all;
    let upper: f64 = counts[w as usize..].iter().sum::<f64>() / all;
    (2.0 * lower.min(upper)).min(1.0)
}

/// Normal approximation with tie correction and a 0.5 continuity correction.
fn wilcoxon_normal_p(ranks: &[(bool, u64)]) -> f64 {
    let n = ranks.len() as f64;
    let w_plus: f64 = ranks.iter().filter(|r| r.0).map(|r| r.1 as f64 / 2.0).sum();
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < ranks.len() {
        let t = ranks[i..].iter().take_while(|r| r.1 == ranks[i].1).count() as f64;
        tie_term += t * t * t - t;
        i += t as usize;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Two-sided Wilcoxon signed-rank p-value for paired samples.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<StatResult, StatsError> {
    check_paired(a, b)?;
    let ranks = signed_doubled_ranks(a, b);
    let delta = cliffs_delta_paired(a, b)?;
    let (p, method, flags) = if ranks.is_empty() {
        (1.0, PMethod::Degenerate, vec![StatFlag::AllZeroDifferences])
    } else if ranks.len() <= WILCOXON_EXACT_MAX {
        (wilcoxon_exact_p(&ranks), PMethod::ExactDistribution, Vec::new())
    } else {
        (wilcoxon_normal_p(&ranks), PMethod::NormalApproximation, Vec::new())
    };
    Ok(StatResult {
        test: TestKind::Wilcoxon,
        method,
        p_value: p,
        effect: Effect(delta),
        significant: p < ALPHA,
        direction: Direction::of(delta),
        sample_size: a.len() as u64,
        flags,
    })
}

/// p-value of the normal approximation regardless of sample size.
pub fn wilcoxon_approx_p(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check_paired(a, b)?;
    let ranks = signed_doubled_ranks(a, b);
    Ok(if ranks.is_empty() { 1.0 } else { wilcoxon_normal_p(&ranks) })
}

/// p-value of the exact null distribution regardless of sample size.
pub fn wilcoxon_exact_p_value(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check_paired(a, b)?;
    let ranks = signed_doubled_ranks(a, b);
    Ok(if ranks.is_empty() { 1.0 } else { wilcoxon_exact_p(&ranks) })
}

/// Within-pair dominance: `(#{a > b} − #{a < b}) / n`.
pub fn cliffs_delta_paired(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    check_paired(a, b)?;
    let (mut more, mut less) = (0i64, 0i64);
    for (x, y) in a.iter().zip(b) {
        if x > y {
            more += 1;
        } else if x < y {
            less += 1;
        }
    }
    Ok((more - less) as f64 / a.len() as f64)
}

/// One row of a model-vs-model comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model_a: String,
    pub model_b: String,
    pub test_size: u64,
    pub em_percent_a: f64,
    pub em_percent_b: f64,
    pub em_delta: f64,
    pub odds_ratio: Effect,
    pub outcome: PairedOutcome,
    /// Mean CrystalBLEU (percent) over instances not matched exactly by both.
    pub cb_percent_a: f64,
    pub cb_percent_b: f64,
    pub cb_delta: f64,
    pub cb_sample_size: u64,
    pub effect_size_abs: f64,
    pub em: StatResult,
    pub cb: StatResult,
}

/// McNemar on EM over all instances, Wilcoxon and paired Cliff's delta on
/// CrystalBLEU over instances where not both models are exact.
pub fn compare_models(model_a: &str, rows_a: &[ScoreRow], model_b: &str, rows_b: &[ScoreRow]) -> Result<ModelComparison, StatsError> {
    let index_b: BTreeMap<&str, &ScoreRow> = rows_b.iter().map(|r| (r.instance_id.as_str(), r)).collect();
    let index_a: BTreeMap<&str, &ScoreRow> = rows_a.iter().map(|r| (r.instance_id.as_str(), r)).collect();
    if let Some(id) = index_a.keys().find(|id| !index_b.contains_key(*id)).or_else(|| index_b.keys().find(|id| !index_a.contains_key(*id))) {
        return Err(StatsError::InstanceSetMismatch(id.to_string()));
    }
    let paired: Vec<(&ScoreRow, &ScoreRow)> = index_a.iter().map(|(id, a)| (*a, index_b[id])).collect();
    let em_a: Vec<bool> = paired.iter().map(|(a, _)| a.em).collect();
    let em_b: Vec<bool> = paired.iter().map(|(_, b)| b.em).collect();
    let outcome = PairedOutcome::from_flags(&em_a, &em_b);
    let em = mcnemar(&outcome);

    let (cb_a, cb_b): (Vec<f64>, Vec<f64>) =
        paired.iter().filter(|(a, b)| !(a.em && b.em)).map(|(a, b)| (a.crystal_bleu, b.crystal_bleu)).unzip();
    let cb = match wilcoxon_signed_rank(&cb_a, &cb_b) {
        Ok(r) => r,
        Err(_) => StatResult {
            test: TestKind::Wilcoxon,
            method: PMethod::Degenerate,
            p_value: 1.0,
            effect: Effect(0.0),
            significant: false,
            direction: Direction::None,
            sample_size: 0,
            flags: vec![StatFlag::EmptySample],
        },
    };
    let n = paired.len() as f64;
    let pct = |k: u64| if n == 0.0 { 0.0 } else { 100.0 * k as f64 / n };
    let mean_pct = |v: &[f64]| if v.is_empty() { 0.0 } else { 100.0 * v.iter().sum::<f64>() / v.len() as f64 };
    let (em_percent_a, em_percent_b) = (pct(outcome.n11 + outcome.n10), pct(outcome.n11 + outcome.n01));
    let (cb_percent_a, cb_percent_b) = (mean_pct(&cb_a), mean_pct(&cb_b));
    Ok(ModelComparison {
        model_a: model_a.to_string(),
        model_b: model_b.to_string(),
        test_size: paired.len() as u64,
        em_percent_a,
        em_percent_b,
        em_delta: em_percent_a - em_percent_b,
        odds_ratio: em.effect,
        outcome,
        cb_percent_a,
        cb_percent_b,
        cb_delta: cb_percent_a - cb_percent_b,
        cb_sample_size: cb_a.len() as u64,
        effect_size_abs: cb.effect.0.abs(),
        em,
        cb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two-sided exact binomial by summing the pmf over outcomes no more
    /// likely than the observed one.
    fn binomial_oracle(k: u64, n: u64) -> f64 {
        let pmf = |i: u64| binomial(n, i) as f64 / 2f64.powi(n as i32);
        let observed = pmf(k);
        (0..=n).map(pmf).filter(|p| *p <= observed * (1.0 + 1e-12)).sum::<f64>().min(1.0)
    }

    #[test]
    fn odds_ratio_cases() {
        let r = mcnemar(&PairedOutcome { n11: 0, n10: 20, n01: 10, n00: 0 });
        assert_eq!(r.effect.0, 2.0);
        assert_eq!(r.direction, Direction::A);
        let r = mcnemar(&PairedOutcome { n11: 3, n10: 15, n01: 15, n00: 2 });
        assert_eq!((r.effect.0, r.p_value), (1.0, 1.0));
        let r = mcnemar(&PairedOutcome { n11: 0, n10: 4, n01: 0, n00: 0 });
        assert_eq!(serde_json::to_string(&r.effect).unwrap(), "\"∞\"");
        assert_eq!(r.flags, vec![StatFlag::InfiniteOddsRatio]);
        assert_eq!(odds_ratio(0, 0), 1.0);
    }

    #[test]
    fn exact_mcnemar_nine_one() {
        // 2·(C(10,0) + C(10,1)) / 2^10 = 22/1024
        let r = mcnemar(&PairedOutcome { n11: 0, n10: 9, n01: 1, n00: 0 });
        assert_eq!(r.p_value, 0.021484375);
        assert_eq!(r.method, PMethod::ExactBinomial);
        assert!(r.significant);
        assert_eq!(binomial_oracle(9, 10), 0.021484375);
    }

    #[test]
    fn mcnemar_branches_agree_near_switch() {
        for n in 24..=26u64 {
            for k in 0..=n {
                let exact = binomial_oracle(k, n);
                let diff = (k as f64 - (n - k) as f64).abs();
                let approx = chi_square_1_sf((diff - 1.0).max(0.0).powi(2) / n as f64);
                assert!((exact - approx).abs() < 0.01, "n={n} k={k}: {exact} vs {approx}");
            }
        }
        assert_eq!(mcnemar_p(12, 12).1, PMethod::ExactBinomial);
        assert_eq!(mcnemar_p(13, 12).1, PMethod::ChiSquare);
    }

    #[test]
    fn chi_square_tail_reference_points() {
        // 3.841458820694124 is the 95% quantile of chi-square(1)
        let v = chi_square_1_sf(3.841458820694124);
        assert!((v - 0.05).abs() < 1e-9, "{v:e}");
        assert_eq!(chi_square_1_sf(0.0), 1.0);
    }

    #[test]
    fn wilcoxon_cases() {
        let a = [1.0, 2.0, 3.0];
        let r = wilcoxon_signed_rank(&a, &a).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.flags, vec![StatFlag::AllZeroDifferences]);
        let r = wilcoxon_signed_rank(&[2.0, 3.0, 4.0, 5.0, 6.0], &[1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.p_value, 0.0625);
        assert_eq!(r.method, PMethod::ExactDistribution);
        assert_eq!(wilcoxon_signed_rank(&[1.0], &[]), Err(StatsError::LengthMismatch(1, 0)));
    }

    /// Exact p by listing every sign assignment.
    fn wilcoxon_brute(a: &[f64], b: &[f64]) -> f64 {
        let ranks = signed_doubled_ranks(a, b);
        let w: u64 = ranks.iter().filter(|r| r.0).map(|r| r.1).sum();
        let n = ranks.len();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u64..(1 << n) {
            let s: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i].1).sum();
            le += u64::from(s <= w);
            ge += u64::from(s >= w);
        }
        (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0)
    }

    #[test]
    fn exact_distribution_matches_brute_force_with_ties() {
        let a = [0.5, 0.2, 0.9, 0.1, 0.4, 0.4, 0.7, 0.3, 0.8];
        let b = [0.1, 0.4, 0.5, 0.3, 0.0, 0.4, 0.3, 0.5, 0.4];
        assert!((wilcoxon_exact_p_value(&a, &b).unwrap() - wilcoxon_brute(&a, &b)).abs() < 1e-15);
    }

    #[test]
    fn cliffs_delta_cases() {
        assert_eq!(cliffs_delta_paired(&[2.0, 3.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cliffs_delta_paired(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(cliffs_delta_paired(&[1.0, 2.0, 3.0], &[2.0, 1.0, 3.0]).unwrap(), 0.0);
    }

    fn row(id: usize, em: bool, cb: f64) -> ScoreRow {
        ScoreRow { instance_id: format!("i{id}"), em, crystal_bleu: cb, bleu: cb }
    }

    #[test]
    fn comparison_rules() {
        let a: Vec<_> = (0..40).map(|i| row(i, true, 1.0)).collect();
        let b: Vec<_> = (0..40).map(|i| row(i, false, 0.2)).collect();
        let c = compare_models("a", &a, "b", &b).unwrap();
        assert_eq!((c.em.direction, c.cb.direction), (Direction::A, Direction::A));

        let same = compare_models("a", &b, "b", &b).unwrap();
        assert_eq!((same.odds_ratio.0, same.cb.effect.0), (1.0, 0.0));
        assert!(!same.em.significant && !same.cb.significant);

        let mut mixed_a = b.clone();
        let mut mixed_b = b.clone();
        for i in 0..7 {
            mixed_a[i] = row(i, true, 1.0);
            mixed_b[i] = row(i, true, 1.0);
        }
        let c = compare_models("a", &mixed_a, "b", &mixed_b).unwrap();
        assert_eq!(c.cb_sample_size, 40 - 7);

        let err = compare_models("a", &a[..39], "b", &b).unwrap_err();
        assert_eq!(err, StatsError::InstanceSetMismatch("i39".into()));
    }

    fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..40).prop_flat_map(|n| {
            let v = prop::collection::vec((0u8..6).prop_map(|x| x as f64 / 5.0), n);
            (v.clone(), v)
        })
    }

    proptest! {
        #[test]
        fn swapping_models_is_antisymmetric((a, b) in paired()) {
            let ab = wilcoxon_signed_rank(&a, &b).unwrap();
            let ba = wilcoxon_signed_rank(&b, &a).unwrap();
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            prop_assert_eq!(ab.effect.0, -ba.effect.0);
            let ea: Vec<bool> = a.iter().map(|x| *x > 0.5).collect();
            let eb: Vec<bool> = b.iter().map(|x| *x > 0.5).collect();
            let o = PairedOutcome::from_flags(&ea, &eb);
            let (m1, m2) = (mcnemar(&o), mcnemar(&o.swapped()));
            prop_assert_eq!(m1.p_value, m2.p_value);
            if m1.effect.0.is_finite() && m1.effect.0 > 0.0 {
                prop_assert!((m1.effect.0 * m2.effect.0 - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn delta_is_rank_invariant((a, b) in paired()) {
            let d = cliffs_delta_paired(&a, &b).unwrap();
            let f = |v: &[f64]| v.iter().map(|x| (3.0 * x).exp() - 7.0).collect::<Vec<_>>();
            prop_assert_eq!(d, cliffs_delta_paired(&f(&a), &f(&b)).unwrap());
            prop_assert!((-1.0..=1.0).contains(&d));
        }

        #[test]
        fn exact_p_matches_enumeration((a, b) in paired()) {
            let nz = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            prop_assume!(nz <= 14);
            prop_assert!((wilcoxon_exact_p_value(&a, &b).unwrap() - wilcoxon_brute(&a, &b)).abs() < 1e-12);
        }
    }
}
