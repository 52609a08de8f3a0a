//! Surface similarity metrics over step sequences — normalized edit
//! distance (NED), Jaccard index on sequences (JIS), and relative order
//! accuracy (ROA) — plus the protocol that binarizes them against a phase's
//! canonical reference at a similarity threshold.
//!
//! NED is a distance, so it enters the threshold comparison as `1 - NED`;
//! JIS and ROA are already similarities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::StepSequence;
use crate::rules::{canonical_reference, RuleError, RuleSet};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("threshold {0} is outside (0, 1]")]
    InvalidThreshold(String),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "NED")]
    Ned,
    #[serde(rename = "JIS")]
    Jis,
    #[serde(rename = "ROA")]
    Roa,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Ned, MetricKind::Jis, MetricKind::Roa];
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricKind::Ned => write!(f, "NED"),
            MetricKind::Jis => write!(f, "JIS"),
            MetricKind::Roa => write!(f, "ROA"),
        }
    }
}

/// One metric's judgment of a sequence against a reference: the raw score,
/// its similarity polarity, and the thresholded binary decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: MetricKind,
    pub raw: f64,
    pub similarity: f64,
    pub decision: bool,
}

/// Threshold and metric selection for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub threshold: f64,
    pub enabled: BTreeSet<MetricKind>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            threshold: 0.7,
            enabled: MetricKind::ALL.into_iter().collect(),
        }
    }
}

impl MetricConfig {
    pub fn with_threshold(threshold: f64) -> Result<Self, MetricError> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(MetricError::InvalidThreshold(threshold.to_string()));
        }
        Ok(MetricConfig {
            threshold,
            ..MetricConfig::default()
        })
    }
}

/// Unit-cost Levenshtein distance over step codes.
pub fn levenshtein(a: &StepSequence, b: &StepSequence) -> usize {
    let (a, b) = (a.codes(), b.codes());
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let next = (row[j + 1] + 1)
                .min(row[j] + 1)
                .min(diag + usize::from(ca != cb));
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// Normalized edit distance: Levenshtein distance divided by the longer
/// length. Two empty sequences have distance 0. Symmetric, in [0, 1].
pub fn ned(a: &StepSequence, b: &StepSequence) -> f64 {
    let denom = a.len().max(b.len());
    if denom == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / denom as f64
}

/// Jaccard index over the sets of distinct codes. Two empty sequences have
/// similarity 1. Symmetric, in [0, 1].
pub fn jis(a: &StepSequence, b: &StepSequence) -> f64 {
    let sa = a.distinct();
    let sb = b.distinct();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count();
    inter as f64 / union as f64
}

/// Relative order accuracy: over the distinct codes common to both
/// sequences, positioned by first occurrence, the fraction of unordered
/// code pairs whose relative order agrees. Fewer than two common codes
/// yields 1. Symmetric, in [0, 1].
///
/// First-occurrence positioning makes the metric blind to repetitions by
/// construction.
pub fn roa(a: &StepSequence, b: &StepSequence) -> f64 {
    let common: Vec<&str> = a.distinct().intersection(&b.distinct()).copied().collect();
    if common.len() < 2 {
        return 1.0;
    }
    let pos = |s: &StepSequence, c: &str| s.first_index(c).expect("common code occurs");
    let mut concordant = 0usize;
    let mut total = 0usize;
    for (i, x) in common.iter().enumerate() {
        for y in &common[i + 1..] {
            total += 1;
            let in_a = pos(a, x) < pos(a, y);
            let in_b = pos(b, x) < pos(b, y);
            if in_a == in_b {
                concordant += 1;
            }
        }
    }
    concordant as f64 / total as f64
}

fn raw_score(kind: MetricKind, a: &StepSequence, b: &StepSequence) -> f64 {
    match kind {
        MetricKind::Ned => ned(a, b),
        MetricKind::Jis => jis(a, b),
        MetricKind::Roa => roa(a, b),
    }
}

/// Scores one metric between a sequence and a reference, thresholding its
/// similarity.
pub fn score_metric(
    kind: MetricKind,
    seq: &StepSequence,
    reference: &StepSequence,
    threshold: f64,
) -> MetricScore {
    let raw = raw_score(kind, seq, reference);
    let similarity = match kind {
        MetricKind::Ned => 1.0 - raw,
        _ => raw,
    };
    MetricScore {
        metric: kind,
        raw,
        similarity,
        decision: similarity >= threshold,
    }
}

/// Scores every enabled metric between `seq` and the canonical reference of
/// `phase`, each binarized at the configured threshold.
pub fn score_against_reference(
    seq: &StepSequence,
    phase: &str,
    rs: &RuleSet,
    cfg: &MetricConfig,
) -> Result<BTreeMap<MetricKind, MetricScore>, MetricError> {
    let spec = rs.require_spec(phase)?;
    let reference = canonical_reference(spec)?;
    Ok(cfg
        .enabled
        .iter()
        .map(|&kind| (kind, score_metric(kind, seq, &reference, cfg.threshold)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;
    use crate::model::seq;

    /// Full-matrix dynamic-programming oracle, kept structurally separate
    /// from the rolling-row implementation it validates.
    #[allow(clippy::needless_range_loop)]
    fn dp_oracle(a: &[&str], b: &[&str]) -> usize {
        let (n, m) = (a.len(), b.len());
        let mut table = vec![vec![0usize; m + 1]; n + 1];
        for (i, row) in table.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=m {
            table[0][j] = j;
        }
        for i in 1..=n {
            for j in 1..=m {
                let sub = usize::from(a[i - 1] != b[j - 1]);
                table[i][j] = (table[i - 1][j] + 1)
                    .min(table[i][j - 1] + 1)
                    .min(table[i - 1][j - 1] + sub);
            }
        }
        table[n][m]
    }

    #[test]
    fn ned_identity_and_extremes() {
        let s = seq(&["S22", "S23", "S24"]);
        assert_eq!(ned(&s, &s), 0.0);
        assert_eq!(ned(&seq(&["S22"]), &StepSequence::empty()), 1.0);
        assert_eq!(ned(&StepSequence::empty(), &StepSequence::empty()), 0.0);
    }

    #[test]
    fn ned_adjacent_transposition_costs_two_substitutions() {
        let a = seq(&["S22", "S23", "S24"]);
        let b = seq(&["S22", "S24", "S23"]);
        let oracle = dp_oracle(&["S22", "S23", "S24"], &["S22", "S24", "S23"]);
        assert_eq!(oracle, 2);
        assert_eq!(levenshtein(&a, &b), oracle);
        assert_eq!(ned(&a, &b), 2.0 / 3.0);
    }

    #[test]
    fn levenshtein_matches_dp_oracle_on_assorted_pairs() {
        let cases: &[(&[&str], &[&str])] = &[
            (&[], &[]),
            (&["S1"], &[]),
            (&["S1", "S2", "S3"], &["S1", "S2", "S3"]),
            (&["S1", "S2", "S3", "S4"], &["S2", "S3", "S4", "S5"]),
            (&["S1", "S1", "S1"], &["S1"]),
            (
                &["S3", "S22", "S23", "S39", "S24", "S25"],
                &["S22", "S23", "S24", "S25"],
            ),
            (&["S22", "S24", "S23"], &["S22", "S23", "S24", "S25"]),
        ];
        for (a, b) in cases {
            let sa: StepSequence = a.iter().copied().collect();
            let sb: StepSequence = b.iter().copied().collect();
            assert_eq!(levenshtein(&sa, &sb), dp_oracle(a, b), "{sa} vs {sb}");
        }
    }

    #[test]
    fn jis_set_arithmetic() {
        let s = seq(&["S22", "S23"]);
        assert_eq!(jis(&s, &s), 1.0);
        // intersection {S23}, union {S22, S23, S24}
        assert_eq!(jis(&seq(&["S22", "S23"]), &seq(&["S23", "S24"])), 1.0 / 3.0);
        assert_eq!(jis(&seq(&["S22"]), &seq(&["S23"])), 0.0);
        assert_eq!(jis(&StepSequence::empty(), &StepSequence::empty()), 1.0);
        // Repetition does not change the set.
        assert_eq!(
            jis(&seq(&["S22", "S22", "S23"]), &seq(&["S23", "S22"])),
            1.0
        );
    }

    #[test]
    fn roa_pair_enumeration() {
        let s = seq(&["S22", "S23", "S24"]);
        assert_eq!(roa(&s, &s), 1.0);
        // Full reversal: all three pairs discordant.
        assert_eq!(roa(&s, &seq(&["S24", "S23", "S22"])), 0.0);
        // (S22,S23) and (S22,S24) concordant, (S23,S24) discordant.
        assert_eq!(roa(&s, &seq(&["S22", "S24", "S23"])), 2.0 / 3.0);
        // Fewer than two common codes is vacuously 1.
        assert_eq!(roa(&seq(&["S22"]), &seq(&["S22", "S23"])), 1.0);
        assert_eq!(roa(&seq(&["S22"]), &seq(&["S23"])), 1.0);
        assert_eq!(roa(&StepSequence::empty(), &StepSequence::empty()), 1.0);
    }

    #[test]
    fn roa_is_blind_to_repetitions() {
        let reference = seq(&["S22", "S23", "S24", "S25"]);
        let repeated = seq(&["S22", "S23", "S24", "S25", "S24"]);
        assert_eq!(roa(&repeated, &reference), 1.0);
    }

    #[test]
    fn score_against_reference_on_exact_match() {
        let rs = demo::p5_ruleset();
        let scores = score_against_reference(
            &seq(&["S22", "S23", "S24", "S25"]),
            "P5",
            &rs,
            &MetricConfig::default(),
        )
        .unwrap();
        for kind in MetricKind::ALL {
            let score = &scores[&kind];
            assert_eq!(score.similarity, 1.0);
            assert!(score.decision);
        }
    }

    #[test]
    fn rule_valid_variation_fails_the_ned_threshold() {
        // Two ancillary insertions into the canonical P5 order: the plan is
        // rule-valid, but edit distance 2 of 6 leaves similarity 4/6 below
        // the 0.7 threshold.
        let rs = demo::p5_ruleset();
        let s = seq(&["S3", "S22", "S23", "S39", "S24", "S25"]);
        assert!(crate::checker::check(&s, "P5", &rs).unwrap().valid);
        let scores = score_against_reference(&s, "P5", &rs, &MetricConfig::default()).unwrap();
        let ned_score = &scores[&MetricKind::Ned];
        assert_eq!(ned_score.raw, 2.0 / 6.0);
        assert_eq!(ned_score.similarity, 1.0 - 2.0 / 6.0);
        assert!(!ned_score.decision);
    }

    #[test]
    fn order_error_passes_the_roa_threshold() {
        // Dye injection swapped before clamping: rule-invalid, yet only one
        // of six code pairs is discordant, so ROA 5/6 clears 0.7.
        let rs = demo::p5_ruleset();
        let s = seq(&["S22", "S24", "S23", "S25"]);
        assert!(!crate::checker::check(&s, "P5", &rs).unwrap().valid);
        let scores = score_against_reference(&s, "P5", &rs, &MetricConfig::default()).unwrap();
        let roa_score = &scores[&MetricKind::Roa];
        assert_eq!(roa_score.raw, 5.0 / 6.0);
        assert!(roa_score.decision);
    }

    #[test]
    fn threshold_validation() {
        assert!(MetricConfig::with_threshold(0.7).is_ok());
        assert!(MetricConfig::with_threshold(1.0).is_ok());
        assert!(MetricConfig::with_threshold(0.0).is_err());
        assert!(MetricConfig::with_threshold(1.5).is_err());
    }

    #[test]
    fn unknown_phase_propagates() {
        let rs = demo::p5_ruleset();
        assert!(matches!(
            score_against_reference(&seq(&["S22"]), "P99", &rs, &MetricConfig::default()),
            Err(MetricError::Rule(RuleError::UnknownPhase(_)))
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_seq(max_len: usize) -> impl Strategy<Value = StepSequence> {
            prop::collection::vec(0u8..8, 0..=max_len)
                .prop_map(|v| v.into_iter().map(|i| format!("S{i}")).collect())
        }

        proptest! {
            #[test]
            fn metrics_are_symmetric(a in arb_seq(10), b in arb_seq(10)) {
                prop_assert_eq!(ned(&a, &b), ned(&b, &a));
                prop_assert_eq!(jis(&a, &b), jis(&b, &a));
                prop_assert_eq!(roa(&a, &b), roa(&b, &a));
            }

            #[test]
            fn metrics_satisfy_identity(s in arb_seq(10)) {
                prop_assert_eq!(ned(&s, &s), 0.0);
                prop_assert_eq!(jis(&s, &s), 1.0);
                prop_assert_eq!(roa(&s, &s), 1.0);
            }

            #[test]
            fn raw_scores_stay_in_unit_interval(a in arb_seq(12), b in arb_seq(12)) {
                for kind in MetricKind::ALL {
                    let raw = raw_score(kind, &a, &b);
                    prop_assert!((0.0..=1.0).contains(&raw), "{} raw {}", kind, raw);
                }
            }

            #[test]
            fn edit_distance_triangle_inequality(
                a in arb_seq(8),
                b in arb_seq(8),
                c in arb_seq(8),
            ) {
                prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
            }

            #[test]
            fn raising_the_threshold_never_validates(a in arb_seq(8), b in arb_seq(8)) {
                for kind in MetricKind::ALL {
                    let low = score_metric(kind, &a, &b, 0.5);
                    let high = score_metric(kind, &a, &b, 0.9);
                    prop_assert!(!(high.decision && !low.decision));
                }
            }
        }
    }
}
