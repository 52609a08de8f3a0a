//! Meta-evaluation: feed labeled sequences to each evaluator, compare the
//! binary decisions against the ground-truth labels, and report accuracy
//! stratified by subset (Valid, OE, CE, BE, and the invalid aggregate).
//!
//! A decision is correct iff it judges the sequence valid exactly when the
//! label is Valid — evaluators get no credit for guessing the right error
//! subclass.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchgen::{Label, LabeledSequence};
use crate::checker;
use crate::judge::PlanJudge;
use crate::metrics::{score_against_reference, MetricConfig, MetricError, MetricKind};
use crate::rules::RuleSet;

#[derive(Debug, Error)]
pub enum MetaEvalError {
    #[error("benchmark item references unknown phase {0}")]
    UnknownPhase(String),
    #[error("no judge named {0} was supplied")]
    MissingJudge(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// An evaluator column in the report.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum EvaluatorId {
    Ned,
    Jis,
    Roa,
    RuleChecker,
    Judge(String),
}

impl EvaluatorId {
    pub const BUILTIN: [EvaluatorId; 4] = [
        EvaluatorId::Ned,
        EvaluatorId::Jis,
        EvaluatorId::Roa,
        EvaluatorId::RuleChecker,
    ];
}

impl fmt::Display for EvaluatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluatorId::Ned => write!(f, "NED"),
            EvaluatorId::Jis => write!(f, "JIS"),
            EvaluatorId::Roa => write!(f, "ROA"),
            EvaluatorId::RuleChecker => write!(f, "Rule"),
            EvaluatorId::Judge(name) => write!(f, "Judge:{name}"),
        }
    }
}

impl FromStr for EvaluatorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "ned" => Ok(EvaluatorId::Ned),
            "jis" => Ok(EvaluatorId::Jis),
            "roa" => Ok(EvaluatorId::Roa),
            "rule" | "rulechecker" | "checker" => Ok(EvaluatorId::RuleChecker),
            other => match other.strip_prefix("judge:") {
                // Preserve the original casing of the judge name.
                Some(_) => Ok(EvaluatorId::Judge(s[6..].to_string())),
                None => Err(format!(
                    "unknown evaluator {s:?} (expected ned, jis, roa, rule, or judge:<name>)"
                )),
            },
        }
    }
}

/// Report rows, in rendering order. `Invalid` aggregates OE, CE, and BE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subset {
    Valid,
    #[serde(rename = "OE")]
    Order,
    #[serde(rename = "CE")]
    Content,
    #[serde(rename = "BE")]
    Both,
    Invalid,
}

impl Subset {
    pub const ALL: [Subset; 5] = [
        Subset::Valid,
        Subset::Order,
        Subset::Content,
        Subset::Both,
        Subset::Invalid,
    ];

    fn of(label: Label) -> Subset {
        match label {
            Label::Valid => Subset::Valid,
            Label::Order => Subset::Order,
            Label::Content => Subset::Content,
            Label::Both => Subset::Both,
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subset::Valid => write!(f, "Valid"),
            Subset::Order => write!(f, "OE"),
            Subset::Content => write!(f, "CE"),
            Subset::Both => write!(f, "BE"),
            Subset::Invalid => write!(f, "Invalid"),
        }
    }
}

/// Per-subset decision counts. Abstentions count as incorrect and are
/// tallied separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetStats {
    pub n: usize,
    pub correct: usize,
    #[serde(default)]
    pub abstained: usize,
}

impl SubsetStats {
    pub fn accuracy(&self) -> Option<f64> {
        (self.n > 0).then(|| self.correct as f64 / self.n as f64)
    }

    fn add(&mut self, correct: bool, abstained: bool) {
        self.n += 1;
        self.correct += usize::from(correct);
        self.abstained += usize::from(abstained);
    }
}

/// One evaluator's stratified results. `available == false` marks a column
/// whose evaluator could not be reached; its stats are empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluatorColumn {
    pub evaluator: String,
    pub available: bool,
    pub subsets: BTreeMap<Subset, SubsetStats>,
}

impl EvaluatorColumn {
    fn empty(name: String, available: bool) -> Self {
        EvaluatorColumn {
            evaluator: name,
            available,
            subsets: Subset::ALL
                .into_iter()
                .map(|s| (s, SubsetStats::default()))
                .collect(),
        }
    }

    pub fn stats(&self, subset: Subset) -> SubsetStats {
        self.subsets.get(&subset).copied().unwrap_or_default()
    }

    pub fn accuracy(&self, subset: Subset) -> Option<f64> {
        self.stats(subset).accuracy()
    }
}

/// The stratified accuracy report, with the configuration echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaEvalReport {
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub items: usize,
    pub columns: Vec<EvaluatorColumn>,
}

impl MetaEvalReport {
    pub fn column(&self, name: &str) -> Option<&EvaluatorColumn> {
        self.columns.iter().find(|c| c.evaluator == name)
    }

    /// True when every enabled evaluator produced a column.
    pub fn all_available(&self) -> bool {
        self.columns.iter().all(|c| c.available)
    }
}

/// Run parameters: metric threshold, enabled evaluators, judge concurrency
/// bound, and the seed to echo into the report.
pub struct MetaEvalOptions {
    pub metric_cfg: MetricConfig,
    pub evaluators: Vec<EvaluatorId>,
    pub max_in_flight: usize,
    pub seed: Option<u64>,
}

impl Default for MetaEvalOptions {
    fn default() -> Self {
        MetaEvalOptions {
            metric_cfg: MetricConfig::default(),
            evaluators: EvaluatorId::BUILTIN.to_vec(),
            max_in_flight: 4,
            seed: None,
        }
    }
}

/// Per-item binary outcomes for one evaluator: decision per item
/// (None = abstain), or a column-level failure.
enum ColumnDecisions {
    Decided(Vec<Option<bool>>),
    Unavailable,
}

fn metric_decisions(
    items: &[LabeledSequence],
    rs: &RuleSet,
    cfg: &MetricConfig,
    kind: MetricKind,
) -> Result<Vec<Option<bool>>, MetaEvalError> {
    let mut cfg = cfg.clone();
    cfg.enabled = [kind].into_iter().collect();
    items
        .iter()
        .map(|item| {
            let scores = score_against_reference(&item.steps, &item.phase, rs, &cfg)?;
            Ok(Some(scores[&kind].decision))
        })
        .collect()
}

fn checker_decisions(
    items: &[LabeledSequence],
    rs: &RuleSet,
) -> Result<Vec<Option<bool>>, MetaEvalError> {
    items
        .iter()
        .map(|item| {
            let verdict = checker::check(&item.steps, &item.phase, rs)
                .map_err(|_| MetaEvalError::UnknownPhase(item.phase.clone()))?;
            Ok(Some(verdict.valid))
        })
        .collect()
}

/// Judge decisions with at most `max_in_flight` concurrent requests. If the
/// judge becomes unavailable the column is abandoned.
fn judge_decisions(
    items: &[LabeledSequence],
    rs: &RuleSet,
    judge: &dyn PlanJudge,
    max_in_flight: usize,
) -> ColumnDecisions {
    let workers = max_in_flight.max(1).min(items.len().max(1));
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let decisions: Vec<Mutex<Option<bool>>> = items.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= items.len() {
                    break;
                }
                let item = &items[idx];
                match judge.decide(&item.steps, &item.phase, rs) {
                    Ok(decision) => {
                        *decisions[idx].lock().expect("decision lock") = decision;
                    }
                    Err(_) => {
                        failed.store(true, Ordering::Relaxed);
                        break;
                    }
                }
            });
        }
    });

    if failed.load(Ordering::Relaxed) {
        ColumnDecisions::Unavailable
    } else {
        ColumnDecisions::Decided(
            decisions
                .into_iter()
                .map(|m| m.into_inner().expect("decision lock"))
                .collect(),
        )
    }
}

fn accumulate(
    items: &[LabeledSequence],
    decisions: &[Option<bool>],
) -> BTreeMap<Subset, SubsetStats> {
    let mut subsets: BTreeMap<Subset, SubsetStats> = Subset::ALL
        .into_iter()
        .map(|s| (s, SubsetStats::default()))
        .collect();
    for (item, decision) in items.iter().zip(decisions) {
        let correct = *decision == Some(item.label == Label::Valid);
        let abstained = decision.is_none();
        let subset = Subset::of(item.label);
        subsets
            .get_mut(&subset)
            .expect("all subsets present")
            .add(correct, abstained);
        if item.label != Label::Valid {
            subsets
                .get_mut(&Subset::Invalid)
                .expect("all subsets present")
                .add(correct, abstained);
        }
    }
    subsets
}

/// Runs the meta-evaluation protocol over labeled items.
///
/// Judges are looked up by name among `judges`; a judge that errors marks
/// its column unavailable and the report proceeds without it.
pub fn run_metaeval(
    items: &[LabeledSequence],
    rs: &RuleSet,
    opts: &MetaEvalOptions,
    judges: &[&dyn PlanJudge],
) -> Result<MetaEvalReport, MetaEvalError> {
    for item in items {
        if rs.spec(&item.phase).is_none() {
            return Err(MetaEvalError::UnknownPhase(item.phase.clone()));
        }
    }

    let mut columns = Vec::new();
    for evaluator in &opts.evaluators {
        let name = evaluator.to_string();
        let decisions = match evaluator {
            EvaluatorId::Ned => ColumnDecisions::Decided(metric_decisions(
                items,
                rs,
                &opts.metric_cfg,
                MetricKind::Ned,
            )?),
            EvaluatorId::Jis => ColumnDecisions::Decided(metric_decisions(
                items,
                rs,
                &opts.metric_cfg,
                MetricKind::Jis,
            )?),
            EvaluatorId::Roa => ColumnDecisions::Decided(metric_decisions(
                items,
                rs,
                &opts.metric_cfg,
                MetricKind::Roa,
            )?),
            EvaluatorId::RuleChecker => ColumnDecisions::Decided(checker_decisions(items, rs)?),
            EvaluatorId::Judge(judge_name) => {
                let judge = judges
                    .iter()
                    .find(|j| j.name() == judge_name)
                    .ok_or_else(|| MetaEvalError::MissingJudge(judge_name.clone()))?;
                judge_decisions(items, rs, *judge, opts.max_in_flight)
            }
        };
        let column = match decisions {
            ColumnDecisions::Decided(decisions) => EvaluatorColumn {
                evaluator: name,
                available: true,
                subsets: accumulate(items, &decisions),
            },
            ColumnDecisions::Unavailable => EvaluatorColumn::empty(name, false),
        };
        columns.push(column);
    }

    Ok(MetaEvalReport {
        threshold: opts.metric_cfg.threshold,
        seed: opts.seed,
        items: items.len(),
        columns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!(
                "unknown format {other:?} (expected json, csv, or markdown)"
            )),
        }
    }
}

fn pct(stats: SubsetStats) -> String {
    match stats.accuracy() {
        Some(a) => format!("{:.1}", a * 100.0),
        None => "-".to_string(),
    }
}

/// Renders a report deterministically. Markdown mirrors the stratified
/// accuracy table (one row per subset, one column per evaluator,
/// percentages to one decimal); CSV is a long-format table with the
/// configuration echoed in leading comment lines; JSON round-trips to an
/// equal report.
pub fn render_report(report: &MetaEvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report).expect("report serializes");
            text.push('\n');
            text
        }
        ReportFormat::Csv => {
            let mut out = String::new();
            writeln!(out, "# threshold: {}", report.threshold).unwrap();
            if let Some(seed) = report.seed {
                writeln!(out, "# seed: {seed}").unwrap();
            }
            writeln!(out, "# items: {}", report.items).unwrap();
            writeln!(
                out,
                "subset,evaluator,available,n,correct,abstained,accuracy_pct"
            )
            .unwrap();
            for subset in Subset::ALL {
                for col in &report.columns {
                    let s = col.stats(subset);
                    writeln!(
                        out,
                        "{subset},{},{},{},{},{},{}",
                        col.evaluator,
                        col.available,
                        s.n,
                        s.correct,
                        s.abstained,
                        if col.available {
                            pct(s)
                        } else {
                            "absent".to_string()
                        }
                    )
                    .unwrap();
                }
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| Subset |");
            for col in &report.columns {
                write!(out, " {} |", col.evaluator).unwrap();
            }
            out.push('\n');
            out.push_str("| --- |");
            for _ in &report.columns {
                out.push_str(" --- |");
            }
            out.push('\n');
            for subset in Subset::ALL {
                write!(out, "| {subset} |").unwrap();
                for col in &report.columns {
                    if col.available {
                        write!(out, " {} |", pct(col.stats(subset))).unwrap();
                    } else {
                        out.push_str(" absent |");
                    }
                }
                out.push('\n');
            }
            let abstentions: Vec<String> = report
                .columns
                .iter()
                .filter_map(|c| {
                    let total: usize = Subset::ALL
                        .iter()
                        .filter(|s| **s != Subset::Invalid)
                        .map(|s| c.stats(*s).abstained)
                        .sum();
                    (total > 0).then(|| format!("{}={total}", c.evaluator))
                })
                .collect();
            if !abstentions.is_empty() {
                writeln!(out, "\nabstentions: {}", abstentions.join(", ")).unwrap();
            }
            write!(out, "\nthreshold: {}", report.threshold).unwrap();
            if let Some(seed) = report.seed {
                write!(out, "; seed: {seed}").unwrap();
            }
            writeln!(out, "; items: {}", report.items).unwrap();
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::{build_benchmark, BenchmarkSpec, Provenance};
    use crate::demo;
    use crate::judge::JudgeError;
    use crate::model::{seq, StepSequence};

    fn item(phase: &str, steps: StepSequence, label: Label) -> LabeledSequence {
        LabeledSequence {
            phase: phase.to_string(),
            steps,
            label,
            provenance: Provenance {
                generator: "hand".to_string(),
                seed: 0,
                mutation: "hand".to_string(),
            },
        }
    }

    /// One item per label over the P5 rules, with decisions worked out by
    /// hand from the metric definitions.
    fn hand_built_items() -> Vec<LabeledSequence> {
        vec![
            item("P5", seq(&["S22", "S23", "S24", "S25"]), Label::Valid),
            item("P5", seq(&["S22", "S24", "S23", "S25"]), Label::Order),
            item("P5", seq(&["S22", "S23", "S25"]), Label::Content),
            item("P5", seq(&["S22", "S24", "S23"]), Label::Both),
        ]
    }

    #[test]
    fn rule_checker_is_perfect_on_generated_benchmarks() {
        let rs = demo::demo_ruleset();
        let items =
            build_benchmark(&rs, &BenchmarkSpec::with_counts(24, 12, 12, 12).seeded(3)).unwrap();
        let opts = MetaEvalOptions {
            evaluators: vec![EvaluatorId::RuleChecker],
            ..MetaEvalOptions::default()
        };
        let report = run_metaeval(&items, &rs, &opts, &[]).unwrap();
        let rule = report.column("Rule").unwrap();
        for subset in Subset::ALL {
            assert_eq!(rule.accuracy(subset), Some(1.0), "{subset}");
        }
    }

    #[test]
    fn hand_built_set_matches_hand_computed_decisions() {
        let rs = demo::p5_ruleset();
        let report =
            run_metaeval(&hand_built_items(), &rs, &MetaEvalOptions::default(), &[]).unwrap();

        // NED: distances to [S22,S23,S24,S25] are 0, 2, 1, 2; similarities
        // 1.0, 0.5, 0.75, 0.5; decisions valid, invalid, valid, invalid.
        let ned = report.column("NED").unwrap();
        assert_eq!(ned.stats(Subset::Valid).correct, 1);
        assert_eq!(ned.stats(Subset::Order).correct, 1);
        assert_eq!(ned.stats(Subset::Content).correct, 0);
        assert_eq!(ned.stats(Subset::Both).correct, 1);
        assert_eq!(ned.stats(Subset::Invalid).correct, 2);
        assert_eq!(ned.stats(Subset::Invalid).n, 3);

        // JIS: set similarities 1.0, 1.0, 0.75, 0.75; every decision valid,
        // so only the Valid item is scored correctly.
        let jis = report.column("JIS").unwrap();
        assert_eq!(jis.stats(Subset::Valid).correct, 1);
        assert_eq!(jis.stats(Subset::Order).correct, 0);
        assert_eq!(jis.stats(Subset::Content).correct, 0);
        assert_eq!(jis.stats(Subset::Both).correct, 0);

        // ROA: 1.0, 5/6, 1.0, 2/3; decisions valid, valid, valid, invalid.
        let roa = report.column("ROA").unwrap();
        assert_eq!(roa.stats(Subset::Valid).correct, 1);
        assert_eq!(roa.stats(Subset::Order).correct, 0);
        assert_eq!(roa.stats(Subset::Content).correct, 0);
        assert_eq!(roa.stats(Subset::Both).correct, 1);

        // The rule checker is correct on all four by construction.
        let rule = report.column("Rule").unwrap();
        for subset in Subset::ALL {
            assert_eq!(rule.accuracy(subset), Some(1.0));
        }
    }

    #[test]
    fn single_canonical_valid_item_scores_perfectly_under_ned() {
        let rs = demo::p5_ruleset();
        let items = vec![item("P5", seq(&["S22", "S23", "S24", "S25"]), Label::Valid)];
        let opts = MetaEvalOptions {
            evaluators: vec![EvaluatorId::Ned],
            ..MetaEvalOptions::default()
        };
        let report = run_metaeval(&items, &rs, &opts, &[]).unwrap();
        assert_eq!(
            report.column("NED").unwrap().accuracy(Subset::Valid),
            Some(1.0)
        );
    }

    #[test]
    fn invalid_aggregate_is_the_count_weighted_mean() {
        let rs = demo::demo_ruleset();
        let items =
            build_benchmark(&rs, &BenchmarkSpec::with_counts(12, 9, 6, 3).seeded(5)).unwrap();
        let report = run_metaeval(&items, &rs, &MetaEvalOptions::default(), &[]).unwrap();
        for col in &report.columns {
            let inv = col.stats(Subset::Invalid);
            let parts = [
                col.stats(Subset::Order),
                col.stats(Subset::Content),
                col.stats(Subset::Both),
            ];
            assert_eq!(inv.n, parts.iter().map(|s| s.n).sum::<usize>());
            assert_eq!(inv.correct, parts.iter().map(|s| s.correct).sum::<usize>());
        }
        let ned = report.column("NED").unwrap();
        assert_eq!(ned.stats(Subset::Order).n, 9);
        assert_eq!(ned.stats(Subset::Content).n, 6);
        assert_eq!(ned.stats(Subset::Both).n, 3);
    }

    #[test]
    fn report_is_invariant_under_item_permutation() {
        let rs = demo::demo_ruleset();
        let mut items =
            build_benchmark(&rs, &BenchmarkSpec::with_counts(8, 8, 8, 8).seeded(11)).unwrap();
        let forward = run_metaeval(&items, &rs, &MetaEvalOptions::default(), &[]).unwrap();
        items.reverse();
        let backward = run_metaeval(&items, &rs, &MetaEvalOptions::default(), &[]).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn directional_biases_on_the_default_benchmark() {
        // The qualitative misalignment pattern: reference-similarity metrics
        // reject valid variation (low Valid accuracy, high Invalid accuracy)
        // while pairwise order agreement accepts order errors (high Valid
        // accuracy, low OE accuracy).
        let rs = demo::demo_ruleset();
        let items = build_benchmark(&rs, &BenchmarkSpec::default()).unwrap();
        let report = run_metaeval(&items, &rs, &MetaEvalOptions::default(), &[]).unwrap();

        let acc =
            |name: &str, subset: Subset| report.column(name).unwrap().accuracy(subset).unwrap();
        let ned_gap = acc("NED", Subset::Invalid) - acc("NED", Subset::Valid);
        assert!(ned_gap >= 0.20, "NED invalid-valid gap {ned_gap:.3}");
        let jis_gap = acc("JIS", Subset::Invalid) - acc("JIS", Subset::Valid);
        assert!(jis_gap >= 0.10, "JIS invalid-valid gap {jis_gap:.3}");
        assert!(
            acc("ROA", Subset::Valid) >= 0.70,
            "ROA valid {:.3}",
            acc("ROA", Subset::Valid)
        );
        assert!(
            acc("ROA", Subset::Order) <= 0.50,
            "ROA OE {:.3}",
            acc("ROA", Subset::Order)
        );
        assert!(acc("ROA", Subset::Valid) > acc("ROA", Subset::Order));
        assert_eq!(acc("Rule", Subset::Valid), 1.0);
        assert_eq!(acc("Rule", Subset::Invalid), 1.0);
    }

    struct FixedJudge {
        name: &'static str,
        decide_valid: fn(&StepSequence) -> Option<bool>,
    }

    impl PlanJudge for FixedJudge {
        fn name(&self) -> &str {
            self.name
        }

        fn decide(
            &self,
            seq: &StepSequence,
            _phase: &str,
            _rs: &RuleSet,
        ) -> Result<Option<bool>, JudgeError> {
            Ok((self.decide_valid)(seq))
        }
    }

    struct DownJudge;

    impl PlanJudge for DownJudge {
        fn name(&self) -> &str {
            "down"
        }

        fn decide(
            &self,
            _seq: &StepSequence,
            _phase: &str,
            _rs: &RuleSet,
        ) -> Result<Option<bool>, JudgeError> {
            Err(JudgeError::Unavailable("connection refused".into()))
        }
    }

    #[test]
    fn judge_columns_score_decisions_and_abstentions() {
        let rs = demo::p5_ruleset();
        // Accepts everything of length 4, abstains on length 3.
        let judge = FixedJudge {
            name: "len4",
            decide_valid: |s| (s.len() != 3).then_some(s.len() == 4),
        };
        let opts = MetaEvalOptions {
            evaluators: vec![EvaluatorId::Judge("len4".into())],
            ..MetaEvalOptions::default()
        };
        let report = run_metaeval(&hand_built_items(), &rs, &opts, &[&judge]).unwrap();
        let col = report.column("Judge:len4").unwrap();
        assert!(col.available);
        // Valid (len 4, says valid): correct. OE (len 4, says valid): wrong.
        // CE (len 3, abstains): wrong and abstained. BE (len 3): same.
        assert_eq!(col.stats(Subset::Valid).correct, 1);
        assert_eq!(col.stats(Subset::Order).correct, 0);
        assert_eq!(col.stats(Subset::Content).correct, 0);
        assert_eq!(col.stats(Subset::Content).abstained, 1);
        assert_eq!(col.stats(Subset::Both).abstained, 1);
        assert_eq!(col.stats(Subset::Invalid).abstained, 2);
    }

    #[test]
    fn unreachable_judge_marks_its_column_absent() {
        let rs = demo::p5_ruleset();
        let opts = MetaEvalOptions {
            evaluators: vec![EvaluatorId::RuleChecker, EvaluatorId::Judge("down".into())],
            ..MetaEvalOptions::default()
        };
        let report = run_metaeval(&hand_built_items(), &rs, &opts, &[&DownJudge]).unwrap();
        assert!(report.column("Rule").unwrap().available);
        let down = report.column("Judge:down").unwrap();
        assert!(!down.available);
        assert!(!report.all_available());
    }

    #[test]
    fn missing_judge_registration_is_an_error() {
        let rs = demo::p5_ruleset();
        let opts = MetaEvalOptions {
            evaluators: vec![EvaluatorId::Judge("ghost".into())],
            ..MetaEvalOptions::default()
        };
        assert!(matches!(
            run_metaeval(&hand_built_items(), &rs, &opts, &[]),
            Err(MetaEvalError::MissingJudge(_))
        ));
    }

    #[test]
    fn unknown_phase_in_items_is_an_error() {
        let rs = demo::p5_ruleset();
        let items = vec![item("P9", seq(&["S22"]), Label::Valid)];
        assert!(matches!(
            run_metaeval(&items, &rs, &MetaEvalOptions::default(), &[]),
            Err(MetaEvalError::UnknownPhase(_))
        ));
    }

    #[test]
    fn evaluator_id_parsing() {
        assert_eq!("ned".parse::<EvaluatorId>().unwrap(), EvaluatorId::Ned);
        assert_eq!(
            "Rule".parse::<EvaluatorId>().unwrap(),
            EvaluatorId::RuleChecker
        );
        assert_eq!(
            "judge:GPT".parse::<EvaluatorId>().unwrap(),
            EvaluatorId::Judge("GPT".into())
        );
        assert!("edit".parse::<EvaluatorId>().is_err());
    }

    #[test]
    fn markdown_rendering_mirrors_the_table_layout() {
        let rs = demo::p5_ruleset();
        let report =
            run_metaeval(&hand_built_items(), &rs, &MetaEvalOptions::default(), &[]).unwrap();
        let md = render_report(&report, ReportFormat::Markdown);
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[0], "| Subset | NED | JIS | ROA | Rule |");
        assert!(lines[2].starts_with("| Valid |"));
        assert!(lines[3].starts_with("| OE |"));
        assert!(lines[4].starts_with("| CE |"));
        assert!(lines[5].starts_with("| BE |"));
        assert!(lines[6].starts_with("| Invalid |"));
        assert!(md.contains("threshold: 0.7"));
        // Rule is the last column: five 100.0 cells.
        for line in &lines[2..7] {
            assert!(line.trim_end().ends_with("| 100.0 |"), "{line}");
        }
    }

    #[test]
    fn empty_input_renders_header_only_rows() {
        let rs = demo::p5_ruleset();
        let report = run_metaeval(&[], &rs, &MetaEvalOptions::default(), &[]).unwrap();
        let md = render_report(&report, ReportFormat::Markdown);
        assert!(md.starts_with("| Subset | NED | JIS | ROA | Rule |"));
        for line in md.lines().skip(2).take(5) {
            assert!(line.contains(" - |"), "{line}");
        }
    }

    #[test]
    fn json_rendering_round_trips() {
        let rs = demo::demo_ruleset();
        let items =
            build_benchmark(&rs, &BenchmarkSpec::with_counts(4, 4, 4, 4).seeded(9)).unwrap();
        let opts = MetaEvalOptions {
            seed: Some(9),
            ..MetaEvalOptions::default()
        };
        let report = run_metaeval(&items, &rs, &opts, &[]).unwrap();
        let json = render_report(&report, ReportFormat::Json);
        let back: MetaEvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn csv_rendering_echoes_config() {
        let rs = demo::p5_ruleset();
        let opts = MetaEvalOptions {
            seed: Some(3),
            ..MetaEvalOptions::default()
        };
        let report = run_metaeval(&hand_built_items(), &rs, &opts, &[]).unwrap();
        let csv = render_report(&report, ReportFormat::Csv);
        assert!(csv.starts_with("# threshold: 0.7\n# seed: 3\n# items: 4\n"));
        assert!(csv.contains("subset,evaluator,available,n,correct,abstained,accuracy_pct"));
        assert!(csv.contains("Valid,NED,true,1,1,0,100.0"));
    }
}
