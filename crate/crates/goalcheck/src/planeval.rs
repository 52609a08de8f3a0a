//! Scoring of structured planner outputs under goal-satisfiability:
//! current-phase completion, next-phase planning, and (for the end-to-end
//! task) current-step recognition.
//!
//! A planner answers with a fixed JSON schema:
//!
//! ```json
//! {
//!   "current_step": "jejunal clamping",
//!   "remaining_steps": ["S24", "S25"],
//!   "next_phase": "jejunal separation",
//!   "next_phase_steps": ["S26", "S27"],
//!   "explanation": "..."
//! }
//! ```
//!
//! `current_step` is only meaningful for task 1, where the planner must also
//! recognize the ongoing step. Step names are resolved against the
//! vocabulary by code or label; unresolvable names are kept verbatim as
//! out-of-vocabulary codes so the checker reports them as disallowed steps.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker;
use crate::metaeval::ReportFormat;
use crate::model::{StepSequence, Vocabulary};
use crate::rules::RuleSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("phase {0} has no rule specification")]
    UnknownPhase(String),
    #[error("step recognition is only scored for task1, not {0}")]
    TaskMismatch(String),
}

/// The progressive task setups: end-to-end planning, planning with explicit
/// state, and the three knowledge-injection variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskId {
    #[serde(rename = "task1")]
    Task1,
    #[serde(rename = "task2")]
    Task2,
    #[serde(rename = "task3.1")]
    Task31,
    #[serde(rename = "task3.2")]
    Task32,
    #[serde(rename = "task3.3")]
    Task33,
}

impl TaskId {
    pub const ALL: [TaskId; 5] = [
        TaskId::Task1,
        TaskId::Task2,
        TaskId::Task31,
        TaskId::Task32,
        TaskId::Task33,
    ];
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskId::Task1 => write!(f, "task1"),
            TaskId::Task2 => write!(f, "task2"),
            TaskId::Task31 => write!(f, "task3.1"),
            TaskId::Task32 => write!(f, "task3.2"),
            TaskId::Task33 => write!(f, "task3.3"),
        }
    }
}

impl FromStr for TaskId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "task1" => Ok(TaskId::Task1),
            "task2" => Ok(TaskId::Task2),
            "task3.1" => Ok(TaskId::Task31),
            "task3.2" => Ok(TaskId::Task32),
            "task3.3" => Ok(TaskId::Task33),
            other => Err(format!("unknown task id {other:?}")),
        }
    }
}

/// The evaluation context of one planner invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanContext {
    pub phase: String,
    #[serde(default)]
    pub completed: StepSequence,
    /// Ground-truth current step; injected into the combined plan for
    /// tasks 2 and 3 and used as the recognition target for task 1.
    #[serde(default)]
    pub current_step: Option<String>,
    pub task: TaskId,
}

/// A parsed planner output with step names already resolved to codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanOutput {
    pub remaining: StepSequence,
    pub predicted_current: Option<String>,
    pub next_phase: String,
    pub next_steps: StepSequence,
    pub explanation: String,
}

/// Resolves a free-text step name to a vocabulary code, or keeps the
/// trimmed text verbatim as a synthetic out-of-vocabulary code.
fn resolve_step_name(vocab: &Vocabulary, name: &str) -> String {
    match vocab.resolve_step(name) {
        Some(step) => step.code.clone(),
        None => name.trim().to_string(),
    }
}

fn string_field(value: &serde_json::Value, field: &str) -> Result<String, PlanError> {
    value
        .get(field)
        .ok_or_else(|| PlanError::Schema(format!("missing field {field:?}")))?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| PlanError::Schema(format!("field {field:?} is not a string")))
}

fn step_list_field(
    value: &serde_json::Value,
    field: &str,
    vocab: &Vocabulary,
) -> Result<StepSequence, PlanError> {
    let array = value
        .get(field)
        .ok_or_else(|| PlanError::Schema(format!("missing field {field:?}")))?
        .as_array()
        .ok_or_else(|| PlanError::Schema(format!("field {field:?} is not an array")))?;
    let mut steps = StepSequence::empty();
    for entry in array {
        let name = entry
            .as_str()
            .ok_or_else(|| PlanError::Schema(format!("field {field:?} contains a non-string")))?;
        steps.push(resolve_step_name(vocab, name));
    }
    Ok(steps)
}

/// Parses a planner's raw JSON answer against the fixed schema. Unknown
/// extra fields are ignored; a missing required field or a non-object is a
/// schema error.
pub fn parse_plan_output(json: &str, vocab: &Vocabulary) -> Result<PlanOutput, PlanError> {
    let value: serde_json::Value = serde_json::from_str(json)
        .map_err(|e| PlanError::Schema(format!("not valid JSON: {e}")))?;
    if !value.is_object() {
        return Err(PlanError::Schema("output is not a JSON object".to_string()));
    }
    let remaining = step_list_field(&value, "remaining_steps", vocab)?;
    let next_phase = string_field(&value, "next_phase")?;
    let next_steps = step_list_field(&value, "next_phase_steps", vocab)?;
    let predicted_current = match value.get("current_step") {
        Some(serde_json::Value::String(s)) => Some(resolve_step_name(vocab, s)),
        Some(serde_json::Value::Null) | None => None,
        Some(_) => {
            return Err(PlanError::Schema(
                "field \"current_step\" is not a string".to_string(),
            ))
        }
    };
    let explanation = value
        .get("explanation")
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    Ok(PlanOutput {
        remaining,
        predicted_current,
        next_phase,
        next_steps,
        explanation,
    })
}

/// One check's outcome plus its diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl EvalOutcome {
    fn fail(diagnostic: impl Into<String>) -> Self {
        EvalOutcome {
            ok: false,
            diagnostics: vec![diagnostic.into()],
        }
    }
}

/// Current-phase completion: checks `completed ++ [current] ++ remaining`
/// against the current phase. The current step is the ground truth for
/// tasks 2 and 3 and the planner's own prediction for task 1.
pub fn eval_current(
    ctx: &PlanContext,
    out: &PlanOutput,
    rs: &RuleSet,
) -> Result<EvalOutcome, PlanError> {
    if rs.spec(&ctx.phase).is_none() {
        return Err(PlanError::UnknownPhase(ctx.phase.clone()));
    }
    let current = if ctx.task == TaskId::Task1 {
        match &out.predicted_current {
            Some(code) => code.clone(),
            None => {
                return Ok(EvalOutcome::fail(
                    "task1 output has no predicted current step",
                ))
            }
        }
    } else {
        match &ctx.current_step {
            Some(code) => code.clone(),
            None => {
                return Ok(EvalOutcome::fail(
                    "context has no ground-truth current step",
                ))
            }
        }
    };
    let mut combined = ctx.completed.clone();
    combined.push(current);
    for code in out.remaining.iter() {
        combined.push(code);
    }
    let verdict = checker::check(&combined, &ctx.phase, rs)
        .map_err(|_| PlanError::UnknownPhase(ctx.phase.clone()))?;
    Ok(EvalOutcome {
        ok: verdict.valid,
        diagnostics: verdict
            .violations
            .iter()
            .map(|v| v.message.clone())
            .collect(),
    })
}

/// Next-phase planning: resolves the planner's own predicted phase name and
/// checks the predicted step sequence against that phase. The context's
/// phase is never consulted — exact next-phase prediction is not scored.
pub fn eval_next(out: &PlanOutput, rs: &RuleSet) -> EvalOutcome {
    let phase = match rs.vocabulary.resolve_phase(&out.next_phase) {
        Ok(Some(phase)) => phase.code.clone(),
        Ok(None) => {
            return EvalOutcome::fail(format!(
                "PhaseUnresolved: {:?} names no phase",
                out.next_phase
            ))
        }
        Err(e) => return EvalOutcome::fail(format!("PhaseUnresolved: {e}")),
    };
    match checker::check(&out.next_steps, &phase, rs) {
        Ok(verdict) => EvalOutcome {
            ok: verdict.valid,
            diagnostics: verdict
                .violations
                .iter()
                .map(|v| v.message.clone())
                .collect(),
        },
        Err(_) => EvalOutcome::fail(format!("phase {phase} has no rule specification")),
    }
}

/// Task 1 current-step recognition: exact match between the resolved
/// predicted step code and the ground truth.
pub fn step_recognition(ctx: &PlanContext, out: &PlanOutput) -> Result<bool, PlanError> {
    if ctx.task != TaskId::Task1 {
        return Err(PlanError::TaskMismatch(ctx.task.to_string()));
    }
    let Some(truth) = &ctx.current_step else {
        return Ok(false);
    };
    Ok(out.predicted_current.as_deref() == Some(truth.as_str()))
}

/// One ingested planner record: its context, the model that answered, and
/// the raw output (a JSON object, or a string containing JSON).
#[derive(Debug, Clone, Deserialize)]
pub struct PlanRecord {
    pub context: PlanContext,
    pub model: String,
    pub output: serde_json::Value,
}

/// The scored record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanScore {
    pub model: String,
    pub task: TaskId,
    /// Present iff the record is a task1 record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_ok: Option<bool>,
    pub current_ok: bool,
    pub next_ok: bool,
    pub malformed_output: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

fn failed_score(rec: &PlanRecord, diagnostics: Vec<String>, malformed: bool) -> PlanScore {
    PlanScore {
        model: rec.model.clone(),
        task: rec.context.task,
        step_ok: (rec.context.task == TaskId::Task1).then_some(false),
        current_ok: false,
        next_ok: false,
        malformed_output: malformed,
        diagnostics,
    }
}

/// Scores one record. Outputs that fail the schema score false on both
/// checks and are tallied as malformed; a context phase without rules also
/// scores false with a diagnostic.
pub fn score_record(rec: &PlanRecord, rs: &RuleSet) -> PlanScore {
    let mut diagnostics = Vec::new();

    // Histories may spill over from earlier phases; keep the longest suffix
    // that stays within the current phase's permitted steps.
    let mut context = rec.context.clone();
    if let Some(spec) = rs.spec(&context.phase) {
        let codes = context.completed.codes();
        let boundary = codes
            .iter()
            .rposition(|c| !spec.is_permitted(c))
            .map(|p| p + 1)
            .unwrap_or(0);
        if boundary > 0 {
            diagnostics.push(format!(
                "completed history truncated at position {boundary}: earlier steps are outside {}",
                context.phase
            ));
            context.completed = codes[boundary..].iter().cloned().collect();
        }
    }

    let raw = match &rec.output {
        serde_json::Value::String(text) => text.clone(),
        other => other.to_string(),
    };
    let output = match parse_plan_output(&raw, &rs.vocabulary) {
        Ok(output) => output,
        Err(e) => {
            diagnostics.push(e.to_string());
            return failed_score(rec, diagnostics, true);
        }
    };

    let current = match eval_current(&context, &output, rs) {
        Ok(outcome) => outcome,
        Err(e) => EvalOutcome::fail(e.to_string()),
    };
    let next = eval_next(&output, rs);
    let step_ok = (context.task == TaskId::Task1)
        .then(|| step_recognition(&context, &output).unwrap_or(false));

    diagnostics.extend(current.diagnostics.iter().map(|d| format!("current: {d}")));
    diagnostics.extend(next.diagnostics.iter().map(|d| format!("next: {d}")));
    PlanScore {
        model: rec.model.clone(),
        task: context.task,
        step_ok,
        current_ok: current.ok,
        next_ok: next.ok,
        malformed_output: false,
        diagnostics,
    }
}

/// A record line that could not be ingested at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

/// Reads planner records from JSONL; unreadable lines are returned
/// separately so the caller can tally and report them.
pub fn read_records(text: &str) -> (Vec<PlanRecord>, Vec<RecordError>) {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PlanRecord>(line) {
            Ok(rec) => records.push(rec),
            Err(e) => errors.push(RecordError {
                line: idx + 1,
                message: e.to_string(),
            }),
        }
    }
    (records, errors)
}

/// Accuracy row for one (model, task) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub model: String,
    pub task: TaskId,
    pub n: usize,
    /// Step recognition hits; only populated for task1 groups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_correct: Option<usize>,
    pub current_correct: usize,
    pub next_correct: usize,
    pub malformed_outputs: usize,
}

impl GroupStats {
    pub fn step_accuracy(&self) -> Option<f64> {
        self.step_correct.map(|c| c as f64 / self.n as f64)
    }

    pub fn current_accuracy(&self) -> f64 {
        self.current_correct as f64 / self.n as f64
    }

    pub fn next_accuracy(&self) -> f64 {
        self.next_correct as f64 / self.n as f64
    }
}

/// The aggregate table: one row per (model, task) group, plus the count of
/// record lines that could not be ingested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub groups: Vec<GroupStats>,
    pub unreadable_records: usize,
}

impl PlanReport {
    pub fn group(&self, model: &str, task: TaskId) -> Option<&GroupStats> {
        self.groups
            .iter()
            .find(|g| g.model == model && g.task == task)
    }
}

/// Groups scores by (model, task) and counts hits. Empty groups are simply
/// absent.
pub fn aggregate(scores: &[PlanScore], unreadable_records: usize) -> PlanReport {
    let mut groups: BTreeMap<(String, TaskId), GroupStats> = BTreeMap::new();
    for score in scores {
        let entry = groups
            .entry((score.model.clone(), score.task))
            .or_insert_with(|| GroupStats {
                model: score.model.clone(),
                task: score.task,
                n: 0,
                step_correct: (score.task == TaskId::Task1).then_some(0),
                current_correct: 0,
                next_correct: 0,
                malformed_outputs: 0,
            });
        entry.n += 1;
        if let (Some(total), Some(ok)) = (entry.step_correct.as_mut(), score.step_ok) {
            *total += usize::from(ok);
        }
        entry.current_correct += usize::from(score.current_ok);
        entry.next_correct += usize::from(score.next_ok);
        entry.malformed_outputs += usize::from(score.malformed_output);
    }
    PlanReport {
        groups: groups.into_values().collect(),
        unreadable_records,
    }
}

fn fmt_pct(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

/// Renders the aggregate table in the requested format.
pub fn render_plan_report(report: &PlanReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report).expect("report serializes");
            text.push('\n');
            text
        }
        ReportFormat::Csv => {
            let mut out = String::new();
            writeln!(out, "# unreadable_records: {}", report.unreadable_records).unwrap();
            writeln!(
                out,
                "model,task,n,step_acc_pct,current_pct,next_pct,malformed"
            )
            .unwrap();
            for g in &report.groups {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    g.model,
                    g.task,
                    g.n,
                    g.step_accuracy().map(fmt_pct).unwrap_or_else(|| "-".into()),
                    fmt_pct(g.current_accuracy()),
                    fmt_pct(g.next_accuracy()),
                    g.malformed_outputs
                )
                .unwrap();
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| Model | Task | N | StepAcc | Current | Next | Malformed |\n");
            out.push_str("| --- | --- | --- | --- | --- | --- | --- |\n");
            for g in &report.groups {
                writeln!(
                    out,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    g.model,
                    g.task,
                    g.n,
                    g.step_accuracy().map(fmt_pct).unwrap_or_else(|| "-".into()),
                    fmt_pct(g.current_accuracy()),
                    fmt_pct(g.next_accuracy()),
                    g.malformed_outputs
                )
                .unwrap();
            }
            writeln!(out, "\nunreadable records: {}", report.unreadable_records).unwrap();
            out
        }
    }
}
