//! The goal-satisfiability judge: evaluates a step sequence against a
//! phase's rules and produces a verdict with classified violations.
//!
//! Every rule is evaluated — there is no short-circuiting — so the verdict's
//! error class (order, content, or both) is well-defined.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::StepSequence;
use crate::rules::{Anchor, PhaseRuleSpec, RuleSet, Selector};

pub mod oracle;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("phase {0} has no rule specification")]
    UnknownPhase(String),
    #[error("sequence length {len} exceeds the oracle bound {bound}")]
    BoundExceeded { len: usize, bound: usize },
}

/// What a violation says about the plan: the step content is wrong, or the
/// ordering is wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleClass {
    Content,
    Order,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    MissingRequired,
    DisallowedStep,
    DependencyOrder,
    GateOrder,
    TerminalReappearance,
}

impl ViolationKind {
    pub fn class(&self) -> RuleClass {
        match self {
            ViolationKind::MissingRequired | ViolationKind::DisallowedStep => RuleClass::Content,
            ViolationKind::DependencyOrder
            | ViolationKind::GateOrder
            | ViolationKind::TerminalReappearance => RuleClass::Order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub kind: ViolationKind,
    pub positions: Vec<usize>,
    pub message: String,
}

/// Invalid-plan taxonomy: order errors, content errors, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorClass {
    #[serde(rename = "OE")]
    Order,
    #[serde(rename = "CE")]
    Content,
    #[serde(rename = "BE")]
    Both,
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorClass::Order => write!(f, "OE"),
            ErrorClass::Content => write!(f, "CE"),
            ErrorClass::Both => write!(f, "BE"),
        }
    }
}

/// The checker's judgment: valid iff no rule of the target phase is
/// violated. `error_class` is `None` exactly when the sequence is valid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub valid: bool,
    pub error_class: Option<ErrorClass>,
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

/// Derives the error class from the violation kinds present: all order
/// violations yield `Order`, all content violations `Content`, a mix `Both`,
/// and no violations `None`.
pub fn classify(violations: &[Violation]) -> Option<ErrorClass> {
    let mut order = false;
    let mut content = false;
    for v in violations {
        match v.kind.class() {
            RuleClass::Order => order = true,
            RuleClass::Content => content = true,
        }
    }
    match (order, content) {
        (false, false) => None,
        (true, false) => Some(ErrorClass::Order),
        (false, true) => Some(ErrorClass::Content),
        (true, true) => Some(ErrorClass::Both),
    }
}

/// Evaluates `seq` against the rules of `phase`.
pub fn check(seq: &StepSequence, phase: &str, rs: &RuleSet) -> Result<Verdict, CheckError> {
    let spec = rs
        .spec(phase)
        .ok_or_else(|| CheckError::UnknownPhase(phase.to_string()))?;
    Ok(check_with_spec(seq, spec))
}

/// Position of the anchored occurrence of a selector's code, if the code
/// occurs. `Each` has no single position and is handled by the caller.
fn anchor_position(seq: &StepSequence, sel: &Selector) -> Option<usize> {
    match sel.anchor {
        Anchor::First => seq.first_index(&sel.code),
        Anchor::Last => seq.last_index(&sel.code),
        Anchor::Each => None,
    }
}

/// Evaluates `seq` against a single phase specification. All rules are
/// evaluated and violations accumulate; the verdict is valid iff none fire.
pub fn check_with_spec(seq: &StepSequence, spec: &PhaseRuleSpec) -> Verdict {
    let mut violations = Vec::new();
    let phase = &spec.phase;

    // Content: every element permitted, every required step present.
    for (pos, code) in seq.iter().enumerate() {
        if !spec.is_permitted(code) {
            violations.push(Violation {
                rule_id: format!("{phase}.permitted.{code}"),
                kind: ViolationKind::DisallowedStep,
                positions: vec![pos],
                message: format!("step {code} at position {pos} is not permitted for {phase}"),
            });
        }
    }
    for code in spec.required_sorted() {
        if !seq.contains(code) {
            violations.push(Violation {
                rule_id: format!("{phase}.required.{code}"),
                kind: ViolationKind::MissingRequired,
                positions: vec![],
                message: format!("required step {code} never occurs"),
            });
        }
    }

    // Dependencies: constrain the anchored occurrences when the dependent
    // step occurs. A missing prerequisite that is itself a required step is
    // already reported as MissingRequired, which keeps pure omissions
    // classified as content errors.
    for dep in &spec.dependencies {
        let after_positions: Vec<usize> = match dep.after.anchor {
            Anchor::First => seq.first_index(&dep.after.code).into_iter().collect(),
            Anchor::Last => seq.last_index(&dep.after.code).into_iter().collect(),
            Anchor::Each => seq.positions(&dep.after.code),
        };
        if after_positions.is_empty() {
            continue;
        }
        match anchor_position(seq, &dep.before) {
            None => {
                if !spec.required.contains(&dep.before.code) {
                    violations.push(Violation {
                        rule_id: dep.id.clone(),
                        kind: ViolationKind::DependencyOrder,
                        positions: after_positions,
                        message: format!(
                            "{} occurs but prerequisite {} never occurs",
                            dep.after.code, dep.before.code
                        ),
                    });
                }
            }
            Some(before_pos) => {
                let offending: Vec<usize> = after_positions
                    .iter()
                    .copied()
                    .filter(|&p| p <= before_pos)
                    .collect();
                if !offending.is_empty() {
                    violations.push(Violation {
                        rule_id: dep.id.clone(),
                        kind: ViolationKind::DependencyOrder,
                        positions: offending.clone(),
                        message: format!(
                            "{} at position {} must precede {} at position{} {}",
                            dep.before,
                            before_pos,
                            dep.after,
                            if offending.len() == 1 { "" } else { "s" },
                            offending
                                .iter()
                                .map(|p| p.to_string())
                                .collect::<Vec<_>>()
                                .join(", ")
                        ),
                    });
                }
            }
        }
    }

    // Gates: every occurrence of the gated step strictly after the anchored
    // gate occurrence. A present gated step whose gate never occurs can
    // never satisfy "after the gate has begun", so it violates the rule.
    for gate in &spec.gates {
        let step_positions = seq.positions(&gate.step);
        if step_positions.is_empty() {
            continue;
        }
        match anchor_position(seq, &gate.gate) {
            None => {
                violations.push(Violation {
                    rule_id: gate.id.clone(),
                    kind: ViolationKind::GateOrder,
                    positions: step_positions,
                    message: format!(
                        "{} occurs but gate step {} never occurs",
                        gate.step, gate.gate.code
                    ),
                });
            }
            Some(gate_pos) => {
                let offending: Vec<usize> = step_positions
                    .into_iter()
                    .filter(|&p| p <= gate_pos)
                    .collect();
                if !offending.is_empty() {
                    violations.push(Violation {
                        rule_id: gate.id.clone(),
                        kind: ViolationKind::GateOrder,
                        positions: offending.clone(),
                        message: format!(
                            "{} at position{} {} occurs before gate {} at position {}",
                            gate.step,
                            if offending.len() == 1 { "" } else { "s" },
                            offending
                                .iter()
                                .map(|p| p.to_string())
                                .collect::<Vec<_>>()
                                .join(", "),
                            gate.gate,
                            gate_pos
                        ),
                    });
                }
            }
        }
    }

    // Terminals: no closed code strictly after the last occurrence of the
    // terminal; vacuous when the terminal is absent.
    for term in &spec.terminals {
        let Some(term_pos) = seq.last_index(&term.terminal) else {
            continue;
        };
        let offending: Vec<usize> = seq
            .iter()
            .enumerate()
            .filter(|(p, code)| *p > term_pos && term.closed.contains(*code))
            .map(|(p, _)| p)
            .collect();
        if !offending.is_empty() {
            let codes: Vec<&str> = offending.iter().filter_map(|&p| seq.get(p)).collect();
            violations.push(Violation {
                rule_id: term.id.clone(),
                kind: ViolationKind::TerminalReappearance,
                positions: offending.clone(),
                message: format!(
                    "{} reappears after last({}) at position {}",
                    codes.join(", "),
                    term.terminal,
                    term_pos
                ),
            });
        }
    }

    let error_class = classify(&violations);
    Verdict {
        valid: violations.is_empty(),
        error_class,
        violations,
    }
}

/// Evaluates `seq` for plain validity against `phase` via [`check`],
/// discarding the violation detail.
pub fn is_valid(seq: &StepSequence, phase: &str, rs: &RuleSet) -> Result<bool, CheckError> {
    check(seq, phase, rs).map(|v| v.valid)
}
