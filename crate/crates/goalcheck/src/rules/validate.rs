//! Static validation of parsed rule sets and canonical reference
//! construction.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{cmp_codes, StepSequence};

use super::{PhaseRuleSpec, RuleError, RuleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagnosticKind {
    EmptyRequired,
    RequiredAllowedOverlap,
    UnpermittedRuleStep,
    TerminalSelfClosure,
    DependencyCycle,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DiagnosticKind::EmptyRequired => "empty required set",
            DiagnosticKind::RequiredAllowedOverlap => "required/allowed overlap",
            DiagnosticKind::UnpermittedRuleStep => "rule references unpermitted step",
            DiagnosticKind::TerminalSelfClosure => "terminal closes itself",
            DiagnosticKind::DependencyCycle => "dependency cycle",
        };
        write!(f, "{name}")
    }
}

/// A validation finding. Diagnostics are data, not errors: a rule set with
/// diagnostics still parses and can be inspected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub phase: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_id: Option<String>,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.phase, self.kind, self.message)
    }
}

/// Precedence edges over required steps: one `(before, after)` pair per rule
/// that orders two required steps when each occurs exactly once.
///
/// Dependencies contribute `before.code -> after.code`; gates contribute
/// `gate.code -> step` when the gated step is itself required; terminal
/// closures contribute `closed -> terminal` for required closed codes. In a
/// sequence containing each required step exactly once, every anchor
/// collapses to the step's single occurrence, so these edges are exactly the
/// constraints a canonical reference must satisfy.
pub(crate) fn required_precedence_edges(spec: &PhaseRuleSpec) -> Vec<(&str, &str)> {
    let req = &spec.required;
    let mut edges = Vec::new();
    for d in &spec.dependencies {
        if req.contains(&d.before.code) && req.contains(&d.after.code) {
            edges.push((d.before.code.as_str(), d.after.code.as_str()));
        }
    }
    for g in &spec.gates {
        if req.contains(&g.step) && req.contains(&g.gate.code) {
            edges.push((g.gate.code.as_str(), g.step.as_str()));
        }
    }
    for t in &spec.terminals {
        if req.contains(&t.terminal) {
            for c in &t.closed {
                if req.contains(c) && c != &t.terminal {
                    edges.push((c.as_str(), t.terminal.as_str()));
                }
            }
        }
    }
    edges
}

/// Key ordering codes by numeric suffix for deterministic tie-breaking.
#[derive(PartialEq, Eq)]
struct CodeKey<'a>(&'a str);

impl Ord for CodeKey<'_> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        cmp_codes(self.0, other.0)
    }
}

impl PartialOrd for CodeKey<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Topologically sorts the required steps under the precedence graph,
/// breaking ties by ascending numeric step suffix. Returns `None` on a
/// cycle.
fn topo_required(spec: &PhaseRuleSpec) -> Option<Vec<&str>> {
    let mut indegree: BTreeMap<&str, usize> =
        spec.required.iter().map(|c| (c.as_str(), 0)).collect();
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (before, after) in required_precedence_edges(spec) {
        succ.entry(before).or_default().push(after);
        *indegree.get_mut(after).expect("edge endpoints required") += 1;
    }
    let mut ready: BinaryHeap<Reverse<CodeKey>> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(c, _)| Reverse(CodeKey(c)))
        .collect();
    let mut order = Vec::with_capacity(indegree.len());
    while let Some(Reverse(CodeKey(code))) = ready.pop() {
        order.push(code);
        for next in succ.get(code).into_iter().flatten() {
            let d = indegree.get_mut(next).expect("edge endpoints required");
            *d -= 1;
            if *d == 0 {
                ready.push(Reverse(CodeKey(next)));
            }
        }
    }
    (order.len() == indegree.len()).then_some(order)
}

/// The canonical reference for a phase: its required steps exactly once
/// each, topologically ordered by the precedence graph, ties broken by
/// ascending numeric step suffix. Deterministic.
pub fn canonical_reference(spec: &PhaseRuleSpec) -> Result<StepSequence, RuleError> {
    topo_required(spec)
        .map(|order| order.into_iter().collect())
        .ok_or_else(|| RuleError::CyclicDependencies(spec.phase.clone()))
}

/// Checks a parsed rule set for semantic defects the grammar cannot rule
/// out. An empty result means every phase admits at least one valid
/// sequence (its canonical reference).
pub fn validate_ruleset(rs: &RuleSet) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (phase, spec) in &rs.specs {
        if spec.required.is_empty() {
            out.push(Diagnostic {
                phase: phase.clone(),
                rule_id: None,
                kind: DiagnosticKind::EmptyRequired,
                message: "required is non-empty: a phase must name at least one mandatory step"
                    .to_string(),
            });
        }
        let overlap: Vec<&String> = spec.required.intersection(&spec.allowed).collect();
        if !overlap.is_empty() {
            let codes: Vec<&str> = overlap.iter().map(|s| s.as_str()).collect();
            out.push(Diagnostic {
                phase: phase.clone(),
                rule_id: None,
                kind: DiagnosticKind::RequiredAllowedOverlap,
                message: format!(
                    "steps declared both required and allowed: {}",
                    codes.join(", ")
                ),
            });
        }

        let unpermitted = |rule_id: &str, code: &str, out: &mut Vec<Diagnostic>| {
            if !spec.is_permitted(code) {
                out.push(Diagnostic {
                    phase: phase.clone(),
                    rule_id: Some(rule_id.to_string()),
                    kind: DiagnosticKind::UnpermittedRuleStep,
                    message: format!("step {code} is neither required nor allowed for {phase}"),
                });
            }
        };
        for d in &spec.dependencies {
            unpermitted(&d.id, &d.before.code, &mut out);
            unpermitted(&d.id, &d.after.code, &mut out);
        }
        for g in &spec.gates {
            unpermitted(&g.id, &g.step, &mut out);
            unpermitted(&g.id, &g.gate.code, &mut out);
        }
        for t in &spec.terminals {
            unpermitted(&t.id, &t.terminal, &mut out);
            for c in &t.closed {
                unpermitted(&t.id, c, &mut out);
            }
            if t.closed.contains(&t.terminal) {
                out.push(Diagnostic {
                    phase: phase.clone(),
                    rule_id: Some(t.id.clone()),
                    kind: DiagnosticKind::TerminalSelfClosure,
                    message: format!(
                        "terminal {} must not close itself; its repeats move the last anchor",
                        t.terminal
                    ),
                });
            }
        }

        if topo_required(spec).is_none() {
            out.push(Diagnostic {
                phase: phase.clone(),
                rule_id: None,
                kind: DiagnosticKind::DependencyCycle,
                message: format!(
                    "precedence rules among required steps of {phase} form a cycle; the required set cannot be ordered"
                ),
            });
        }
    }
    out
}
