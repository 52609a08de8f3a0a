//! Declarative phase rule specifications: the data model, a line-oriented
//! text DSL with parser and renderer, static validation, and canonical
//! reference construction.
//!
//! A rule specification for a phase has four components:
//!
//! * a **required** step set — steps mandatory to achieve the phase goal;
//! * an **allowed** step set — ancillary steps that may plausibly occur;
//! * **dependencies** — ordering constraints between occurrence anchors of
//!   two steps;
//! * **prohibitive orderings** — gated allowances (an ancillary step is
//!   permitted only after a gate step) and terminal closures (after the last
//!   occurrence of a terminal step, a set of steps may not reappear).

mod parse;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{cmp_codes, Vocabulary};

pub use parse::{parse_rules, parse_rules_with_vocab, ParseError, ParseErrorKind};
pub use validate::{canonical_reference, validate_ruleset, Diagnostic, DiagnosticKind};

pub(crate) use validate::required_precedence_edges;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("phase {0} has no rule specification")]
    UnknownPhase(String),
    #[error("cyclic dependencies among required steps of phase {0}")]
    CyclicDependencies(String),
}

/// Which occurrence of a step a rule refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    First,
    Last,
    /// Every occurrence. Only legal on the constrained side of a rule.
    Each,
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::First => write!(f, "first"),
            Anchor::Last => write!(f, "last"),
            Anchor::Each => write!(f, "each"),
        }
    }
}

/// A step occurrence selector, e.g. `first(S23)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selector {
    pub code: String,
    pub anchor: Anchor,
}

impl Selector {
    pub fn first(code: impl Into<String>) -> Self {
        Selector {
            code: code.into(),
            anchor: Anchor::First,
        }
    }

    pub fn last(code: impl Into<String>) -> Self {
        Selector {
            code: code.into(),
            anchor: Anchor::Last,
        }
    }

    pub fn each(code: impl Into<String>) -> Self {
        Selector {
            code: code.into(),
            anchor: Anchor::Each,
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.anchor, self.code)
    }
}

/// Ordering constraint: if `after.code` occurs, `before.code` must occur and
/// the anchored occurrence of `before` must strictly precede the anchored
/// occurrence of `after`. With `after.anchor == Each` the inequality must
/// hold for every occurrence of `after.code`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dependency {
    pub id: String,
    pub before: Selector,
    pub after: Selector,
}

/// Gated allowance: every occurrence of `step` must appear strictly after
/// the anchored occurrence of `gate.code`. If `step` occurs and `gate.code`
/// does not, the rule is violated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatedAllowance {
    pub id: String,
    pub step: String,
    pub gate: Selector,
}

/// Terminal closure: no code in `closed` may appear strictly after the last
/// occurrence of `terminal`. Vacuous when `terminal` is absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalClosure {
    pub id: String,
    pub terminal: String,
    pub closed: BTreeSet<String>,
}

/// The complete rule specification for one phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRuleSpec {
    pub phase: String,
    pub required: BTreeSet<String>,
    pub allowed: BTreeSet<String>,
    #[serde(default)]
    pub dependencies: Vec<Dependency>,
    #[serde(default)]
    pub gates: Vec<GatedAllowance>,
    #[serde(default)]
    pub terminals: Vec<TerminalClosure>,
}

impl PhaseRuleSpec {
    pub fn new(phase: impl Into<String>) -> Self {
        PhaseRuleSpec {
            phase: phase.into(),
            required: BTreeSet::new(),
            allowed: BTreeSet::new(),
            dependencies: Vec::new(),
            gates: Vec::new(),
            terminals: Vec::new(),
        }
    }

    /// A step is permitted for the phase iff it is required or allowed.
    pub fn is_permitted(&self, code: &str) -> bool {
        self.required.contains(code) || self.allowed.contains(code)
    }

    /// Required ∪ allowed, in numeric-suffix code order.
    pub fn permitted(&self) -> Vec<&str> {
        let mut all: Vec<&str> = self
            .required
            .iter()
            .chain(self.allowed.iter())
            .map(String::as_str)
            .collect();
        all.sort_by(|a, b| cmp_codes(a, b));
        all.dedup();
        all
    }

    /// Required steps in numeric-suffix code order.
    pub fn required_sorted(&self) -> Vec<&str> {
        let mut req: Vec<&str> = self.required.iter().map(String::as_str).collect();
        req.sort_by(|a, b| cmp_codes(a, b));
        req
    }

    /// Allowed (ancillary) steps in numeric-suffix code order.
    pub fn allowed_sorted(&self) -> Vec<&str> {
        let mut allowed: Vec<&str> = self.allowed.iter().map(String::as_str).collect();
        allowed.sort_by(|a, b| cmp_codes(a, b));
        allowed
    }

    /// Ids of all order rules (dependencies, gates, terminals).
    pub fn order_rule_ids(&self) -> Vec<&str> {
        self.dependencies
            .iter()
            .map(|d| d.id.as_str())
            .chain(self.gates.iter().map(|g| g.id.as_str()))
            .chain(self.terminals.iter().map(|t| t.id.as_str()))
            .collect()
    }

    /// True when the phase has at least one dependency, gate, or terminal.
    pub fn has_order_rules(&self) -> bool {
        !self.dependencies.is_empty() || !self.gates.is_empty() || !self.terminals.is_empty()
    }
}

/// A vocabulary together with the rule specifications of its phases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub vocabulary: Vocabulary,
    pub specs: BTreeMap<String, PhaseRuleSpec>,
}

impl RuleSet {
    pub fn spec(&self, phase: &str) -> Option<&PhaseRuleSpec> {
        self.specs.get(phase)
    }

    pub fn require_spec(&self, phase: &str) -> Result<&PhaseRuleSpec, RuleError> {
        self.spec(phase)
            .ok_or_else(|| RuleError::UnknownPhase(phase.to_string()))
    }

    /// Phase codes that have rule specifications, in numeric-suffix order.
    pub fn phase_codes(&self) -> Vec<&str> {
        let mut codes: Vec<&str> = self.specs.keys().map(String::as_str).collect();
        codes.sort_by(|a, b| cmp_codes(a, b));
        codes
    }
}

fn auto_id(phase: &str, kind: &str, ordinal: usize) -> String {
    format!("{phase}.{kind}.{ordinal}")
}

/// Renders a rule set in the DSL's normal form. `parse_rules` of the output
/// yields a rule set equal to the input.
pub fn render_rules(rs: &RuleSet) -> String {
    let mut out = String::new();
    for s in rs.vocabulary.steps() {
        out.push_str("step ");
        out.push_str(&s.code);
        if let Some(label) = &s.label {
            out.push_str(&format!(" {label:?}"));
        }
        out.push('\n');
    }
    if !rs.vocabulary.steps().is_empty() {
        out.push('\n');
    }
    for p in rs.vocabulary.phases() {
        out.push_str("phase_decl ");
        out.push_str(&p.code);
        if let Some(label) = &p.label {
            out.push_str(&format!(" {label:?}"));
        }
        if !p.aliases.is_empty() {
            out.push_str(" aliases ");
            let quoted: Vec<String> = p.aliases.iter().map(|a| format!("{a:?}")).collect();
            out.push_str(&quoted.join(", "));
        }
        out.push('\n');
    }

    let mut phases: Vec<&String> = rs.specs.keys().collect();
    phases.sort_by(|a, b| cmp_codes(a, b));
    for phase in phases {
        let spec = &rs.specs[phase];
        out.push('\n');
        out.push_str(&format!("phase {phase} {{\n"));
        if !spec.required.is_empty() {
            out.push_str(&format!(
                "  required: {}\n",
                spec.required_sorted().join(", ")
            ));
        }
        if !spec.allowed.is_empty() {
            out.push_str(&format!(
                "  allowed: {}\n",
                spec.allowed_sorted().join(", ")
            ));
        }
        for (i, d) in spec.dependencies.iter().enumerate() {
            out.push_str(&format!("  dep: {} < {}", d.before, d.after));
            if d.id != auto_id(phase, "dep", i + 1) {
                out.push_str(&format!(" @{}", d.id));
            }
            out.push('\n');
        }
        for (i, g) in spec.gates.iter().enumerate() {
            out.push_str(&format!("  gate: {} after {}", g.step, g.gate));
            if g.id != auto_id(phase, "gate", i + 1) {
                out.push_str(&format!(" @{}", g.id));
            }
            out.push('\n');
        }
        for (i, t) in spec.terminals.iter().enumerate() {
            let mut closed: Vec<&str> = t.closed.iter().map(String::as_str).collect();
            closed.sort_by(|a, b| cmp_codes(a, b));
            out.push_str(&format!(
                "  terminal: last({}) closes {{{}}}",
                t.terminal,
                closed.join(", ")
            ));
            if t.id != auto_id(phase, "terminal", i + 1) {
                out.push_str(&format!(" @{}", t.id));
            }
            out.push('\n');
        }
        out.push_str("}\n");
    }
    out
}
