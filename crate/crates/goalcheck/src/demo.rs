//! Rule sources shipped with the crate: the standalone anastomosis-test
//! specification, the full demo corpus, and two stress specifications used
//! to cross-validate the checker.
//!
//! The same files live under `rules/` at the repository root for use with
//! the command-line tool.

use crate::rules::{parse_rules, RuleSet};

/// Standalone anastomosis-test (P5) specification.
pub const P5_RULES: &str = include_str!("../../../rules/multibypass_p5.rules");

/// Full demo corpus: 45 steps, 11 phases, 50 ordering rules.
pub const DEMO_RULES: &str = include_str!("../../../rules/multibypass_demo.rules");

/// Stress specification A (each/last anchors, mixed gates).
pub const STRESS_A_RULES: &str = include_str!("../../../rules/stress_a.rules");

/// Stress specification B (required chain, overlapping terminals).
pub const STRESS_B_RULES: &str = include_str!("../../../rules/stress_b.rules");

pub fn p5_ruleset() -> RuleSet {
    parse_rules(P5_RULES).expect("shipped P5 rules parse")
}

pub fn demo_ruleset() -> RuleSet {
    parse_rules(DEMO_RULES).expect("shipped demo rules parse")
}

pub fn stress_a_ruleset() -> RuleSet {
    parse_rules(STRESS_A_RULES).expect("shipped stress A rules parse")
}

pub fn stress_b_ruleset() -> RuleSet {
    parse_rules(STRESS_B_RULES).expect("shipped stress B rules parse")
}
