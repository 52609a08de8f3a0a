//! A deliberately naive re-implementation of the checker, used to
//! cross-validate [`super::check`].
//!
//! Each rule is evaluated by literal quantifier expansion over sequence
//! indices: "there exists an anchored occurrence i", "for all occurrences
//! j". Nothing here shares code with the checker's position-map evaluation,
//! and only validity is reported. Sequences longer than the bound are
//! rejected so accidental use on large inputs fails loudly.

use crate::model::StepSequence;
use crate::rules::{Anchor, PhaseRuleSpec, RuleSet, Selector};

use super::CheckError;

/// Default sequence-length bound for oracle evaluation.
pub const DEFAULT_BOUND: usize = 10;

/// True when position `i` holds an occurrence of `sel.code` that matches
/// the selector's anchor, by explicit quantification over the other
/// positions.
fn anchored_at(seq: &StepSequence, i: usize, sel: &Selector) -> bool {
    if seq.get(i) != Some(sel.code.as_str()) {
        return false;
    }
    match sel.anchor {
        Anchor::First => (0..i).all(|k| seq.get(k) != Some(sel.code.as_str())),
        Anchor::Last => (i + 1..seq.len()).all(|k| seq.get(k) != Some(sel.code.as_str())),
        Anchor::Each => true,
    }
}

fn occurs(seq: &StepSequence, code: &str) -> bool {
    (0..seq.len()).any(|i| seq.get(i) == Some(code))
}

fn spec_holds(seq: &StepSequence, spec: &PhaseRuleSpec) -> bool {
    let n = seq.len();

    // Every element permitted.
    let content_ok = (0..n).all(|i| spec.is_permitted(seq.get(i).expect("index in range")));

    // Every required step occurs.
    let required_ok = spec.required.iter().all(|r| occurs(seq, r));

    // Dependencies: if the dependent step occurs, the prerequisite occurs
    // and every anchored dependent occurrence has an anchored prerequisite
    // occurrence strictly before it.
    let deps_ok = spec.dependencies.iter().all(|dep| {
        if !occurs(seq, &dep.after.code) {
            return true;
        }
        occurs(seq, &dep.before.code)
            && (0..n).all(|j| {
                !anchored_at(seq, j, &dep.after) || (0..j).any(|i| anchored_at(seq, i, &dep.before))
            })
    });

    // Gates: every occurrence of the gated step is strictly after an
    // anchored occurrence of the gate step.
    let gates_ok = spec.gates.iter().all(|gate| {
        (0..n).all(|j| {
            seq.get(j) != Some(gate.step.as_str())
                || (0..j).any(|i| anchored_at(seq, i, &gate.gate))
        })
    });

    // Terminals: no closed code at any position after a last-anchored
    // occurrence of the terminal.
    let terminals_ok = spec.terminals.iter().all(|term| {
        let last_sel = Selector::last(term.terminal.clone());
        (0..n).all(|j| {
            !term.closed.contains(seq.get(j).expect("index in range"))
                || (0..n).all(|t| !anchored_at(seq, t, &last_sel) || j < t)
        })
    });

    content_ok && required_ok && deps_ok && gates_ok && terminals_ok
}

/// Brute-force validity of `seq` for `phase`, with the default length
/// bound.
pub fn check_oracle(seq: &StepSequence, phase: &str, rs: &RuleSet) -> Result<bool, CheckError> {
    check_oracle_bounded(seq, phase, rs, DEFAULT_BOUND)
}

/// Brute-force validity with an explicit length bound.
pub fn check_oracle_bounded(
    seq: &StepSequence,
    phase: &str,
    rs: &RuleSet,
    bound: usize,
) -> Result<bool, CheckError> {
    if seq.len() > bound {
        return Err(CheckError::BoundExceeded {
            len: seq.len(),
            bound,
        });
    }
    let spec = rs
        .spec(phase)
        .ok_or_else(|| CheckError::UnknownPhase(phase.to_string()))?;
    Ok(spec_holds(seq, spec))
}

/// Enumerates every sequence of length `0..=max_len` over `alphabet` and
/// asserts that [`super::check`] and the oracle agree on each. Returns the
/// number of sequences examined.
pub fn assert_agreement(
    rs: &RuleSet,
    phase: &str,
    alphabet: &[&str],
    max_len: usize,
) -> Result<usize, CheckError> {
    let mut cases = 0;
    let mut stack: Vec<Vec<&str>> = vec![Vec::new()];
    while let Some(current) = stack.pop() {
        let seq: StepSequence = current.iter().copied().collect();
        let fast = super::check(&seq, phase, rs)?.valid;
        let slow = check_oracle_bounded(&seq, phase, rs, max_len)?;
        assert_eq!(
            fast, slow,
            "checker and oracle disagree on {seq} for {phase}"
        );
        cases += 1;
        if current.len() < max_len {
            for code in alphabet {
                let mut next = current.clone();
                next.push(code);
                stack.push(next);
            }
        }
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo;
    use crate::model::seq;

    #[test]
    fn oracle_agrees_on_spec_examples() {
        let rs = demo::p5_ruleset();
        assert!(check_oracle(&seq(&["S22", "S23", "S24", "S25"]), "P5", &rs).unwrap());
        assert!(!check_oracle(&StepSequence::empty(), "P5", &rs).unwrap());
    }

    #[test]
    fn oracle_rejects_sequences_over_the_bound() {
        let rs = demo::p5_ruleset();
        let long: StepSequence = std::iter::repeat_n("S22", 11).collect();
        assert_eq!(
            check_oracle(&long, "P5", &rs),
            Err(CheckError::BoundExceeded { len: 11, bound: 10 })
        );
        assert!(check_oracle_bounded(&long, "P5", &rs, 16).is_ok());
    }

    #[test]
    fn full_agreement_on_all_length_four_core_sequences() {
        // All 4^4 = 256 sequences over the four required P5 steps.
        let rs = demo::p5_ruleset();
        let alphabet = ["S22", "S23", "S24", "S25"];
        let mut cases = 0;
        let mut idx = [0usize; 4];
        loop {
            let s: StepSequence = idx.iter().map(|&i| alphabet[i]).collect();
            assert_eq!(
                crate::checker::check(&s, "P5", &rs).unwrap().valid,
                check_oracle(&s, "P5", &rs).unwrap(),
                "disagreement on {s}"
            );
            cases += 1;
            let mut carry = 3;
            loop {
                idx[carry] += 1;
                if idx[carry] < alphabet.len() {
                    break;
                }
                idx[carry] = 0;
                if carry == 0 {
                    assert_eq!(cases, 256);
                    return;
                }
                carry -= 1;
            }
        }
    }

    #[test]
    fn exhaustive_agreement_on_stress_specs_up_to_length_four() {
        // Short-length smoke version of the acceptance enumeration.
        let rs = demo::stress_a_ruleset();
        let n = assert_agreement(&rs, "PX1", &["T1", "T2", "T3", "T4", "T5"], 4).unwrap();
        assert_eq!(n, 781); // 1 + 5 + 25 + 125 + 625

        let rs = demo::stress_b_ruleset();
        assert_agreement(&rs, "PX2", &["U1", "U2", "U3", "U4", "U5"], 4).unwrap();
    }
}
