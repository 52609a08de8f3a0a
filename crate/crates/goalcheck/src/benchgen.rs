//! Deterministic construction of labeled benchmark sets: rule-valid
//! procedural variations plus systematically injected invalid plans with
//! order errors (OE), content errors (CE), or both (BE).
//!
//! Generation is mutate-then-verify: every candidate is re-checked and
//! resampled until its verdict class matches the target label, so the
//! checker is the single source of truth for labels.
//!
//! All randomness flows from one 64-bit seed through ChaCha8, a seeded
//! counter-based stream cipher with a platform-independent output stream.
//! Per-bucket streams are derived with a splitmix64 hash of the seed, phase
//! code, and label, so generation order cannot affect the output.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{check_with_spec, ErrorClass, Verdict};
use crate::model::{cmp_codes, StepSequence, Vocabulary};
use crate::rules::{Anchor, PhaseRuleSpec, RuleError, RuleSet};

/// Ground-truth label of a benchmark item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Valid,
    #[serde(rename = "OE")]
    Order,
    #[serde(rename = "CE")]
    Content,
    #[serde(rename = "BE")]
    Both,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Valid, Label::Order, Label::Content, Label::Both];

    /// The label a verdict corresponds to.
    pub fn of(verdict: &Verdict) -> Label {
        match verdict.error_class {
            None => Label::Valid,
            Some(ErrorClass::Order) => Label::Order,
            Some(ErrorClass::Content) => Label::Content,
            Some(ErrorClass::Both) => Label::Both,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Valid => write!(f, "Valid"),
            Label::Order => write!(f, "OE"),
            Label::Content => write!(f, "CE"),
            Label::Both => write!(f, "BE"),
        }
    }
}

/// How a benchmark item came to be: the generator that produced it, the
/// benchmark seed, and a description of the applied construction or
/// mutation (naming the exercised rule ids and step codes).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub seed: u64,
    pub mutation: String,
}

/// One benchmark item: a sequence, its target phase, and its ground-truth
/// label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub phase: String,
    pub steps: StepSequence,
    pub label: Label,
    pub provenance: Provenance,
}

/// Per-label target counts and generation parameters.
///
/// The default counts (191 valid, 71 OE, 68 CE, 60 BE) give a 191/199
/// valid/invalid split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub valid: usize,
    pub order: usize,
    pub content: usize,
    pub both: usize,
    pub seed: u64,
    pub max_insertions: usize,
    pub max_len: usize,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            valid: 191,
            order: 71,
            content: 68,
            both: 60,
            seed: 0,
            max_insertions: 4,
            max_len: 16,
        }
    }
}

impl BenchmarkSpec {
    pub fn with_counts(valid: usize, order: usize, content: usize, both: usize) -> Self {
        BenchmarkSpec {
            valid,
            order,
            content,
            both,
            ..BenchmarkSpec::default()
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn count(&self, label: Label) -> usize {
        match label {
            Label::Valid => self.valid,
            Label::Order => self.order,
            Label::Content => self.content,
            Label::Both => self.both,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("cannot produce {requested} distinct {label} sequences for {phase} (got {produced})")]
    Unsatisfiable {
        phase: String,
        label: Label,
        requested: usize,
        produced: usize,
    },
    #[error("phase {0} has no order rules to violate")]
    NoApplicableMutation(String),
    #[error("no foreign step available to inject for phase {0}")]
    NoForeignStep(String),
    #[error("generated item for {phase} classified as {got} instead of {want}")]
    LabelMismatch {
        phase: String,
        want: Label,
        got: Label,
    },
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// The pinned generator: ChaCha8 seeded from a 64-bit value.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one (phase, label) generation bucket.
fn bucket_seed(base: u64, phase: &str, label: Label) -> u64 {
    let mut h = splitmix64(base);
    for b in phase.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ label as u64)
}

/// A random topological order of the required steps: at each step the
/// canonically next step is taken with probability 0.6, otherwise a
/// uniformly random ready step. Biases samples toward the canonical order
/// while keeping every linear extension reachable.
fn random_required_order(spec: &PhaseRuleSpec, rng: &mut impl Rng) -> Option<Vec<String>> {
    let mut indegree: std::collections::BTreeMap<&str, usize> =
        spec.required.iter().map(|c| (c.as_str(), 0)).collect();
    let mut succ: std::collections::BTreeMap<&str, Vec<&str>> = std::collections::BTreeMap::new();
    for (before, after) in crate::rules::required_precedence_edges(spec) {
        succ.entry(before).or_default().push(after);
        *indegree.get_mut(after).expect("edge endpoint required") += 1;
    }
    let mut ready: Vec<&str> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(c, _)| *c)
        .collect();
    let mut order = Vec::with_capacity(indegree.len());
    while !ready.is_empty() {
        ready.sort_by(|a, b| cmp_codes(a, b));
        let idx = if ready.len() == 1 || rng.gen_bool(0.6) {
            0
        } else {
            rng.gen_range(0..ready.len())
        };
        let code = ready.remove(idx);
        order.push(code.to_string());
        for next in succ.get(code).into_iter().flatten() {
            let d = indegree.get_mut(next).expect("edge endpoint required");
            *d -= 1;
            if *d == 0 {
                ready.push(next);
            }
        }
    }
    (order.len() == indegree.len()).then_some(order)
}

/// Conservative structural test that inserting `code` at `pos` cannot break
/// any rule. True only when `code` is an ancillary step untouched by
/// dependencies, not a gate anchor or terminal step, every gate on `code`
/// has its anchor strictly before `pos`, and every terminal closing `code`
/// has its last occurrence at or after `pos`.
pub fn insertion_is_safe(seq: &StepSequence, spec: &PhaseRuleSpec, code: &str, pos: usize) -> bool {
    if pos > seq.len() || !spec.allowed.contains(code) {
        return false;
    }
    let involved_in_dep = spec
        .dependencies
        .iter()
        .any(|d| d.before.code == code || d.after.code == code);
    let is_gate_anchor = spec.gates.iter().any(|g| g.gate.code == code);
    let is_terminal = spec.terminals.iter().any(|t| t.terminal == code);
    if involved_in_dep || is_gate_anchor || is_terminal {
        return false;
    }
    for gate in spec.gates.iter().filter(|g| g.step == code) {
        let anchor = match gate.gate.anchor {
            Anchor::First => seq.first_index(&gate.gate.code),
            Anchor::Last => seq.last_index(&gate.gate.code),
            Anchor::Each => return false,
        };
        match anchor {
            Some(a) if pos > a => {}
            _ => return false,
        }
    }
    for term in spec.terminals.iter().filter(|t| t.closed.contains(code)) {
        match seq.last_index(&term.terminal) {
            Some(t) if pos <= t => {}
            None => {}
            _ => return false,
        }
    }
    true
}

/// One sampled rule-valid sequence: a random required order plus verified
/// ancillary insertions.
fn sample_valid_once(
    spec: &PhaseRuleSpec,
    rng: &mut impl Rng,
    max_insertions: usize,
    max_len: usize,
) -> Option<StepSequence> {
    let mut seq: StepSequence = StepSequence::new(random_required_order(spec, rng)?);
    if seq.len() > max_len {
        return None;
    }
    let allowed = spec.allowed_sorted();
    if !allowed.is_empty() && max_insertions > 0 {
        let insertions = rng.gen_range(0..=max_insertions);
        for _ in 0..insertions {
            if seq.len() >= max_len {
                break;
            }
            for _ in 0..4 {
                let code = allowed[rng.gen_range(0..allowed.len())];
                let pos = rng.gen_range(0..=seq.len());
                if insertion_is_safe(&seq, spec, code, pos) {
                    seq.insert(pos, code);
                    break;
                }
                // Fall back to insert-then-verify for codes the structural
                // test cannot clear.
                seq.insert(pos, code);
                if check_with_spec(&seq, spec).valid {
                    break;
                }
                seq.remove(pos);
            }
        }
    }
    check_with_spec(&seq, spec).valid.then_some(seq)
}

/// Produces `n` distinct rule-valid sequences for the phase. The canonical
/// reference is always the first item; the rest are sampled variations.
pub fn gen_valid(
    spec: &PhaseRuleSpec,
    rng: &mut impl Rng,
    n: usize,
    max_insertions: usize,
    max_len: usize,
) -> Result<Vec<StepSequence>, GenError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let canonical = crate::rules::canonical_reference(spec)?;
    debug_assert!(check_with_spec(&canonical, spec).valid);
    if n > 0 && canonical.len() <= max_len {
        seen.insert(canonical.clone());
        out.push(canonical);
    }
    let budget = 300 + 400 * n;
    for _ in 0..budget {
        if out.len() >= n {
            break;
        }
        if let Some(s) = sample_valid_once(spec, rng, max_insertions, max_len) {
            if seen.insert(s.clone()) {
                out.push(s);
            }
        }
    }
    if out.len() < n {
        return Err(GenError::Unsatisfiable {
            phase: spec.phase.clone(),
            label: Label::Valid,
            requested: n,
            produced: out.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum OrderMutation {
    DepSwap(usize),
    GateBreak(usize),
    TerminalReappend(usize),
}

fn order_mutations(spec: &PhaseRuleSpec) -> Vec<OrderMutation> {
    (0..spec.dependencies.len())
        .map(OrderMutation::DepSwap)
        .chain((0..spec.gates.len()).map(OrderMutation::GateBreak))
        .chain((0..spec.terminals.len()).map(OrderMutation::TerminalReappend))
        .collect()
}

fn anchor_index(seq: &StepSequence, code: &str, anchor: Anchor) -> Option<usize> {
    match anchor {
        Anchor::First | Anchor::Each => seq.first_index(code),
        Anchor::Last => seq.last_index(code),
    }
}

/// Applies one order mutation, returning the mutated sequence and a
/// description naming the violated rule. `None` when inapplicable.
fn apply_order_mutation(
    seq: &StepSequence,
    spec: &PhaseRuleSpec,
    mutation: OrderMutation,
    rng: &mut impl Rng,
    max_len: usize,
) -> Option<(StepSequence, String)> {
    match mutation {
        OrderMutation::DepSwap(i) => {
            let dep = &spec.dependencies[i];
            let b = anchor_index(seq, &dep.before.code, dep.before.anchor)?;
            let a = anchor_index(seq, &dep.after.code, dep.after.anchor)?;
            let mut out = seq.clone();
            out.swap(b, a);
            Some((out, format!("swap({})", dep.id)))
        }
        OrderMutation::GateBreak(i) => {
            let gate = &spec.gates[i];
            let mut out = seq.clone();
            match seq.first_index(&gate.step) {
                Some(p) => {
                    let code = out.remove(p);
                    out.insert(0, code);
                }
                None => {
                    if seq.len() >= max_len {
                        return None;
                    }
                    out.insert(0, gate.step.clone());
                }
            }
            Some((out, format!("gate_break({})", gate.id)))
        }
        OrderMutation::TerminalReappend(i) => {
            let term = &spec.terminals[i];
            seq.last_index(&term.terminal)?;
            if seq.len() >= max_len {
                return None;
            }
            let closed: Vec<&String> = term.closed.iter().collect();
            let code = closed[rng.gen_range(0..closed.len())];
            let mut out = seq.clone();
            out.push(code.clone());
            Some((out, format!("terminal_reappend({}:{code})", term.id)))
        }
    }
}

fn try_labeled(
    seq: StepSequence,
    spec: &PhaseRuleSpec,
    target: Label,
    generator: &str,
    mutation: String,
    seed: u64,
) -> Option<LabeledSequence> {
    let verdict = check_with_spec(&seq, spec);
    (Label::of(&verdict) == target).then(|| LabeledSequence {
        phase: spec.phase.clone(),
        steps: seq,
        label: target,
        provenance: Provenance {
            generator: generator.to_string(),
            seed,
            mutation,
        },
    })
}

/// Rotation-aware order-error injector: tries mutations starting at `hint`,
/// so callers cycling `hint` over item ordinals exercise every order rule.
pub fn inject_order_error_hinted(
    valid: &StepSequence,
    spec: &PhaseRuleSpec,
    rng: &mut impl Rng,
    hint: usize,
    seed: u64,
    max_len: usize,
) -> Result<LabeledSequence, GenError> {
    let mutations = order_mutations(spec);
    if mutations.is_empty() {
        return Err(GenError::NoApplicableMutation(spec.phase.clone()));
    }
    for offset in 0..mutations.len() * 4 {
        let mutation = mutations[(hint + offset) % mutations.len()];
        if let Some((candidate, desc)) = apply_order_mutation(valid, spec, mutation, rng, max_len) {
            if let Some(item) = try_labeled(
                candidate,
                spec,
                Label::Order,
                "inject_order_error",
                desc,
                seed,
            ) {
                return Ok(item);
            }
        }
    }
    Err(GenError::NoApplicableMutation(spec.phase.clone()))
}

/// Mutates a valid sequence into one that classifies exactly OE.
pub fn inject_order_error(
    valid: &StepSequence,
    spec: &PhaseRuleSpec,
    rng: &mut impl Rng,
) -> Result<LabeledSequence, GenError> {
    let hint = rng.gen_range(0..usize::MAX);
    inject_order_error_hinted(valid, spec, rng, hint, 0, usize::MAX)
}

#[derive(Debug, Clone)]
enum ContentMutation {
    DropRequired(String),
    InsertForeign,
}

fn content_mutations(spec: &PhaseRuleSpec) -> Vec<ContentMutation> {
    // Interleave drops and insertions so hint cycling alternates them.
    let mut out = Vec::new();
    for code in spec.required_sorted() {
        out.push(ContentMutation::DropRequired(code.to_string()));
        out.push(ContentMutation::InsertForeign);
    }
    if out.is_empty() {
        out.push(ContentMutation::InsertForeign);
    }
    out
}

fn foreign_codes<'v>(vocab: &'v Vocabulary, spec: &PhaseRuleSpec) -> Vec<&'v str> {
    let mut foreign: Vec<&str> = vocab
        .steps()
        .iter()
        .map(|s| s.code.as_str())
        .filter(|c| !spec.is_permitted(c))
        .collect();
    foreign.sort_by(|a, b| cmp_codes(a, b));
    foreign
}

fn apply_content_mutation(
    seq: &StepSequence,
    mutation: &ContentMutation,
    foreign: &[&str],
    rng: &mut impl Rng,
    max_len: usize,
) -> Option<(StepSequence, String)> {
    match mutation {
        ContentMutation::DropRequired(code) => {
            if !seq.contains(code) {
                return None;
            }
            let mut out = seq.clone();
            out.remove_all(code);
            Some((out, format!("drop_required({code})")))
        }
        ContentMutation::InsertForeign => {
            if foreign.is_empty() || seq.len() >= max_len {
                return None;
            }
            let code = foreign[rng.gen_range(0..foreign.len())];
            let pos = rng.gen_range(0..=seq.len());
            let mut out = seq.clone();
            out.insert(pos, code);
            Some((out, format!("insert_foreign({code}@{pos})")))
        }
    }
}

/// Rotation-aware content-error injector; `hint` cycling covers every
/// required-step drop.
pub fn inject_content_error_hinted(
    valid: &StepSequence,
    spec: &PhaseRuleSpec,
    vocab: &Vocabulary,
    rng: &mut impl Rng,
    hint: usize,
    seed: u64,
    max_len: usize,
) -> Result<LabeledSequence, GenError> {
    let mutations = content_mutations(spec);
    let foreign = foreign_codes(vocab, spec);
    if foreign.is_empty() {
        // Removal of a lone required step that empties the sequence is not a
        // usable mutation either, so nothing content-only remains.
        let only_emptying_drop =
            spec.required.len() == 1 && valid.iter().all(|c| spec.required.contains(c));
        if only_emptying_drop {
            return Err(GenError::NoForeignStep(spec.phase.clone()));
        }
    }
    for offset in 0..mutations.len() * 4 {
        let mutation = &mutations[(hint + offset) % mutations.len()];
        if let Some((candidate, desc)) =
            apply_content_mutation(valid, mutation, &foreign, rng, max_len)
        {
            if let Some(item) = try_labeled(
                candidate,
                spec,
                Label::Content,
                "inject_content_error",
                desc,
                seed,
            ) {
                return Ok(item);
            }
        }
    }
    Err(GenError::NoForeignStep(spec.phase.clone()))
}

/// Mutates a valid sequence into one that classifies exactly CE.
pub fn inject_content_error(
    valid: &StepSequence,
    spec: &PhaseRuleSpec,
    vocab: &Vocabulary,
    rng: &mut impl Rng,
) -> Result<LabeledSequence, GenError> {
    let hint = rng.gen_range(0..usize::MAX);
    inject_content_error_hinted(valid, spec, vocab, rng, hint, 0, usize::MAX)
}

/// Rotation-aware combined injector: one order mutation followed by one
/// content mutation, resampled until the result classifies exactly BE.
pub fn inject_both_hinted(
    valid: &StepSequence,
    spec: &PhaseRuleSpec,
    vocab: &Vocabulary,
    rng: &mut impl Rng,
    hint: usize,
    seed: u64,
    max_len: usize,
) -> Result<LabeledSequence, GenError> {
    let order = order_mutations(spec);
    if order.is_empty() {
        return Err(GenError::NoApplicableMutation(spec.phase.clone()));
    }
    let content = content_mutations(spec);
    let foreign = foreign_codes(vocab, spec);
    let rounds = order.len() * content.len() * 2;
    for attempt in 0..rounds {
        let o = order[(hint + attempt) % order.len()];
        let c = &content[(hint + attempt / order.len()) % content.len()];
        let Some((mid, odesc)) = apply_order_mutation(valid, spec, o, rng, max_len) else {
            continue;
        };
        let Some((candidate, cdesc)) = apply_content_mutation(&mid, c, &foreign, rng, max_len)
        else {
            continue;
        };
        if let Some(item) = try_labeled(
            candidate,
            spec,
            Label::Both,
            "inject_both",
            format!("{odesc}+{cdesc}"),
            seed,
        ) {
            return Ok(item);
        }
    }
    Err(GenError::NoApplicableMutation(spec.phase.clone()))
}

/// Mutates a valid sequence into one that classifies exactly BE.
pub fn inject_both(
    valid: &StepSequence,
    spec: &PhaseRuleSpec,
    vocab: &Vocabulary,
    rng: &mut impl Rng,
) -> Result<LabeledSequence, GenError> {
    let hint = rng.gen_range(0..usize::MAX);
    inject_both_hinted(valid, spec, vocab, rng, hint, 0, usize::MAX)
}

/// Builds the full labeled benchmark: the requested number of items per
/// label, allocated round-robin across the phases of the rule set, every
/// item re-verified by the checker before emission.
///
/// Output order is canonical — phase code, then label, then item ordinal —
/// and the whole construction is a pure function of `(rs, bspec)`.
pub fn build_benchmark(
    rs: &RuleSet,
    bspec: &BenchmarkSpec,
) -> Result<Vec<LabeledSequence>, GenError> {
    let phases = rs.phase_codes();
    if phases.is_empty() {
        let total: usize = Label::ALL.iter().map(|&l| bspec.count(l)).sum();
        if total > 0 {
            return Err(GenError::Unsatisfiable {
                phase: "(none)".to_string(),
                label: Label::Valid,
                requested: total,
                produced: 0,
            });
        }
        return Ok(Vec::new());
    }

    // Round-robin allocation: item i of a label goes to phase i % P.
    let mut out = Vec::new();
    for (pi, phase) in phases.iter().enumerate() {
        let spec = rs.spec(phase).expect("phase code from rule set");
        for label in Label::ALL {
            let total = bspec.count(label);
            // Number of items for this phase under round-robin.
            let count = total / phases.len() + usize::from(pi < total % phases.len());
            if count == 0 {
                continue;
            }
            let mut rng = seeded_rng(bucket_seed(bspec.seed, phase, label));
            let items = build_bucket(spec, &rs.vocabulary, label, count, bspec, &mut rng)?;
            out.extend(items);
        }
    }

    // Canonical assembly order: phase (numeric-suffix), label, ordinal.
    out.sort_by(|a, b| {
        cmp_codes(&a.phase, &b.phase)
            .then(a.label.cmp(&b.label))
            .then_with(|| a.steps.cmp(&b.steps))
    });

    // Re-verify every item before emission.
    for item in &out {
        let spec = rs.spec(&item.phase).expect("phase exists");
        let got = Label::of(&check_with_spec(&item.steps, spec));
        if got != item.label {
            return Err(GenError::LabelMismatch {
                phase: item.phase.clone(),
                want: item.label,
                got,
            });
        }
    }
    Ok(out)
}

fn build_bucket(
    spec: &PhaseRuleSpec,
    vocab: &Vocabulary,
    label: Label,
    count: usize,
    bspec: &BenchmarkSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LabeledSequence>, GenError> {
    if label == Label::Valid {
        let seqs = gen_valid(spec, rng, count, bspec.max_insertions, bspec.max_len)?;
        return Ok(seqs
            .into_iter()
            .enumerate()
            .map(|(i, steps)| LabeledSequence {
                phase: spec.phase.clone(),
                steps,
                label,
                provenance: Provenance {
                    generator: "gen_valid".to_string(),
                    seed: bspec.seed,
                    mutation: if i == 0 { "canonical" } else { "sampled" }.to_string(),
                },
            })
            .collect());
    }

    let mut out: Vec<LabeledSequence> = Vec::new();
    let mut seen = BTreeSet::new();
    for ordinal in 0..count {
        let mut produced = false;
        for attempt in 0..64 {
            let Some(base) = sample_valid_once(
                spec,
                rng,
                bspec.max_insertions,
                bspec.max_len.saturating_sub(1),
            ) else {
                continue;
            };
            let hint = ordinal + attempt;
            let item = match label {
                Label::Order => {
                    inject_order_error_hinted(&base, spec, rng, hint, bspec.seed, bspec.max_len)
                }
                Label::Content => inject_content_error_hinted(
                    &base,
                    spec,
                    vocab,
                    rng,
                    hint,
                    bspec.seed,
                    bspec.max_len,
                ),
                Label::Both => {
                    inject_both_hinted(&base, spec, vocab, rng, hint, bspec.seed, bspec.max_len)
                }
                Label::Valid => unreachable!("handled above"),
            };
            match item {
                Ok(item) => {
                    if seen.insert(item.steps.clone()) {
                        out.push(item);
                        produced = true;
                        break;
                    }
                }
                Err(e @ (GenError::NoApplicableMutation(_) | GenError::NoForeignStep(_)))
                    if attempt == 0 && ordinal == 0 =>
                {
                    // Structurally impossible for this phase, not bad luck.
                    return Err(e);
                }
                Err(_) => {}
            }
        }
        if !produced {
            return Err(GenError::Unsatisfiable {
                phase: spec.phase.clone(),
                label,
                requested: count,
                produced: out.len(),
            });
        }
    }
    Ok(out)
}

/// Serializes items as JSONL, one item per line, trailing newline included.
pub fn write_jsonl(items: &[LabeledSequence]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("item serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct JsonlError {
    pub line: usize,
    pub message: String,
}

/// Parses JSONL produced by [`write_jsonl`]. Blank lines are ignored.
pub fn read_jsonl(text: &str) -> Result<Vec<LabeledSequence>, JsonlError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: LabeledSequence = serde_json::from_str(line).map_err(|e| JsonlError {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}
