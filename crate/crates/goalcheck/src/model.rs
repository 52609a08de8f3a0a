//! Core vocabulary of procedural plans: step and phase identifiers, the
//! vocabulary that declares them, and ordered step sequences.
//!
//! Everything here is an immutable value type after construction and can be
//! shared freely across threads.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("empty code")]
    EmptyCode,
    #[error("duplicate step code {0}")]
    DuplicateStepCode(String),
    #[error("duplicate phase code {0}")]
    DuplicatePhaseCode(String),
    #[error("alias {alias:?} is claimed by more than one phase ({first}, {second})")]
    DuplicateAlias {
        alias: String,
        first: String,
        second: String,
    },
    #[error("name {name:?} matches more than one phase: {matches:?}")]
    AmbiguousName { name: String, matches: Vec<String> },
}

/// A fine-grained procedural action, e.g. `S23` ("jejunal clamping").
///
/// Equality and hashing use the code only; the label is annotation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepId {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl StepId {
    pub fn new(code: impl Into<String>) -> Self {
        StepId {
            code: code.into(),
            label: None,
        }
    }

    pub fn labeled(code: impl Into<String>, label: impl Into<String>) -> Self {
        StepId {
            code: code.into(),
            label: Some(label.into()),
        }
    }
}

impl PartialEq for StepId {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code
    }
}

impl Eq for StepId {}

impl std::hash::Hash for StepId {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.code.hash(state);
    }
}

/// A strategic sub-goal, e.g. `P5` ("anastomosis test").
///
/// Aliases are alternative names accepted by [`Vocabulary::resolve_phase`].
/// Equality and hashing use the code only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseId {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

impl PhaseId {
    pub fn new(code: impl Into<String>) -> Self {
        PhaseId {
            code: code.into(),
            label: None,
            aliases: Vec::new(),
        }
    }

    pub fn labeled(code: impl Into<String>, label: impl Into<String>) -> Self {
        PhaseId {
            code: code.into(),
            label: Some(label.into()),
            aliases: Vec::new(),
        }
    }

    pub fn with_aliases<I, S>(mut self, aliases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.aliases = aliases.into_iter().map(Into::into).collect();
        self
    }

    /// All names this phase answers to: code, label, aliases.
    fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.code.as_str())
            .chain(self.label.as_deref())
            .chain(self.aliases.iter().map(String::as_str))
    }
}

impl PartialEq for PhaseId {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code
    }
}

impl Eq for PhaseId {}

fn normalize(name: &str) -> String {
    name.trim().to_lowercase()
}

#[derive(Deserialize)]
struct RawVocabulary {
    #[serde(default)]
    steps: Vec<StepId>,
    #[serde(default)]
    phases: Vec<PhaseId>,
}

/// The declared universe of steps and phases.
///
/// Construction rejects duplicate step codes, duplicate phase codes, and
/// aliases claimed by more than one phase (case-insensitively).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawVocabulary")]
pub struct Vocabulary {
    steps: Vec<StepId>,
    phases: Vec<PhaseId>,
}

impl TryFrom<RawVocabulary> for Vocabulary {
    type Error = ModelError;

    fn try_from(raw: RawVocabulary) -> Result<Self, ModelError> {
        Vocabulary::new(raw.steps, raw.phases)
    }
}

impl Vocabulary {
    pub fn new(steps: Vec<StepId>, phases: Vec<PhaseId>) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for s in &steps {
            if s.code.is_empty() {
                return Err(ModelError::EmptyCode);
            }
            if !seen.insert(s.code.clone()) {
                return Err(ModelError::DuplicateStepCode(s.code.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        let mut alias_owner: std::collections::BTreeMap<String, String> =
            std::collections::BTreeMap::new();
        for p in &phases {
            if p.code.is_empty() {
                return Err(ModelError::EmptyCode);
            }
            if !seen.insert(p.code.clone()) {
                return Err(ModelError::DuplicatePhaseCode(p.code.clone()));
            }
            for alias in &p.aliases {
                let key = normalize(alias);
                if let Some(first) = alias_owner.get(&key) {
                    if *first != p.code {
                        return Err(ModelError::DuplicateAlias {
                            alias: alias.clone(),
                            first: first.clone(),
                            second: p.code.clone(),
                        });
                    }
                } else {
                    alias_owner.insert(key, p.code.clone());
                }
            }
        }
        Ok(Vocabulary { steps, phases })
    }

    pub fn empty() -> Self {
        Vocabulary {
            steps: Vec::new(),
            phases: Vec::new(),
        }
    }

    pub fn steps(&self) -> &[StepId] {
        &self.steps
    }

    pub fn phases(&self) -> &[PhaseId] {
        &self.phases
    }

    pub fn step(&self, code: &str) -> Option<&StepId> {
        self.steps.iter().find(|s| s.code == code)
    }

    pub fn phase(&self, code: &str) -> Option<&PhaseId> {
        self.phases.iter().find(|p| p.code == code)
    }

    pub fn has_step(&self, code: &str) -> bool {
        self.step(code).is_some()
    }

    pub fn has_phase(&self, code: &str) -> bool {
        self.phase(code).is_some()
    }

    /// Matches `name` against phase codes, labels, and aliases,
    /// case-insensitively after trimming whitespace.
    ///
    /// Returns the unique match, `None` when nothing matches, or
    /// [`ModelError::AmbiguousName`] when the alias table lets the name reach
    /// more than one phase.
    pub fn resolve_phase(&self, name: &str) -> Result<Option<&PhaseId>, ModelError> {
        let key = normalize(name);
        if key.is_empty() {
            return Ok(None);
        }
        let mut hits: Vec<&PhaseId> = Vec::new();
        for p in &self.phases {
            if p.names().any(|n| normalize(n) == key) {
                hits.push(p);
            }
        }
        match hits.len() {
            0 => Ok(None),
            1 => Ok(Some(hits[0])),
            _ => Err(ModelError::AmbiguousName {
                name: name.to_string(),
                matches: hits.iter().map(|p| p.code.clone()).collect(),
            }),
        }
    }

    /// Matches `name` against step codes first, then labels,
    /// case-insensitively after trimming. Code matches win over label
    /// matches; among label matches the first declared step wins.
    pub fn resolve_step(&self, name: &str) -> Option<&StepId> {
        let key = normalize(name);
        if key.is_empty() {
            return None;
        }
        self.steps
            .iter()
            .find(|s| normalize(&s.code) == key)
            .or_else(|| {
                self.steps
                    .iter()
                    .find(|s| s.label.as_deref().map(normalize) == Some(key.clone()))
            })
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("vocabulary serializes")
    }
}

/// Orders codes like `S3` / `S22` by their integer suffix (`S3` before
/// `S22`), falling back to plain string order when either suffix is missing
/// or the keys tie.
pub fn cmp_codes(a: &str, b: &str) -> std::cmp::Ordering {
    fn split(code: &str) -> (&str, Option<u64>) {
        let digits = code.len()
            - code
                .chars()
                .rev()
                .take_while(|c| c.is_ascii_digit())
                .count();
        match code[digits..].parse::<u64>() {
            Ok(n) => (&code[..digits], Some(n)),
            Err(_) => (code, None),
        }
    }
    let (pa, na) = split(a);
    let (pb, nb) = split(b);
    pa.cmp(pb)
        .then(match (na, nb) {
            (Some(x), Some(y)) => x.cmp(&y),
            _ => std::cmp::Ordering::Equal,
        })
        .then_with(|| a.cmp(b))
}

/// An ordered list of step codes; repetition is allowed and the empty
/// sequence is representable.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepSequence(Vec<String>);

impl StepSequence {
    pub fn new(codes: Vec<String>) -> Self {
        StepSequence(codes)
    }

    pub fn empty() -> Self {
        StepSequence(Vec::new())
    }

    /// Parses a comma-separated code list, ignoring surrounding whitespace.
    /// Empty input yields the empty sequence.
    pub fn parse(text: &str) -> Self {
        StepSequence(
            text.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn codes(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn get(&self, idx: usize) -> Option<&str> {
        self.0.get(idx).map(String::as_str)
    }

    pub fn contains(&self, code: &str) -> bool {
        self.0.iter().any(|c| c == code)
    }

    /// 0-based index of the first occurrence of `code`, if present.
    pub fn first_index(&self, code: &str) -> Option<usize> {
        self.0.iter().position(|c| c == code)
    }

    /// 0-based index of the last occurrence of `code`, if present.
    pub fn last_index(&self, code: &str) -> Option<usize> {
        self.0.iter().rposition(|c| c == code)
    }

    /// All 0-based indices at which `code` occurs, ascending.
    pub fn positions(&self, code: &str) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, c)| *c == code)
            .map(|(i, _)| i)
            .collect()
    }

    /// The set of distinct codes occurring in the sequence.
    pub fn distinct(&self) -> BTreeSet<&str> {
        self.0.iter().map(String::as_str).collect()
    }

    pub fn push(&mut self, code: impl Into<String>) {
        self.0.push(code.into());
    }

    pub fn insert(&mut self, idx: usize, code: impl Into<String>) {
        self.0.insert(idx, code.into());
    }

    pub fn remove(&mut self, idx: usize) -> String {
        self.0.remove(idx)
    }

    pub fn swap(&mut self, i: usize, j: usize) {
        self.0.swap(i, j);
    }

    /// Removes every occurrence of `code`.
    pub fn remove_all(&mut self, code: &str) {
        self.0.retain(|c| c != code);
    }
}

impl fmt::Display for StepSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join(","))
    }
}

impl FromIterator<String> for StepSequence {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        StepSequence(iter.into_iter().collect())
    }
}

impl<'a> FromIterator<&'a str> for StepSequence {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        StepSequence(iter.into_iter().map(str::to_string).collect())
    }
}

/// Shorthand for building a sequence from string literals in tests and docs.
pub fn seq(codes: &[&str]) -> StepSequence {
    codes.iter().copied().collect()
}
