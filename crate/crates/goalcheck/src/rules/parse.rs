//! Parser for the line-oriented rule DSL.
//!
//! ```text
//! vocab_step  := "step" CODE [STRING]
//! vocab_phase := "phase_decl" CODE [STRING] ["aliases" STRING ("," STRING)*]
//! phase_block := "phase" CODE "{" stmt* "}"
//! stmt := "required:" CODE ("," CODE)*
//!       | "allowed:"  CODE ("," CODE)*
//!       | "dep:" sel "<" sel
//!       | "gate:" CODE "after" sel
//!       | "terminal:" "last" "(" CODE ")" "closes" "{" CODE ("," CODE)* "}"
//! sel  := ("first"|"last"|"each") "(" CODE ")" | CODE
//! ```
//!
//! `#` starts a comment that runs to the end of the line. A bare code in a
//! selector position desugars to `first(CODE)`. Statements may carry an
//! optional explicit rule id as a trailing `@id`; omitted ids are generated
//! as `<phase>.<kind>.<ordinal>`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::{PhaseId, StepId, Vocabulary};

use super::{
    Anchor, Dependency, GatedAllowance, PhaseRuleSpec, RuleSet, Selector, TerminalClosure,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownStep,
    UnknownPhase,
    DuplicateStep,
    DuplicatePhase,
    DuplicateRuleId,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::UnknownStep => "unknown step",
            ParseErrorKind::UnknownPhase => "unknown phase",
            ParseErrorKind::DuplicateStep => "duplicate step",
            ParseErrorKind::DuplicatePhase => "duplicate phase",
            ParseErrorKind::DuplicateRuleId => "duplicate rule id",
        };
        write!(f, "{name}")
    }
}

/// A parse failure with its 1-based source position.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{line}:{col}: {kind}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    fn new(kind: ParseErrorKind, line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            kind,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Punct(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "{w}"),
            Tok::Str(s) => write!(f, "{s:?}"),
            Tok::Punct(c) => write!(f, "{c}"),
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')
}

/// Splits a line into tokens with their 1-based column positions.
fn tokenize(line_no: usize, line: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => i += 1,
            '"' => {
                let mut s = String::new();
                i += 1;
                let mut closed = false;
                while i < chars.len() {
                    match chars[i] {
                        '"' => {
                            closed = true;
                            i += 1;
                            break;
                        }
                        '\\' if i + 1 < chars.len() => {
                            s.push(chars[i + 1]);
                            i += 2;
                        }
                        other => {
                            s.push(other);
                            i += 1;
                        }
                    }
                }
                if !closed {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        line_no,
                        col,
                        "unterminated string literal",
                    ));
                }
                toks.push((col, Tok::Str(s)));
            }
            ':' | ',' | '<' | '{' | '}' | '(' | ')' | '@' => {
                toks.push((col, Tok::Punct(c)));
                i += 1;
            }
            c if is_word_char(c) => {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                toks.push((col, Tok::Word(word)));
            }
            other => {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    line_no,
                    col,
                    format!("unexpected character {other:?}"),
                ));
            }
        }
    }
    Ok(toks)
}

/// Cursor over one line of tokens.
struct Line<'a> {
    no: usize,
    toks: &'a [(usize, Tok)],
    pos: usize,
}

impl<'a> Line<'a> {
    fn new(no: usize, toks: &'a [(usize, Tok)]) -> Self {
        Line { no, toks, pos: 0 }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|(c, _)| *c)
            .unwrap_or_else(|| self.toks.last().map(|(c, _)| c + 1).unwrap_or(1))
    }

    fn next(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(ParseErrorKind::Syntax, self.no, self.col(), message)
    }

    fn expect_word(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Word(_)) => {
                let Some(Tok::Word(w)) = self.next() else {
                    unreachable!()
                };
                Ok(w.clone())
            }
            Some(t) => {
                let t = t.clone();
                Err(self.err(format!("expected {what}, found {t}")))
            }
            None => Err(self.err(format!("expected {what}, found end of line"))),
        }
    }

    fn expect_punct(&mut self, p: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Punct(c)) if *c == p => {
                self.next();
                Ok(())
            }
            Some(t) => {
                let t = t.clone();
                Err(self.err(format!("expected {p:?}, found {t}")))
            }
            None => Err(self.err(format!("expected {p:?}, found end of line"))),
        }
    }

    fn eat_punct(&mut self, p: char) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(c)) if *c == p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let col = self.col();
        let w = self.expect_word(&format!("{kw:?}"))?;
        if w == kw {
            Ok(())
        } else {
            Err(ParseError::new(
                ParseErrorKind::Syntax,
                self.no,
                col,
                format!("expected {kw:?}, found {w}"),
            ))
        }
    }

    fn opt_string(&mut self) -> Option<String> {
        if matches!(self.peek(), Some(Tok::Str(_))) {
            let Some(Tok::Str(s)) = self.next() else {
                unreachable!()
            };
            Some(s.clone())
        } else {
            None
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => {
                let t = t.clone();
                Err(self.err(format!("unexpected trailing {t}")))
            }
        }
    }

    /// Optional trailing `@id`.
    fn opt_rule_id(&mut self) -> Result<Option<(usize, String)>, ParseError> {
        if self.eat_punct('@') {
            let col = self.col();
            let id = self.expect_word("rule id")?;
            Ok(Some((col, id)))
        } else {
            Ok(None)
        }
    }

    /// `sel := ("first"|"last"|"each") "(" CODE ")" | CODE`
    ///
    /// A bare code desugars to `first(CODE)`. When `each_legal` is false the
    /// `each` anchor is rejected.
    fn selector(&mut self, each_legal: bool) -> Result<(usize, Selector), ParseError> {
        let col = self.col();
        let word = self.expect_word("step code or occurrence anchor")?;
        let anchor = match word.as_str() {
            "first" => Some(Anchor::First),
            "last" => Some(Anchor::Last),
            "each" => Some(Anchor::Each),
            _ => None,
        };
        match anchor {
            Some(anchor) if matches!(self.peek(), Some(Tok::Punct('('))) => {
                if anchor == Anchor::Each && !each_legal {
                    return Err(ParseError::new(
                        ParseErrorKind::Syntax,
                        self.no,
                        col,
                        "\"each\" anchor is only legal on the constrained side of a rule",
                    ));
                }
                self.expect_punct('(')?;
                let code_col = self.col();
                let code = self.expect_word("step code")?;
                self.expect_punct(')')?;
                Ok((code_col, Selector { code, anchor }))
            }
            // A bare word (including one spelled "first"/"last"/"each"
            // without parentheses) is a code with the default anchor.
            _ => Ok((col, Selector::first(word))),
        }
    }

    /// Comma-separated code list, at least one element.
    fn code_list(&mut self) -> Result<Vec<(usize, String)>, ParseError> {
        let mut codes = Vec::new();
        loop {
            let col = self.col();
            let code = self.expect_word("step code")?;
            codes.push((col, code));
            if !self.eat_punct(',') {
                break;
            }
        }
        Ok(codes)
    }
}

/// A step reference awaiting vocabulary resolution.
struct PendingRef {
    line: usize,
    col: usize,
    code: String,
}

#[derive(Default)]
struct PendingSpec {
    required: Vec<PendingRef>,
    allowed: Vec<PendingRef>,
    dependencies: Vec<(usize, Dependency, Vec<PendingRef>)>,
    gates: Vec<(usize, GatedAllowance, Vec<PendingRef>)>,
    terminals: Vec<(usize, TerminalClosure, Vec<PendingRef>)>,
}

/// Parses a self-contained rule source: vocabulary declarations plus phase
/// blocks.
pub fn parse_rules(source: &str) -> Result<RuleSet, ParseError> {
    parse_rules_with_vocab(source, &Vocabulary::empty())
}

/// Parses a rule source against a base vocabulary. Step and phase
/// declarations in the source extend the base; duplicates are rejected.
pub fn parse_rules_with_vocab(source: &str, base: &Vocabulary) -> Result<RuleSet, ParseError> {
    let mut steps: Vec<StepId> = base.steps().to_vec();
    let mut phases: Vec<PhaseId> = base.phases().to_vec();
    let mut blocks: BTreeMap<String, PendingSpec> = BTreeMap::new();
    let mut block_pos: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    // (phase, line) of the currently open block, if any
    let mut open: Option<(String, usize)> = None;

    for (idx, raw_line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let toks = tokenize(line_no, raw_line)?;
        if toks.is_empty() {
            continue;
        }
        let mut line = Line::new(line_no, &toks);

        if let Some((phase, _)) = open.clone() {
            if matches!(line.peek(), Some(Tok::Punct('}'))) {
                line.next();
                line.end()?;
                open = None;
                continue;
            }
            let spec = blocks.get_mut(&phase).expect("open block exists");
            parse_stmt(&mut line, spec)?;
            continue;
        }

        let col = line.col();
        let head = line.expect_word("declaration")?;
        match head.as_str() {
            "step" => {
                let code_col = line.col();
                let code = line.expect_word("step code")?;
                let label = line.opt_string();
                line.end()?;
                if steps.iter().any(|s| s.code == code) {
                    return Err(ParseError::new(
                        ParseErrorKind::DuplicateStep,
                        line_no,
                        code_col,
                        format!("step {code} declared more than once"),
                    ));
                }
                steps.push(StepId { code, label });
            }
            "phase_decl" => {
                let code_col = line.col();
                let code = line.expect_word("phase code")?;
                let label = line.opt_string();
                let mut aliases = Vec::new();
                if matches!(line.peek(), Some(Tok::Word(w)) if w == "aliases") {
                    line.next();
                    loop {
                        match line.opt_string() {
                            Some(a) => aliases.push(a),
                            None => return Err(line.err("expected quoted alias")),
                        }
                        if !line.eat_punct(',') {
                            break;
                        }
                    }
                }
                line.end()?;
                if phases.iter().any(|p| p.code == code) {
                    return Err(ParseError::new(
                        ParseErrorKind::DuplicatePhase,
                        line_no,
                        code_col,
                        format!("phase {code} declared more than once"),
                    ));
                }
                phases.push(PhaseId {
                    code,
                    label,
                    aliases,
                });
            }
            "phase" => {
                let code_col = line.col();
                let code = line.expect_word("phase code")?;
                line.expect_punct('{')?;
                line.end()?;
                if blocks.contains_key(&code) {
                    return Err(ParseError::new(
                        ParseErrorKind::DuplicatePhase,
                        line_no,
                        code_col,
                        format!("phase {code} has more than one rule block"),
                    ));
                }
                blocks.insert(code.clone(), PendingSpec::default());
                block_pos.insert(code.clone(), (line_no, code_col));
                open = Some((code, line_no));
            }
            other => {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    line_no,
                    col,
                    format!("expected \"step\", \"phase_decl\", or \"phase\", found {other}"),
                ));
            }
        }
    }

    if let Some((phase, line_no)) = open {
        return Err(ParseError::new(
            ParseErrorKind::Syntax,
            line_no,
            1,
            format!("unclosed block for phase {phase}"),
        ));
    }

    let vocabulary = Vocabulary::new(steps, phases).map_err(|e| {
        // Alias collisions are the only constraint not yet enforced above.
        ParseError::new(ParseErrorKind::DuplicatePhase, 1, 1, e.to_string())
    })?;

    // Resolve references and assign rule ids.
    let mut specs: BTreeMap<String, PhaseRuleSpec> = BTreeMap::new();
    let mut ids_seen: BTreeMap<String, usize> = BTreeMap::new();
    for (phase, pending) in blocks {
        let (line, col) = block_pos[&phase];
        if !vocabulary.has_phase(&phase) {
            return Err(ParseError::new(
                ParseErrorKind::UnknownPhase,
                line,
                col,
                format!("phase {phase} is not declared in the vocabulary"),
            ));
        }
        let mut spec = PhaseRuleSpec::new(&phase);
        for r in &pending.required {
            check_step(&vocabulary, r)?;
            spec.required.insert(r.code.clone());
        }
        for r in &pending.allowed {
            check_step(&vocabulary, r)?;
            spec.allowed.insert(r.code.clone());
        }
        for (line, mut dep, refs) in pending.dependencies {
            for r in &refs {
                check_step(&vocabulary, r)?;
            }
            if dep.id.is_empty() {
                dep.id = super::auto_id(&phase, "dep", spec.dependencies.len() + 1);
            }
            claim_id(&mut ids_seen, &dep.id, line)?;
            spec.dependencies.push(dep);
        }
        for (line, mut gate, refs) in pending.gates {
            for r in &refs {
                check_step(&vocabulary, r)?;
            }
            if gate.id.is_empty() {
                gate.id = super::auto_id(&phase, "gate", spec.gates.len() + 1);
            }
            claim_id(&mut ids_seen, &gate.id, line)?;
            spec.gates.push(gate);
        }
        for (line, mut term, refs) in pending.terminals {
            for r in &refs {
                check_step(&vocabulary, r)?;
            }
            if term.id.is_empty() {
                term.id = super::auto_id(&phase, "terminal", spec.terminals.len() + 1);
            }
            claim_id(&mut ids_seen, &term.id, line)?;
            spec.terminals.push(term);
        }
        specs.insert(phase, spec);
    }

    Ok(RuleSet { vocabulary, specs })
}

fn check_step(vocab: &Vocabulary, r: &PendingRef) -> Result<(), ParseError> {
    if vocab.has_step(&r.code) {
        Ok(())
    } else {
        Err(ParseError::new(
            ParseErrorKind::UnknownStep,
            r.line,
            r.col,
            format!("step {} is not declared in the vocabulary", r.code),
        ))
    }
}

fn claim_id(ids: &mut BTreeMap<String, usize>, id: &str, line: usize) -> Result<(), ParseError> {
    if let Some(first) = ids.insert(id.to_string(), line) {
        return Err(ParseError::new(
            ParseErrorKind::DuplicateRuleId,
            line,
            1,
            format!("rule id {id} already used on line {first}"),
        ));
    }
    Ok(())
}

fn parse_stmt(line: &mut Line<'_>, spec: &mut PendingSpec) -> Result<(), ParseError> {
    let col = line.col();
    let head = line.expect_word("statement")?;
    match head.as_str() {
        "required" | "allowed" => {
            line.expect_punct(':')?;
            let codes = line.code_list()?;
            line.end()?;
            let out = if head == "required" {
                &mut spec.required
            } else {
                &mut spec.allowed
            };
            for (col, code) in codes {
                out.push(PendingRef {
                    line: line.no,
                    col,
                    code,
                });
            }
        }
        "dep" => {
            line.expect_punct(':')?;
            let (bcol, before) = line.selector(false)?;
            line.expect_punct('<')?;
            let (acol, after) = line.selector(true)?;
            let id = line.opt_rule_id()?;
            line.end()?;
            if before.code == after.code {
                return Err(ParseError::new(
                    ParseErrorKind::Syntax,
                    line.no,
                    acol,
                    format!("dependency relates step {} to itself", before.code),
                ));
            }
            let refs = vec![
                PendingRef {
                    line: line.no,
                    col: bcol,
                    code: before.code.clone(),
                },
                PendingRef {
                    line: line.no,
                    col: acol,
                    code: after.code.clone(),
                },
            ];
            spec.dependencies.push((
                line.no,
                Dependency {
                    id: id.map(|(_, i)| i).unwrap_or_default(),
                    before,
                    after,
                },
                refs,
            ));
        }
        "gate" => {
            line.expect_punct(':')?;
            let scol = line.col();
            let step = line.expect_word("step code")?;
            line.expect_keyword("after")?;
            let (gcol, gate) = line.selector(false)?;
            let id = line.opt_rule_id()?;
            line.end()?;
            let refs = vec![
                PendingRef {
                    line: line.no,
                    col: scol,
                    code: step.clone(),
                },
                PendingRef {
                    line: line.no,
                    col: gcol,
                    code: gate.code.clone(),
                },
            ];
            spec.gates.push((
                line.no,
                GatedAllowance {
                    id: id.map(|(_, i)| i).unwrap_or_default(),
                    step,
                    gate,
                },
                refs,
            ));
        }
        "terminal" => {
            line.expect_punct(':')?;
            line.expect_keyword("last")?;
            line.expect_punct('(')?;
            let tcol = line.col();
            let terminal = line.expect_word("step code")?;
            line.expect_punct(')')?;
            line.expect_keyword("closes")?;
            line.expect_punct('{')?;
            let codes = line.code_list()?;
            line.expect_punct('}')?;
            let id = line.opt_rule_id()?;
            line.end()?;
            let mut refs = vec![PendingRef {
                line: line.no,
                col: tcol,
                code: terminal.clone(),
            }];
            let mut closed = BTreeSet::new();
            for (col, code) in codes {
                refs.push(PendingRef {
                    line: line.no,
                    col,
                    code: code.clone(),
                });
                closed.insert(code);
            }
            spec.terminals.push((
                line.no,
                TerminalClosure {
                    id: id.map(|(_, i)| i).unwrap_or_default(),
                    terminal,
                    closed,
                },
                refs,
            ));
        }
        other => {
            return Err(ParseError::new(
                ParseErrorKind::Syntax,
                line.no,
                col,
                format!(
                    "expected \"required\", \"allowed\", \"dep\", \"gate\", \"terminal\", or \"}}\", found {other}"
                ),
            ));
        }
    }
    Ok(())
}
