//! Conformance checking and evaluation for goal-oriented procedural plans.
//!
//! A plan is an ordered sequence of step codes aimed at completing a target
//! phase. Phase rules — required and allowed step sets, procedural
//! dependencies, gated allowances, terminal closures — define whether a
//! sequence can plausibly complete the phase. This crate provides:
//!
//! * [`model`] — steps, phases, vocabularies, and step sequences;
//! * [`rules`] — the rule specification model, its text DSL, validation,
//!   and canonical reference construction;
//! * [`checker`] — the goal-satisfiability judge with classified violations
//!   and a brute-force cross-validation oracle;
//! * [`metrics`] — surface similarity metrics (NED, JIS, ROA) and the
//!   threshold protocol for binarizing them against a canonical reference;
//! * [`benchgen`] — deterministic generation of labeled benchmark sets with
//!   injected order/content errors;
//! * [`metaeval`] — stratified accuracy reports comparing evaluator
//!   decisions against rule-derived labels;
//! * [`judge`] — an LLM-as-judge client with prompt construction, response
//!   caching, and an offline fixture transport;
//! * [`planeval`] — scoring of structured planner outputs;
//! * [`demo`] — the shipped rule corpus.

pub mod benchgen;
pub mod checker;
pub mod demo;
pub mod judge;
pub mod metaeval;
pub mod metrics;
pub mod model;
pub mod planeval;
pub mod rules;
