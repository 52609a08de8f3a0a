//! Doctest host for the guide in `book/`.
//!
//! mdBook cannot run a book's code fences against external crates, so each
//! chapter is included here as module documentation and `cargo test --doc`
//! executes every Rust snippet. Keeping one module per chapter makes a
//! failing doctest point at the chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/vocabulary.md")]
pub mod vocabulary {}

#[doc = include_str!("../../../book/src/rules.md")]
pub mod rules {}

#[doc = include_str!("../../../book/src/checking.md")]
pub mod checking {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}

#[doc = include_str!("../../../book/src/meta-evaluation.md")]
pub mod meta_evaluation {}

#[doc = include_str!("../../../book/src/judges.md")]
pub mod judges {}

#[doc = include_str!("../../../book/src/plan-scoring.md")]
pub mod plan_scoring {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
