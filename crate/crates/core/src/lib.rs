//! Synthesis, augmentation and evaluation of parallel natural-language /
//! Lean 4 theorem-statement corpora.
//!
//! Every model and toolchain dependency sits behind a trait
//! ([`llm::Backend`], [`lean::Toolchain`]) so that whole runs can execute
//! offline and deterministically against the bundled mocks.

pub mod audit;
pub mod augment;
pub mod concepts;
pub mod config;
pub mod eval;
pub mod hash;
pub mod iteration;
pub mod jsonl;
pub mod lean;
pub mod llm;
pub mod statement;
pub mod sync;
pub mod synthesis;

pub use concepts::{ConceptRepository, RepoError};
pub use statement::{
    AlignmentRating, Concept, FlStatement, Generator, NlStatement, NlStatus, Origin, ParallelStatement,
};
