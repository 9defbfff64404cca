//! Neurosymbolic assembly transpilation engine.
//!
//! Takes candidate translations (token sequences with per-token probabilities
//! and attention matrices) produced by an external guesser, locates
//! likely-erroneous aligned subsequences, and repairs them with a
//! semantics-aware sketch solver over pure basic blocks.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`asm`] — assembly IR, parsers, and printers for the supported ARMv8 and
//!   RISC-V subsets;
//! - [`blocks`] — function splitting, pure-basic-block extraction, register
//!   dataflow, and scope analysis;
//! - [`guess`] — candidate ingestion, attention-based alignment extraction,
//!   and error marking;
//! - [`semantics`] — executable bitvector semantics, block equivalence
//!   checking, and a full-program interpreter used as an execution oracle;
//! - [`sketch`] — hole placement, CEGIS solving, and the global-reference
//!   solver;
//! - [`pipeline`] — end-to-end orchestration, recombination, fallback, and
//!   failure classification.

pub mod asm;
pub mod blocks;
pub mod guess;
pub mod pipeline;
pub mod semantics;
pub mod sketch;

pub use asm::{AsmFunction, AsmLine, Isa, Operand, Program};
