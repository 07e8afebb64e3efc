//! Forcing with language fragments at finite scale.
//!
//! The crate provides, in dependency order:
//!
//! - [`hf`]: hereditarily finite sets with Ackermann coding;
//! - [`formula`], [`parse`]: a first-order language with fragment-membership
//!   atoms, canonical negation, niceness, and hierarchy classification;
//! - [`coding`]: set codes for formulas and a prime-power sentence numbering;
//! - [`structure`], [`sat`]: finite structures and fragment-relative
//!   satisfaction;
//! - [`star`]: the star fragment calculus (guard peelings and the
//!   disjunctive/witness normal forms, positivization, conversion);
//! - [`poset`]: an order-theory toolkit for explicit finite posets;
//! - [`tci`]: theories with constrained interpretations, their certification
//!   languages, and model transport;
//! - [`certify`], [`pposet`]: condition certification and the certification
//!   poset;
//! - [`kernel`]: derivative chains, kernels, and the determinacy dichotomy;
//! - [`sampler`]: binary-split embeddings and generic model sampling.

pub mod coding;
pub mod error;
pub mod formula;
pub mod hf;
pub mod parse;
pub mod poset;
pub mod sat;
pub mod star;
pub mod structure;
pub mod tci;
pub mod certify;
pub mod kernel;
pub mod sampler;

pub use error::{Error, Result};
