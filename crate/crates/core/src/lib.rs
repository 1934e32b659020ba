//! Zero-error analysis of deterministic two-user multiple-access channels
//! under an omniscient jammer.
//!
//! The crate is organized bottom-up:
//!
//! - [`prob`]: finite-alphabet distributions, types, nets, symmetrization, KL.
//! - [`channel`]: channel specifications, constraint sets and code pairs.
//! - [`confusability`]: LP membership in the confusability sets and exact
//!   operational confusability of codeword tuples.
//! - [`good`]: good-cone membership, co-good certificates, searches.
//! - [`classifier`]: the five-case shape verdict.
//! - [`achieve`]: random coding with time-sharing, expurgation, KL exponents.
//! - [`converse`]: subcode extraction, Komlós, double counting, XOR Plotkin.

pub mod achieve;
pub mod channel;
pub mod classifier;
pub mod confusability;
pub mod converse;
pub mod error;
pub mod good;
pub mod lp;
pub mod prob;

pub use error::{Error, Result};
