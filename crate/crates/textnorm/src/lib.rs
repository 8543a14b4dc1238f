//! Text normalization for speech: maps written tokens (numbers, measures,
//! currency, letter sequences) to their spoken forms.
//!
//! The pipeline pairs pluggable contextual scorers (an empirical channel
//! model with an n-gram language model, or a toy attention encoder-decoder)
//! with over-generating finite-state covering grammars that constrain
//! decoding so that a fluent-but-wrong verbalization (`£900` as
//! `nine hundred euros`) is never emitted for a token the grammars cover.

pub mod cli;
pub mod corpus;
pub mod decoder;
pub mod eval;
pub mod grammars;
pub mod neural;
pub mod scorers;
pub mod wfst;
