//! Contextual scoring for decoding: the scorer interface, an empirical
//! channel model, a Katz-backoff n-gram language model, and their
//! source-channel combination.

mod channel;
mod combine;
mod ngram;

pub use channel::{train_channel, EmpiricalChannel};
pub use combine::{make_source_channel_scorer, SourceChannelScorer};
pub use ngram::{
    distribution_sums, perplexity, train_ngram, verbalized_sentences, NgramConfig, NgramModel,
    BOS, EOS, UNK,
};

use std::any::Any;
use std::fmt;

use thiserror::Error;

use crate::corpus::WindowedExample;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("empty training data")]
    EmptyTrainingData,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Opaque per-hypothesis scoring state. Each scorer defines its own state
/// type; a cursor must only be fed back to the scorer that created it.
pub struct Cursor(Box<dyn CursorState>);

pub trait CursorState: fmt::Debug + Send {
    fn clone_box(&self) -> Box<dyn CursorState>;
    fn as_any(&self) -> &dyn Any;
}

impl<T: Clone + fmt::Debug + Send + 'static> CursorState for T {
    fn clone_box(&self) -> Box<dyn CursorState> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

impl Cursor {
    pub fn new<T: Clone + fmt::Debug + Send + 'static>(state: T) -> Self {
        Cursor(Box::new(state))
    }

    /// Recover the concrete state; panics if the cursor came from a
    /// different scorer.
    pub fn state<T: 'static>(&self) -> &T {
        self.0
            .as_any()
            .downcast_ref::<T>()
            .expect("cursor fed to a scorer of a different type")
    }
}

impl Clone for Cursor {
    fn clone(&self) -> Self {
        Cursor(self.0.clone_box())
    }
}

impl fmt::Debug for Cursor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A conditional distribution over output word sequences for one windowed
/// token, consumed incrementally word by word.
///
/// Contract: for a fixed cursor, exp of the `extend` increments over all
/// possible next words plus exp of `finish` sums to at most 1 (+1e-6).
pub trait ContextualScorer {
    fn start_hypothesis(&self, window: &WindowedExample) -> Cursor;

    /// Advance by one emitted word; returns the new cursor and the
    /// log-probability increment (`-inf` when the word is impossible).
    fn extend(&self, cursor: &Cursor, word: &str) -> (Cursor, f64);

    /// Log-probability of ending the sequence here.
    fn finish(&self, cursor: &Cursor) -> f64;

    /// Up to `limit` candidate next words with their log-probability
    /// increments, best first (ties by word order).
    fn candidates(&self, cursor: &Cursor, limit: usize) -> Vec<(String, f64)>;
}
