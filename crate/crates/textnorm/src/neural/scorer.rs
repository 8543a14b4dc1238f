//! Incremental scorer interface over a trained encoder-decoder model.

use std::sync::Arc;

use crate::corpus::WindowedExample;
use crate::scorers::{ContextualScorer, Cursor};

use super::model::{begin_row, encode_for_scoring, step_for_scoring};
use super::{NeuralModel, NN_EOS, NN_UNK};

pub struct NeuralScorer {
    model: Arc<NeuralModel>,
}

impl NeuralScorer {
    pub fn new(model: NeuralModel) -> NeuralScorer {
        NeuralScorer {
            model: Arc::new(model),
        }
    }
}

#[derive(Debug, Clone)]
struct NnCursor {
    /// Encoder outputs for the window, shared across the beam.
    enc: Arc<Vec<Vec<f64>>>,
    /// Next-word distribution after the emitted prefix.
    dist: Arc<Vec<f64>>,
    /// Decoder states after consuming the last emitted word.
    states: Arc<Vec<Vec<f64>>>,
}

impl NeuralScorer {
    fn advance(&self, enc: Arc<Vec<Vec<f64>>>, states: &[Vec<f64>], prev_row: usize) -> NnCursor {
        let (dist, states) = step_for_scoring(&self.model, &enc, states, prev_row);
        NnCursor {
            enc,
            dist: Arc::new(dist),
            states: Arc::new(states),
        }
    }
}

impl ContextualScorer for NeuralScorer {
    fn start_hypothesis(&self, window: &WindowedExample) -> Cursor {
        let (enc, states) = encode_for_scoring(&self.model, &window.source_symbols());
        let cur = self.advance(Arc::new(enc), &states, begin_row(&self.model));
        Cursor::new(cur)
    }

    fn extend(&self, cursor: &Cursor, word: &str) -> (Cursor, f64) {
        let c: &NnCursor = cursor.state();
        let id = self.model.words.id(word);
        let inc = c.dist[id].ln();
        let next = self.advance(c.enc.clone(), &c.states, id);
        (Cursor::new(next), inc)
    }

    fn finish(&self, cursor: &Cursor) -> f64 {
        let c: &NnCursor = cursor.state();
        c.dist[self.model.words.id(NN_EOS)].ln()
    }

    fn candidates(&self, cursor: &Cursor, limit: usize) -> Vec<(String, f64)> {
        let c: &NnCursor = cursor.state();
        let eos = self.model.words.id(NN_EOS);
        let unk = self.model.words.id(NN_UNK);
        let mut out: Vec<(String, f64)> = c
            .dist
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != eos && *i != unk)
            .map(|(i, p)| (self.model.words.name(i).to_string(), p.ln()))
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        out.truncate(limit);
        out
    }
}
