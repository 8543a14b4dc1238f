//! Source-channel scorer: channel posterior times a weighted language
//! model, exposed through the incremental scorer interface.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::corpus::WindowedExample;

use super::{ContextualScorer, Cursor, EmpiricalChannel, NgramModel};

pub struct SourceChannelScorer {
    channel: EmpiricalChannel,
    lm: NgramModel,
    lm_weight: f64,
}

/// Sequence score = ln P_channel(seq | token) + lm_weight · ln P_LM(seq
/// given the sentence context). The LM factor applies per word only, so the
/// probe mass over next words plus finish never exceeds the channel's own
/// normalized mass.
pub fn make_source_channel_scorer(
    channel: EmpiricalChannel,
    lm: NgramModel,
    lm_weight: f64,
) -> SourceChannelScorer {
    SourceChannelScorer {
        channel,
        lm,
        lm_weight,
    }
}

#[derive(Debug, Clone)]
struct ScCursor {
    /// The token's full posterior, shared across the beam.
    options: Arc<Vec<(Vec<String>, f64)>>,
    /// Number of words emitted so far.
    emitted: usize,
    /// Indices of options consistent with the emitted prefix.
    live: Vec<usize>,
    /// Total channel probability of the live options.
    mass: f64,
    /// Language-model context: window left words then emitted words.
    context: Vec<String>,
}

impl SourceChannelScorer {
    fn next_word_masses<'a>(&self, c: &'a ScCursor) -> BTreeMap<&'a str, f64> {
        let mut masses: BTreeMap<&str, f64> = BTreeMap::new();
        for &i in &c.live {
            let (seq, p) = &c.options[i];
            if let Some(w) = seq.get(c.emitted) {
                *masses.entry(w.as_str()).or_default() += p;
            }
        }
        masses
    }
}

impl ContextualScorer for SourceChannelScorer {
    fn start_hypothesis(&self, window: &WindowedExample) -> Cursor {
        let options = Arc::new(self.channel.posteriors(&window.token));
        let live: Vec<usize> = (0..options.len()).collect();
        let mass: f64 = options.iter().map(|(_, p)| p).sum();
        Cursor::new(ScCursor {
            options,
            emitted: 0,
            live,
            mass,
            context: window.left.clone(),
        })
    }

    fn extend(&self, cursor: &Cursor, word: &str) -> (Cursor, f64) {
        let c: &ScCursor = cursor.state();
        let mut live = Vec::new();
        let mut mass = 0.0;
        for &i in &c.live {
            let (seq, p) = &c.options[i];
            if seq.get(c.emitted).map(String::as_str) == Some(word) {
                live.push(i);
                mass += p;
            }
        }
        if live.is_empty() || mass <= 0.0 {
            return (cursor.clone(), f64::NEG_INFINITY);
        }
        let channel_inc = (mass / c.mass).ln();
        let lm_inc = self.lm_weight * self.lm.logprob_word(&c.context, word);
        let mut context = c.context.clone();
        context.push(word.to_string());
        (
            Cursor::new(ScCursor {
                options: c.options.clone(),
                emitted: c.emitted + 1,
                live,
                mass,
                context,
            }),
            channel_inc + lm_inc,
        )
    }

    fn finish(&self, cursor: &Cursor) -> f64 {
        let c: &ScCursor = cursor.state();
        let end_mass: f64 = c
            .live
            .iter()
            .map(|&i| &c.options[i])
            .filter(|(seq, _)| seq.len() == c.emitted)
            .map(|(_, p)| p)
            .sum();
        if end_mass <= 0.0 {
            f64::NEG_INFINITY
        } else {
            (end_mass / c.mass).ln()
        }
    }

    fn candidates(&self, cursor: &Cursor, limit: usize) -> Vec<(String, f64)> {
        let c: &ScCursor = cursor.state();
        let mut out: Vec<(String, f64)> = self
            .next_word_masses(c)
            .into_iter()
            .map(|(w, m)| {
                let inc = (m / c.mass).ln()
                    + self.lm_weight * self.lm.logprob_word(&c.context, w);
                (w.to_string(), inc)
            })
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        out.truncate(limit);
        out
    }
}
