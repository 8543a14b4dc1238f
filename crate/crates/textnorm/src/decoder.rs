//! Decoding: pruned confusion-network ("sausage") decoding with a language
//! model, grammar-constrained beam decoding, and the end-to-end sentence
//! normalizer.

use std::collections::HashSet;

use crate::corpus::{expand_self, Corpus, Sentence, WindowedExample};
use crate::grammars::{
    char_acceptor, CurrencyEntry, GrammarError, MeasureEntry, NumberGrammar,
};
use crate::scorers::{ContextualScorer, Cursor, EmpiricalChannel, NgramModel};
use crate::wfst::{compose, Automaton, LatticeCursor, Weight};

/// Keep only the top hypothesis when it reaches this probability.
pub const PRUNE_HI: f64 = 0.98;
/// Drop hypotheses below this probability.
pub const PRUNE_LO: f64 = 0.05;
/// Keep at most this many hypotheses per position.
pub const PRUNE_N: usize = 5;
/// Default beam width for both decoders.
pub const DEFAULT_BEAM: usize = 8;
/// Default cap on output words per token.
pub const DEFAULT_MAX_LEN: usize = 20;
/// Context window width (tokens each side) for windowed decoding.
pub const DEFAULT_WINDOW: usize = 3;

/// A confusion network: per output position, a pruned list of verbalization
/// blocks with their channel probabilities. Blocks are atomic: a multi-word
/// verbalization occupies one entry at one position.
#[derive(Debug, Clone, PartialEq)]
pub struct Sausage {
    pub positions: Vec<Vec<(Vec<String>, f64)>>,
}

/// Prune per-position distributions: a single hypothesis at probability
/// ≥ `hi` short-circuits the position; otherwise entries below `lo` drop
/// and the top `n` (ties by block order) survive. Never empties a
/// position: the max entry always survives. Output order is by descending
/// probability, then block order, independent of input order.
pub fn prune_positions(
    raw: &[Vec<(Vec<String>, f64)>],
    hi: f64,
    lo: f64,
    n: usize,
) -> Sausage {
    let positions = raw
        .iter()
        .map(|dist| {
            let mut sorted = dist.clone();
            sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            if sorted.is_empty() {
                return sorted;
            }
            if sorted[0].1 >= hi {
                sorted.truncate(1);
                return sorted;
            }
            let mut kept: Vec<(Vec<String>, f64)> =
                sorted.iter().filter(|(_, p)| *p >= lo).cloned().collect();
            if kept.is_empty() {
                kept.push(sorted[0].clone());
            }
            kept.truncate(n);
            kept
        })
        .collect();
    Sausage { positions }
}

/// Left-to-right beam search over the sausage maximizing
/// Σ ln P_channel + lm_weight·Σ ln P_LM, ties broken by lexicographic
/// block order. Returns the chosen block per position.
pub fn decode_sausage(
    sausage: &Sausage,
    lm: &NgramModel,
    lm_weight: f64,
    beam: usize,
) -> Vec<Vec<String>> {
    struct Hyp {
        blocks: Vec<Vec<String>>,
        context: Vec<String>,
        score: f64,
    }
    let mut frontier = vec![Hyp {
        blocks: Vec::new(),
        context: Vec::new(),
        score: 0.0,
    }];
    for dist in &sausage.positions {
        let mut next = Vec::new();
        for hyp in &frontier {
            for (block, p) in dist {
                let mut score = hyp.score + p.ln();
                let mut context = hyp.context.clone();
                for w in block {
                    score += lm_weight * lm.logprob_word(&context, w);
                    context.push(w.clone());
                }
                let mut blocks = hyp.blocks.clone();
                blocks.push(block.clone());
                next.push(Hyp {
                    blocks,
                    context,
                    score,
                });
            }
        }
        next.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap()
                .then_with(|| a.blocks.cmp(&b.blocks))
        });
        next.truncate(beam.max(1));
        frontier = next;
    }
    frontier.into_iter().next().map(|h| h.blocks).unwrap_or_default()
}

/// Ordered covering filters (money before measure, since currency symbols
/// may sit adjacent to unit-like letters); first successful composition
/// wins. Tokens without a digit or known currency symbol are pre-gated
/// away without touching the transducers.
pub struct FilterBank {
    filters: Vec<Automaton>,
    gate_chars: HashSet<char>,
}

impl FilterBank {
    pub fn build(
        numbers: &NumberGrammar,
        measures: &[MeasureEntry],
        currencies: &[CurrencyEntry],
    ) -> Result<FilterBank, GrammarError> {
        let money = crate::grammars::build_money_filter(numbers, currencies)?;
        let measure = crate::grammars::build_measure_filter(numbers, measures)?;
        let gate_chars = currencies
            .iter()
            .flat_map(|c| c.symbol.chars())
            .collect();
        Ok(FilterBank {
            filters: vec![money, measure],
            gate_chars,
        })
    }

    pub fn filters(&self) -> &[Automaton] {
        &self.filters
    }

    /// Cheap pre-gate: only tokens containing a digit or a currency symbol
    /// are worth composing.
    pub fn is_candidate(&self, token: &str) -> bool {
        token
            .chars()
            .any(|c| c.is_ascii_digit() || self.gate_chars.contains(&c))
    }
}

/// Default bank over the built-in lexicons and a 12-digit number grammar.
pub fn default_filter_bank() -> Result<FilterBank, GrammarError> {
    let numbers = crate::grammars::build_decimal_fst(&crate::grammars::build_cardinal_fst(12));
    let (measures, currencies) = crate::grammars::default_lexicons();
    FilterBank::build(&numbers, &measures, &currencies)
}

/// Compose the token against each filter in order; the first filter that
/// accepts it yields an output-word lattice, prefix-closed so decoding can
/// exit anywhere but is strongly rewarded (−1000) for a full traversal.
/// `None` when the pre-gate or every composition fails — the token is
/// simply not one the filters cover.
pub fn build_token_lattice(bank: &FilterBank, token: &str) -> Option<Automaton> {
    if !bank.is_candidate(token) {
        return None;
    }
    for filter in &bank.filters {
        let Some(acc) = char_acceptor(filter.input_symbols(), token) else {
            continue;
        };
        let Ok(composed) = compose(&acc, filter) else {
            continue;
        };
        let projected = composed.project_output().trim();
        if projected.start().is_none() {
            continue;
        }
        debug_assert!(projected.is_acyclic(), "token lattices must be acyclic");
        return Some(crate::wfst::prefix_closure(
            &projected,
            Weight::new(crate::wfst::FINAL_REWARD),
        ));
    }
    None
}

/// A constrained decode result; `fallback` marks tokens where the beam
/// exhausted and the scorer's unconstrained greedy output was used.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedDecode {
    pub words: Vec<String>,
    pub fallback: bool,
}

struct Hypothesis {
    words: Vec<String>,
    cursor: Cursor,
    lattice: Option<LatticeCursor>,
    /// Cumulative scorer log-probability.
    scorer_score: f64,
    /// −(exit cost of the current lattice prefix): 0 on prefix states,
    /// +1000 once an originally-final state is reachable.
    lattice_bonus: f64,
}

impl Hypothesis {
    fn score(&self) -> f64 {
        self.scorer_score + self.lattice_bonus
    }
}

/// Beam search over the scorer, restricted to the lattice when one is
/// given: a word is expandable only if the lattice accepts it, and the
/// hypothesis score is the scorer log-probability minus the lattice exit
/// cost of the emitted prefix (so full traversals carry the −1000 reward
/// as a +1000 bonus). Any prefix may finish (prefix closure). Without a
/// lattice this is plain scorer beam search.
pub fn constrained_decode(
    scorer: &dyn ContextualScorer,
    window: &WindowedExample,
    lattice: Option<&Automaton>,
    beam: usize,
    max_len: usize,
) -> ConstrainedDecode {
    let start_cursor = scorer.start_hypothesis(window);
    let start_lattice = lattice.map(|l| LatticeCursor::start(l).expect("lattice has a start"));
    let mut frontier = vec![Hypothesis {
        words: Vec::new(),
        cursor: start_cursor.clone(),
        lattice_bonus: bonus(&start_lattice, lattice),
        lattice: start_lattice,
        scorer_score: 0.0,
    }];
    let mut best: Option<(f64, Vec<String>)> = None;
    for _ in 0..=max_len {
        let mut next = Vec::new();
        for hyp in &frontier {
            let finish = scorer.finish(&hyp.cursor);
            if finish.is_finite() {
                let total = hyp.score() + finish;
                let better = match &best {
                    None => true,
                    Some((s, w)) => total > *s || (total == *s && hyp.words < *w),
                };
                if better {
                    best = Some((total, hyp.words.clone()));
                }
            }
            if hyp.words.len() == max_len {
                continue;
            }
            for (word, inc) in scorer.candidates(&hyp.cursor, beam) {
                if !inc.is_finite() {
                    continue;
                }
                let new_lattice = match (&hyp.lattice, lattice) {
                    (Some(cur), Some(l)) => {
                        let Some(label) = l.input_symbols().get(&word) else {
                            continue;
                        };
                        let Some(advanced) = cur.advance(l, label) else {
                            continue;
                        };
                        Some(advanced)
                    }
                    _ => None,
                };
                let (cursor, inc2) = scorer.extend(&hyp.cursor, &word);
                debug_assert_eq!(inc, inc2);
                let mut words = hyp.words.clone();
                words.push(word);
                next.push(Hypothesis {
                    words,
                    cursor,
                    lattice_bonus: bonus(&new_lattice, lattice),
                    lattice: new_lattice,
                    scorer_score: hyp.scorer_score + inc,
                });
            }
        }
        next.sort_by(|a, b| {
            b.score()
                .partial_cmp(&a.score())
                .unwrap()
                .then_with(|| a.words.cmp(&b.words))
        });
        next.truncate(beam.max(1));
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    match best {
        Some((_, words)) => ConstrainedDecode {
            words,
            fallback: false,
        },
        None => ConstrainedDecode {
            words: greedy(scorer, &start_cursor, max_len),
            fallback: true,
        },
    }
}

fn bonus(cursor: &Option<LatticeCursor>, lattice: Option<&Automaton>) -> f64 {
    match (cursor, lattice) {
        (Some(c), Some(l)) => -c.exit_cost(l).value(),
        _ => 0.0,
    }
}

/// Unconstrained greedy decode: at each step take the scorer's best next
/// word unless finishing scores higher.
fn greedy(scorer: &dyn ContextualScorer, start: &Cursor, max_len: usize) -> Vec<String> {
    let mut cursor = start.clone();
    let mut words = Vec::new();
    for _ in 0..max_len {
        let finish = scorer.finish(&cursor);
        let cands = scorer.candidates(&cursor, 1);
        match cands.first() {
            Some((w, inc)) if *inc > finish => {
                let (next, _) = scorer.extend(&cursor, w);
                cursor = next;
                words.push(w.clone());
            }
            _ => break,
        }
    }
    words
}

/// Which decoding pipeline normalizes a sentence.
pub enum SentenceDecoder<'a> {
    /// Channel posteriors pruned into a sausage, decoded jointly with a
    /// language model.
    Sausage {
        channel: &'a EmpiricalChannel,
        lm: &'a NgramModel,
        lm_weight: f64,
    },
    /// Per-token windowed scorer with optional grammar constraints.
    Windowed { scorer: &'a dyn ContextualScorer },
}

/// Per-token prediction; `None` words mean the decoder produced no output
/// (the evaluator discounts such tokens).
#[derive(Debug, Clone, PartialEq)]
pub struct TokenPrediction {
    pub words: Option<Vec<String>>,
    pub fallback: bool,
}

/// Normalize one sentence token by token. The sausage path expands
/// `<self>` against the written token before the language model sees it;
/// the windowed path emits the scorer's vocabulary verbatim (the evaluator
/// expands sentinels on both sides).
pub fn normalize_sentence(
    sentence: &Sentence,
    decoder: &SentenceDecoder,
    bank: Option<&FilterBank>,
    beam: usize,
) -> Vec<TokenPrediction> {
    match decoder {
        SentenceDecoder::Sausage {
            channel,
            lm,
            lm_weight,
        } => {
            let raw: Vec<Vec<(Vec<String>, f64)>> = sentence
                .records
                .iter()
                .map(|r| {
                    channel
                        .posteriors(&r.input)
                        .into_iter()
                        .map(|(seq, p)| (expand_self(&seq, &r.input), p))
                        .collect()
                })
                .collect();
            let sausage = prune_positions(&raw, PRUNE_HI, PRUNE_LO, PRUNE_N);
            let blocks = decode_sausage(&sausage, lm, *lm_weight, beam);
            sentence
                .records
                .iter()
                .enumerate()
                .map(|(i, _)| TokenPrediction {
                    words: blocks.get(i).filter(|b| !b.is_empty()).cloned(),
                    fallback: false,
                })
                .collect()
        }
        SentenceDecoder::Windowed { scorer } => {
            crate::corpus::extract_windows(sentence, DEFAULT_WINDOW)
                .iter()
                .map(|window| {
                    let lattice = bank.and_then(|b| build_token_lattice(b, &window.token));
                    let out = constrained_decode(
                        *scorer,
                        window,
                        lattice.as_ref(),
                        beam,
                        DEFAULT_MAX_LEN,
                    );
                    TokenPrediction {
                        words: if out.words.is_empty() {
                            None
                        } else {
                            Some(out.words)
                        },
                        fallback: out.fallback,
                    }
                })
                .collect()
        }
    }
}

/// Fraction of corpus tokens whose gold verbalization survives pruning of
/// the channel posteriors — an upper bound on sausage-decode accuracy.
pub fn oracle_accuracy(channel: &EmpiricalChannel, corpus: &Corpus) -> f64 {
    let mut total = 0usize;
    let mut hits = 0usize;
    for record in corpus.records() {
        total += 1;
        let raw = vec![channel.posteriors(&record.input)];
        let sausage = prune_positions(&raw, PRUNE_HI, PRUNE_LO, PRUNE_N);
        if sausage.positions[0].iter().any(|(seq, _)| *seq == record.output) {
            hits += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}
