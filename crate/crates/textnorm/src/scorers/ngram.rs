//! Katz-backoff n-gram language model with perplexity evaluation.
//!
//! Counts at or above the Katz threshold are trusted; lower counts are
//! Good-Turing discounted (falling back to absolute discounting by 0.5
//! where count-of-counts are missing) and the freed mass is redistributed
//! through backoff weights. Log-probabilities are natural logs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::corpus::Corpus;

use super::ScorerError;

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

/// Numerator/denominator floor keeping every backoff weight finite and
/// positive even for fully-trusted or fully-covered contexts.
const MASS_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct NgramConfig {
    pub order: usize,
    pub katz_threshold: u64,
    /// Words seen fewer times than this map to `<unk>`.
    pub min_count: u64,
    pub vocab_cap: usize,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            order: 5,
            katz_threshold: 5,
            min_count: 2,
            vocab_cap: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    vocab: BTreeSet<String>,
    /// n-gram -> ln P(last word | preceding words)
    logprob: HashMap<Vec<String>, f64>,
    /// context -> ln backoff weight
    backoff: HashMap<Vec<String>, f64>,
}

/// Spoken word streams per sentence: the input string where the output
/// reads as written, the output words otherwise.
pub fn verbalized_sentences(corpus: &Corpus) -> Vec<Vec<String>> {
    corpus
        .sentences
        .iter()
        .map(|s| s.records.iter().flat_map(|r| r.spoken()).collect())
        .collect()
}

fn discount(r: u64, threshold: u64, count_of_counts: &HashMap<u64, u64>) -> f64 {
    if r >= threshold {
        return r as f64;
    }
    let n_r = count_of_counts.get(&r).copied().unwrap_or(0);
    let n_r1 = count_of_counts.get(&(r + 1)).copied().unwrap_or(0);
    if n_r > 0 && n_r1 > 0 {
        let gt = (r + 1) as f64 * n_r1 as f64 / n_r as f64;
        if gt > 0.0 && gt < r as f64 {
            return gt;
        }
    }
    r as f64 - 0.5
}

/// Train a Katz-backoff model on word sentences (no sentence markers; the
/// trainer pads with `<s>`/`</s>` itself).
pub fn train_ngram(
    sentences: &[Vec<String>],
    config: &NgramConfig,
) -> Result<NgramModel, ScorerError> {
    assert!(config.order >= 1, "order must be at least 1");
    if sentences.iter().all(Vec::is_empty) {
        return Err(ScorerError::EmptyTrainingData);
    }

    let mut word_counts: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for w in s {
            *word_counts.entry(w).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, u64)> = word_counts
        .iter()
        .filter(|(w, c)| **c >= config.min_count && ![UNK, BOS, EOS].contains(*w))
        .map(|(w, c)| (*w, *c))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    ranked.truncate(config.vocab_cap);
    let mut vocab: BTreeSet<String> = ranked.into_iter().map(|(w, _)| w.to_string()).collect();
    vocab.insert(UNK.to_string());
    vocab.insert(EOS.to_string());

    let order = config.order;
    let mut counts: Vec<HashMap<Vec<String>, u64>> = vec![HashMap::new(); order];
    for s in sentences {
        if s.is_empty() {
            continue;
        }
        let mut padded: Vec<String> = vec![BOS.to_string(); order - 1];
        padded.extend(s.iter().map(|w| {
            if vocab.contains(w) {
                w.clone()
            } else {
                UNK.to_string()
            }
        }));
        padded.push(EOS.to_string());
        for n in 1..=order {
            for win in padded.windows(n) {
                // never predict the start marker
                if win[n - 1] == BOS {
                    continue;
                }
                *counts[n - 1].entry(win.to_vec()).or_default() += 1;
            }
        }
    }
    // floor so an out-of-vocabulary query stays finite even when every
    // training word made the vocabulary
    counts[0].entry(vec![UNK.to_string()]).or_insert(1);

    let discounted: Vec<HashMap<Vec<String>, f64>> = counts
        .iter()
        .map(|level| {
            let mut nc: HashMap<u64, u64> = HashMap::new();
            for &r in level.values() {
                *nc.entry(r).or_default() += 1;
            }
            level
                .iter()
                .map(|(k, &r)| (k.clone(), discount(r, config.katz_threshold, &nc)))
                .collect()
        })
        .collect();

    let mut model = NgramModel {
        order,
        vocab: vocab.clone(),
        logprob: HashMap::new(),
        backoff: HashMap::new(),
    };

    // unigrams: discounted relative frequency plus the freed mass spread
    // uniformly over the vocabulary
    let total: u64 = counts[0].values().sum();
    let mut leftover = 1.0;
    for rstar in discounted[0].values() {
        leftover -= rstar / total as f64;
    }
    let share = leftover.max(0.0) / vocab.len() as f64;
    for w in &vocab {
        let key = vec![w.clone()];
        let base = discounted[0].get(&key).copied().unwrap_or(0.0) / total as f64;
        model.logprob.insert(key, (base + share).ln());
    }

    for n in 2..=order {
        let mut by_ctx: HashMap<&[String], Vec<&Vec<String>>> = HashMap::new();
        for k in counts[n - 1].keys() {
            by_ctx.entry(&k[..n - 1]).or_default().push(k);
        }
        let mut level_probs = Vec::new();
        let mut level_backoffs = Vec::new();
        for (ctx, keys) in by_ctx {
            let c: u64 = keys.iter().map(|k| counts[n - 1][*k]).sum();
            let mut seen_mass = 0.0;
            let mut lower_mass = 0.0;
            for k in keys {
                let p = discounted[n - 1][k] / c as f64;
                seen_mass += p;
                lower_mass += model.logprob_word(&ctx[1..], &k[n - 1]).exp();
                level_probs.push((k.clone(), p.ln()));
            }
            let num = (1.0 - seen_mass).max(MASS_FLOOR);
            let den = (1.0 - lower_mass).max(MASS_FLOOR);
            level_backoffs.push((ctx.to_vec(), (num / den).ln()));
        }
        model.logprob.extend(level_probs);
        model.backoff.extend(level_backoffs);
    }
    Ok(model)
}

impl NgramModel {
    /// Unigram model assigning `1/|V|` to every vocabulary word (including
    /// `<unk>` and `</s>`); its perplexity is exactly `|V|` on any input.
    pub fn uniform(words: &[&str]) -> NgramModel {
        let mut vocab: BTreeSet<String> = words.iter().map(|w| w.to_string()).collect();
        vocab.insert(UNK.to_string());
        vocab.insert(EOS.to_string());
        let lp = -((vocab.len() as f64).ln());
        let logprob = vocab.iter().map(|w| (vec![w.clone()], lp)).collect();
        NgramModel {
            order: 1,
            vocab,
            logprob,
            backoff: HashMap::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    fn map_word<'a>(&self, w: &'a str) -> &'a str {
        if self.vocab.contains(w) {
            w
        } else {
            UNK
        }
    }

    /// ln P(word | context) with the Katz backoff chain; context longer
    /// than order−1 is truncated from the left.
    pub fn logprob_word(&self, context: &[String], word: &str) -> f64 {
        let w = self.map_word(word);
        let start = context.len().saturating_sub(self.order - 1);
        let mapped: Vec<String> = context[start..]
            .iter()
            .map(|c| {
                if c == BOS {
                    c.clone()
                } else {
                    self.map_word(c).to_string()
                }
            })
            .collect();
        let mut ctx = &mapped[..];
        let mut acc = 0.0;
        loop {
            let mut key = ctx.to_vec();
            key.push(w.to_string());
            if let Some(lp) = self.logprob.get(&key) {
                return acc + lp;
            }
            if ctx.is_empty() {
                // unreachable in a trained model: every vocab word has a
                // unigram entry
                return f64::NEG_INFINITY;
            }
            if let Some(b) = self.backoff.get(ctx) {
                acc += b;
            }
            ctx = &ctx[1..];
        }
    }

    pub fn prob(&self, context: &[String], word: &str) -> f64 {
        self.logprob_word(context, word).exp()
    }

    /// Observed backoff contexts (for diagnostics and tests).
    pub fn contexts(&self) -> impl Iterator<Item = (&[String], f64)> {
        self.backoff.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Sorted text serialization: `#order` header, then one line per
    /// n-gram/context: `words<TAB>logprob<TAB>backoff` with `NA` for an
    /// absent value.
    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "#order\t{}", self.order)?;
        let mut keys: BTreeSet<&Vec<String>> = self.logprob.keys().collect();
        keys.extend(self.backoff.keys());
        for key in keys {
            let lp = self
                .logprob
                .get(key)
                .map_or("NA".to_string(), |v| v.to_string());
            let bo = self
                .backoff
                .get(key)
                .map_or("NA".to_string(), |v| v.to_string());
            writeln!(w, "{}\t{}\t{}", key.join(" "), lp, bo)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<NgramModel, ScorerError> {
        let mut order = None;
        let mut logprob = HashMap::new();
        let mut backoff = HashMap::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let err = |msg: &str| ScorerError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#order\t") {
                order = Some(rest.parse().map_err(|_| err("bad order"))?);
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err("expected 3 tab-separated columns"));
            }
            let key: Vec<String> = cols[0].split(' ').map(str::to_string).collect();
            if key.iter().any(String::is_empty) {
                return Err(err("empty word in n-gram"));
            }
            if cols[1] != "NA" {
                let v: f64 = cols[1].parse().map_err(|_| err("bad logprob"))?;
                logprob.insert(key.clone(), v);
            }
            if cols[2] != "NA" {
                let v: f64 = cols[2].parse().map_err(|_| err("bad backoff"))?;
                backoff.insert(key, v);
            }
        }
        let order = order.ok_or(ScorerError::Parse {
            line: 1,
            msg: "missing #order header".to_string(),
        })?;
        let vocab = logprob
            .keys()
            .filter(|k| k.len() == 1)
            .map(|k| k[0].clone())
            .collect();
        Ok(NgramModel {
            order,
            vocab,
            logprob,
            backoff,
        })
    }
}

/// exp of the mean negative log-probability per token, end-of-sentence
/// included.
pub fn perplexity(model: &NgramModel, sentences: &[Vec<String>]) -> f64 {
    let eos = EOS.to_string();
    let mut total = 0.0;
    let mut events = 0usize;
    for s in sentences {
        let mut ctx: Vec<String> = vec![BOS.to_string(); model.order.saturating_sub(1)];
        for w in s.iter().chain(std::iter::once(&eos)) {
            total += model.logprob_word(&ctx, w);
            events += 1;
            ctx.push(w.clone());
        }
    }
    assert!(events > 0, "perplexity of empty data");
    (-total / events as f64).exp()
}

/// All (context, word) conditional distributions summed explicitly; used by
/// normalization tests on small closed vocabularies.
pub fn distribution_sums(model: &NgramModel) -> BTreeMap<Vec<String>, f64> {
    let mut sums = BTreeMap::new();
    let mut contexts: Vec<Vec<String>> = vec![Vec::new()];
    contexts.extend(model.backoff.keys().cloned());
    for ctx in contexts {
        let sum: f64 = model.vocab.iter().map(|w| model.prob(&ctx, w)).sum();
        sums.insert(ctx, sum);
    }
    sums
}
