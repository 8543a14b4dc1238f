//! Empirical channel model: P(output word sequence | written token) from
//! training counts, with rule-based fallbacks for unseen tokens.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::corpus::{Corpus, SELF_TOKEN, SIL_TOKEN};
use crate::grammars::filter_verbalizations;
use crate::wfst::Automaton;

use super::ScorerError;

#[derive(Debug, Clone, Default)]
pub struct EmpiricalChannel {
    /// token -> (output sequence, probability), best first.
    table: HashMap<String, Vec<(Vec<String>, f64)>>,
    /// Tried in order for unseen digit-bearing tokens.
    fallback_filters: Vec<Automaton>,
}

/// Relative frequencies of each token's observed output sequences.
pub fn train_channel(corpus: &Corpus) -> Result<EmpiricalChannel, ScorerError> {
    if corpus.num_records() == 0 {
        return Err(ScorerError::EmptyTrainingData);
    }
    let mut counts: HashMap<&str, HashMap<&[String], u64>> = HashMap::new();
    for r in corpus.records() {
        *counts
            .entry(r.input.as_str())
            .or_default()
            .entry(r.output.as_slice())
            .or_default() += 1;
    }
    let mut table = HashMap::new();
    for (token, seqs) in counts {
        let total: u64 = seqs.values().sum();
        let mut entries: Vec<(Vec<String>, f64)> = seqs
            .into_iter()
            .map(|(seq, c)| (seq.to_vec(), c as f64 / total as f64))
            .collect();
        entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        table.insert(token.to_string(), entries);
    }
    Ok(EmpiricalChannel {
        table,
        fallback_filters: Vec::new(),
    })
}

impl EmpiricalChannel {
    /// Attach filter lattices consulted for unseen digit-bearing tokens.
    pub fn with_fallback_filters(mut self, filters: Vec<Automaton>) -> Self {
        self.fallback_filters = filters;
        self
    }

    /// The full conditional distribution for a token, best first; unseen
    /// tokens go through the fallback rules. Probabilities sum to 1.
    pub fn posteriors(&self, token: &str) -> Vec<(Vec<String>, f64)> {
        if let Some(entries) = self.table.get(token) {
            return entries.clone();
        }
        self.fallback(token)
    }

    pub fn is_seen(&self, token: &str) -> bool {
        self.table.contains_key(token)
    }

    fn fallback(&self, token: &str) -> Vec<(Vec<String>, f64)> {
        let chars: Vec<char> = token.chars().collect();
        if !chars.is_empty() && chars.iter().all(|c| c.is_alphabetic()) {
            return vec![(vec![SELF_TOKEN.to_string()], 1.0)];
        }
        if chars.len() == 1 && !chars[0].is_alphanumeric() {
            return vec![(vec![SIL_TOKEN.to_string()], 1.0)];
        }
        if chars.iter().any(|c| c.is_ascii_digit()) {
            for filter in &self.fallback_filters {
                let mut outs = filter_verbalizations(filter, token);
                if !outs.is_empty() {
                    outs.sort();
                    let p = 1.0 / outs.len() as f64;
                    return outs.into_iter().map(|seq| (seq, p)).collect();
                }
            }
        }
        vec![(vec![SELF_TOKEN.to_string()], 1.0)]
    }

    /// TSV serialization: `token<TAB>output words<TAB>probability`.
    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut tokens: Vec<&String> = self.table.keys().collect();
        tokens.sort();
        for token in tokens {
            for (seq, p) in &self.table[token] {
                writeln!(w, "{}\t{}\t{}", token, seq.join(" "), p)?;
            }
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<EmpiricalChannel, ScorerError> {
        let mut table: HashMap<String, Vec<(Vec<String>, f64)>> = HashMap::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let err = |msg: &str| ScorerError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err("expected 3 tab-separated columns"));
            }
            let seq: Vec<String> = cols[1].split(' ').map(str::to_string).collect();
            if cols[0].is_empty() || seq.iter().any(String::is_empty) {
                return Err(err("empty token or output word"));
            }
            let p: f64 = cols[2].parse().map_err(|_| err("bad probability"))?;
            table.entry(cols[0].to_string()).or_default().push((seq, p));
        }
        for entries in table.values_mut() {
            entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        }
        Ok(EmpiricalChannel {
            table,
            fallback_filters: Vec::new(),
        })
    }
}
