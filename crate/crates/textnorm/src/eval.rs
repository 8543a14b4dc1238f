//! Per-semiotic-class accuracy reports, seen/unseen breakdowns, and run
//! comparison.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::corpus::{expand_self, parse_corpus, Corpus, CorpusError, SemioticClass};

/// Placeholder for a token the decoder produced no output for.
pub const ABSENT: &str = "<ABSENT>";
/// Placeholder for an undefined accuracy (no counted tokens).
pub const UNDEFINED: &str = "–";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold has {gold} tokens but predictions have {predicted}")]
    Misaligned { gold: usize, predicted: usize },
    #[error("reports cover different class sets")]
    ClassMismatch,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Tallies for one class: `n` counts only tokens with a prediction;
/// absent-prediction tokens land in `dropped` and are excluded (the model
/// gets the benefit of the doubt).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassStats {
    pub n: usize,
    pub correct: usize,
    pub dropped: usize,
}

impl ClassStats {
    pub fn accuracy(&self) -> Option<f64> {
        (self.n > 0).then(|| self.correct as f64 / self.n as f64)
    }
}

/// Accuracy per class plus the ALL aggregate, in a fixed class order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccuracyReport {
    /// (class name, stats); first row is ALL, then every class in the
    /// canonical order.
    pub rows: Vec<(String, ClassStats)>,
}

impl AccuracyReport {
    fn empty() -> AccuracyReport {
        let mut rows = vec![("ALL".to_string(), ClassStats::default())];
        rows.extend(
            SemioticClass::ALL
                .iter()
                .map(|c| (c.name().to_string(), ClassStats::default())),
        );
        AccuracyReport { rows }
    }

    pub fn stats(&self, class: &str) -> Option<&ClassStats> {
        self.rows.iter().find(|(name, _)| name == class).map(|(_, s)| s)
    }

    /// `CLASS⇥N⇥CORRECT⇥ACCURACY⇥DROPPED`, accuracy `–` when undefined.
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "CLASS\tN\tCORRECT\tACCURACY\tDROPPED")?;
        for (name, s) in &self.rows {
            let acc = match s.accuracy() {
                Some(a) => format!("{a:.4}"),
                None => UNDEFINED.to_string(),
            };
            writeln!(w, "{name}\t{}\t{}\t{acc}\t{}", s.n, s.correct, s.dropped)?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<AccuracyReport, EvalError> {
        let mut rows = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let err = |msg: &str| EvalError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            if lineno == 0 {
                if line != "CLASS\tN\tCORRECT\tACCURACY\tDROPPED" {
                    return Err(err("bad header"));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(err("expected 5 columns"));
            }
            let stats = ClassStats {
                n: cols[1].parse().map_err(|_| err("bad N"))?,
                correct: cols[2].parse().map_err(|_| err("bad CORRECT"))?,
                dropped: cols[4].parse().map_err(|_| err("bad DROPPED"))?,
            };
            rows.push((cols[0].to_string(), stats));
        }
        if rows.is_empty() {
            return Err(EvalError::Parse {
                line: 1,
                msg: "empty report".to_string(),
            });
        }
        Ok(AccuracyReport { rows })
    }
}

/// Per-token predictions aligned with a corpus: one entry per sentence,
/// one optional word sequence per token.
pub type Predictions = Vec<Vec<Option<Vec<String>>>>;

/// Prediction TSV: the corpus columns plus a fourth `PREDICTED` column
/// (space-separated words, `<ABSENT>` for no output).
pub fn write_predictions<W: Write>(
    corpus: &Corpus,
    predictions: &Predictions,
    w: &mut W,
) -> Result<(), EvalError> {
    check_alignment(corpus, predictions)?;
    for (sentence, preds) in corpus.sentences.iter().zip(predictions) {
        for (record, pred) in sentence.records.iter().zip(preds) {
            let predicted = match pred {
                Some(words) => words.join(" "),
                None => ABSENT.to_string(),
            };
            writeln!(
                w,
                "{}\t{}\t{}\t{predicted}",
                record.class.name(),
                record.input,
                record.output.join(" ")
            )
            .map_err(EvalError::Io)?;
        }
        writeln!(w, "{}", crate::corpus::EOS_LINE).map_err(EvalError::Io)?;
    }
    Ok(())
}

pub fn read_predictions<R: BufRead>(r: R) -> Result<(Corpus, Predictions), EvalError> {
    let mut corpus_text = String::new();
    let mut flat_preds: Vec<Option<Vec<String>>> = Vec::new();
    let mut sentence_sizes: Vec<usize> = Vec::new();
    let mut current = 0usize;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if line == crate::corpus::EOS_LINE {
            corpus_text.push_str(&line);
            corpus_text.push('\n');
            sentence_sizes.push(current);
            current = 0;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(EvalError::Parse {
                line: lineno + 1,
                msg: "expected 4 columns".to_string(),
            });
        }
        corpus_text.push_str(&cols[..3].join("\t"));
        corpus_text.push('\n');
        flat_preds.push(if cols[3] == ABSENT {
            None
        } else {
            Some(cols[3].split(' ').map(str::to_string).collect())
        });
        current += 1;
    }
    let corpus = parse_corpus(corpus_text.as_bytes())?;
    let mut predictions = Vec::new();
    let mut it = flat_preds.into_iter();
    for size in sentence_sizes {
        predictions.push(it.by_ref().take(size).collect());
    }
    Ok((corpus, predictions))
}

fn check_alignment(corpus: &Corpus, predictions: &Predictions) -> Result<(), EvalError> {
    let gold = corpus.num_records();
    let predicted: usize = predictions.iter().map(Vec::len).sum();
    if corpus.sentences.len() != predictions.len() || gold != predicted {
        return Err(EvalError::Misaligned { gold, predicted });
    }
    Ok(())
}

/// A token is correct iff predicted equals gold exactly after `<self>`
/// expansion on both sides. Absent predictions are dropped, not counted.
pub fn score_predictions(
    gold: &Corpus,
    predictions: &Predictions,
) -> Result<AccuracyReport, EvalError> {
    check_alignment(gold, predictions)?;
    let mut report = AccuracyReport::empty();
    for (sentence, preds) in gold.sentences.iter().zip(predictions) {
        for (record, pred) in sentence.records.iter().zip(preds) {
            let class_row = record.class.name();
            let update = |report: &mut AccuracyReport, f: &dyn Fn(&mut ClassStats)| {
                for (name, stats) in &mut report.rows {
                    if name == "ALL" || name == class_row {
                        f(stats);
                    }
                }
            };
            match pred {
                None => update(&mut report, &|s| s.dropped += 1),
                Some(words) => {
                    let want = expand_self(&record.output, &record.input);
                    let got = expand_self(words, &record.input);
                    let hit = got == want;
                    update(&mut report, &|s| {
                        s.n += 1;
                        if hit {
                            s.correct += 1;
                        }
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Accuracy split by whether the test token's written form occurred in
/// training. Absent predictions are dropped from both partitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeenUnseenScores {
    pub seen: ClassStats,
    pub unseen: ClassStats,
}

pub fn seen_unseen_scores(
    train: &Corpus,
    gold: &Corpus,
    predictions: &Predictions,
) -> Result<SeenUnseenScores, EvalError> {
    check_alignment(gold, predictions)?;
    let train_inputs: HashSet<&str> = train.records().map(|r| r.input.as_str()).collect();
    let mut seen = ClassStats::default();
    let mut unseen = ClassStats::default();
    for (sentence, preds) in gold.sentences.iter().zip(predictions) {
        for (record, pred) in sentence.records.iter().zip(preds) {
            let side = if train_inputs.contains(record.input.as_str()) {
                &mut seen
            } else {
                &mut unseen
            };
            match pred {
                None => side.dropped += 1,
                Some(words) => {
                    side.n += 1;
                    let want = expand_self(&record.output, &record.input);
                    if expand_self(words, &record.input) == want {
                        side.correct += 1;
                    }
                }
            }
        }
    }
    Ok(SeenUnseenScores { seen, unseen })
}

/// Accuracy delta per class between two runs; `None` when either side is
/// undefined. `flagged` marks any nonzero difference.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDelta {
    pub class: String,
    pub delta: Option<f64>,
    pub flagged: bool,
}

pub fn compare_runs(
    a: &AccuracyReport,
    b: &AccuracyReport,
) -> Result<Vec<ClassDelta>, EvalError> {
    let names = |r: &AccuracyReport| -> HashSet<String> {
        r.rows.iter().map(|(n, _)| n.clone()).collect()
    };
    if names(a) != names(b) {
        return Err(EvalError::ClassMismatch);
    }
    Ok(a.rows
        .iter()
        .map(|(name, sa)| {
            let sb = b.stats(name).expect("same class sets");
            let delta = match (sa.accuracy(), sb.accuracy()) {
                (Some(x), Some(y)) => Some(y - x),
                _ => None,
            };
            ClassDelta {
                class: name.clone(),
                flagged: delta.is_some_and(|d| d != 0.0),
                delta,
            }
        })
        .collect())
}

/// Delta TSV: `CLASS⇥A⇥B⇥DELTA⇥FLAG`.
pub fn write_deltas<W: Write>(
    a: &AccuracyReport,
    b: &AccuracyReport,
    deltas: &[ClassDelta],
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "CLASS\tA\tB\tDELTA\tFLAG")?;
    for d in deltas {
        let fmt = |s: Option<f64>| match s {
            Some(v) => format!("{v:.4}"),
            None => UNDEFINED.to_string(),
        };
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            d.class,
            fmt(a.stats(&d.class).unwrap().accuracy()),
            fmt(b.stats(&d.class).unwrap().accuracy()),
            fmt(d.delta),
            if d.flagged { "*" } else { "" }
        )?;
    }
    Ok(())
}
