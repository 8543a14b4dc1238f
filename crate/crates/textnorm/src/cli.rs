//! Command-line interface: training, filter compilation, normalization,
//! and evaluation plumbing.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{parse_corpus, Corpus};
use crate::decoder::{
    default_filter_bank, normalize_sentence, oracle_accuracy, FilterBank, SentenceDecoder,
    DEFAULT_BEAM, DEFAULT_WINDOW,
};
use crate::eval::{
    compare_runs, read_predictions, score_predictions, seen_unseen_scores, write_deltas,
    write_predictions, AccuracyReport, Predictions,
};
use crate::neural::{ModelConfig, NeuralModel, NeuralScorer, TrainOptions};
use crate::scorers::{
    make_source_channel_scorer, train_channel, train_ngram, verbalized_sentences,
    ContextualScorer, EmpiricalChannel, NgramConfig, NgramModel,
};

#[derive(Parser)]
#[command(name = "textnorm", about = "Text normalization pipeline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the token-to-verbalization channel from a training corpus.
    TrainChannel {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate a Katz-backoff n-gram language model over spoken text.
    TrainLm {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value_t = 5)]
        katz_threshold: u64,
        #[arg(long, default_value_t = 2)]
        min_count: u64,
        #[arg(long, default_value_t = 10_000)]
        vocab_cap: usize,
    },
    /// Train the windowed encoder-decoder model.
    TrainNeural {
        #[arg(long)]
        train: PathBuf,
        /// Checkpoint base path (writes `<base>.manifest` and `<base>.bin`).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional key=value model configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compile the covering filters and write them as text automata.
    BuildFilters {
        #[command(flatten)]
        lexicons: LexiconArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalize a corpus and write a prediction TSV.
    Normalize {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        lm: Option<PathBuf>,
        /// Neural checkpoint base; switches the windowed mode's scorer.
        #[arg(long)]
        neural: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        lm_weight: f64,
        #[arg(long, default_value_t = DEFAULT_BEAM)]
        beam: usize,
        /// Constrain covered tokens through the grammar filters.
        #[arg(long, overrides_with = "no_filter")]
        filter: bool,
        #[arg(long = "no-filter")]
        no_filter: bool,
        #[command(flatten)]
        lexicons: LexiconArgs,
    },
    /// Score predictions against gold and write a per-class report.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Also write every mismatch as a TSV.
        #[arg(long)]
        dump_errors: Option<PathBuf>,
    },
    /// Upper-bound accuracy of the pruned channel hypotheses.
    Oracle {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// When given, also report decoded accuracy (always ≤ oracle).
        #[arg(long)]
        pred: Option<PathBuf>,
    },
    /// Train/test token overlap, optionally with seen/unseen accuracy.
    Overlap {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        pred: Option<PathBuf>,
    },
    /// Per-class accuracy deltas between two report files.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Sausage decoding of channel posteriors with the language model.
    Exp1,
    /// Windowed contextual scoring with optional filter constraints.
    Exp2,
}

#[derive(Args)]
struct LexiconArgs {
    /// Measure lexicon TSV; built-in lexicon when omitted.
    #[arg(long)]
    measures: Option<PathBuf>,
    /// Currency lexicon TSV; built-in lexicon when omitted.
    #[arg(long)]
    currencies: Option<PathBuf>,
}

/// Anything that aborts a run after argument parsing is a data error.
type DataResult<T> = Result<T, Box<dyn std::error::Error>>;

pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successful exits
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn load_corpus(path: &Path) -> DataResult<Corpus> {
    Ok(parse_corpus(BufReader::new(File::open(path)?))?)
}

fn build_bank(lexicons: &LexiconArgs) -> DataResult<FilterBank> {
    match (&lexicons.measures, &lexicons.currencies) {
        (None, None) => Ok(default_filter_bank()?),
        (m, c) => {
            let defaults = crate::grammars::default_lexicons();
            let measures = match m {
                Some(p) => crate::grammars::parse_measure_lexicon(BufReader::new(File::open(p)?))?,
                None => defaults.0,
            };
            let currencies = match c {
                Some(p) => {
                    crate::grammars::parse_currency_lexicon(BufReader::new(File::open(p)?))?
                }
                None => defaults.1,
            };
            let numbers =
                crate::grammars::build_decimal_fst(&crate::grammars::build_cardinal_fst(12));
            Ok(FilterBank::build(&numbers, &measures, &currencies)?)
        }
    }
}

fn run(command: Command) -> DataResult<()> {
    match command {
        Command::TrainChannel { train, out } => {
            let channel = train_channel(&load_corpus(&train)?)?;
            channel.write(&mut BufWriter::new(File::create(out)?))?;
            Ok(())
        }
        Command::TrainLm {
            train,
            out,
            order,
            katz_threshold,
            min_count,
            vocab_cap,
        } => {
            let corpus = load_corpus(&train)?;
            let lm = train_ngram(
                &verbalized_sentences(&corpus),
                &NgramConfig {
                    order,
                    katz_threshold,
                    min_count,
                    vocab_cap,
                },
            )?;
            lm.write(&mut BufWriter::new(File::create(out)?))?;
            Ok(())
        }
        Command::TrainNeural {
            train,
            out,
            epochs,
            seed,
            config,
        } => {
            let corpus = load_corpus(&train)?;
            let config = match config {
                Some(path) => ModelConfig::read(BufReader::new(File::open(path)?))?,
                None => ModelConfig::default(),
            };
            let examples: Vec<_> = corpus
                .sentences
                .iter()
                .flat_map(|s| crate::corpus::extract_windows(s, DEFAULT_WINDOW))
                .collect();
            let model = crate::neural::train(
                &examples,
                &config,
                &TrainOptions {
                    epochs,
                    seed,
                    ..TrainOptions::default()
                },
            )?;
            model.save(&out)?;
            Ok(())
        }
        Command::BuildFilters { lexicons, out } => {
            let bank = build_bank(&lexicons)?;
            std::fs::create_dir_all(&out)?;
            for (name, filter) in ["money", "measure"].iter().zip(bank.filters()) {
                filter.write_text(&mut BufWriter::new(File::create(
                    out.join(format!("{name}.fst")),
                )?))?;
                filter.input_symbols().write(&mut BufWriter::new(
                    File::create(out.join(format!("{name}.isyms")))?,
                ))?;
                filter.output_symbols().write(&mut BufWriter::new(
                    File::create(out.join(format!("{name}.osyms")))?,
                ))?;
            }
            Ok(())
        }
        Command::Normalize {
            mode,
            input,
            out,
            channel,
            lm,
            neural,
            lm_weight,
            beam,
            filter,
            no_filter,
            lexicons,
        } => {
            let corpus = load_corpus(&input)?;
            let use_filter = filter && !no_filter;
            let bank = if use_filter {
                Some(build_bank(&lexicons)?)
            } else {
                None
            };
            let mut channel = EmpiricalChannel::read(BufReader::new(File::open(channel)?))?;
            if let Some(bank) = &bank {
                channel = channel.with_fallback_filters(bank.filters().to_vec());
            }
            let lm: Option<NgramModel> = match lm {
                Some(p) => Some(NgramModel::read(BufReader::new(File::open(p)?))?),
                None => None,
            };
            let predictions = match mode {
                Mode::Exp1 => {
                    let lm = lm.ok_or("exp1 requires --lm")?;
                    let decoder = SentenceDecoder::Sausage {
                        channel: &channel,
                        lm: &lm,
                        lm_weight,
                    };
                    predict(&corpus, &decoder, None, beam)
                }
                Mode::Exp2 => {
                    let scorer: Box<dyn ContextualScorer> = match neural {
                        Some(base) => Box::new(NeuralScorer::new(NeuralModel::load(&base)?)),
                        None => {
                            let lm = lm.ok_or("exp2 without --neural requires --lm")?;
                            Box::new(make_source_channel_scorer(channel, lm, lm_weight))
                        }
                    };
                    let decoder = SentenceDecoder::Windowed {
                        scorer: scorer.as_ref(),
                    };
                    predict(&corpus, &decoder, bank.as_ref(), beam)
                }
            };
            write_predictions(&corpus, &predictions, &mut BufWriter::new(File::create(out)?))?;
            Ok(())
        }
        Command::Evaluate {
            gold,
            pred,
            report,
            dump_errors,
        } => {
            let gold = load_corpus(&gold)?;
            let (_, predictions) = read_predictions(BufReader::new(File::open(pred)?))?;
            let result = score_predictions(&gold, &predictions)?;
            result.write_tsv(&mut BufWriter::new(File::create(report)?))?;
            if let Some(path) = dump_errors {
                dump_error_tsv(&gold, &predictions, &mut BufWriter::new(File::create(path)?))?;
            }
            Ok(())
        }
        Command::Oracle {
            channel,
            test,
            pred,
        } => {
            let channel = EmpiricalChannel::read(BufReader::new(File::open(channel)?))?;
            let test = load_corpus(&test)?;
            let oracle = oracle_accuracy(&channel, &test);
            println!("ORACLE\t{oracle:.4}");
            if let Some(path) = pred {
                let (_, predictions) = read_predictions(BufReader::new(File::open(path)?))?;
                let report = score_predictions(&test, &predictions)?;
                let decoded = report.stats("ALL").and_then(|s| s.accuracy()).unwrap_or(0.0);
                println!("DECODED\t{decoded:.4}");
                if decoded > oracle {
                    return Err("decoded accuracy exceeds the oracle bound".into());
                }
            }
            Ok(())
        }
        Command::Overlap { train, test, pred } => {
            let train = load_corpus(&train)?;
            let test = load_corpus(&test)?;
            let report = crate::corpus::overlap_report(&train, &test);
            println!("SEEN\t{}", report.seen_count);
            println!("UNSEEN\t{}", report.unseen_count);
            println!("SEEN_FRACTION\t{:.4}", report.seen_fraction);
            if let Some(path) = pred {
                let (_, predictions) = read_predictions(BufReader::new(File::open(path)?))?;
                let scores = seen_unseen_scores(&train, &test, &predictions)?;
                for (name, stats) in [("SEEN", scores.seen), ("UNSEEN", scores.unseen)] {
                    match stats.accuracy() {
                        Some(a) => println!("{name}_ACCURACY\t{a:.4}"),
                        None => println!("{name}_ACCURACY\t{}", crate::eval::UNDEFINED),
                    }
                }
            }
            Ok(())
        }
        Command::Compare { a, b, out } => {
            let a = AccuracyReport::read_tsv(BufReader::new(File::open(a)?))?;
            let b = AccuracyReport::read_tsv(BufReader::new(File::open(b)?))?;
            let deltas = compare_runs(&a, &b)?;
            match out {
                Some(path) => {
                    write_deltas(&a, &b, &deltas, &mut BufWriter::new(File::create(path)?))?
                }
                None => write_deltas(&a, &b, &deltas, &mut std::io::stdout().lock())?,
            }
            Ok(())
        }
    }
}

fn predict(
    corpus: &Corpus,
    decoder: &SentenceDecoder,
    bank: Option<&FilterBank>,
    beam: usize,
) -> Predictions {
    corpus
        .sentences
        .iter()
        .map(|sentence| {
            normalize_sentence(sentence, decoder, bank, beam)
                .into_iter()
                .map(|p| p.words)
                .collect()
        })
        .collect()
}

fn dump_error_tsv<W: Write>(
    gold: &Corpus,
    predictions: &Predictions,
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "CLASS\tINPUT\tGOLD\tPREDICTED")?;
    for (sentence, preds) in gold.sentences.iter().zip(predictions) {
        for (record, pred) in sentence.records.iter().zip(preds) {
            let want = crate::corpus::expand_self(&record.output, &record.input);
            let line = match pred {
                None => Some(crate::eval::ABSENT.to_string()),
                Some(words) => {
                    let got = crate::corpus::expand_self(words, &record.input);
                    (got != want).then(|| got.join(" "))
                }
            };
            if let Some(predicted) = line {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{predicted}",
                    record.class.name(),
                    record.input,
                    want.join(" ")
                )?;
            }
        }
    }
    Ok(())
}
