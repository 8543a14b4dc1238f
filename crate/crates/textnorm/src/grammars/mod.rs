//! Over-generating covering grammars: the number-name verbalizer and the
//! MEASURE/MONEY filters, driven by editable TSV lexicons.

mod filters;
mod numbers;
pub mod reference;

pub use filters::{
    build_measure_filter, build_money_filter, build_reorder_transducer, filter_verbalizations,
};
pub use numbers::{build_cardinal_fst, build_decimal_fst, NumberGrammar};

use std::io::BufRead;

use thiserror::Error;

use crate::wfst::{Automaton, SymbolTable};

/// Shipped measure lexicon (`abbrev<TAB>form1|form2`).
pub const DEFAULT_MEASURES: &str = include_str!("../../data/measures.tsv");
/// Shipped currency lexicon (`symbol<TAB>prefix|suffix<TAB>form1|form2`).
pub const DEFAULT_CURRENCIES: &str = include_str!("../../data/currencies.tsv");

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("conflicting lexicon entries for `{0}`")]
    ConflictingEntry(String),
    #[error("empty spoken form in lexicon")]
    EmptyForm,
    #[error("lexicon parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Wfst(#[from] crate::wfst::WfstError),
}

/// A written unit abbreviation and its spoken variants (singular and
/// plural), e.g. `kg` -> kilogram | kilograms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureEntry {
    pub abbrev: String,
    pub spoken_forms: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurrencyPosition {
    /// Written before the amount (`£5`); reordered to reading order.
    Prefix,
    /// Written after the amount (`100 AED`); passes through unchanged.
    Suffix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurrencyEntry {
    pub symbol: String,
    pub position: CurrencyPosition,
    pub spoken_forms: Vec<Vec<String>>,
}

fn parse_forms(field: &str) -> Option<Vec<Vec<String>>> {
    let forms: Vec<Vec<String>> = field
        .split('|')
        .map(|f| f.split(' ').map(str::to_string).collect::<Vec<_>>())
        .collect();
    if forms.is_empty() || forms.iter().any(|f| f.is_empty() || f.iter().any(String::is_empty)) {
        None
    } else {
        Some(forms)
    }
}

/// Parse a measure lexicon: one `abbrev<TAB>form1|form2` entry per line.
pub fn parse_measure_lexicon<R: BufRead>(r: R) -> Result<Vec<MeasureEntry>, GrammarError> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| GrammarError::Parse {
            line: lineno + 1,
            msg: msg.to_string(),
        };
        let (abbrev, forms) = line
            .split_once('\t')
            .ok_or_else(|| err("expected `abbrev<TAB>forms`"))?;
        if abbrev.is_empty() {
            return Err(err("empty abbreviation"));
        }
        let spoken_forms = parse_forms(forms).ok_or_else(|| err("empty spoken form"))?;
        out.push(MeasureEntry {
            abbrev: abbrev.to_string(),
            spoken_forms,
        });
    }
    Ok(out)
}

/// Parse a currency lexicon: `symbol<TAB>prefix|suffix<TAB>form1|form2` per
/// line.
pub fn parse_currency_lexicon<R: BufRead>(r: R) -> Result<Vec<CurrencyEntry>, GrammarError> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| GrammarError::Parse {
            line: lineno + 1,
            msg: msg.to_string(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(err("expected 3 tab-separated columns"));
        }
        if cols[0].is_empty() {
            return Err(err("empty currency symbol"));
        }
        let position = match cols[1] {
            "prefix" => CurrencyPosition::Prefix,
            "suffix" => CurrencyPosition::Suffix,
            other => return Err(err(&format!("bad position `{other}`"))),
        };
        let spoken_forms = parse_forms(cols[2]).ok_or_else(|| err("empty spoken form"))?;
        out.push(CurrencyEntry {
            symbol: cols[0].to_string(),
            position,
            spoken_forms,
        });
    }
    Ok(out)
}

/// Load both lexicons from TSV files.
pub fn load_lexicons(
    measure_path: &std::path::Path,
    currency_path: &std::path::Path,
) -> Result<(Vec<MeasureEntry>, Vec<CurrencyEntry>), GrammarError> {
    let measures = parse_measure_lexicon(std::io::BufReader::new(std::fs::File::open(
        measure_path,
    )?))?;
    let currencies = parse_currency_lexicon(std::io::BufReader::new(std::fs::File::open(
        currency_path,
    )?))?;
    Ok((measures, currencies))
}

/// The shipped default lexicons.
pub fn default_lexicons() -> (Vec<MeasureEntry>, Vec<CurrencyEntry>) {
    (
        parse_measure_lexicon(DEFAULT_MEASURES.as_bytes()).expect("shipped measure lexicon"),
        parse_currency_lexicon(DEFAULT_CURRENCIES.as_bytes()).expect("shipped currency lexicon"),
    )
}

/// Acceptor of a token's character string against a grammar's input table.
/// `None` when some character is outside the table (the grammar cannot
/// match the token).
pub fn char_acceptor(syms: &SymbolTable, token: &str) -> Option<Automaton> {
    let labels: Vec<usize> = token
        .chars()
        .map(|c| syms.get(&c.to_string()))
        .collect::<Option<_>>()?;
    Some(Automaton::string_acceptor(syms, &labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_measure_line() {
        let entries = parse_measure_lexicon("kg\tkilogram|kilograms\n".as_bytes()).unwrap();
        assert_eq!(
            entries,
            vec![MeasureEntry {
                abbrev: "kg".into(),
                spoken_forms: vec![vec!["kilogram".into()], vec!["kilograms".into()]],
            }]
        );
    }

    #[test]
    fn parses_prefix_currency_line() {
        let entries =
            parse_currency_lexicon("\u{a3}\tprefix\tpound|pounds\n".as_bytes()).unwrap();
        assert_eq!(entries[0].symbol, "\u{a3}");
        assert_eq!(entries[0].position, CurrencyPosition::Prefix);
        assert_eq!(entries[0].spoken_forms.len(), 2);
    }

    #[test]
    fn empty_file_gives_empty_list() {
        assert!(parse_measure_lexicon("".as_bytes()).unwrap().is_empty());
        assert!(parse_currency_lexicon("".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        let err = parse_measure_lexicon("kg\tkilogram\nmm\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_currency_lexicon("$\tmiddle\tdollar\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn default_lexicons_are_big_enough() {
        let (measures, currencies) = default_lexicons();
        assert!(measures.len() >= 100, "got {} measures", measures.len());
        assert!(currencies.len() >= 10, "got {} currencies", currencies.len());
        // the paper's running examples must be present
        assert!(measures.iter().any(|m| m.abbrev == "kg"));
        assert!(measures.iter().any(|m| m.abbrev == "ft"));
        assert!(measures.iter().any(|m| m.abbrev == "lb"));
        assert!(measures.iter().any(|m| m.abbrev == "mA"));
        assert!(currencies.iter().any(|c| c.symbol == "\u{a3}"));
    }
}
