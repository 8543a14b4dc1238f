//! MEASURE and MONEY covering filters: number grammar plus unit/currency
//! verbalization, with prefix currencies reordered into reading order.

use std::collections::HashSet;

use crate::wfst::{
    compose, enumerate_paths, Arc, Automaton, SymbolTable, Weight, EPSILON,
};

use super::numbers::extend_tables;
use super::{char_acceptor, CurrencyEntry, CurrencyPosition, GrammarError, MeasureEntry, NumberGrammar};

/// Characters a written amount may contain; the reorder transducer loops
/// over these between a prefix symbol and its final position.
const AMOUNT_CHARS: &str = "0123456789-., ";

fn check_unique<'a>(keys: impl Iterator<Item = &'a str>) -> Result<(), GrammarError> {
    let mut seen = HashSet::new();
    for k in keys {
        if !seen.insert(k) {
            return Err(GrammarError::ConflictingEntry(k.to_string()));
        }
    }
    Ok(())
}

/// Single-path transducer from the characters of `input` to the words of
/// `output`, over existing tables.
fn chars_to_words(
    chars: &SymbolTable,
    words: &SymbolTable,
    input: &str,
    output: &[String],
) -> Automaton {
    let ilabels: Vec<usize> = input
        .chars()
        .map(|c| chars.get(&c.to_string()).expect("char in table"))
        .collect();
    let olabels: Vec<usize> = output
        .iter()
        .map(|w| words.get(w).expect("word in table"))
        .collect();
    Automaton::string_transducer(chars, words, &ilabels, &olabels)
}

fn union_all(mut parts: Vec<Automaton>) -> Automaton {
    let mut acc = parts.pop().expect("non-empty union");
    while let Some(p) = parts.pop() {
        acc = Automaton::union(&acc, &p);
    }
    acc
}

/// Optional single space, consumed silently.
fn optional_space(chars: &SymbolTable, words: &SymbolTable) -> Automaton {
    Automaton::optional(&chars_to_words(chars, words, " ", &[]))
}

/// `<number><optional space><unit abbreviation>` to `<number words><unit
/// words>`, over-generating all spoken unit variants.
pub fn build_measure_filter(
    numbers: &NumberGrammar,
    lexicon: &[MeasureEntry],
) -> Result<Automaton, GrammarError> {
    if lexicon.is_empty() {
        return Err(GrammarError::EmptyLexicon);
    }
    check_unique(lexicon.iter().map(|e| e.abbrev.as_str()))?;
    let extra_chars = lexicon.iter().flat_map(|e| e.abbrev.chars());
    let extra_words = lexicon
        .iter()
        .flat_map(|e| e.spoken_forms.iter().flatten())
        .cloned();
    let amount = extend_tables(numbers, extra_chars, extra_words)?;
    let chars = amount.input_symbols().clone();
    let words = amount.output_symbols().clone();

    let mut units = Vec::new();
    for entry in lexicon {
        for form in &entry.spoken_forms {
            units.push(chars_to_words(&chars, &words, &entry.abbrev, form));
        }
    }
    let tail = Automaton::concat(&optional_space(&chars, &words), &union_all(units));
    Ok(Automaton::concat(&amount, &tail).trim())
}

/// Character-to-character transducer that moves a prefix currency symbol
/// after the amount (`£5` -> `5£`) and passes suffix currencies through
/// unchanged. Pure reordering (the output is a permutation of the input),
/// except that a separator space after a prefix symbol is dropped.
pub fn build_reorder_transducer(chars: &SymbolTable, lexicon: &[CurrencyEntry]) -> Automaton {
    let mut r = Automaton::new(chars.clone(), chars.clone());
    let start = r.add_state();
    r.set_start(start);
    let amount_labels: Vec<usize> = AMOUNT_CHARS
        .chars()
        .map(|c| chars.get(&c.to_string()).expect("amount char in table"))
        .collect();

    for entry in lexicon {
        let labels: Vec<usize> = entry
            .symbol
            .chars()
            .map(|c| chars.get(&c.to_string()).expect("symbol char in table"))
            .collect();
        match entry.position {
            CurrencyPosition::Prefix => {
                // consume the symbol silently, copy the amount, then emit
                // the delayed symbol
                let mut cur = start;
                for &l in &labels {
                    let next = r.add_state();
                    r.add_arc(cur, Arc { ilabel: l, olabel: EPSILON, weight: Weight::one(), next });
                    cur = next;
                }
                let body = r.add_state();
                r.add_arc(cur, Arc { ilabel: EPSILON, olabel: EPSILON, weight: Weight::one(), next: body });
                // tolerate a space between the symbol and the amount
                if let Some(space) = chars.get(" ") {
                    r.add_arc(cur, Arc { ilabel: space, olabel: EPSILON, weight: Weight::one(), next: body });
                }
                for &l in &amount_labels {
                    r.add_arc(body, Arc { ilabel: l, olabel: l, weight: Weight::one(), next: body });
                }
                let mut cur = body;
                for &l in &labels {
                    let next = r.add_state();
                    r.add_arc(cur, Arc { ilabel: EPSILON, olabel: l, weight: Weight::one(), next });
                    cur = next;
                }
                r.set_final(cur, Weight::one());
            }
            CurrencyPosition::Suffix => {
                // identity on amount then symbol
                let body = r.add_state();
                r.add_arc(start, Arc { ilabel: EPSILON, olabel: EPSILON, weight: Weight::one(), next: body });
                for &l in &amount_labels {
                    r.add_arc(body, Arc { ilabel: l, olabel: l, weight: Weight::one(), next: body });
                }
                let mut cur = body;
                for &l in &labels {
                    let next = r.add_state();
                    r.add_arc(cur, Arc { ilabel: l, olabel: l, weight: Weight::one(), next });
                    cur = next;
                }
                r.set_final(cur, Weight::one());
            }
        }
    }
    r
}

/// Currency amounts to spoken form: reorder prefix symbols behind the
/// amount, then verbalize `<number><optional space><symbol>`.
pub fn build_money_filter(
    numbers: &NumberGrammar,
    lexicon: &[CurrencyEntry],
) -> Result<Automaton, GrammarError> {
    if lexicon.is_empty() {
        return Err(GrammarError::EmptyLexicon);
    }
    check_unique(lexicon.iter().map(|e| e.symbol.as_str()))?;
    let extra_chars = lexicon.iter().flat_map(|e| e.symbol.chars());
    let extra_words = lexicon
        .iter()
        .flat_map(|e| e.spoken_forms.iter().flatten())
        .cloned();
    let amount = extend_tables(numbers, extra_chars, extra_words)?;
    let chars = amount.input_symbols().clone();
    let words = amount.output_symbols().clone();

    let mut units = Vec::new();
    for entry in lexicon {
        for form in &entry.spoken_forms {
            units.push(chars_to_words(&chars, &words, &entry.symbol, form));
        }
    }
    let tail = Automaton::concat(&optional_space(&chars, &words), &union_all(units));
    let verbalizer = Automaton::concat(&amount, &tail);
    let reorder = build_reorder_transducer(&chars, lexicon);
    Ok(compose(&reorder, &verbalizer)?.trim())
}

/// All spoken renderings a filter assigns to a written token, sorted and
/// deduplicated. Empty when the filter does not accept the token.
pub fn filter_verbalizations(filter: &Automaton, token: &str) -> Vec<Vec<String>> {
    let Some(acc) = char_acceptor(filter.input_symbols(), token) else {
        return Vec::new();
    };
    let composed = match compose(&acc, filter) {
        Ok(c) => c.trim(),
        Err(_) => return Vec::new(),
    };
    // the trimmed composition is acyclic, so no path is longer than its
    // arc count
    let mut outs: Vec<Vec<String>> = enumerate_paths(&composed, composed.num_arcs())
        .into_iter()
        .map(|p| p.output_words(filter.output_symbols()))
        .collect();
    outs.sort();
    outs.dedup();
    outs
}

#[cfg(test)]
mod tests {
    use super::super::{build_cardinal_fst, build_decimal_fst, default_lexicons};
    use super::*;

    fn grammar() -> NumberGrammar {
        build_decimal_fst(&build_cardinal_fst(12))
    }

    fn joined(outs: &[Vec<String>]) -> Vec<String> {
        outs.iter().map(|o| o.join(" ")).collect()
    }

    #[test]
    fn measure_covers_singular_and_plural() {
        let (measures, _) = default_lexicons();
        let filter = build_measure_filter(&grammar(), &measures).unwrap();
        let outs = joined(&filter_verbalizations(&filter, "24.2kg"));
        assert_eq!(
            outs,
            vec![
                "twenty four point two kilogram".to_string(),
                "twenty four point two kilograms".to_string(),
            ]
        );
        let outs = joined(&filter_verbalizations(&filter, "1 g"));
        assert_eq!(outs, vec!["one gram".to_string(), "one grams".to_string()]);
        let outs = joined(&filter_verbalizations(&filter, "150lb"));
        assert!(outs.contains(&"one hundred fifty pounds".to_string()), "{outs:?}");
    }

    #[test]
    fn measure_abbreviations_are_case_sensitive() {
        let (measures, _) = default_lexicons();
        let filter = build_measure_filter(&grammar(), &measures).unwrap();
        let outs = joined(&filter_verbalizations(&filter, "2 mA"));
        assert!(!outs.is_empty());
        assert!(outs.iter().all(|o| o.contains("milliampere")), "{outs:?}");
        let outs = joined(&filter_verbalizations(&filter, "2 MA"));
        assert!(outs.iter().all(|o| o.contains("megaampere")), "{outs:?}");
    }

    #[test]
    fn measure_rejects_bare_numbers_and_units() {
        let (measures, _) = default_lexicons();
        let filter = build_measure_filter(&grammar(), &measures).unwrap();
        assert!(filter_verbalizations(&filter, "24.2").is_empty());
        assert!(filter_verbalizations(&filter, "kg").is_empty());
        assert!(filter_verbalizations(&filter, "hello").is_empty());
    }

    #[test]
    fn money_reorders_prefix_currencies() {
        let (_, currencies) = default_lexicons();
        let filter = build_money_filter(&grammar(), &currencies).unwrap();
        let outs = joined(&filter_verbalizations(&filter, "\u{a3}5"));
        assert_eq!(outs, vec!["five pound".to_string(), "five pounds".to_string()]);
        let outs = joined(&filter_verbalizations(&filter, "$100"));
        assert_eq!(
            outs,
            vec!["one hundred dollar".to_string(), "one hundred dollars".to_string()]
        );
        let outs = joined(&filter_verbalizations(&filter, "\u{a3}900"));
        assert!(!outs.is_empty());
        assert!(outs.iter().all(|o| !o.contains("euro")), "{outs:?}");
    }

    #[test]
    fn money_passes_suffix_currencies_through() {
        let (_, currencies) = default_lexicons();
        let filter = build_money_filter(&grammar(), &currencies).unwrap();
        let outs = joined(&filter_verbalizations(&filter, "100 AED"));
        assert!(outs.iter().any(|o| o.contains("dirham")), "{outs:?}");
    }

    #[test]
    fn reorder_output_is_a_permutation_of_input() {
        let (_, currencies) = default_lexicons();
        let g = grammar();
        let amount = extend_tables(&g, currencies.iter().flat_map(|e| e.symbol.chars()), [])
            .unwrap();
        let chars = amount.input_symbols().clone();
        let reorder = build_reorder_transducer(&chars, &currencies);
        for entry in &currencies {
            for amount_str in ["5", "24.2", "1,234", "900 000"] {
                let token = match entry.position {
                    CurrencyPosition::Prefix => format!("{}{}", entry.symbol, amount_str),
                    CurrencyPosition::Suffix => format!("{} {}", amount_str, entry.symbol),
                };
                let acc = char_acceptor(&chars, &token).unwrap();
                let composed = compose(&acc, &reorder).unwrap().trim();
                let paths = enumerate_paths(&composed, 200);
                assert!(!paths.is_empty(), "reorder rejected {token}");
                for p in paths {
                    let mut out: Vec<String> = p.output_words(&chars);
                    let mut inp: Vec<String> =
                        token.chars().map(|c| c.to_string()).collect();
                    out.sort();
                    inp.sort();
                    assert_eq!(out, inp, "not a permutation for {token}");
                }
            }
        }
    }

    #[test]
    fn measure_coverage_over_random_tokens() {
        use rand::{Rng, SeedableRng};
        let (measures, _) = default_lexicons();
        let filter = build_measure_filter(&grammar(), &measures).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.gen_range(0u64..1_000_000);
            let entry = &measures[rng.gen_range(0..measures.len())];
            let space = if rng.gen_bool(0.5) { " " } else { "" };
            let token = format!("{n}{space}{}", entry.abbrev);
            let outs = filter_verbalizations(&filter, &token);
            assert!(!outs.is_empty(), "no verbalization for {token}");
            let number = super::super::reference::cardinal_words(n).join(" ");
            assert!(
                outs.iter().any(|o| o.join(" ").starts_with(&number)),
                "missing `{number} ...` among {outs:?} for {token}"
            );
        }
    }

    #[test]
    fn duplicate_entries_are_rejected() {
        let (mut measures, mut currencies) = default_lexicons();
        measures.push(measures[0].clone());
        let err = build_measure_filter(&grammar(), &measures).unwrap_err();
        assert!(matches!(err, GrammarError::ConflictingEntry(_)));
        currencies.push(currencies[0].clone());
        let err = build_money_filter(&grammar(), &currencies).unwrap_err();
        assert!(matches!(err, GrammarError::ConflictingEntry(_)));
    }

    #[test]
    fn empty_lexicons_are_rejected() {
        assert!(matches!(
            build_measure_filter(&grammar(), &[]).unwrap_err(),
            GrammarError::EmptyLexicon
        ));
        assert!(matches!(
            build_money_filter(&grammar(), &[]).unwrap_err(),
            GrammarError::EmptyLexicon
        ));
    }
}
