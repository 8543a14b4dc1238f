//! Number-name verbalizer grammars built as character-to-word transducers.

use crate::wfst::{compose, enumerate_paths, Automaton, SymbolTable};

use super::{char_acceptor, GrammarError};

const UNITS: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen",
];

const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

const SCALES: [&str; 5] = ["", "thousand", "million", "billion", "trillion"];

/// Maximum number of fractional digits the decimal grammar unrolls; keeps
/// the grammar acyclic.
const MAX_FRACTION_DIGITS: usize = 10;

/// A transducer from written digit strings to number-name word sequences.
#[derive(Debug, Clone)]
pub struct NumberGrammar {
    fst: Automaton,
}

impl NumberGrammar {
    pub fn automaton(&self) -> &Automaton {
        &self.fst
    }

    pub fn input_symbols(&self) -> &SymbolTable {
        self.fst.input_symbols()
    }

    pub fn output_symbols(&self) -> &SymbolTable {
        self.fst.output_symbols()
    }

    /// All verbalizations of a written token, as word sequences. Empty when
    /// the grammar does not accept the token.
    pub fn verbalize(&self, token: &str) -> Vec<Vec<String>> {
        let Some(acc) = char_acceptor(self.fst.input_symbols(), token) else {
            return Vec::new();
        };
        let composed = match compose(&acc, &self.fst) {
            Ok(c) => c.trim(),
            Err(_) => return Vec::new(),
        };
        // the trimmed composition is acyclic, so no path is longer than
        // its arc count
        let mut outs: Vec<Vec<String>> = enumerate_paths(&composed, composed.num_arcs())
            .into_iter()
            .map(|p| p.output_words(self.fst.output_symbols()))
            .collect();
        outs.sort();
        outs.dedup();
        outs
    }
}

/// Symbol-table context shared by the builder helpers.
struct Builder {
    chars: SymbolTable,
    words: SymbolTable,
}

impl Builder {
    fn new() -> Self {
        let mut chars = SymbolTable::new();
        for c in "0123456789-., ".chars() {
            chars.add(&c.to_string());
        }
        let mut words = SymbolTable::new();
        for w in UNITS.iter().chain(TENS.iter().filter(|t| !t.is_empty())) {
            words.add(w);
        }
        for w in ["hundred", "thousand", "million", "billion", "trillion", "minus", "point"] {
            words.add(w);
        }
        Builder { chars, words }
    }

    /// Single-path transducer from the characters of `input` to `output`.
    fn t(&self, input: &str, output: &[&str]) -> Automaton {
        let ilabels: Vec<usize> = input
            .chars()
            .map(|c| self.chars.get(&c.to_string()).expect("char in table"))
            .collect();
        let olabels: Vec<usize> = output
            .iter()
            .map(|w| self.words.get(w).expect("word in table"))
            .collect();
        Automaton::string_transducer(&self.chars, &self.words, &ilabels, &olabels)
    }
}

fn union_all(mut parts: Vec<Automaton>) -> Automaton {
    let mut acc = parts.pop().expect("non-empty union");
    while let Some(p) = parts.pop() {
        acc = Automaton::union(&acc, &p);
    }
    acc
}

/// Cardinal verbalizer: digit strings of length <= `max_digits` (optional
/// sign, optional space/comma group separators, leading zeros stripped) to
/// American English number names without "and".
pub fn build_cardinal_fst(max_digits: usize) -> NumberGrammar {
    assert!((1..=15).contains(&max_digits), "max_digits must be 1..=15");
    let b = Builder::new();

    let one_digit = union_all((1..=9).map(|d| b.t(&d.to_string(), &[UNITS[d]])).collect());
    let teens = union_all((0..=9).map(|d| b.t(&format!("1{d}"), &[UNITS[10 + d]])).collect());
    let tens_only = union_all((2..=9).map(|d| b.t(&format!("{d}0"), &[TENS[d]])).collect());
    let tens_units = union_all(
        (2..=9)
            .flat_map(|d| (1..=9).map(move |u| (d, u)))
            .map(|(d, u)| b.t(&format!("{d}{u}"), &[TENS[d], UNITS[u]]))
            .collect(),
    );
    let two_digit_nz = union_all(vec![teens, tens_only, tens_units]);
    // a 2-digit tail after hundreds: 00 silent, 0x as a unit, else 10..99
    let low_two = union_all((1..=9).map(|d| b.t(&format!("0{d}"), &[UNITS[d]])).collect());
    let tail2 = union_all(vec![b.t("00", &[]), low_two.clone(), two_digit_nz.clone()]);
    let hundreds = union_all(
        (1..=9)
            .map(|d| {
                Automaton::concat(&b.t(&d.to_string(), &[UNITS[d], "hundred"]), &tail2)
            })
            .collect(),
    );
    // 3 digits with leading zeros allowed, value nonzero
    let two_lz_nz = union_all(vec![low_two, two_digit_nz.clone()]);
    let three_lz_nz = union_all(vec![
        Automaton::concat(&b.t("0", &[]), &two_lz_nz),
        hundreds.clone(),
    ]);
    let suffix_group = |scale: Option<&str>| {
        let nonzero = match scale {
            Some(s) => Automaton::concat(&three_lz_nz, &b.t("", &[s])),
            None => three_lz_nz.clone(),
        };
        union_all(vec![b.t("000", &[]), nonzero])
    };
    let first_group = |len: usize| match len {
        1 => one_digit.clone(),
        2 => two_digit_nz.clone(),
        3 => hundreds.clone(),
        _ => unreachable!(),
    };
    let sep = Automaton::optional(&union_all(vec![b.t(" ", &[]), b.t(",", &[])]));

    let num_groups = max_digits.div_ceil(3);
    let mut branches = Vec::new();
    for g in 1..=num_groups {
        let max_first = (max_digits - 3 * (g - 1)).min(3);
        let first = union_all((1..=max_first).map(first_group).collect());
        let mut chain = if g > 1 {
            Automaton::concat(&first, &b.t("", &[SCALES[g - 1]]))
        } else {
            first
        };
        for j in (0..g - 1).rev() {
            let group = suffix_group(if j > 0 { Some(SCALES[j]) } else { None });
            chain = Automaton::concat(&chain, &Automaton::concat(&sep, &group));
        }
        branches.push(chain);
    }
    let body = union_all(branches);

    // stripped leading zeros, bounded to keep the grammar acyclic
    let mut zeros_prefix = Automaton::optional(&b.t("0", &[]));
    for _ in 1..max_digits.saturating_sub(1) {
        zeros_prefix = Automaton::concat(&zeros_prefix, &Automaton::optional(&b.t("0", &[])));
    }
    let unsigned = union_all(vec![
        Automaton::concat(&zeros_prefix, &body),
        Automaton::concat(&zeros_prefix, &b.t("0", &["zero"])),
    ]);
    let signed = Automaton::concat(&Automaton::optional(&b.t("-", &["minus"])), &unsigned);
    NumberGrammar {
        fst: signed.trim(),
    }
}

/// Decimal verbalizer: plain cardinals plus `<integer>.<digits>` with the
/// point read as "point" and fractional digits read one by one.
pub fn build_decimal_fst(cardinal: &NumberGrammar) -> NumberGrammar {
    let b = Builder::new();
    let digit = union_all((0..=9).map(|d| b.t(&d.to_string(), &[UNITS[d]])).collect());
    // 1..=MAX_FRACTION_DIGITS digits, unrolled
    let mut frac = digit.clone();
    for _ in 1..MAX_FRACTION_DIGITS {
        frac = Automaton::concat(&digit, &Automaton::optional(&frac));
    }
    let decimal = Automaton::concat(
        &cardinal.fst,
        &Automaton::concat(&b.t(".", &["point"]), &frac),
    );
    NumberGrammar {
        fst: Automaton::union(&cardinal.fst, &decimal).trim(),
    }
}

/// Extend a grammar's symbol tables in place (ids of existing symbols are
/// stable, so arcs stay valid). Used by the filter builders to bring unit
/// and currency symbols into scope before concatenation.
pub(super) fn extend_tables(
    grammar: &NumberGrammar,
    extra_chars: impl IntoIterator<Item = char>,
    extra_words: impl IntoIterator<Item = String>,
) -> Result<Automaton, GrammarError> {
    let mut chars = grammar.fst.input_symbols().clone();
    for c in extra_chars {
        chars.add(&c.to_string());
    }
    let mut words = grammar.fst.output_symbols().clone();
    for w in extra_words {
        if w.is_empty() {
            return Err(GrammarError::EmptyForm);
        }
        words.add(&w);
    }
    let mut fst = grammar.fst.clone();
    fst.replace_symbols(chars, words);
    Ok(fst)
}
