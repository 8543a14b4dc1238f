//! Independent recursive number verbalizer.
//!
//! This is the reference implementation the FST grammars are checked
//! against. It shares no code with the automaton path: plain recursion over
//! the decimal expansion, American English style without "and".

const UNITS: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen",
];

const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];

const SCALES: [&str; 5] = ["", "thousand", "million", "billion", "trillion"];

/// Words for a nonnegative integer below one quadrillion.
pub fn cardinal_words(n: u64) -> Vec<String> {
    assert!(n < 1_000_000_000_000_000, "cardinal oracle caps at 10^15");
    if n == 0 {
        return vec!["zero".to_string()];
    }
    let mut groups = Vec::new();
    let mut rest = n;
    while rest > 0 {
        groups.push((rest % 1000) as usize);
        rest /= 1000;
    }
    let mut words = Vec::new();
    for (i, &g) in groups.iter().enumerate().rev() {
        if g == 0 {
            continue;
        }
        group_words(g, &mut words);
        if i > 0 {
            words.push(SCALES[i].to_string());
        }
    }
    words
}

fn group_words(g: usize, out: &mut Vec<String>) {
    debug_assert!(g > 0 && g < 1000);
    if g >= 100 {
        out.push(UNITS[g / 100].to_string());
        out.push("hundred".to_string());
    }
    let rem = g % 100;
    if rem == 0 {
        return;
    }
    if rem < 20 {
        out.push(UNITS[rem].to_string());
    } else {
        out.push(TENS[rem / 10].to_string());
        if rem % 10 != 0 {
            out.push(UNITS[rem % 10].to_string());
        }
    }
}

/// Verbalize a written number token: optional `-`, group separators (space
/// or comma), optional decimal point with digit-by-digit fraction. `None`
/// when the token is not a well-formed number.
pub fn number_words(token: &str) -> Option<Vec<String>> {
    let mut words = Vec::new();
    let token = match token.strip_prefix('-') {
        Some(rest) => {
            words.push("minus".to_string());
            rest
        }
        None => token,
    };
    let (int_part, frac_part) = match token.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (token, None),
    };
    let digits: String = int_part.chars().filter(|c| *c != ' ' && *c != ',').collect();
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let n: u64 = digits.parse().ok()?;
    if n >= 1_000_000_000_000_000 {
        return None;
    }
    words.extend(cardinal_words(n));
    if let Some(frac) = frac_part {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        words.push("point".to_string());
        for c in frac.chars() {
            words.push(UNITS[c.to_digit(10).unwrap() as usize].to_string());
        }
    }
    Some(words)
}
