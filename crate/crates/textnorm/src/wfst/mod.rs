//! Weighted finite-state acceptors and transducers over the tropical semiring.
//!
//! Everything in this crate that touches grammars, lattices, or filters goes
//! through [`Automaton`]. Weights are costs: plus is min, times is addition,
//! zero is +infinity and one is 0. Final states carry an exit weight, which
//! may be negative (used for full-traversal rewards in prefix-closed
//! lattices).

mod compose;
mod paths;
mod query;

pub use compose::compose;
pub use paths::{enumerate_paths, shortest_paths};
pub use query::{next_label_costs, prefix_closure, LatticeCursor, NextLabelCosts, FINAL_REWARD};

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use thiserror::Error;

/// Dense state identifier.
pub type StateId = usize;
/// Dense symbol identifier; 0 is epsilon, 1 is `<unk>`.
pub type Label = usize;

/// Reserved label for epsilon on either tape.
pub const EPSILON: Label = 0;
/// Reserved label for the unknown symbol.
pub const UNKNOWN: Label = 1;

#[derive(Debug, Error)]
pub enum WfstError {
    #[error("incompatible symbol tables between composed automata")]
    IncompatibleSymbols,
    #[error("prefix is not accepted by the lattice")]
    PrefixNotAccepted,
    #[error("automaton has no start state")]
    NoStart,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Tropical weight: a finite cost or +infinity.
#[derive(Clone, Copy, PartialEq, PartialOrd)]
pub struct Weight(f64);

impl Weight {
    pub fn new(value: f64) -> Self {
        Weight(value)
    }

    /// Additive identity: +infinity.
    pub fn zero() -> Self {
        Weight(f64::INFINITY)
    }

    /// Multiplicative identity: cost 0.
    pub fn one() -> Self {
        Weight(0.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0.is_infinite() && self.0 > 0.0
    }

    /// Tropical plus: min.
    pub fn plus(self, other: Weight) -> Weight {
        if self.0 <= other.0 {
            self
        } else {
            other
        }
    }

    /// Tropical times: addition, absorbing on +infinity.
    pub fn times(self, other: Weight) -> Weight {
        if self.is_zero() || other.is_zero() {
            Weight::zero()
        } else {
            Weight(self.0 + other.0)
        }
    }
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Bidirectional string <-> dense id mapping.
///
/// Id 0 is `<eps>` and id 1 is `<unk>` in every table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    syms: Vec<String>,
    ids: HashMap<String, Label>,
}

impl SymbolTable {
    pub fn new() -> Self {
        let mut t = SymbolTable {
            syms: Vec::new(),
            ids: HashMap::new(),
        };
        t.add("<eps>");
        t.add("<unk>");
        t
    }

    /// Insert a symbol if absent; returns its id either way.
    pub fn add(&mut self, sym: &str) -> Label {
        if let Some(&id) = self.ids.get(sym) {
            return id;
        }
        let id = self.syms.len();
        self.syms.push(sym.to_string());
        self.ids.insert(sym.to_string(), id);
        id
    }

    pub fn get(&self, sym: &str) -> Option<Label> {
        self.ids.get(sym).copied()
    }

    pub fn name(&self, id: Label) -> Option<&str> {
        self.syms.get(id).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always holds <eps> and <unk>
    }

    /// All real symbols (epsilon and unknown excluded).
    pub fn iter(&self) -> impl Iterator<Item = (Label, &str)> {
        self.syms
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, s)| (i, s.as_str()))
    }

    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (i, s) in self.syms.iter().enumerate() {
            writeln!(w, "{s}\t{i}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self, WfstError> {
        let mut syms = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| WfstError::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let sym = parts.next().unwrap_or("");
            let id: usize = parts
                .next()
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| WfstError::Parse {
                    line: lineno + 1,
                    msg: "expected `symbol<TAB>id`".into(),
                })?;
            if id != syms.len() {
                return Err(WfstError::Parse {
                    line: lineno + 1,
                    msg: format!("non-dense symbol id {id}"),
                });
            }
            syms.push(sym.to_string());
        }
        let ids = syms
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(SymbolTable { syms, ids })
    }
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

/// A single weighted transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: Weight,
    pub next: StateId,
}

/// Weighted acceptor/transducer. An acceptor has `ilabel == olabel` on every
/// arc.
#[derive(Debug, Clone)]
pub struct Automaton {
    start: Option<StateId>,
    arcs: Vec<Vec<Arc>>,
    finals: Vec<Option<Weight>>,
    isyms: SymbolTable,
    osyms: SymbolTable,
}

impl Automaton {
    pub fn new(isyms: SymbolTable, osyms: SymbolTable) -> Self {
        Automaton {
            start: None,
            arcs: Vec::new(),
            finals: Vec::new(),
            isyms,
            osyms,
        }
    }

    /// Acceptor constructor: one table shared by both tapes.
    pub fn acceptor(syms: SymbolTable) -> Self {
        let osyms = syms.clone();
        Self::new(syms, osyms)
    }

    pub fn add_state(&mut self) -> StateId {
        self.arcs.push(Vec::new());
        self.finals.push(None);
        self.arcs.len() - 1
    }

    pub fn add_arc(&mut self, state: StateId, arc: Arc) {
        debug_assert!(arc.next < self.arcs.len());
        self.arcs[state].push(arc);
    }

    pub fn set_start(&mut self, state: StateId) {
        self.start = Some(state);
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn set_final(&mut self, state: StateId, weight: Weight) {
        self.finals[state] = Some(weight);
    }

    pub fn clear_final(&mut self, state: StateId) {
        self.finals[state] = None;
    }

    pub fn final_weight(&self, state: StateId) -> Option<Weight> {
        self.finals[state]
    }

    pub fn num_states(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    pub fn arcs(&self, state: StateId) -> &[Arc] {
        &self.arcs[state]
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        0..self.arcs.len()
    }

    pub fn input_symbols(&self) -> &SymbolTable {
        &self.isyms
    }

    pub fn output_symbols(&self) -> &SymbolTable {
        &self.osyms
    }

    /// Swap in larger symbol tables. Every label in use must still be
    /// covered; extending a table never renumbers existing symbols.
    pub fn replace_symbols(&mut self, isyms: SymbolTable, osyms: SymbolTable) {
        debug_assert!(self
            .arcs
            .iter()
            .flatten()
            .all(|a| a.ilabel < isyms.len() && a.olabel < osyms.len()));
        self.isyms = isyms;
        self.osyms = osyms;
    }

    pub fn is_acceptor(&self) -> bool {
        self.arcs
            .iter()
            .flatten()
            .all(|a| a.ilabel == a.olabel)
    }

    /// True iff no path revisits a state (ignoring weights).
    pub fn is_acyclic(&self) -> bool {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; self.num_states()];
        let Some(start) = self.start else {
            return true;
        };
        let mut stack: Vec<(StateId, usize)> = vec![(start, 0)];
        mark[start] = 1;
        while let Some(&mut (s, ref mut idx)) = stack.last_mut() {
            if *idx < self.arcs[s].len() {
                let next = self.arcs[s][*idx].next;
                *idx += 1;
                match mark[next] {
                    0 => {
                        mark[next] = 1;
                        stack.push((next, 0));
                    }
                    1 => return false,
                    _ => {}
                }
            } else {
                mark[s] = 2;
                stack.pop();
            }
        }
        true
    }

    /// Single-string acceptor at cost 0. Empty input accepts only the empty
    /// string.
    pub fn string_acceptor(syms: &SymbolTable, labels: &[Label]) -> Self {
        let mut a = Automaton::acceptor(syms.clone());
        let mut state = a.add_state();
        a.set_start(state);
        for &l in labels {
            let next = a.add_state();
            a.add_arc(
                state,
                Arc {
                    ilabel: l,
                    olabel: l,
                    weight: Weight::one(),
                    next,
                },
            );
            state = next;
        }
        a.set_final(state, Weight::one());
        a
    }

    /// Single-path transducer from an input string to an output string,
    /// epsilon-padding the shorter side.
    pub fn string_transducer(
        isyms: &SymbolTable,
        osyms: &SymbolTable,
        input: &[Label],
        output: &[Label],
    ) -> Self {
        let mut t = Automaton::new(isyms.clone(), osyms.clone());
        let mut state = t.add_state();
        t.set_start(state);
        let n = input.len().max(output.len());
        for i in 0..n {
            let next = t.add_state();
            t.add_arc(
                state,
                Arc {
                    ilabel: input.get(i).copied().unwrap_or(EPSILON),
                    olabel: output.get(i).copied().unwrap_or(EPSILON),
                    weight: Weight::one(),
                    next,
                },
            );
            state = next;
        }
        t.set_final(state, Weight::one());
        t
    }

    /// Union: accepts the union of both relations via a fresh start state.
    pub fn union(a: &Automaton, b: &Automaton) -> Automaton {
        let mut u = Automaton::new(a.isyms.clone(), a.osyms.clone());
        let start = u.add_state();
        u.set_start(start);
        let off_a = u.graft(a);
        let off_b = u.graft(b);
        for (orig, off) in [(a, off_a), (b, off_b)] {
            if let Some(s) = orig.start {
                u.add_arc(
                    start,
                    Arc {
                        ilabel: EPSILON,
                        olabel: EPSILON,
                        weight: Weight::one(),
                        next: s + off,
                    },
                );
            }
        }
        u
    }

    /// Concatenation: every final of `a` connects by a free epsilon arc to
    /// the start of `b`, carrying the final weight.
    pub fn concat(a: &Automaton, b: &Automaton) -> Automaton {
        let mut c = Automaton::new(a.isyms.clone(), b.osyms.clone());
        let off_a = c.graft(a);
        let off_b = c.graft(b);
        if let Some(s) = a.start {
            c.set_start(s + off_a);
        }
        for s in a.states() {
            if let Some(w) = a.final_weight(s) {
                c.clear_final(s + off_a);
                if let Some(bs) = b.start {
                    c.add_arc(
                        s + off_a,
                        Arc {
                            ilabel: EPSILON,
                            olabel: EPSILON,
                            weight: w,
                            next: bs + off_b,
                        },
                    );
                }
            }
        }
        c
    }

    /// Union with the empty-string acceptor: zero-or-one occurrence.
    pub fn optional(a: &Automaton) -> Automaton {
        let mut u = a.clone();
        let start = u.add_state();
        if let Some(old) = u.start {
            u.add_arc(
                start,
                Arc {
                    ilabel: EPSILON,
                    olabel: EPSILON,
                    weight: Weight::one(),
                    next: old,
                },
            );
        }
        u.set_final(start, Weight::one());
        u.set_start(start);
        u
    }

    /// Copy `other`'s states and arcs into self; returns the state offset.
    fn graft(&mut self, other: &Automaton) -> usize {
        let off = self.arcs.len();
        for s in other.states() {
            self.add_state();
            self.finals[off + s] = other.finals[s];
        }
        for s in other.states() {
            for a in other.arcs(s) {
                self.arcs[off + s].push(Arc {
                    next: a.next + off,
                    ..*a
                });
            }
        }
        off
    }

    /// Remove states that are not both accessible and coaccessible.
    pub fn trim(&self) -> Automaton {
        let n = self.num_states();
        let mut accessible = vec![false; n];
        if let Some(start) = self.start {
            let mut stack = vec![start];
            accessible[start] = true;
            while let Some(s) = stack.pop() {
                for a in self.arcs(s) {
                    if !accessible[a.next] {
                        accessible[a.next] = true;
                        stack.push(a.next);
                    }
                }
            }
        }
        // reverse reachability from final states
        let mut rev: Vec<Vec<StateId>> = vec![Vec::new(); n];
        for s in self.states() {
            for a in self.arcs(s) {
                rev[a.next].push(s);
            }
        }
        let mut coaccessible = vec![false; n];
        let mut stack: Vec<StateId> = self
            .states()
            .filter(|&s| self.finals[s].is_some())
            .collect();
        for &s in &stack {
            coaccessible[s] = true;
        }
        while let Some(s) = stack.pop() {
            for &p in &rev[s] {
                if !coaccessible[p] {
                    coaccessible[p] = true;
                    stack.push(p);
                }
            }
        }
        let mut map = vec![usize::MAX; n];
        let mut out = Automaton::new(self.isyms.clone(), self.osyms.clone());
        for s in self.states() {
            if accessible[s] && coaccessible[s] {
                map[s] = out.add_state();
                if let Some(w) = self.finals[s] {
                    out.set_final(map[s], w);
                }
            }
        }
        for s in self.states() {
            if map[s] == usize::MAX {
                continue;
            }
            for a in self.arcs(s) {
                if map[a.next] != usize::MAX {
                    out.add_arc(map[s], Arc {
                        next: map[a.next],
                        ..*a
                    });
                }
            }
        }
        if let Some(start) = self.start {
            if map[start] != usize::MAX {
                out.set_start(map[start]);
            }
        }
        out
    }

    /// Acceptor over the output language: ilabels replaced by olabels,
    /// weights unchanged.
    pub fn project_output(&self) -> Automaton {
        let mut out = self.clone();
        out.isyms = self.osyms.clone();
        for arcs in &mut out.arcs {
            for a in arcs {
                a.ilabel = a.olabel;
            }
        }
        out
    }

    /// Text serialization: `src<TAB>dst<TAB>ilabel<TAB>olabel<TAB>weight`
    /// per arc, `state<TAB>weight` per final state; arcs of the start state
    /// come first.
    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let start = match self.start {
            Some(s) => s,
            None => return Ok(()),
        };
        let order: Vec<StateId> = std::iter::once(start)
            .chain(self.states().filter(|&s| s != start))
            .collect();
        for s in order {
            for a in self.arcs(s) {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}\t{}",
                    s,
                    a.next,
                    a.ilabel,
                    a.olabel,
                    a.weight.value()
                )?;
            }
            if let Some(fw) = self.finals[s] {
                writeln!(w, "{}\t{}", s, fw.value())?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(
        r: R,
        isyms: SymbolTable,
        osyms: SymbolTable,
    ) -> Result<Automaton, WfstError> {
        let mut a = Automaton::new(isyms, osyms);
        let mut seen_start = false;
        let ensure = |a: &mut Automaton, s: usize| {
            while a.num_states() <= s {
                a.add_state();
            }
        };
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| WfstError::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let err = |msg: &str| WfstError::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            match cols.len() {
                2 => {
                    let s: usize = cols[0].parse().map_err(|_| err("bad state id"))?;
                    let w: f64 = cols[1].parse().map_err(|_| err("bad weight"))?;
                    ensure(&mut a, s);
                    a.set_final(s, Weight::new(w));
                    if !seen_start {
                        a.set_start(s);
                        seen_start = true;
                    }
                }
                5 => {
                    let s: usize = cols[0].parse().map_err(|_| err("bad state id"))?;
                    let d: usize = cols[1].parse().map_err(|_| err("bad state id"))?;
                    let il: usize = cols[2].parse().map_err(|_| err("bad label"))?;
                    let ol: usize = cols[3].parse().map_err(|_| err("bad label"))?;
                    let w: f64 = cols[4].parse().map_err(|_| err("bad weight"))?;
                    ensure(&mut a, s.max(d));
                    a.add_arc(
                        s,
                        Arc {
                            ilabel: il,
                            olabel: ol,
                            weight: Weight::new(w),
                            next: d,
                        },
                    );
                    if !seen_start {
                        a.set_start(s);
                        seen_start = true;
                    }
                }
                _ => return Err(err("expected 2 or 5 tab-separated columns")),
            }
        }
        Ok(a)
    }
}

/// An accepting path with epsilons removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub ilabels: Vec<Label>,
    pub olabels: Vec<Label>,
    pub cost: Weight,
}

impl Path {
    /// Resolve olabels against a symbol table.
    pub fn output_words(&self, syms: &SymbolTable) -> Vec<String> {
        self.olabels
            .iter()
            .filter_map(|&l| syms.name(l).map(str::to_string))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(v: f64) -> Weight {
        Weight::new(v)
    }

    #[test]
    fn weight_identities() {
        let x = w(3.5);
        assert_eq!(x.times(Weight::zero()), Weight::zero());
        assert_eq!(x.plus(Weight::zero()), x);
        assert_eq!(x.times(Weight::one()), x);
        assert_eq!(w(2.0).plus(w(5.0)), w(2.0));
        assert_eq!(w(2.0).times(w(5.0)), w(7.0));
    }

    proptest! {
        #[test]
        fn semiring_axioms(a in -200i32..200, b in -200i32..200, c in -200i32..200) {
            // quarter-integer weights keep float addition exact, so the
            // axioms hold bit for bit
            let (a, b, c) = (w(a as f64 / 4.0), w(b as f64 / 4.0), w(c as f64 / 4.0));
            // plus: commutative, associative, identity
            prop_assert_eq!(a.plus(b), b.plus(a));
            prop_assert_eq!(a.plus(b).plus(c), a.plus(b.plus(c)));
            prop_assert_eq!(a.plus(Weight::zero()), a);
            // times: associative, identity, annihilator
            prop_assert_eq!(a.times(b).times(c), a.times(b.times(c)));
            prop_assert_eq!(a.times(Weight::one()), a);
            prop_assert_eq!(a.times(Weight::zero()), Weight::zero());
            // distributivity
            prop_assert_eq!(a.times(b.plus(c)), a.times(b).plus(a.times(c)));
        }
    }

    #[test]
    fn symbol_table_roundtrip() {
        let mut t = SymbolTable::new();
        let a = t.add("five");
        let b = t.add("pounds");
        assert_eq!(t.add("five"), a);
        assert_eq!(t.get("pounds"), Some(b));
        assert_eq!(t.name(a), Some("five"));
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let t2 = SymbolTable::read(&buf[..]).unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn string_acceptor_empty_accepts_empty() {
        let syms = SymbolTable::new();
        let a = Automaton::string_acceptor(&syms, &[]);
        let paths = enumerate_paths(&a, 10);
        assert_eq!(paths.len(), 1);
        assert!(paths[0].ilabels.is_empty());
        assert_eq!(paths[0].cost, Weight::one());
    }

    #[test]
    fn union_of_disjoint_paths() {
        let mut syms = SymbolTable::new();
        let five = syms.add("five");
        let six = syms.add("six");
        let a = Automaton::string_acceptor(&syms, &[five]);
        let b = Automaton::string_acceptor(&syms, &[six]);
        let u = Automaton::union(&a, &b);
        let mut labels: Vec<Vec<Label>> =
            enumerate_paths(&u, 10).into_iter().map(|p| p.ilabels).collect();
        labels.sort();
        assert_eq!(labels, vec![vec![five], vec![six]]);
    }

    #[test]
    fn concat_accepts_concatenation() {
        let mut syms = SymbolTable::new();
        let five = syms.add("five");
        let pounds = syms.add("pounds");
        let a = Automaton::string_acceptor(&syms, &[five]);
        let b = Automaton::string_acceptor(&syms, &[pounds]);
        let c = Automaton::concat(&a, &b);
        let paths = enumerate_paths(&c, 10);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].ilabels, vec![five, pounds]);
    }

    #[test]
    fn trim_removes_dead_states() {
        let mut syms = SymbolTable::new();
        let x = syms.add("x");
        let mut a = Automaton::acceptor(syms);
        let s0 = a.add_state();
        let s1 = a.add_state();
        let dead = a.add_state(); // accessible, not coaccessible
        a.set_start(s0);
        a.add_arc(s0, Arc { ilabel: x, olabel: x, weight: Weight::one(), next: s1 });
        a.add_arc(s0, Arc { ilabel: x, olabel: x, weight: Weight::one(), next: dead });
        a.set_final(s1, Weight::one());
        let t = a.trim();
        assert_eq!(t.num_states(), 2);
        assert_eq!(enumerate_paths(&t, 5).len(), 1);
    }

    #[test]
    fn automaton_text_roundtrip() {
        let mut syms = SymbolTable::new();
        let x = syms.add("x");
        let y = syms.add("y");
        let mut a = Automaton::acceptor(syms.clone());
        let s0 = a.add_state();
        let s1 = a.add_state();
        a.set_start(s0);
        a.add_arc(s0, Arc { ilabel: x, olabel: x, weight: w(1.5), next: s1 });
        a.add_arc(s1, Arc { ilabel: y, olabel: y, weight: w(0.25), next: s0 });
        a.set_final(s1, w(-1000.0));
        let mut buf = Vec::new();
        a.write_text(&mut buf).unwrap();
        let b = Automaton::read_text(&buf[..], syms.clone(), syms).unwrap();
        assert_eq!(b.start(), Some(s0));
        assert_eq!(b.num_states(), 2);
        assert_eq!(b.final_weight(s1), Some(w(-1000.0)));
        assert_eq!(b.arcs(s0), a.arcs(s0));
    }
}
