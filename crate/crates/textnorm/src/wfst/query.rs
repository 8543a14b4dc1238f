//! Prefix closure and incremental next-label cost queries against a lattice.

use std::collections::HashMap;

use super::{Automaton, Label, StateId, Weight, WfstError, EPSILON};

/// Default full-traversal reward.
pub const FINAL_REWARD: f64 = -1000.0;

/// Make every prefix of every accepted string acceptable: previously
/// non-final states exit at cost 0, originally final states exit at
/// `final_reward` (a strong negative reward for traversing the whole
/// lattice). Transitions are untouched. The input must be trimmed.
pub fn prefix_closure(a: &Automaton, final_reward: Weight) -> Automaton {
    let mut out = a.clone();
    for s in a.states() {
        if a.final_weight(s).is_some() {
            out.set_final(s, final_reward);
        } else {
            out.set_final(s, Weight::one());
        }
    }
    out
}

/// Exit cost per candidate next label, plus the exit cost of the queried
/// prefix itself. Labels not present map to +infinity.
#[derive(Debug, Clone)]
pub struct NextLabelCosts {
    costs: HashMap<Label, Weight>,
    exit: Weight,
}

impl NextLabelCosts {
    /// Exit cost of extending the prefix by `label`; +infinity when the
    /// extension is not accepted.
    pub fn cost(&self, label: Label) -> Weight {
        self.costs.get(&label).copied().unwrap_or_else(Weight::zero)
    }

    /// Exit cost of the prefix itself.
    pub fn exit(&self) -> Weight {
        self.exit
    }

    /// Labels with finite extension cost.
    pub fn finite(&self) -> impl Iterator<Item = (Label, Weight)> + '_ {
        self.costs.iter().map(|(&l, &w)| (l, w))
    }
}

/// Tracks the set of live lattice states (with accumulated cost) for a
/// growing prefix. One cursor per decode hypothesis; cursors are cheap to
/// clone.
#[derive(Debug, Clone)]
pub struct LatticeCursor {
    /// (state, min cost of reaching it on the current prefix), epsilon-closed
    live: Vec<(StateId, Weight)>,
}

impl LatticeCursor {
    /// Cursor positioned at the empty prefix.
    pub fn start(lattice: &Automaton) -> Result<Self, WfstError> {
        let start = lattice.start().ok_or(WfstError::NoStart)?;
        let live = eps_closure(lattice, vec![(start, Weight::one())]);
        Ok(LatticeCursor { live })
    }

    /// Advance by one non-epsilon label; `None` when the extended prefix is
    /// not accepted.
    pub fn advance(&self, lattice: &Automaton, label: Label) -> Option<Self> {
        let mut reached: HashMap<StateId, Weight> = HashMap::new();
        for &(s, c) in &self.live {
            for arc in lattice.arcs(s) {
                if arc.ilabel == label {
                    let cost = c.times(arc.weight);
                    let e = reached.entry(arc.next).or_insert_with(Weight::zero);
                    *e = e.plus(cost);
                }
            }
        }
        if reached.is_empty() {
            return None;
        }
        let live = eps_closure(lattice, reached.into_iter().collect());
        Some(LatticeCursor { live })
    }

    /// Minimum exit cost over live states: path cost so far plus that
    /// state's final weight.
    pub fn exit_cost(&self, lattice: &Automaton) -> Weight {
        self.live
            .iter()
            .map(|&(s, c)| c.times(lattice.final_weight(s).unwrap_or_else(Weight::zero)))
            .fold(Weight::zero(), Weight::plus)
    }

    /// Exit cost of every one-label extension of the current prefix.
    pub fn next_costs(&self, lattice: &Automaton) -> NextLabelCosts {
        let mut by_label: HashMap<Label, Vec<(StateId, Weight)>> = HashMap::new();
        for &(s, c) in &self.live {
            for arc in lattice.arcs(s) {
                if arc.ilabel != EPSILON {
                    by_label
                        .entry(arc.ilabel)
                        .or_default()
                        .push((arc.next, c.times(arc.weight)));
                }
            }
        }
        let mut costs = HashMap::new();
        for (label, reached) in by_label {
            let closed = eps_closure(lattice, reached);
            let exit = closed
                .iter()
                .map(|&(s, c)| c.times(lattice.final_weight(s).unwrap_or_else(Weight::zero)))
                .fold(Weight::zero(), Weight::plus);
            if !exit.is_zero() {
                costs.insert(label, exit);
            }
        }
        NextLabelCosts {
            costs,
            exit: self.exit_cost(lattice),
        }
    }
}

/// Min-cost epsilon closure by relaxation (epsilon weights in lattices are
/// nonnegative).
fn eps_closure(a: &Automaton, seed: Vec<(StateId, Weight)>) -> Vec<(StateId, Weight)> {
    let mut best: HashMap<StateId, Weight> = HashMap::new();
    let mut stack: Vec<StateId> = Vec::new();
    for (s, c) in seed {
        let e = best.entry(s).or_insert_with(Weight::zero);
        if c.value() < e.value() || e.is_zero() {
            *e = e.plus(c);
            stack.push(s);
        }
    }
    while let Some(s) = stack.pop() {
        let c = best[&s];
        for arc in a.arcs(s) {
            if arc.ilabel == EPSILON {
                let cand = c.times(arc.weight);
                let e = best.entry(arc.next).or_insert_with(Weight::zero);
                if cand.value() < e.value() {
                    *e = cand;
                    stack.push(arc.next);
                }
            }
        }
    }
    let mut out: Vec<(StateId, Weight)> = best.into_iter().collect();
    out.sort_by_key(|&(s, _)| s);
    out
}

/// Exit cost of every one-symbol extension of `prefix` in a prefix-closed
/// lattice. Errors when the prefix itself is not accepted (a caller bug:
/// decoders never extend dead prefixes).
pub fn next_label_costs(
    lattice: &Automaton,
    prefix: &[Label],
) -> Result<NextLabelCosts, WfstError> {
    let mut cursor = LatticeCursor::start(lattice)?;
    for &label in prefix {
        cursor = cursor
            .advance(lattice, label)
            .ok_or(WfstError::PrefixNotAccepted)?;
    }
    Ok(cursor.next_costs(lattice))
}
