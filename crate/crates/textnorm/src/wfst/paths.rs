//! Path enumeration and n-best search.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Automaton, Path, StateId, Weight, EPSILON};

/// Exhaustively enumerate accepting paths traversing at most `max_arcs`
/// arcs. Test oracle and small-grammar utility; exponential in the worst
/// case.
pub fn enumerate_paths(a: &Automaton, max_arcs: usize) -> Vec<Path> {
    let mut out = Vec::new();
    let Some(start) = a.start() else {
        return out;
    };
    let mut ilabels = Vec::new();
    let mut olabels = Vec::new();
    dfs(a, start, max_arcs, Weight::one(), &mut ilabels, &mut olabels, &mut out);
    out
}

fn dfs(
    a: &Automaton,
    state: StateId,
    budget: usize,
    cost: Weight,
    ilabels: &mut Vec<usize>,
    olabels: &mut Vec<usize>,
    out: &mut Vec<Path>,
) {
    if let Some(fw) = a.final_weight(state) {
        out.push(Path {
            ilabels: ilabels.clone(),
            olabels: olabels.clone(),
            cost: cost.times(fw),
        });
    }
    if budget == 0 {
        return;
    }
    for arc in a.arcs(state) {
        let pushed_i = arc.ilabel != EPSILON;
        let pushed_o = arc.olabel != EPSILON;
        if pushed_i {
            ilabels.push(arc.ilabel);
        }
        if pushed_o {
            olabels.push(arc.olabel);
        }
        dfs(a, arc.next, budget - 1, cost.times(arc.weight), ilabels, olabels, out);
        if pushed_i {
            ilabels.pop();
        }
        if pushed_o {
            olabels.pop();
        }
    }
}

/// Heap entry ordered by (priority, olabel words); BinaryHeap is a max-heap
/// so Ord is reversed.
struct Item {
    priority: f64,
    key: Vec<String>,
    state: Option<StateId>, // None once the exit weight has been collected
    cost: Weight,
    ilabels: Vec<usize>,
    olabels: Vec<usize>,
}

impl PartialEq for Item {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.key.cmp(&self.key))
    }
}

/// `n` minimum-cost accepting paths in nondecreasing cost order, ties broken
/// by lexicographic output-word order.
///
/// Requires no negative-cost cycles. Negative *final* weights (prefix-closure
/// rewards) are fine: the search is guided by an exact cost-to-exit
/// potential computed by relaxation.
pub fn shortest_paths(a: &Automaton, n: usize) -> Vec<Path> {
    let mut out = Vec::new();
    let Some(start) = a.start() else {
        return out;
    };
    if n == 0 {
        return out;
    }
    let phi = exit_potential(a);
    if phi[start].is_zero() {
        return out; // no accepting path at all
    }

    let mut heap = BinaryHeap::new();
    heap.push(Item {
        priority: phi[start].value(),
        key: Vec::new(),
        state: Some(start),
        cost: Weight::one(),
        ilabels: Vec::new(),
        olabels: Vec::new(),
    });
    // pop cap guards against pathological inputs with huge tie plateaus
    let cap = 1_000_000usize;
    let mut pops = 0usize;
    while let Some(item) = heap.pop() {
        pops += 1;
        if pops > cap {
            break;
        }
        let state = match item.state {
            None => {
                out.push(Path {
                    ilabels: item.ilabels,
                    olabels: item.olabels,
                    cost: item.cost,
                });
                if out.len() >= n {
                    break;
                }
                continue;
            }
            Some(s) => s,
        };
        if let Some(fw) = a.final_weight(state) {
            let cost = item.cost.times(fw);
            heap.push(Item {
                priority: cost.value(),
                key: item.key.clone(),
                state: None,
                cost,
                ilabels: item.ilabels.clone(),
                olabels: item.olabels.clone(),
            });
        }
        for arc in a.arcs(state) {
            if phi[arc.next].is_zero() {
                continue;
            }
            let cost = item.cost.times(arc.weight);
            let mut ilabels = item.ilabels.clone();
            let mut olabels = item.olabels.clone();
            let mut key = item.key.clone();
            if arc.ilabel != EPSILON {
                ilabels.push(arc.ilabel);
            }
            if arc.olabel != EPSILON {
                olabels.push(arc.olabel);
                key.push(
                    a.output_symbols()
                        .name(arc.olabel)
                        .unwrap_or("")
                        .to_string(),
                );
            }
            heap.push(Item {
                priority: cost.times(phi[arc.next]).value(),
                key,
                state: Some(arc.next),
                cost,
                ilabels,
                olabels,
            });
        }
    }
    out
}

/// Minimum cost from each state to an accepting exit, including the final
/// weight. Bellman-Ford style relaxation; handles negative final weights.
fn exit_potential(a: &Automaton) -> Vec<Weight> {
    let n = a.num_states();
    let mut phi: Vec<Weight> = (0..n)
        .map(|s| a.final_weight(s).unwrap_or_else(Weight::zero))
        .collect();
    for _ in 0..n {
        let mut changed = false;
        for s in 0..n {
            for arc in a.arcs(s) {
                let cand = arc.weight.times(phi[arc.next]);
                if cand.value() < phi[s].value() {
                    phi[s] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    phi
}

#[cfg(test)]
mod tests {
    use super::super::{Arc, SymbolTable};
    use super::*;

    #[test]
    fn single_path_automaton_n3() {
        let mut syms = SymbolTable::new();
        let x = syms.add("x");
        let a = Automaton::string_acceptor(&syms, &[x, x]);
        let paths = shortest_paths(&a, 3);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].ilabels, vec![x, x]);
    }

    #[test]
    fn n_zero_and_empty_language() {
        let syms = SymbolTable::new();
        let a = Automaton::string_acceptor(&syms, &[]);
        assert!(shortest_paths(&a, 0).is_empty());
        let mut empty = Automaton::acceptor(SymbolTable::new());
        let s = empty.add_state();
        empty.set_start(s); // no final state
        assert!(shortest_paths(&empty, 3).is_empty());
    }

    #[test]
    fn costs_nondecreasing_and_match_recomputation() {
        let mut syms = SymbolTable::new();
        let labels: Vec<usize> = ["a", "b", "c"].iter().map(|s| syms.add(s)).collect();
        let mut a = Automaton::acceptor(syms);
        let s0 = a.add_state();
        let s1 = a.add_state();
        a.set_start(s0);
        for (i, &l) in labels.iter().enumerate() {
            a.add_arc(
                s0,
                Arc {
                    ilabel: l,
                    olabel: l,
                    weight: Weight::new(i as f64 * 0.5),
                    next: s1,
                },
            );
        }
        a.set_final(s1, Weight::new(1.0));
        let paths = shortest_paths(&a, 3);
        assert_eq!(paths.len(), 3);
        for pair in paths.windows(2) {
            assert!(pair[0].cost.value() <= pair[1].cost.value());
        }
        assert_eq!(paths[0].cost, Weight::new(1.0));
        assert_eq!(paths[2].cost, Weight::new(2.0));
    }

    #[test]
    fn negative_final_reward_ordering() {
        // two-arc path exits at -1000, one-arc prefix exits at 0: the full
        // path must come back first
        let mut syms = SymbolTable::new();
        let x = syms.add("x");
        let mut a = Automaton::acceptor(syms);
        let s0 = a.add_state();
        let s1 = a.add_state();
        let s2 = a.add_state();
        a.set_start(s0);
        a.add_arc(s0, Arc { ilabel: x, olabel: x, weight: Weight::one(), next: s1 });
        a.add_arc(s1, Arc { ilabel: x, olabel: x, weight: Weight::one(), next: s2 });
        a.set_final(s1, Weight::new(0.0));
        a.set_final(s2, Weight::new(-1000.0));
        let paths = shortest_paths(&a, 2);
        assert_eq!(paths[0].cost, Weight::new(-1000.0));
        assert_eq!(paths[0].ilabels.len(), 2);
        assert_eq!(paths[1].cost, Weight::new(0.0));
    }
}
