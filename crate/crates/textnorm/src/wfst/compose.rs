//! Composition with an epsilon-sequencing filter.

use std::collections::HashMap;

use super::{Arc, Automaton, StateId, WfstError, EPSILON};

/// Filter state for epsilon handling: 0 = free, 1 = only left-side epsilons
/// may continue, 2 = only right-side epsilons may continue.
type FilterState = u8;

/// Compose two transducers: accepts {(x, z) : exists y with (x,y) in a and
/// (y,z) in b}, path costs the tropical product of the component costs.
///
/// Epsilon moves are sequenced so that no pair is lost: matched epsilons stay
/// in filter state 0, one-sided moves commit to that side until the next real
/// match. Redundant interleavings collapse under min so the filter choice is
/// not observable.
pub fn compose(a: &Automaton, b: &Automaton) -> Result<Automaton, WfstError> {
    if a.output_symbols() != b.input_symbols() {
        return Err(WfstError::IncompatibleSymbols);
    }
    let mut out = Automaton::new(a.input_symbols().clone(), b.output_symbols().clone());
    let (sa, sb) = match (a.start(), b.start()) {
        (Some(sa), Some(sb)) => (sa, sb),
        _ => return Ok(out),
    };

    type Key = (StateId, StateId, FilterState);
    let mut ids: HashMap<Key, StateId> = HashMap::new();
    let mut queue: Vec<Key> = Vec::new();
    fn intern(
        ids: &mut HashMap<Key, StateId>,
        queue: &mut Vec<Key>,
        out: &mut Automaton,
        key: Key,
    ) -> StateId {
        *ids.entry(key).or_insert_with(|| {
            queue.push(key);
            out.add_state()
        })
    }

    let start = intern(&mut ids, &mut queue, &mut out, (sa, sb, 0));
    out.set_start(start);

    while let Some((qa, qb, f)) = queue.pop() {
        let here = ids[&(qa, qb, f)];
        if let (Some(wa), Some(wb)) = (a.final_weight(qa), b.final_weight(qb)) {
            out.set_final(here, wa.times(wb));
        }
        for arc_a in a.arcs(qa) {
            if arc_a.olabel == EPSILON {
                // left side moves alone
                if f != 2 {
                    let next = intern(&mut ids, &mut queue, &mut out, (arc_a.next, qb, 1));
                    out.add_arc(
                        here,
                        Arc {
                            ilabel: arc_a.ilabel,
                            olabel: EPSILON,
                            weight: arc_a.weight,
                            next,
                        },
                    );
                }
                // paired epsilon move, only from the free state
                if f == 0 {
                    for arc_b in b.arcs(qb) {
                        if arc_b.ilabel == EPSILON {
                            let next =
                                intern(&mut ids, &mut queue, &mut out, (arc_a.next, arc_b.next, 0));
                            out.add_arc(
                                here,
                                Arc {
                                    ilabel: arc_a.ilabel,
                                    olabel: arc_b.olabel,
                                    weight: arc_a.weight.times(arc_b.weight),
                                    next,
                                },
                            );
                        }
                    }
                }
            } else {
                for arc_b in b.arcs(qb) {
                    if arc_b.ilabel == arc_a.olabel {
                        let next = intern(&mut ids, &mut queue, &mut out, (arc_a.next, arc_b.next, 0));
                        out.add_arc(
                            here,
                            Arc {
                                ilabel: arc_a.ilabel,
                                olabel: arc_b.olabel,
                                weight: arc_a.weight.times(arc_b.weight),
                                next,
                            },
                        );
                    }
                }
            }
        }
        // right side moves alone
        if f != 1 {
            for arc_b in b.arcs(qb) {
                if arc_b.ilabel == EPSILON {
                    let next = intern(&mut ids, &mut queue, &mut out, (qa, arc_b.next, 2));
                    out.add_arc(
                        here,
                        Arc {
                            ilabel: EPSILON,
                            olabel: arc_b.olabel,
                            weight: arc_b.weight,
                            next,
                        },
                    );
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{enumerate_paths, SymbolTable, Weight};
    use super::*;

    #[test]
    fn composes_money_pair() {
        let mut chars = SymbolTable::new();
        let c5 = chars.add("5");
        let pound_sym = chars.add("\u{a3}");
        let mut words = SymbolTable::new();
        let five = words.add("five");
        let pounds = words.add("pounds");
        let t = Automaton::string_transducer(&chars, &words, &[c5, pound_sym], &[five, pounds]);
        let acc = Automaton::string_acceptor(&words, &[five, pounds]);
        let c = compose(&t, &acc).unwrap();
        let paths = enumerate_paths(&c, 10);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].ilabels, vec![c5, pound_sym]);
        assert_eq!(paths[0].olabels, vec![five, pounds]);
        assert_eq!(paths[0].cost, Weight::one());
    }

    #[test]
    fn incompatible_tables_rejected() {
        let mut t1 = SymbolTable::new();
        t1.add("a");
        let mut t2 = SymbolTable::new();
        t2.add("b");
        let a = Automaton::acceptor(t1);
        let b = Automaton::acceptor(t2);
        assert!(matches!(
            compose(&a, &b),
            Err(WfstError::IncompatibleSymbols)
        ));
    }

    #[test]
    fn identity_composition_preserves_relation() {
        let mut chars = SymbolTable::new();
        let x = chars.add("x");
        let mut words = SymbolTable::new();
        let y = words.add("y");
        let z = words.add("z");
        let t = Automaton::union(
            &Automaton::string_transducer(&chars, &words, &[x], &[y]),
            &Automaton::string_transducer(&chars, &words, &[x], &[z, z]),
        );
        // identity acceptor over t's whole output language
        let ident = Automaton::union(
            &Automaton::string_acceptor(&words, &[y]),
            &Automaton::string_acceptor(&words, &[z, z]),
        );
        let c = compose(&t, &ident).unwrap();
        let mut orig: Vec<(Vec<usize>, Vec<usize>)> = enumerate_paths(&t, 10)
            .into_iter()
            .map(|p| (p.ilabels, p.olabels))
            .collect();
        let mut composed: Vec<(Vec<usize>, Vec<usize>)> = enumerate_paths(&c, 10)
            .into_iter()
            .map(|p| (p.ilabels, p.olabels))
            .collect();
        orig.sort();
        orig.dedup();
        composed.sort();
        composed.dedup();
        assert_eq!(orig, composed);
    }
}
