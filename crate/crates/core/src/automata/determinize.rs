use std::collections::{BTreeSet, HashMap};

use super::{Dfa, Nfa, StateId};

/// Subset construction. Only subsets reachable from `{initial}` are built, and
/// the empty subset is left implicit as `∅`.
pub fn determinize(nfa: &Nfa) -> Dfa {
    let width = nfa.alphabet().len();
    let start: BTreeSet<StateId> = BTreeSet::from([nfa.initial()]);
    let mut index: HashMap<BTreeSet<StateId>, StateId> = HashMap::from([(start.clone(), 0)]);
    let mut subsets = vec![start];
    let mut edges: Vec<Vec<Option<StateId>>> = Vec::new();

    let mut head = 0;
    while head < subsets.len() {
        let mut row = vec![None; width];
        for (t, slot) in row.iter_mut().enumerate() {
            let next: BTreeSet<StateId> = subsets[head]
                .iter()
                .flat_map(|&q| nfa.successors(q, t).iter().copied())
                .collect();
            if next.is_empty() {
                continue;
            }
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = subsets.len();
                    index.insert(next.clone(), id);
                    subsets.push(next);
                    id
                }
            };
            *slot = Some(id);
        }
        edges.push(row);
        head += 1;
    }

    let mut dfa = Dfa::new(nfa.alphabet().clone(), subsets.len(), 0).expect("nonempty");
    for (id, subset) in subsets.iter().enumerate() {
        let accepting = subset.iter().any(|&q| nfa.is_accepting(q));
        dfa.set_accepting(id, accepting).expect("in range");
        for (t, d) in edges[id].iter().enumerate() {
            if let Some(d) = d {
                dfa.set_transition_index(id, t, *d).expect("in range");
            }
        }
    }
    dfa
}
