use std::collections::HashMap;

use super::{Dfa, StateId};
use crate::error::Result;

/// Shortest string on which `a` and `b` disagree, or `None` if `L(a) = L(b)`.
///
/// Breadth-first search over the product automaton, with `∅` on either side
/// represented as `None`.
pub fn distinguishing_string(a: &Dfa, b: &Dfa) -> Result<Option<String>> {
    a.alphabet().ensure_same(b.alphabet())?;
    type Pair = (Option<StateId>, Option<StateId>);
    let accepts = |d: &Dfa, q: Option<StateId>| q.is_some_and(|q| d.is_accepting(q));
    let width = a.alphabet().len();

    let start: Pair = (Some(a.initial()), Some(b.initial()));
    let mut parent: HashMap<Pair, Option<(Pair, usize)>> = HashMap::from([(start, None)]);
    let mut queue = vec![start];
    let mut head = 0;
    while head < queue.len() {
        let pair = queue[head];
        head += 1;
        if accepts(a, pair.0) != accepts(b, pair.1) {
            let mut tokens = Vec::new();
            let mut cur = pair;
            while let Some((prev, t)) = parent[&cur] {
                tokens.push(t);
                cur = prev;
            }
            tokens.reverse();
            return Ok(Some(a.alphabet().decode(&tokens)));
        }
        for t in 0..width {
            let next = (
                pair.0.and_then(|q| a.next(q, t)),
                pair.1.and_then(|q| b.next(q, t)),
            );
            if next == (None, None) || parent.contains_key(&next) {
                continue;
            }
            parent.insert(next, Some((pair, t)));
            queue.push(next);
        }
    }
    Ok(None)
}

/// Language equality.
pub fn equivalent(a: &Dfa, b: &Dfa) -> Result<bool> {
    Ok(distinguishing_string(a, b)?.is_none())
}
