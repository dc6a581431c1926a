use std::collections::HashMap;

use super::{Dfa, StateId};

/// Completed transition table with an explicit sink at index `n`.
struct Complete {
    width: usize,
    accepting: Vec<bool>,
    delta: Vec<Vec<StateId>>,
    sink: StateId,
}

fn complete(dfa: &Dfa) -> Complete {
    let n = dfa.num_states();
    let width = dfa.alphabet().len();
    let sink = n;
    let mut delta = Vec::with_capacity(n + 1);
    let mut accepting = Vec::with_capacity(n + 1);
    for q in 0..n {
        delta.push((0..width).map(|t| dfa.next(q, t).unwrap_or(sink)).collect());
        accepting.push(dfa.is_accepting(q));
    }
    delta.push(vec![sink; width]);
    accepting.push(false);
    Complete {
        width,
        accepting,
        delta,
        sink,
    }
}

/// Builds the quotient of `table` under `block_of`, dropping the sink's block
/// and numbering the surviving blocks in BFS order from the initial block.
fn quotient(dfa: &Dfa, table: &Complete, block_of: &[usize], initial: StateId) -> Dfa {
    let dead = block_of[table.sink];
    let num_blocks = block_of.iter().max().map_or(0, |m| m + 1);
    let mut representative = vec![usize::MAX; num_blocks];
    for (q, &b) in block_of.iter().enumerate() {
        if representative[b] == usize::MAX {
            representative[b] = q;
        }
    }

    let start = block_of[initial];
    if start == dead {
        // Empty language: a lone rejecting initial state.
        return Dfa::new(dfa.alphabet().clone(), 1, 0).expect("one state");
    }

    let mut order = vec![start];
    let mut renumber = HashMap::from([(start, 0usize)]);
    let mut head = 0;
    while head < order.len() {
        let rep = representative[order[head]];
        head += 1;
        for t in 0..table.width {
            let b = block_of[table.delta[rep][t]];
            if b != dead && !renumber.contains_key(&b) {
                renumber.insert(b, order.len());
                order.push(b);
            }
        }
    }

    let mut out = Dfa::new(dfa.alphabet().clone(), order.len(), 0).expect("nonempty");
    for (new, &b) in order.iter().enumerate() {
        let rep = representative[b];
        out.set_accepting(new, table.accepting[rep])
            .expect("in range");
        for t in 0..table.width {
            let target = block_of[table.delta[rep][t]];
            if target != dead {
                out.set_transition_index(new, t, renumber[&target])
                    .expect("in range");
            }
        }
    }
    out
}

/// Minimal DFA recognizing the same language, via Hopcroft partition refinement.
///
/// Unreachable states are removed first. The machine is completed with a
/// temporary sink; the block holding the sink (every state from which no
/// accepting state is reachable) is removed again afterwards. Output states are
/// numbered in BFS order from the initial state, so two minimal machines for
/// the same language compare equal with `==`.
pub fn minimize(dfa: &Dfa) -> Dfa {
    let trimmed = dfa.trim();
    let table = complete(&trimmed);
    let n = table.delta.len();
    let width = table.width;

    let mut inverse: Vec<Vec<Vec<StateId>>> = vec![vec![Vec::new(); n]; width];
    for (p, row) in table.delta.iter().enumerate() {
        for (t, &q) in row.iter().enumerate() {
            inverse[t][q].push(p);
        }
    }

    let mut blocks: Vec<Vec<StateId>> = Vec::new();
    let (acc, rej): (Vec<StateId>, Vec<StateId>) = (0..n).partition(|&q| table.accepting[q]);
    for b in [acc, rej] {
        if !b.is_empty() {
            blocks.push(b);
        }
    }
    let mut block_of = vec![0; n];
    for (b, members) in blocks.iter().enumerate() {
        for &q in members {
            block_of[q] = b;
        }
    }

    let mut pending: Vec<usize> = (0..blocks.len()).collect();
    let mut in_pending = vec![true; blocks.len()];
    let mut marked: Vec<Vec<StateId>> = Vec::new();
    let mut touched: Vec<usize> = Vec::new();

    while let Some(a) = pending.pop() {
        in_pending[a] = false;
        let splitter = blocks[a].clone();
        for inv in &inverse {
            for &q in &splitter {
                for &p in &inv[q] {
                    let b = block_of[p];
                    if b >= marked.len() {
                        marked.resize_with(b + 1, Vec::new);
                    }
                    if marked[b].is_empty() {
                        touched.push(b);
                    }
                    marked[b].push(p);
                }
            }
            for y in touched.drain(..) {
                let hit = std::mem::take(&mut marked[y]);
                if hit.len() == blocks[y].len() {
                    continue;
                }
                let z = blocks.len();
                for &p in &hit {
                    block_of[p] = z;
                }
                blocks[y].retain(|&q| block_of[q] == y);
                blocks.push(hit);
                in_pending.push(false);
                if in_pending[y] || blocks[z].len() <= blocks[y].len() {
                    pending.push(z);
                    in_pending[z] = true;
                } else {
                    pending.push(y);
                    in_pending[y] = true;
                }
            }
        }
    }

    quotient(&trimmed, &table, &block_of, trimmed.initial())
}

/// Moore's iterative refinement. Slower than [`minimize`]; kept as an
/// independent cross-check and produces identically numbered output.
pub fn minimize_moore(dfa: &Dfa) -> Dfa {
    let trimmed = dfa.trim();
    let table = complete(&trimmed);
    let n = table.delta.len();
    let mut class: Vec<usize> = (0..n).map(|q| usize::from(table.accepting[q])).collect();
    loop {
        let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut next = vec![0; n];
        for q in 0..n {
            let mut signature = vec![class[q]];
            signature.extend(table.delta[q].iter().map(|&d| class[d]));
            let fresh = ids.len();
            next[q] = *ids.entry(signature).or_insert(fresh);
        }
        let before = class
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        if ids.len() == before {
            class = next;
            break;
        }
        class = next;
    }
    quotient(&trimmed, &table, &class, trimmed.initial())
}
