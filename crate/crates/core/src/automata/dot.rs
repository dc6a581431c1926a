use std::fmt::Write;

use super::{Dfa, Nfa};

/// Graphviz rendering. States appear in id order, edges by source then token,
/// so the output is byte-stable for a given machine.
pub fn to_dot(dfa: &Dfa) -> String {
    render(
        "dfa",
        dfa.num_states(),
        dfa.initial(),
        |q| dfa.is_accepting(q),
        dfa.transitions()
            .map(|(s, t, d)| (s, dfa.alphabet().token(t), d)),
    )
}

/// Same layout as [`to_dot`] for a possibly nondeterministic machine.
pub fn nfa_to_dot(nfa: &Nfa) -> String {
    render(
        "nfa",
        nfa.num_states(),
        nfa.initial(),
        |q| nfa.is_accepting(q),
        nfa.transitions()
            .map(|(s, t, d)| (s, nfa.alphabet().token(t), d)),
    )
}

fn render(
    name: &str,
    states: usize,
    initial: usize,
    accepting: impl Fn(usize) -> bool,
    edges: impl Iterator<Item = (usize, char, usize)>,
) -> String {
    let mut out = String::new();
    writeln!(out, "digraph {name} {{").unwrap();
    out.push_str("  rankdir=LR;\n");
    out.push_str("  __start [shape=point];\n");
    for q in 0..states {
        let shape = if accepting(q) {
            "doublecircle"
        } else {
            "circle"
        };
        writeln!(out, "  q{q} [shape={shape}];").unwrap();
    }
    writeln!(out, "  __start -> q{initial};").unwrap();
    for (src, token, dst) in edges {
        writeln!(out, "  q{src} -> q{dst} [label=\"{token}\"];").unwrap();
    }
    out.push_str("}\n");
    out
}
