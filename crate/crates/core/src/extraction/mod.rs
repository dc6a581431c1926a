//! State-merging extraction: prefix tree from the model's decisions, merging
//! under the consistency and similarity constraints, then determinization and
//! minimization.

mod merge;
mod prefix_tree;

use log::warn;

use crate::automata::{determinize, minimize, Dfa, Nfa};
use crate::error::Result;
use crate::rnn::RnnModel;

pub use merge::{merge_all, MergeGraph, MergePolicy};
pub use prefix_tree::{build_prefix_tree, PrefixTree};

#[derive(Clone, Debug)]
pub struct ExtractionReport {
    pub kappa: f64,
    pub data_count: usize,
    pub trie_size: usize,
    pub merged_size: usize,
    pub determinized_size: usize,
    pub minimized_size: usize,
    /// Automaton left by merging; may be nondeterministic.
    pub merged: Nfa,
    pub minimized: Dfa,
    /// Fraction of training prefixes (counted per string occurrence) on which
    /// the minimized machine agrees with the model's decision.
    pub train_fidelity: f64,
}

/// Runs the full pipeline on `strings`.
pub fn extract<S: AsRef<str>>(
    model: &RnnModel,
    strings: &[S],
    policy: &MergePolicy,
) -> Result<ExtractionReport> {
    let tree = build_prefix_tree(model, strings)?;
    let graph = merge_all(&tree, policy);
    let (merged, _) = graph.to_nfa();
    let determinized = determinize(&merged);
    let minimized = minimize(&determinized);

    let mut total = 0usize;
    let mut agree = 0usize;
    for w in strings {
        let tokens = tree.alphabet().encode(w.as_ref())?;
        let extracted = minimized.prefix_decisions_indices(&tokens);
        let mut q = tree.root();
        let mut labels = vec![tree.is_accepting(q)];
        for &t in &tokens {
            q = tree.child(q, t).expect("string was inserted");
            labels.push(tree.is_accepting(q));
        }
        total += labels.len();
        agree += labels
            .iter()
            .zip(&extracted)
            .filter(|(a, b)| a == b)
            .count();
    }
    let train_fidelity = agree as f64 / total as f64;
    if agree != total {
        warn!(
            "extracted machine disagrees with the model on {} of {total} training prefixes",
            total - agree
        );
    }

    Ok(ExtractionReport {
        kappa: policy.kappa(),
        data_count: strings.len(),
        trie_size: tree.num_states(),
        merged_size: merged.num_states(),
        determinized_size: determinized.num_states(),
        minimized_size: minimized.num_states(),
        merged,
        minimized,
        train_fidelity,
    })
}
