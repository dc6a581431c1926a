use std::collections::BTreeSet;

use log::{debug, warn};
use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::PrefixTree;
use crate::automata::{Alphabet, Nfa, StateId};
use crate::error::{Error, Result};

/// Similarity tolerance: states merge only when `cos > 1 − κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergePolicy {
    kappa: f64,
}

impl MergePolicy {
    pub fn new(kappa: f64) -> Result<Self> {
        if kappa > 0.0 && kappa < 1.0 {
            Ok(MergePolicy { kappa })
        } else {
            Err(Error::InvalidArgument(format!(
                "κ must lie in (0, 1), got {kappa}"
            )))
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// The cosine similarity a pair must strictly exceed.
    pub fn threshold(&self) -> f64 {
        1.0 - self.kappa
    }
}

impl Default for MergePolicy {
    fn default() -> Self {
        MergePolicy { kappa: 0.01 }
    }
}

/// Automaton under state merging. Features and labels stay attached to the
/// original state ids; a merged-away state keeps its row but is no longer live.
#[derive(Clone, Debug)]
pub struct MergeGraph {
    alphabet: Alphabet,
    initial: StateId,
    live: Vec<bool>,
    accepting: Vec<bool>,
    features: Array2<f64>,
    norms: Vec<f64>,
    merged_into: Vec<Option<StateId>>,
    out: Vec<Vec<BTreeSet<StateId>>>,
    inc: Vec<BTreeSet<(StateId, usize)>>,
}

impl MergeGraph {
    pub fn from_tree(tree: &PrefixTree) -> Self {
        let n = tree.num_states();
        let width = tree.alphabet().len();
        let mut out = vec![vec![BTreeSet::new(); width]; n];
        let mut inc = vec![BTreeSet::new(); n];
        for (q, t, c) in tree.edges() {
            out[q][t].insert(c);
            inc[c].insert((q, t));
        }
        let features = tree.features().clone();
        let norms = features
            .rows()
            .into_iter()
            .map(|r| r.dot(&r).sqrt())
            .collect();
        MergeGraph {
            alphabet: tree.alphabet().clone(),
            initial: tree.root(),
            live: vec![true; n],
            accepting: (0..n).map(|q| tree.is_accepting(q)).collect(),
            features,
            norms,
            merged_into: vec![None; n],
            out,
            inc,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    /// Number of original state ids, live or not.
    pub fn capacity(&self) -> usize {
        self.live.len()
    }

    pub fn is_live(&self, q: StateId) -> bool {
        self.live[q]
    }

    pub fn live_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.capacity()).filter(|&q| self.live[q])
    }

    pub fn num_live(&self) -> usize {
        self.live.iter().filter(|&&l| l).count()
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting[q]
    }

    pub fn feature(&self, q: StateId) -> ArrayView1<'_, f64> {
        self.features.row(q)
    }

    pub fn successors(&self, q: StateId, token: usize) -> &BTreeSet<StateId> {
        &self.out[q][token]
    }

    /// Live state that `q` has been folded into (itself when still live).
    pub fn representative(&self, mut q: StateId) -> StateId {
        while let Some(next) = self.merged_into[q] {
            q = next;
        }
        q
    }

    fn check_live(&self, q: StateId) -> Result<()> {
        if q >= self.capacity() {
            return Err(Error::InvalidArgument(format!("no state {q}")));
        }
        if !self.live[q] {
            return Err(Error::DeletedState(q));
        }
        Ok(())
    }

    /// Cosine similarity of two feature vectors, `None` if either is zero.
    pub fn cosine(&self, a: StateId, b: StateId) -> Option<f64> {
        let denom = self.norms[a] * self.norms[b];
        if denom == 0.0 {
            return None;
        }
        Some(self.features.row(a).dot(&self.features.row(b)) / denom)
    }

    /// Consistency (same accept label) and similarity (`cos > 1 − κ`).
    pub fn should_merge(&self, a: StateId, b: StateId, policy: &MergePolicy) -> Result<bool> {
        self.check_live(a)?;
        self.check_live(b)?;
        if self.accepting[a] != self.accepting[b] {
            return Ok(false);
        }
        match self.cosine(a, b) {
            Some(c) => Ok(c > policy.threshold()),
            None => {
                debug!("zero feature vector on state {a} or {b}; treating as dissimilar");
                Ok(false)
            }
        }
    }

    /// Folds `from` into `into`: `from` is deleted, its incoming edges are
    /// rerouted to `into` and its outgoing edges are added to `into`'s. The
    /// survivor keeps its own feature vector.
    pub fn merge(&mut self, from: StateId, into: StateId) -> Result<()> {
        self.check_live(from)?;
        self.check_live(into)?;
        if from == into {
            return Err(Error::InvalidArgument(format!(
                "cannot merge state {from} into itself"
            )));
        }
        for t in 0..self.alphabet.len() {
            for s in std::mem::take(&mut self.out[from][t]) {
                self.inc[s].remove(&(from, t));
                let s = if s == from { into } else { s };
                self.out[into][t].insert(s);
                self.inc[s].insert((into, t));
            }
        }
        for (p, t) in std::mem::take(&mut self.inc[from]) {
            self.out[p][t].remove(&from);
            self.out[p][t].insert(into);
            self.inc[into].insert((p, t));
        }
        self.live[from] = false;
        self.merged_into[from] = Some(into);
        if self.initial == from {
            self.initial = into;
        }
        Ok(())
    }

    /// The live part as an [`Nfa`], states renumbered by ascending original id.
    /// Also returns the original id of each new state.
    pub fn to_nfa(&self) -> (Nfa, Vec<StateId>) {
        let ids: Vec<StateId> = self.live_states().collect();
        let mut renumber = vec![usize::MAX; self.capacity()];
        for (new, &old) in ids.iter().enumerate() {
            renumber[old] = new;
        }
        let mut nfa = Nfa::new(self.alphabet.clone(), ids.len(), renumber[self.initial])
            .expect("initial state is live");
        for (new, &old) in ids.iter().enumerate() {
            nfa.set_accepting(new, self.accepting[old])
                .expect("in range");
            for t in 0..self.alphabet.len() {
                for &s in &self.out[old][t] {
                    nfa.add_transition_index(new, t, renumber[s])
                        .expect("in range");
                }
            }
        }
        (nfa, ids)
    }
}

/// Merges the tree to a fixed point.
///
/// Candidates are scanned with the folded state ranging over BFS ids from the
/// deepest down and the survivor ranging upward from the root, restarting
/// after every merge. Because merging never changes the features or labels of
/// surviving states, that restart scan reduces to a single descending pass in
/// which each state folds into the lowest-numbered compatible state before it.
pub fn merge_all(tree: &PrefixTree, policy: &MergePolicy) -> MergeGraph {
    let mut graph = MergeGraph::from_tree(tree);
    let zero = graph.norms.iter().filter(|&&n| n == 0.0).count();
    if zero > 0 {
        warn!("{zero} prefix-tree states have zero feature vectors and will not merge");
    }
    for from in (1..graph.capacity()).rev() {
        for into in 0..from {
            if graph.should_merge(from, into, policy).expect("both live") {
                graph.merge(from, into).expect("both live");
                break;
            }
        }
    }
    graph
}
