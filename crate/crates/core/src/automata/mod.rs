//! Finite automata with partial transition functions.
//!
//! A missing transition leads to the undefined state, written `∅` in traces.
//! `∅` is absorbing, never accepting and is not a member of the state set, so
//! every state count reported by this crate excludes it.

mod determinize;
mod dot;
mod equivalence;
mod format;
mod minimize;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use determinize::determinize;
pub use dot::{nfa_to_dot, to_dot};
pub use equivalence::{distinguishing_string, equivalent};
pub use format::{parse_automaton, write_dfa, write_nfa, ParsedAutomaton};
pub use minimize::{minimize, minimize_moore};

/// Opaque state identifier. States of an automaton are numbered `0..n`.
pub type StateId = usize;

/// Ordered, duplicate-free token set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet(Vec<char>);

impl Alphabet {
    pub fn new(tokens: impl IntoIterator<Item = char>) -> Result<Self> {
        let tokens: Vec<char> = tokens.into_iter().collect();
        let distinct: BTreeSet<char> = tokens.iter().copied().collect();
        if distinct.len() != tokens.len() {
            return Err(Error::InvalidArgument(format!(
                "alphabet has duplicate tokens: {tokens:?}"
            )));
        }
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("alphabet is empty".into()));
        }
        Ok(Alphabet(tokens))
    }

    /// The binary alphabet `{a, b}` used by the Tomita languages.
    pub fn binary() -> Self {
        Alphabet(vec!['a', 'b'])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[char] {
        &self.0
    }

    pub fn token(&self, index: usize) -> char {
        self.0[index]
    }

    pub fn index_of(&self, token: char) -> Option<usize> {
        self.0.iter().position(|&t| t == token)
    }

    /// Maps every character of `w` to its token index.
    pub fn encode(&self, w: &str) -> Result<Vec<usize>> {
        w.chars()
            .map(|c| {
                self.index_of(c).ok_or_else(|| Error::UnknownToken {
                    token: c,
                    alphabet: self.0.clone(),
                })
            })
            .collect()
    }

    pub fn decode(&self, indices: &[usize]) -> String {
        indices.iter().map(|&i| self.0[i]).collect()
    }

    pub(crate) fn ensure_same(&self, other: &Alphabet) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::AlphabetMismatch {
                left: self.0.clone(),
                right: other.0.clone(),
            })
        }
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "}}")
    }
}

/// Result of running a [`Dfa`] on a string.
///
/// `states[i]` is the state after the prefix of length `i`; `None` is `∅`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunTrace {
    pub states: Vec<Option<StateId>>,
    pub accepted: bool,
}

/// Deterministic finite automaton with a partial transition function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dfa {
    alphabet: Alphabet,
    initial: StateId,
    accepting: Vec<bool>,
    delta: Vec<Vec<Option<StateId>>>,
}

impl Dfa {
    /// A machine with `num_states` states, no transitions and no accepting states.
    pub fn new(alphabet: Alphabet, num_states: usize, initial: StateId) -> Result<Self> {
        if initial >= num_states {
            return Err(Error::Malformed(format!(
                "initial state {initial} outside 0..{num_states}"
            )));
        }
        let width = alphabet.len();
        Ok(Dfa {
            alphabet,
            initial,
            accepting: vec![false; num_states],
            delta: vec![vec![None; width]; num_states],
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.accepting
            .iter()
            .enumerate()
            .filter_map(|(q, &f)| f.then_some(q))
    }

    pub fn set_accepting(&mut self, q: StateId, accepting: bool) -> Result<()> {
        self.check_state(q)?;
        self.accepting[q] = accepting;
        Ok(())
    }

    /// Sets `δ(src, token) = dst`, replacing any previous transition.
    pub fn set_transition(&mut self, src: StateId, token: char, dst: StateId) -> Result<()> {
        let t = self.token_index(token)?;
        self.set_transition_index(src, t, dst)
    }

    pub fn set_transition_index(&mut self, src: StateId, token: usize, dst: StateId) -> Result<()> {
        self.check_state(src)?;
        self.check_state(dst)?;
        if token >= self.alphabet.len() {
            return Err(Error::Malformed(format!(
                "token index {token} out of range"
            )));
        }
        self.delta[src][token] = Some(dst);
        Ok(())
    }

    /// `δ(q, token)` by token index; `None` is `∅`.
    pub fn next(&self, q: StateId, token: usize) -> Option<StateId> {
        self.delta[q][token]
    }

    /// All defined transitions as `(src, token index, dst)`, sorted by source then token.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, usize, StateId)> + '_ {
        self.delta.iter().enumerate().flat_map(|(q, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(t, d)| d.map(|d| (q, t, d)))
        })
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions().count()
    }

    fn token_index(&self, token: char) -> Result<usize> {
        self.alphabet
            .index_of(token)
            .ok_or_else(|| Error::UnknownToken {
                token,
                alphabet: self.alphabet.tokens().to_vec(),
            })
    }

    fn check_state(&self, q: StateId) -> Result<()> {
        if q < self.num_states() {
            Ok(())
        } else {
            Err(Error::Malformed(format!(
                "state {q} outside 0..{}",
                self.num_states()
            )))
        }
    }

    pub fn run(&self, w: &str) -> Result<RunTrace> {
        let tokens = self.alphabet.encode(w)?;
        Ok(self.run_indices(&tokens))
    }

    pub fn run_indices(&self, tokens: &[usize]) -> RunTrace {
        let mut states = Vec::with_capacity(tokens.len() + 1);
        let mut q = Some(self.initial);
        states.push(q);
        for &t in tokens {
            q = q.and_then(|q| self.delta[q][t]);
            states.push(q);
        }
        let accepted = q.is_some_and(|q| self.accepting[q]);
        RunTrace { states, accepted }
    }

    pub fn accepts(&self, w: &str) -> Result<bool> {
        let tokens = self.alphabet.encode(w)?;
        Ok(self.accepts_indices(&tokens))
    }

    pub fn accepts_indices(&self, tokens: &[usize]) -> bool {
        let mut q = self.initial;
        for &t in tokens {
            match self.delta[q][t] {
                Some(next) => q = next,
                None => return false,
            }
        }
        self.accepting[q]
    }

    /// Accept verdict for every prefix of `w`, starting with `ε`.
    pub fn prefix_decisions(&self, w: &str) -> Result<Vec<bool>> {
        let tokens = self.alphabet.encode(w)?;
        Ok(self.prefix_decisions_indices(&tokens))
    }

    pub fn prefix_decisions_indices(&self, tokens: &[usize]) -> Vec<bool> {
        self.run_indices(tokens)
            .states
            .into_iter()
            .map(|q| q.is_some_and(|q| self.accepting[q]))
            .collect()
    }

    /// States reachable from the initial state, in BFS order (tokens in alphabet order).
    pub fn reachable_bfs(&self) -> Vec<StateId> {
        let mut seen = vec![false; self.num_states()];
        let mut order = vec![self.initial];
        seen[self.initial] = true;
        let mut head = 0;
        while head < order.len() {
            let q = order[head];
            head += 1;
            for d in self.delta[q].iter().flatten() {
                if !seen[*d] {
                    seen[*d] = true;
                    order.push(*d);
                }
            }
        }
        order
    }

    /// Drops unreachable states and renumbers the rest in BFS order.
    pub fn trim(&self) -> Dfa {
        let order = self.reachable_bfs();
        let mut renumber = vec![None; self.num_states()];
        for (new, &old) in order.iter().enumerate() {
            renumber[old] = Some(new);
        }
        let mut out = Dfa {
            alphabet: self.alphabet.clone(),
            initial: 0,
            accepting: vec![false; order.len()],
            delta: vec![vec![None; self.alphabet.len()]; order.len()],
        };
        for (new, &old) in order.iter().enumerate() {
            out.accepting[new] = self.accepting[old];
            for (t, d) in self.delta[old].iter().enumerate() {
                out.delta[new][t] = d.and_then(|d| renumber[d]);
            }
        }
        out
    }

    /// Views the machine as an [`Nfa`] with singleton successor sets.
    pub fn to_nfa(&self) -> Nfa {
        let mut nfa = Nfa::new(self.alphabet.clone(), self.num_states(), self.initial)
            .expect("dfa is well formed");
        for q in 0..self.num_states() {
            nfa.accepting[q] = self.accepting[q];
        }
        for (q, t, d) in self.transitions() {
            nfa.delta[q][t].insert(d);
        }
        nfa
    }
}

/// Nondeterministic finite automaton; acceptance by existence of an accepting path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nfa {
    alphabet: Alphabet,
    initial: StateId,
    accepting: Vec<bool>,
    delta: Vec<Vec<BTreeSet<StateId>>>,
}

impl Nfa {
    pub fn new(alphabet: Alphabet, num_states: usize, initial: StateId) -> Result<Self> {
        if initial >= num_states {
            return Err(Error::Malformed(format!(
                "initial state {initial} outside 0..{num_states}"
            )));
        }
        let width = alphabet.len();
        Ok(Nfa {
            alphabet,
            initial,
            accepting: vec![false; num_states],
            delta: vec![vec![BTreeSet::new(); width]; num_states],
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting[q]
    }

    pub fn set_accepting(&mut self, q: StateId, accepting: bool) -> Result<()> {
        self.check_state(q)?;
        self.accepting[q] = accepting;
        Ok(())
    }

    pub fn add_transition(&mut self, src: StateId, token: char, dst: StateId) -> Result<()> {
        let t = self
            .alphabet
            .index_of(token)
            .ok_or_else(|| Error::UnknownToken {
                token,
                alphabet: self.alphabet.tokens().to_vec(),
            })?;
        self.add_transition_index(src, t, dst)
    }

    pub fn add_transition_index(&mut self, src: StateId, token: usize, dst: StateId) -> Result<()> {
        self.check_state(src)?;
        self.check_state(dst)?;
        if token >= self.alphabet.len() {
            return Err(Error::Malformed(format!(
                "token index {token} out of range"
            )));
        }
        self.delta[src][token].insert(dst);
        Ok(())
    }

    pub fn successors(&self, q: StateId, token: usize) -> &BTreeSet<StateId> {
        &self.delta[q][token]
    }

    /// All transitions as `(src, token index, dst)`, sorted.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, usize, StateId)> + '_ {
        self.delta.iter().enumerate().flat_map(|(q, row)| {
            row.iter()
                .enumerate()
                .flat_map(move |(t, ds)| ds.iter().map(move |&d| (q, t, d)))
        })
    }

    pub fn is_deterministic(&self) -> bool {
        self.delta.iter().flatten().all(|ds| ds.len() <= 1)
    }

    fn check_state(&self, q: StateId) -> Result<()> {
        if q < self.num_states() {
            Ok(())
        } else {
            Err(Error::Malformed(format!(
                "state {q} outside 0..{}",
                self.num_states()
            )))
        }
    }

    pub fn accepts(&self, w: &str) -> Result<bool> {
        let tokens = self.alphabet.encode(w)?;
        Ok(self.accepts_indices(&tokens))
    }

    pub fn accepts_indices(&self, tokens: &[usize]) -> bool {
        let mut current: BTreeSet<StateId> = BTreeSet::from([self.initial]);
        for &t in tokens {
            current = current
                .iter()
                .flat_map(|&q| self.delta[q][t].iter().copied())
                .collect();
            if current.is_empty() {
                return false;
            }
        }
        current.iter().any(|&q| self.accepting[q])
    }
}
