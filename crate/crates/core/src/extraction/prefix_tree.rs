use ndarray::{Array2, ArrayView1};

use crate::automata::{Alphabet, Dfa, StateId};
use crate::error::{Error, Result};
use crate::rnn::RnnModel;

/// Trie over a finite string set. Each state stands for one distinct prefix,
/// carries the model's accept decision for it and the hidden state reached
/// after reading it. States are numbered in BFS order from the root, children
/// in alphabet order.
#[derive(Clone, Debug, PartialEq)]
pub struct PrefixTree {
    alphabet: Alphabet,
    children: Vec<Vec<Option<StateId>>>,
    parent: Vec<Option<(StateId, usize)>>,
    accepting: Vec<bool>,
    features: Array2<f64>,
}

struct Node {
    children: Vec<Option<usize>>,
    accepting: bool,
    feature: Vec<f64>,
}

impl PrefixTree {
    /// Builds the tree from explicit per-prefix labels and features, e.g. for
    /// synthetic tests. `prefixes` is `(string, labels, features)` with one
    /// label and one feature row per prefix, as from a forward pass.
    pub fn from_labeled<'a, I>(alphabet: Alphabet, prefixes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, Vec<bool>, Array2<f64>)>,
    {
        let width = alphabet.len();
        let mut nodes: Vec<Node> = Vec::new();
        let mut dim = None;
        for (w, labels, hidden) in prefixes {
            let tokens = alphabet.encode(w)?;
            if labels.len() != tokens.len() + 1 || hidden.nrows() != tokens.len() + 1 {
                return Err(Error::InvalidArgument(format!(
                    "string {w:?} needs {} labels and feature rows",
                    tokens.len() + 1
                )));
            }
            if *dim.get_or_insert(hidden.ncols()) != hidden.ncols() {
                return Err(Error::InvalidArgument("feature dimensions differ".into()));
            }
            let fresh = |i: usize| Node {
                children: vec![None; width],
                accepting: labels[i],
                feature: hidden.row(i).to_vec(),
            };
            if nodes.is_empty() {
                nodes.push(fresh(0));
            }
            let mut cur = 0;
            for (i, &t) in tokens.iter().enumerate() {
                cur = match nodes[cur].children[t] {
                    Some(c) => c,
                    None => {
                        let id = nodes.len();
                        nodes.push(fresh(i + 1));
                        nodes[cur].children[t] = Some(id);
                        id
                    }
                };
            }
        }
        if nodes.is_empty() {
            return Err(Error::InvalidArgument(
                "prefix tree needs at least one string".into(),
            ));
        }

        // Renumber in BFS order.
        let mut order = vec![0usize];
        let mut head = 0;
        while head < order.len() {
            let q = order[head];
            head += 1;
            order.extend(nodes[q].children.iter().flatten());
        }
        let mut renumber = vec![0usize; nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            renumber[old] = new;
        }
        let dim = dim.expect("at least one string");
        let n = nodes.len();
        let mut tree = PrefixTree {
            alphabet,
            children: vec![vec![None; width]; n],
            parent: vec![None; n],
            accepting: vec![false; n],
            features: Array2::zeros((n, dim)),
        };
        for (new, &old) in order.iter().enumerate() {
            let node = &nodes[old];
            tree.accepting[new] = node.accepting;
            tree.features
                .row_mut(new)
                .assign(&ArrayView1::from(node.feature.as_slice()));
            for (t, c) in node.children.iter().enumerate() {
                if let Some(c) = c {
                    let c = renumber[*c];
                    tree.children[new][t] = Some(c);
                    tree.parent[c] = Some((new, t));
                }
            }
        }
        Ok(tree)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn root(&self) -> StateId {
        0
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting[q]
    }

    pub fn child(&self, q: StateId, token: usize) -> Option<StateId> {
        self.children[q][token]
    }

    pub fn parent(&self, q: StateId) -> Option<(StateId, usize)> {
        self.parent[q]
    }

    pub fn feature(&self, q: StateId) -> ArrayView1<'_, f64> {
        self.features.row(q)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn edges(&self) -> impl Iterator<Item = (StateId, usize, StateId)> + '_ {
        self.children.iter().enumerate().flat_map(|(q, row)| {
            row.iter()
                .enumerate()
                .filter_map(move |(t, c)| c.map(|c| (q, t, c)))
        })
    }

    /// The prefix a state stands for.
    pub fn prefix(&self, mut q: StateId) -> String {
        let mut tokens = Vec::new();
        while let Some((p, t)) = self.parent[q] {
            tokens.push(t);
            q = p;
        }
        tokens.reverse();
        self.alphabet.decode(&tokens)
    }

    /// State reached by `w`, if `w` is a stored prefix.
    pub fn find(&self, w: &str) -> Result<Option<StateId>> {
        let mut q = self.root();
        for t in self.alphabet.encode(w)? {
            match self.children[q][t] {
                Some(c) => q = c,
                None => return Ok(None),
            }
        }
        Ok(Some(q))
    }

    pub fn to_dfa(&self) -> Dfa {
        let mut d = Dfa::new(self.alphabet.clone(), self.num_states(), 0).expect("root exists");
        for q in 0..self.num_states() {
            d.set_accepting(q, self.accepting[q]).expect("in range");
        }
        for (q, t, c) in self.edges() {
            d.set_transition_index(q, t, c).expect("in range");
        }
        d
    }
}

/// One forward pass per string; labels are the model's decisions and features
/// its hidden states.
pub fn build_prefix_tree<S: AsRef<str>>(model: &RnnModel, strings: &[S]) -> Result<PrefixTree> {
    let passes = strings
        .iter()
        .map(|w| {
            let f = model.forward(w.as_ref())?;
            Ok((w.as_ref(), f.decisions(), f.hidden))
        })
        .collect::<Result<Vec<_>>>()?;
    PrefixTree::from_labeled(model.alphabet().clone(), passes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::tests::small_model;

    #[test]
    fn single_string_path() {
        let m = small_model(0);
        let t = build_prefix_tree(&m, &["ab"]).unwrap();
        assert_eq!(t.num_states(), 3);
        assert_eq!(t.child(0, 0), Some(1));
        assert_eq!(t.child(1, 1), Some(2));
        assert_eq!(t.prefix(2), "ab");
    }

    #[test]
    fn shared_prefixes() {
        let m = small_model(0);
        let t = build_prefix_tree(&m, &["ab", "aa"]).unwrap();
        assert_eq!(t.num_states(), 4);
        assert_eq!(t.find("aa").unwrap(), Some(2));
        assert_eq!(t.find("ab").unwrap(), Some(3));
        assert_eq!(t.find("b").unwrap(), None);
    }

    #[test]
    fn bfs_numbering() {
        let m = small_model(0);
        let t = build_prefix_tree(&m, &["bbb", "a"]).unwrap();
        let prefixes: Vec<String> = (0..t.num_states()).map(|q| t.prefix(q)).collect();
        assert_eq!(prefixes, vec!["", "a", "b", "bb", "bbb"]);
    }

    #[test]
    fn features_match_forward() {
        let m = small_model(2);
        let t = build_prefix_tree(&m, &["abab", "abb"]).unwrap();
        let f = m.forward("abb").unwrap();
        for i in 0..=3 {
            let q = t.find(&"abb"[..i]).unwrap().unwrap();
            assert_eq!(t.feature(q), f.hidden.row(i));
            assert_eq!(t.is_accepting(q), f.decisions()[i]);
        }
        let again = build_prefix_tree(&m, &["abab", "abb"]).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn memorizes_its_training_prefixes() {
        let m = small_model(4);
        let strings = ["abba", "bbab", "aaaa", "b"];
        let t = build_prefix_tree(&m, &strings).unwrap();
        let d = t.to_dfa();
        for w in strings {
            assert_eq!(d.prefix_decisions(w).unwrap(), m.decisions(w).unwrap());
        }
    }

    #[test]
    fn errors() {
        let m = small_model(0);
        assert!(build_prefix_tree(&m, &["abc"]).is_err());
        assert!(build_prefix_tree::<&str>(&m, &[]).is_err());
    }
}
