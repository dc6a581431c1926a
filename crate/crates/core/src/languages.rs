//! The seven Tomita languages over `{a, b}` and the string samplers used to
//! build training, development and extraction data.

use std::fmt::{self, Write as _};

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::automata::{Alphabet, Dfa};
use crate::error::{parse_err, Error, Result};

/// One of the Tomita languages, numbered 1 through 7.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LanguageId(u8);

impl LanguageId {
    pub fn new(index: u8) -> Result<Self> {
        if (1..=7).contains(&index) {
            Ok(LanguageId(index))
        } else {
            Err(Error::InvalidLanguage(index))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = LanguageId> {
        (1..=7).map(LanguageId)
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            1 => "a*",
            2 => "(ab)*",
            3 => "odd runs of a's are followed by even runs of b's",
            4 => "no aaa substring",
            5 => "even number of a's and even number of b's",
            6 => "#a = #b (mod 3)",
            7 => "b*a*b*a*",
            _ => unreachable!(),
        }
    }
}

impl TryFrom<u8> for LanguageId {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        LanguageId::new(v)
    }
}

impl From<LanguageId> for u8 {
    fn from(id: LanguageId) -> u8 {
        id.0
    }
}

impl fmt::Display for LanguageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tomita{}", self.0)
    }
}

fn build(states: usize, accepting: &[usize], edges: &[(usize, char, usize)]) -> Dfa {
    let mut d = Dfa::new(Alphabet::binary(), states, 0).expect("valid table");
    for &q in accepting {
        d.set_accepting(q, true).expect("valid table");
    }
    for &(src, t, dst) in edges {
        d.set_transition(src, t, dst).expect("valid table");
    }
    d
}

/// The minimal partial DFA for the language; the dead state is left implicit.
pub fn gold_dfa(id: LanguageId) -> Dfa {
    match id.0 {
        1 => build(1, &[0], &[(0, 'a', 0)]),
        2 => build(2, &[0], &[(0, 'a', 1), (1, 'b', 0)]),
        // 0: neutral, 1: odd a-run, 2: odd b-run after odd a-run, 3: even b-run after odd a-run
        3 => build(
            4,
            &[0, 1, 3],
            &[
                (0, 'a', 1),
                (0, 'b', 0),
                (1, 'a', 0),
                (1, 'b', 2),
                (2, 'b', 3),
                (3, 'a', 1),
                (3, 'b', 2),
            ],
        ),
        // number of trailing a's
        4 => build(
            3,
            &[0, 1, 2],
            &[
                (0, 'a', 1),
                (0, 'b', 0),
                (1, 'a', 2),
                (1, 'b', 0),
                (2, 'b', 0),
            ],
        ),
        // (#a mod 2) + 2 (#b mod 2)
        5 => build(
            4,
            &[0],
            &[
                (0, 'a', 1),
                (0, 'b', 2),
                (1, 'a', 0),
                (1, 'b', 3),
                (2, 'a', 3),
                (2, 'b', 0),
                (3, 'a', 2),
                (3, 'b', 1),
            ],
        ),
        // (#a - #b) mod 3
        6 => build(
            3,
            &[0],
            &[
                (0, 'a', 1),
                (0, 'b', 2),
                (1, 'a', 2),
                (1, 'b', 0),
                (2, 'a', 0),
                (2, 'b', 1),
            ],
        ),
        7 => build(
            4,
            &[0, 1, 2, 3],
            &[
                (0, 'b', 0),
                (0, 'a', 1),
                (1, 'a', 1),
                (1, 'b', 2),
                (2, 'b', 2),
                (2, 'a', 3),
                (3, 'a', 3),
            ],
        ),
        _ => unreachable!("LanguageId is validated on construction"),
    }
}

pub fn membership(id: LanguageId, w: &str) -> Result<bool> {
    gold_dfa(id).accepts(w)
}

/// String over `{a, b}` together with the membership label of every prefix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: String,
    /// `y[i]` is whether the prefix of length `i` is in the language.
    pub y: Vec<bool>,
}

impl LabeledSample {
    pub fn label(id: LanguageId, x: String) -> Result<Self> {
        let y = gold_dfa(id).prefix_decisions(&x)?;
        Ok(LabeledSample { x, y })
    }

    pub fn accepted(&self) -> bool {
        *self
            .y
            .last()
            .expect("labels cover at least the empty prefix")
    }
}

/// Uniform sampler over `L ∩ Σ^n`.
///
/// `counts[r][q]` is the number of length-`r` continuations from `q` that end
/// in an accepting state; walking forward with probabilities proportional to
/// these counts yields every member of the slice with equal probability.
/// Counts are kept as `f64` so lengths in the hundreds do not overflow.
pub struct PositiveSampler {
    dfa: Dfa,
    counts: Vec<Vec<f64>>,
}

impl PositiveSampler {
    pub fn new(dfa: Dfa) -> Self {
        let base = (0..dfa.num_states())
            .map(|q| if dfa.is_accepting(q) { 1.0 } else { 0.0 })
            .collect();
        PositiveSampler {
            dfa,
            counts: vec![base],
        }
    }

    pub fn for_language(id: LanguageId) -> Self {
        Self::new(gold_dfa(id))
    }

    fn extend_to(&mut self, n: usize) {
        while self.counts.len() <= n {
            let prev = self.counts.last().expect("base row");
            let row = (0..self.dfa.num_states())
                .map(|q| {
                    (0..self.dfa.alphabet().len())
                        .filter_map(|t| self.dfa.next(q, t))
                        .map(|d| prev[d])
                        .sum()
                })
                .collect();
            self.counts.push(row);
        }
    }

    /// Number of accepted strings of length `n`, as a float.
    pub fn count(&mut self, n: usize) -> f64 {
        self.extend_to(n);
        self.counts[n][self.dfa.initial()]
    }

    pub fn feasible(&mut self, n: usize) -> bool {
        self.count(n) > 0.0
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Option<String> {
        if !self.feasible(n) {
            return None;
        }
        let width = self.dfa.alphabet().len();
        let mut q = self.dfa.initial();
        let mut out = String::with_capacity(n);
        for remaining in (1..=n).rev() {
            let row = &self.counts[remaining - 1];
            let weights: Vec<(usize, usize, f64)> = (0..width)
                .filter_map(|t| self.dfa.next(q, t).map(|d| (t, d, row[d])))
                .filter(|&(_, _, c)| c > 0.0)
                .collect();
            let total: f64 = weights.iter().map(|w| w.2).sum();
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut choice = *weights.last().expect("feasible state has a live successor");
            for &w in &weights {
                acc += w.2;
                if u < acc {
                    choice = w;
                    break;
                }
            }
            out.push(self.dfa.alphabet().token(choice.0));
            q = choice.1;
        }
        Some(out)
    }
}

pub fn sample_uniform_string<R: Rng + ?Sized>(n: usize, rng: &mut R) -> String {
    (0..n)
        .map(|_| if rng.gen::<bool>() { 'b' } else { 'a' })
        .collect()
}

/// A uniformly random member of the language with length exactly `n`.
pub fn sample_uniform_positive<R: Rng + ?Sized>(
    id: LanguageId,
    n: usize,
    rng: &mut R,
) -> Result<String> {
    PositiveSampler::for_language(id)
        .sample(n, rng)
        .ok_or(Error::Infeasible {
            language: id.index(),
            length: n,
        })
}

/// Half uniform strings over `Σ^n`, half uniform members of `L ∩ Σ^n`, shuffled.
///
/// When the language has no strings of length `n` the positive half falls back
/// to uniform strings so that counts and lengths stay as requested.
pub fn sample_balanced<R: Rng + ?Sized>(
    id: LanguageId,
    n: usize,
    count: usize,
    rng: &mut R,
) -> Vec<LabeledSample> {
    let mut sampler = PositiveSampler::for_language(id);
    let positives = count / 2;
    let uniform = count - positives;
    if positives > 0 && !sampler.feasible(n) {
        warn!("{id} has no strings of length {n}; sampling uniform strings instead of positives");
    }
    let mut strings: Vec<String> = (0..uniform)
        .map(|_| sample_uniform_string(n, rng))
        .collect();
    for _ in 0..positives {
        let s = match sampler.sample(n, rng) {
            Some(s) => s,
            None => sample_uniform_string(n, rng),
        };
        strings.push(s);
    }
    strings.shuffle(rng);
    strings
        .into_iter()
        .map(|x| LabeledSample::label(id, x).expect("sampled over the binary alphabet"))
        .collect()
}

/// Held-out set: lengths uniform on `0..=max_len`; each string is a forced
/// positive (when the language has strings of that length) or a uniform string
/// with equal probability.
pub fn sample_eval_set<R: Rng + ?Sized>(
    id: LanguageId,
    count: usize,
    max_len: usize,
    rng: &mut R,
) -> Vec<LabeledSample> {
    let mut sampler = PositiveSampler::for_language(id);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(0..=max_len);
            let positive = rng.gen::<bool>();
            let x = if positive {
                sampler
                    .sample(n, rng)
                    .unwrap_or_else(|| sample_uniform_string(n, rng))
            } else {
                sample_uniform_string(n, rng)
            };
            LabeledSample::label(id, x).expect("sampled over the binary alphabet")
        })
        .collect()
}

/// Dataset files: `#`-prefixed `key=value` header lines, then one record per
/// line as `string<TAB>labels`, where labels is a `0`/`1` string of length
/// `|string| + 1`. The empty string is an empty first field.
pub fn write_dataset(metadata: &[(&str, String)], samples: &[LabeledSample]) -> String {
    let mut out = String::from("# statemerge-dataset 1\n");
    for (k, v) in metadata {
        writeln!(out, "# {k}={v}").unwrap();
    }
    for s in samples {
        let bits: String = s.y.iter().map(|&b| if b { '1' } else { '0' }).collect();
        writeln!(out, "{}\t{}", s.x, bits).unwrap();
    }
    out
}

/// Header `key=value` pairs in file order.
pub type DatasetHeader = Vec<(String, String)>;

pub fn read_dataset(text: &str) -> Result<(DatasetHeader, Vec<LabeledSample>)> {
    let mut metadata = Vec::new();
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.trim().split_once('=') {
                metadata.push((k.to_string(), v.to_string()));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (x, bits) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(i + 1, "expected `string<TAB>labels`"))?;
        let y = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(parse_err(i + 1, format!("bad label character {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if y.len() != x.chars().count() + 1 {
            return Err(parse_err(i + 1, "label count must be string length + 1"));
        }
        samples.push(LabeledSample {
            x: x.to_string(),
            y,
        });
    }
    Ok((metadata, samples))
}
