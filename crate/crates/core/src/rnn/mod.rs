//! Elman recurrent recognizer with a per-position two-class head.
//!
//! The recurrence is `h' = tanh(U h + V x)` where `x` is the embedding of the
//! next token. Every string is prefixed with a begin-of-sequence token, so the
//! first hidden row (the representation of `ε`) is `tanh(V E[bos])`.

mod adamw;
mod checkpoint;
mod saturation;
mod train;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::automata::Alphabet;
use crate::error::Result;

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CheckpointMeta};
pub use saturation::{kappa_bound, saturation_level, vector_saturation};
pub use train::{
    batch_gradients, select_best_epoch, sequence_loss, train, write_metrics_csv, EpochMetrics,
    TrainConfig, TrainingRun,
};

/// All trainable tensors. Gradients and optimizer moments share this shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    /// `(|Σ| + 1) × e`; the last row embeds the begin-of-sequence token.
    pub embedding: Array2<f64>,
    /// `U`, `d × d`.
    pub recurrence: Array2<f64>,
    /// `V`, `d × e`.
    pub input: Array2<f64>,
    /// `2 × d`; row 1 scores acceptance.
    pub head_weight: Array2<f64>,
    pub head_bias: Array1<f64>,
}

impl Parameters {
    pub fn zeros_like(other: &Parameters) -> Parameters {
        Parameters {
            embedding: Array2::zeros(other.embedding.raw_dim()),
            recurrence: Array2::zeros(other.recurrence.raw_dim()),
            input: Array2::zeros(other.input.raw_dim()),
            head_weight: Array2::zeros(other.head_weight.raw_dim()),
            head_bias: Array1::zeros(other.head_bias.raw_dim()),
        }
    }

    /// Tensors in a fixed order, flattened row-major.
    pub fn slices(&self) -> [&[f64]; 5] {
        [
            self.embedding.as_slice().expect("standard layout"),
            self.recurrence.as_slice().expect("standard layout"),
            self.input.as_slice().expect("standard layout"),
            self.head_weight.as_slice().expect("standard layout"),
            self.head_bias.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.embedding.as_slice_mut().expect("standard layout"),
            self.recurrence.as_slice_mut().expect("standard layout"),
            self.input.as_slice_mut().expect("standard layout"),
            self.head_weight.as_slice_mut().expect("standard layout"),
            self.head_bias.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn l2_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .all(|v| v.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Hidden states and acceptance probabilities for every prefix of a string.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardResult {
    /// `(n + 1) × d`; row `i` is the state after the prefix of length `i`.
    pub hidden: Array2<f64>,
    /// Probability that each prefix is in the language.
    pub accept_prob: Vec<f64>,
}

impl ForwardResult {
    pub fn decisions(&self) -> Vec<bool> {
        decisions_from_probs(&self.accept_prob)
    }
}

/// Thresholds at one half; an exact tie rejects.
pub fn decisions_from_probs(probs: &[f64]) -> Vec<bool> {
    probs.iter().map(|&p| p > 0.5).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RnnModel {
    alphabet: Alphabet,
    pub params: Parameters,
}

fn uniform_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    bound: f64,
    rng: &mut R,
) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound))
}

impl RnnModel {
    /// Random model: every tensor is drawn from `U(-1/√fan_in, 1/√fan_in)`.
    /// Embedding rows are lookups, so their fan-in is 1.
    pub fn init<R: Rng + ?Sized>(
        alphabet: Alphabet,
        embed_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if embed_dim == 0 || hidden_dim == 0 {
            return Err(crate::Error::InvalidArgument(
                "embedding and hidden dimensions must be positive".into(),
            ));
        }
        let vocab = alphabet.len() + 1;
        let hidden_bound = 1.0 / (hidden_dim as f64).sqrt();
        let embed_bound = 1.0 / (embed_dim as f64).sqrt();
        let embedding = uniform_matrix(vocab, embed_dim, 1.0, rng);
        let recurrence = uniform_matrix(hidden_dim, hidden_dim, hidden_bound, rng);
        let input = uniform_matrix(hidden_dim, embed_dim, embed_bound, rng);
        let head_weight = uniform_matrix(2, hidden_dim, hidden_bound, rng);
        let head_bias =
            Array1::from_shape_simple_fn(2, || rng.gen_range(-hidden_bound..hidden_bound));
        Ok(RnnModel {
            alphabet,
            params: Parameters {
                embedding,
                recurrence,
                input,
                head_weight,
                head_bias,
            },
        })
    }

    pub fn from_parameters(alphabet: Alphabet, params: Parameters) -> Result<Self> {
        let d = params.recurrence.nrows();
        let e = params.embedding.ncols();
        let ok = params.embedding.nrows() == alphabet.len() + 1
            && params.recurrence.ncols() == d
            && params.input.dim() == (d, e)
            && params.head_weight.dim() == (2, d)
            && params.head_bias.len() == 2;
        if !ok {
            return Err(crate::Error::InvalidArgument(
                "parameter shapes are inconsistent".into(),
            ));
        }
        if !params.all_finite() {
            return Err(crate::Error::InvalidArgument("non-finite parameter".into()));
        }
        Ok(RnnModel { alphabet, params })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn hidden_dim(&self) -> usize {
        self.params.recurrence.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.params.embedding.ncols()
    }

    pub fn bos_index(&self) -> usize {
        self.alphabet.len()
    }

    pub fn forward(&self, w: &str) -> Result<ForwardResult> {
        let tokens = self.alphabet.encode(w)?;
        Ok(self.forward_indices(&tokens))
    }

    pub fn forward_indices(&self, tokens: &[usize]) -> ForwardResult {
        let p = &self.params;
        let d = self.hidden_dim();
        let mut hidden = Array2::zeros((tokens.len() + 1, d));
        let mut accept_prob = Vec::with_capacity(tokens.len() + 1);
        let mut h = Array1::<f64>::zeros(d);
        let inputs = std::iter::once(self.bos_index()).chain(tokens.iter().copied());
        for (row, t) in inputs.enumerate() {
            let x = p.embedding.row(t);
            let pre = p.recurrence.dot(&h) + p.input.dot(&x);
            h = pre.mapv(f64::tanh);
            hidden.row_mut(row).assign(&h);
            let logits = p.head_weight.dot(&h) + &p.head_bias;
            accept_prob.push(sigmoid(logits[1] - logits[0]));
        }
        ForwardResult {
            hidden,
            accept_prob,
        }
    }

    pub fn decisions(&self, w: &str) -> Result<Vec<bool>> {
        Ok(self.forward(w)?.decisions())
    }

    /// Full-string verdict.
    pub fn accepts(&self, w: &str) -> Result<bool> {
        Ok(*self
            .decisions(w)?
            .last()
            .expect("at least the empty prefix"))
    }

    /// Row-stacked hidden states of many strings, convenient for clustering.
    pub fn hidden_states<'a>(
        &self,
        strings: impl IntoIterator<Item = &'a str>,
    ) -> Result<Vec<Array2<f64>>> {
        strings
            .into_iter()
            .map(|w| self.forward(w).map(|f| f.hidden))
            .collect()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(crate) fn row_norm(v: ndarray::ArrayView1<f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn small_model(seed: u64) -> RnnModel {
        RnnModel::init(
            Alphabet::binary(),
            4,
            8,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    #[test]
    fn shapes() {
        let m = RnnModel::init(
            Alphabet::binary(),
            10,
            100,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(m.params.embedding.dim(), (3, 10));
        assert_eq!(m.params.recurrence.dim(), (100, 100));
        assert_eq!(m.params.input.dim(), (100, 10));
        assert_eq!(m.params.head_weight.dim(), (2, 100));
        assert_eq!(m.params.head_bias.len(), 2);
    }

    #[test]
    fn init_is_seeded() {
        assert_eq!(small_model(1), small_model(1));
        assert_ne!(small_model(1), small_model(2));
        assert!(
            RnnModel::init(Alphabet::binary(), 0, 3, &mut ChaCha8Rng::seed_from_u64(0)).is_err()
        );
    }

    #[test]
    fn forward_shapes_and_range() {
        let m = small_model(0);
        let f = m.forward("abba").unwrap();
        assert_eq!(f.hidden.nrows(), 5);
        assert_eq!(f.accept_prob.len(), 5);
        assert!(f.hidden.iter().all(|&v| v > -1.0 && v < 1.0));
        assert!(f.accept_prob.iter().all(|&p| p > 0.0 && p < 1.0));
        assert!(m.forward("abc").is_err());
    }

    #[test]
    fn forward_is_causal() {
        let m = small_model(5);
        let short = m.forward("ab").unwrap();
        let long = m.forward("abb").unwrap();
        for i in 0..3 {
            assert_eq!(short.hidden.row(i), long.hidden.row(i));
            assert_eq!(short.accept_prob[i], long.accept_prob[i]);
        }
    }

    #[test]
    fn decision_threshold() {
        assert_eq!(
            decisions_from_probs(&[0.9, 0.2, 0.8]),
            vec![true, false, true]
        );
        assert_eq!(decisions_from_probs(&[0.5]), vec![false]);
    }

    #[test]
    fn shape_validation() {
        let m = small_model(0);
        let mut p = m.params.clone();
        p.head_bias = Array1::zeros(3);
        assert!(RnnModel::from_parameters(Alphabet::binary(), p).is_err());
        let mut p = m.params.clone();
        p.recurrence[[0, 0]] = f64::NAN;
        assert!(RnnModel::from_parameters(Alphabet::binary(), p).is_err());
    }
}
