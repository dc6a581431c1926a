//! k-means extraction baseline: cluster the hidden states visited on the
//! extraction strings, treat clusters as states, and decide acceptance and
//! transitions by majority vote.

use std::collections::HashMap;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::index::sample;
use rand::Rng;

use crate::automata::{minimize, Dfa};
use crate::error::{Error, Result};
use crate::rnn::RnnModel;

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Sum of squared distances after each assignment step.
    pub distortion: Vec<f64>,
    pub iterations: usize,
}

pub const MAX_ITERATIONS: usize = 100;

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(points: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    points
        .rows()
        .into_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (c, centroid) in centroids.rows().into_iter().enumerate() {
                let d = squared_distance(p, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

/// Row indices of the first occurrence of each distinct point.
fn distinct_rows(points: &Array2<f64>) -> Vec<usize> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut out = Vec::new();
    for (i, row) in points.rows().into_iter().enumerate() {
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        if seen.insert(key, i).is_none() {
            out.push(i);
        }
    }
    out
}

/// Lloyd's algorithm. Centroids start at `k` distinct points drawn with `rng`;
/// iteration stops when assignments repeat or after [`MAX_ITERATIONS`]. An
/// emptied cluster is reseeded at the point currently farthest from its
/// centroid. Distance ties go to the lowest cluster id.
pub fn kmeans<R: Rng + ?Sized>(
    points: &Array2<f64>,
    k: usize,
    rng: &mut R,
) -> Result<KMeansResult> {
    let distinct = distinct_rows(points);
    if k == 0 || distinct.len() < k {
        return Err(Error::TooFewPoints {
            k,
            points: distinct.len(),
        });
    }
    let picks: Vec<usize> = sample(rng, distinct.len(), k)
        .into_iter()
        .map(|i| distinct[i])
        .collect();
    let mut centroids = points.select(Axis(0), &picks);
    let (mut assignments, mut dists) = assign(points, &centroids);
    let mut distortion = vec![dists.iter().sum()];
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (p, &c) in points.rows().into_iter().zip(&assignments) {
            let mut row = sums.row_mut(c);
            row += &p;
            counts[c] += 1;
        }
        let mut taken: Vec<usize> = Vec::new();
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean: Array1<f64> = &sums.row(c) / count as f64;
                centroids.row_mut(c).assign(&mean);
            } else {
                let far = (0..points.nrows())
                    .filter(|i| !taken.contains(i))
                    .fold(None::<(usize, f64)>, |best, i| match best {
                        Some((_, d)) if d >= dists[i] => best,
                        _ => Some((i, dists[i])),
                    })
                    .expect("more points than clusters")
                    .0;
                taken.push(far);
                centroids.row_mut(c).assign(&points.row(far));
            }
        }
        let (next, next_dists) = assign(points, &centroids);
        distortion.push(next_dists.iter().sum());
        dists = next_dists;
        if next == assignments {
            break;
        }
        assignments = next;
    }
    Ok(KMeansResult {
        assignments,
        centroids,
        distortion,
        iterations,
    })
}

/// Every hidden state visited on a string set, with the model's decision for
/// its prefix and a link to the state reached by the next token.
#[derive(Clone, Debug)]
pub struct HiddenStateDataset {
    pub hidden: Array2<f64>,
    pub labels: Vec<bool>,
    /// `(next token, record index of the successor)`, absent at string ends.
    pub successor: Vec<Option<(usize, usize)>>,
    /// Records holding the begin-of-sequence state.
    pub bos_records: Vec<usize>,
}

impl HiddenStateDataset {
    pub fn collect<S: AsRef<str>>(model: &RnnModel, strings: &[S]) -> Result<Self> {
        let mut rows: Vec<f64> = Vec::new();
        let mut labels = Vec::new();
        let mut successor = Vec::new();
        let mut bos_records = Vec::new();
        for w in strings {
            let tokens = model.alphabet().encode(w.as_ref())?;
            let f = model.forward_indices(&tokens);
            let start = labels.len();
            bos_records.push(start);
            for (i, (h, y)) in f.hidden.rows().into_iter().zip(f.decisions()).enumerate() {
                rows.extend(h.iter());
                labels.push(y);
                successor.push(tokens.get(i).map(|&t| (t, start + i + 1)));
            }
        }
        if labels.is_empty() {
            return Err(Error::InvalidArgument(
                "no strings to collect hidden states from".into(),
            ));
        }
        let hidden =
            Array2::from_shape_vec((labels.len(), model.hidden_dim()), rows).expect("row-major");
        Ok(HiddenStateDataset {
            hidden,
            labels,
            successor,
            bos_records,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct KMeansExtraction {
    /// Cluster machine restricted to states reachable from the initial cluster.
    pub raw: Dfa,
    pub minimized: Dfa,
    pub clusters: KMeansResult,
    /// Accept vote per cluster.
    pub cluster_accepting: Vec<bool>,
    pub k: usize,
}

/// Clusters become states. The initial state is the cluster of the
/// begin-of-sequence state. A cluster accepts when a strict majority of its
/// members are accepted prefixes. Each `(cluster, token)` goes to the cluster
/// most often reached from it on that token, ties to the lowest id; pairs never
/// observed stay undefined.
pub fn kmeans_extract<S: AsRef<str>, R: Rng + ?Sized>(
    model: &RnnModel,
    strings: &[S],
    k: usize,
    rng: &mut R,
) -> Result<KMeansExtraction> {
    let data = HiddenStateDataset::collect(model, strings)?;
    let distinct = distinct_rows(&data.hidden).len();
    let k = if distinct < k {
        warn!("only {distinct} distinct hidden states; clustering with k = {distinct}");
        distinct
    } else {
        k
    };
    let clusters = kmeans(&data.hidden, k, rng)?;
    let a = &clusters.assignments;

    let mut votes = vec![(0usize, 0usize); k];
    for (&c, &y) in a.iter().zip(&data.labels) {
        if y {
            votes[c].0 += 1;
        } else {
            votes[c].1 += 1;
        }
    }
    let cluster_accepting: Vec<bool> = votes.iter().map(|&(yes, no)| yes > no).collect();

    let width = model.alphabet().len();
    let mut moves = vec![vec![vec![0usize; k]; width]; k];
    for (i, succ) in data.successor.iter().enumerate() {
        if let Some((t, j)) = *succ {
            moves[a[i]][t][a[j]] += 1;
        }
    }

    let initial = a[data.bos_records[0]];
    let mut dfa = Dfa::new(model.alphabet().clone(), k, initial)?;
    for c in 0..k {
        dfa.set_accepting(c, cluster_accepting[c])?;
        for (t, counts) in moves[c].iter().enumerate() {
            let best =
                counts
                    .iter()
                    .enumerate()
                    .fold(None::<(usize, usize)>, |best, (target, &n)| match best {
                        _ if n == 0 => best,
                        Some((_, m)) if m >= n => best,
                        _ => Some((target, n)),
                    });
            if let Some((target, _)) = best {
                dfa.set_transition_index(c, t, target)?;
            }
        }
    }
    let raw = dfa.trim();
    let minimized = minimize(&raw);
    Ok(KMeansExtraction {
        raw,
        minimized,
        clusters,
        cluster_accepting,
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::tests::small_model;
    use ndarray::arr2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = arr2(&[[0.0, 1.0], [2.0, 3.0], [4.0, -1.0]]);
        let r = kmeans(&pts, 1, &mut rng(0)).unwrap();
        assert_eq!(r.centroids.row(0).to_vec(), vec![2.0, 1.0]);
        assert_eq!(r.assignments, vec![0, 0, 0]);
    }

    #[test]
    fn one_cluster_per_distinct_point() {
        let pts = arr2(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        let r = kmeans(&pts, 3, &mut rng(4)).unwrap();
        assert_eq!(*r.distortion.last().unwrap(), 0.0);
        assert_eq!(r.assignments[1], r.assignments[3]);
        let mut ids = r.assignments.clone();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 3);
        assert!(matches!(
            kmeans(&pts, 4, &mut rng(0)),
            Err(Error::TooFewPoints { k: 4, points: 3 })
        ));
    }

    #[test]
    fn seeded_and_monotone() {
        let mut g = rng(1);
        let pts = Array2::from_shape_simple_fn((200, 3), || g.gen_range(-1.0..1.0));
        let a = kmeans(&pts, 7, &mut rng(9)).unwrap();
        let b = kmeans(&pts, 7, &mut rng(9)).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert!(
            a.distortion.windows(2).all(|w| w[1] <= w[0] + 1e-9),
            "{:?}",
            a.distortion
        );
    }

    #[test]
    fn extraction_votes() {
        let m = small_model(3);
        let strings = ["abba", "bab", "aaaa", "bbbb", "ab"];
        let e = kmeans_extract(&m, &strings, 4, &mut rng(0)).unwrap();
        let data = HiddenStateDataset::collect(&m, &strings).unwrap();
        for c in 0..e.k {
            let members: Vec<bool> = data
                .labels
                .iter()
                .zip(&e.clusters.assignments)
                .filter(|(_, &a)| a == c)
                .map(|(&y, _)| y)
                .collect();
            let yes = members.iter().filter(|&&y| y).count();
            assert_eq!(e.cluster_accepting[c], 2 * yes > members.len());
        }
        assert!(e.minimized.num_states() <= e.raw.num_states());
    }
}
