mod common;

use std::collections::HashMap;

use common::{all_strings, oracle};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statemerge::languages::{
    membership, sample_balanced, sample_eval_set, sample_uniform_positive, LanguageId,
    PositiveSampler,
};

#[test]
fn membership_agrees_with_definitions_up_to_length_12() {
    let strings = all_strings(12);
    assert_eq!(strings.len(), (1 << 13) - 1);
    for id in LanguageId::all() {
        let disagreements: Vec<&String> = strings
            .iter()
            .filter(|w| membership(id, w).unwrap() != oracle(id.index(), w))
            .collect();
        assert!(
            disagreements.is_empty(),
            "{id}: {:?}",
            &disagreements[..disagreements.len().min(5)]
        );
    }
}

#[test]
fn path_counts_match_enumeration() {
    let strings = all_strings(10);
    for id in LanguageId::all() {
        let mut sampler = PositiveSampler::for_language(id);
        for n in 0..=10 {
            let expected = strings
                .iter()
                .filter(|w| w.len() == n && oracle(id.index(), w))
                .count();
            assert_eq!(sampler.count(n), expected as f64, "{id} length {n}");
        }
    }
}

#[test]
fn positive_sampling_is_uniform() {
    let draws = 10_000;
    for id in LanguageId::all() {
        let members: Vec<String> = all_strings(6)
            .into_iter()
            .filter(|w| w.len() == 6 && oracle(id.index(), w))
            .collect();
        if members.is_empty() {
            assert!(sample_uniform_positive(id, 6, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(id.index()));
        let mut counts: HashMap<String, usize> = HashMap::new();
        for _ in 0..draws {
            *counts
                .entry(sample_uniform_positive(id, 6, &mut rng).unwrap())
                .or_default() += 1;
        }
        assert!(counts.keys().all(|w| members.contains(w)));
        let k = members.len() as f64;
        let expected = draws as f64 / k;
        let sigma = (draws as f64 * (1.0 / k) * (1.0 - 1.0 / k)).sqrt();
        let mut chi2 = 0.0;
        for w in &members {
            let c = *counts.get(w).unwrap_or(&0) as f64;
            assert!(
                (c - expected).abs() <= 4.0 * sigma.max(1e-9) || k == 1.0,
                "{id} {w}: {c} vs {expected}"
            );
            chi2 += (c - expected).powi(2) / expected;
        }
        let df = k - 1.0;
        assert!(
            chi2 <= df + 5.0 * (2.0 * df).sqrt() + 1e-9,
            "{id}: chi2 {chi2} df {df}"
        );
    }
}

#[test]
fn sampled_labels_follow_membership() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for id in LanguageId::all() {
        let mut set = sample_balanced(id, 12, 200, &mut rng);
        set.extend(sample_eval_set(id, 200, 20, &mut rng));
        for s in &set {
            assert_eq!(s.y.len(), s.x.len() + 1);
            for (i, &y) in s.y.iter().enumerate() {
                assert_eq!(
                    y,
                    oracle(id.index(), &s.x[..i]),
                    "{id} {:?} prefix {i}",
                    s.x
                );
            }
        }
    }
}
