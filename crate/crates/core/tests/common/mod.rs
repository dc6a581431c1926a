#![allow(dead_code)]

use regex::Regex;

/// Every string over `{a, b}` of length at most `max_len`, shortest first.
pub fn all_strings(max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| [format!("{w}a"), format!("{w}b")])
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn runs(w: &str) -> Vec<(char, usize)> {
    let mut out: Vec<(char, usize)> = Vec::new();
    for c in w.chars() {
        match out.last_mut() {
            Some((last, n)) if *last == c => *n += 1,
            _ => out.push((c, 1)),
        }
    }
    out
}

/// Tomita membership straight from the textual definitions.
pub fn oracle(id: u8, w: &str) -> bool {
    let count = |c| w.chars().filter(|&x| x == c).count() as i64;
    let re = |p: &str| Regex::new(p).unwrap().is_match(w);
    match id {
        1 => re("^a*$"),
        2 => re("^(ab)*$"),
        3 => runs(w)
            .windows(2)
            .all(|p| !(p[0].0 == 'a' && p[0].1 % 2 == 1 && p[1].1 % 2 == 1)),
        4 => !re("aaa"),
        5 => count('a') % 2 == 0 && count('b') % 2 == 0,
        6 => (count('a') - count('b')).rem_euclid(3) == 0,
        7 => re("^b*a*b*a*$"),
        _ => unreachable!(),
    }
}
