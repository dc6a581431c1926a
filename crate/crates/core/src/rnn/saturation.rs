use log::warn;
use ndarray::ArrayView1;

use super::RnnModel;
use crate::error::{Error, Result};

/// Distance between the unit-normalized state and its normalized sign pattern,
/// `‖h/‖h‖ − sign(h)/√d‖`, with `sign(0) = +1`. `None` for the zero vector.
pub fn vector_saturation(h: ArrayView1<f64>) -> Option<f64> {
    let norm = super::row_norm(h);
    if norm == 0.0 {
        return None;
    }
    let corner = 1.0 / (h.len() as f64).sqrt();
    let sq: f64 = h
        .iter()
        .map(|&v| {
            let s = if v >= 0.0 { corner } else { -corner };
            let diff = v / norm - s;
            diff * diff
        })
        .sum();
    Some(sq.sqrt())
}

/// The smallest `ε` such that the model is `ε`-saturated on every hidden state
/// visited while reading `strings` (including the `ε` representation).
pub fn saturation_level<'a>(
    model: &RnnModel,
    strings: impl IntoIterator<Item = &'a str>,
) -> Result<f64> {
    let mut worst: Option<f64> = None;
    let mut degenerate = 0usize;
    for w in strings {
        let f = model.forward(w)?;
        for row in f.hidden.rows() {
            match vector_saturation(row) {
                Some(e) => worst = Some(worst.map_or(e, |m: f64| m.max(e))),
                None => degenerate += 1,
            }
        }
    }
    if degenerate > 0 {
        warn!("{degenerate} zero hidden vectors excluded from the saturation level");
    }
    worst.ok_or_else(|| Error::InvalidArgument("no usable hidden states".into()))
}

/// Largest similarity tolerance `κ` for which `cos ≥ 1 − κ` still forces two
/// `ε`-saturated states onto the same sign pattern: `2 (1/√d − ε)²`.
/// `None` when `ε ≥ 1/√d`, where no tolerance is safe.
pub fn kappa_bound(dim: usize, eps: f64) -> Option<f64> {
    assert!(dim >= 1, "dimension must be positive");
    let d = dim as f64;
    if 1.0 / d.sqrt() <= eps {
        return None;
    }
    // Same quantity as 2(1/√d − ε)², arranged so that ε = 0 is exact.
    let r = 1.0 - eps * d.sqrt();
    Some(2.0 * r * r / d)
}
