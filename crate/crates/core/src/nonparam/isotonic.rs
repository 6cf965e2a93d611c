//! Pool-adjacent-violators projection onto non-increasing sequences.

use crate::error::{Error, Result};

/// Weighted least-squares projection of `values` onto the cone of
/// non-increasing sequences. Returns the fitted sequence; ties in the input
/// are preserved through pooling.
pub fn pava_nonincreasing(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return Err(Error::Validation(format!(
            "length mismatch: {} values, {} weights",
            values.len(),
            weights.len()
        )));
    }
    for (i, (&v, &w)) in values.iter().zip(weights).enumerate() {
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "values must be finite, found {v} at index {i}"
            )));
        }
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::Validation(format!(
                "weights must be positive and finite, found {w} at index {i}"
            )));
        }
    }

    // Blocks of pooled entries: (mean, total weight, length).
    let mut mean: Vec<f64> = Vec::with_capacity(values.len());
    let mut wsum: Vec<f64> = Vec::with_capacity(values.len());
    let mut len: Vec<usize> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        mean.push(v);
        wsum.push(w);
        len.push(1);
        // A block violating non-increase against its predecessor is pooled;
        // pooling can create a new violation further left, hence the loop.
        while mean.len() >= 2 && mean[mean.len() - 1] > mean[mean.len() - 2] {
            let (m2, w2, l2) = (mean.pop().unwrap(), wsum.pop().unwrap(), len.pop().unwrap());
            let k = mean.len() - 1;
            let w_new = wsum[k] + w2;
            mean[k] = (wsum[k] * mean[k] + w2 * m2) / w_new;
            wsum[k] = w_new;
            len[k] += l2;
        }
    }

    let mut out = Vec::with_capacity(values.len());
    for (m, l) in mean.iter().zip(&len) {
        out.extend(std::iter::repeat(*m).take(*l));
    }
    Ok(out)
}
