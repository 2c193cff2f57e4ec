use crate::error::{Error, Result};

const REGRESSION_WIDTH: isize = 2;

/// Regression delta over a window of +-2 frames with edge replication:
/// `d_t = sum_{n=1..2} n (c_{t+n} - c_{t-n}) / (2 sum n^2)`.
pub fn delta<const D: usize>(seq: &[[f64; D]]) -> Vec<[f64; D]> {
    let len = seq.len() as isize;
    let denom = 2.0 * (1..=REGRESSION_WIDTH).map(|n| (n * n) as f64).sum::<f64>();
    (0..len)
        .map(|t| {
            let mut d = [0.0; D];
            for n in 1..=REGRESSION_WIDTH {
                let ahead = &seq[(t + n).min(len - 1) as usize];
                let behind = &seq[(t - n).max(0) as usize];
                for k in 0..D {
                    d[k] += n as f64 * (ahead[k] - behind[k]);
                }
            }
            d.map(|v| v / denom)
        })
        .collect()
}

/// Delta and delta-delta, concatenated per frame as `delta ∥ delta_delta`.
pub fn delta_features<const D: usize>(seq: &[[f64; D]]) -> Result<Vec<Vec<f64>>> {
    if seq.is_empty() {
        return Err(Error::InvalidInput("delta of an empty sequence".into()));
    }
    let d1 = delta(seq);
    let d2 = delta(&d1);
    Ok(d1
        .iter()
        .zip(&d2)
        .map(|(a, b)| a.iter().chain(b).copied().collect())
        .collect())
}
