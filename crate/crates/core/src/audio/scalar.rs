pub const LOUDNESS_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarFeatures {
    pub energy: f64,
    pub loudness: f64,
    pub zcr: f64,
}

/// Mean-square energy, log-energy loudness and zero-crossing rate.
/// Zero counts as positive when detecting sign changes.
pub fn scalar_features(window: &[f64]) -> ScalarFeatures {
    let energy = if window.is_empty() {
        0.0
    } else {
        window.iter().map(|x| x * x).sum::<f64>() / window.len() as f64
    };
    let crossings = window.windows(2).filter(|p| (p[0] >= 0.0) != (p[1] >= 0.0)).count();
    let zcr = if window.len() > 1 {
        crossings as f64 / (window.len() - 1) as f64
    } else {
        0.0
    };
    ScalarFeatures {
        energy,
        loudness: (energy + LOUDNESS_EPS).ln(),
        zcr,
    }
}
