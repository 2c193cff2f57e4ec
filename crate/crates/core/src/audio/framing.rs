use crate::audio::AudioClip;
use crate::error::{Error, Result};

/// Samples per video frame: `round(sample_rate / fps)`.
pub fn hop_length(sample_rate: u32, fps: f64) -> Result<usize> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(Error::InvalidInput(format!("fps must be positive, got {fps}")));
    }
    let hop = (sample_rate as f64 / fps).round() as usize;
    if hop == 0 {
        return Err(Error::InvalidInput(format!(
            "fps {fps} exceeds sample rate {sample_rate}"
        )));
    }
    Ok(hop)
}

/// Cuts the clip into one window per video frame.
///
/// Window `i` has length `2 * hop` and is centred on the middle of the
/// `i`-th hop, i.e. it covers `[i*hop + hop/2 - hop, i*hop + hop/2 + hop)`.
/// Samples outside the clip are zero. The frame count is
/// `floor(num_samples / hop)`.
pub fn frame_audio(clip: &AudioClip, fps: f64) -> Result<Vec<Vec<f64>>> {
    if clip.samples.is_empty() {
        return Err(Error::InvalidInput("audio clip is empty".into()));
    }
    let hop = hop_length(clip.sample_rate, fps)?;
    let n = clip.samples.len();
    let count = n / hop;
    if count == 0 {
        return Err(Error::InvalidInput(format!(
            "clip has {n} samples, shorter than one hop of {hop}"
        )));
    }
    let window = 2 * hop;
    let windows = (0..count)
        .map(|i| {
            let start = (i * hop + hop / 2) as isize - hop as isize;
            (0..window)
                .map(|j| {
                    let idx = start + j as isize;
                    if idx >= 0 && (idx as usize) < n {
                        f64::from(clip.samples[idx as usize])
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    Ok(windows)
}
