//! Acoustic features: one 45-dim vector per video frame.
//!
//! Each frame is `mfcc[14] ∥ delta[14] ∥ delta_delta[14] ∥ energy ∥ loudness ∥ zcr`.

mod delta;
mod framing;
mod mfcc;
mod scalar;
mod wav;

use std::path::Path;

use crate::error::{Error, Result};
use crate::format::{self, decode_blob, encode_blob};

pub use delta::{delta, delta_features};
pub use framing::{frame_audio, hop_length};
pub use mfcc::{mfcc, MfccExtractor, LOG_FLOOR, MEL_FILTERS, NUM_MFCC};
pub use scalar::{scalar_features, ScalarFeatures, LOUDNESS_EPS};
pub use wav::read_wav;

pub const AUDIO_DIM: usize = 45;
pub const VCAF_MAGIC: &[u8; 4] = b"VCAF";

/// Index of the energy value inside a flattened feature vector.
pub const ENERGY_INDEX: usize = 3 * NUM_MFCC;

/// Mono audio with its sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        Ok(Self { samples, sample_rate })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AcousticFrameFeatures {
    pub mfcc: [f32; NUM_MFCC],
    pub mfcc_delta: [f32; NUM_MFCC],
    pub mfcc_delta_delta: [f32; NUM_MFCC],
    pub energy: f32,
    pub loudness: f32,
    pub zcr: f32,
}

impl AcousticFrameFeatures {
    pub fn to_array(&self) -> [f32; AUDIO_DIM] {
        let mut out = [0.0; AUDIO_DIM];
        out[..NUM_MFCC].copy_from_slice(&self.mfcc);
        out[NUM_MFCC..2 * NUM_MFCC].copy_from_slice(&self.mfcc_delta);
        out[2 * NUM_MFCC..3 * NUM_MFCC].copy_from_slice(&self.mfcc_delta_delta);
        out[ENERGY_INDEX] = self.energy;
        out[ENERGY_INDEX + 1] = self.loudness;
        out[ENERGY_INDEX + 2] = self.zcr;
        out
    }

    pub fn from_slice(v: &[f32]) -> Result<Self> {
        if v.len() != AUDIO_DIM {
            return Err(Error::Shape {
                what: "acoustic frame",
                expected: AUDIO_DIM,
                actual: v.len(),
            });
        }
        let mut f = Self::default();
        f.mfcc.copy_from_slice(&v[..NUM_MFCC]);
        f.mfcc_delta.copy_from_slice(&v[NUM_MFCC..2 * NUM_MFCC]);
        f.mfcc_delta_delta.copy_from_slice(&v[2 * NUM_MFCC..3 * NUM_MFCC]);
        f.energy = v[ENERGY_INDEX];
        f.loudness = v[ENERGY_INDEX + 1];
        f.zcr = v[ENERGY_INDEX + 2];
        Ok(f)
    }

    pub fn to_f64(&self) -> [f64; AUDIO_DIM] {
        self.to_array().map(f64::from)
    }
}

/// A per-frame acoustic feature track.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureSequence {
    pub frames: Vec<AcousticFrameFeatures>,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let data: Vec<f32> = self.frames.iter().flat_map(|f| f.to_array()).collect();
        encode_blob(VCAF_MAGIC, self.frames.len(), AUDIO_DIM, &data)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let blob = decode_blob(VCAF_MAGIC, bytes)?;
        if blob.cols != AUDIO_DIM {
            return Err(Error::format(
                "dim",
                format!("expected {AUDIO_DIM}, found {}", blob.cols),
            ));
        }
        let frames = blob
            .data
            .chunks_exact(AUDIO_DIM)
            .map(AcousticFrameFeatures::from_slice)
            .collect::<Result<_>>()?;
        Ok(Self { frames })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        format::write_file(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&format::read_file(path)?)
    }

    pub fn to_f64(&self) -> Vec<[f64; AUDIO_DIM]> {
        self.frames.iter().map(|f| f.to_f64()).collect()
    }
}

/// Full pipeline: framing, MFCC, deltas and scalar features.
pub fn extract_features(clip: &AudioClip, fps: f64) -> Result<FeatureSequence> {
    let windows = frame_audio(clip, fps)?;
    let window_len = windows.first().map_or(0, Vec::len);
    let extractor = MfccExtractor::new(clip.sample_rate, window_len);

    let cepstra: Vec<[f64; NUM_MFCC]> = windows.iter().map(|w| extractor.compute(w)).collect();
    let deltas = delta_features(&cepstra)?;

    let frames = windows
        .iter()
        .zip(cepstra.iter().zip(&deltas))
        .map(|(w, (c, d))| {
            let s = scalar_features(w);
            let mut f = AcousticFrameFeatures {
                energy: s.energy as f32,
                loudness: s.loudness as f32,
                zcr: s.zcr as f32,
                ..Default::default()
            };
            for k in 0..NUM_MFCC {
                f.mfcc[k] = c[k] as f32;
                f.mfcc_delta[k] = d[k] as f32;
                f.mfcc_delta_delta[k] = d[NUM_MFCC + k] as f32;
            }
            f
        })
        .collect();
    Ok(FeatureSequence { frames })
}
