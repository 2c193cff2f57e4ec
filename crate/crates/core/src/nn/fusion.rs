use rand::Rng;

use crate::audio::AUDIO_DIM;
use crate::coeffs::MOTION_DIM;
use crate::error::{Error, Result};
use crate::nn::linear::Linear;
use crate::nn::tensor::parameterized;

/// Audio-motion fusion:
/// `tanh(W_j [tanh(W_a s + b_a) ∥ tanh(W_m m + b_m)] + b_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Fusion {
    pub audio: Linear,
    pub motion: Linear,
    pub joint: Linear,
}

parameterized!(Fusion { audio, motion, joint });

#[derive(Clone, Debug)]
pub struct FusionCache {
    audio_in: Vec<f64>,
    motion_in: Vec<f64>,
    /// `[tanh(W_a s) ∥ tanh(W_m m)]`
    hidden: Vec<f64>,
    pub out: Vec<f64>,
}

impl Fusion {
    pub fn new<R: Rng>(audio_proj: usize, motion_proj: usize, fused: usize, rng: &mut R) -> Self {
        Self {
            audio: Linear::new(AUDIO_DIM, audio_proj, rng),
            motion: Linear::new(MOTION_DIM, motion_proj, rng),
            joint: Linear::new(audio_proj + motion_proj, fused, rng),
        }
    }

    pub fn zeros(audio_proj: usize, motion_proj: usize, fused: usize) -> Self {
        Self {
            audio: Linear::zeros(AUDIO_DIM, audio_proj),
            motion: Linear::zeros(MOTION_DIM, motion_proj),
            joint: Linear::zeros(audio_proj + motion_proj, fused),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.joint.output_dim()
    }

    pub fn forward(&self, audio: &[f64], motion: &[f64]) -> Result<FusionCache> {
        if audio.len() != self.audio.input_dim() {
            return Err(Error::Shape {
                what: "fusion audio input",
                expected: self.audio.input_dim(),
                actual: audio.len(),
            });
        }
        if motion.len() != self.motion.input_dim() {
            return Err(Error::Shape {
                what: "fusion motion input",
                expected: self.motion.input_dim(),
                actual: motion.len(),
            });
        }
        let mut hidden = self.audio.forward(audio);
        hidden.extend(self.motion.forward(motion));
        hidden.iter_mut().for_each(|v| *v = v.tanh());
        let mut out = self.joint.forward(&hidden);
        out.iter_mut().for_each(|v| *v = v.tanh());
        Ok(FusionCache {
            audio_in: audio.to_vec(),
            motion_in: motion.to_vec(),
            hidden,
            out,
        })
    }

    pub fn backward(&self, cache: &FusionCache, d_out: &[f64], grad: &mut Fusion) {
        let dz: Vec<f64> = d_out.iter().zip(&cache.out).map(|(g, y)| g * (1.0 - y * y)).collect();
        let mut d_hidden = vec![0.0; cache.hidden.len()];
        self.joint
            .backward(&cache.hidden, &dz, &mut grad.joint, Some(&mut d_hidden));
        for (d, h) in d_hidden.iter_mut().zip(&cache.hidden) {
            *d *= 1.0 - h * h;
        }
        let split = self.audio.output_dim();
        self.audio
            .backward(&cache.audio_in, &d_hidden[..split], &mut grad.audio, None);
        self.motion
            .backward(&cache.motion_in, &d_hidden[split..], &mut grad.motion, None);
    }
}

/// Fuses one audio frame with one motion frame.
pub fn fuse_audio_motion(audio: &[f64], motion: &[f64], fusion: &Fusion) -> Result<Vec<f64>> {
    Ok(fusion.forward(audio, motion)?.out)
}
