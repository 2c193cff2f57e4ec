//! Seeded synthetic conversation corpus with a known speaker-to-listener
//! coupling.
//!
//! Every frame, the participant who speaks follows [`speaker_step`]: low-rank
//! latent random walks drive the expression, an energy-driven mouth pattern
//! and a dialog-act bias are added, and everything is exponentially smoothed.
//! The participant who listens follows [`listener_step`], a fixed function of
//! the speaker's previous frame. Speaker values are rounded to f32 as they are
//! produced, so the stored files reproduce the listener recursion exactly.

mod corpus;

pub use corpus::{synth_corpus, CorpusStats};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::{delta_features, AcousticFrameFeatures, FeatureSequence, LOUDNESS_EPS, NUM_MFCC};
use crate::coeffs::{CoeffSequence, ConditioningVocabulary, MotionFrame, EXPRESSION_DIM, MOTION_DIM};
use crate::error::{Error, Result};

/// Bound on every smoothing target, so `λ → 1` bounds inter-frame deltas by
/// `(1 - λ) * 2 * TARGET_BOUND`.
pub const TARGET_BOUND: f64 = 0.45;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_conversations: usize,
    pub val_conversations: usize,
    pub test_conversations: usize,
    pub turns_per_conversation: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    /// Unrecorded frames simulated before the first turn.
    pub warmup_frames: usize,
    pub fps: f32,
    /// Labels ordered positive, neutral, negative.
    pub attitude_vocabulary: ConditioningVocabulary,
    pub dialog_act_vocabulary: ConditioningVocabulary,
    pub g_pose: f64,
    pub g_exp: f64,
    pub g_energy: f64,
    /// Weight of the energy-driven mouth pattern in speaker expressions.
    pub g_mouth: f64,
    /// Weight of the listener's previous expression in speaker expressions.
    pub g_feedback: f64,
    /// Rank of the latent expression mixing.
    pub expression_rank: usize,
    pub latent_amplitude: f64,
    /// One-step autocorrelation of the latent random walks.
    pub latent_correlation: f64,
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_conversations: 40,
            val_conversations: 4,
            test_conversations: 8,
            turns_per_conversation: 4,
            min_frames: 80,
            max_frames: 100,
            warmup_frames: 30,
            fps: 30.0,
            attitude_vocabulary: ConditioningVocabulary::attitude3(),
            dialog_act_vocabulary: ConditioningVocabulary::dialog_act4(),
            g_pose: 0.3,
            g_exp: 0.5,
            g_energy: 0.4,
            g_mouth: 0.15,
            g_feedback: 0.0,
            expression_rank: 8,
            latent_amplitude: 0.3,
            latent_correlation: 0.97,
            smoothing: 0.8,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_conversations == 0 || self.turns_per_conversation == 0 {
            return bad("synth.num_conversations and synth.turns_per_conversation must be positive".into());
        }
        if self.val_conversations + self.test_conversations > self.num_conversations {
            return bad(format!(
                "synth: {} val + {} test conversations exceed the total {}",
                self.val_conversations, self.test_conversations, self.num_conversations
            ));
        }
        if self.min_frames < 2 || self.min_frames > self.max_frames {
            return bad(format!(
                "synth: frame range {}..={} must satisfy 2 <= min <= max",
                self.min_frames, self.max_frames
            ));
        }
        if !(self.smoothing > 0.0 && self.smoothing < 1.0) {
            return bad(format!("synth.smoothing must lie in (0, 1), got {}", self.smoothing));
        }
        if !(self.latent_correlation >= 0.0 && self.latent_correlation < 1.0) {
            return bad(format!(
                "synth.latent_correlation must lie in [0, 1), got {}",
                self.latent_correlation
            ));
        }
        if self.expression_rank == 0 || self.expression_rank > NUM_MFCC {
            return bad(format!("synth.expression_rank must lie in 1..={NUM_MFCC}"));
        }
        if self.fps.is_nan() || self.fps <= 0.0 {
            return bad("synth.fps must be positive".into());
        }
        if self.attitude_vocabulary.len() != 3 {
            return bad("synth.attitude_vocabulary needs exactly 3 labels (positive, neutral, negative)".into());
        }
        for v in [&self.attitude_vocabulary, &self.dialog_act_vocabulary] {
            v.check().map_err(Error::Config)?;
        }
        let gains = [
            self.g_pose,
            self.g_exp,
            self.g_energy,
            self.g_mouth,
            self.g_feedback,
            self.latent_amplitude,
        ];
        if gains.iter().any(|g| !g.is_finite()) {
            return bad("synth gains must be finite".into());
        }
        Ok(())
    }
}

/// Attitude scales of the listener's expression mirroring.
pub const ATTITUDE_SCALE: [f64; 3] = [1.0, 0.5, -1.0];
const ATTITUDE_BIAS: f64 = 0.12;
const MOUTH_DIMS: usize = 6;
const ACT_BIAS: f64 = 0.1;
const MFCC_SCALE: f64 = 3.0;
const ENERGY_CORRELATION: f64 = 0.9;
const ANGLE_AMPLITUDE: f64 = 0.25;
const TRANS_AMPLITUDE: f64 = 0.1;

/// Corpus-wide constants drawn once from the seed.
#[derive(Clone, Debug)]
pub struct SynthWorld {
    /// `64 × K`, every row with unit L1 norm.
    pub mixing: Vec<Vec<f64>>,
    pub mouth: [f64; EXPRESSION_DIM],
    pub act_bias: Vec<[f64; EXPRESSION_DIM]>,
    pub attitude_bias: [[f64; EXPRESSION_DIM]; 3],
}

impl SynthWorld {
    pub fn new(config: &SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let k = config.expression_rank;
        let mixing = (0..EXPRESSION_DIM)
            .map(|_| {
                let row: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                let l1: f64 = row.iter().map(|v: &f64| v.abs()).sum::<f64>().max(1e-12);
                row.iter().map(|v| v / l1).collect()
            })
            .collect();
        let mut mouth = [0.0; EXPRESSION_DIM];
        mouth[..MOUTH_DIMS].fill(1.0);
        let act_bias = (0..config.dialog_act_vocabulary.len())
            .map(|_| std::array::from_fn(|_| rng.random_range(-ACT_BIAS..ACT_BIAS)))
            .collect();
        let mut attitude_bias = [[0.0; EXPRESSION_DIM]; 3];
        attitude_bias[0][..16].fill(ATTITUDE_BIAS);
        attitude_bias[2][16..32].fill(-ATTITUDE_BIAS);
        Self {
            mixing,
            mouth,
            act_bias,
            attitude_bias,
        }
    }
}

fn f32_round(x: f64) -> f64 {
    x as f32 as f64
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Latent random walks of one participant's voice and head.
#[derive(Clone, Debug)]
pub struct SpeakerLatents {
    expression: Vec<f64>,
    voice: Vec<f64>,
    energy: f64,
    zcr: f64,
    pose: [f64; 6],
}

impl SpeakerLatents {
    pub fn new<R: Rng>(config: &SynthConfig, rng: &mut R) -> Self {
        let mut n = || -> f64 { StandardNormal.sample(rng) };
        Self {
            expression: (0..config.expression_rank).map(|_| n()).collect(),
            voice: (0..NUM_MFCC.saturating_sub(config.expression_rank + 6))
                .map(|_| n())
                .collect(),
            energy: n(),
            zcr: n(),
            pose: std::array::from_fn(|_| n()),
        }
    }
}

fn ou<R: Rng>(x: &mut f64, rho: f64, rng: &mut R) {
    let e: f64 = StandardNormal.sample(rng);
    *x = rho * *x + (1.0 - rho * rho).sqrt() * e;
}

/// Raw per-frame audio values before deltas: 14 cepstra, energy, zcr.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawAudio {
    pub mfcc: [f64; NUM_MFCC],
    pub energy: f64,
    pub zcr: f64,
}

/// Advances the speaker one frame. `listener_prev` feeds the optional
/// feedback term. Returns the new motion frame and the raw audio.
pub fn speaker_step<R: Rng>(
    world: &SynthWorld,
    config: &SynthConfig,
    latents: &mut SpeakerLatents,
    prev: &MotionFrame,
    listener_prev: Option<&MotionFrame>,
    act: usize,
    rng: &mut R,
) -> (MotionFrame, RawAudio) {
    let rho = config.latent_correlation;
    latents.expression.iter_mut().for_each(|z| ou(z, rho, rng));
    latents.voice.iter_mut().for_each(|z| ou(z, rho, rng));
    ou(&mut latents.energy, ENERGY_CORRELATION, rng);
    ou(&mut latents.zcr, rho, rng);
    latents.pose.iter_mut().for_each(|z| ou(z, rho, rng));

    let energy = f32_round(0.05 + 0.95 * sigmoid(2.0 * latents.energy));
    let w: Vec<f64> = latents
        .expression
        .iter()
        .map(|z| config.latent_amplitude * z.tanh())
        .collect();
    let lambda = config.smoothing;
    let mut next = [0.0; MOTION_DIM];
    for d in 0..EXPRESSION_DIM {
        let mut target: f64 = world.mixing[d].iter().zip(&w).map(|(b, x)| b * x).sum();
        target += config.g_mouth * energy * world.mouth[d] + world.act_bias[act][d];
        if let Some(l) = listener_prev {
            target += config.g_feedback * l[d];
        }
        let target = target.clamp(-TARGET_BOUND, TARGET_BOUND);
        next[d] = f32_round(lambda * prev[d] + (1.0 - lambda) * target);
    }
    for j in 0..6 {
        let amp = if j < 3 { ANGLE_AMPLITUDE } else { TRANS_AMPLITUDE };
        let target = amp * latents.pose[j].tanh();
        let d = EXPRESSION_DIM + j;
        next[d] = f32_round(lambda * prev[d] + (1.0 - lambda) * target);
    }

    let mut mfcc = [0.0; NUM_MFCC];
    let k = config.expression_rank;
    // Cepstra read the expression latents first, then the head-pose latents,
    // then free voice latents.
    for (i, m) in mfcc.iter_mut().enumerate() {
        let z = if i < k {
            latents.expression[i]
        } else if i - k < 6 {
            latents.pose[i - k]
        } else {
            latents.voice[i - k - 6]
        };
        *m = f32_round(MFCC_SCALE * z);
    }
    let audio = RawAudio {
        mfcc,
        energy,
        zcr: f32_round(sigmoid(latents.zcr)),
    };
    (next, audio)
}

/// One step of the listener oracle:
/// `l' = λ l + (1-λ) target(speaker, energy)` with
/// `β target = g_exp·scale_att·β_s + bias_att`,
/// `angle target = -g_pose·angle_s + g_energy·energy·pitch_axis`,
/// `trans target = -g_pose·trans_s`.
pub fn listener_step(
    world: &SynthWorld,
    config: &SynthConfig,
    prev: &MotionFrame,
    speaker: &MotionFrame,
    energy: f64,
    attitude: usize,
) -> MotionFrame {
    let lambda = config.smoothing;
    let mut next = [0.0; MOTION_DIM];
    for d in 0..MOTION_DIM {
        let target = if d < EXPRESSION_DIM {
            config.g_exp * ATTITUDE_SCALE[attitude] * speaker[d] + world.attitude_bias[attitude][d]
        } else {
            let pitch = if d == EXPRESSION_DIM {
                config.g_energy * energy
            } else {
                0.0
            };
            -config.g_pose * speaker[d] + pitch
        };
        next[d] = lambda * prev[d] + (1.0 - lambda) * target;
    }
    next
}

/// Turns raw per-frame audio into 45-dim features, computing deltas over
/// the whole track.
pub fn assemble_features(raw: &[RawAudio]) -> Result<FeatureSequence> {
    let cepstra: Vec<[f64; NUM_MFCC]> = raw.iter().map(|r| r.mfcc).collect();
    let deltas = delta_features(&cepstra)?;
    let frames = raw
        .iter()
        .zip(&deltas)
        .map(|(r, d)| {
            let mut f = AcousticFrameFeatures {
                energy: r.energy as f32,
                loudness: (r.energy + LOUDNESS_EPS).ln() as f32,
                zcr: r.zcr as f32,
                ..Default::default()
            };
            for k in 0..NUM_MFCC {
                f.mfcc[k] = r.mfcc[k] as f32;
                f.mfcc_delta[k] = d[k] as f32;
                f.mfcc_delta_delta[k] = d[NUM_MFCC + k] as f32;
            }
            f
        })
        .collect();
    Ok(FeatureSequence { frames })
}

/// A standalone speaker clip of a length drawn from the configured range,
/// starting from the neutral face with no listener feedback.
pub fn synth_speaker<R: Rng>(config: &SynthConfig, rng: &mut R) -> Result<(FeatureSequence, CoeffSequence)> {
    config.check()?;
    let world = SynthWorld::new(config);
    let len = rng.random_range(config.min_frames..=config.max_frames);
    let act = rng.random_range(0..config.dialog_act_vocabulary.len());
    let mut latents = SpeakerLatents::new(config, rng);
    let mut frame = [0.0; MOTION_DIM];
    let mut frames = Vec::with_capacity(len);
    let mut raw = Vec::with_capacity(len);
    for _ in 0..len {
        let (next, audio) = speaker_step(&world, config, &mut latents, &frame, None, act, rng);
        frame = next;
        frames.push(frame);
        raw.push(audio);
    }
    Ok((
        assemble_features(&raw)?,
        CoeffSequence::from_motion(&frames, config.fps),
    ))
}

/// Listener track for a speaker track, starting from `initial`. Frame 1 is
/// `initial`; frame `t+1` reacts to the speaker's frame `t` and energy `t`.
pub fn oracle_listener_from(
    initial: &MotionFrame,
    features: &FeatureSequence,
    speaker: &[MotionFrame],
    attitude: usize,
    config: &SynthConfig,
) -> Result<Vec<MotionFrame>> {
    if features.len() != speaker.len() {
        return Err(Error::InvalidInput(format!(
            "speaker has {} feature frames but {} coefficient frames",
            features.len(),
            speaker.len()
        )));
    }
    if speaker.is_empty() {
        return Err(Error::InvalidInput("speaker track is empty".into()));
    }
    if attitude >= 3 {
        return Err(Error::Conditioning {
            vocabulary: config.attitude_vocabulary.name.clone(),
            id: attitude,
            size: 3,
        });
    }
    let world = SynthWorld::new(config);
    let mut out = Vec::with_capacity(speaker.len());
    out.push(*initial);
    for t in 0..speaker.len() - 1 {
        let energy = f64::from(features.frames[t].energy);
        let next = listener_step(&world, config, &out[t], &speaker[t], energy, attitude);
        out.push(next);
    }
    Ok(out)
}

/// Listener oracle from the neutral face.
pub fn oracle_listener(
    features: &FeatureSequence,
    speaker: &CoeffSequence,
    attitude: usize,
    config: &SynthConfig,
) -> Result<CoeffSequence> {
    let track = oracle_listener_from(&[0.0; MOTION_DIM], features, &speaker.to_motion(), attitude, config)?;
    Ok(CoeffSequence::from_motion(&track, speaker.fps))
}
