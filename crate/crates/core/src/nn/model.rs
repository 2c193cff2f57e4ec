use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::AUDIO_DIM;
use crate::coeffs::{ConditioningVocabulary, MotionFrame};
use crate::error::{Error, Result};
use crate::nn::fusion::{Fusion, FusionCache};
use crate::nn::heads::Heads;
use crate::nn::lstm::{LstmStack, StepCache};
use crate::nn::state::{DecoderState, InitCache, StateInit};
use crate::nn::switcher::Switcher;
use crate::nn::tensor::{parameterized, ParamKind, Parameterized, Tensor};

/// Architecture hyperparameters plus the conditioning vocabularies and the
/// initialization seed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    pub layers: usize,
    pub fused: usize,
    pub audio_proj: usize,
    pub motion_proj: usize,
    pub embed: usize,
    pub reference: usize,
    pub listener_vocabulary: ConditioningVocabulary,
    pub talker_vocabulary: ConditioningVocabulary,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            layers: 2,
            fused: 128,
            audio_proj: 64,
            motion_proj: 64,
            embed: 16,
            reference: 16,
            listener_vocabulary: ConditioningVocabulary::attitude3(),
            talker_vocabulary: ConditioningVocabulary::dialog_act4(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Small configuration used by gradient checks: every width is 2.
    pub fn tiny(layers: usize) -> Self {
        Self {
            hidden: 2,
            layers,
            fused: 2,
            audio_proj: 2,
            motion_proj: 2,
            embed: 2,
            reference: 2,
            ..Self::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        let widths = [
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("fused", self.fused),
            ("audio_proj", self.audio_proj),
            ("motion_proj", self.motion_proj),
            ("embed", self.embed),
            ("reference", self.reference),
        ];
        for (name, v) in widths {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        for vocab in [&self.listener_vocabulary, &self.talker_vocabulary] {
            vocab.check().map_err(Error::Config)?;
        }
        Ok(())
    }
}

/// A streaming branch `G_m`: fusion, conditioned state init, recurrent
/// decoder and output heads.
#[derive(Clone, Debug, PartialEq)]
pub struct StreamBranch {
    pub fusion: Fusion,
    pub init: StateInit,
    pub decoder: LstmStack,
    pub heads: Heads,
}

parameterized!(StreamBranch {
    fusion,
    init,
    decoder,
    heads
});

#[derive(Clone, Debug)]
pub struct StreamStepCache {
    fusion: FusionCache,
    lstm: StepCache,
}

impl StreamBranch {
    fn new(cfg: &ModelConfig, vocab: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            fusion: Fusion::new(cfg.audio_proj, cfg.motion_proj, cfg.fused, rng),
            init: StateInit::new(vocab, cfg.embed, cfg.reference, cfg.layers, cfg.hidden, rng),
            decoder: LstmStack::new(cfg.fused, cfg.hidden, cfg.layers, rng),
            heads: Heads::new(cfg.hidden, rng),
        }
    }

    fn zeros(cfg: &ModelConfig, vocab: usize) -> Self {
        Self {
            fusion: Fusion::zeros(cfg.audio_proj, cfg.motion_proj, cfg.fused),
            init: StateInit::zeros(vocab, cfg.embed, cfg.reference, cfg.layers, cfg.hidden),
            decoder: LstmStack::zeros(cfg.fused, cfg.hidden, cfg.layers),
            heads: Heads::zeros(cfg.hidden),
        }
    }

    /// One streaming step: fuse the current inputs, advance the state and
    /// predict the next frame.
    pub fn step(
        &self,
        state: &DecoderState,
        audio: &[f64],
        motion: &[f64],
    ) -> Result<(DecoderState, MotionFrame, StreamStepCache)> {
        let fusion = self.fusion.forward(audio, motion)?;
        check_finite(&fusion.out, state)?;
        let (next, lstm) = self.decoder.step(state, &fusion.out);
        let out = self.heads.forward(next.top());
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("decoder output"));
        }
        Ok((next, out, StreamStepCache { fusion, lstm }))
    }

    /// Reverses [`StreamBranch::step`]. On entry `d_state` is the gradient
    /// w.r.t. the produced state (excluding the head path); on return it is
    /// the gradient w.r.t. the consumed state.
    pub fn step_backward(
        &self,
        cache: &StreamStepCache,
        d_out: &MotionFrame,
        d_state: &mut DecoderState,
        grad: &mut StreamBranch,
    ) {
        let top = d_state.layers.last_mut().expect("at least one layer");
        self.heads
            .backward(cache.lstm.top_hidden(), d_out, &mut grad.heads, &mut top.hidden);
        let d_fused = self.decoder.step_backward(&cache.lstm, d_state, &mut grad.decoder);
        self.fusion.backward(&cache.fusion, &d_fused, &mut grad.fusion);
    }
}

fn check_finite(fused: &[f64], state: &DecoderState) -> Result<()> {
    if !fused.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("decoder input"));
    }
    if !state.is_finite() {
        return Err(Error::NonFinite("decoder state"));
    }
    Ok(())
}

/// Bidirectional audio encoder of the talker. The two directions have
/// independent parameters; heads read `[h_fwd ∥ h_bwd]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioEncoder {
    pub init_fwd: StateInit,
    pub init_bwd: StateInit,
    pub fwd: LstmStack,
    pub bwd: LstmStack,
    pub heads: Heads,
}

parameterized!(AudioEncoder {
    init_fwd,
    init_bwd,
    fwd,
    bwd,
    heads
});

impl AudioEncoder {
    fn new(cfg: &ModelConfig, vocab: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            init_fwd: StateInit::new(vocab, cfg.embed, cfg.reference, cfg.layers, cfg.hidden, rng),
            init_bwd: StateInit::new(vocab, cfg.embed, cfg.reference, cfg.layers, cfg.hidden, rng),
            fwd: LstmStack::new(AUDIO_DIM, cfg.hidden, cfg.layers, rng),
            bwd: LstmStack::new(AUDIO_DIM, cfg.hidden, cfg.layers, rng),
            heads: Heads::new(2 * cfg.hidden, rng),
        }
    }

    fn zeros(cfg: &ModelConfig, vocab: usize) -> Self {
        Self {
            init_fwd: StateInit::zeros(vocab, cfg.embed, cfg.reference, cfg.layers, cfg.hidden),
            init_bwd: StateInit::zeros(vocab, cfg.embed, cfg.reference, cfg.layers, cfg.hidden),
            fwd: LstmStack::zeros(AUDIO_DIM, cfg.hidden, cfg.layers),
            bwd: LstmStack::zeros(AUDIO_DIM, cfg.hidden, cfg.layers),
            heads: Heads::zeros(2 * cfg.hidden),
        }
    }
}

/// Talker: audio encoder, listener-aware streaming branch and the two
/// scalar blend weights for expression and pose.
#[derive(Clone, Debug, PartialEq)]
pub struct TalkerNet {
    pub audio: AudioEncoder,
    pub stream: StreamBranch,
    pub alpha_beta: Tensor,
    pub alpha_pose: Tensor,
}

parameterized!(TalkerNet {
    audio,
    stream,
    alpha_beta,
    alpha_pose
});

impl TalkerNet {
    pub fn alphas(&self) -> (f64, f64) {
        (self.alpha_beta.scalar(), self.alpha_pose.scalar())
    }

    pub fn set_alphas(&mut self, beta: f64, pose: f64) {
        self.alpha_beta.data[0] = beta;
        self.alpha_pose.data[0] = pose;
    }
}

/// All trainable parameters of the generator.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub listener: StreamBranch,
    pub talker: TalkerNet,
    pub switcher: Switcher,
}

parameterized!(ModelParams {
    listener,
    talker,
    switcher
});

pub const INITIAL_ALPHA: f64 = 0.5;

impl ModelParams {
    /// Seeded uniform initialization in `±1/sqrt(fan_in)`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let lv = config.listener_vocabulary.len();
        let tv = config.talker_vocabulary.len();
        let listener = StreamBranch::new(&config, lv, &mut rng);
        let talker = TalkerNet {
            audio: AudioEncoder::new(&config, tv, &mut rng),
            stream: StreamBranch::new(&config, tv, &mut rng),
            alpha_beta: Tensor::filled(1, 1, ParamKind::Blend, INITIAL_ALPHA),
            alpha_pose: Tensor::filled(1, 1, ParamKind::Blend, INITIAL_ALPHA),
        };
        let switcher = Switcher::new(config.hidden, &mut rng);
        Ok(Self {
            config,
            listener,
            talker,
            switcher,
        })
    }

    /// Same shapes with every entry zero; also the gradient accumulator.
    pub fn zeros(config: ModelConfig) -> Self {
        let lv = config.listener_vocabulary.len();
        let tv = config.talker_vocabulary.len();
        let listener = StreamBranch::zeros(&config, lv);
        let talker = TalkerNet {
            audio: AudioEncoder::zeros(&config, tv),
            stream: StreamBranch::zeros(&config, tv),
            alpha_beta: Tensor::zeros(1, 1, ParamKind::Blend),
            alpha_pose: Tensor::zeros(1, 1, ParamKind::Blend),
        };
        let switcher = Switcher::zeros(config.hidden);
        Self {
            config,
            listener,
            talker,
            switcher,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config.clone())
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for ((_, a), (_, b)) in self.named_tensors_mut().into_iter().zip(other.named_tensors()) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += scale * y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.named_tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.named_tensors()
            .iter()
            .flat_map(|(_, t)| t.data.iter())
            .map(|v| v * v)
            .sum()
    }
}

pub(crate) fn conditioning_error(vocab: &ConditioningVocabulary, id: usize) -> Error {
    Error::Conditioning {
        vocabulary: vocab.name.clone(),
        id,
        size: vocab.len(),
    }
}

/// `h_1` from a reference frame and a conditioning label, with the
/// vocabulary name attached to conditioning errors.
pub(crate) fn init_with_vocab(
    init: &StateInit,
    vocab: &ConditioningVocabulary,
    reference: &MotionFrame,
    label: usize,
) -> Result<(DecoderState, InitCache)> {
    if label >= vocab.len() || label >= init.vocab_size() {
        return Err(conditioning_error(vocab, label));
    }
    init.forward(reference, label)
}
