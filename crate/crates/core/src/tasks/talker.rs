use crate::audio::FeatureSequence;
use crate::coeffs::{
    CoeffSequence, ConditioningVocabulary, DynamicCoeffs, MotionFrame, Role, EXPRESSION_DIM, MOTION_DIM, POSE_DIM,
};
use crate::error::{Error, Result};
use crate::nn::{init_with_vocab, AudioEncoder, DecoderState, InitCache, ModelParams, StepCache};
use crate::tasks::listener::{run_stream, StreamPass};
use crate::tasks::{require_role, AudioFrame, Start, TurnInput};

/// Forward pass of the bidirectional audio encoder.
#[derive(Clone, Debug)]
pub struct AudioPass {
    /// One head output per audio frame.
    pub outputs: Vec<MotionFrame>,
    pub(crate) init_fwd: InitCache,
    pub(crate) init_bwd: InitCache,
    pub(crate) fwd: Vec<StepCache>,
    /// In processing order: `bwd[j]` consumed frame `T-1-j`.
    pub(crate) bwd: Vec<StepCache>,
    pub(crate) joint: Vec<Vec<f64>>,
}

pub fn run_audio(
    encoder: &AudioEncoder,
    vocab: &ConditioningVocabulary,
    audio: &[AudioFrame],
    reference: &MotionFrame,
    label: usize,
) -> Result<AudioPass> {
    if audio.is_empty() {
        return Err(Error::InvalidInput("audio sequence is empty".into()));
    }
    if !audio.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("audio features"));
    }
    let (mut state, init_fwd) = init_with_vocab(&encoder.init_fwd, vocab, reference, label)?;
    let mut fwd = Vec::with_capacity(audio.len());
    for s in audio {
        let (next, cache) = encoder.fwd.step(&state, s);
        state = next;
        fwd.push(cache);
    }
    let (mut state, init_bwd) = init_with_vocab(&encoder.init_bwd, vocab, reference, label)?;
    let mut bwd = Vec::with_capacity(audio.len());
    for s in audio.iter().rev() {
        let (next, cache) = encoder.bwd.step(&state, s);
        state = next;
        bwd.push(cache);
    }
    let t = audio.len();
    let joint: Vec<Vec<f64>> = (0..t)
        .map(|i| {
            let mut v = fwd[i].top_hidden().to_vec();
            v.extend_from_slice(bwd[t - 1 - i].top_hidden());
            v
        })
        .collect();
    let outputs: Vec<MotionFrame> = joint.iter().map(|h| encoder.heads.forward(h)).collect();
    if !outputs.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("audio encoder output"));
    }
    Ok(AudioPass {
        outputs,
        init_fwd,
        init_bwd,
        fwd,
        bwd,
        joint,
    })
}

/// Per-frame expression and pose predicted from audio alone.
pub type AudioTracks = (Vec<[f64; EXPRESSION_DIM]>, Vec<[f64; POSE_DIM]>);

/// Batched audio-driven expression and pose of the talker, one frame per input frame.
pub fn encode_talker_audio(
    audio: &FeatureSequence,
    label: usize,
    reference: &DynamicCoeffs,
    params: &ModelParams,
) -> Result<AudioTracks> {
    let pass = run_audio(
        &params.talker.audio,
        &params.config.talker_vocabulary,
        &audio.to_f64(),
        &reference.to_motion(),
        label,
    )?;
    Ok(pass
        .outputs
        .iter()
        .map(|m| {
            let mut beta = [0.0; EXPRESSION_DIM];
            let mut pose = [0.0; POSE_DIM];
            beta.copy_from_slice(&m[..EXPRESSION_DIM]);
            pose.copy_from_slice(&m[EXPRESSION_DIM..]);
            (beta, pose)
        })
        .unzip())
}

#[derive(Clone, Debug)]
pub struct TalkerPass {
    pub stream: StreamPass,
    pub audio: AudioPass,
    pub alpha_beta: f64,
    pub alpha_pose: f64,
    /// The `T` emitted frames.
    pub frames: Vec<MotionFrame>,
}

/// Blends frame `k >= 1` as `α·listener_aware[k-1] + (1-α)·audio[k]`
/// with separate weights for expression and pose.
pub fn run_talker(params: &ModelParams, turn: &TurnInput, start: Start) -> Result<TalkerPass> {
    let vocab = &params.config.talker_vocabulary;
    let talker = &params.talker;
    let stream = run_stream(&talker.stream, vocab, turn, start)?;
    let audio = run_audio(&talker.audio, vocab, &turn.audio, &turn.reference, turn.conditioning)?;
    let (alpha_beta, alpha_pose) = talker.alphas();
    let mut frames = Vec::with_capacity(turn.len());
    frames.push(stream.first_frame);
    for k in 1..turn.len() {
        let (s, a) = (&stream.predictions[k - 1], &audio.outputs[k]);
        let mut f = [0.0; MOTION_DIM];
        for d in 0..MOTION_DIM {
            let alpha = if d < EXPRESSION_DIM { alpha_beta } else { alpha_pose };
            f[d] = alpha * s[d] + (1.0 - alpha) * a[d];
        }
        frames.push(f);
    }
    Ok(TalkerPass {
        stream,
        audio,
        alpha_beta,
        alpha_pose,
        frames,
    })
}

/// Expressive talker: audio branch plus listener-aware streaming branch,
/// blended by the trainable weights.
pub fn generate_talker(turn: &TurnInput, params: &ModelParams) -> Result<CoeffSequence> {
    Ok(continue_talker(turn, params, Start::Fresh)?.0)
}

pub fn continue_talker(turn: &TurnInput, params: &ModelParams, start: Start) -> Result<(CoeffSequence, DecoderState)> {
    require_role(turn, Role::Speaker)?;
    let pass = run_talker(params, turn, start)?;
    Ok((
        CoeffSequence::from_motion(&pass.frames, turn.fps),
        pass.stream.final_state,
    ))
}
