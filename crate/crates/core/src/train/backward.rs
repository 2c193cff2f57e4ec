//! Reverse-mode gradients of the three task graphs.

use crate::coeffs::{MotionFrame, Role, EXPRESSION_DIM, MOTION_DIM};
use crate::error::{Error, Result};
use crate::nn::{switch_role, AudioEncoder, DecoderState, ModelParams, StreamBranch};
use crate::tasks::{run_stream, run_talker, AudioPass, Start, StreamPass, TalkerPass, TurnInput};
use crate::train::loss::{motion_losses, motion_losses_grad, LossParts, LossWeights};

/// One training example: a single turn for the listener or talker graph, or
/// a whole conversation for the agent graph.
#[derive(Clone, Debug, PartialEq)]
pub enum Example {
    Listener {
        turn: TurnInput,
        target: Vec<MotionFrame>,
    },
    Talker {
        turn: TurnInput,
        target: Vec<MotionFrame>,
    },
    Conversation {
        turns: Vec<TurnInput>,
        targets: Vec<Vec<MotionFrame>>,
    },
}

impl Example {
    pub fn num_frames(&self) -> usize {
        match self {
            Example::Listener { turn, .. } | Example::Talker { turn, .. } => turn.len(),
            Example::Conversation { turns, .. } => turns.iter().map(TurnInput::len).sum(),
        }
    }
}

/// Backpropagates a streaming pass. `d_predictions[t]` is the gradient of
/// prediction `t`; `d_final` the gradient of the final state. Returns the
/// gradient of the initial state after folding it into the state-init
/// network when the pass started fresh.
pub fn stream_backward(
    branch: &StreamBranch,
    pass: &StreamPass,
    d_predictions: &[MotionFrame],
    d_final: Option<DecoderState>,
    grad: &mut StreamBranch,
) -> DecoderState {
    let mut d_state = d_final.unwrap_or_else(|| pass.final_state.zeros_like());
    for t in (0..pass.steps.len()).rev() {
        branch.step_backward(&pass.steps[t], &d_predictions[t], &mut d_state, grad);
    }
    if let Some(cache) = &pass.init {
        branch.init.backward(cache, &d_state, &mut grad.init);
    }
    d_state
}

pub fn audio_backward(encoder: &AudioEncoder, pass: &AudioPass, d_outputs: &[MotionFrame], grad: &mut AudioEncoder) {
    let t_len = pass.outputs.len();
    let hidden = encoder.fwd.hidden_size();
    let d_joint: Vec<Vec<f64>> = (0..t_len)
        .map(|i| {
            let mut dh = vec![0.0; 2 * hidden];
            encoder
                .heads
                .backward(&pass.joint[i], &d_outputs[i], &mut grad.heads, &mut dh);
            dh
        })
        .collect();

    let mut d_state = DecoderState::zeros(encoder.fwd.num_layers(), hidden);
    for i in (0..t_len).rev() {
        add_top(&mut d_state, &d_joint[i][..hidden]);
        encoder.fwd.step_backward(&pass.fwd[i], &mut d_state, &mut grad.fwd);
    }
    encoder.init_fwd.backward(&pass.init_fwd, &d_state, &mut grad.init_fwd);

    let mut d_state = DecoderState::zeros(encoder.fwd.num_layers(), hidden);
    for j in (0..t_len).rev() {
        add_top(&mut d_state, &d_joint[t_len - 1 - j][hidden..]);
        encoder.bwd.step_backward(&pass.bwd[j], &mut d_state, &mut grad.bwd);
    }
    encoder.init_bwd.backward(&pass.init_bwd, &d_state, &mut grad.init_bwd);
}

fn add_top(state: &mut DecoderState, d: &[f64]) {
    let top = state.layers.last_mut().expect("at least one layer");
    top.hidden.iter_mut().zip(d).for_each(|(a, b)| *a += b);
}

/// Backpropagates a talker pass given gradients of its `T` emitted frames.
/// Returns the gradient of the listener-aware branch's initial state.
pub fn talker_backward(
    params: &ModelParams,
    pass: &TalkerPass,
    d_frames: &[MotionFrame],
    d_final: Option<DecoderState>,
    grad: &mut ModelParams,
) -> DecoderState {
    let t_len = d_frames.len();
    let mut d_stream = vec![[0.0; MOTION_DIM]; t_len];
    let mut d_audio = vec![[0.0; MOTION_DIM]; t_len];
    let (mut d_alpha_beta, mut d_alpha_pose) = (0.0, 0.0);
    for k in 1..t_len {
        let (s, a) = (&pass.stream.predictions[k - 1], &pass.audio.outputs[k]);
        for d in 0..MOTION_DIM {
            let g = d_frames[k][d];
            let alpha = if d < EXPRESSION_DIM {
                d_alpha_beta += g * (s[d] - a[d]);
                pass.alpha_beta
            } else {
                d_alpha_pose += g * (s[d] - a[d]);
                pass.alpha_pose
            };
            d_stream[k - 1][d] = alpha * g;
            d_audio[k][d] = (1.0 - alpha) * g;
        }
    }
    grad.talker.alpha_beta.data[0] += d_alpha_beta;
    grad.talker.alpha_pose.data[0] += d_alpha_pose;
    audio_backward(&params.talker.audio, &pass.audio, &d_audio, &mut grad.talker.audio);
    stream_backward(
        &params.talker.stream,
        &pass.stream,
        &d_stream,
        d_final,
        &mut grad.talker.stream,
    )
}

#[allow(clippy::large_enum_variant)]
enum TurnPass {
    Listener(StreamPass),
    Talker(TalkerPass),
}

impl TurnPass {
    fn frames(&self) -> Vec<MotionFrame> {
        match self {
            TurnPass::Listener(p) => p.frames(),
            TurnPass::Talker(p) => p.frames.clone(),
        }
    }

    fn final_state(&self) -> &DecoderState {
        match self {
            TurnPass::Listener(p) => &p.final_state,
            TurnPass::Talker(p) => &p.stream.final_state,
        }
    }
}

fn run_turn(params: &ModelParams, turn: &TurnInput, start: Start) -> Result<TurnPass> {
    Ok(match turn.role {
        Role::Listener => TurnPass::Listener(run_stream(
            &params.listener,
            &params.config.listener_vocabulary,
            turn,
            start,
        )?),
        Role::Speaker => TurnPass::Talker(run_talker(params, turn, start)?),
    })
}

fn turn_backward(
    params: &ModelParams,
    pass: &TurnPass,
    d_frames: &[MotionFrame],
    d_final: Option<DecoderState>,
    grad: &mut ModelParams,
) -> DecoderState {
    match pass {
        TurnPass::Listener(p) => {
            // Frame 1 is the reference; prediction k feeds frame k+1 and the
            // last prediction is dropped.
            let mut d_pred = vec![[0.0; MOTION_DIM]; p.predictions.len()];
            d_pred[..d_frames.len() - 1].copy_from_slice(&d_frames[1..]);
            stream_backward(&params.listener, p, &d_pred, d_final, &mut grad.listener)
        }
        TurnPass::Talker(p) => talker_backward(params, p, d_frames, d_final, grad),
    }
}

/// Teacher-forced forward pass of a conversation: the state is carried
/// through the switcher and every turn after the first starts from the
/// ground-truth first frame.
fn run_conversation(
    params: &ModelParams,
    turns: &[TurnInput],
    targets: &[Vec<MotionFrame>],
) -> Result<(Vec<TurnPass>, Vec<DecoderState>)> {
    let mut passes: Vec<TurnPass> = Vec::with_capacity(turns.len());
    // Final state of turn i-1 before switching, for the switcher backward.
    let mut carried = Vec::with_capacity(turns.len());
    for (i, turn) in turns.iter().enumerate() {
        let start = match passes.last() {
            None => Start::Fresh,
            Some(prev) => {
                let before = prev.final_state().clone();
                let state = switch_role(&before, turns[i - 1].role, turn.role, &params.switcher);
                carried.push(before);
                Start::Carried {
                    state,
                    first_frame: targets[i][0],
                }
            }
        };
        passes.push(run_turn(params, turn, start)?);
    }
    Ok((passes, carried))
}

fn check_targets(turns: &[TurnInput], targets: &[Vec<MotionFrame>]) -> Result<()> {
    if turns.len() != targets.len() || turns.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} turns but {} target sequences",
            turns.len(),
            targets.len()
        )));
    }
    Ok(())
}

fn finite(loss: LossParts) -> Result<LossParts> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFinite("loss"))
    }
}

/// Forward pass only.
pub fn evaluate_loss(params: &ModelParams, example: &Example, w: LossWeights) -> Result<LossParts> {
    let loss = match example {
        Example::Listener { turn, target } => {
            let pass = run_stream(&params.listener, &params.config.listener_vocabulary, turn, Start::Fresh)?;
            motion_losses(&pass.frames(), target, w)?
        }
        Example::Talker { turn, target } => motion_losses(&run_talker(params, turn, Start::Fresh)?.frames, target, w)?,
        Example::Conversation { turns, targets } => {
            check_targets(turns, targets)?;
            let (passes, _) = run_conversation(params, turns, targets)?;
            let mut total = LossParts::default();
            for (p, target) in passes.iter().zip(targets) {
                total.add(&motion_losses(&p.frames(), target, w)?);
            }
            total
        }
    };
    finite(loss)
}

/// Accumulates `scale * dL_total/dθ` into `grad` and returns the unscaled
/// loss.
pub fn forward_backward(
    params: &ModelParams,
    example: &Example,
    w: LossWeights,
    scale: f64,
    grad: &mut ModelParams,
) -> Result<LossParts> {
    match example {
        Example::Listener { turn, target } => {
            let pass = run_stream(&params.listener, &params.config.listener_vocabulary, turn, Start::Fresh)?;
            let (loss, d_frames) = motion_losses_grad(&pass.frames(), target, w, scale)?;
            let loss = finite(loss)?;
            turn_backward(params, &TurnPass::Listener(pass), &d_frames, None, grad);
            Ok(loss)
        }
        Example::Talker { turn, target } => {
            let pass = run_talker(params, turn, Start::Fresh)?;
            let (loss, d_frames) = motion_losses_grad(&pass.frames, target, w, scale)?;
            let loss = finite(loss)?;
            talker_backward(params, &pass, &d_frames, None, grad);
            Ok(loss)
        }
        Example::Conversation { turns, targets } => {
            check_targets(turns, targets)?;
            let (passes, carried) = run_conversation(params, turns, targets)?;
            let mut total = LossParts::default();
            let mut d_frames = Vec::with_capacity(passes.len());
            for (p, target) in passes.iter().zip(targets) {
                let (loss, d) = motion_losses_grad(&p.frames(), target, w, scale)?;
                total.add(&loss);
                d_frames.push(d);
            }
            let total = finite(total)?;
            let mut d_next: Option<DecoderState> = None;
            for i in (0..passes.len()).rev() {
                let d_initial = turn_backward(params, &passes[i], &d_frames[i], d_next.take(), grad);
                if i > 0 {
                    d_next = Some(params.switcher.backward(
                        &carried[i - 1],
                        turns[i - 1].role,
                        turns[i].role,
                        &d_initial,
                        &mut grad.switcher,
                    ));
                }
            }
            Ok(total)
        }
    }
}
