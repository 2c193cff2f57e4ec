use crate::coeffs::{CoeffSequence, ConditioningVocabulary, MotionFrame, Role};
use crate::error::{Error, Result};
use crate::nn::{init_with_vocab, DecoderState, InitCache, ModelParams, StreamBranch, StreamStepCache};
use crate::tasks::{require_role, Start, TurnInput};

/// Forward pass of a streaming branch over one turn, with the caches that
/// backpropagation needs.
#[derive(Clone, Debug)]
pub struct StreamPass {
    pub first_frame: MotionFrame,
    /// One prediction per consumed input: frames `2..=T+1`.
    pub predictions: Vec<MotionFrame>,
    pub initial_state: DecoderState,
    pub final_state: DecoderState,
    pub(crate) init: Option<InitCache>,
    pub(crate) steps: Vec<StreamStepCache>,
}

impl StreamPass {
    /// The `T` emitted frames; the prediction for frame `T+1` is dropped.
    pub fn frames(&self) -> Vec<MotionFrame> {
        let t = self.predictions.len();
        std::iter::once(self.first_frame)
            .chain(self.predictions[..t - 1].iter().copied())
            .collect()
    }
}

pub fn run_stream(
    branch: &StreamBranch,
    vocab: &ConditioningVocabulary,
    turn: &TurnInput,
    start: Start,
) -> Result<StreamPass> {
    let (initial_state, first_frame, init) = match start {
        Start::Fresh => {
            let (state, cache) = init_with_vocab(&branch.init, vocab, &turn.reference, turn.conditioning)?;
            (state, turn.reference, Some(cache))
        }
        Start::Carried { state, first_frame } => {
            let (layers, hidden) = (branch.decoder.num_layers(), branch.decoder.hidden_size());
            if state.num_layers() != layers || state.hidden_size() != hidden {
                return Err(Error::Shape {
                    what: "carried decoder state",
                    expected: layers * hidden,
                    actual: state.num_layers() * state.hidden_size(),
                });
            }
            (state, first_frame, None)
        }
    };
    let mut state = initial_state.clone();
    let mut predictions = Vec::with_capacity(turn.len());
    let mut steps = Vec::with_capacity(turn.len());
    for (audio, motion) in turn.audio.iter().zip(&turn.counterpart) {
        let (next, out, cache) = branch.step(&state, audio, motion)?;
        state = next;
        predictions.push(out);
        steps.push(cache);
    }
    Ok(StreamPass {
        first_frame,
        predictions,
        initial_state,
        final_state: state,
        init,
        steps,
    })
}

/// Responsive listener: streams the speaker's audio and motion, conditioned
/// on an attitude. Output length equals the turn length.
pub fn generate_listener(turn: &TurnInput, params: &ModelParams) -> Result<CoeffSequence> {
    Ok(continue_listener(turn, params, Start::Fresh)?.0)
}

/// Like [`generate_listener`] but with an explicit start; also returns the
/// final state for chaining turns.
pub fn continue_listener(
    turn: &TurnInput,
    params: &ModelParams,
    start: Start,
) -> Result<(CoeffSequence, DecoderState)> {
    require_role(turn, Role::Listener)?;
    let pass = run_stream(&params.listener, &params.config.listener_vocabulary, turn, start)?;
    Ok((CoeffSequence::from_motion(&pass.frames(), turn.fps), pass.final_state))
}
