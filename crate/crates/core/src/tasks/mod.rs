//! Listener, talker and multi-turn conversation generation.

pub(crate) mod conversation;
mod listener;
mod talker;

pub use conversation::{agent_turns, generate_conversation, generate_conversation_with, Agent, SwitchPolicy};
pub use listener::{continue_listener, generate_listener, run_stream, StreamPass};
pub use talker::{continue_talker, encode_talker_audio, generate_talker, run_audio, run_talker, AudioPass, TalkerPass};

use crate::audio::{FeatureSequence, AUDIO_DIM};
use crate::coeffs::{CoeffSequence, DynamicCoeffs, MotionFrame, Role};
use crate::error::{Error, Result};
use crate::nn::{DecoderState, ModelParams};

pub type AudioFrame = [f64; AUDIO_DIM];

/// Everything one turn of generation consumes for one agent.
#[derive(Clone, Debug, PartialEq)]
pub struct TurnInput {
    /// Per-frame features of whoever speaks in this turn.
    pub audio: Vec<AudioFrame>,
    /// Per-frame motion of the other interlocutor.
    pub counterpart: Vec<MotionFrame>,
    pub conditioning: usize,
    pub role: Role,
    /// Conditions `init_state` and the talker's audio encoder.
    pub reference: MotionFrame,
    pub fps: f32,
}

impl TurnInput {
    pub fn new(
        audio: &FeatureSequence,
        counterpart: &CoeffSequence,
        conditioning: usize,
        role: Role,
        reference: &DynamicCoeffs,
    ) -> Result<Self> {
        Self::from_frames(
            audio.to_f64(),
            counterpart.to_motion(),
            conditioning,
            role,
            reference.to_motion(),
            counterpart.fps,
        )
    }

    pub fn from_frames(
        audio: Vec<AudioFrame>,
        counterpart: Vec<MotionFrame>,
        conditioning: usize,
        role: Role,
        reference: MotionFrame,
        fps: f32,
    ) -> Result<Self> {
        if audio.is_empty() {
            return Err(Error::InvalidInput("turn has no frames".into()));
        }
        if audio.len() != counterpart.len() {
            return Err(Error::InvalidInput(format!(
                "turn has {} audio frames but {} counterpart frames",
                audio.len(),
                counterpart.len()
            )));
        }
        Ok(Self {
            audio,
            counterpart,
            conditioning,
            role,
            reference,
            fps,
        })
    }

    pub fn len(&self) -> usize {
        self.audio.len()
    }

    pub fn is_empty(&self) -> bool {
        self.audio.is_empty()
    }

    /// The first `len` frames of every input stream.
    pub fn truncated(&self, len: usize) -> Self {
        let len = len.clamp(1, self.len());
        Self {
            audio: self.audio[..len].to_vec(),
            counterpart: self.counterpart[..len].to_vec(),
            ..self.clone()
        }
    }
}

/// Where a turn's recurrent state and first output frame come from.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Start {
    /// State initialized from the reference and label; frame 1 is the reference.
    Fresh,
    /// A state carried over from a previous turn; frame 1 is `first_frame`.
    Carried {
        state: DecoderState,
        first_frame: MotionFrame,
    },
}

fn require_role(turn: &TurnInput, role: Role) -> Result<()> {
    if turn.role != role {
        return Err(Error::InvalidInput(format!(
            "turn role is {:?}, expected {:?}",
            turn.role, role
        )));
    }
    Ok(())
}

/// Runs the branch matching `turn.role` and returns the `T` output frames and
/// the state after consuming all `T` inputs.
pub fn generate_turn(turn: &TurnInput, params: &ModelParams, start: Start) -> Result<(Vec<MotionFrame>, DecoderState)> {
    match turn.role {
        Role::Listener => {
            let pass = run_stream(&params.listener, &params.config.listener_vocabulary, turn, start)?;
            Ok((pass.frames(), pass.final_state))
        }
        Role::Speaker => {
            let pass = run_talker(params, turn, start)?;
            Ok((pass.frames, pass.stream.final_state))
        }
    }
}
