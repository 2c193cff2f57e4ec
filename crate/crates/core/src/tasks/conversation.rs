use crate::coeffs::{CoeffSequence, ConditioningLabel, ConditioningVocabulary, Conversation, MotionFrame, Role};
use crate::error::{Error, Result};
use crate::nn::{init_with_vocab, switch_role, DecoderState, ModelConfig, ModelParams};
use crate::tasks::{generate_turn, Start, TurnInput};

/// Which interlocutor the agent plays.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Agent {
    P,
    Q,
}

impl std::str::FromStr for Agent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P" | "p" => Ok(Agent::P),
            "Q" | "q" => Ok(Agent::Q),
            other => Err(Error::InvalidInput(format!("unknown agent `{other}`, expected P or Q"))),
        }
    }
}

/// How the state crosses a turn boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwitchPolicy {
    /// Carry the final state through the role switcher.
    Carry,
    /// Re-initialize from the conversation reference at every turn.
    Reset,
}

pub(crate) fn role_vocabulary(config: &ModelConfig, role: Role) -> &ConditioningVocabulary {
    match role {
        Role::Listener => &config.listener_vocabulary,
        Role::Speaker => &config.talker_vocabulary,
    }
}

pub(crate) fn resolve_label(
    conv: &Conversation,
    label: &ConditioningLabel,
    expected: &ConditioningVocabulary,
    turn: u32,
) -> Result<usize> {
    let declared = conv.manifest.vocabulary(&label.vocabulary).ok_or_else(|| {
        Error::Config(format!(
            "turn {turn}: vocabulary `{}` is not declared",
            label.vocabulary
        ))
    })?;
    if declared != expected {
        return Err(Error::Config(format!(
            "turn {turn}: manifest vocabulary `{}` {:?} does not match model vocabulary `{}` {:?}",
            declared.name, declared.labels, expected.name, expected.labels
        )));
    }
    Ok(label.label_id)
}

/// Builds the per-turn inputs of `agent`. The reference of every turn is the
/// agent's ground-truth first frame of the first turn.
pub fn agent_turns(conv: &Conversation, agent: Agent, config: &ModelConfig) -> Result<Vec<TurnInput>> {
    let first = conv
        .turns
        .first()
        .ok_or_else(|| Error::InvalidInput(format!("conversation {} has no turns", conv.name)))?;
    let reference = match agent {
        Agent::P => first.coeffs_p.frames[0].to_motion(),
        Agent::Q => first.coeffs_q.frames[0].to_motion(),
    };
    conv.turns
        .iter()
        .map(|t| {
            let (role, label, counterpart) = match agent {
                Agent::P => (t.role_of_p, Some(&t.conditioning), &t.coeffs_q),
                Agent::Q => (t.role_of_p.other(), t.conditioning_q.as_ref(), &t.coeffs_p),
            };
            let label = label
                .ok_or_else(|| Error::InvalidInput(format!("turn {} has no conditioning for agent Q", t.index)))?;
            let id = resolve_label(conv, label, role_vocabulary(config, role), t.index)?;
            TurnInput::from_frames(
                t.audio.to_f64(),
                counterpart.to_motion(),
                id,
                role,
                reference,
                counterpart.fps,
            )
        })
        .collect()
}

/// Agent generation over a loaded conversation with the carried state.
pub fn generate_conversation(conv: &Conversation, agent: Agent, params: &ModelParams) -> Result<Vec<CoeffSequence>> {
    let turns = agent_turns(conv, agent, &params.config)?;
    generate_conversation_with(&turns, params, SwitchPolicy::Carry)
}

/// Chains turns: the first starts fresh; every later turn starts from the
/// last emitted frame of the previous one, with the state either switched
/// or re-initialized.
pub fn generate_conversation_with(
    turns: &[TurnInput],
    params: &ModelParams,
    policy: SwitchPolicy,
) -> Result<Vec<CoeffSequence>> {
    let mut out = Vec::with_capacity(turns.len());
    let mut carried: Option<(DecoderState, Role, MotionFrame)> = None;
    for turn in turns {
        let start = match carried.take() {
            None => Start::Fresh,
            Some((state, prev_role, first_frame)) => {
                let state = match policy {
                    SwitchPolicy::Carry => switch_role(&state, prev_role, turn.role, &params.switcher),
                    SwitchPolicy::Reset => reset_state(turn, params)?,
                };
                Start::Carried { state, first_frame }
            }
        };
        let (frames, final_state) = generate_turn(turn, params, start)?;
        let last = *frames.last().expect("turns are non-empty");
        out.push(CoeffSequence::from_motion(&frames, turn.fps));
        carried = Some((final_state, turn.role, last));
    }
    Ok(out)
}

fn reset_state(turn: &TurnInput, params: &ModelParams) -> Result<DecoderState> {
    let init = match turn.role {
        Role::Listener => &params.listener.init,
        Role::Speaker => &params.talker.stream.init,
    };
    let vocab = role_vocabulary(&params.config, turn.role);
    Ok(init_with_vocab(init, vocab, &turn.reference, turn.conditioning)?.0)
}
