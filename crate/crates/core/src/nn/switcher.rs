use rand::Rng;

use crate::coeffs::Role;
use crate::nn::linear::Linear;
use crate::nn::state::{DecoderState, LayerState};
use crate::nn::tensor::parameterized;

/// Role switcher `T`: one affine map per switch direction, applied to the
/// hidden and the cell vector of every layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Switcher {
    pub listener_to_speaker: Linear,
    pub speaker_to_listener: Linear,
}

parameterized!(Switcher {
    listener_to_speaker,
    speaker_to_listener
});

impl Switcher {
    pub fn new<R: Rng>(hidden: usize, rng: &mut R) -> Self {
        Self {
            listener_to_speaker: Linear::new(hidden, hidden, rng),
            speaker_to_listener: Linear::new(hidden, hidden, rng),
        }
    }

    pub fn zeros(hidden: usize) -> Self {
        Self {
            listener_to_speaker: Linear::zeros(hidden, hidden),
            speaker_to_listener: Linear::zeros(hidden, hidden),
        }
    }

    pub fn identity(hidden: usize) -> Self {
        Self {
            listener_to_speaker: Linear::identity(hidden),
            speaker_to_listener: Linear::identity(hidden),
        }
    }

    fn map(&self, prev: Role, next: Role) -> Option<&Linear> {
        match (prev, next) {
            (Role::Listener, Role::Speaker) => Some(&self.listener_to_speaker),
            (Role::Speaker, Role::Listener) => Some(&self.speaker_to_listener),
            _ => None,
        }
    }

    fn map_grad(grad: &mut Switcher, prev: Role, next: Role) -> Option<&mut Linear> {
        match (prev, next) {
            (Role::Listener, Role::Speaker) => Some(&mut grad.listener_to_speaker),
            (Role::Speaker, Role::Listener) => Some(&mut grad.speaker_to_listener),
            _ => None,
        }
    }

    /// Accumulates switcher gradients and returns the gradient w.r.t. the
    /// state before the switch.
    pub fn backward(
        &self,
        before: &DecoderState,
        prev: Role,
        next: Role,
        d_after: &DecoderState,
        grad: &mut Switcher,
    ) -> DecoderState {
        let Some(map) = self.map(prev, next) else {
            return d_after.clone();
        };
        let g = Self::map_grad(grad, prev, next).expect("same roles as forward");
        let layers = before
            .layers
            .iter()
            .zip(&d_after.layers)
            .map(|(x, d)| {
                let mut dh = vec![0.0; x.hidden.len()];
                let mut dc = vec![0.0; x.cell.len()];
                map.backward(&x.hidden, &d.hidden, g, Some(&mut dh));
                map.backward(&x.cell, &d.cell, g, Some(&mut dc));
                LayerState { hidden: dh, cell: dc }
            })
            .collect();
        DecoderState { layers }
    }
}

/// Maps the state across a role change. Equal roles return the state untouched.
pub fn switch_role(state: &DecoderState, prev: Role, next: Role, switcher: &Switcher) -> DecoderState {
    let Some(map) = switcher.map(prev, next) else {
        return state.clone();
    };
    DecoderState {
        layers: state
            .layers
            .iter()
            .map(|l| LayerState {
                hidden: map.forward(&l.hidden),
                cell: map.forward(&l.cell),
            })
            .collect(),
    }
}
