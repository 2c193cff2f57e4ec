//! Recurrent building blocks shared by all generation tasks.

mod checkpoint;
mod fusion;
mod heads;
mod linear;
mod lstm;
mod model;
mod state;
mod switcher;
pub mod tensor;

pub use checkpoint::{Checkpoint, TensorEntry, CHECKPOINT_MAGIC};
pub use fusion::{fuse_audio_motion, Fusion, FusionCache};
pub use heads::Heads;
pub use linear::Linear;
pub use lstm::{LayerCache, LstmLayer, LstmStack, StepCache};
pub(crate) use model::init_with_vocab;
pub use model::{AudioEncoder, ModelConfig, ModelParams, StreamBranch, StreamStepCache, TalkerNet, INITIAL_ALPHA};
pub use state::{DecoderState, InitCache, LayerState, StateInit};
pub use switcher::{switch_role, Switcher};
pub use tensor::{ParamKind, Parameterized, Tensor};

use crate::coeffs::{DynamicCoeffs, EXPRESSION_DIM, POSE_DIM};
use crate::error::{Error, Result};

/// `h_1`: conditioned initial state from a reference frame and a label id.
pub fn init_state(reference: &DynamicCoeffs, label: usize, init: &StateInit) -> Result<DecoderState> {
    Ok(init.forward(&reference.to_motion(), label)?.0)
}

/// One gated recurrent update per layer followed by the expression and pose
/// heads. Depends only on `state` and `fused`.
pub fn decoder_step(
    state: &DecoderState,
    fused: &[f64],
    decoder: &LstmStack,
    heads: &Heads,
) -> Result<(DecoderState, [f64; EXPRESSION_DIM], [f64; POSE_DIM])> {
    if fused.len() != decoder.input_dim() {
        return Err(Error::Shape {
            what: "decoder input",
            expected: decoder.input_dim(),
            actual: fused.len(),
        });
    }
    if state.num_layers() != decoder.num_layers() || state.hidden_size() != decoder.hidden_size() {
        return Err(Error::Shape {
            what: "decoder state",
            expected: decoder.num_layers() * decoder.hidden_size(),
            actual: state.num_layers() * state.hidden_size(),
        });
    }
    if !fused.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("decoder input"));
    }
    if !state.is_finite() {
        return Err(Error::NonFinite("decoder state"));
    }
    let (next, _) = decoder.step(state, fused);
    let out = heads.forward(next.top());
    let mut beta = [0.0; EXPRESSION_DIM];
    let mut pose = [0.0; POSE_DIM];
    beta.copy_from_slice(&out[..EXPRESSION_DIM]);
    pose.copy_from_slice(&out[EXPRESSION_DIM..]);
    Ok((next, beta, pose))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{Role, MOTION_DIM};
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn fusion_two_unit_oracle() {
        let mut f = Fusion::zeros(1, 1, 2);
        f.audio.weight.data[0] = 1.0;
        f.motion.weight.data[0] = 2.0;
        f.joint.weight.data.copy_from_slice(&[1.0, -1.0, 0.5, 0.5]);
        f.joint.bias.data[1] = 0.1;
        let mut audio = [0.0; crate::audio::AUDIO_DIM];
        audio[0] = 0.5;
        let mut motion = [0.0; MOTION_DIM];
        motion[0] = 0.25;
        let out = fuse_audio_motion(&audio, &motion, &f).unwrap();
        assert!(close(out[0], 0.0));
        assert!(close(out[1], 0.5095465867088502));
    }

    #[test]
    fn fusion_rejects_wrong_widths() {
        let f = Fusion::zeros(1, 1, 2);
        assert!(matches!(
            fuse_audio_motion(&[0.0; 3], &[0.0; MOTION_DIM], &f),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn init_state_oracle() {
        let mut init = StateInit::zeros(3, 1, 1, 1, 2);
        init.embedding.data[1] = 0.5;
        init.reference.weight.data[0] = 2.0;
        init.hidden[0].weight.data.copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        init.hidden[0].bias.data[0] = 0.1;
        init.cell[0].weight.data.copy_from_slice(&[0.0, 1.0, 1.0, 1.0]);
        let mut reference = DynamicCoeffs::default();
        reference.beta[0] = 0.25;
        let s = init_state(&reference, 1, &init).unwrap();
        assert_eq!(s.layers[0].hidden, vec![0.6, 0.5]);
        assert_eq!(s.layers[0].cell, vec![0.5, 1.0]);
        assert!(matches!(
            init_state(&reference, 3, &init),
            Err(Error::Conditioning { .. })
        ));
    }

    #[test]
    fn decoder_step_oracle() {
        let mut lstm = LstmStack::zeros(1, 2, 1);
        let layer = &mut lstm.layers[0];
        layer
            .input
            .data
            .copy_from_slice(&[0.5, -0.5, 1.0, 0.0, 0.2, 0.3, 1.0, -1.0]);
        layer.recurrent.data[0] = 0.1;
        let mut heads = Heads::zeros(2);
        heads.beta.weight.data[..2].copy_from_slice(&[1.0, 1.0]);
        heads.pose.weight.data[10] = 2.0;
        heads.pose.bias.data[5] = 0.1;
        let state = DecoderState {
            layers: vec![LayerState {
                hidden: vec![1.0, 0.0],
                cell: vec![0.5, -0.5],
            }],
        };
        let (next, beta, pose) = decoder_step(&state, &[1.0], &lstm, &heads).unwrap();
        let c = [0.4929659095115475, -0.14001764146569143];
        let h = [0.3337774150224328, -0.03741237335284061];
        for k in 0..2 {
            assert!(close(next.layers[0].cell[k], c[k]));
            assert!(close(next.layers[0].hidden[k], h[k]));
        }
        assert!(close(beta[0], 0.2963650416695922));
        assert!(beta[1..].iter().all(|&v| v == 0.0));
        assert!(close(pose[5], 0.7675548300448656));
        assert!(pose[..5].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decoder_step_checks_inputs() {
        let lstm = LstmStack::zeros(2, 2, 1);
        let heads = Heads::zeros(2);
        let state = DecoderState::zeros(1, 2);
        assert!(matches!(
            decoder_step(&state, &[0.0], &lstm, &heads),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            decoder_step(&DecoderState::zeros(2, 2), &[0.0; 2], &lstm, &heads),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            decoder_step(&state, &[f64::NAN, 0.0], &lstm, &heads),
            Err(Error::NonFinite(_))
        ));
    }

    fn sample_state() -> DecoderState {
        DecoderState {
            layers: vec![
                LayerState {
                    hidden: vec![0.5, -1.0],
                    cell: vec![2.0, 0.0],
                },
                LayerState {
                    hidden: vec![0.0, 0.25],
                    cell: vec![-0.5, 1.5],
                },
            ],
        }
    }

    #[test]
    fn switch_within_role_is_identity() {
        let sw = Switcher::new(2, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1));
        let s = sample_state();
        for role in [Role::Listener, Role::Speaker] {
            assert_eq!(switch_role(&s, role, role, &sw), s);
        }
        let id = Switcher::identity(2);
        assert_eq!(switch_role(&s, Role::Listener, Role::Speaker, &id), s);
    }

    #[test]
    fn switch_applies_affine_map_per_direction() {
        let mut sw = Switcher::zeros(2);
        sw.listener_to_speaker
            .weight
            .data
            .copy_from_slice(&[2.0, 0.0, 0.0, 2.0]);
        sw.listener_to_speaker.bias.data.copy_from_slice(&[1.0, 1.0]);
        sw.speaker_to_listener
            .weight
            .data
            .copy_from_slice(&[0.0, 1.0, 1.0, 0.0]);
        let s = sample_state();
        let up = switch_role(&s, Role::Listener, Role::Speaker, &sw);
        let down = switch_role(&s, Role::Speaker, Role::Listener, &sw);
        for (l, layer) in s.layers.iter().enumerate() {
            for k in 0..2 {
                assert_eq!(up.layers[l].hidden[k], 2.0 * layer.hidden[k] + 1.0);
                assert_eq!(up.layers[l].cell[k], 2.0 * layer.cell[k] + 1.0);
                assert_eq!(down.layers[l].hidden[k], layer.hidden[1 - k]);
                assert_eq!(down.layers[l].cell[k], layer.cell[1 - k]);
            }
        }
    }

    #[test]
    fn construction_is_seeded() {
        let mut config = ModelConfig::tiny(2);
        config.seed = 5;
        let a = ModelParams::new(config.clone()).unwrap();
        let b = ModelParams::new(config.clone()).unwrap();
        assert_eq!(a, b);
        config.seed = 6;
        assert_ne!(a, ModelParams::new(config).unwrap());
        assert_eq!(a.talker.alphas(), (INITIAL_ALPHA, INITIAL_ALPHA));
    }

    #[test]
    fn tensor_names_are_unique() {
        let p = ModelParams::new(ModelConfig::tiny(2)).unwrap();
        let names: Vec<String> = p.named_tensors().into_iter().map(|(n, _)| n).collect();
        let unique: std::collections::BTreeSet<&String> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        assert!(names.iter().any(|n| n.starts_with("talker.alpha")));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decoder_outputs_stay_finite(
            seed in 0u64..1000,
            fused in proptest::collection::vec(-10.0f64..10.0, 2),
            hidden in proptest::collection::vec(-10.0f64..10.0, 4),
            cell in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let mut config = ModelConfig::tiny(2);
            config.seed = seed;
            let p = ModelParams::new(config).unwrap();
            let state = DecoderState {
                layers: (0..2)
                    .map(|l| LayerState {
                        hidden: hidden[2 * l..2 * l + 2].to_vec(),
                        cell: cell[2 * l..2 * l + 2].to_vec(),
                    })
                    .collect(),
            };
            let b = &p.listener;
            let (next, beta, pose) = decoder_step(&state, &fused, &b.decoder, &b.heads).unwrap();
            prop_assert!(next.is_finite());
            prop_assert!(next.top().iter().all(|h| h.abs() <= 1.0));
            prop_assert!(beta.iter().chain(&pose).all(|v| v.is_finite()));
        }

        #[test]
        fn fusion_output_is_bounded(
            seed in 0u64..1000,
            audio in proptest::collection::vec(-10.0f64..10.0, crate::audio::AUDIO_DIM),
            motion in proptest::collection::vec(-10.0f64..10.0, MOTION_DIM),
        ) {
            let mut config = ModelConfig::tiny(1);
            config.seed = seed;
            let p = ModelParams::new(config).unwrap();
            let out = fuse_audio_motion(&audio, &motion, &p.listener.fusion).unwrap();
            prop_assert!(out.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
        }
    }
}
