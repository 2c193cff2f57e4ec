mod common;

use common::{causality_deviation, max_abs_diff, random_motion, random_turn};
use duet_core::coeffs::{CoeffSequence, MotionFrame, Role, EXPRESSION_DIM};
use duet_core::nn::{switch_role, ModelConfig, ModelParams};
use duet_core::tasks::{
    continue_listener, continue_talker, generate_conversation_with, generate_listener, generate_talker, generate_turn,
    run_audio, run_stream, run_talker, Start, SwitchPolicy,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params(layers: usize, seed: u64) -> ModelParams {
    let mut config = ModelConfig::tiny(layers);
    config.seed = seed;
    ModelParams::new(config).unwrap()
}

fn motion(seq: &CoeffSequence) -> Vec<MotionFrame> {
    seq.to_motion()
}

fn as_f32(frames: &[MotionFrame]) -> Vec<MotionFrame> {
    frames.iter().map(|f| f.map(|v| f64::from(v as f32))).collect()
}

#[test]
fn single_frame_turn_returns_reference() {
    let p = params(2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for role in [Role::Listener, Role::Speaker] {
        let turn = random_turn(&mut rng, role, 1, 3);
        let (frames, _) = generate_turn(&turn, &p, Start::Fresh).unwrap();
        assert_eq!(frames, vec![turn.reference]);
    }
}

#[test]
fn zero_parameters_emit_zero_motion() {
    let p = ModelParams::zeros(ModelConfig::tiny(2));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for role in [Role::Listener, Role::Speaker] {
        let turn = random_turn(&mut rng, role, 6, 3);
        let (frames, state) = generate_turn(&turn, &p, Start::Fresh).unwrap();
        assert_eq!(frames[0], turn.reference);
        assert!(frames[1..].iter().flatten().all(|&v| v == 0.0));
        assert!(state
            .layers
            .iter()
            .all(|l| l.hidden.iter().chain(&l.cell).all(|&v| v == 0.0)));
    }
}

#[test]
fn blend_weight_limits_select_one_branch() {
    let mut p = params(1, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let turn = random_turn(&mut rng, Role::Speaker, 7, 4);
    let vocab = p.config.talker_vocabulary.clone();
    let stream = run_stream(&p.talker.stream, &vocab, &turn, Start::Fresh).unwrap();
    let audio = run_audio(&p.talker.audio, &vocab, &turn.audio, &turn.reference, turn.conditioning).unwrap();

    p.talker.set_alphas(1.0, 1.0);
    assert_eq!(run_talker(&p, &turn, Start::Fresh).unwrap().frames, stream.frames());

    p.talker.set_alphas(0.0, 0.0);
    let frames = run_talker(&p, &turn, Start::Fresh).unwrap().frames;
    assert_eq!(frames[0], turn.reference);
    assert_eq!(&frames[1..], &audio.outputs[1..]);

    p.talker.set_alphas(1.0, 0.0);
    let frames = run_talker(&p, &turn, Start::Fresh).unwrap().frames;
    let expected = stream.frames();
    for k in 1..turn.len() {
        assert_eq!(frames[k][..EXPRESSION_DIM], expected[k][..EXPRESSION_DIM]);
        assert_eq!(frames[k][EXPRESSION_DIM..], audio.outputs[k][EXPRESSION_DIM..]);
    }
}

#[test]
fn blend_is_affine_in_the_weights() {
    let mut p = params(2, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let turn = random_turn(&mut rng, Role::Speaker, 5, 4);
    p.talker.set_alphas(1.0, 1.0);
    let s = run_talker(&p, &turn, Start::Fresh).unwrap().frames;
    p.talker.set_alphas(0.0, 0.0);
    let a = run_talker(&p, &turn, Start::Fresh).unwrap().frames;
    p.talker.set_alphas(0.25, 0.75);
    let mixed = run_talker(&p, &turn, Start::Fresh).unwrap().frames;
    for k in 1..turn.len() {
        for d in 0..mixed[k].len() {
            let w = if d < EXPRESSION_DIM { 0.25 } else { 0.75 };
            assert!((mixed[k][d] - (w * s[k][d] + (1.0 - w) * a[k][d])).abs() < 1e-12);
        }
    }
}

#[test]
fn role_entry_points_check_the_role() {
    let p = params(1, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let listener = random_turn(&mut rng, Role::Listener, 3, 3);
    let speaker = random_turn(&mut rng, Role::Speaker, 3, 4);
    assert!(generate_talker(&listener, &p).is_err());
    assert!(generate_listener(&speaker, &p).is_err());
    assert!(continue_listener(&speaker, &p, Start::Fresh).is_err());
    assert!(continue_talker(&listener, &p, Start::Fresh).is_err());
}

#[test]
fn out_of_vocabulary_label_is_rejected() {
    let p = params(1, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut turn = random_turn(&mut rng, Role::Listener, 3, 3);
    turn.conditioning = 3;
    assert!(generate_listener(&turn, &p).is_err());
}

#[test]
fn conversation_is_composition_of_turns() {
    let p = params(2, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let reference = random_motion(&mut rng, 0.5);
    let mut turns = Vec::new();
    for (i, role) in [Role::Speaker, Role::Listener, Role::Speaker, Role::Speaker]
        .into_iter()
        .enumerate()
    {
        let labels = if role == Role::Listener { 3 } else { 4 };
        let mut t = random_turn(&mut rng, role, 4 + i, labels);
        t.reference = reference;
        turns.push(t);
    }
    let out = generate_conversation_with(&turns, &p, SwitchPolicy::Carry).unwrap();

    let mut expected = Vec::new();
    let mut start = Start::Fresh;
    let mut prev_role = turns[0].role;
    for t in &turns {
        if let Start::Carried { state, first_frame } = start {
            start = Start::Carried {
                state: switch_role(&state, prev_role, t.role, &p.switcher),
                first_frame,
            };
        }
        let (frames, state) = generate_turn(t, &p, start).unwrap();
        start = Start::Carried {
            state,
            first_frame: *frames.last().unwrap(),
        };
        prev_role = t.role;
        expected.push(frames);
    }
    assert_eq!(out.len(), turns.len());
    for (o, e) in out.iter().zip(&expected) {
        assert_eq!(motion(o), as_f32(e));
    }
    for w in out.windows(2) {
        assert_eq!(w[1].frames[0], *w[0].frames.last().unwrap());
    }
}

#[test]
fn reset_policy_reinitializes_each_turn() {
    let p = params(1, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let reference = random_motion(&mut rng, 0.5);
    let mut turns = vec![
        random_turn(&mut rng, Role::Listener, 5, 3),
        random_turn(&mut rng, Role::Speaker, 5, 4),
    ];
    turns.iter_mut().for_each(|t| t.reference = reference);
    let out = generate_conversation_with(&turns, &p, SwitchPolicy::Reset).unwrap();
    let (first, _) = generate_turn(&turns[0], &p, Start::Fresh).unwrap();
    let (fresh, _) = generate_turn(&turns[1], &p, Start::Fresh).unwrap();
    assert_eq!(motion(&out[0]), as_f32(&first));
    // same state as a fresh start; only frame 1 is the carried anchor
    let second = motion(&out[1]);
    assert_eq!(second[0], as_f32(&[*first.last().unwrap()])[0]);
    assert_eq!(&second[1..], &as_f32(&fresh)[1..]);
}

#[test]
fn carried_state_must_match_decoder_shape() {
    let p = params(2, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let turn = random_turn(&mut rng, Role::Listener, 3, 3);
    let start = Start::Carried {
        state: duet_core::DecoderState::zeros(1, 2),
        first_frame: turn.reference,
    };
    assert!(generate_turn(&turn, &p, start).is_err());
}

#[test]
fn streaming_branches_are_causal() {
    let p = params(2, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let turn = random_turn(&mut rng, Role::Listener, 12, 3);
        let cut = rand::Rng::random_range(&mut rng, 1..12);
        assert_eq!(
            causality_deviation(&p.listener, &p.config.listener_vocabulary, &turn, cut, &mut rng),
            0.0
        );
        let turn = random_turn(&mut rng, Role::Speaker, 12, 4);
        assert_eq!(
            causality_deviation(&p.talker.stream, &p.config.talker_vocabulary, &turn, cut, &mut rng),
            0.0
        );
    }
}

#[test]
fn audio_encoder_sees_the_whole_clip() {
    let p = params(1, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let turn = random_turn(&mut rng, Role::Speaker, 8, 4);
    let vocab = &p.config.talker_vocabulary;
    let full = run_audio(&p.talker.audio, vocab, &turn.audio, &turn.reference, 0).unwrap();
    let mut changed = turn.audio.clone();
    changed[7] = common::random_audio(&mut rng, 3.0);
    let other = run_audio(&p.talker.audio, vocab, &changed, &turn.reference, 0).unwrap();
    assert!(max_abs_diff(&full.outputs[..1], &other.outputs[..1]) > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn output_length_and_anchor(seed in 0u64..10_000, len in 1usize..12, speaker in any::<bool>()) {
        let p = params(1 + (seed % 2) as usize, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let role = if speaker { Role::Speaker } else { Role::Listener };
        let turn = random_turn(&mut rng, role, len, 3);
        let (frames, state) = generate_turn(&turn, &p, Start::Fresh).unwrap();
        prop_assert_eq!(frames.len(), len);
        prop_assert_eq!(frames[0], turn.reference);
        prop_assert!(state.is_finite());
        let anchor = random_motion(&mut rng, 0.5);
        let (carried, _) = generate_turn(&turn, &p, Start::Carried { state, first_frame: anchor }).unwrap();
        prop_assert_eq!(carried[0], anchor);
    }

    #[test]
    fn generation_is_deterministic(seed in 0u64..10_000) {
        let p = params(2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let turn = random_turn(&mut rng, Role::Speaker, 6, 4);
        let a = generate_turn(&turn, &p, Start::Fresh).unwrap();
        let b = generate_turn(&turn, &p, Start::Fresh).unwrap();
        prop_assert_eq!(a, b);
    }
}
