use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use duet_core::audio::extract_features;
use duet_core::coeffs::Role;
use duet_core::nn::{decoder_step, init_state, ModelConfig, ModelParams};
use duet_core::synth::{oracle_listener, synth_speaker, SynthConfig};
use duet_core::tasks::{generate_listener, TurnInput};
use duet_core::train::{forward_backward, Example, LossWeights, Task, TrainingConfig};
use duet_core::AudioClip;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn one_second_clip() -> AudioClip {
    let sr = 16_000;
    let samples = (0..sr)
        .map(|i| {
            let t = i as f32 / sr as f32;
            0.5 * (2.0 * std::f32::consts::PI * 220.0 * t).sin() + 0.2 * (2.0 * std::f32::consts::PI * 1375.0 * t).sin()
        })
        .collect();
    AudioClip::new(samples, sr as u32).unwrap()
}

fn listener_clip(frames: usize) -> (TurnInput, Vec<duet_core::coeffs::MotionFrame>) {
    let config = SynthConfig {
        min_frames: frames,
        max_frames: frames,
        ..SynthConfig::default()
    };
    let (features, speaker) = synth_speaker(&config, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let target = oracle_listener(&features, &speaker, 0, &config).unwrap();
    let turn = TurnInput::new(&features, &speaker, 0, Role::Listener, &target.frames[0]).unwrap();
    (turn, target.to_motion())
}

fn features(c: &mut Criterion) {
    let clip = one_second_clip();
    c.bench_function("extract_features 1s 16kHz @30fps", |b| {
        b.iter(|| extract_features(black_box(&clip), 30.0).unwrap())
    });
}

fn decoding(c: &mut Criterion) {
    let params = ModelParams::new(ModelConfig::default()).unwrap();
    let branch = &params.listener;
    let state = init_state(&Default::default(), 0, &branch.init).unwrap();
    let fused = vec![0.1; params.config.fused];
    c.bench_function("decoder_step default size", |b| {
        b.iter(|| decoder_step(black_box(&state), black_box(&fused), &branch.decoder, &branch.heads).unwrap())
    });
    let (turn, _) = listener_clip(90);
    c.bench_function("generate_listener 90 frames", |b| {
        b.iter(|| generate_listener(black_box(&turn), &params).unwrap())
    });
}

fn training(c: &mut Criterion) {
    let params = ModelParams::new(ModelConfig::default()).unwrap();
    let (turn, target) = listener_clip(90);
    let example = Example::Listener { turn, target };
    let w: LossWeights = TrainingConfig::for_task(Task::Listener).loss_weights();
    c.bench_function("forward_backward listener 90 frames", |b| {
        b.iter_batched(
            || params.zeros_like(),
            |mut grad| forward_backward(&params, black_box(&example), w, 1.0, &mut grad).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, features, decoding, training);
criterion_main!(benches);
