//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use duet_core::coeffs::{MotionFrame, Role, MOTION_DIM};
use duet_core::nn::{ModelParams, Parameterized};
use duet_core::tasks::{AudioFrame, TurnInput};
use duet_core::train::{evaluate_loss, forward_backward, Example, LossWeights};
use duet_core::AUDIO_DIM;
use rand::Rng;

pub fn random_motion<R: Rng>(rng: &mut R, scale: f64) -> MotionFrame {
    std::array::from_fn(|_| rng.random_range(-scale..scale))
}

pub fn random_audio<R: Rng>(rng: &mut R, scale: f64) -> AudioFrame {
    std::array::from_fn(|_| rng.random_range(-scale..scale))
}

pub fn random_track<R: Rng>(rng: &mut R, len: usize, scale: f64) -> Vec<MotionFrame> {
    (0..len).map(|_| random_motion(rng, scale)).collect()
}

pub fn random_turn<R: Rng>(rng: &mut R, role: Role, len: usize, labels: usize) -> TurnInput {
    TurnInput::from_frames(
        (0..len).map(|_| random_audio(rng, 1.0)).collect(),
        random_track(rng, len, 0.5),
        rng.random_range(0..labels),
        role,
        random_motion(rng, 0.5),
        30.0,
    )
    .unwrap()
}

/// Roles alternate starting from `first`.
pub fn random_conversation<R: Rng>(
    rng: &mut R,
    params: &ModelParams,
    first: Role,
    turns: usize,
    len: usize,
) -> Example {
    let reference = random_motion(rng, 0.5);
    let mut role = first;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..turns {
        let labels = match role {
            Role::Listener => params.config.listener_vocabulary.len(),
            Role::Speaker => params.config.talker_vocabulary.len(),
        };
        let mut turn = random_turn(rng, role, len, labels);
        turn.reference = reference;
        inputs.push(turn);
        targets.push(random_track(rng, len, 0.5));
        role = role.other();
    }
    Example::Conversation { turns: inputs, targets }
}

pub struct GradReport {
    pub max_rel: f64,
    pub worst: String,
    pub checked: usize,
}

/// Relative error `|a - n| / max(|a|, |n|, floor)`; the floor keeps
/// entries whose true gradient is near zero from dominating.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Compares every analytic gradient entry against central differences.
pub fn gradient_check(params: &ModelParams, example: &Example, w: LossWeights, step: f64) -> GradReport {
    let mut grad = params.zeros_like();
    forward_backward(params, example, w, 1.0, &mut grad).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grad
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.data.clone()))
        .collect();
    let mut probe = params.clone();
    let mut report = GradReport {
        max_rel: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for (ti, (name, values)) in analytic.iter().enumerate() {
        for (i, &a) in values.iter().enumerate() {
            let original = probe.named_tensors()[ti].1.data[i];
            probe.named_tensors_mut()[ti].1.data[i] = original + step;
            let up = evaluate_loss(&probe, example, w).unwrap().l_total;
            probe.named_tensors_mut()[ti].1.data[i] = original - step;
            let down = evaluate_loss(&probe, example, w).unwrap().l_total;
            probe.named_tensors_mut()[ti].1.data[i] = original;
            let numeric = (up - down) / (2.0 * step);
            let rel = relative_error(a, numeric);
            report.checked += 1;
            if rel > report.max_rel {
                report.max_rel = rel;
                report.worst = format!("{name}[{i}] analytic {a:e} numeric {numeric:e}");
            }
        }
    }
    report
}

pub struct DspReport {
    pub signals: usize,
    pub frames: usize,
    pub max_err: f64,
    pub worst: String,
}

#[derive(serde::Deserialize)]
struct DspReference {
    signals: Vec<DspSignal>,
}

#[derive(serde::Deserialize)]
struct DspSignal {
    name: String,
    wav: String,
    sample_rate: u32,
    fps: f64,
    frames: Vec<Vec<f64>>,
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dsp")
}

/// Largest absolute deviation between extracted features and the frozen
/// numpy/scipy reference over all fixture signals.
pub fn dsp_conformance() -> DspReport {
    use duet_core::audio::{extract_features, read_wav};
    let dir = fixture_dir();
    let text = std::fs::read_to_string(dir.join("reference.json")).unwrap();
    let reference: DspReference = serde_json::from_str(&text).unwrap();
    let mut report = DspReport {
        signals: 0,
        frames: 0,
        max_err: 0.0,
        worst: String::new(),
    };
    for sig in &reference.signals {
        let clip = read_wav(&dir.join(&sig.wav)).unwrap();
        assert_eq!(clip.sample_rate, sig.sample_rate, "{}", sig.name);
        let feats = extract_features(&clip, sig.fps).unwrap();
        assert_eq!(feats.len(), sig.frames.len(), "{}: frame count", sig.name);
        for (t, (got, want)) in feats.frames.iter().zip(&sig.frames).enumerate() {
            assert_eq!(want.len(), AUDIO_DIM);
            for (d, (g, w)) in got.to_array().iter().zip(want).enumerate() {
                let err = (f64::from(*g) - w).abs();
                if err > report.max_err {
                    report.max_err = err;
                    report.worst = format!("{} frame {t} dim {d}: {g} vs {w}", sig.name);
                }
            }
        }
        report.signals += 1;
        report.frames += sig.frames.len();
    }
    report
}

pub fn max_abs_diff(a: &[MotionFrame], b: &[MotionFrame]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

/// Deviation of the first `cut` frames of a streaming branch when the
/// inputs after `cut` are dropped, and separately when they are replaced
/// by noise. Both must be exactly zero for a causal branch.
pub fn causality_deviation<R: Rng>(
    branch: &duet_core::nn::StreamBranch,
    vocab: &duet_core::coeffs::ConditioningVocabulary,
    turn: &TurnInput,
    cut: usize,
    rng: &mut R,
) -> f64 {
    use duet_core::tasks::{run_stream, Start};
    let full = run_stream(branch, vocab, turn, Start::Fresh).unwrap().frames();
    let short = run_stream(branch, vocab, &turn.truncated(cut), Start::Fresh)
        .unwrap()
        .frames();
    let mut noisy = turn.clone();
    for t in cut..turn.len() {
        noisy.audio[t] = random_audio(rng, 3.0);
        noisy.counterpart[t] = random_motion(rng, 1.0);
    }
    let perturbed = run_stream(branch, vocab, &noisy, Start::Fresh).unwrap().frames();
    // frame `cut + 1` depends on input `cut` only, so it may be compared too
    let keep = (cut + 1).min(turn.len());
    max_abs_diff(&full[..cut], &short).max(max_abs_diff(&full[..keep], &perturbed[..keep]))
}

fn random_f32<R: Rng>(rng: &mut R, finite: bool) -> f32 {
    loop {
        let v = match rng.random_range(0..4) {
            0 => f32::from_bits(rng.random()),
            1 => rng.random_range(-1.0f32..1.0),
            2 => [0.0, -0.0, f32::MIN_POSITIVE, f32::MAX, f32::MIN, 1e-42][rng.random_range(0..6)],
            _ => rng.random_range(-1e6f32..1e6),
        };
        if !finite || v.is_finite() {
            return v;
        }
    }
}

fn bits_equal(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Round-trips `payloads` random VCAF blobs, VCOF blobs and checkpoints,
/// checking bit-exact values and byte-exact re-encoding. Returns the first
/// failure.
pub fn serialization_round_trips(payloads: usize, seed: u64) -> Result<(), String> {
    use duet_core::coeffs::CoeffSequence;
    use duet_core::nn::{Checkpoint, ModelConfig};
    use duet_core::{AcousticFrameFeatures, DynamicCoeffs, FeatureSequence};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for i in 0..payloads {
        let frames = rng.random_range(1..40);
        let audio: Vec<f32> = (0..frames * AUDIO_DIM).map(|_| random_f32(&mut rng, false)).collect();
        let seq = FeatureSequence {
            frames: audio
                .chunks(AUDIO_DIM)
                .map(|c| AcousticFrameFeatures::from_slice(c).unwrap())
                .collect(),
        };
        let bytes = seq.to_bytes();
        let back = FeatureSequence::from_bytes(&bytes).map_err(|e| format!("VCAF {i}: {e}"))?;
        let flat: Vec<f32> = back.frames.iter().flat_map(|f| f.to_array()).collect();
        if !bits_equal(&flat, &audio) || back.to_bytes() != bytes {
            return Err(format!("VCAF payload {i} changed"));
        }

        let motion: Vec<f32> = (0..frames * MOTION_DIM).map(|_| random_f32(&mut rng, false)).collect();
        let coeffs = CoeffSequence::new(
            motion
                .chunks(MOTION_DIM)
                .map(|c| DynamicCoeffs::from_slice(c).unwrap())
                .collect(),
            rng.random_range(1.0f32..60.0),
        )
        .unwrap();
        let bytes = coeffs.to_bytes();
        let back = CoeffSequence::from_bytes(&bytes, coeffs.fps).map_err(|e| format!("VCOF {i}: {e}"))?;
        let flat: Vec<f32> = back.frames.iter().flat_map(|f| f.to_array()).collect();
        if !bits_equal(&flat, &motion) || back.to_bytes() != bytes {
            return Err(format!("VCOF payload {i} changed"));
        }

        let mut config = ModelConfig::tiny(rng.random_range(1..3));
        config.hidden = rng.random_range(1..4);
        config.seed = rng.random();
        let mut params = ModelParams::new(config).unwrap();
        for (_, t) in params.named_tensors_mut() {
            t.data
                .iter_mut()
                .for_each(|v| *v = f64::from(random_f32(&mut rng, true)));
        }
        let mut ck = Checkpoint::new(params);
        ck.metadata.insert("epoch".into(), rng.random_range(0..1000u32).into());
        ck.metadata
            .insert("loss".into(), serde_json::json!(rng.random::<f64>()));
        ck.metadata.insert("note".into(), format!("payload {i}").into());
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).map_err(|e| format!("checkpoint {i}: {e}"))?;
        if back != ck || back.to_bytes() != bytes {
            return Err(format!("checkpoint payload {i} changed"));
        }
    }
    Ok(())
}
