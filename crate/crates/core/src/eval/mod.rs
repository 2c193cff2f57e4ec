//! FD metrics, the Random and Mirror baselines, and run reports.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{CoeffSequence, Conversation, DynamicCoeffs, Role, MOTION_DIM};
use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::tasks::conversation::{resolve_label, role_vocabulary};
use crate::tasks::{generate_listener, generate_talker, TurnInput};

/// Per-component mean-over-frames L1 distances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FdMetrics {
    pub exp_fd: f64,
    pub angle_fd: f64,
    pub trans_fd: f64,
}

/// `(1/T) Σ_t ‖x_t − x̂_t‖₁` for expression, pose angle and translation.
pub fn fd_metrics(pred: &CoeffSequence, gt: &CoeffSequence) -> Result<FdMetrics> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidInput(format!(
            "prediction has {} frames, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("cannot score empty sequences".into()));
    }
    let l1 = |a: &[f32], b: &[f32]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (f64::from(*x) - f64::from(*y)).abs())
            .sum()
    };
    let mut m = FdMetrics::default();
    for (p, g) in pred.frames.iter().zip(&gt.frames) {
        m.exp_fd += l1(&p.beta, &g.beta);
        m.angle_fd += l1(&p.pose_angle, &g.pose_angle);
        m.trans_fd += l1(&p.pose_trans, &g.pose_trans);
    }
    let t = pred.len() as f64;
    Ok(FdMetrics {
        exp_fd: m.exp_fd / t,
        angle_fd: m.angle_fd / t,
        trans_fd: m.trans_fd / t,
    })
}

pub const DEFAULT_SIGMA: f64 = 0.05;

/// Reference frame plus i.i.d. `N(0, σ²)` noise on every dimension; the first
/// frame is the unperturbed reference.
pub fn baseline_random(
    reference: &DynamicCoeffs,
    len: usize,
    sigma: f64,
    seed: u64,
    fps: f32,
) -> Result<CoeffSequence> {
    if len == 0 {
        return Err(Error::InvalidInput("random baseline needs at least one frame".into()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidInput(format!("sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = reference.to_array();
    let mut frames = vec![*reference];
    for _ in 1..len {
        let mut f = [0f32; MOTION_DIM];
        for (v, b) in f.iter_mut().zip(&base) {
            *v = (f64::from(*b) + normal.sample(&mut rng)) as f32;
        }
        frames.push(DynamicCoeffs::from_slice(&f)?);
    }
    CoeffSequence::new(frames, fps)
}

/// Predicts the listener as a verbatim copy of the speaker.
pub fn baseline_mirror(speaker: &CoeffSequence) -> CoeffSequence {
    speaker.clone()
}

#[derive(Clone, Debug, PartialEq)]
pub enum Method {
    Random {
        sigma: f64,
        seed: u64,
    },
    Mirror,
    Model(Box<ModelParams>),
    /// Scores the ground truth against itself.
    GroundTruth,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Random { .. } => "random",
            Method::Mirror => "mirror",
            Method::Model(_) => "checkpoint",
            Method::GroundTruth => "ground_truth",
        }
    }
}

/// Which side of each turn is predicted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalTarget {
    Listener,
    Talker,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipReport {
    pub clip: String,
    #[serde(flatten)]
    pub metrics: FdMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub dataset: String,
    pub target: EvalTarget,
    pub clip_count: usize,
    pub mean: FdMetrics,
    pub clips: Vec<ClipReport>,
}

impl EvalReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        crate::format::write_file(path, &bytes)
    }
}

/// One scored unit: a turn side with its inputs and ground truth.
struct Clip {
    name: String,
    gt: CoeffSequence,
    counterpart: CoeffSequence,
    input: Option<TurnInput>,
}

fn collect_clips(
    conversations: &[Conversation],
    target: EvalTarget,
    params: Option<&ModelParams>,
) -> Result<Vec<Clip>> {
    let role = match target {
        EvalTarget::Listener => Role::Listener,
        EvalTarget::Talker => Role::Speaker,
    };
    let mut clips = Vec::new();
    for conv in conversations {
        for turn in &conv.turns {
            for p_side in [true, false] {
                let plays = if p_side {
                    turn.role_of_p == role
                } else {
                    turn.role_of_p != role
                };
                if !plays {
                    continue;
                }
                let (who, gt, counterpart, label) = if p_side {
                    ("P", &turn.coeffs_p, &turn.coeffs_q, Some(&turn.conditioning))
                } else {
                    ("Q", &turn.coeffs_q, &turn.coeffs_p, turn.conditioning_q.as_ref())
                };
                let input = match params {
                    None => None,
                    Some(params) => {
                        let Some(label) = label else { continue };
                        let id = resolve_label(conv, label, role_vocabulary(&params.config, role), turn.index)?;
                        Some(TurnInput::new(&turn.audio, counterpart, id, role, &gt.frames[0])?)
                    }
                };
                clips.push(Clip {
                    name: format!("{}/turn{}/{who}", conv.name, turn.index),
                    gt: gt.clone(),
                    counterpart: counterpart.clone(),
                    input,
                });
            }
        }
    }
    Ok(clips)
}

/// Scores every turn side playing `target` across the conversations. With a
/// model, Q-side clips are included only when `conditioning_q` is present.
/// Random-baseline seeds advance by clip index.
pub fn evaluate_run(
    conversations: &[Conversation],
    method: &Method,
    target: EvalTarget,
    dataset: &str,
) -> Result<EvalReport> {
    let params = match method {
        Method::Model(p) => Some(p.as_ref()),
        _ => None,
    };
    let clips = collect_clips(conversations, target, params)?;
    if clips.is_empty() {
        return Err(Error::InvalidInput(format!("no {target:?} clips to evaluate")));
    }
    let reports: Vec<Result<ClipReport>> = clips
        .par_iter()
        .enumerate()
        .map(|(i, clip)| {
            let pred = match method {
                Method::Random { sigma, seed } => baseline_random(
                    &clip.gt.frames[0],
                    clip.gt.len(),
                    *sigma,
                    seed.wrapping_add(i as u64),
                    clip.gt.fps,
                )?,
                Method::Mirror => baseline_mirror(&clip.counterpart),
                Method::GroundTruth => clip.gt.clone(),
                Method::Model(params) => {
                    let input = clip.input.as_ref().expect("inputs built for model runs");
                    match target {
                        EvalTarget::Listener => generate_listener(input, params)?,
                        EvalTarget::Talker => generate_talker(input, params)?,
                    }
                }
            };
            Ok(ClipReport {
                clip: clip.name.clone(),
                metrics: fd_metrics(&pred, &clip.gt)?,
            })
        })
        .collect();
    let clips = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let n = clips.len() as f64;
    let mut mean = FdMetrics::default();
    for c in &clips {
        mean.exp_fd += c.metrics.exp_fd;
        mean.angle_fd += c.metrics.angle_fd;
        mean.trans_fd += c.metrics.trans_fd;
    }
    mean.exp_fd /= n;
    mean.angle_fd /= n;
    mean.trans_fd /= n;
    Ok(EvalReport {
        method: method.name().into(),
        dataset: dataset.into(),
        target,
        clip_count: clips.len(),
        mean,
        clips,
    })
}
