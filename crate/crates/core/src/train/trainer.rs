use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{Conversation, Role};
use crate::error::{Error, Result};
use crate::nn::{ModelParams, Switcher};
use crate::tasks::conversation::{resolve_label, role_vocabulary};
use crate::tasks::{agent_turns, Agent, TurnInput};
use crate::train::backward::{evaluate_loss, forward_backward, Example};
use crate::train::loss::{LossParts, LossWeights};
use crate::train::optim::{clip_global_norm, learning_rate_at, AdamW, AdamWConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Listener,
    Talker,
    Agent,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "listener" => Ok(Task::Listener),
            "talker" => Ok(Task::Talker),
            "agent" => Ok(Task::Agent),
            other => Err(Error::Config(format!(
                "unknown task `{other}`, expected listener, talker or agent"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub task: Task,
    pub w1: f64,
    pub w2: f64,
    pub learning_rate: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Examples whose gradients are averaged into each update.
    pub accumulation: usize,
    pub clip_norm: f64,
    /// Keep the talker blend weights at their current values.
    pub freeze_alpha: bool,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self::for_task(Task::Listener)
    }
}

impl TrainingConfig {
    /// Defaults per task; agent fine-tuning runs shorter at a lower rate.
    pub fn for_task(task: Task) -> Self {
        let (learning_rate, epochs) = match task {
            Task::Agent => (2e-4, 50),
            _ => (2e-3, 300),
        };
        Self {
            task,
            w1: 1e-3,
            w2: 1.0,
            learning_rate,
            decay_factor: 0.5,
            decay_every: 30,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
            epochs,
            accumulation: 8,
            clip_norm: 5.0,
            freeze_alpha: false,
            seed: 0,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            w1: self.w1,
            w2: self.w2,
        }
    }

    pub fn check(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eps", self.eps),
            ("clip_norm", self.clip_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("train.{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("w1", self.w1), ("w2", self.w2), ("weight_decay", self.weight_decay)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("train.{name} must be non-negative, got {v}")));
            }
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Config(format!(
                "train.decay_factor must lie in (0, 1], got {}",
                self.decay_factor
            )));
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::Config("train.beta1 and train.beta2 must be below 1".into()));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("decay_every", self.decay_every),
            ("accumulation", self.accumulation),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("train.{name} must be positive")));
            }
        }
        Ok(())
    }

    fn adamw(&self) -> AdamWConfig {
        AdamWConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub split: String,
    pub l_gen: f64,
    pub l_mot: f64,
    pub l_total: f64,
    pub lr: f64,
}

impl MetricsRecord {
    fn new(epoch: usize, split: &str, loss: LossParts, lr: f64) -> Self {
        Self {
            epoch,
            split: split.into(),
            l_gen: loss.l_gen,
            l_mot: loss.l_mot,
            l_total: loss.l_total,
            lr,
        }
    }
}

pub fn write_metrics_jsonl(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").expect("writing to a Vec cannot fail");
    }
    crate::format::write_file(path, &out)
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss.
    pub best: ModelParams,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub last: ModelParams,
    pub metrics: Vec<MetricsRecord>,
}

fn turn_example(
    conv: &Conversation,
    config: &crate::nn::ModelConfig,
    turn: &crate::coeffs::Turn,
    role: Role,
) -> Result<Option<Example>> {
    // The participant playing `role` in this turn and its counterpart.
    let p_plays = turn.role_of_p == role;
    let (label, target, counterpart) = if p_plays {
        (Some(&turn.conditioning), &turn.coeffs_p, &turn.coeffs_q)
    } else {
        (turn.conditioning_q.as_ref(), &turn.coeffs_q, &turn.coeffs_p)
    };
    let Some(label) = label else {
        return Ok(None);
    };
    let id = resolve_label(conv, label, role_vocabulary(config, role), turn.index)?;
    let target = target.to_motion();
    let input = TurnInput::from_frames(
        turn.audio.to_f64(),
        counterpart.to_motion(),
        id,
        role,
        target[0],
        counterpart.fps,
    )?;
    Ok(Some(match role {
        Role::Listener => Example::Listener { turn: input, target },
        Role::Speaker => Example::Talker { turn: input, target },
    }))
}

/// Builds training examples for `task`. Single-turn tasks use every turn's
/// listener (or speaker) side, with that participant's first frame as the
/// reference; Q-side examples need `conditioning_q`. The agent task yields
/// one conversation per agent, Q only when all its labels are present.
pub fn task_examples(
    task: Task,
    conversations: &[Conversation],
    config: &crate::nn::ModelConfig,
) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for conv in conversations {
        match task {
            Task::Listener | Task::Talker => {
                let role = if task == Task::Listener {
                    Role::Listener
                } else {
                    Role::Speaker
                };
                for turn in &conv.turns {
                    out.extend(turn_example(conv, config, turn, role)?);
                }
            }
            Task::Agent => {
                for agent in [Agent::P, Agent::Q] {
                    if agent == Agent::Q && conv.turns.iter().any(|t| t.conditioning_q.is_none()) {
                        continue;
                    }
                    let turns = agent_turns(conv, agent, config)?;
                    let targets = conv
                        .turns
                        .iter()
                        .map(|t| match agent {
                            Agent::P => t.coeffs_p.to_motion(),
                            Agent::Q => t.coeffs_q.to_motion(),
                        })
                        .collect();
                    out.push(Example::Conversation { turns, targets });
                }
            }
        }
    }
    Ok(out)
}

/// Agent initialization: the listener branch of one checkpoint, the talker
/// of another, and an identity switcher.
pub fn agent_init(listener: &ModelParams, talker: &ModelParams) -> Result<ModelParams> {
    if listener.config != talker.config {
        let mut a = listener.config.clone();
        let mut b = talker.config.clone();
        a.seed = 0;
        b.seed = 0;
        if a != b {
            return Err(Error::Config(
                "listener and talker checkpoints have different architectures or vocabularies".into(),
            ));
        }
    }
    let mut params = listener.clone();
    params.talker = talker.talker.clone();
    params.switcher = Switcher::identity(params.config.hidden);
    Ok(params)
}

/// Mean loss over examples, evaluated in parallel.
pub fn mean_loss(params: &ModelParams, examples: &[Example], w: LossWeights) -> Result<LossParts> {
    let losses: Vec<Result<LossParts>> = examples.par_iter().map(|e| evaluate_loss(params, e, w)).collect();
    let mut total = LossParts::default();
    for l in losses {
        total.add(&l?);
    }
    Ok(total.scaled(1.0 / examples.len().max(1) as f64))
}

fn diverged(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite(what) => Error::Divergence {
            epoch,
            detail: format!("non-finite {what}"),
        },
        other => other,
    }
}

pub fn train_task(
    config: &TrainingConfig,
    init: ModelParams,
    train: &[Example],
    val: &[Example],
) -> Result<TrainOutcome> {
    train_task_with(config, init, train, val, &mut |_| {})
}

/// Trains `init` on `train`, keeping the parameters with the lowest mean
/// validation loss (training loss when `val` is empty). `observer` sees every
/// metrics record as it is produced.
pub fn train_task_with(
    config: &TrainingConfig,
    init: ModelParams,
    train: &[Example],
    val: &[Example],
    observer: &mut dyn FnMut(&MetricsRecord),
) -> Result<TrainOutcome> {
    config.check()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let w = config.loss_weights();
    let mut params = init;
    let mut opt = AdamW::new(&params, config.adamw());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let freeze_alpha = config.freeze_alpha;
    let frozen = move |name: &str| freeze_alpha && name.starts_with("talker.alpha");

    let mut metrics = Vec::new();
    let mut best = (params.clone(), 0, f64::INFINITY);
    for epoch in 0..config.epochs {
        let lr = learning_rate_at(config.learning_rate, config.decay_factor, config.decay_every, epoch);
        order.shuffle(&mut rng);
        let mut epoch_loss = LossParts::default();
        for batch in order.chunks(config.accumulation) {
            let results: Vec<Result<(ModelParams, LossParts)>> = batch
                .par_iter()
                .map(|&i| {
                    let mut grad = params.zeros_like();
                    let loss = forward_backward(&params, &train[i], w, 1.0, &mut grad)?;
                    Ok((grad, loss))
                })
                .collect();
            let mut grad = params.zeros_like();
            for r in results {
                let (g, loss) = r.map_err(|e| diverged(epoch, e))?;
                grad.add_scaled(&g, 1.0);
                epoch_loss.add(&loss);
            }
            grad.scale(1.0 / batch.len() as f64);
            if !grad.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    detail: "non-finite gradient".into(),
                });
            }
            clip_global_norm(&mut grad, config.clip_norm);
            opt.step(&mut params, &grad, lr, &frozen);
        }
        let train_loss = epoch_loss.scaled(1.0 / train.len() as f64);
        if !train_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                detail: format!("training loss {}", train_loss.l_total),
            });
        }
        let record = MetricsRecord::new(epoch, "train", train_loss, lr);
        observer(&record);
        metrics.push(record);

        let selection = if val.is_empty() {
            train_loss
        } else {
            let v = mean_loss(&params, val, w).map_err(|e| diverged(epoch, e))?;
            let record = MetricsRecord::new(epoch, "val", v, lr);
            observer(&record);
            metrics.push(record);
            v
        };
        if selection.l_total < best.2 {
            best = (params.clone(), epoch, selection.l_total);
        }
    }
    Ok(TrainOutcome {
        best: best.0,
        best_epoch: best.1,
        best_loss: best.2,
        last: params,
        metrics,
    })
}
