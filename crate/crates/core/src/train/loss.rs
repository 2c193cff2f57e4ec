use serde::{Deserialize, Serialize};

use crate::coeffs::{CoeffSequence, MotionFrame, EXPRESSION_DIM, MOTION_DIM};
use crate::error::{Error, Result};

/// Weights of the motion-constraint terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w1: f64,
    pub w2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { w1: 1e-3, w2: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub l_gen: f64,
    pub l_mot: f64,
    pub l_total: f64,
}

impl LossParts {
    fn new(l_gen: f64, l_mot: f64) -> Self {
        Self {
            l_gen,
            l_mot,
            l_total: l_gen + l_mot,
        }
    }

    pub fn add(&mut self, other: &LossParts) {
        self.l_gen += other.l_gen;
        self.l_mot += other.l_mot;
        self.l_total += other.l_total;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            l_gen: self.l_gen * s,
            l_mot: self.l_mot * s,
            l_total: self.l_total * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_gen.is_finite() && self.l_mot.is_finite() && self.l_total.is_finite()
    }
}

fn check_pair(pred: &[MotionFrame], gt: &[MotionFrame]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidInput(format!(
            "prediction has {} frames, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "losses need at least 2 frames, got {}",
            pred.len()
        )));
    }
    Ok(())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Adds `scale * r / ‖r‖` into `out`; the subgradient at `r = 0` is 0.
fn add_unit(r: &[f64], scale: f64, out: &mut [f64]) {
    let n = norm(r);
    if n > 0.0 {
        for (o, x) in out.iter_mut().zip(r) {
            *o += scale * x / n;
        }
    }
}

/// Splits a frame residual into expression and pose parts.
fn parts(r: &MotionFrame) -> (&[f64], &[f64]) {
    r.split_at(EXPRESSION_DIM)
}

fn residual(a: &MotionFrame, b: &MotionFrame) -> MotionFrame {
    std::array::from_fn(|d| a[d] - b[d])
}

fn motion_residual(pred: &[MotionFrame], gt: &[MotionFrame], t: usize) -> MotionFrame {
    std::array::from_fn(|d| (pred[t][d] - pred[t - 1][d]) - (gt[t][d] - gt[t - 1][d]))
}

/// Loss values over frames `2..=T`; frame 1 is never a prediction.
pub fn motion_losses(pred: &[MotionFrame], gt: &[MotionFrame], w: LossWeights) -> Result<LossParts> {
    check_pair(pred, gt)?;
    let mut l_gen = 0.0;
    let mut l_mot = 0.0;
    for t in 1..pred.len() {
        let r = residual(&pred[t], &gt[t]);
        let (rb, rp) = parts(&r);
        l_gen += norm(rb) + norm(rp);
        let u = motion_residual(pred, gt, t);
        let (ub, up) = parts(&u);
        l_mot += w.w1 * norm(ub) + w.w2 * norm(up);
    }
    Ok(LossParts::new(l_gen, l_mot))
}

/// Loss values and `scale * dL_total/dpred` for every frame.
pub fn motion_losses_grad(
    pred: &[MotionFrame],
    gt: &[MotionFrame],
    w: LossWeights,
    scale: f64,
) -> Result<(LossParts, Vec<MotionFrame>)> {
    let loss = motion_losses(pred, gt, w)?;
    let mut grad = vec![[0.0; MOTION_DIM]; pred.len()];
    for t in 1..pred.len() {
        let r = residual(&pred[t], &gt[t]);
        let (rb, rp) = parts(&r);
        {
            let (gb, gp) = grad[t].split_at_mut(EXPRESSION_DIM);
            add_unit(rb, scale, gb);
            add_unit(rp, scale, gp);
        }
        let u = motion_residual(pred, gt, t);
        let (ub, up) = parts(&u);
        let mut du = [0.0; MOTION_DIM];
        {
            let (db, dp) = du.split_at_mut(EXPRESSION_DIM);
            add_unit(ub, scale * w.w1, db);
            add_unit(up, scale * w.w2, dp);
        }
        for d in 0..MOTION_DIM {
            grad[t][d] += du[d];
            grad[t - 1][d] -= du[d];
        }
    }
    Ok((loss, grad))
}

/// `Σ_{t=2..T} ‖β_t − β̂_t‖₂ + ‖p_t − p̂_t‖₂`.
pub fn loss_gen(pred: &CoeffSequence, gt: &CoeffSequence) -> Result<f64> {
    Ok(motion_losses(&pred.to_motion(), &gt.to_motion(), LossWeights::default())?.l_gen)
}

/// `Σ_{t=2..T} w1‖μ(β_t) − μ(β̂_t)‖₂ + w2‖μ(p_t) − μ(p̂_t)‖₂` with `μ` the
/// inter-frame difference.
pub fn loss_mot(pred: &CoeffSequence, gt: &CoeffSequence, w1: f64, w2: f64) -> Result<f64> {
    Ok(motion_losses(&pred.to_motion(), &gt.to_motion(), LossWeights { w1, w2 })?.l_mot)
}

pub fn loss_total(pred: &CoeffSequence, gt: &CoeffSequence, w: LossWeights) -> Result<f64> {
    Ok(motion_losses(&pred.to_motion(), &gt.to_motion(), w)?.l_total)
}
