use rand::Rng;

use crate::coeffs::{MotionFrame, EXPRESSION_DIM, POSE_DIM};
use crate::nn::linear::Linear;
use crate::nn::tensor::parameterized;

/// Affine output heads for expression (64) and pose (6).
#[derive(Clone, Debug, PartialEq)]
pub struct Heads {
    pub beta: Linear,
    pub pose: Linear,
}

parameterized!(Heads { beta, pose });

impl Heads {
    pub fn new<R: Rng>(input: usize, rng: &mut R) -> Self {
        Self {
            beta: Linear::new(input, EXPRESSION_DIM, rng),
            pose: Linear::new(input, POSE_DIM, rng),
        }
    }

    pub fn zeros(input: usize) -> Self {
        Self {
            beta: Linear::zeros(input, EXPRESSION_DIM),
            pose: Linear::zeros(input, POSE_DIM),
        }
    }

    pub fn forward(&self, h: &[f64]) -> MotionFrame {
        let mut out = [0.0; EXPRESSION_DIM + POSE_DIM];
        out[..EXPRESSION_DIM].copy_from_slice(&self.beta.forward(h));
        out[EXPRESSION_DIM..].copy_from_slice(&self.pose.forward(h));
        out
    }

    pub fn backward(&self, h: &[f64], d_out: &MotionFrame, grad: &mut Heads, dh: &mut [f64]) {
        self.beta
            .backward(h, &d_out[..EXPRESSION_DIM], &mut grad.beta, Some(&mut *dh));
        self.pose
            .backward(h, &d_out[EXPRESSION_DIM..], &mut grad.pose, Some(dh));
    }
}
