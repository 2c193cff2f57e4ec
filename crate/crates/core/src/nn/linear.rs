use rand::Rng;

use crate::nn::tensor::{parameterized, ParamKind, Tensor};

/// Affine map `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

parameterized!(Linear { weight, bias });

impl Linear {
    /// Uniform init in `±1/sqrt(fan_in)` for weights and bias.
    pub fn new<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Self {
            weight: Tensor::uniform(output, input, ParamKind::Weight, bound, rng),
            bias: Tensor::uniform(output, 1, ParamKind::Bias, bound, rng),
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(output, input, ParamKind::Weight),
            bias: Tensor::zeros(output, 1, ParamKind::Bias),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut l = Self::zeros(dim, dim);
        for i in 0..dim {
            l.weight.data[i * dim + i] = 1.0;
        }
        l
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.data.clone();
        self.weight.matvec_acc(x, &mut y);
        y
    }

    /// Accumulates parameter gradients into `grad` and, when given, the
    /// input gradient into `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear, dx: Option<&mut [f64]>) {
        grad.weight.outer_acc(dy, x);
        for (b, g) in grad.bias.data.iter_mut().zip(dy) {
            *b += g;
        }
        if let Some(dx) = dx {
            self.weight.matvec_t_acc(dy, dx);
        }
    }
}
