use rand::Rng;

use crate::nn::state::{DecoderState, LayerState};
use crate::nn::tensor::{parameterized, ParamKind, Tensor};

/// One gated recurrent layer. Gate rows are ordered input, forget, cell, output.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub input: Tensor,
    pub recurrent: Tensor,
    pub bias: Tensor,
}

parameterized!(LstmLayer { input, recurrent, bias });

#[derive(Clone, Debug, PartialEq)]
pub struct LstmStack {
    pub layers: Vec<LstmLayer>,
}

parameterized!(LstmStack { layers });

#[derive(Clone, Debug)]
pub struct LayerCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i ∥ f ∥ g ∥ o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StepCache {
    pub layers: Vec<LayerCache>,
}

impl StepCache {
    pub fn top_hidden(&self) -> &[f64] {
        &self.layers.last().expect("at least one layer").h
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmLayer {
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden.max(1) as f64).sqrt();
        Self {
            input: Tensor::uniform(4 * hidden, input, ParamKind::Weight, bound, rng),
            recurrent: Tensor::uniform(4 * hidden, hidden, ParamKind::Weight, bound, rng),
            bias: Tensor::uniform(4 * hidden, 1, ParamKind::Bias, bound, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input: Tensor::zeros(4 * hidden, input, ParamKind::Weight),
            recurrent: Tensor::zeros(4 * hidden, hidden, ParamKind::Weight),
            bias: Tensor::zeros(4 * hidden, 1, ParamKind::Bias),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.recurrent.cols
    }

    fn step(&self, prev: &LayerState, x: &[f64]) -> (LayerState, LayerCache) {
        let h = self.hidden_size();
        let mut gates = self.bias.data.clone();
        self.input.matvec_acc(x, &mut gates);
        self.recurrent.matvec_acc(&prev.hidden, &mut gates);
        for v in &mut gates[..2 * h] {
            *v = sigmoid(*v);
        }
        for v in &mut gates[2 * h..3 * h] {
            *v = v.tanh();
        }
        for v in &mut gates[3 * h..] {
            *v = sigmoid(*v);
        }
        let mut cell = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut hidden = vec![0.0; h];
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            cell[k] = f * prev.cell[k] + i * g;
            tanh_c[k] = cell[k].tanh();
            hidden[k] = o * tanh_c[k];
        }
        let cache = LayerCache {
            x: x.to_vec(),
            h_prev: prev.hidden.clone(),
            c_prev: prev.cell.clone(),
            gates,
            tanh_c,
            h: hidden.clone(),
        };
        (LayerState { hidden, cell }, cache)
    }

    /// Given gradients w.r.t. this step's new hidden and cell, accumulates
    /// parameter gradients and returns `(d_h_prev, d_c_prev, d_x)`.
    fn step_backward(
        &self,
        cache: &LayerCache,
        dh: &[f64],
        dc_next: &[f64],
        grad: &mut LstmLayer,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden_size();
        let g = &cache.gates;
        let mut da = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let tc = cache.tanh_c[k];
            let d_o = dh[k] * tc;
            let dc = dc_next[k] + dh[k] * o * (1.0 - tc * tc);
            da[k] = dc * gg * i * (1.0 - i);
            da[h + k] = dc * cache.c_prev[k] * f * (1.0 - f);
            da[2 * h + k] = dc * i * (1.0 - gg * gg);
            da[3 * h + k] = d_o * o * (1.0 - o);
            dc_prev[k] = dc * f;
        }
        grad.input.outer_acc(&da, &cache.x);
        grad.recurrent.outer_acc(&da, &cache.h_prev);
        for (b, d) in grad.bias.data.iter_mut().zip(&da) {
            *b += d;
        }
        let mut dx = vec![0.0; cache.x.len()];
        self.input.matvec_t_acc(&da, &mut dx);
        let mut dh_prev = vec![0.0; h];
        self.recurrent.matvec_t_acc(&da, &mut dh_prev);
        (dh_prev, dc_prev, dx)
    }
}

impl LstmStack {
    pub fn new<R: Rng>(input: usize, hidden: usize, layers: usize, rng: &mut R) -> Self {
        Self {
            layers: (0..layers)
                .map(|l| LstmLayer::new(if l == 0 { input } else { hidden }, hidden, rng))
                .collect(),
        }
    }

    pub fn zeros(input: usize, hidden: usize, layers: usize) -> Self {
        Self {
            layers: (0..layers)
                .map(|l| LstmLayer::zeros(if l == 0 { input } else { hidden }, hidden))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input.cols
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden_size()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn step(&self, state: &DecoderState, x: &[f64]) -> (DecoderState, StepCache) {
        let mut input = x.to_vec();
        let mut next = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        for (layer, prev) in self.layers.iter().zip(&state.layers) {
            let (s, c) = layer.step(prev, &input);
            input = s.hidden.clone();
            next.push(s);
            caches.push(c);
        }
        (DecoderState { layers: next }, StepCache { layers: caches })
    }

    /// Backpropagates one step. `d_state` holds gradients w.r.t. the state
    /// this step produced; it is replaced by gradients w.r.t. the state the
    /// step consumed. Returns the gradient w.r.t. the step input.
    pub fn step_backward(&self, cache: &StepCache, d_state: &mut DecoderState, grad: &mut LstmStack) -> Vec<f64> {
        let mut d_from_above: Option<Vec<f64>> = None;
        for l in (0..self.layers.len()).rev() {
            let ls = &mut d_state.layers[l];
            if let Some(d) = d_from_above.take() {
                ls.hidden.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
            }
            let (dh_prev, dc_prev, dx) =
                self.layers[l].step_backward(&cache.layers[l], &ls.hidden, &ls.cell, &mut grad.layers[l]);
            ls.hidden = dh_prev;
            ls.cell = dc_prev;
            d_from_above = Some(dx);
        }
        d_from_above.expect("at least one layer")
    }
}
