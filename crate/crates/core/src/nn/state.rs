use rand::Rng;

use crate::coeffs::{MotionFrame, MOTION_DIM};
use crate::error::{Error, Result};
use crate::nn::linear::Linear;
use crate::nn::tensor::{parameterized, ParamKind, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

/// Recurrent state `h_t`: hidden and cell vectors for every layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub layers: Vec<LayerState>,
}

impl DecoderState {
    pub fn zeros(layers: usize, hidden: usize) -> Self {
        Self {
            layers: (0..layers)
                .map(|_| LayerState {
                    hidden: vec![0.0; hidden],
                    cell: vec![0.0; hidden],
                })
                .collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let hidden = self.layers.first().map_or(0, |l| l.hidden.len());
        Self::zeros(self.layers.len(), hidden)
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn hidden_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.hidden.len())
    }

    pub fn top(&self) -> &[f64] {
        &self.layers.last().expect("at least one layer").hidden
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.hidden.iter().chain(&l.cell).all(|v| v.is_finite()))
    }

    pub fn add_assign(&mut self, other: &DecoderState) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.hidden.iter_mut().zip(&b.hidden).for_each(|(x, y)| *x += y);
            a.cell.iter_mut().zip(&b.cell).for_each(|(x, y)| *x += y);
        }
    }
}

/// Maps a reference frame and a conditioning label to the initial state:
/// `u = embed(e) ∥ W_r m_ref + b_r`, then per layer `h = A_l u + a_l`,
/// `c = C_l u + c_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateInit {
    pub embedding: Tensor,
    pub reference: Linear,
    pub hidden: Vec<Linear>,
    pub cell: Vec<Linear>,
}

parameterized!(StateInit {
    embedding,
    reference,
    hidden,
    cell
});

#[derive(Clone, Debug)]
pub struct InitCache {
    label: usize,
    reference: Vec<f64>,
    joint: Vec<f64>,
}

impl StateInit {
    pub fn new<R: Rng>(
        vocab: usize,
        embed: usize,
        reference_dim: usize,
        layers: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (embed.max(1) as f64).sqrt();
        let embedding = Tensor::uniform(vocab, embed, ParamKind::Embedding, bound, rng);
        let reference = Linear::new(MOTION_DIM, reference_dim, rng);
        let hidden_maps = (0..layers)
            .map(|_| Linear::new(embed + reference_dim, hidden, rng))
            .collect();
        let cell_maps = (0..layers)
            .map(|_| Linear::new(embed + reference_dim, hidden, rng))
            .collect();
        Self {
            embedding,
            reference,
            hidden: hidden_maps,
            cell: cell_maps,
        }
    }

    pub fn zeros(vocab: usize, embed: usize, reference_dim: usize, layers: usize, hidden: usize) -> Self {
        Self {
            embedding: Tensor::zeros(vocab, embed, ParamKind::Embedding),
            reference: Linear::zeros(MOTION_DIM, reference_dim),
            hidden: (0..layers)
                .map(|_| Linear::zeros(embed + reference_dim, hidden))
                .collect(),
            cell: (0..layers)
                .map(|_| Linear::zeros(embed + reference_dim, hidden))
                .collect(),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows
    }

    pub fn forward(&self, reference: &MotionFrame, label: usize) -> Result<(DecoderState, InitCache)> {
        if label >= self.vocab_size() {
            return Err(Error::Conditioning {
                vocabulary: "embedding table".into(),
                id: label,
                size: self.vocab_size(),
            });
        }
        let mut joint = self.embedding.row(label).to_vec();
        joint.extend(self.reference.forward(reference));
        let layers = self
            .hidden
            .iter()
            .zip(&self.cell)
            .map(|(h, c)| LayerState {
                hidden: h.forward(&joint),
                cell: c.forward(&joint),
            })
            .collect();
        Ok((
            DecoderState { layers },
            InitCache {
                label,
                reference: reference.to_vec(),
                joint,
            },
        ))
    }

    pub fn backward(&self, cache: &InitCache, d_state: &DecoderState, grad: &mut StateInit) {
        let mut d_joint = vec![0.0; cache.joint.len()];
        for (l, d) in d_state.layers.iter().enumerate() {
            self.hidden[l].backward(&cache.joint, &d.hidden, &mut grad.hidden[l], Some(&mut d_joint));
            self.cell[l].backward(&cache.joint, &d.cell, &mut grad.cell[l], Some(&mut d_joint));
        }
        let embed = self.embedding.cols;
        for (g, d) in grad.embedding.row_mut(cache.label).iter_mut().zip(&d_joint[..embed]) {
            *g += d;
        }
        self.reference
            .backward(&cache.reference, &d_joint[embed..], &mut grad.reference, None);
    }
}
