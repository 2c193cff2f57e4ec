use rand::Rng;
use serde::{Deserialize, Serialize};

/// How the optimizer treats a parameter tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Weight,
    Bias,
    Embedding,
    /// Scalar blend weights of the talker's two branches.
    Blend,
}

impl ParamKind {
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::Weight)
    }
}

/// Row-major dense parameter matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub kind: ParamKind,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize, kind: ParamKind) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            kind,
        }
    }

    pub fn filled(rows: usize, cols: usize, kind: ParamKind, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
            kind,
        }
    }

    pub fn uniform<R: Rng>(rows: usize, cols: usize, kind: ParamKind, bound: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect();
        Self { rows, cols, data, kind }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.rows, self.cols, self.kind)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn scalar(&self) -> f64 {
        self.data[0]
    }

    /// `y += W x`
    pub fn matvec_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (yr, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *yr += dot(row, x);
        }
    }

    /// `dx += W^T dy`
    pub fn matvec_t_acc(&self, dy: &[f64], dx: &mut [f64]) {
        for (&g, row) in dy.iter().zip(self.data.chunks_exact(self.cols)) {
            if g != 0.0 {
                axpy(g, row, dx);
            }
        }
    }

    /// `W += dy x^T`
    pub fn outer_acc(&mut self, dy: &[f64], x: &[f64]) {
        for (&g, row) in dy.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if g != 0.0 {
                axpy(g, x, row);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Anything that owns named parameter tensors.
pub trait Parameterized {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>);
    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>);

    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.collect("", &mut out);
        out
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        self.collect_mut("", &mut out);
        out
    }

    fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.data.len()).sum()
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl Parameterized for Tensor {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((prefix.to_string(), self));
    }
    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((prefix.to_string(), self));
    }
}

impl<T: Parameterized> Parameterized for Vec<T> {
    fn collect<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        for (i, item) in self.iter().enumerate() {
            item.collect(&join(prefix, &i.to_string()), out);
        }
    }
    fn collect_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        for (i, item) in self.iter_mut().enumerate() {
            item.collect_mut(&join(prefix, &i.to_string()), out);
        }
    }
}

macro_rules! parameterized {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::nn::tensor::Parameterized for $ty {
            fn collect<'a>(
                &'a self,
                prefix: &str,
                out: &mut Vec<(String, &'a $crate::nn::tensor::Tensor)>,
            ) {
                $( self.$field.collect(&$crate::nn::tensor::join(prefix, stringify!($field)), out); )*
            }
            fn collect_mut<'a>(
                &'a mut self,
                prefix: &str,
                out: &mut Vec<(String, &'a mut $crate::nn::tensor::Tensor)>,
            ) {
                $( self.$field.collect_mut(&$crate::nn::tensor::join(prefix, stringify!($field)), out); )*
            }
        }
    };
}
pub(crate) use parameterized;
