//! 3DMM coefficient data model.
//!
//! A full reconstruction vector is laid out as
//! `alpha (identity) ∥ beta (expression) ∥ delta (texture) ∥ pose ∥ gamma (lighting)`.
//! Only the dynamic part `m = (beta, pose)` is ever generated.

pub mod manifest;

use std::f32::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{self, decode_blob, encode_blob};

pub use manifest::{
    discover_manifests, load_conversations, validate_manifest_file, ConditioningLabel, ConditioningVocabulary,
    Conversation, ConversationManifest, Participant, Role, Rule, Turn, TurnEntry, Violation,
};

pub const EXPRESSION_DIM: usize = 64;
pub const POSE_DIM: usize = 6;
pub const MOTION_DIM: usize = EXPRESSION_DIM + POSE_DIM;
pub const VCOF_MAGIC: &[u8; 4] = b"VCOF";
pub const DEFAULT_FPS: f32 = 30.0;

/// One frame of motion as the model sees it: `beta[64] ∥ angle[3] ∥ trans[3]`.
pub type MotionFrame = [f64; MOTION_DIM];

/// Sizes of the five coefficient groups in a full reconstruction vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoeffLayout {
    pub identity: usize,
    pub expression: usize,
    pub texture: usize,
    pub pose: usize,
    pub lighting: usize,
}

impl Default for CoeffLayout {
    fn default() -> Self {
        Self {
            identity: 80,
            expression: EXPRESSION_DIM,
            texture: 80,
            pose: POSE_DIM,
            lighting: 27,
        }
    }
}

impl CoeffLayout {
    pub fn total(&self) -> usize {
        self.identity + self.expression + self.texture + self.pose + self.lighting
    }

    /// The identity groups may vary in size; the dynamic groups are fixed by
    /// the generators' output heads.
    pub fn check(&self) -> Result<()> {
        if self.expression != EXPRESSION_DIM || self.pose != POSE_DIM {
            return Err(Error::Layout(format!(
                "expression/pose sizes must be {EXPRESSION_DIM}/{POSE_DIM}, got {}/{}",
                self.expression, self.pose
            )));
        }
        Ok(())
    }
}

/// Identity-dependent coefficients `(alpha, delta, gamma)`; carried, never predicted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCoeffs {
    pub alpha: Vec<f32>,
    pub delta: Vec<f32>,
    pub gamma: Vec<f32>,
}

impl IdentityCoeffs {
    pub fn zeros(layout: &CoeffLayout) -> Self {
        Self {
            alpha: vec![0.0; layout.identity],
            delta: vec![0.0; layout.texture],
            gamma: vec![0.0; layout.lighting],
        }
    }

    pub fn matches(&self, layout: &CoeffLayout) -> bool {
        self.alpha.len() == layout.identity && self.delta.len() == layout.texture && self.gamma.len() == layout.lighting
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = format::read_file(path)?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        format::write_file(path, &serde_json::to_vec(self)?)
    }
}

/// Identity-independent motion `m = (beta, pose_angle, pose_trans)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicCoeffs {
    pub beta: [f32; EXPRESSION_DIM],
    pub pose_angle: [f32; 3],
    pub pose_trans: [f32; 3],
}

impl Default for DynamicCoeffs {
    fn default() -> Self {
        Self {
            beta: [0.0; EXPRESSION_DIM],
            pose_angle: [0.0; 3],
            pose_trans: [0.0; 3],
        }
    }
}

impl DynamicCoeffs {
    pub fn to_array(&self) -> [f32; MOTION_DIM] {
        let mut out = [0.0; MOTION_DIM];
        out[..EXPRESSION_DIM].copy_from_slice(&self.beta);
        out[EXPRESSION_DIM..EXPRESSION_DIM + 3].copy_from_slice(&self.pose_angle);
        out[EXPRESSION_DIM + 3..].copy_from_slice(&self.pose_trans);
        out
    }

    pub fn from_slice(v: &[f32]) -> Result<Self> {
        if v.len() != MOTION_DIM {
            return Err(Error::Shape {
                what: "dynamic coefficients",
                expected: MOTION_DIM,
                actual: v.len(),
            });
        }
        let mut m = Self::default();
        m.beta.copy_from_slice(&v[..EXPRESSION_DIM]);
        m.pose_angle.copy_from_slice(&v[EXPRESSION_DIM..EXPRESSION_DIM + 3]);
        m.pose_trans.copy_from_slice(&v[EXPRESSION_DIM + 3..]);
        Ok(m)
    }

    pub fn to_motion(&self) -> MotionFrame {
        self.to_array().map(f64::from)
    }

    pub fn from_motion(m: &MotionFrame) -> Self {
        let v = m.map(|x| x as f32);
        Self::from_slice(&v).expect("fixed size")
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Wraps every rotation angle into `[-pi, pi]`.
    pub fn canonicalized(mut self) -> Self {
        for a in &mut self.pose_angle {
            if a.is_finite() && !(-PI..=PI).contains(a) {
                *a = (*a + PI).rem_euclid(2.0 * PI) - PI;
            }
        }
        self
    }
}

/// Splits a full reconstruction vector into identity and dynamic parts.
pub fn split_coeffs(full: &[f32], layout: &CoeffLayout) -> Result<(IdentityCoeffs, DynamicCoeffs)> {
    layout.check()?;
    if full.len() != layout.total() {
        return Err(Error::Layout(format!(
            "expected {} values, got {}",
            layout.total(),
            full.len()
        )));
    }
    let (alpha, rest) = full.split_at(layout.identity);
    let (beta, rest) = rest.split_at(layout.expression);
    let (delta, rest) = rest.split_at(layout.texture);
    let (pose, gamma) = rest.split_at(layout.pose);
    let mut dynamic = DynamicCoeffs::default();
    dynamic.beta.copy_from_slice(beta);
    dynamic.pose_angle.copy_from_slice(&pose[..3]);
    dynamic.pose_trans.copy_from_slice(&pose[3..]);
    Ok((
        IdentityCoeffs {
            alpha: alpha.to_vec(),
            delta: delta.to_vec(),
            gamma: gamma.to_vec(),
        },
        dynamic,
    ))
}

/// Inverse of [`split_coeffs`].
pub fn concat_coeffs(identity: &IdentityCoeffs, dynamic: &DynamicCoeffs) -> Vec<f32> {
    let mut out = Vec::with_capacity(identity.alpha.len() + identity.delta.len() + identity.gamma.len() + MOTION_DIM);
    out.extend_from_slice(&identity.alpha);
    out.extend_from_slice(&dynamic.beta);
    out.extend_from_slice(&identity.delta);
    out.extend_from_slice(&dynamic.pose_angle);
    out.extend_from_slice(&dynamic.pose_trans);
    out.extend_from_slice(&identity.gamma);
    out
}

/// A motion track at a fixed frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffSequence {
    pub frames: Vec<DynamicCoeffs>,
    pub fps: f32,
}

impl CoeffSequence {
    pub fn new(frames: Vec<DynamicCoeffs>, fps: f32) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidInput("coefficient sequence is empty".into()));
        }
        Ok(Self { frames, fps })
    }

    /// Builds a sequence from model output, wrapping angles into `[-pi, pi]`.
    pub fn from_motion(frames: &[MotionFrame], fps: f32) -> Self {
        Self {
            frames: frames
                .iter()
                .map(|m| DynamicCoeffs::from_motion(m).canonicalized())
                .collect(),
            fps,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn to_motion(&self) -> Vec<MotionFrame> {
        self.frames.iter().map(DynamicCoeffs::to_motion).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let data: Vec<f32> = self.frames.iter().flat_map(|f| f.to_array()).collect();
        encode_blob(VCOF_MAGIC, self.frames.len(), MOTION_DIM, &data)
    }

    /// Decodes VCOF bytes. The format carries no frame rate, so the caller
    /// supplies it.
    pub fn from_bytes(bytes: &[u8], fps: f32) -> Result<Self> {
        let blob = decode_blob(VCOF_MAGIC, bytes)?;
        if blob.cols != MOTION_DIM {
            return Err(Error::format(
                "dim",
                format!("expected {MOTION_DIM}, found {}", blob.cols),
            ));
        }
        if blob.rows == 0 {
            return Err(Error::format("frames", "sequence has zero frames"));
        }
        let frames = blob
            .data
            .chunks_exact(MOTION_DIM)
            .map(DynamicCoeffs::from_slice)
            .collect::<Result<_>>()?;
        Ok(Self { frames, fps })
    }
}

pub fn save_sequence(path: &Path, seq: &CoeffSequence) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::InvalidInput("refusing to save an empty sequence".into()));
    }
    format::write_file(path, &seq.to_bytes())
}

pub fn load_sequence(path: &Path, fps: f32) -> Result<CoeffSequence> {
    CoeffSequence::from_bytes(&format::read_file(path)?, fps)
}
