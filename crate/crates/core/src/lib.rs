//! Generator-side pipeline for conversational head synthesis.
//!
//! The crate turns speaker audio and counterpart motion into 3DMM motion
//! coefficient sequences for a listening head, a talking head, or a single
//! agent that alternates between the two roles over a multi-turn
//! conversation. Rendering is out of scope: everything here lives in
//! coefficient space.
//!
//! Module map:
//!
//! - [`audio`]: 45-dim per-video-frame acoustic features and the VCAF file format.
//! - [`coeffs`]: coefficient data model, VCOF files and conversation manifests.
//! - [`nn`]: fusion, state initialization, recurrent decoding, role switching.
//! - [`tasks`]: listener, talker and conversation generation.
//! - [`train`]: losses, backpropagation, AdamW and the training loops.
//! - [`eval`]: FD metrics, Random/Mirror baselines and run reports.
//! - [`synth`]: the seeded synthetic conversation corpus.

pub mod audio;
pub mod coeffs;
pub mod error;
pub mod eval;
pub mod format;
pub mod nn;
pub mod synth;
pub mod tasks;
pub mod train;

pub use audio::{AcousticFrameFeatures, AudioClip, FeatureSequence, AUDIO_DIM};
pub use coeffs::{CoeffSequence, ConditioningVocabulary, DynamicCoeffs, IdentityCoeffs, MOTION_DIM};
pub use error::{Error, Result};
pub use nn::{DecoderState, ModelConfig, ModelParams};
