//! Identity-preserving transforms for probing video activity classifiers.
//!
//! The generated data of a scene is modelled as a function of an identity
//! factor (the human motion, a [`bvh::MotionClip`]) and a set of nuisance
//! factors ([`types::FactorVector`]: viewpoint, appearance, background,
//! lighting). A classifier that recognises the activity should not change its
//! answer when only the nuisance factors change. This crate holds the pure,
//! allocation-only pieces needed to test that:
//!
//! * [`bvh`]: BVH motion-capture parsing and forward kinematics.
//! * [`render`]: deterministic stick-figure / point-light rendering of a clip
//!   under a [`types::FactorVector`], with ground-truth masks, and the
//!   controlled factor sweeps.
//! * [`transforms`]: image-space transforms applied uniformly over a video.
//! * [`semantic`]: foreground-only / background-only splitting by masks.
//! * [`framing`]: the length-prefixed wire framing used to talk to a model.
//! * [`metrics`]: top-k accuracy, accuracy changing rates and the reliance
//!   regimes derived from them.
//! * [`analysis`]: score curves, extrema statistics and PCA embeddings.
//! * [`mock`]: deterministic stand-in models for pipeline tests.
//!
//! IO (PNG, JSON files, sockets, child processes) lives in the `ipt-probe`
//! crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod bvh;
pub mod framing;
pub mod geom;
pub mod metrics;
pub mod mock;
pub mod render;
pub mod seed;
pub mod semantic;
pub mod transforms;
pub mod types;

pub use types::{
    Factor, FactorVector, FeatureTensor, Frame, LabelSpace, Mask, MaskSequence, ScoreVector, TypeError, Video,
};
