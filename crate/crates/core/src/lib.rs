//! Spatial composition of 3D human motions guided by language-model body-part
//! labels.
//!
//! - [`geometry`]: 6D rotations, rotation matrices, skeleton forward kinematics.
//! - [`motion`]: motion sequences, 135-d feature packing, canonicalization, file formats.
//! - [`partlab`]: body-part taxonomy, prompts, response parsing, labeling accuracy.
//! - [`compose`]: compatibility test and body-part stitching.
//! - [`textaug`]: compositional text descriptions.
//! - [`losses`]: KL / smooth-L1 training losses with analytic gradients.
//! - [`metrics`]: APE, AVE and the embedding cosine score.
//! - [`pipeline`]: corpus loading, pair extraction, sampling and dataset export.

pub mod compose;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod motion;
pub mod partlab;
pub mod pipeline;
pub mod rng;
pub mod textaug;
