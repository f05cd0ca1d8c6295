//! In-camera vision pipeline blocks and the computation-communication cost
//! model that decides what runs at the camera and where to cut for offload.
//!
//! Two pipelines are covered end to end:
//!
//! - **Face authentication**: motion gating and Viola-Jones cascade
//!   detection ([`facefilter`]) in front of a fixed-point MLP with a LUT
//!   sigmoid and a systolic accelerator cycle model ([`nnauth`]).
//! - **Stereo depth for VR video**: bilateral-grid splat/blur/slice,
//!   SAD block matching, bilateral-space quadratic refinement, and
//!   panorama stitching ([`bssa`]).
//!
//! [`costmodel`] evaluates chains of such blocks — energy per source frame,
//! worst-case throughput, and exhaustive feasibility over placements and
//! offload cuts. [`metrics`] scores outputs (MS-SSIM, confusion rates),
//! [`imgio`] keeps file handling bit-exact, and [`synthetic`] generates the
//! deterministic fixtures everything is tested against.

pub mod bssa;
pub mod costmodel;
pub mod error;
pub mod facefilter;
pub mod imgio;
pub mod metrics;
pub mod nnauth;
pub mod synthetic;

pub use error::{Error, Result};
pub use imgio::{GrayImage, RgbImage};

/// Loads and validates an MLP model document.
pub fn load_mlp_json(bytes: &[u8]) -> Result<nnauth::MlpModel> {
    nnauth::MlpModel::from_json(bytes)
}

/// Loads and validates a cascade model document.
pub fn load_cascade_json(bytes: &[u8]) -> Result<facefilter::CascadeModel> {
    facefilter::CascadeModel::from_json(bytes)
}
