//! Fixed-point MLP face authentication and its accelerator model.

mod accel;
mod fixed;
mod mlp;

pub use accel::{
    energy_estimate, mac_cycles, pe_utilization, systolic_cycles, total_macs, AcceleratorGeometry,
};
pub use fixed::{FixedFormat, SigmoidLut, LUT_ENTRIES, LUT_MAX, LUT_MIN};
pub use mlp::{
    authenticate, classification_error, forward_fixed, forward_float, train_reference, MlpModel,
    Sample,
};
