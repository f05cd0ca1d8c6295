//! Bilateral-space stereo: grid splat/blur/slice, SAD block matching,
//! quadratic refinement, stitching, and the grid-size quality sweep.

mod grid;
mod refine;
mod stereo;
mod sweep;

pub use grid::{
    bilateral_filter_1d, grid_blur, grid_dims, moving_average_1d, slice, splat, BilateralGrid,
    GridScalar,
};
pub use refine::{
    refine_disparity, system_from_grid, RefineParams, RefineSolution, RefineSystem,
};
pub use stereo::{rough_disparity, stitch_panorama, DisparityMap, StereoParams};
pub use sweep::{grid_quality_sweep, SweepPoint};
