//! Grid-size versus quality sweep for the stereo refinement path.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::imgio::GrayImage;
use crate::metrics::{ms_ssim, MsSsimParams};

use super::grid::grid_dims;
use super::refine::{refine_disparity, RefineParams};
use super::stereo::{rough_disparity, DisparityMap, StereoParams};

/// One sweep measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Pixels per grid vertex, applied to all three grid dimensions.
    pub size: f64,
    /// Similarity of this size's depth map to the finest size's.
    pub ms_ssim: f64,
    pub vertex_count: usize,
    /// Wall time of the splat/solve/slice stage.
    pub refine_ms: f64,
}

fn depth_at_size(
    left: &GrayImage,
    right: &GrayImage,
    params: &StereoParams,
    refine: &RefineParams,
    size: f64,
) -> Result<(DisparityMap, f64)> {
    let rough = rough_disparity(left, right, params.max_disp, params.block)?;
    let start = Instant::now();
    let refined = refine_disparity(&rough, left, size, size, refine)?;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((refined, elapsed_ms))
}

/// Runs rough-then-refine at each grid size and scores the resulting depth
/// maps against the finest size by MS-SSIM. The size knob scales pixels per
/// vertex in all three grid dimensions, so coarser grids are cheaper but
/// smear depth detail.
pub fn grid_quality_sweep(
    left: &GrayImage,
    right: &GrayImage,
    params: &StereoParams,
    refine: &RefineParams,
    sizes: &[f64],
) -> Result<Vec<SweepPoint>> {
    if sizes.is_empty() {
        return Err(Error::Parameter("sweep needs at least one size".to_string()));
    }
    if sizes.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Parameter("sizes must be positive".to_string()));
    }
    let finest = sizes.iter().cloned().fold(f64::INFINITY, f64::min);
    let (reference, _) = depth_at_size(left, right, params, refine, finest)?;
    let reference_gray = reference.to_gray(params.max_disp);
    let ssim_params = MsSsimParams::for_dimensions(left.width(), left.height())?;
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let (depth, refine_ms) = depth_at_size(left, right, params, refine, size)?;
        let score = ms_ssim(&depth.to_gray(params.max_disp), &reference_gray, &ssim_params)?;
        let (nx, ny, nr) = grid_dims(left.width(), left.height(), size, size);
        points.push(SweepPoint {
            size,
            ms_ssim: score,
            vertex_count: nx * ny * nr,
            refine_ms,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn single_size_scores_one_against_itself() {
        let scene = synthetic::stereo_scene(96, 72, 6, 41);
        let params = StereoParams {
            max_disp: 10,
            block: 7,
            ..StereoParams::default()
        };
        let points = grid_quality_sweep(
            &scene.left,
            &scene.right,
            &params,
            &RefineParams::default(),
            &[4.0],
        )
        .unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].ms_ssim, 1.0);
    }

    #[test]
    fn vertex_counts_shrink_with_size() {
        let scene = synthetic::stereo_scene(96, 72, 6, 42);
        let params = StereoParams {
            max_disp: 10,
            block: 7,
            ..StereoParams::default()
        };
        let points = grid_quality_sweep(
            &scene.left,
            &scene.right,
            &params,
            &RefineParams::default(),
            &[4.0, 8.0, 16.0],
        )
        .unwrap();
        assert!(points[0].vertex_count > points[1].vertex_count);
        assert!(points[1].vertex_count > points[2].vertex_count);
    }
}
