//! Bilateral grid: splat, blur, slice, and the 1D filtering demonstration.
//!
//! Pixels are lifted to a 3D (x, y, luma) domain where a small local blur
//! acts as an edge-aware filter in pixel space. Each vertex stores a
//! homogeneous (value * weight, weight) pair so constant inputs survive
//! any amount of blurring.

use crate::error::{Error, Result};
use crate::imgio::GrayImage;

/// Scalar used for all grid arithmetic. Depth-map quality needs at least
/// 32-bit floating point; this assertion pins the choice.
pub type GridScalar = f64;
const _: () = assert!(std::mem::size_of::<GridScalar>() >= 4);

/// Vertex counts of a grid built over a `width x height` guide with the
/// given cell sizes. Nearest-vertex binning: index = round(coord / sigma).
pub fn grid_dims(width: usize, height: usize, sigma_spatial: f64, sigma_range: f64) -> (usize, usize, usize) {
    let nx = ((width.saturating_sub(1)) as f64 / sigma_spatial).round() as usize + 1;
    let ny = ((height.saturating_sub(1)) as f64 / sigma_spatial).round() as usize + 1;
    let nr = (255.0 / sigma_range).round() as usize + 1;
    (nx, ny, nr)
}

/// 3D homogeneous accumulation grid over (x, y, luma).
#[derive(Debug, Clone, PartialEq)]
pub struct BilateralGrid {
    nx: usize,
    ny: usize,
    nr: usize,
    sigma_spatial: f64,
    sigma_range: f64,
    /// Per-vertex sum of weight * value.
    value: Vec<GridScalar>,
    /// Per-vertex sum of weights.
    weight: Vec<GridScalar>,
}

impl BilateralGrid {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nr)
    }

    pub fn vertex_count(&self) -> usize {
        self.nx * self.ny * self.nr
    }

    pub fn sigma_spatial(&self) -> f64 {
        self.sigma_spatial
    }

    pub fn sigma_range(&self) -> f64 {
        self.sigma_range
    }

    #[inline]
    fn index(&self, ix: usize, iy: usize, ir: usize) -> usize {
        (iy * self.nx + ix) * self.nr + ir
    }

    pub fn value_at(&self, ix: usize, iy: usize, ir: usize) -> GridScalar {
        self.value[self.index(ix, iy, ir)]
    }

    pub fn weight_at(&self, ix: usize, iy: usize, ir: usize) -> GridScalar {
        self.weight[self.index(ix, iy, ir)]
    }

    pub fn total_weight(&self) -> GridScalar {
        self.weight.iter().sum()
    }

    /// Linear indices of vertices holding any mass.
    pub fn occupied(&self) -> Vec<usize> {
        (0..self.weight.len()).filter(|&i| self.weight[i] > 0.0).collect()
    }

    pub(crate) fn from_vertices(
        dims: (usize, usize, usize),
        sigma_spatial: f64,
        sigma_range: f64,
        value: Vec<GridScalar>,
        weight: Vec<GridScalar>,
    ) -> Self {
        assert_eq!(value.len(), dims.0 * dims.1 * dims.2);
        assert_eq!(weight.len(), value.len());
        BilateralGrid {
            nx: dims.0,
            ny: dims.1,
            nr: dims.2,
            sigma_spatial,
            sigma_range,
            value,
            weight,
        }
    }

    pub(crate) fn coords_of(&self, linear: usize) -> (usize, usize, usize) {
        let ir = linear % self.nr;
        let rest = linear / self.nr;
        (rest % self.nx, rest / self.nx, ir)
    }
}

fn check_sigmas(sigma_spatial: f64, sigma_range: f64) -> Result<()> {
    if !(sigma_spatial > 0.0) || !(sigma_range > 0.0) {
        return Err(Error::Parameter(format!(
            "sigmas must be positive, got spatial {sigma_spatial} range {sigma_range}"
        )));
    }
    Ok(())
}

/// Scatters per-pixel (value, weight) pairs to their nearest grid vertex.
/// Total weight is conserved exactly: every pixel lands on one vertex.
pub fn splat(
    guide: &GrayImage,
    values: &[f64],
    weights: &[f64],
    sigma_spatial: f64,
    sigma_range: f64,
) -> Result<BilateralGrid> {
    check_sigmas(sigma_spatial, sigma_range)?;
    let n = guide.width() * guide.height();
    if values.len() != n || weights.len() != n {
        return Err(Error::Dimension(format!(
            "guide has {n} pixels, got {} values and {} weights",
            values.len(),
            weights.len()
        )));
    }
    let dims = grid_dims(guide.width(), guide.height(), sigma_spatial, sigma_range);
    let mut grid = BilateralGrid::from_vertices(
        dims,
        sigma_spatial,
        sigma_range,
        vec![0.0; dims.0 * dims.1 * dims.2],
        vec![0.0; dims.0 * dims.1 * dims.2],
    );
    for y in 0..guide.height() {
        for x in 0..guide.width() {
            let p = y * guide.width() + x;
            let ix = (x as f64 / sigma_spatial).round() as usize;
            let iy = (y as f64 / sigma_spatial).round() as usize;
            let ir = (f64::from(guide.get(x, y)) / sigma_range).round() as usize;
            let i = grid.index(ix, iy, ir);
            grid.value[i] += weights[p] * values[p];
            grid.weight[i] += weights[p];
        }
    }
    Ok(grid)
}

/// Separable [1, 2, 1]/4 blur along each grid axis, zero padded, applied to
/// both homogeneous channels. The value/weight ratio of a constant grid is
/// unchanged wherever weight remains.
pub fn grid_blur(grid: &BilateralGrid) -> BilateralGrid {
    let mut out = grid.clone();
    let (nx, ny, nr) = grid.dims();
    // stride and extent per axis over the linear layout (iy * nx + ix) * nr + ir
    let axes = [(nr, 1usize), (nx, nr), (ny, nx * nr)];
    for (extent, stride) in axes {
        if extent == 1 {
            continue;
        }
        let value = blur_axis(&out.value, out.value.len(), extent, stride);
        let weight = blur_axis(&out.weight, out.weight.len(), extent, stride);
        out.value = value;
        out.weight = weight;
    }
    out
}

fn blur_axis(data: &[GridScalar], len: usize, extent: usize, stride: usize) -> Vec<GridScalar> {
    let mut out = vec![0.0; len];
    for i in 0..len {
        let pos = (i / stride) % extent;
        let mut acc = 0.5 * data[i];
        if pos > 0 {
            acc += 0.25 * data[i - stride];
        }
        if pos + 1 < extent {
            acc += 0.25 * data[i + stride];
        }
        out[i] = acc;
    }
    out
}

/// Reads the grid back at each pixel's bilateral coordinates by trilinear
/// interpolation of the homogeneous pair. Pixels whose entire interpolation
/// neighborhood is empty fall back to the nearest occupied vertex by L1
/// grid distance, ties toward lower indices.
pub fn slice(grid: &BilateralGrid, guide: &GrayImage) -> Result<Vec<f64>> {
    let occupied = grid.occupied();
    let mut out = Vec::with_capacity(guide.width() * guide.height());
    for y in 0..guide.height() {
        for x in 0..guide.width() {
            let cx = x as f64 / grid.sigma_spatial;
            let cy = y as f64 / grid.sigma_spatial;
            let cr = f64::from(guide.get(x, y)) / grid.sigma_range;
            out.push(sample(grid, &occupied, cx, cy, cr));
        }
    }
    Ok(out)
}

fn sample(grid: &BilateralGrid, occupied: &[usize], cx: f64, cy: f64, cr: f64) -> f64 {
    let (nx, ny, nr) = grid.dims();
    let (x0, x1, tx) = axis_corners(cx, nx);
    let (y0, y1, ty) = axis_corners(cy, ny);
    let (r0, r1, tr) = axis_corners(cr, nr);
    let mut num = 0.0;
    let mut den = 0.0;
    for (iy, wy) in [(y0, 1.0 - ty), (y1, ty)] {
        for (ix, wx) in [(x0, 1.0 - tx), (x1, tx)] {
            for (ir, wr) in [(r0, 1.0 - tr), (r1, tr)] {
                let t = wy * wx * wr;
                let i = grid.index(ix, iy, ir);
                num += t * grid.value[i];
                den += t * grid.weight[i];
            }
        }
    }
    if den > 0.0 {
        return num / den;
    }
    // empty neighborhood: nearest occupied vertex
    let px = cx.round() as isize;
    let py = cy.round() as isize;
    let pr = cr.round() as isize;
    let mut best: Option<(usize, usize)> = None;
    for &i in occupied {
        let (ix, iy, ir) = grid.coords_of(i);
        let dist = (ix as isize - px).unsigned_abs()
            + (iy as isize - py).unsigned_abs()
            + (ir as isize - pr).unsigned_abs();
        let candidate = (dist, i);
        if best.map_or(true, |b| candidate < b) {
            best = Some(candidate);
        }
    }
    match best {
        Some((_, i)) => grid.value[i] / grid.weight[i],
        None => 0.0,
    }
}

/// Corner indices and interpolation fraction along one axis, clamped to the
/// grid so out-of-range coordinates degrade to the edge vertex.
fn axis_corners(coord: f64, extent: usize) -> (usize, usize, f64) {
    let clamped = coord.clamp(0.0, (extent - 1) as f64);
    let base = clamped.floor();
    let i0 = base as usize;
    let i1 = (i0 + 1).min(extent - 1);
    (i0, i1, clamped - base)
}

/// Edge-aware smoothing of a 1D signal: splat to a 2D (position, intensity)
/// grid, blur with [1, 2, 1]/4 along both axes, slice back.
pub fn bilateral_filter_1d(signal: &[f64], sigma_spatial: f64, sigma_range: f64) -> Result<Vec<f64>> {
    check_sigmas(sigma_spatial, sigma_range)?;
    if signal.is_empty() {
        return Ok(Vec::new());
    }
    let lo = signal.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = signal.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n0 = ((signal.len() - 1) as f64 / sigma_spatial).round() as usize + 1;
    let n1 = ((hi - lo) / sigma_range).round() as usize + 1;
    let mut value = vec![0.0; n0 * n1];
    let mut weight = vec![0.0; n0 * n1];
    let cell = |pos: usize, v: f64| -> (usize, usize) {
        let i0 = (pos as f64 / sigma_spatial).round() as usize;
        let i1 = ((v - lo) / sigma_range).round() as usize;
        (i0, i1.min(n1 - 1))
    };
    for (p, &v) in signal.iter().enumerate() {
        let (i0, i1) = cell(p, v);
        value[i0 * n1 + i1] += v;
        weight[i0 * n1 + i1] += 1.0;
    }
    for (extent, stride) in [(n1, 1usize), (n0, n1)] {
        if extent == 1 {
            continue;
        }
        value = blur_axis(&value, value.len(), extent, stride);
        weight = blur_axis(&weight, weight.len(), extent, stride);
    }
    let mut out = Vec::with_capacity(signal.len());
    for (p, &v) in signal.iter().enumerate() {
        let cx = p as f64 / sigma_spatial;
        let cyv = (v - lo) / sigma_range;
        let (x0, x1, tx) = axis_corners(cx, n0);
        let (r0, r1, tr) = axis_corners(cyv, n1);
        let mut num = 0.0;
        let mut den = 0.0;
        for (ix, wx) in [(x0, 1.0 - tx), (x1, tx)] {
            for (ir, wr) in [(r0, 1.0 - tr), (r1, tr)] {
                let t = wx * wr;
                num += t * value[ix * n1 + ir];
                den += t * weight[ix * n1 + ir];
            }
        }
        out.push(if den > 0.0 { num / den } else { v });
    }
    Ok(out)
}

/// Box average over a clipped `2 * radius + 1` window, the non-edge-aware
/// baseline the bilateral filter is compared against.
pub fn moving_average_1d(signal: &[f64], radius: usize) -> Vec<f64> {
    (0..signal.len())
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(signal.len());
            signal[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}
