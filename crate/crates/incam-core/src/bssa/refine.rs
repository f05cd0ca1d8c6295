//! Bilateral-space disparity refinement.
//!
//! The rough disparity map is splatted into a bilateral grid (value =
//! disparity, weight = confidence) and the refined vertex values minimize
//!
//! ```text
//! E(v) = sum_i c_i (v_i - t_i)^2 + lambda * sum_(i,j adjacent) (v_i - v_j)^2
//! ```
//!
//! over occupied vertices, with 6-neighborhood adjacency in the grid.
//! The solver is undamped Jacobi: order independent, hence deterministic
//! under any parallel schedule, and the energy never increases because the
//! system matrix `C + lambda L` is diagonally dominated by its Jacobi
//! splitting. The converged values are sliced back to pixels.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::imgio::GrayImage;

use super::grid::{slice, splat, BilateralGrid};
use super::stereo::DisparityMap;

/// Refinement solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    /// Smoothness weight, >= 0.
    pub lambda: f64,
    pub max_iters: usize,
    /// Convergence threshold on the largest vertex update.
    pub tol: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            lambda: 4.0,
            max_iters: 500,
            tol: 1e-4,
        }
    }
}

impl RefineParams {
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Parameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!("tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// A quadratic data + Laplacian smoothness system over grid vertices.
#[derive(Debug, Clone)]
pub struct RefineSystem {
    /// Splatted target value per vertex.
    pub targets: Vec<f64>,
    /// Data-term confidence per vertex, > 0.
    pub confidences: Vec<f64>,
    /// Symmetric adjacency lists.
    pub neighbors: Vec<Vec<usize>>,
}

/// Converged vertex values plus the per-sweep energy trace.
#[derive(Debug, Clone)]
pub struct RefineSolution {
    pub values: Vec<f64>,
    pub iterations: usize,
    /// `E(v)` before iterating, then after each Jacobi sweep.
    pub energy_trace: Vec<f64>,
}

impl RefineSystem {
    pub fn validate(&self) -> Result<()> {
        let n = self.targets.len();
        if self.confidences.len() != n || self.neighbors.len() != n {
            return Err(Error::Dimension("system field lengths differ".to_string()));
        }
        if self.confidences.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Parameter("confidences must be > 0".to_string()));
        }
        for (i, adj) in self.neighbors.iter().enumerate() {
            for &j in adj {
                if j >= n || j == i {
                    return Err(Error::Parameter(format!("bad neighbor {j} of vertex {i}")));
                }
                if !self.neighbors[j].contains(&i) {
                    return Err(Error::Parameter(format!("adjacency {i}-{j} not symmetric")));
                }
            }
        }
        Ok(())
    }

    /// Quadratic objective at `v`.
    pub fn energy(&self, lambda: f64, values: &[f64]) -> f64 {
        let mut e = 0.0;
        for i in 0..self.targets.len() {
            let d = values[i] - self.targets[i];
            e += self.confidences[i] * d * d;
            for &j in &self.neighbors[i] {
                if j > i {
                    let s = values[i] - values[j];
                    e += lambda * s * s;
                }
            }
        }
        e
    }

    /// Jacobi iteration from `v = targets` until the largest update drops
    /// below `params.tol` or `params.max_iters` sweeps.
    pub fn solve(&self, params: &RefineParams) -> Result<RefineSolution> {
        params.validate()?;
        self.validate()?;
        let lambda = params.lambda;
        let mut values = self.targets.clone();
        let mut next = values.clone();
        let mut energy_trace = vec![self.energy(lambda, &values)];
        let mut iterations = 0;
        while iterations < params.max_iters {
            let mut max_update = 0.0f64;
            for i in 0..values.len() {
                let neighbor_sum: f64 = self.neighbors[i].iter().map(|&j| values[j]).sum();
                let degree = self.neighbors[i].len() as f64;
                let updated = (self.confidences[i] * self.targets[i] + lambda * neighbor_sum)
                    / (self.confidences[i] + lambda * degree);
                max_update = max_update.max((updated - values[i]).abs());
                next[i] = updated;
            }
            std::mem::swap(&mut values, &mut next);
            iterations += 1;
            energy_trace.push(self.energy(lambda, &values));
            if max_update < params.tol {
                break;
            }
        }
        Ok(RefineSolution {
            values,
            iterations,
            energy_trace,
        })
    }
}

/// Builds the vertex system from the occupied cells of a splatted grid.
/// Returns `None` when nothing was splatted with positive weight.
pub fn system_from_grid(grid: &BilateralGrid) -> Option<(RefineSystem, Vec<usize>)> {
    let occupied = grid.occupied();
    if occupied.is_empty() {
        return None;
    }
    let index_of: HashMap<usize, usize> =
        occupied.iter().enumerate().map(|(k, &lin)| (lin, k)).collect();
    let (nx, ny, nr) = grid.dims();
    let mut targets = Vec::with_capacity(occupied.len());
    let mut confidences = Vec::with_capacity(occupied.len());
    let mut neighbors = vec![Vec::new(); occupied.len()];
    for (k, &lin) in occupied.iter().enumerate() {
        let (ix, iy, ir) = grid.coords_of(lin);
        let w = grid.weight_at(ix, iy, ir);
        targets.push(grid.value_at(ix, iy, ir) / w);
        confidences.push(w);
        let mut push_neighbor = |jx: isize, jy: isize, jr: isize| {
            if jx < 0 || jy < 0 || jr < 0 {
                return;
            }
            let (jx, jy, jr) = (jx as usize, jy as usize, jr as usize);
            if jx >= nx || jy >= ny || jr >= nr {
                return;
            }
            let j_lin = (jy * nx + jx) * nr + jr;
            if let Some(&j) = index_of.get(&j_lin) {
                neighbors[k].push(j);
            }
        };
        let (ix, iy, ir) = (ix as isize, iy as isize, ir as isize);
        push_neighbor(ix - 1, iy, ir);
        push_neighbor(ix + 1, iy, ir);
        push_neighbor(ix, iy - 1, ir);
        push_neighbor(ix, iy + 1, ir);
        push_neighbor(ix, iy, ir - 1);
        push_neighbor(ix, iy, ir + 1);
    }
    Some((
        RefineSystem {
            targets,
            confidences,
            neighbors,
        },
        occupied,
    ))
}

/// Full refinement path: splat (disparity, confidence), solve, slice back.
/// Pixel confidences are carried through unchanged. A map with no positive
/// confidence anywhere is returned as-is.
pub fn refine_disparity(
    rough: &DisparityMap,
    guide: &GrayImage,
    sigma_spatial: f64,
    sigma_range: f64,
    params: &RefineParams,
) -> Result<DisparityMap> {
    if rough.width() != guide.width() || rough.height() != guide.height() {
        return Err(Error::Dimension(format!(
            "guide {}x{} does not match disparity {}x{}",
            guide.width(),
            guide.height(),
            rough.width(),
            rough.height()
        )));
    }
    let grid = splat(
        guide,
        rough.disparity(),
        rough.confidence(),
        sigma_spatial,
        sigma_range,
    )?;
    let Some((system, occupied)) = system_from_grid(&grid) else {
        return Ok(rough.clone());
    };
    let solution = system.solve(params)?;
    // slice the refined values through a unit-weight grid over the same cells
    let dims = grid.dims();
    let mut value = vec![0.0; grid.vertex_count()];
    let mut weight = vec![0.0; grid.vertex_count()];
    for (k, &lin) in occupied.iter().enumerate() {
        value[lin] = solution.values[k];
        weight[lin] = 1.0;
    }
    let refined_grid =
        BilateralGrid::from_vertices(dims, sigma_spatial, sigma_range, value, weight);
    let refined = slice(&refined_grid, guide)?;
    DisparityMap::new(
        rough.width(),
        rough.height(),
        refined,
        rough.confidence().to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_vertex_closed_form() {
        let system = RefineSystem {
            targets: vec![0.0, 1.0],
            confidences: vec![1.0, 1.0],
            neighbors: vec![vec![1], vec![0]],
        };
        let params = RefineParams {
            lambda: 1.0,
            max_iters: 10_000,
            tol: 1e-12,
        };
        let solution = system.solve(&params).unwrap();
        assert!((solution.values[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((solution.values[1] - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn energy_never_increases() {
        let system = RefineSystem {
            targets: vec![5.0, 0.0, 2.0, 8.0],
            confidences: vec![0.5, 2.0, 1.0, 0.25],
            neighbors: vec![vec![1], vec![0, 2], vec![1, 3], vec![2]],
        };
        let params = RefineParams {
            lambda: 3.0,
            max_iters: 200,
            tol: 1e-10,
        };
        let solution = system.solve(&params).unwrap();
        for pair in solution.energy_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "energy rose: {} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn lambda_zero_returns_targets() {
        let system = RefineSystem {
            targets: vec![1.0, 4.0, 2.5],
            confidences: vec![1.0, 0.5, 2.0],
            neighbors: vec![vec![1], vec![0, 2], vec![1]],
        };
        let params = RefineParams {
            lambda: 0.0,
            max_iters: 100,
            tol: 1e-9,
        };
        let solution = system.solve(&params).unwrap();
        assert_eq!(solution.values, system.targets);
        assert_eq!(solution.iterations, 1);
    }

    #[test]
    fn constant_disparity_is_a_fixed_point() {
        let guide = GrayImage::from_fn(24, 18, |x, y| ((x * 7 + y * 11) % 256) as u8);
        let rough = DisparityMap::new(24, 18, vec![5.0; 24 * 18], vec![1.0; 24 * 18]).unwrap();
        let refined = refine_disparity(&rough, &guide, 4.0, 16.0, &RefineParams::default()).unwrap();
        for (&got, &want) in refined.disparity().iter().zip(rough.disparity()) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_confidence_map_passes_through() {
        let guide = GrayImage::from_fn(8, 8, |_, _| 50);
        let rough = DisparityMap::new(8, 8, vec![3.0; 64], vec![0.0; 64]).unwrap();
        let refined = refine_disparity(&rough, &guide, 2.0, 8.0, &RefineParams::default()).unwrap();
        assert_eq!(&refined, &rough);
    }

    #[test]
    fn asymmetric_adjacency_rejected() {
        let system = RefineSystem {
            targets: vec![0.0, 1.0],
            confidences: vec![1.0, 1.0],
            neighbors: vec![vec![1], vec![]],
        };
        assert!(system.solve(&RefineParams::default()).is_err());
    }
}
