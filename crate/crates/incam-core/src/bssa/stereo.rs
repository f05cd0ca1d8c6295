//! Rough disparity by SAD block matching and panorama stitching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgio::{GrayImage, RgbImage};

/// Per-pixel disparity with a [0, 1] confidence margin.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    disparity: Vec<f64>,
    confidence: Vec<f64>,
}

impl DisparityMap {
    pub fn new(width: usize, height: usize, disparity: Vec<f64>, confidence: Vec<f64>) -> Result<Self> {
        if disparity.len() != width * height || confidence.len() != width * height {
            return Err(Error::Dimension(format!(
                "disparity map {width}x{height} needs {} entries",
                width * height
            )));
        }
        if disparity.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::Parameter("disparities must be >= 0".to_string()));
        }
        if confidence.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::Parameter("confidences must be >= 0".to_string()));
        }
        Ok(DisparityMap {
            width,
            height,
            disparity,
            confidence,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn disparity(&self) -> &[f64] {
        &self.disparity
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.disparity[y * self.width + x]
    }

    /// Renders disparity as an 8-bit image scaled so `max_disp` maps to 255.
    pub fn to_gray(&self, max_disp: usize) -> GrayImage {
        let scale = if max_disp > 0 { 255.0 / max_disp as f64 } else { 0.0 };
        GrayImage::from_fn(self.width, self.height, |x, y| {
            (self.get(x, y) * scale).round().clamp(0.0, 255.0) as u8
        })
    }
}

/// Stereo matching and refinement parameters; also the JSON sidecar schema
/// shipped next to fixture image pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoParams {
    pub max_disp: usize,
    pub block: usize,
    pub sigma_spatial: f64,
    pub sigma_range: f64,
    pub lambda: f64,
}

impl Default for StereoParams {
    fn default() -> Self {
        StereoParams {
            max_disp: 64,
            block: 9,
            sigma_spatial: 8.0,
            sigma_range: 8.0,
            lambda: 4.0,
        }
    }
}

/// Block-matching disparity: per pixel, the shift `d` in `0..=max_disp`
/// minimizing the sum of absolute differences over the block, ties toward
/// smaller `d`. Confidence is the margin between the two best costs,
/// normalized by the worst possible block difference.
pub fn rough_disparity(
    left: &GrayImage,
    right: &GrayImage,
    max_disp: usize,
    block: usize,
) -> Result<DisparityMap> {
    if left.width() != right.width() || left.height() != right.height() {
        return Err(Error::Dimension(format!(
            "stereo pair differs: {}x{} vs {}x{}",
            left.width(),
            left.height(),
            right.width(),
            right.height()
        )));
    }
    if block == 0 || block > left.width() || block > left.height() {
        return Err(Error::Parameter(format!(
            "block {block} does not fit a {}x{} image",
            left.width(),
            left.height()
        )));
    }
    let (w, h) = (left.width(), left.height());
    let half = block / 2;
    let mut disparity = Vec::with_capacity(w * h);
    let mut confidence = Vec::with_capacity(w * h);
    for y in 0..h {
        let y0 = y.saturating_sub(half);
        let y1 = (y + half + 1).min(h);
        for x in 0..w {
            let x0 = x.saturating_sub(half);
            let x1 = (x + half + 1).min(w);
            let mut best = u64::MAX;
            let mut best_d = 0usize;
            let mut second = u64::MAX;
            let mut candidates = 0usize;
            for d in 0..=max_disp.min(x0) {
                let mut cost = 0u64;
                for yy in y0..y1 {
                    for xx in x0..x1 {
                        cost += u64::from(left.get(xx, yy).abs_diff(right.get(xx - d, yy)));
                    }
                }
                candidates += 1;
                if cost < best {
                    second = best;
                    best = cost;
                    best_d = d;
                } else if cost < second {
                    second = cost;
                }
            }
            let area = ((x1 - x0) * (y1 - y0)) as f64;
            let margin = if candidates < 2 {
                0.0
            } else {
                ((second - best) as f64 / (255.0 * area)).clamp(0.0, 1.0)
            };
            disparity.push(best_d as f64);
            confidence.push(margin);
        }
    }
    DisparityMap::new(w, h, disparity, confidence)
}

/// Horizontally concatenates panels with a linear feather over the overlap.
/// Returns the stitched color panorama and its stitched disparity map.
pub fn stitch_panorama(
    depth_panels: &[DisparityMap],
    images: &[RgbImage],
    overlap: usize,
) -> Result<(RgbImage, DisparityMap)> {
    if depth_panels.is_empty() || depth_panels.len() != images.len() {
        return Err(Error::Parameter(format!(
            "need equal nonzero panel counts, got {} depth and {} color",
            depth_panels.len(),
            images.len()
        )));
    }
    let height = images[0].height();
    for (i, (d, img)) in depth_panels.iter().zip(images).enumerate() {
        if img.height() != height || d.height() != height {
            return Err(Error::Dimension(format!("panel {i} height differs")));
        }
        if d.width() != img.width() {
            return Err(Error::Dimension(format!(
                "panel {i}: depth {}px wide, image {}px",
                d.width(),
                img.width()
            )));
        }
        if i > 0 && (overlap > img.width() || overlap > images[i - 1].width()) {
            return Err(Error::Parameter(format!(
                "overlap {overlap} exceeds panel {i} width"
            )));
        }
    }
    let total_width: usize =
        images.iter().map(|p| p.width()).sum::<usize>() - overlap * (images.len() - 1);
    let mut rgb = vec![0f64; 3 * total_width * height];
    let mut disp = vec![0f64; total_width * height];
    let mut conf = vec![0f64; total_width * height];
    let mut offset = 0usize;
    for (i, (panel, img)) in depth_panels.iter().zip(images).enumerate() {
        for y in 0..height {
            for x in 0..img.width() {
                let ox = offset + x;
                let alpha = if i == 0 || x >= overlap {
                    1.0
                } else if overlap == 1 {
                    0.5
                } else {
                    x as f64 / (overlap - 1) as f64
                };
                let px = img.get(x, y);
                let di = y * total_width + ox;
                for c in 0..3 {
                    let v = f64::from(px[c]);
                    rgb[3 * di + c] = (1.0 - alpha) * rgb[3 * di + c] + alpha * v;
                }
                disp[di] = (1.0 - alpha) * disp[di] + alpha * panel.get(x, y);
                conf[di] = (1.0 - alpha) * conf[di] + alpha * panel.confidence()[y * panel.width() + x];
            }
        }
        offset += img.width() - overlap;
    }
    let rgb_bytes: Vec<u8> = rgb.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    Ok((
        RgbImage::new(total_width, height, rgb_bytes)?,
        DisparityMap::new(total_width, height, disp, conf)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut state = seed | 1;
        GrayImage::from_fn(w, h, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 56) as u8
        })
    }

    #[test]
    fn identical_images_give_zero_disparity() {
        let img = noise(32, 24, 3);
        let map = rough_disparity(&img, &img, 8, 5).unwrap();
        assert!(map.disparity().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn shifted_noise_recovers_the_shift() {
        let shift = 5usize;
        let (w, h) = (64, 48);
        let left = noise(w, h, 9);
        let right = GrayImage::from_fn(w, h, |x, y| left.get((x + shift) % w, y));
        let map = rough_disparity(&left, &right, 8, 7).unwrap();
        let half = 3usize;
        let mut good = 0usize;
        let mut interior = 0usize;
        for y in half..h - half {
            for x in (shift + half).max(8)..w - half {
                interior += 1;
                if map.get(x, y) == shift as f64 {
                    good += 1;
                }
            }
        }
        assert!(
            good as f64 >= 0.99 * interior as f64,
            "{good}/{interior} correct"
        );
    }

    #[test]
    fn textureless_pair_ties_to_zero_with_no_confidence() {
        let img = GrayImage::from_fn(16, 16, |_, _| 88);
        let map = rough_disparity(&img, &img, 6, 5).unwrap();
        assert!(map.disparity().iter().all(|&d| d == 0.0));
        assert!(map.confidence().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn oversized_block_rejected() {
        let img = noise(8, 8, 1);
        assert!(rough_disparity(&img, &img, 2, 9).is_err());
    }

    #[test]
    fn single_panel_stitch_is_identity() {
        let img = RgbImage::new(4, 2, (0..24).collect()).unwrap();
        let depth = DisparityMap::new(4, 2, vec![1.0; 8], vec![0.5; 8]).unwrap();
        let (rgb, disp) = stitch_panorama(&[depth.clone()], &[img.clone()], 2).unwrap();
        assert_eq!(rgb, img);
        assert_eq!(disp, depth);
    }

    #[test]
    fn identical_panels_share_seam_content() {
        let img = RgbImage::new(6, 3, (0..54).map(|i| (i % 251) as u8).collect()).unwrap();
        let depth = DisparityMap::new(6, 3, (0..18).map(|i| i as f64).collect(), vec![1.0; 18]).unwrap();
        let (rgb, _) = stitch_panorama(
            &[depth.clone(), depth.clone()],
            &[img.clone(), img.clone()],
            6,
        )
        .unwrap();
        // full overlap of identical panels reproduces one panel
        assert_eq!(rgb, img);
    }

    #[test]
    fn constant_panels_blend_linearly() {
        let (a, b) = (40u8, 200u8);
        let overlap = 5usize;
        let panel = |v: u8| RgbImage::new(8, 2, vec![v; 8 * 2 * 3]).unwrap();
        let depth = |v: f64| DisparityMap::new(8, 2, vec![v; 16], vec![1.0; 16]).unwrap();
        let (rgb, disp) =
            stitch_panorama(&[depth(2.0), depth(6.0)], &[panel(a), panel(b)], overlap).unwrap();
        assert_eq!(rgb.width(), 8 + 8 - overlap);
        let seam_start = 8 - overlap;
        for k in 0..overlap {
            let alpha = k as f64 / (overlap - 1) as f64;
            let expect = f64::from(a) + (f64::from(b) - f64::from(a)) * alpha;
            assert_eq!(rgb.get(seam_start + k, 0)[0], expect.round() as u8);
            let d = disp.get(seam_start + k, 0);
            assert!((d - (2.0 + 4.0 * alpha)).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_heights_rejected() {
        let a = RgbImage::new(4, 2, vec![0; 24]).unwrap();
        let b = RgbImage::new(4, 3, vec![0; 36]).unwrap();
        let da = DisparityMap::new(4, 2, vec![0.0; 8], vec![0.0; 8]).unwrap();
        let db = DisparityMap::new(4, 3, vec![0.0; 12], vec![0.0; 12]).unwrap();
        assert!(stitch_panorama(&[da, db], &[a, b], 1).is_err());
    }

    #[test]
    fn sidecar_json_round_trip() {
        let params = StereoParams::default();
        let json = serde_json::to_string(&params).unwrap();
        let back: StereoParams = serde_json::from_str(&json).unwrap();
        assert_eq!(back, params);
    }
}
