//! Optional filtering blocks of the face pipeline: frame-difference motion
//! detection and Viola-Jones cascade face detection.
//!
//! The cascade rejects non-face windows early: each stage sums its feature
//! votes and bails out at the first stage whose sum falls below the stage
//! threshold, so cheap stages run on every window and expensive ones only
//! on promising windows. The per-window work counters feed the cost-model
//! fixtures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgio::GrayImage;

/// Prefix-sum table with one extra zero row/column, so any rectangle sum is
/// four lookups. Entry (x, y) holds the sum of all pixels strictly above and
/// left of (x, y).
#[derive(Debug, Clone)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<u64>,
    squared: Option<Vec<u64>>,
}

/// Builds the integral image, optionally with the squared-sum table needed
/// for variance normalization.
pub fn integral_image(img: &GrayImage, with_squares: bool) -> IntegralImage {
    let (w, h) = (img.width(), img.height());
    let stride = w + 1;
    let mut sums = vec![0u64; stride * (h + 1)];
    let mut squared = if with_squares {
        Some(vec![0u64; stride * (h + 1)])
    } else {
        None
    };
    for y in 0..h {
        let mut row = 0u64;
        let mut row_sq = 0u64;
        for x in 0..w {
            let v = u64::from(img.get(x, y));
            row += v;
            row_sq += v * v;
            sums[(y + 1) * stride + (x + 1)] = sums[y * stride + (x + 1)] + row;
            if let Some(sq) = squared.as_mut() {
                sq[(y + 1) * stride + (x + 1)] = sq[y * stride + (x + 1)] + row_sq;
            }
        }
    }
    IntegralImage {
        width: w,
        height: h,
        sums,
        squared,
    }
}

impl IntegralImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn has_squares(&self) -> bool {
        self.squared.is_some()
    }

    /// Exact sum of the pixels in the rectangle at (x, y) of size w x h.
    /// The rectangle must lie inside the image.
    pub fn rect_sum(&self, x: usize, y: usize, w: usize, h: usize) -> u64 {
        assert!(x + w <= self.width && y + h <= self.height, "rectangle out of bounds");
        self.table_sum(&self.sums, x, y, w, h)
    }

    fn rect_sq_sum(&self, x: usize, y: usize, w: usize, h: usize) -> Option<u64> {
        self.squared.as_ref().map(|sq| self.table_sum(sq, x, y, w, h))
    }

    fn table_sum(&self, table: &[u64], x: usize, y: usize, w: usize, h: usize) -> u64 {
        let stride = self.width + 1;
        table[(y + h) * stride + (x + w)] + table[y * stride + x]
            - table[y * stride + (x + w)]
            - table[(y + h) * stride + x]
    }

    /// Reciprocal standard deviation of the window, for normalizing feature
    /// values. Flat windows give 0; without a squared table this is 1.
    fn inv_std(&self, x: usize, y: usize, side: usize) -> f64 {
        let Some(sq_sum) = self.rect_sq_sum(x, y, side, side) else {
            return 1.0;
        };
        let n = (side * side) as f64;
        let mean = self.rect_sum(x, y, side, side) as f64 / n;
        let variance = sq_sum as f64 / n - mean * mean;
        if variance > 0.0 {
            1.0 / variance.sqrt()
        } else {
            0.0
        }
    }
}

/// A weighted rectangle of a Haar feature, in base-window coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub weight: i32,
}

/// A Haar feature: 2 to 4 weighted rectangles and a two-way vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarFeature {
    pub rects: Vec<WeightedRect>,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeStage {
    pub threshold: f64,
    pub features: Vec<HaarFeature>,
}

/// Threshold convention declared by cascade files so imported models are
/// unambiguous: raw rectangle sums times inv_std, compared against
/// threshold times scaled window area.
pub const CASCADE_CONVENTION: &str = "area-normalized-v1";

/// A staged Viola-Jones classifier over a square base window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeModel {
    pub base_window: u32,
    pub convention: String,
    pub stages: Vec<CascadeStage>,
}

impl CascadeModel {
    /// Parses and validates the cascade JSON schema.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let model: CascadeModel =
            serde_json::from_slice(bytes).map_err(|e| Error::schema("cascade", e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("cascade serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_window == 0 {
            return Err(Error::schema("base_window", "must be >= 1"));
        }
        if self.convention != CASCADE_CONVENTION {
            return Err(Error::schema(
                "convention",
                format!("expected \"{CASCADE_CONVENTION}\", got \"{}\"", self.convention),
            ));
        }
        for (si, stage) in self.stages.iter().enumerate() {
            for (fi, feature) in stage.features.iter().enumerate() {
                let field = format!("stages[{si}].features[{fi}]");
                if !(2..=4).contains(&feature.rects.len()) {
                    return Err(Error::schema(
                        format!("{field}.rects"),
                        format!("need 2..=4 rectangles, got {}", feature.rects.len()),
                    ));
                }
                for (ri, r) in feature.rects.iter().enumerate() {
                    if r.x + r.w > self.base_window || r.y + r.h > self.base_window {
                        return Err(Error::schema(
                            format!("{field}.rects[{ri}]"),
                            format!("rectangle leaves the {0}x{0} base window", self.base_window),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_features(&self) -> usize {
        self.stages.iter().map(|s| s.features.len()).sum()
    }
}

/// An accepted window.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub x: usize,
    pub y: usize,
    /// Window side divided by the cascade base window.
    pub scale: f64,
    /// Window side in pixels.
    pub window: usize,
}

/// Outcome of classifying one window, with work counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CascadeDecision {
    pub accepted: bool,
    pub stages_evaluated: usize,
    pub features_evaluated: usize,
}

fn scale_px(v: u32, scale: f64) -> usize {
    // round half up; window coordinates are non-negative
    (f64::from(v) * scale + 0.5).floor() as usize
}

/// Evaluates one Haar feature on the window at (x, y) scaled by `scale`,
/// returning its left or right vote.
pub fn eval_feature(
    feature: &HaarFeature,
    ii: &IntegralImage,
    x: usize,
    y: usize,
    scale: f64,
    inv_std: f64,
    window_side: usize,
) -> Result<f64> {
    let mut raw = 0i64;
    for r in &feature.rects {
        let rx = x + scale_px(r.x, scale);
        let ry = y + scale_px(r.y, scale);
        let rw = scale_px(r.w, scale);
        let rh = scale_px(r.h, scale);
        if rx + rw > ii.width() || ry + rh > ii.height() {
            return Err(Error::Parameter(format!(
                "scaled feature rectangle ({rx},{ry},{rw},{rh}) leaves the image"
            )));
        }
        raw += i64::from(r.weight) * ii.rect_sum(rx, ry, rw, rh) as i64;
    }
    let area = (window_side * window_side) as f64;
    let value = raw as f64 * inv_std;
    Ok(if value < feature.threshold * area {
        feature.left
    } else {
        feature.right
    })
}

/// Runs the cascade on the window at (x, y) with the given scale, stopping
/// at the first failing stage.
pub fn cascade_classify(
    cascade: &CascadeModel,
    ii: &IntegralImage,
    x: usize,
    y: usize,
    scale: f64,
) -> Result<CascadeDecision> {
    let side = (f64::from(cascade.base_window) * scale + 0.5).floor() as usize;
    if x + side > ii.width() || y + side > ii.height() {
        return Err(Error::Parameter(format!(
            "window ({x},{y}) side {side} leaves the {}x{} image",
            ii.width(),
            ii.height()
        )));
    }
    let inv_std = ii.inv_std(x, y, side);
    let mut stages_evaluated = 0;
    let mut features_evaluated = 0;
    for stage in &cascade.stages {
        stages_evaluated += 1;
        let mut sum = 0.0;
        for feature in &stage.features {
            features_evaluated += 1;
            sum += eval_feature(feature, ii, x, y, scale, inv_std, side)?;
        }
        if sum < stage.threshold {
            return Ok(CascadeDecision {
                accepted: false,
                stages_evaluated,
                features_evaluated,
            });
        }
    }
    Ok(CascadeDecision {
        accepted: true,
        stages_evaluated,
        features_evaluated,
    })
}

/// Sliding-window step policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanStep {
    /// max(1, round(scale)) pixels, growing with the window.
    #[default]
    ScaleProportional,
    /// Fixed step in pixels at every scale.
    Fixed(usize),
}

impl ScanStep {
    fn at(self, scale: f64) -> usize {
        match self {
            ScanStep::ScaleProportional => (scale + 0.5).floor().max(1.0) as usize,
            ScanStep::Fixed(px) => px.max(1),
        }
    }
}

/// Window sides visited by a scan: distinct values of
/// floor(base * scale_factor^k) not exceeding the smaller image dimension.
pub fn scan_window_sides(base: u32, scale_factor: f64, max_side: usize) -> Vec<usize> {
    assert!(scale_factor > 1.0, "scale_factor must exceed 1");
    let mut sides = Vec::new();
    let mut factor = 1.0f64;
    loop {
        let side = (f64::from(base) * factor).floor() as usize;
        if side > max_side {
            return sides;
        }
        if sides.last() != Some(&side) {
            sides.push(side);
        }
        factor *= scale_factor;
    }
}

/// Slides the cascade over the image at every scale, from the base window
/// up until the window no longer fits. Returns accepted windows in
/// (scale, y, x) order. No non-max suppression.
pub fn scan(
    cascade: &CascadeModel,
    img: &GrayImage,
    scale_factor: f64,
    step: ScanStep,
) -> Result<Vec<Detection>> {
    if !(scale_factor > 1.0) {
        return Err(Error::Parameter(format!(
            "scale_factor must be > 1, got {scale_factor}"
        )));
    }
    let ii = integral_image(img, true);
    let max_side = img.width().min(img.height());
    let mut detections = Vec::new();
    for side in scan_window_sides(cascade.base_window, scale_factor, max_side) {
        let scale = side as f64 / f64::from(cascade.base_window);
        let step_px = step.at(scale);
        let mut y = 0;
        while y + side <= img.height() {
            let mut x = 0;
            while x + side <= img.width() {
                let decision = cascade_classify(cascade, &ii, x, y, scale)?;
                if decision.accepted {
                    detections.push(Detection {
                        x,
                        y,
                        scale,
                        window: side,
                    });
                }
                x += step_px;
            }
            y += step_px;
        }
    }
    Ok(detections)
}

/// Frame-difference motion detector: true when the fraction of pixels whose
/// absolute luma delta exceeds `pixel_thresh` is greater than `area_frac`.
pub fn motion_detect(
    prev: &GrayImage,
    cur: &GrayImage,
    pixel_thresh: u8,
    area_frac: f64,
) -> Result<bool> {
    if prev.width() != cur.width() || prev.height() != cur.height() {
        return Err(Error::Dimension(format!(
            "motion_detect frames differ: {}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            cur.width(),
            cur.height()
        )));
    }
    let changed = prev
        .samples()
        .iter()
        .zip(cur.samples())
        .filter(|(a, b)| a.abs_diff(**b) > pixel_thresh)
        .count();
    let frac = changed as f64 / prev.samples().len() as f64;
    Ok(frac > area_frac)
}
