//! Deterministic synthetic scenes, faces, and datasets.
//!
//! Everything here is generated from a seed so fixtures can be regenerated
//! byte-identically and tests can pin expected values.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::facefilter::{CascadeModel, CascadeStage, HaarFeature, WeightedRect, CASCADE_CONVENTION};
use crate::imgio::GrayImage;
use crate::nnauth::Sample;

/// Side of the archetype face patch; matches the NN input window.
pub const FACE_PATCH: usize = 20;

/// Banded face-like 20x20 pattern: bright forehead and cheeks, dark eye
/// band, darker mouth. The toy cascade and the reference NN are keyed to
/// this structure.
pub fn face_archetype(x: usize, y: usize) -> u8 {
    debug_assert!(x < FACE_PATCH && y < FACE_PATCH);
    let _ = x;
    match y {
        0..=3 => 170,  // forehead
        4..=8 => 60,   // eye band
        9..=12 => 170, // cheeks
        13..=16 => 90, // mouth
        _ => 160,      // chin
    }
}

/// A 20x20 archetype patch with uniform pixel noise of the given amplitude.
pub fn face_patch(noise: i16, rng: &mut ChaCha8Rng) -> GrayImage {
    GrayImage::from_fn(FACE_PATCH, FACE_PATCH, |x, y| {
        let v = i16::from(face_archetype(x, y)) + rng.gen_range(-noise..=noise);
        v.clamp(0, 255) as u8
    })
}

/// Hand-built three-stage cascade for the archetype: stage 1 checks the eye
/// band against the forehead, stage 2 the mouth and cheek bands, stage 3
/// eye symmetry and the chin. Progressively more features per stage.
pub fn toy_cascade() -> CascadeModel {
    let feature = |rects: Vec<WeightedRect>, threshold: f64, left: f64, right: f64| HaarFeature {
        rects,
        threshold,
        left,
        right,
    };
    let rect = |x: u32, y: u32, w: u32, h: u32, weight: i32| WeightedRect { x, y, w, h, weight };
    CascadeModel {
        base_window: FACE_PATCH as u32,
        convention: CASCADE_CONVENTION.to_string(),
        stages: vec![
            CascadeStage {
                threshold: 0.5,
                features: vec![
                    // eye band darker than forehead
                    feature(vec![rect(0, 4, 20, 4, 1), rect(0, 0, 20, 4, -1)], -0.2, 1.0, 0.0),
                ],
            },
            CascadeStage {
                threshold: 1.5,
                features: vec![
                    // mouth darker than cheeks
                    feature(vec![rect(0, 13, 20, 4, 1), rect(0, 9, 20, 4, -1)], -0.15, 1.0, 0.0),
                    // cheeks brighter than eye band
                    feature(vec![rect(0, 9, 20, 4, 1), rect(0, 4, 20, 4, -1)], 0.2, 0.0, 1.0),
                ],
            },
            CascadeStage {
                threshold: 2.5,
                features: vec![
                    // eye halves balanced, two one-sided tests
                    feature(vec![rect(0, 4, 10, 4, 1), rect(10, 4, 10, 4, -1)], -0.15, 0.0, 1.0),
                    feature(vec![rect(0, 4, 10, 4, 1), rect(10, 4, 10, 4, -1)], 0.15, 1.0, 0.0),
                    // chin region brighter than mouth region
                    feature(vec![rect(0, 16, 20, 4, 1), rect(0, 12, 20, 4, -1)], 0.1, 0.0, 1.0),
                ],
            },
        ],
    }
}

/// Ground truth for one generated frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameTruth {
    /// Frame differs from its predecessor.
    pub moved: bool,
    /// Position of a planted face patch, if any.
    pub face_at: Option<(usize, usize)>,
}

fn frame_background(width: usize, height: usize, phase: usize) -> GrayImage {
    GrayImage::from_fn(width, height, |x, y| {
        (100 + ((x + phase) * 5 % 60) + (y * 3 % 40)) as u8
    })
}

fn plant(frame: &GrayImage, patch: &GrayImage, at: (usize, usize)) -> GrayImage {
    GrayImage::from_fn(frame.width(), frame.height(), |x, y| {
        if x >= at.0 && x < at.0 + patch.width() && y >= at.1 && y < at.1 + patch.height() {
            patch.get(x - at.0, y - at.1)
        } else {
            frame.get(x, y)
        }
    })
}

/// Frame sequence for the face pipeline: static stretches, background
/// motion without a face, and planted faces. Twelve frames of
/// `width x height`; truth records per-frame motion and face position.
pub fn face_frames(width: usize, height: usize, seed: u64) -> Vec<(GrayImage, FrameTruth)> {
    assert!(width >= FACE_PATCH + 12 && height >= FACE_PATCH + 12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bg = frame_background(width, height, 0);
    let bg_shifted = frame_background(width, height, 3);
    let spots = [
        (8usize, 8usize),
        (width - FACE_PATCH - 8, 10),
        (12, height - FACE_PATCH - 10),
    ];
    let mut frames = Vec::new();
    let mut push = |img: GrayImage, moved: bool, face_at: Option<(usize, usize)>| {
        frames.push((img, FrameTruth { moved, face_at }));
    };
    // 0-1: static scene
    push(bg.clone(), false, None);
    push(bg.clone(), false, None);
    // 2-3: a face appears, then holds still
    let patch = face_patch(8, &mut rng);
    push(plant(&bg, &patch, spots[0]), true, Some(spots[0]));
    push(frames.last().unwrap().0.clone(), false, Some(spots[0]));
    // 4: face moves
    let patch = face_patch(8, &mut rng);
    push(plant(&bg, &patch, spots[1]), true, Some(spots[1]));
    // 5: face leaves
    push(bg.clone(), true, None);
    // 6: static again
    push(bg.clone(), false, None);
    // 7: background motion without a face
    push(bg_shifted.clone(), true, None);
    // 8: still on the shifted background
    push(bg_shifted.clone(), false, None);
    // 9-10: another face visit
    let patch = face_patch(8, &mut rng);
    push(plant(&bg_shifted, &patch, spots[2]), true, Some(spots[2]));
    push(frames.last().unwrap().0.clone(), false, Some(spots[2]));
    // 11: back to the plain background
    push(bg, true, None);
    frames
}

/// Labeled patch dataset drawn from two Gaussian-like clusters with equal
/// mean intensity: class 1 around the archetype, class 0 around a flat
/// patch. Inputs are scaled to [0, 1].
pub fn two_cluster_patches(per_class: usize, noise_sigma: f64, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let archetype_mean: f64 = {
        let total: u32 = (0..FACE_PATCH)
            .flat_map(|y| (0..FACE_PATCH).map(move |x| u32::from(face_archetype(x, y))))
            .sum();
        f64::from(total) / (FACE_PATCH * FACE_PATCH) as f64 / 255.0
    };
    let mut samples = Vec::with_capacity(2 * per_class);
    for i in 0..2 * per_class {
        let label = (i % 2) as f64;
        let mut input = Vec::with_capacity(FACE_PATCH * FACE_PATCH);
        for y in 0..FACE_PATCH {
            for x in 0..FACE_PATCH {
                let mean = if label == 1.0 {
                    f64::from(face_archetype(x, y)) / 255.0
                } else {
                    archetype_mean
                };
                // sum of three uniforms approximates a Gaussian well enough here
                let noise: f64 = (0..3).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>() / 3.0;
                input.push((mean + noise * noise_sigma).clamp(0.0, 1.0));
            }
        }
        samples.push((input, label));
    }
    samples
}

/// A rectified stereo pair with a single fronto-parallel plane: the right
/// view is the left shifted by `shift` pixels with wraparound.
pub struct StereoScene {
    pub left: GrayImage,
    pub right: GrayImage,
    /// True disparity of every pixel.
    pub shift: usize,
}

pub fn stereo_scene(width: usize, height: usize, shift: usize, seed: u64) -> StereoScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut left = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let base = 90 + ((x / 13 + y / 11) % 5) * 20;
            let v = base as i16 + rng.gen_range(-25i16..=25);
            left.push(v.clamp(0, 255) as u8);
        }
    }
    let left = GrayImage::new(width, height, left).unwrap();
    let right = GrayImage::from_fn(width, height, |x, y| left.get((x + shift) % width, y));
    StereoScene { left, right, shift }
}

/// A stereo pair with a bright textured foreground slab at `fg_disp` over a
/// darker background at `bg_disp`, plus the ground-truth disparity field.
/// Luma correlates with depth so bilateral refinement has an edge to keep.
pub struct LayeredScene {
    pub left: GrayImage,
    pub right: GrayImage,
    pub truth: Vec<f64>,
    pub bg_disp: usize,
    pub fg_disp: usize,
}

pub fn layered_stereo_scene(
    width: usize,
    height: usize,
    bg_disp: usize,
    fg_disp: usize,
    seed: u64,
) -> LayeredScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let in_fg = |x: usize, y: usize| {
        x > width / 4 && x < 3 * width / 4 && y > height / 4 && y < 3 * height / 4
    };
    let mut left = Vec::with_capacity(width * height);
    let mut truth = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (base, disp) = if in_fg(x, y) {
                (180i16, fg_disp)
            } else {
                (80i16, bg_disp)
            };
            left.push((base + rng.gen_range(-30i16..=30)).clamp(0, 255) as u8);
            truth.push(disp as f64);
        }
    }
    let left = GrayImage::new(width, height, left).unwrap();
    let right = GrayImage::from_fn(width, height, |x, y| {
        let disp = if in_fg(x, y) { fg_disp } else { bg_disp };
        left.get((x + disp) % width, y)
    });
    LayeredScene {
        left,
        right,
        truth,
        bg_disp,
        fg_disp,
    }
}
