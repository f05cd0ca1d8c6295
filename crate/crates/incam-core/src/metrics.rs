//! Quality and accuracy metrics: multi-scale structural similarity for
//! depth maps, and confusion-matrix rates for the authentication pipeline.

use crate::error::{Error, Result};
use crate::imgio::GrayImage;

/// Canonical per-scale exponents. They sum to 1.0001 as published, so the
/// defaults below normalize them to sum to exactly 1.
const SCALE_EXPONENTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// MS-SSIM configuration: 11x11 Gaussian window (sigma 1.5), stability
/// constants from the 8-bit dynamic range, and one exponent per scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MsSsimParams {
    pub scales: usize,
    pub exponents: Vec<f64>,
    pub window: usize,
    pub window_sigma: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for MsSsimParams {
    fn default() -> Self {
        MsSsimParams::with_scales(5).expect("default scale count is valid")
    }
}

impl MsSsimParams {
    /// Parameters for `scales` levels, exponents renormalized to sum to 1.
    pub fn with_scales(scales: usize) -> Result<Self> {
        if scales == 0 || scales > SCALE_EXPONENTS.len() {
            return Err(Error::Parameter(format!(
                "scales must be 1..={}, got {scales}",
                SCALE_EXPONENTS.len()
            )));
        }
        let sum: f64 = SCALE_EXPONENTS[..scales].iter().sum();
        let params = MsSsimParams {
            scales,
            exponents: SCALE_EXPONENTS[..scales].iter().map(|e| e / sum).collect(),
            window: 11,
            window_sigma: 1.5,
            c1: (0.01 * 255.0) * (0.01 * 255.0),
            c2: (0.03 * 255.0) * (0.03 * 255.0),
        };
        params.validate()?;
        Ok(params)
    }

    /// The most scales (up to 5) an image of this size supports: every
    /// level must still fit the 11x11 window after halving.
    pub fn for_dimensions(width: usize, height: usize) -> Result<Self> {
        let mut dim = width.min(height);
        let mut feasible = 0usize;
        while feasible < SCALE_EXPONENTS.len() && dim >= 11 {
            feasible += 1;
            dim /= 2;
        }
        if feasible == 0 {
            return Err(Error::Parameter(format!(
                "image {width}x{height} is smaller than the 11x11 window"
            )));
        }
        MsSsimParams::with_scales(feasible)
    }

    pub fn validate(&self) -> Result<()> {
        if self.exponents.len() != self.scales {
            return Err(Error::Parameter(format!(
                "{} scales need {} exponents, got {}",
                self.scales,
                self.scales,
                self.exponents.len()
            )));
        }
        let sum: f64 = self.exponents.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Parameter(format!("exponents sum to {sum}, need 1")));
        }
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Parameter(format!("window must be odd >= 3, got {}", self.window)));
        }
        Ok(())
    }
}

struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    fn from_image(img: &GrayImage) -> Self {
        Plane {
            width: img.width(),
            height: img.height(),
            data: img.samples().iter().map(|&v| f64::from(v)).collect(),
        }
    }

    /// 2x2 mean then decimate; trailing odd row/column dropped.
    fn downsample(&self) -> Plane {
        let (w, h) = (self.width / 2, self.height / 2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.width + 2 * x;
                let sum = self.data[i]
                    + self.data[i + 1]
                    + self.data[i + self.width]
                    + self.data[i + self.width + 1];
                data.push(sum * 0.25);
            }
        }
        Plane {
            width: w,
            height: h,
            data,
        }
    }

    /// Valid-region separable convolution with a normalized 1D kernel.
    fn filter_valid(&self, kernel: &[f64]) -> Plane {
        let k = kernel.len();
        let mid_w = self.width - k + 1;
        // horizontal pass
        let mut horiz = vec![0.0; mid_w * self.height];
        for y in 0..self.height {
            for x in 0..mid_w {
                let mut acc = 0.0;
                for (j, &kv) in kernel.iter().enumerate() {
                    acc += kv * self.data[y * self.width + x + j];
                }
                horiz[y * mid_w + x] = acc;
            }
        }
        // vertical pass
        let out_h = self.height - k + 1;
        let mut data = vec![0.0; mid_w * out_h];
        for y in 0..out_h {
            for x in 0..mid_w {
                let mut acc = 0.0;
                for (j, &kv) in kernel.iter().enumerate() {
                    acc += kv * horiz[(y + j) * mid_w + x];
                }
                data[y * mid_w + x] = acc;
            }
        }
        Plane {
            width: mid_w,
            height: out_h,
            data,
        }
    }

    fn zip_product(&self, other: &Plane) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let mut kernel: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for v in &mut kernel {
        *v /= sum;
    }
    kernel
}

/// Mean luminance-similarity * contrast-structure and mean
/// contrast-structure over the valid window positions of one scale.
fn ssim_scale(a: &Plane, b: &Plane, p: &MsSsimParams) -> (f64, f64) {
    let kernel = gaussian_kernel(p.window, p.window_sigma);
    let mu_a = a.filter_valid(&kernel);
    let mu_b = b.filter_valid(&kernel);
    let aa = a.zip_product(a).filter_valid(&kernel);
    let bb = b.zip_product(b).filter_valid(&kernel);
    let ab = a.zip_product(b).filter_valid(&kernel);
    let n = mu_a.data.len() as f64;
    let mut ssim_sum = 0.0;
    let mut cs_sum = 0.0;
    for i in 0..mu_a.data.len() {
        let (ma, mb) = (mu_a.data[i], mu_b.data[i]);
        let var_a = aa.data[i] - ma * ma;
        let var_b = bb.data[i] - mb * mb;
        let cov = ab.data[i] - ma * mb;
        let luminance = (2.0 * ma * mb + p.c1) / (ma * ma + mb * mb + p.c1);
        let cs = (2.0 * cov + p.c2) / (var_a + var_b + p.c2);
        ssim_sum += luminance * cs;
        cs_sum += cs;
    }
    (ssim_sum / n, cs_sum / n)
}

/// Multi-scale structural similarity in [0, 1], symmetric in its arguments.
/// Contrast-structure terms drive every scale but the last, which uses the
/// full SSIM; negative per-scale terms clamp to zero.
pub fn ms_ssim(a: &GrayImage, b: &GrayImage, p: &MsSsimParams) -> Result<f64> {
    p.validate()?;
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::Dimension(format!(
            "images differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    // every scale must still fit the window after halving
    let mut dim = a.width().min(a.height());
    for scale in 0..p.scales {
        if dim < p.window {
            return Err(Error::Parameter(format!(
                "image {}x{} supports only {scale} scales; retry with fewer scales",
                a.width(),
                a.height()
            )));
        }
        dim /= 2;
    }
    let mut plane_a = Plane::from_image(a);
    let mut plane_b = Plane::from_image(b);
    let mut score = 1.0f64;
    for scale in 0..p.scales {
        let (ssim, cs) = ssim_scale(&plane_a, &plane_b, p);
        let term = if scale + 1 == p.scales { ssim } else { cs };
        score *= term.max(0.0).powf(p.exponents[scale]);
        if scale + 1 < p.scales {
            plane_a = plane_a.downsample();
            plane_b = plane_b.downsample();
        }
    }
    Ok(score.clamp(0.0, 1.0))
}

/// Confusion-matrix rates for boolean authentication decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationReport {
    pub error_rate: f64,
    pub false_accept_rate: f64,
    pub false_reject_rate: f64,
}

/// Standard rates: FAR over actual negatives, FRR over actual positives,
/// error over everything. Rates with an empty denominator are 0.
pub fn classification_report(predictions: &[bool], labels: &[bool]) -> Result<ClassificationReport> {
    if predictions.is_empty() {
        return Err(Error::Parameter("no predictions".to_string()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let mut false_accepts = 0usize;
    let mut false_rejects = 0usize;
    let mut positives = 0usize;
    for (&pred, &label) in predictions.iter().zip(labels) {
        if label {
            positives += 1;
            if !pred {
                false_rejects += 1;
            }
        } else if pred {
            false_accepts += 1;
        }
    }
    let negatives = labels.len() - positives;
    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(ClassificationReport {
        error_rate: (false_accepts + false_rejects) as f64 / labels.len() as f64,
        false_accept_rate: rate(false_accepts, negatives),
        false_reject_rate: rate(false_rejects, positives),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut state = seed | 1;
        GrayImage::from_fn(w, h, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 56) as u8
        })
    }

    #[test]
    fn identical_images_score_one() {
        let img = noise_image(64, 64, 5);
        let p = MsSsimParams::with_scales(2).unwrap();
        assert_eq!(ms_ssim(&img, &img, &p).unwrap(), 1.0);
    }

    #[test]
    fn noise_lowers_the_score_and_symmetry_holds() {
        let a = GrayImage::from_fn(64, 64, |x, y| (((x / 8) + (y / 8)) % 2 * 180 + 40) as u8);
        let mut state = 77u64;
        let b = GrayImage::from_fn(64, 64, |x, y| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            let n = ((state >> 58) as i16) - 16;
            (i16::from(a.get(x, y)) + n * 4).clamp(0, 255) as u8
        });
        let p = MsSsimParams::with_scales(2).unwrap();
        let ab = ms_ssim(&a, &b, &p).unwrap();
        let ba = ms_ssim(&b, &a, &p).unwrap();
        assert!(ab < 1.0);
        assert_eq!(ab, ba);
    }

    #[test]
    fn constant_images_match_closed_form_luminance() {
        let (va, vb) = (100.0f64, 140.0f64);
        let a = GrayImage::from_fn(16, 16, |_, _| va as u8);
        let b = GrayImage::from_fn(16, 16, |_, _| vb as u8);
        let p = MsSsimParams::with_scales(1).unwrap();
        let c1 = p.c1;
        // zero variances: cs term is exactly 1, luminance is the closed form
        let expect = (2.0 * va * vb + c1) / (va * va + vb * vb + c1);
        let got = ms_ssim(&a, &b, &p).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn too_small_image_suggests_fewer_scales() {
        let img = noise_image(32, 32, 2);
        let p = MsSsimParams::with_scales(4).unwrap();
        let err = ms_ssim(&img, &img, &p).unwrap_err();
        assert!(err.to_string().contains("fewer scales"));
        // for_dimensions picks a feasible count for the same image
        let auto = MsSsimParams::for_dimensions(32, 32).unwrap();
        assert!(ms_ssim(&img, &img, &auto).is_ok());
    }

    #[test]
    fn default_exponents_sum_to_one() {
        let p = MsSsimParams::default();
        assert_eq!(p.scales, 5);
        let sum: f64 = p.exponents.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        // and stay close to the published constants
        for (e, canonical) in p.exponents.iter().zip(SCALE_EXPONENTS) {
            assert!((e - canonical).abs() < 1e-4);
        }
    }

    #[test]
    fn classification_rates() {
        let perfect = classification_report(&[true, false, true], &[true, false, true]).unwrap();
        assert_eq!(perfect.error_rate, 0.0);
        assert_eq!(perfect.false_accept_rate, 0.0);
        assert_eq!(perfect.false_reject_rate, 0.0);

        let labels = [true, true, false, false];
        let wrong: Vec<bool> = labels.iter().map(|l| !l).collect();
        let all_wrong = classification_report(&wrong, &labels).unwrap();
        assert_eq!(all_wrong.error_rate, 1.0);

        // 1 false accept and 1 false reject in 20 balanced samples
        let mut labels = vec![true; 10];
        labels.extend(vec![false; 10]);
        let mut preds = labels.clone();
        preds[0] = false;
        preds[10] = true;
        let report = classification_report(&preds, &labels).unwrap();
        assert_eq!(report.error_rate, 0.1);
        assert_eq!(report.false_accept_rate, 0.1);
        assert_eq!(report.false_reject_rate, 0.1);
    }

    #[test]
    fn error_rate_is_prior_weighted_combination() {
        let labels = [true, true, true, false, false, false, false, false];
        let preds = [false, true, true, true, true, false, false, false];
        let r = classification_report(&preds, &labels).unwrap();
        let pos_prior = 3.0 / 8.0;
        let combined = r.false_reject_rate * pos_prior + r.false_accept_rate * (1.0 - pos_prior);
        assert!((r.error_rate - combined).abs() < 1e-12);
    }

    #[test]
    fn empty_input_rejected() {
        assert!(classification_report(&[], &[]).is_err());
    }
}
