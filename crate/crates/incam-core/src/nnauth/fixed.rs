//! Two's-complement fixed-point formats and the LUT sigmoid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A signed fixed-point format: `total_bits` two's-complement bits with
/// `frac_bits` of them after the binary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedFormat {
    pub total_bits: u8,
    pub frac_bits: u8,
}

impl FixedFormat {
    pub fn new(total_bits: u8, frac_bits: u8) -> Result<Self> {
        if ![4, 8, 16].contains(&total_bits) {
            return Err(Error::Parameter(format!(
                "total_bits must be 4, 8 or 16, got {total_bits}"
            )));
        }
        if frac_bits == 0 || frac_bits >= total_bits {
            return Err(Error::Parameter(format!(
                "frac_bits must satisfy 0 < frac < total, got {frac_bits}/{total_bits}"
            )));
        }
        Ok(FixedFormat {
            total_bits,
            frac_bits,
        })
    }

    /// Datapath defaults: Q1.2, Q1.6 and Q2.13 (plus sign).
    pub fn default_for_bits(total_bits: u8) -> Result<Self> {
        match total_bits {
            4 => FixedFormat::new(4, 2),
            8 => FixedFormat::new(8, 6),
            16 => FixedFormat::new(16, 13),
            other => Err(Error::Parameter(format!(
                "no default format for {other}-bit datapath"
            ))),
        }
    }

    pub fn max_code(self) -> i32 {
        (1 << (self.total_bits - 1)) - 1
    }

    pub fn min_code(self) -> i32 {
        -(1 << (self.total_bits - 1))
    }

    /// Size of one quantization step.
    pub fn step(self) -> f64 {
        2f64.powi(-(self.frac_bits as i32))
    }

    /// Round-to-nearest-even of `x * 2^frac`, saturated to the code range.
    pub fn quantize(self, x: f64) -> i32 {
        if x.is_nan() {
            return 0;
        }
        let scaled = (x * 2f64.powi(self.frac_bits as i32)).round_ties_even();
        scaled.clamp(self.min_code() as f64, self.max_code() as f64) as i32
    }

    pub fn to_real(self, code: i32) -> f64 {
        code as f64 * self.step()
    }

    pub(crate) fn saturate(self, code: i64) -> i32 {
        code.clamp(self.min_code() as i64, self.max_code() as i64) as i32
    }
}

/// Rounds `value / 2^shift` to nearest, ties to even, in integer arithmetic.
pub(crate) fn round_shift_half_even(value: i64, shift: u8) -> i64 {
    if shift == 0 {
        return value;
    }
    let floor = value >> shift;
    let remainder = value - (floor << shift);
    let half = 1i64 << (shift - 1);
    if remainder > half || (remainder == half && floor & 1 == 1) {
        floor + 1
    } else {
        floor
    }
}

pub const LUT_ENTRIES: usize = 256;
pub const LUT_MIN: f64 = -8.0;
pub const LUT_MAX: f64 = 8.0;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// 256-entry sigmoid table over [-8, 8), entries stored in a fixed format.
/// Inputs outside the domain clamp to the end bins.
#[derive(Debug, Clone)]
pub struct SigmoidLut {
    entries: [i32; LUT_ENTRIES],
    format: FixedFormat,
}

impl SigmoidLut {
    /// Tabulates the sigmoid at bin centers, quantized to `format`.
    pub fn new(format: FixedFormat) -> Self {
        let bin = (LUT_MAX - LUT_MIN) / LUT_ENTRIES as f64;
        let mut entries = [0i32; LUT_ENTRIES];
        for (i, entry) in entries.iter_mut().enumerate() {
            let center = LUT_MIN + (i as f64 + 0.5) * bin;
            *entry = format.quantize(sigmoid(center));
        }
        SigmoidLut { entries, format }
    }

    pub fn format(&self) -> FixedFormat {
        self.format
    }

    /// Table entry for the bin containing `x`.
    pub fn eval_real(&self, x: f64) -> i32 {
        let bin = (LUT_MAX - LUT_MIN) / LUT_ENTRIES as f64;
        let index = ((x - LUT_MIN) / bin).floor();
        let index = index.clamp(0.0, (LUT_ENTRIES - 1) as f64) as usize;
        self.entries[index]
    }

    /// As [`eval_real`](Self::eval_real), for a fixed-point input code.
    pub fn eval_code(&self, code: i32, input_format: FixedFormat) -> i32 {
        self.eval_real(input_format.to_real(code))
    }

    pub fn entries(&self) -> &[i32; LUT_ENTRIES] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_examples() {
        let q8 = FixedFormat::new(8, 6).unwrap();
        assert_eq!(q8.quantize(0.0), 0);
        assert_eq!(q8.quantize(0.5), 32);
        assert_eq!(q8.quantize(10.0), 127);
        assert!((q8.to_real(127) - 1.984375).abs() < 1e-12);
        assert_eq!(q8.quantize(-10.0), -128);
    }

    #[test]
    fn quantize_rounds_ties_to_even() {
        let q8 = FixedFormat::new(8, 6).unwrap();
        // 0.5 * 2^6 = 32 exactly; ties occur at odd multiples of half a step
        let half_step = q8.step() / 2.0;
        assert_eq!(q8.quantize(half_step), 0); // 0.5 -> 0 (even)
        assert_eq!(q8.quantize(3.0 * half_step), 2); // 1.5 -> 2 (even)
    }

    #[test]
    fn round_shift_half_even_matches_float_reference() {
        for value in -200i64..=200 {
            for shift in 1u8..=4 {
                let expect = (value as f64 / f64::from(1u32 << shift)).round_ties_even() as i64;
                assert_eq!(round_shift_half_even(value, shift), expect, "{value} >> {shift}");
            }
        }
    }

    #[test]
    fn invalid_formats_rejected() {
        assert!(FixedFormat::new(5, 2).is_err());
        assert!(FixedFormat::new(8, 0).is_err());
        assert!(FixedFormat::new(8, 8).is_err());
    }

    #[test]
    fn lut_is_monotone_and_centered() {
        for bits in [4u8, 8, 16] {
            let fmt = FixedFormat::default_for_bits(bits).unwrap();
            let lut = SigmoidLut::new(fmt);
            for pair in lut.entries().windows(2) {
                assert!(pair[1] >= pair[0]);
            }
            // the bin containing zero evaluates near one half
            let at_zero = fmt.to_real(lut.eval_real(0.0));
            assert!((at_zero - 0.5).abs() <= 0.5 / 64.0 + fmt.step(), "bits {bits}: {at_zero}");
        }
    }

    #[test]
    fn lut_saturates_at_domain_ends() {
        let fmt = FixedFormat::new(8, 6).unwrap();
        let lut = SigmoidLut::new(fmt);
        assert!(fmt.to_real(lut.eval_real(8.0)) >= 0.999 - fmt.step());
        assert!(fmt.to_real(lut.eval_real(100.0)) >= 0.999 - fmt.step());
        assert!(fmt.to_real(lut.eval_real(-100.0)) <= 0.001 + fmt.step());
    }

    #[test]
    fn lut_near_true_sigmoid_at_one() {
        let fmt = FixedFormat::new(16, 13).unwrap();
        let lut = SigmoidLut::new(fmt);
        let got = fmt.to_real(lut.eval_real(1.0));
        assert!((got - 0.7311).abs() < 0.01, "{got}");
    }
}
