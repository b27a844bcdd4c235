//! Bit-accurate model of the flexible-format dot-product unit.
//!
//! Inputs are first widened into one of three multiplier formats:
//!
//! | lane   | layout            | accepts                      |
//! |--------|-------------------|------------------------------|
//! | `Fp19` | 1 + 8 + 10 bits   | BF16, FP16                   |
//! | `Fp11` | 1 + 5 + 5 bits    | every 8-bit and 6-bit float  |
//! | `Int9` | 9-bit signed      | INT8, UINT8                  |
//!
//! `Fp11` and `Int9` operands occupy both multiplier lanes; `Fp19` operands
//! occupy one and leave the other idle. INT8 dot products accumulate in
//! 32-bit integers; minifloat dot products form exact products and
//! accumulate them in `f32` in index order. Mixing INT and FP operands in
//! one dot product is rejected.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::codec::Code;
use crate::error::DatapathError;
use crate::formats::{FpFormatSpec, NumberSystem};

/// Source formats the decoder accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandFormat {
    Bf16,
    Fp16,
    Minifloat(FpFormatSpec),
    Int8,
    Uint8,
}

impl OperandFormat {
    pub fn lane(&self) -> LaneFormat {
        match self {
            OperandFormat::Bf16 | OperandFormat::Fp16 => LaneFormat::Fp19,
            OperandFormat::Minifloat(_) => LaneFormat::Fp11,
            OperandFormat::Int8 | OperandFormat::Uint8 => LaneFormat::Int9,
        }
    }

    fn width(&self) -> u32 {
        match self {
            OperandFormat::Bf16 | OperandFormat::Fp16 => 16,
            OperandFormat::Minifloat(spec) => spec.bit_width() as u32,
            OperandFormat::Int8 | OperandFormat::Uint8 => 8,
        }
    }
}

impl TryFrom<NumberSystem> for OperandFormat {
    type Error = DatapathError;

    fn try_from(system: NumberSystem) -> Result<Self, Self::Error> {
        match system {
            NumberSystem::Fp(spec) => Ok(OperandFormat::Minifloat(spec)),
            NumberSystem::Int { bits: 8 } => Ok(OperandFormat::Int8),
            other => Err(DatapathError::UnsupportedSourceFormat(other.name())),
        }
    }
}

impl FromStr for OperandFormat {
    type Err = DatapathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bf16" => Ok(OperandFormat::Bf16),
            "fp16" => Ok(OperandFormat::Fp16),
            "uint8" => Ok(OperandFormat::Uint8),
            other => other
                .parse::<NumberSystem>()
                .map_err(|_| DatapathError::UnsupportedSourceFormat(s.to_string()))
                .and_then(OperandFormat::try_from),
        }
    }
}

impl fmt::Display for OperandFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperandFormat::Bf16 => f.write_str("bf16"),
            OperandFormat::Fp16 => f.write_str("fp16"),
            OperandFormat::Minifloat(spec) => write!(f, "{spec}"),
            OperandFormat::Int8 => f.write_str("int8"),
            OperandFormat::Uint8 => f.write_str("uint8"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LaneFormat {
    Fp19,
    Fp11,
    Int9,
}

/// Multiplier lanes occupied by one operand stream.
pub fn lanes_used(format: &OperandFormat) -> u32 {
    match format.lane() {
        LaneFormat::Fp19 => 1,
        LaneFormat::Fp11 | LaneFormat::Int9 => 2,
    }
}

/// Multiply cycles for a dot product of `len` elements.
pub fn multiply_cycles(len: usize, format: &OperandFormat) -> usize {
    len.div_ceil(lanes_used(format) as usize)
}

/// An operand after widening into its multiplier format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodedOperand {
    /// Bias 127, 10 mantissa bits, exponent 0 is subnormal.
    Fp19 {
        sign: bool,
        exponent: u8,
        mantissa: u16,
    },
    /// Bias 15, 5 mantissa bits, exponent 0 is subnormal.
    Fp11 {
        sign: bool,
        exponent: u8,
        mantissa: u8,
    },
    Int9 {
        value: i16,
    },
}

const FP19_BIAS: i32 = 127;
const FP19_MAN: i32 = 10;
const FP11_BIAS: i32 = 15;
const FP11_MAN: i32 = 5;

fn pow2_f64(k: i32) -> f64 {
    f64::from_bits(((k + 1023) as u64) << 52)
}

fn pow2_f32(k: i32) -> f32 {
    debug_assert!((-126..=127).contains(&k));
    f32::from_bits(((k + 127) as u32) << 23)
}

impl DecodedOperand {
    pub fn lane(&self) -> LaneFormat {
        match self {
            DecodedOperand::Fp19 { .. } => LaneFormat::Fp19,
            DecodedOperand::Fp11 { .. } => LaneFormat::Fp11,
            DecodedOperand::Int9 { .. } => LaneFormat::Int9,
        }
    }

    /// Integer significand and the exponent of its least significant bit.
    fn significand(&self) -> (i64, i32) {
        let (sign, sig, lsb) = match *self {
            DecodedOperand::Fp19 {
                sign,
                exponent,
                mantissa,
            } => fields_significand(sign, exponent as i32, mantissa as i64, FP19_BIAS, FP19_MAN),
            DecodedOperand::Fp11 {
                sign,
                exponent,
                mantissa,
            } => fields_significand(sign, exponent as i32, mantissa as i64, FP11_BIAS, FP11_MAN),
            DecodedOperand::Int9 { value } => return (value as i64, 0),
        };
        (if sign { -sig } else { sig }, lsb)
    }

    /// Exact value of the widened operand.
    pub fn value(&self) -> f64 {
        let (sig, lsb) = self.significand();
        sig as f64 * pow2_f64(lsb)
    }
}

fn fields_significand(sign: bool, exp: i32, man: i64, bias: i32, mbits: i32) -> (bool, i64, i32) {
    if exp == 0 {
        (sign, man, 1 - bias - mbits)
    } else {
        (sign, (1 << mbits) + man, exp - bias - mbits)
    }
}

/// Widens a raw source pattern into its multiplier format without loss.
pub fn decode_operand(raw: u16, source: &OperandFormat) -> Result<DecodedOperand, DatapathError> {
    if source.width() < 16 && raw >> source.width() != 0 {
        return Err(DatapathError::UnsupportedSourceFormat(format!(
            "{raw:#x} does not fit {source}"
        )));
    }
    let non_finite = || DatapathError::NonFiniteOperand { index: 0 };
    match *source {
        OperandFormat::Int8 => Ok(DecodedOperand::Int9 {
            value: raw as u8 as i8 as i16,
        }),
        OperandFormat::Uint8 => Ok(DecodedOperand::Int9 { value: raw as i16 }),
        OperandFormat::Bf16 => {
            let exponent = ((raw >> 7) & 0xff) as u8;
            if exponent == 0xff {
                return Err(non_finite());
            }
            Ok(DecodedOperand::Fp19 {
                sign: raw >> 15 != 0,
                exponent,
                mantissa: (raw & 0x7f) << 3,
            })
        }
        OperandFormat::Fp16 => {
            let sign = raw >> 15 != 0;
            let e = ((raw >> 10) & 0x1f) as i32;
            let m = raw & 0x3ff;
            if e == 0x1f {
                return Err(non_finite());
            }
            if e != 0 {
                return Ok(DecodedOperand::Fp19 {
                    sign,
                    exponent: (e - 15 + FP19_BIAS) as u8,
                    mantissa: m,
                });
            }
            if m == 0 {
                return Ok(DecodedOperand::Fp19 {
                    sign,
                    exponent: 0,
                    mantissa: 0,
                });
            }
            // FP16 subnormals are normal numbers in the wider exponent range
            let lead = 15 - m.leading_zeros() as i32;
            Ok(DecodedOperand::Fp19 {
                sign,
                exponent: (lead - 24 + FP19_BIAS) as u8,
                mantissa: (m - (1 << lead)) << (10 - lead),
            })
        }
        OperandFormat::Minifloat(spec) => {
            let bits = raw as u8;
            if !spec.classify(bits).is_finite_value() {
                return Err(non_finite());
            }
            let mb = spec.mantissa_bits() as i32;
            let sign = (bits as u32) & spec.sign_mask() != 0;
            let man = (bits as u32 & spec.mantissa_mask()) as i32;
            let field = ((bits as u32 >> mb) & spec.exponent_field_max()) as i32;
            let (exp_unbiased, frac, frac_bits) = match (field, man) {
                (0, 0) => {
                    return Ok(DecodedOperand::Fp11 {
                        sign,
                        exponent: 0,
                        mantissa: 0,
                    })
                }
                (0, _) => {
                    // renormalize: the leading one becomes the hidden bit
                    let lead = 31 - (man as u32).leading_zeros() as i32;
                    (lead + 1 - spec.bias() - mb, man - (1 << lead), lead)
                }
                _ => (field - spec.bias(), man, mb),
            };
            let biased = exp_unbiased + FP11_BIAS;
            if biased >= 1 {
                Ok(DecodedOperand::Fp11 {
                    sign,
                    exponent: biased as u8,
                    mantissa: (frac << (FP11_MAN - frac_bits)) as u8,
                })
            } else {
                // below the Fp11 normal range: keep the original subnormal grid
                let shift = (1 - spec.bias() - mb) - (1 - FP11_BIAS - FP11_MAN);
                Ok(DecodedOperand::Fp11 {
                    sign,
                    exponent: 0,
                    mantissa: (man << shift) as u8,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DotMode {
    Int8,
    Fp8,
}

/// Every intermediate of one dot product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DotTrace {
    pub mode: DotMode,
    pub lane: LaneFormat,
    pub lanes_used: u32,
    pub products: Vec<f64>,
    /// Accumulator after each product.
    pub accumulator: Vec<f64>,
    pub bias: f64,
    pub after_bias: f64,
    pub scale: f32,
    pub output: f32,
}

impl DotTrace {
    /// Re-executes the recorded arithmetic from the products alone.
    pub fn replay(&self) -> f32 {
        match self.mode {
            DotMode::Int8 => {
                let acc: i64 = self.products.iter().map(|&p| p as i64).sum();
                (acc + self.bias as i64) as i32 as f32 * self.scale
            }
            DotMode::Fp8 => {
                let acc = self.products.iter().fold(0.0f32, |acc, &p| acc + p as f32);
                (acc + self.bias as f32) * self.scale
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DotOutput {
    pub value: f32,
    pub trace: DotTrace,
}

/// Longest INT8 dot product the 32-bit accumulator is guaranteed to hold.
pub const MAX_INT8_DOT_LEN: usize = (i32::MAX as usize) / (127 * 127);

/// INT8 dot product: exact `i32` accumulation, integer bias, then one `f32` scale.
pub fn dot_int8(a: &[i8], b: &[i8], scale: f32, bias: i32) -> Result<DotOutput, DatapathError> {
    if a.len() != b.len() {
        return Err(DatapathError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() > MAX_INT8_DOT_LEN {
        return Err(DatapathError::AccumulatorOverflow { len: a.len() });
    }
    let mut products = Vec::with_capacity(a.len());
    let mut accumulator = Vec::with_capacity(a.len());
    let mut acc: i32 = 0;
    for (index, (&x, &y)) in a.iter().zip(b).enumerate() {
        if x == i8::MIN || y == i8::MIN {
            return Err(DatapathError::IntRange { index });
        }
        let p = x as i32 * y as i32;
        acc += p;
        products.push(p as f64);
        accumulator.push(acc as f64);
    }
    let after_bias = acc
        .checked_add(bias)
        .ok_or(DatapathError::AccumulatorOverflow { len: a.len() })?;
    let value = after_bias as f32 * scale;
    Ok(DotOutput {
        value,
        trace: DotTrace {
            mode: DotMode::Int8,
            lane: LaneFormat::Int9,
            lanes_used: 2,
            products,
            accumulator,
            bias: bias as f64,
            after_bias: after_bias as f64,
            scale,
            output: value,
        },
    })
}

fn fp_operand(code: &Code, index: usize) -> Result<DecodedOperand, DatapathError> {
    match code.system() {
        NumberSystem::Fp(spec) => {
            decode_operand(code.bits() as u16, &OperandFormat::Minifloat(spec))
                .map_err(|_| DatapathError::NonFiniteOperand { index })
        }
        NumberSystem::Int { .. } => Err(DatapathError::UnsupportedMixedOperands),
    }
}

/// Exact product of two `Fp11` operands as an `f32`.
fn fp11_product(a: &DecodedOperand, b: &DecodedOperand) -> f32 {
    let (sa, ea) = a.significand();
    let (sb, eb) = b.significand();
    // at most 6 x 6 significand bits, exponents within the f32 normal range
    (sa * sb) as f32 * pow2_f32(ea + eb)
}

/// Minifloat dot product. The two operands may use different minifloat formats.
pub fn dot_fp8(a: &[Code], b: &[Code], scale: f32, bias: f32) -> Result<DotOutput, DatapathError> {
    if a.len() != b.len() {
        return Err(DatapathError::LengthMismatch(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|c| c.system().is_int()) {
        return Err(DatapathError::UnsupportedMixedOperands);
    }
    let mut products = Vec::with_capacity(a.len());
    let mut accumulator = Vec::with_capacity(a.len());
    let mut acc = 0.0f32;
    for (index, (x, y)) in a.iter().zip(b).enumerate() {
        let p = fp11_product(&fp_operand(x, index)?, &fp_operand(y, index)?);
        acc += p;
        products.push(p as f64);
        accumulator.push(acc as f64);
    }
    let after_bias = acc + bias;
    let value = after_bias * scale;
    Ok(DotOutput {
        value,
        trace: DotTrace {
            mode: DotMode::Fp8,
            lane: LaneFormat::Fp11,
            lanes_used: 2,
            products,
            accumulator,
            bias: bias as f64,
            after_bias: after_bias as f64,
            scale,
            output: value,
        },
    })
}

/// INT x FP dot products have no datapath; callers must requantize one side.
pub fn dot_mixed(_a: &[Code], _b: &[Code]) -> Result<DotOutput, DatapathError> {
    Err(DatapathError::UnsupportedMixedOperands)
}

/// Dispatches on operand formats: INT8 x INT8, FP x FP, or rejection.
/// `bias` must be an integer for the INT8 path.
pub fn dot(a: &[Code], b: &[Code], scale: f32, bias: f64) -> Result<DotOutput, DatapathError> {
    let any_int = a.iter().chain(b).any(|c| c.system().is_int());
    let any_fp = a.iter().chain(b).any(|c| c.system().is_fp());
    match (any_int, any_fp) {
        (true, true) => dot_mixed(a, b),
        (true, false) => {
            if let Some(c) = a.iter().chain(b).find(|c| c.system() != NumberSystem::INT8) {
                return Err(DatapathError::UnsupportedSourceFormat(c.system().name()));
            }
            if bias.fract() != 0.0 || bias.abs() > i32::MAX as f64 {
                return Err(DatapathError::UnsupportedSourceFormat(format!(
                    "non-integer INT8 bias {bias}"
                )));
            }
            let ints = |v: &[Code]| -> Vec<i8> {
                v.iter()
                    .map(|c| c.int_value().unwrap_or_default() as i8)
                    .collect()
            };
            dot_int8(&ints(a), &ints(b), scale, bias as i32)
        }
        (false, _) => dot_fp8(a, b, scale, bias as f32),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{fp_decode, fp_encode};
    use crate::formats::enumerate_values;

    fn e4m3(values: &[f64]) -> Vec<Code> {
        values
            .iter()
            .map(|&v| fp_encode(v, &FpFormatSpec::E4M3).unwrap())
            .collect()
    }

    #[test]
    fn int8_examples() {
        let out = dot_int8(&[1, 2], &[3, 4], 1.0, 0).unwrap();
        assert_eq!(out.value, 11.0);
        assert_eq!(out.trace.accumulator, vec![3.0, 11.0]);
        assert_eq!(out.trace.replay(), 11.0);

        let k = 1000;
        let v = vec![127i8; k];
        let out = dot_int8(&v, &v, 0.5, 0).unwrap();
        assert_eq!(out.trace.after_bias, (k * 16129) as f64);
        assert_eq!(out.value, 0.5 * (k * 16129) as f32);
        assert_eq!(dot_int8(&[2], &[3], 2.0, -10).unwrap().value, -8.0);
    }

    #[test]
    fn int8_overflow_guard() {
        let k = (1usize << 31) / 16129 + 1;
        assert_eq!(k, MAX_INT8_DOT_LEN + 1);
        let v = vec![1i8; k];
        assert!(matches!(
            dot_int8(&v, &v, 1.0, 0),
            Err(DatapathError::AccumulatorOverflow { .. })
        ));
        let ok = vec![127i8; MAX_INT8_DOT_LEN];
        assert!(dot_int8(&ok, &ok, 1.0, 0).is_ok());
        assert!(dot_int8(&[1, 2], &[1], 1.0, 0).is_err());
        assert!(dot_int8(&[i8::MIN], &[1], 1.0, 0).is_err());
    }

    #[test]
    fn fp8_examples() {
        let out = dot_fp8(&e4m3(&[1.5]), &e4m3(&[2.5]), 1.0, 0.0).unwrap();
        assert_eq!(out.value, 3.75);
        let empty = dot_fp8(&[], &[], 3.0, 0.5).unwrap();
        assert_eq!(empty.value, 1.5);
        let out = dot_fp8(
            &e4m3(&[240.0, -0.001953125]),
            &e4m3(&[240.0, 0.5]),
            2.0,
            1.0,
        )
        .unwrap();
        assert_eq!(out.trace.products, vec![57600.0, -0.0009765625]);
        assert_eq!(out.value, out.trace.replay());
    }

    #[test]
    fn mixed_operands_rejected() {
        let ints = vec![Code::from_int(3, 8).unwrap()];
        let fps = e4m3(&[1.0]);
        assert_eq!(
            dot(&ints, &fps, 1.0, 0.0),
            Err(DatapathError::UnsupportedMixedOperands)
        );
        assert_eq!(
            dot(&fps, &ints, 1.0, 0.0),
            Err(DatapathError::UnsupportedMixedOperands)
        );
        assert_eq!(
            dot_mixed(&ints, &fps),
            Err(DatapathError::UnsupportedMixedOperands)
        );
        assert_eq!(
            dot_fp8(&fps, &ints, 1.0, 0.0),
            Err(DatapathError::UnsupportedMixedOperands)
        );
        assert_eq!(dot(&ints, &ints, 1.0, 0.0).unwrap().value, 9.0);
        assert!(dot(&ints, &ints, 1.0, 0.5).is_err());
    }

    #[test]
    fn lane_counts() {
        assert_eq!(lanes_used(&OperandFormat::Bf16), 1);
        assert_eq!(lanes_used(&OperandFormat::Fp16), 1);
        assert_eq!(lanes_used(&OperandFormat::Minifloat(FpFormatSpec::E3M4)), 2);
        assert_eq!(lanes_used(&OperandFormat::Int8), 2);
        assert_eq!(lanes_used(&OperandFormat::Uint8), 2);
        assert_eq!(multiply_cycles(64, &OperandFormat::Bf16), 64);
        assert_eq!(multiply_cycles(64, &OperandFormat::Int8), 32);
        assert_eq!(multiply_cycles(5, &OperandFormat::Int8), 3);
    }

    #[test]
    fn operand_parsing() {
        assert_eq!(
            "bf16".parse::<OperandFormat>().unwrap(),
            OperandFormat::Bf16
        );
        assert_eq!(
            "int8".parse::<OperandFormat>().unwrap(),
            OperandFormat::Int8
        );
        assert_eq!(
            "e5m2:nia".parse::<OperandFormat>().unwrap(),
            OperandFormat::Minifloat(FpFormatSpec::E5M2_NIA)
        );
        assert!("int6".parse::<OperandFormat>().is_err());
        assert!("fp32".parse::<OperandFormat>().is_err());
    }

    #[test]
    fn wide_and_integer_operands() {
        let one = decode_operand(0x3f80, &OperandFormat::Bf16).unwrap();
        assert_eq!(
            one,
            DecodedOperand::Fp19 {
                sign: false,
                exponent: 127,
                mantissa: 0
            }
        );
        assert_eq!(one.value(), 1.0);
        assert_eq!(
            decode_operand(255, &OperandFormat::Uint8).unwrap(),
            DecodedOperand::Int9 { value: 255 }
        );
        assert_eq!(
            decode_operand(0x80, &OperandFormat::Int8).unwrap(),
            DecodedOperand::Int9 { value: -128 }
        );
        assert!(decode_operand(0x7f80, &OperandFormat::Bf16).is_err());
        assert!(decode_operand(0x7c00, &OperandFormat::Fp16).is_err());
        assert!(decode_operand(0x100, &OperandFormat::Uint8).is_err());
    }

    #[test]
    fn fp16_and_bf16_embed_losslessly() {
        for raw in 0..=u16::MAX {
            for (fmt, reference) in [
                (OperandFormat::Fp16, half_to_f64(raw)),
                (
                    OperandFormat::Bf16,
                    f32::from_bits((raw as u32) << 16) as f64,
                ),
            ] {
                match decode_operand(raw, &fmt) {
                    Ok(op) => assert_eq!(op.value(), reference, "{fmt} {raw:#06x}"),
                    Err(_) => assert!(!reference.is_finite(), "{fmt} {raw:#06x}"),
                }
            }
        }
    }

    fn half_to_f64(raw: u16) -> f64 {
        let sign = if raw >> 15 != 0 { -1.0 } else { 1.0 };
        let e = ((raw >> 10) & 0x1f) as i32;
        let m = (raw & 0x3ff) as f64;
        match e {
            0 => sign * m * 2f64.powi(-24),
            31 => f64::NAN,
            _ => sign * (1.0 + m / 1024.0) * 2f64.powi(e - 15),
        }
    }

    #[test]
    fn e2m5_min_subnormal_survives() {
        let op =
            decode_operand(0b0_00_00001, &OperandFormat::Minifloat(FpFormatSpec::E2M5)).unwrap();
        assert_eq!(op.value(), 0.03125);
        let e5 =
            decode_operand(0b0_00000_01, &OperandFormat::Minifloat(FpFormatSpec::E5M2)).unwrap();
        assert_eq!(
            e5,
            DecodedOperand::Fp11 {
                sign: false,
                exponent: 0,
                mantissa: 8
            }
        );
    }

    #[test]
    fn minifloat_embedding_matches_codec() {
        for spec in [
            FpFormatSpec::E5M2,
            FpFormatSpec::E4M3,
            FpFormatSpec::E3M4,
            FpFormatSpec::E2M5,
            FpFormatSpec::E3M2,
            FpFormatSpec::E2M3,
            FpFormatSpec::E4M3_NIA,
            FpFormatSpec::E5M2_NIA,
        ] {
            let source = OperandFormat::Minifloat(spec);
            let mut seen = 0;
            for bits in 0..spec.code_count() {
                let Ok(code) = Code::new(bits as u8, NumberSystem::Fp(spec)) else {
                    assert!(decode_operand(bits, &source).is_err());
                    continue;
                };
                let op = decode_operand(bits, &source).unwrap();
                assert_eq!(op.value(), fp_decode(&code).unwrap(), "{spec} {bits:#x}");
                seen += 1;
            }
            assert_eq!(seen, enumerate_values(&spec).len() + 1);
        }
    }
}
