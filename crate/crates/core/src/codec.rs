//! Scalar conversion between reals and minifloat / integer codes.
//!
//! Minifloat encoding rounds to the nearest representable value with ties
//! going to the even mantissa, and saturates at the largest finite value.
//! Decoded values are returned as `f64`, which holds every minifloat exactly.

use serde::Serialize;

use crate::error::CodecError;
use crate::formats::{
    int_clip_bound, max_normal, min_normal, pow2, subnormal_step, CodeClass, FpFormatSpec,
    NumberSystem,
};

/// A raw code together with the number system that gives it meaning.
///
/// Integer codes hold the two's-complement value in the low `bits` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Code {
    bits: u8,
    #[serde(rename = "format")]
    system: NumberSystem,
}

impl Code {
    /// Wraps raw bits, rejecting bits above the format width and, for
    /// minifloats, patterns that carry no finite value.
    pub fn new(bits: u8, system: NumberSystem) -> Result<Self, CodecError> {
        let width = system.bit_width();
        if width < 8 && bits >> width != 0 {
            return Err(CodecError::CodeTooWide { bits, width });
        }
        match system {
            NumberSystem::Fp(spec) => {
                let class = spec.classify(bits);
                if !class.is_finite_value() {
                    return Err(CodecError::ReservedCode {
                        bits,
                        format: spec.name(),
                        class,
                    });
                }
            }
            NumberSystem::Int { bits: w } => {
                let q = sign_extend(bits, w);
                let bound = int_clip_bound(w);
                if q.abs() > bound {
                    return Err(CodecError::IntOutOfRange { q, bound });
                }
            }
        }
        Ok(Code { bits, system })
    }

    /// The code of a signed integer value in an `INTn` format.
    pub fn from_int(q: i32, bits: u8) -> Result<Self, CodecError> {
        let system = NumberSystem::int(bits).map_err(|_| CodecError::FormatMismatch {
            expected: "int4/int6/int8",
            actual: format!("int{bits}"),
        })?;
        let bound = int_clip_bound(bits);
        if q.abs() > bound {
            return Err(CodecError::IntOutOfRange { q, bound });
        }
        let mask = ((1u16 << bits) - 1) as u8;
        Ok(Code {
            bits: (q as u8) & mask,
            system,
        })
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn system(&self) -> NumberSystem {
        self.system
    }

    /// Signed payload of an integer code.
    pub fn int_value(&self) -> Option<i32> {
        match self.system {
            NumberSystem::Int { bits } => Some(sign_extend(self.bits, bits)),
            NumberSystem::Fp(_) => None,
        }
    }
}

fn sign_extend(bits: u8, width: u8) -> i32 {
    let shift = 8 - width;
    (((bits << shift) as i8) >> shift) as i32
}

/// Decodes raw minifloat bits. `-0` decodes to `+0`.
pub fn decode_bits(bits: u8, spec: &FpFormatSpec) -> Result<f64, CodecError> {
    let raw = bits as u32;
    let m = spec.mantissa_bits() as i32;
    let man = raw & spec.mantissa_mask();
    let exp = ((raw >> m) & spec.exponent_field_max()) as i32;
    let magnitude = match spec.classify(bits) {
        CodeClass::Zero => return Ok(0.0),
        CodeClass::Subnormal => man as f64 * subnormal_step(spec),
        CodeClass::Normal => ((1u32 << m) + man) as f64 * pow2(exp - spec.bias() - m),
        class => {
            return Err(CodecError::ReservedCode {
                bits,
                format: spec.name(),
                class,
            })
        }
    };
    Ok(if raw & spec.sign_mask() != 0 {
        -magnitude
    } else {
        magnitude
    })
}

fn floor_log2(a: f64) -> i32 {
    debug_assert!(a.is_normal() && a > 0.0);
    ((a.to_bits() >> 52) & 0x7ff) as i32 - 1023
}

/// Magnitude bits (sign cleared) of the nearest code to `a >= 0`.
fn encode_magnitude(a: f64, spec: &FpFormatSpec) -> u32 {
    let top = spec.max_normal_bits() as u32;
    if a >= max_normal(spec) {
        return top;
    }
    let m = spec.mantissa_bits() as i32;
    let min_norm = min_normal(spec);
    if a < min_norm {
        if !spec.subnormals_enabled() {
            // only 0 and min-normal remain; the midpoint goes to 0
            return if a > min_norm / 2.0 { 1 << m } else { 0 };
        }
        // k == 2^m carries into the min-normal code
        return (a / subnormal_step(spec)).round_ties_even() as u32;
    }
    let e = floor_log2(a);
    let k = (a / pow2(e - m)).round_ties_even() as u32;
    let bits = (((e + spec.bias()) as u32) << m) + (k - (1 << m));
    bits.min(top)
}

/// Encodes a finite real to the nearest minifloat code.
pub fn fp_encode(x: f64, spec: &FpFormatSpec) -> Result<Code, CodecError> {
    if !x.is_finite() {
        return Err(CodecError::NonFinite(x));
    }
    let mag = encode_magnitude(x.abs(), spec);
    let sign = if mag != 0 && x < 0.0 {
        spec.sign_mask()
    } else {
        0
    };
    Ok(Code {
        bits: (sign | mag) as u8,
        system: NumberSystem::Fp(*spec),
    })
}

/// Decodes a minifloat code to its exact value.
pub fn fp_decode(code: &Code) -> Result<f64, CodecError> {
    match code.system {
        NumberSystem::Fp(spec) => decode_bits(code.bits, &spec),
        NumberSystem::Int { .. } => Err(CodecError::FormatMismatch {
            expected: "minifloat",
            actual: code.system.name(),
        }),
    }
}

/// Hot-loop form of [`fp_quantize_value`] for inputs already known finite.
pub(crate) fn quantize_finite(x: f64, spec: &FpFormatSpec) -> f64 {
    let bits = encode_magnitude(x.abs(), spec) as u8;
    let v = decode_bits(bits, spec).expect("encoder emits only finite codes");
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// `decode(encode(x))`: the nearest representable value of `spec`.
pub fn fp_quantize_value(x: f64, spec: &FpFormatSpec) -> Result<f64, CodecError> {
    if !x.is_finite() {
        return Err(CodecError::NonFinite(x));
    }
    Ok(quantize_finite(x, spec) + 0.0)
}

fn check_step(step: f64) -> Result<(), CodecError> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(CodecError::InvalidStep(step))
    }
}

/// `clip(round_half_even(x / step), -c, c)` with `c = 2^(bits-1) - 1`.
pub fn int_quantize(x: f64, step: f64, bits: u8) -> Result<i32, CodecError> {
    check_step(step)?;
    if !x.is_finite() {
        return Err(CodecError::NonFinite(x));
    }
    let bound = int_clip_bound(bits) as f64;
    Ok((x / step).round_ties_even().clamp(-bound, bound) as i32)
}

pub fn int_dequantize(q: i32, step: f64, bits: u8) -> Result<f64, CodecError> {
    check_step(step)?;
    let bound = int_clip_bound(bits);
    if q.abs() > bound {
        return Err(CodecError::IntOutOfRange { q, bound });
    }
    Ok(q as f64 * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{enumerate_values, min_positive};

    #[test]
    fn max_normal_pattern() {
        let code = fp_encode(240.0, &FpFormatSpec::E4M3).unwrap();
        assert_eq!(code.bits(), 0b0_1110_111);
        let sat = fp_encode(1000.0, &FpFormatSpec::E4M3).unwrap();
        assert_eq!(fp_decode(&sat).unwrap(), 240.0);
        let neg = fp_encode(-1e9, &FpFormatSpec::E4M3).unwrap();
        assert_eq!(fp_decode(&neg).unwrap(), -240.0);
        assert_eq!(neg.bits(), 0b1_1110_111);
    }

    #[test]
    fn nia_rounding_near_the_nan_pattern_saturates() {
        let nia = FpFormatSpec::E4M3_NIA;
        // 470 would round to 480 = S.1111.111, which is NaN under NIA
        assert_eq!(fp_quantize_value(470.0, &nia).unwrap(), 448.0);
        assert_eq!(fp_encode(470.0, &nia).unwrap().bits(), 0b0_1111_110);
    }

    #[test]
    fn zero_and_negative_zero() {
        for spec in [
            FpFormatSpec::E5M2,
            FpFormatSpec::E2M5,
            FpFormatSpec::E4M3_NIA,
        ] {
            assert_eq!(fp_encode(0.0, &spec).unwrap().bits(), 0);
            assert_eq!(fp_encode(-0.0, &spec).unwrap().bits(), 0);
        }
        let v = decode_bits(0b1_00000_00, &FpFormatSpec::E5M2).unwrap();
        assert_eq!(v, 0.0);
        assert!(v.is_sign_positive());
        assert!(fp_quantize_value(-1e-30, &FpFormatSpec::E4M3)
            .unwrap()
            .is_sign_positive());
    }

    #[test]
    fn subnormal_examples() {
        let e2m5 = FpFormatSpec::E2M5;
        assert_eq!(fp_encode(0.03125, &e2m5).unwrap().bits(), 0b0_00_00001);
        assert_eq!(
            decode_bits(0b0_0000_001, &FpFormatSpec::E4M3).unwrap(),
            0.001953125
        );
        assert_eq!(
            decode_bits(0b0_110_1111, &FpFormatSpec::E3M4).unwrap(),
            15.5
        );
        assert_eq!(fp_quantize_value(3.9375, &e2m5).unwrap(), 3.9375);
        assert_eq!(fp_quantize_value(0.5, &e2m5).unwrap(), 0.5);
    }

    #[test]
    fn disabled_subnormals_collapse() {
        let nosub = FpFormatSpec::E2M5.with_subnormals(false);
        assert_eq!(fp_quantize_value(0.5, &nosub).unwrap(), 0.0);
        assert_eq!(fp_quantize_value(0.5000001, &nosub).unwrap(), 1.0);
        assert_eq!(fp_quantize_value(-0.7, &nosub).unwrap(), -1.0);
        assert_eq!(fp_quantize_value(0.3, &nosub).unwrap(), 0.0);
        assert_eq!(min_positive(&nosub), 1.0);
        assert!(matches!(
            decode_bits(0b0_00_00001, &nosub),
            Err(CodecError::ReservedCode {
                class: CodeClass::Unused,
                ..
            })
        ));
    }

    #[test]
    fn ties_go_to_even_mantissa() {
        let spec = FpFormatSpec::E3M4;
        // 1.0 = 1.0000b (even), 1.0625 = 1.0001b (odd), 1.125 = 1.0010b (even)
        assert_eq!(fp_quantize_value(1.03125, &spec).unwrap(), 1.0);
        assert_eq!(fp_quantize_value(1.09375, &spec).unwrap(), 1.125);
        // across a binade: 1.96875 (odd) vs 2.0 (even)
        assert_eq!(fp_quantize_value(1.984375, &spec).unwrap(), 2.0);
        // half the min subnormal goes to zero
        let step = crate::formats::subnormal_step(&spec);
        assert_eq!(fp_quantize_value(step / 2.0, &spec).unwrap(), 0.0);
        assert_eq!(fp_quantize_value(step * 1.5, &spec).unwrap(), step * 2.0);
    }

    #[test]
    fn representable_values_are_fixed_points() {
        for spec in [
            FpFormatSpec::E5M2,
            FpFormatSpec::E3M2,
            FpFormatSpec::E4M3_NIA,
        ] {
            for v in enumerate_values(&spec) {
                assert_eq!(fp_quantize_value(v, &spec).unwrap(), v);
            }
        }
    }

    #[test]
    fn rejects_non_finite_and_reserved() {
        assert!(matches!(
            fp_encode(f64::NAN, &FpFormatSpec::E4M3),
            Err(CodecError::NonFinite(_))
        ));
        assert!(fp_encode(f64::INFINITY, &FpFormatSpec::E4M3).is_err());
        let nan = Code::new(0x7f, NumberSystem::Fp(FpFormatSpec::E4M3_NIA));
        assert!(matches!(
            nan,
            Err(CodecError::ReservedCode {
                class: CodeClass::NaN,
                ..
            })
        ));
        assert!(Code::new(0x7f, NumberSystem::Fp(FpFormatSpec::E4M3)).is_err());
        assert!(Code::new(0x40, NumberSystem::Fp(FpFormatSpec::E3M2)).is_err());
        assert!(fp_decode(&Code::from_int(3, 8).unwrap()).is_err());
    }

    #[test]
    fn integer_quantization() {
        assert_eq!(int_quantize(1.0, 1.0 / 127.0, 8).unwrap(), 127);
        assert_eq!(int_quantize(-5.0, 1.0, 8).unwrap(), -5);
        assert_eq!(int_quantize(200.0, 1.0, 8).unwrap(), 127);
        assert_eq!(int_quantize(-200.0, 1.0, 8).unwrap(), -127);
        assert_eq!(int_quantize(2.5, 1.0, 8).unwrap(), 2);
        assert_eq!(int_quantize(40.0, 1.0, 6).unwrap(), 31);
        assert_eq!(int_dequantize(127, 1.0 / 127.0, 8).unwrap(), 1.0);
        assert_eq!(int_dequantize(0, 0.3, 8).unwrap(), 0.0);
        assert!(matches!(
            int_quantize(1.0, 0.0, 8),
            Err(CodecError::InvalidStep(_))
        ));
        assert!(matches!(
            int_quantize(1.0, -1.0, 8),
            Err(CodecError::InvalidStep(_))
        ));
        assert!(matches!(
            int_dequantize(128, 1.0, 8),
            Err(CodecError::IntOutOfRange { q: 128, bound: 127 })
        ));
    }

    #[test]
    fn int_codes() {
        let c = Code::from_int(-1, 8).unwrap();
        assert_eq!(c.bits(), 0xff);
        assert_eq!(c.int_value(), Some(-1));
        let c6 = Code::from_int(-31, 6).unwrap();
        assert_eq!(c6.bits(), 0b100001);
        assert_eq!(c6.int_value(), Some(-31));
        assert!(Code::from_int(-128, 8).is_err());
        assert!(Code::new(0x80, NumberSystem::INT8).is_err());
        assert!(Code::new(0x40, NumberSystem::INT6).is_err());
    }
}
