//! Number formats: the minifloat family (E5M2 ... E2M3) and symmetric integers.
//!
//! Every minifloat uses the bias `2^(e-1) - 1`. The exponent field value `0`
//! holds zero and the subnormals; the all-ones exponent field `2^e - 1` is
//! never a normal binade, except under the NIA E4M3 layout which keeps
//! `S.1111.000 ..= S.1111.110` as normals and spends only `S.1111.111` on NaN.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::FormatError;

/// How a format spends the all-ones exponent field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecialPolicy {
    /// No infinities or NaNs. The all-ones exponent field is left unused.
    Ours,
    /// Nvidia/Intel/Arm proposal: E4M3 reserves only `S.1111.111` (NaN),
    /// E5M2 follows IEEE-754.
    Nia,
    /// IEEE-754 style: all-ones exponent encodes Inf (zero mantissa) and NaN.
    Ieee754,
}

impl SpecialPolicy {
    fn suffix(self) -> &'static str {
        match self {
            SpecialPolicy::Ours => "",
            SpecialPolicy::Nia => ":nia",
            SpecialPolicy::Ieee754 => ":ieee",
        }
    }
}

/// What a bit pattern means under a given format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeClass {
    Zero,
    Subnormal,
    Normal,
    Infinity,
    NaN,
    /// Pattern carries no value: the all-ones exponent under `Ours`, or a
    /// subnormal pattern when subnormals are disabled.
    Unused,
}

impl CodeClass {
    pub fn is_finite_value(self) -> bool {
        matches!(
            self,
            CodeClass::Zero | CodeClass::Subnormal | CodeClass::Normal
        )
    }
}

/// A sign + `exponent_bits` + `mantissa_bits` minifloat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FpFormatSpec {
    exponent_bits: u8,
    mantissa_bits: u8,
    bias: i32,
    subnormals_enabled: bool,
    special_policy: SpecialPolicy,
}

impl FpFormatSpec {
    pub const E5M2: FpFormatSpec = FpFormatSpec::builtin(5, 2);
    pub const E4M3: FpFormatSpec = FpFormatSpec::builtin(4, 3);
    pub const E3M4: FpFormatSpec = FpFormatSpec::builtin(3, 4);
    pub const E2M5: FpFormatSpec = FpFormatSpec::builtin(2, 5);
    pub const E3M2: FpFormatSpec = FpFormatSpec::builtin(3, 2);
    pub const E2M3: FpFormatSpec = FpFormatSpec::builtin(2, 3);
    pub const E4M3_NIA: FpFormatSpec = FpFormatSpec::E4M3.with_policy_unchecked(SpecialPolicy::Nia);
    pub const E5M2_NIA: FpFormatSpec = FpFormatSpec::E5M2.with_policy_unchecked(SpecialPolicy::Nia);
    pub const E4M3_IEEE: FpFormatSpec =
        FpFormatSpec::E4M3.with_policy_unchecked(SpecialPolicy::Ieee754);
    pub const E5M2_IEEE: FpFormatSpec =
        FpFormatSpec::E5M2.with_policy_unchecked(SpecialPolicy::Ieee754);

    const fn builtin(exponent_bits: u8, mantissa_bits: u8) -> Self {
        FpFormatSpec {
            exponent_bits,
            mantissa_bits,
            bias: (1 << (exponent_bits - 1)) - 1,
            subnormals_enabled: true,
            special_policy: SpecialPolicy::Ours,
        }
    }

    const fn with_policy_unchecked(self, special_policy: SpecialPolicy) -> Self {
        FpFormatSpec {
            special_policy,
            ..self
        }
    }

    /// Builds a format with the standard bias and subnormals enabled.
    ///
    /// NIA and IEEE-754 layouts are only defined for E4M3 and E5M2.
    pub fn new(
        exponent_bits: u8,
        mantissa_bits: u8,
        special_policy: SpecialPolicy,
    ) -> Result<Self, FormatError> {
        if !(2..=5).contains(&exponent_bits)
            || !(2..=5).contains(&mantissa_bits)
            || !matches!(1 + exponent_bits + mantissa_bits, 6 | 8)
        {
            return Err(FormatError::UnsupportedLayout {
                exponent_bits,
                mantissa_bits,
            });
        }
        if special_policy != SpecialPolicy::Ours
            && !matches!((exponent_bits, mantissa_bits), (4, 3) | (5, 2))
        {
            return Err(FormatError::UnsupportedPolicy {
                exponent_bits,
                mantissa_bits,
                policy: special_policy,
            });
        }
        Ok(FpFormatSpec::builtin(exponent_bits, mantissa_bits)
            .with_policy_unchecked(special_policy))
    }

    pub const fn with_subnormals(self, enabled: bool) -> Self {
        FpFormatSpec {
            subnormals_enabled: enabled,
            ..self
        }
    }

    pub const fn exponent_bits(&self) -> u8 {
        self.exponent_bits
    }

    pub const fn mantissa_bits(&self) -> u8 {
        self.mantissa_bits
    }

    pub const fn bias(&self) -> i32 {
        self.bias
    }

    pub const fn subnormals_enabled(&self) -> bool {
        self.subnormals_enabled
    }

    pub const fn special_policy(&self) -> SpecialPolicy {
        self.special_policy
    }

    /// Total code width including the sign bit.
    pub const fn bit_width(&self) -> u8 {
        1 + self.exponent_bits + self.mantissa_bits
    }

    pub const fn code_count(&self) -> u16 {
        1 << self.bit_width()
    }

    pub(crate) const fn exponent_field_max(&self) -> u32 {
        (1 << self.exponent_bits) - 1
    }

    pub(crate) const fn mantissa_mask(&self) -> u32 {
        (1 << self.mantissa_bits) - 1
    }

    pub(crate) const fn sign_mask(&self) -> u32 {
        1 << (self.exponent_bits + self.mantissa_bits)
    }

    /// Classifies a raw code. Bits above the format width are ignored.
    pub fn classify(&self, bits: u8) -> CodeClass {
        let bits = bits as u32;
        let exp = (bits >> self.mantissa_bits) & self.exponent_field_max();
        let man = bits & self.mantissa_mask();
        if exp == 0 {
            return match (man, self.subnormals_enabled) {
                (0, _) => CodeClass::Zero,
                (_, true) => CodeClass::Subnormal,
                (_, false) => CodeClass::Unused,
            };
        }
        if exp < self.exponent_field_max() {
            return CodeClass::Normal;
        }
        match self.special_policy {
            SpecialPolicy::Ours => CodeClass::Unused,
            SpecialPolicy::Nia if self.exponent_bits == 4 => {
                if man == self.mantissa_mask() {
                    CodeClass::NaN
                } else {
                    CodeClass::Normal
                }
            }
            SpecialPolicy::Nia | SpecialPolicy::Ieee754 => {
                if man == 0 {
                    CodeClass::Infinity
                } else {
                    CodeClass::NaN
                }
            }
        }
    }

    /// Largest positive finite code.
    pub fn max_normal_bits(&self) -> u8 {
        let (exp, man) = if self.extends_top_binade() {
            (self.exponent_field_max(), self.mantissa_mask() - 1)
        } else {
            (self.exponent_field_max() - 1, self.mantissa_mask())
        };
        ((exp << self.mantissa_bits) | man) as u8
    }

    fn extends_top_binade(&self) -> bool {
        self.special_policy == SpecialPolicy::Nia && self.exponent_bits == 4
    }

    /// Unbiased exponent of the top binade reachable by finite codes.
    pub(crate) fn max_exponent(&self) -> i32 {
        let top_field = if self.extends_top_binade() {
            self.exponent_field_max()
        } else {
            self.exponent_field_max() - 1
        };
        top_field as i32 - self.bias
    }

    /// Number of codes that carry no finite value.
    pub fn reserved_code_count(&self) -> u16 {
        (0..self.code_count())
            .filter(|&c| !self.classify(c as u8).is_finite_value())
            .count() as u16
    }

    /// Short lowercase name such as `e4m3`, `e4m3:nia` or `e2m5:nosub`.
    pub fn name(&self) -> String {
        format!(
            "e{}m{}{}{}",
            self.exponent_bits,
            self.mantissa_bits,
            self.special_policy.suffix(),
            if self.subnormals_enabled {
                ""
            } else {
                ":nosub"
            }
        )
    }
}

impl fmt::Display for FpFormatSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// `2^k` as an exact `f64` for any `k` in the normal `f64` range.
pub(crate) fn pow2(k: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

/// Value of the largest finite positive code.
pub fn max_normal(spec: &FpFormatSpec) -> f64 {
    let bits = spec.max_normal_bits() as u32;
    let man = bits & spec.mantissa_mask();
    let frac = 1.0 + man as f64 / (1u32 << spec.mantissa_bits) as f64;
    frac * pow2(spec.max_exponent())
}

/// Smallest positive normal value, `2^(1 - bias)`.
pub fn min_normal(spec: &FpFormatSpec) -> f64 {
    pow2(1 - spec.bias)
}

/// Spacing of the subnormal grid, `2^(1 - bias - m)`.
pub fn subnormal_step(spec: &FpFormatSpec) -> f64 {
    pow2(1 - spec.bias - spec.mantissa_bits as i32)
}

/// Largest subnormal, `(2^m - 1) * 2^(1 - bias - m)`. Meaningful even when the
/// spec disables subnormals; it then describes the unused patterns.
pub fn max_subnormal(spec: &FpFormatSpec) -> f64 {
    spec.mantissa_mask() as f64 * subnormal_step(spec)
}

/// Smallest positive representable magnitude.
pub fn min_positive(spec: &FpFormatSpec) -> f64 {
    if spec.subnormals_enabled {
        subnormal_step(spec)
    } else {
        min_normal(spec)
    }
}

/// Every finite value of `spec`, ascending, with `+0` and `-0` merged.
pub fn enumerate_values(spec: &FpFormatSpec) -> Vec<f64> {
    let mut values: Vec<f64> = (0..spec.code_count())
        .filter_map(|c| crate::codec::decode_bits(c as u8, spec).ok())
        .collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// A quantization target: a symmetric signed integer or a minifloat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumberSystem {
    Int { bits: u8 },
    Fp(FpFormatSpec),
}

impl NumberSystem {
    pub const INT8: NumberSystem = NumberSystem::Int { bits: 8 };
    pub const INT6: NumberSystem = NumberSystem::Int { bits: 6 };
    pub const INT4: NumberSystem = NumberSystem::Int { bits: 4 };

    pub fn int(bits: u8) -> Result<Self, FormatError> {
        if matches!(bits, 4 | 6 | 8) {
            Ok(NumberSystem::Int { bits })
        } else {
            Err(FormatError::UnsupportedIntWidth(bits))
        }
    }

    pub fn is_int(&self) -> bool {
        matches!(self, NumberSystem::Int { .. })
    }

    pub fn is_fp(&self) -> bool {
        matches!(self, NumberSystem::Fp(_))
    }

    pub fn bit_width(&self) -> u8 {
        match self {
            NumberSystem::Int { bits } => *bits,
            NumberSystem::Fp(spec) => spec.bit_width(),
        }
    }

    /// Largest representable magnitude in code units (before scaling).
    pub fn max_magnitude(&self) -> f64 {
        match self {
            NumberSystem::Int { bits } => int_clip_bound(*bits) as f64,
            NumberSystem::Fp(spec) => max_normal(spec),
        }
    }

    pub fn same_family(&self, other: &NumberSystem) -> bool {
        self.is_int() == other.is_int()
    }

    pub fn name(&self) -> String {
        match self {
            NumberSystem::Int { bits } => format!("int{bits}"),
            NumberSystem::Fp(spec) => spec.name(),
        }
    }
}

/// Symmetric clip bound `2^(bits-1) - 1` of a signed integer format.
pub fn int_clip_bound(bits: u8) -> i32 {
    (1 << (bits - 1)) - 1
}

impl fmt::Display for NumberSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Serialize for NumberSystem {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.name())
    }
}

impl FromStr for NumberSystem {
    type Err = FormatError;

    /// Parses `int8`, `e4m3`, `e5m2:nia`, `e4m3:ieee`, `e2m5:nosub`, ...
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let mut parts = lower.split(':');
        let head = parts.next().unwrap_or_default();
        let unknown = || FormatError::UnknownName(s.to_string());

        if let Some(width) = head.strip_prefix("int") {
            let bits: u8 = width.parse().map_err(|_| unknown())?;
            if parts.next().is_some() {
                return Err(unknown());
            }
            return NumberSystem::int(bits);
        }

        let rest = head.strip_prefix('e').ok_or_else(unknown)?;
        let (e, m) = rest.split_once('m').ok_or_else(unknown)?;
        let e: u8 = e.parse().map_err(|_| unknown())?;
        let m: u8 = m.parse().map_err(|_| unknown())?;

        let mut policy = SpecialPolicy::Ours;
        let mut subnormals = true;
        for suffix in parts {
            match suffix {
                "nia" if policy == SpecialPolicy::Ours => policy = SpecialPolicy::Nia,
                "ieee" if policy == SpecialPolicy::Ours => policy = SpecialPolicy::Ieee754,
                "nosub" if subnormals => subnormals = false,
                _ => return Err(unknown()),
            }
        }
        Ok(NumberSystem::Fp(
            FpFormatSpec::new(e, m, policy)?.with_subnormals(subnormals),
        ))
    }
}

/// Built-in candidates in canonical order: INT first, then descending exponent width.
pub fn builtin_formats(bit_width: u8) -> Result<Vec<NumberSystem>, FormatError> {
    use NumberSystem::Fp;
    match bit_width {
        8 => Ok(vec![
            NumberSystem::INT8,
            Fp(FpFormatSpec::E5M2),
            Fp(FpFormatSpec::E4M3),
            Fp(FpFormatSpec::E3M4),
            Fp(FpFormatSpec::E2M5),
        ]),
        6 => Ok(vec![
            NumberSystem::INT6,
            Fp(FpFormatSpec::E3M2),
            Fp(FpFormatSpec::E2M3),
        ]),
        other => Err(FormatError::UnsupportedBitWidth(other)),
    }
}
