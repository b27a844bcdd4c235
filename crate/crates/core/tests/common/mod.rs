#![allow(dead_code)]

use flexquant::formats::{enumerate_values, NumberSystem};
use flexquant::FpFormatSpec;

/// Spacing of the grid at representable value `v > 0`, from the format
/// parameters alone.
fn ulp(v: f64, spec: &FpFormatSpec) -> f64 {
    let m = spec.mantissa_bits() as i32;
    let emin = 1 - spec.bias();
    let e = v.log2().floor() as i32;
    2f64.powi(e.max(emin) - m)
}

fn mantissa_is_even(v: f64, spec: &FpFormatSpec) -> bool {
    if v == 0.0 {
        return true;
    }
    let k = (v.abs() / ulp(v.abs(), spec)).round() as i64;
    k % 2 == 0
}

/// Brute-force nearest representable value with ties to the even mantissa
/// (and, if both neighbours are even, towards zero).
pub fn nearest_oracle(x: f64, grid: &[f64], spec: &FpFormatSpec) -> f64 {
    let mut best = grid[0];
    let mut best_d = (x - best).abs();
    for &v in &grid[1..] {
        let d = (x - v).abs();
        if d < best_d {
            best = v;
            best_d = d;
        } else if d == best_d {
            let (ev, eb) = (mantissa_is_even(v, spec), mantissa_is_even(best, spec));
            if (ev && !eb) || (ev == eb && v.abs() < best.abs()) {
                best = v;
            }
        }
    }
    best + 0.0
}

pub fn grid(spec: &FpFormatSpec) -> Vec<f64> {
    enumerate_values(spec)
}

pub fn all_fp_specs() -> Vec<FpFormatSpec> {
    let mut v = vec![
        FpFormatSpec::E5M2,
        FpFormatSpec::E4M3,
        FpFormatSpec::E3M4,
        FpFormatSpec::E2M5,
        FpFormatSpec::E3M2,
        FpFormatSpec::E2M3,
        FpFormatSpec::E4M3_NIA,
        FpFormatSpec::E5M2_NIA,
    ];
    let nosub: Vec<_> = v.iter().map(|s| s.with_subnormals(false)).collect();
    v.extend(nosub);
    v
}

pub fn all_systems() -> Vec<NumberSystem> {
    let mut v = vec![NumberSystem::INT8, NumberSystem::INT6, NumberSystem::INT4];
    v.extend(all_fp_specs().into_iter().map(NumberSystem::Fp));
    v
}

/// Value of a finite minifloat pattern computed straight from the field
/// layout, without the library decoder.
pub fn field_value(bits: u8, spec: &FpFormatSpec) -> f64 {
    let (e, m) = (spec.exponent_bits() as u32, spec.mantissa_bits() as u32);
    let raw = bits as u32;
    let man = raw & ((1 << m) - 1);
    let exp = (raw >> m) & ((1 << e) - 1);
    let sign = if raw >> (e + m) & 1 == 1 { -1.0 } else { 1.0 };
    let b = spec.bias();
    let mag = if exp == 0 {
        man as f64 * 2f64.powi(1 - b - m as i32)
    } else {
        (man + (1 << m)) as f64 * 2f64.powi(exp as i32 - b - m as i32)
    };
    sign * mag
}
