//! Per-tensor symmetric calibration and simulated quantization.
//!
//! INT and FP share one formulation: an element is divided by the scale,
//! rounded on the format's grid with local resolution `r`, clipped to the
//! format's largest magnitude and multiplied back.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{fp_encode, quantize_finite, Code};
use crate::error::{QuantError, TensorError};
use crate::formats::{int_clip_bound, min_normal, pow2, subnormal_step, NumberSystem};
use crate::tensor::Tensor;

/// A number system with its per-tensor scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantConfig {
    system: NumberSystem,
    scale: f64,
    clip_bound: f64,
    degenerate: bool,
}

impl QuantConfig {
    pub fn new(system: NumberSystem, scale: f64) -> Result<Self, QuantError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(QuantError::InvalidScale(scale));
        }
        Ok(QuantConfig {
            system,
            scale,
            clip_bound: system.max_magnitude() * scale,
            degenerate: false,
        })
    }

    pub fn system(&self) -> NumberSystem {
        self.system
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Largest reconstructible magnitude in real units.
    pub fn clip_bound(&self) -> f64 {
        self.clip_bound
    }

    /// Set when calibration saw an all-zero tensor and fell back to scale 1.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Simulated value of one element.
    pub fn quantize_scalar(&self, x: f64) -> f64 {
        match self.system {
            NumberSystem::Int { bits } => {
                let bound = int_clip_bound(bits) as f64;
                (x / self.scale).round_ties_even().clamp(-bound, bound) * self.scale
            }
            NumberSystem::Fp(spec) => quantize_finite(x / self.scale, &spec) * self.scale,
        }
    }

    /// Local resolution `r` at element `x`, in real units.
    pub fn resolution_at(&self, x: f64) -> f64 {
        let spec = match self.system {
            NumberSystem::Int { .. } => return self.scale,
            NumberSystem::Fp(spec) => spec,
        };
        let u = x.abs() / self.scale;
        let min_norm = min_normal(&spec);
        if u < min_norm {
            // below min-normal the gap is the subnormal step, or the whole
            // [0, min_normal] interval when subnormals are off
            return self.scale
                * if spec.subnormals_enabled() {
                    subnormal_step(&spec)
                } else {
                    min_norm
                };
        }
        let binade = (((u.to_bits() >> 52) & 0x7ff) as i32 - 1023).min(spec.max_exponent());
        self.scale * pow2(binade - spec.mantissa_bits() as i32)
    }
}

/// MinMax calibration: the largest magnitude maps onto the largest code.
///
/// The scale is nudged up by at most one ulp so that `clip_bound >= max|t|`
/// holds exactly; MinMax therefore never clips.
pub fn calibrate_minmax(t: &Tensor, system: NumberSystem) -> QuantConfig {
    let maxabs = t.max_abs() as f64;
    if maxabs == 0.0 {
        let mut cfg = QuantConfig::new(system, 1.0).expect("unit scale is valid");
        cfg.degenerate = true;
        return cfg;
    }
    let top = system.max_magnitude();
    let mut scale = maxabs / top;
    while scale * top < maxabs {
        scale = scale.next_up();
    }
    QuantConfig::new(system, scale).expect("positive finite scale")
}

/// Simulated (quantize-dequantize) values, shape preserved.
pub fn quantize_values(t: &Tensor, cfg: &QuantConfig) -> Tensor {
    let data = t
        .data()
        .iter()
        .map(|&x| cfg.quantize_scalar(x as f64) as f32)
        .collect();
    Tensor::from_parts_unchecked(t.shape().to_vec(), data)
}

/// Simulated values plus the emitted codes.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub values: Tensor,
    pub codes: Vec<Code>,
}

pub fn quantize_tensor(t: &Tensor, cfg: &QuantConfig) -> Result<QuantizedTensor, QuantError> {
    let codes = t
        .data()
        .iter()
        .map(|&x| {
            let u = x as f64 / cfg.scale;
            match cfg.system {
                NumberSystem::Int { bits } => {
                    let bound = int_clip_bound(bits) as f64;
                    Code::from_int(u.round_ties_even().clamp(-bound, bound) as i32, bits)
                }
                NumberSystem::Fp(spec) => fp_encode(u, &spec),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(QuantizedTensor {
        values: quantize_values(t, cfg),
        codes,
    })
}

/// Per-element resolutions `r_i`, aligned with the tensor's data.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionProfile(Vec<f64>);

impl ResolutionProfile {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn resolution_profile(t: &Tensor, cfg: &QuantConfig) -> ResolutionProfile {
    ResolutionProfile(
        t.data()
            .iter()
            .map(|&x| cfg.resolution_at(x as f64))
            .collect(),
    )
}

/// Picks at most `max_rows` rows of a rank-2 tensor with a seeded shuffle,
/// keeping the chosen rows in their original order.
pub fn sample_calibration_rows(
    x: &Tensor,
    max_rows: usize,
    seed: u64,
) -> Result<Tensor, TensorError> {
    let (rows, cols) = x.matrix_dims()?;
    if rows <= max_rows {
        return Ok(x.clone());
    }
    let mut idx: Vec<usize> = (0..rows).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen = idx[..max_rows.max(1)].to_vec();
    chosen.sort_unstable();
    let data = chosen
        .iter()
        .flat_map(|&i| x.row(i).iter().copied())
        .collect();
    Ok(Tensor::from_parts_unchecked(vec![chosen.len(), cols], data))
}
