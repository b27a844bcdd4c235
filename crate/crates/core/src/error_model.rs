//! Quantization error split into clipping and rounding parts, and the
//! resolution bound `(1/4I) Σ r_i²` over the non-clipped elements.
//!
//! All sums run in `f64` in index order so results are bit-reproducible.

use serde::Serialize;

use crate::error::TensorError;
use crate::quantizer::QuantConfig;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBreakdown {
    pub total: f64,
    pub clip: f64,
    pub round: f64,
    pub count: usize,
    pub resolution_bound: f64,
}

pub fn error_breakdown(t: &Tensor, cfg: &QuantConfig) -> ErrorBreakdown {
    let c = cfg.clip_bound();
    let (mut total, mut clip, mut round, mut res) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &x in t.data() {
        let x = x as f64;
        let err = x - cfg.quantize_scalar(x);
        total += err * err;
        if x.abs() > c {
            let over = x.abs() - c;
            clip += over * over;
        } else {
            round += err * err;
            let r = cfg.resolution_at(x);
            res += r * r;
        }
    }
    let n = t.len() as f64;
    ErrorBreakdown {
        total: total / n,
        clip: clip / n,
        round: round / n,
        count: t.len(),
        resolution_bound: res / (4.0 * n),
    }
}

/// Only the resolution bound; skips quantizing entirely.
pub fn resolution_bound(t: &Tensor, cfg: &QuantConfig) -> f64 {
    let c = cfg.clip_bound();
    let sum = t
        .data()
        .iter()
        .map(|&x| x as f64)
        .filter(|x| x.abs() <= c)
        .fold(0.0, |acc, x| {
            let r = cfg.resolution_at(x);
            acc + r * r
        });
    sum / (4.0 * t.len() as f64)
}

/// Mean squared error between two tensors of equal shape.
pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64, TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(mse_slices(
        a.data().iter().map(|&v| v as f64),
        b.data().iter().map(|&v| v as f64),
        a.len(),
    ))
}

pub(crate) fn mse_slices(
    a: impl Iterator<Item = f64>,
    b: impl Iterator<Item = f64>,
    n: usize,
) -> f64 {
    a.zip(b).fold(0.0, |acc, (x, y)| acc + (x - y) * (x - y)) / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{FpFormatSpec, NumberSystem};
    use crate::quantizer::{calibrate_minmax, quantize_values};

    const E3M4: NumberSystem = NumberSystem::Fp(FpFormatSpec::E3M4);

    #[test]
    fn exact_values_have_no_error() {
        let t = Tensor::from_vec(vec![0.5, -15.5, 10.0, 0.0625]).unwrap();
        let b = error_breakdown(&t, &QuantConfig::new(E3M4, 1.0).unwrap());
        assert_eq!((b.total, b.clip, b.round), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_element_bound() {
        let t = Tensor::from_vec(vec![10.0]).unwrap();
        let b = error_breakdown(&t, &QuantConfig::new(E3M4, 1.0).unwrap());
        assert_eq!(b.round, 0.0);
        assert_eq!(b.resolution_bound, 0.0625);
        assert_eq!(b.count, 1);
    }

    #[test]
    fn clipping_is_separated() {
        let t = Tensor::from_vec(vec![20.0, -18.0, 1.03125]).unwrap();
        let b = error_breakdown(&t, &QuantConfig::new(E3M4, 1.0).unwrap());
        // |20| - 15.5 = 4.5, |18| - 15.5 = 2.5; 1.03125 ties to 1.0
        assert_eq!(b.clip, (4.5f64 * 4.5 + 2.5 * 2.5) / 3.0);
        assert_eq!(b.round, 0.03125f64 * 0.03125 / 3.0);
        assert!((b.total - (b.clip + b.round)).abs() <= 1e-12 * b.total);
        // only the unclipped element contributes: r = 2^(0-4)
        assert_eq!(b.resolution_bound, 0.0625f64 * 0.0625 / 12.0);
    }

    #[test]
    fn mse_examples() {
        let a = Tensor::from_vec(vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(vec![0.0, 2.0]).unwrap();
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        assert_eq!(mse(&a, &b).unwrap(), 0.5);
        let c = Tensor::new(vec![1, 2], vec![0.0, 2.0]).unwrap();
        assert!(mse(&a, &c).is_err());
    }

    #[test]
    fn total_matches_mse_of_simulated_tensor() {
        let t = Tensor::from_vec((0..97).map(|i| (i as f32 * 0.37).sin() * 3.0).collect()).unwrap();
        let cfg = calibrate_minmax(&t, E3M4);
        let b = error_breakdown(&t, &cfg);
        let m = mse(&t, &quantize_values(&t, &cfg)).unwrap();
        // the simulated tensor is stored as f32
        assert!((b.total - m).abs() <= 1e-4 * b.total);
        assert_eq!(b.clip, 0.0);
        assert!(b.round <= b.resolution_bound);
        assert_eq!(resolution_bound(&t, &cfg), b.resolution_bound);
    }
}
