//! Seeded synthetic tensors and layer suites.
//!
//! Stand-ins for real weights and calibration batches: bell-shaped,
//! heavy-tailed, flat and outlier-heavy distributions, so that different
//! layers favour different formats.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal, StudentT, Uniform};

use crate::search::Layer;
use crate::tensor::Tensor;

fn build(shape: &[usize], data: Vec<f32>) -> Tensor {
    Tensor::new(shape.to_vec(), data).expect("generated data is finite and well-shaped")
}

fn count(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub fn gaussian(shape: &[usize], std: f32, rng: &mut impl Rng) -> Tensor {
    let normal = Normal::new(0.0, std).expect("valid std");
    build(
        shape,
        (0..count(shape)).map(|_| normal.sample(rng)).collect(),
    )
}

pub fn laplace(shape: &[usize], scale: f32, rng: &mut impl Rng) -> Tensor {
    let data = (0..count(shape))
        .map(|_| {
            let e: f32 = Exp1.sample(rng);
            if rng.random::<bool>() {
                e * scale
            } else {
                -e * scale
            }
        })
        .collect();
    build(shape, data)
}

pub fn uniform(shape: &[usize], half_width: f32, rng: &mut impl Rng) -> Tensor {
    let u = Uniform::new_inclusive(-half_width, half_width).expect("valid range");
    build(shape, (0..count(shape)).map(|_| u.sample(rng)).collect())
}

/// Student-t with `dof` degrees of freedom, clamped to `±limit` so that a
/// single draw cannot dominate the scale.
pub fn student_t(shape: &[usize], dof: f32, limit: f32, rng: &mut impl Rng) -> Tensor {
    let t = StudentT::new(dof).expect("positive dof");
    build(
        shape,
        (0..count(shape))
            .map(|_| t.sample(rng).clamp(-limit, limit))
            .collect(),
    )
}

/// `max(0, N(0, std))`: post-ReLU activations.
pub fn relu_gaussian(shape: &[usize], std: f32, rng: &mut impl Rng) -> Tensor {
    build(
        shape,
        (0..count(shape))
            .map(|_| {
                let z: f32 = StandardNormal.sample(rng);
                (z * std).max(0.0)
            })
            .collect(),
    )
}

/// Random multiples `k * step` with `|k| <= 127` and at least one `|k| = 127`,
/// so MinMax INT8 calibration recovers `step` and reproduces the tensor.
pub fn int_grid_tensor(shape: &[usize], step: f32, rng: &mut impl Rng) -> Tensor {
    let n = count(shape);
    let mut data: Vec<f32> = (0..n)
        .map(|_| rng.random_range(-127i32..=127) as f32 * step)
        .collect();
    data[rng.random_range(0..n)] = 127.0 * step;
    build(shape, data)
}

/// Gaussian with a handful of large outliers.
pub fn gaussian_with_outliers(
    shape: &[usize],
    std: f32,
    outliers: usize,
    magnitude: f32,
    rng: &mut impl Rng,
) -> Tensor {
    let mut data = gaussian(shape, std, rng).into_data();
    let n = data.len();
    for _ in 0..outliers {
        let i = rng.random_range(0..n);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        data[i] = sign * magnitude * rng.random_range(0.5f32..=1.0);
    }
    build(shape, data)
}

/// Dimensions of one synthetic layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub out_features: usize,
    pub in_features: usize,
    pub batch: usize,
}

impl Default for LayerShape {
    fn default() -> Self {
        LayerShape {
            out_features: 64,
            in_features: 64,
            batch: 256,
        }
    }
}

/// `count` layers with weight and activation distributions cycling through
/// a fixed menu. Layer `i` is generated from its own stream derived from
/// `seed`, so a prefix of a suite matches a shorter suite.
pub fn layer_suite(count: usize, shape: LayerShape, seed: u64) -> Vec<Layer> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let w_shape = [shape.out_features, shape.in_features];
            let x_shape = [shape.batch, shape.in_features];
            let std = 0.02 + 0.1 * rng.random::<f32>();
            let weights = match i % 5 {
                0 | 3 => gaussian(&w_shape, std, &mut rng),
                1 => laplace(&w_shape, std, &mut rng),
                2 => uniform(&w_shape, 2.0 * std, &mut rng),
                _ => student_t(&w_shape, 3.0, 20.0 * std, &mut rng),
            };
            let inputs = match i % 4 {
                0 => relu_gaussian(&x_shape, 1.0, &mut rng),
                1 => gaussian(&x_shape, 1.0, &mut rng),
                2 => laplace(&x_shape, 0.5, &mut rng),
                _ => gaussian_with_outliers(&x_shape, 1.0, 8, 40.0, &mut rng),
            };
            Layer::new(format!("layer{i:02}"), weights, inputs)
        })
        .collect()
}
