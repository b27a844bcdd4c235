mod common;

use common::{all_fp_specs, all_systems, grid, nearest_oracle};
use flexquant::formats::max_normal;
use flexquant::tensorio::{decode_tensor, encode_tensor};
use flexquant::{fp_quantize_value, NumberSystem, QuantConfig, Tensor};
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = flexquant::FpFormatSpec> {
    prop::sample::select(all_fp_specs())
}

fn system_strategy() -> impl Strategy<Value = NumberSystem> {
    prop::sample::select(all_systems())
}

/// Reals spread over many binades on both sides of each format's range.
fn real() -> impl Strategy<Value = f64> {
    (any::<bool>(), -20.0f64..18.0).prop_map(|(neg, e)| {
        let v = e.exp2();
        if neg {
            -v
        } else {
            v
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn matches_nearest_oracle(spec in spec_strategy(), x in real()) {
        let g = grid(&spec);
        prop_assert_eq!(fp_quantize_value(x, &spec).unwrap(), nearest_oracle(x, &g, &spec));
    }

    #[test]
    fn monotone(spec in spec_strategy(), a in real(), b in real()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(fp_quantize_value(lo, &spec).unwrap() <= fp_quantize_value(hi, &spec).unwrap());
    }

    #[test]
    fn sign_symmetric(spec in spec_strategy(), x in real()) {
        prop_assert_eq!(fp_quantize_value(-x, &spec).unwrap(), -fp_quantize_value(x, &spec).unwrap());
    }

    #[test]
    fn saturates(spec in spec_strategy(), k in 1.0f64..1e6) {
        let m = max_normal(&spec);
        prop_assert_eq!(fp_quantize_value(m * k, &spec).unwrap(), m);
        prop_assert_eq!(fp_quantize_value(-m * k, &spec).unwrap(), -m);
    }

    #[test]
    fn idempotent(spec in spec_strategy(), x in real()) {
        let q = fp_quantize_value(x, &spec).unwrap();
        prop_assert_eq!(fp_quantize_value(q, &spec).unwrap(), q);
    }

    #[test]
    fn power_of_two_scale_equivariance(
        system in system_strategy(),
        x in real(),
        s in 0.01f64..10.0,
        k in -6i32..6,
    ) {
        let p = 2f64.powi(k);
        let a = QuantConfig::new(system, s).unwrap();
        let b = QuantConfig::new(system, s * p).unwrap();
        prop_assert_eq!(b.quantize_scalar(x * p), a.quantize_scalar(x) * p);
    }

    #[test]
    fn element_error_within_half_resolution(system in system_strategy(), x in real(), s in 0.01f64..10.0) {
        let cfg = QuantConfig::new(system, s).unwrap();
        prop_assume!(x.abs() <= cfg.clip_bound());
        let err = (x - cfg.quantize_scalar(x)).abs();
        prop_assert!(err <= cfg.resolution_at(x) / 2.0, "err {} r {}", err, cfg.resolution_at(x));
    }

    #[test]
    fn clipped_elements_land_on_the_bound(
        system in system_strategy(),
        k in 1.0f64..1e4,
        neg in any::<bool>(),
        s in 0.01f64..10.0,
    ) {
        let cfg = QuantConfig::new(system, s).unwrap();
        let x = if neg { -k } else { k } * cfg.clip_bound();
        let q = cfg.quantize_scalar(x);
        prop_assert_eq!(q.abs(), cfg.clip_bound());
        prop_assert_eq!(q.signum(), x.signum());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn tensor_file_roundtrip(
        dims in prop::collection::vec(1usize..5, 1..4),
        seed in any::<u64>(),
    ) {
        let n: usize = dims.iter().product();
        let data: Vec<f32> = (0..n)
            .map(|i| ((seed.wrapping_mul(i as u64 + 1) % 2001) as f32 - 1000.0) * 0.37)
            .collect();
        let t = Tensor::new(dims, data).unwrap();
        let bytes = encode_tensor(&t).unwrap();
        prop_assert_eq!(decode_tensor(&bytes).unwrap(), t);
    }

    #[test]
    fn decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_tensor(&bytes);
    }

    #[test]
    fn decoder_survives_header_corruption(pos in 0usize..24, byte in any::<u8>()) {
        let t = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut bytes = encode_tensor(&t).unwrap();
        bytes[pos] = byte;
        if let Ok(back) = decode_tensor(&bytes) {
            prop_assert_eq!(encode_tensor(&back).unwrap(), bytes);
        }
    }
}
