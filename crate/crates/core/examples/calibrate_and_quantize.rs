// MinMax calibration of one tensor into every 8-bit format.

use flexquant::synthetic::laplace;
use flexquant::{builtin_formats, calibrate_minmax, mse, quantize_tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let t = laplace(&[64, 64], 0.05, &mut rng);
    println!("tensor {:?}, max |x| = {}", t.shape(), t.max_abs());
    println!(
        "{:<6} {:>12} {:>12} {:>12}",
        "format", "scale", "clip bound", "mse"
    );
    for system in builtin_formats(8)? {
        let cfg = calibrate_minmax(&t, system);
        let q = quantize_tensor(&t, &cfg)?;
        println!(
            "{:<6} {:>12.6e} {:>12.6} {:>12.4e}",
            system.name(),
            cfg.scale(),
            cfg.clip_bound(),
            mse(&t, &q.values)?
        );
        assert!(cfg.clip_bound() >= t.max_abs() as f64);
        assert_eq!(q.codes.len(), t.len());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
