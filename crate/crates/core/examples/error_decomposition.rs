// Splits quantization MSE into clipping and rounding parts and compares the
// rounding part with its resolution bound.

use flexquant::synthetic::gaussian;
use flexquant::{error_breakdown, NumberSystem, QuantConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = gaussian(&[4096], 1.0, &mut rng);
    let system: NumberSystem = "e3m4".parse()?;
    let full = t.max_abs() as f64 / 15.5;

    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>12}",
        "scale", "total", "clip", "round", "bound"
    );
    // shrinking the scale trades rounding error for clipping error
    for frac in [1.0, 0.75, 0.5, 0.25] {
        let cfg = QuantConfig::new(system, full * frac)?;
        let b = error_breakdown(&t, &cfg);
        println!(
            "{frac:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            b.total, b.clip, b.round, b.resolution_bound
        );
        assert!(b.round <= b.resolution_bound);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
