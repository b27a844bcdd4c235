// Quantization error of E2M5 with and without subnormals.

use flexquant::synthetic::gaussian;
use flexquant::{calibrate_minmax, error_breakdown, FpFormatSpec, NumberSystem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let with = NumberSystem::Fp(FpFormatSpec::E2M5);
    let without = NumberSystem::Fp(FpFormatSpec::E2M5.with_subnormals(false));
    println!(
        "{:>4} {:>12} {:>12} {:>8}",
        "seed",
        with.name(),
        without.name(),
        "ratio"
    );
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = gaussian(&[4096], 1.0, &mut rng);
        let a = error_breakdown(&t, &calibrate_minmax(&t, with)).total;
        let b = error_breakdown(&t, &calibrate_minmax(&t, without)).total;
        println!("{seed:>4} {a:>12.4e} {b:>12.4e} {:>8.1}", b / a);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
