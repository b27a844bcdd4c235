// Encodes reals into minifloat codes and walks every code of each format.

use flexquant::formats::enumerate_values;
use flexquant::{fp_decode, fp_encode, Code, FpFormatSpec, NumberSystem};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let spec = FpFormatSpec::E4M3;
    for x in [0.3, 1.0, 1.0625, 1.1875, -17.0, 240.0, 1000.0, 1e-4] {
        let code = fp_encode(x, &spec)?;
        println!("{x:>8} -> {:08b} -> {}", code.bits(), fp_decode(&code)?);
    }

    let nia = FpFormatSpec::E4M3_NIA;
    println!(
        "470 in {nia} saturates to {}",
        fp_decode(&fp_encode(470.0, &nia)?)?
    );

    let specs = [
        FpFormatSpec::E5M2,
        FpFormatSpec::E4M3,
        FpFormatSpec::E3M4,
        FpFormatSpec::E2M5,
        FpFormatSpec::E3M2,
        FpFormatSpec::E2M3,
        FpFormatSpec::E4M3_NIA,
        FpFormatSpec::E5M2_NIA,
    ];
    for spec in specs {
        let mut valid = 0;
        for bits in 0..spec.code_count() {
            let Ok(code) = Code::new(bits as u8, NumberSystem::Fp(spec)) else {
                continue;
            };
            let v = fp_decode(&code)?;
            let back = fp_encode(v, &spec)?;
            // -0 collapses onto +0
            if v != 0.0 {
                assert_eq!(back, code, "{spec} {bits:#x}");
            }
            valid += 1;
        }
        println!(
            "{:<9} {valid:>3} valid codes, {:>3} distinct values",
            spec.name(),
            enumerate_values(&spec).len()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
