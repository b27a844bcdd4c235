// Dot products through the multiplier model, with their traces.

use flexquant::datapath::{dot, dot_int8, lanes_used, multiply_cycles, OperandFormat};
use flexquant::{fp_encode, Code, DatapathError, FpFormatSpec};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let out = dot_int8(&[1, 2, -3], &[3, 4, 5], 0.5, 10)?;
    println!(
        "int8: {} (accumulator {:?})",
        out.value, out.trace.accumulator
    );

    let a: Vec<Code> = [1.5, -2.0, 0.1]
        .iter()
        .map(|&x| fp_encode(x, &FpFormatSpec::E4M3))
        .collect::<Result<_, _>>()?;
    let b: Vec<Code> = [2.5, 0.25, 12.0]
        .iter()
        .map(|&x| fp_encode(x, &FpFormatSpec::E5M2))
        .collect::<Result<_, _>>()?;
    let out = dot(&a, &b, 1.0, 0.0)?;
    println!("e4m3 . e5m2 = {}", out.value);
    println!("{}", serde_json::to_string(&out.trace)?);
    assert_eq!(out.trace.replay(), out.value);

    let ints = vec![Code::from_int(1, 8)?; 3];
    match dot(&ints, &b, 1.0, 0.0) {
        Err(DatapathError::UnsupportedMixedOperands) => println!("int8 x e5m2: rejected"),
        other => panic!("unexpected {other:?}"),
    }

    for f in ["bf16", "fp16", "e4m3", "int8"] {
        let f: OperandFormat = f.parse()?;
        println!(
            "{f:<5} lane {:?} x{} -> {} cycles for 64 products",
            f.lane(),
            lanes_used(&f),
            multiply_cycles(64, &f)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
