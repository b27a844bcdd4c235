// Prints the built-in format table and the representable grid of one format.

use flexquant::cli::{formats_table, TableFormat};
use flexquant::formats::{enumerate_values, max_normal, min_positive};
use flexquant::FpFormatSpec;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    print!("{}", formats_table(TableFormat::Text));

    let spec = FpFormatSpec::E3M4;
    let values = enumerate_values(&spec);
    let positive: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    println!();
    println!(
        "{spec}: {} values, smallest positive {}, largest {}",
        values.len(),
        min_positive(&spec),
        max_normal(&spec)
    );
    // one binade of E3M4 holds 16 evenly spaced values
    let binade: Vec<String> = positive
        .iter()
        .filter(|&&v| (1.0..2.0).contains(&v))
        .map(|v| v.to_string())
        .collect();
    println!("[1, 2): {}", binade.join(" "));
    assert_eq!(binade.len(), 16);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
