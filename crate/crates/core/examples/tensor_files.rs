// Writes and reads FXQT tensor files and shows what the reader rejects.

use flexquant::tensorio::{decode_tensor, encode_tensor};
use flexquant::{read_tensor, write_tensor, Tensor};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let t = Tensor::new(vec![2, 3], vec![0.5, -1.0, 2.0, 0.0, 3.25, -7.5])?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("t.fxqt");
    write_tensor(&path, &t)?;
    let back = read_tensor(&path)?;
    assert_eq!(back, t);

    let bytes = encode_tensor(&t)?;
    let hex: Vec<String> = bytes[..16].iter().map(|b| format!("{b:02x}")).collect();
    println!("{} bytes, header {}", bytes.len(), hex.join(" "));

    let mut trailing = bytes.clone();
    trailing.push(0);
    for (what, data) in [
        ("truncated", &bytes[..bytes.len() - 1]),
        ("trailing", &trailing[..]),
    ] {
        println!("{what}: {}", decode_tensor(data).unwrap_err());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
