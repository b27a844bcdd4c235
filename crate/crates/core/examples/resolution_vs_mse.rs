// Exhaustive output-MSE search against the cheaper per-tensor criteria.

use flexquant::synthetic::{layer_suite, LayerShape};
use flexquant::{run_search, Criterion, MixPolicy, SearchSpace};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let layers = layer_suite(12, LayerShape::default(), 7);
    let space = SearchSpace::from_policy(MixPolicy::AllMixed, 8)?;
    let exhaustive = run_search(&layers, &space, Criterion::OutputMse)?;
    println!(
        "{:<11} {:>9} {:>12} {:>10}",
        "criterion", "wall ms", "total loss", "vs best"
    );
    for criterion in [
        Criterion::OutputMse,
        Criterion::TensorMse,
        Criterion::Resolution,
    ] {
        let report = run_search(&layers, &space, criterion)?;
        println!(
            "{:<11} {:>9.1} {:>12.4e} {:>10.3}",
            criterion.name(),
            report.wall_ms,
            report.total_loss(),
            report.total_loss() / exhaustive.total_loss()
        );
        assert!(report.total_loss() >= exhaustive.total_loss());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
