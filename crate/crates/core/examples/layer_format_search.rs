// Per-layer format search over a synthetic model under each mixing policy.

use flexquant::synthetic::{layer_suite, LayerShape};
use flexquant::{run_search, Criterion, MixPolicy, SearchSpace};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let layers = layer_suite(8, LayerShape::default(), 42);
    for policy in MixPolicy::ALL {
        let space = SearchSpace::from_policy(policy, 8)?;
        let report = run_search(&layers, &space, Criterion::OutputMse)?;
        let picks: Vec<String> = report
            .layers
            .iter()
            .map(|l| format!("{}/{}", l.selection.weight_format, l.selection.input_format))
            .collect();
        println!(
            "{:<12} total {:.4e}  {}",
            policy.name(),
            report.total_loss(),
            picks.join(" ")
        );
        if policy.requires_same_family() {
            assert!(report.layers.iter().all(|l| l
                .selection
                .weight_format
                .same_family(&l.selection.input_format)));
        }
    }

    let space = SearchSpace::from_policy(MixPolicy::AllMixed, 8)?;
    let report = run_search(&layers, &space, Criterion::OutputMse)?;
    print!("{}", report.histogram_csv());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
