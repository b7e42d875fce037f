/*
Two-phase verification of perturbed questions against noisy annotators.

Run with:
```
cargo run --example verify_annotations
```
*/

use perturbkit::synthetic::{self, AnnotatorNoise};
use perturbkit::verification::{run_verification, VerificationPolicy};

fn main() -> perturbkit::Result<()> {
    let ds = synthetic::from_cluster_sizes(&[4; 500], 0.55, 1);
    println!(
        "{} questions in {} clusters before verification",
        ds.len(),
        ds.n_clusters()
    );

    for p_correct in [0.95, 0.8, 0.6] {
        let noise = AnnotatorNoise {
            p_correct,
            ..Default::default()
        };
        let annotations = synthetic::simulate_annotations(&ds, noise, 7);
        let (kept, report) = run_verification(&ds, &annotations, &VerificationPolicy::default())?;
        let p2 = report.phase2.as_ref().expect("phase 2 runs by default");
        println!(
            "p_correct {p_correct}: kept {} | phase 1 yield {:.3} ({} no majority, {} cannot infer, {} flipped) | phase 2 yield {:.3} | {} singleton clusters",
            kept.len(),
            report.phase1.yield_rate(),
            report.phase1.filtered_no_majority,
            report.phase1.filtered_cannot_infer,
            report.phase1.label_flips,
            p2.yield_rate(),
            report.degraded_to_singleton.len(),
        );
    }
    Ok(())
}
