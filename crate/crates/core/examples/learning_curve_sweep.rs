/*
End to end without a model: subsample every grid point, answer a held-out
set with a responder whose mastery follows a learning curve in N, and
aggregate accuracy per point.

Run with:
```
cargo run --release --example learning_curve_sweep
```
*/

use perturbkit::io::ResultRecord;
use perturbkit::metrics::EvalOptions;
use perturbkit::sweep::{
    build_grid, collect_results, plan_manifests, simulate_responder, GridSpec, LearningCurve, ResponderParams,
};
use perturbkit::{accuracy, consensus_score, synthetic};

fn main() -> perturbkit::Result<()> {
    let pool = synthetic::from_cluster_sizes(&(0..4000).map(|i| 3 + i % 4).collect::<Vec<_>>(), 0.56, 8);
    let held_out = synthetic::uniform_clusters(500, 4, 0.5, 9);
    let grid = GridSpec {
        base_seed: 1,
        ..GridSpec::cost_ratio_sweep()
    };
    let points = build_grid(&grid)?;
    let planned = plan_manifests(&grid, &points, &pool)?;

    let params = ResponderParams {
        learning_curve: Some(LearningCurve {
            a: 0.9,
            beta: 20.0,
            alpha: 0.5,
        }),
        rho: 0.5,
        seed: 3,
        ..Default::default()
    };
    let opts = EvalOptions::default();
    let mut results = Vec::new();
    for (_, record) in &planned {
        let Some(record) = record else { continue };
        let training = record.to_manifest();
        let preds = simulate_responder(&held_out, &params, Some(&training))?;
        for (eval_set, value) in [
            ("accuracy", accuracy(&preds, &held_out, &opts)?.accuracy),
            ("consensus@4", consensus_score(&preds, &held_out, 4, &opts)?.cs_value),
        ] {
            results.push(ResultRecord {
                experiment_id: record.experiment_id.clone(),
                replica: record.replica,
                eval_set: eval_set.into(),
                accuracy: value,
            });
        }
    }

    println!("{:<16} {:<12} {:>8} {:>8}", "point", "metric", "mean", "std");
    for row in collect_results(&points, &results)? {
        println!(
            "{:<16} {:<12} {:>8.4} {:>8.4}",
            row.experiment_id, row.eval_set, row.mean, row.std
        );
    }
    Ok(())
}
