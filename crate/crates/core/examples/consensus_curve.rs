/*
Accuracy versus consensus: two responders with the same accuracy but
different error structure inside clusters.

Run with:
```
cargo run --example consensus_curve
```
*/

use perturbkit::metrics::EvalOptions;
use perturbkit::sweep::{simulate_responder, ResponderParams};
use perturbkit::{accuracy, consensus_curve, synthetic};

fn main() -> perturbkit::Result<()> {
    let eval = synthetic::uniform_clusters(5000, 4, 0.5, 12);
    let opts = EvalOptions::default();
    for rho in [0.0, 0.5, 1.0] {
        let params = ResponderParams {
            rho,
            seed: 4,
            ..Default::default()
        };
        let preds = simulate_responder(&eval, &params, None)?;
        let acc = accuracy(&preds, &eval, &opts)?.accuracy;
        let curve = consensus_curve(&preds, &eval, &[1, 2, 3, 4], &opts)?;
        let cs: Vec<String> = curve.iter().map(|r| format!("CS({})={:.3}", r.k, r.cs_value)).collect();
        println!("rho {rho:.1}: accuracy {acc:.3}  {}", cs.join("  "));
    }
    Ok(())
}
