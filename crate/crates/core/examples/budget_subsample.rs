/*
How many clusters and questions a budget buys as perturbations get cheaper.

Run with:
```
cargo run --example budget_subsample
```
*/

use perturbkit::subsample::{compute_cost_ratio, max_uniform_clusters};
use perturbkit::{subsample, synthetic, BudgetSpec};

fn main() -> perturbkit::Result<()> {
    // a question writer paid 0.60 and a perturbation writer paid 0.20
    let r = compute_cost_ratio(0.20, 0.60)?;
    println!("cost ratio r = {r:.3}\n");

    let pool = synthetic::from_cluster_sizes(&(0..4000).map(|i| 3 + i % 5).collect::<Vec<_>>(), 0.5, 3);
    println!(
        "{:>5} {:>2} {:>9} {:>6} {:>6} {:>8} {:>6}  warning",
        "r", "c", "bound C", "C", "N", "cost", "yes"
    );
    for c in [1, 4] {
        for r in [0.1, 0.33, 0.6, 1.0] {
            let spec = BudgetSpec::new(1500.0, c, r).with_seed(2020);
            let m = subsample(&pool, &spec)?;
            println!(
                "{r:>5} {c:>2} {:>9} {:>6} {:>6} {:>8.2} {:>6.3}  {}",
                max_uniform_clusters(1500.0, c, r)?,
                m.realized_c_count,
                m.realized_n,
                m.realized_cost,
                m.realized_yes_fraction,
                m.warnings.first().map(String::as_str).unwrap_or("-")
            );
        }
    }
    Ok(())
}
