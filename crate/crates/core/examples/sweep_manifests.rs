/*
Expand the cost-ratio sweep grid and write one manifest per point and replica.

Run with:
```
cargo run --release --example sweep_manifests [out_dir]
```
*/

use std::path::PathBuf;

use perturbkit::sweep::{build_grid, emit_manifests, GridSpec};
use perturbkit::synthetic;

fn main() -> perturbkit::Result<()> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("perturbkit-sweep"));

    let pool = synthetic::from_cluster_sizes(&(0..4000).map(|i| 2 + i % 6).collect::<Vec<_>>(), 0.56, 5);
    let grid = GridSpec {
        base_seed: 2020,
        ..GridSpec::cost_ratio_sweep()
    };
    let points = build_grid(&grid)?;
    let rows = emit_manifests(&grid, &points, &pool, &out)?;

    println!("{} manifests under {}", rows.len(), out.join("manifests").display());
    for row in rows.iter().filter(|r| r.point.replica == 0).take(6) {
        let s = row.outcome.as_ref().expect("pool is large enough");
        println!(
            "{:<16} seed {:>20}  C {:>5}  N {:>5}",
            row.point.experiment_id, row.point.seed, s.realized_c_count, s.realized_n
        );
    }
    println!("index: {}", out.join("index.csv").display());
    Ok(())
}
