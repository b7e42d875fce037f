/*
Validate a clustered dataset and print its statistics.

Run with:
```
cargo run --example dataset_stats [path/to/data.jsonl]
```
Without an argument the bundled fixture is used.
*/

use std::path::PathBuf;

use perturbkit::cli::format_stats_table;
use perturbkit::model::{Instance, Kind, Label, PassageRef};
use perturbkit::{compute_stats, io, Dataset};

fn main() -> perturbkit::Result<()> {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/small_corpus.jsonl"));

    let ds = io::read_dataset_file(&path)?;
    let stats = compute_stats(&ds)?;
    println!("{}", path.display());
    print!("{}", format_stats_table(&stats));
    println!("mean cluster size (exact): {}", stats.overall.mean_exact());

    // what validation reports on a broken dataset
    let p = || PassageRef::Inline("passage".into());
    let broken = Dataset::new(vec![
        Instance::new("q1", "a", "first?", p(), Label::Yes, Kind::Seed),
        Instance::new("q1", "a", "again?", p(), Label::No, Kind::Perturbed),
        Instance::new("q2", "b", "orphan?", p(), Label::No, Kind::Perturbed),
    ]);
    println!("\nviolations in a hand-made broken dataset:");
    for v in &broken.validate().violations {
        println!("  {v}");
    }
    Ok(())
}
