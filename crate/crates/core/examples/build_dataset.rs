//! Generate a stratified dataset and print its manifest summary.
//!
//! cargo run --release --example build_dataset -- [output-dir]

use lismap::dataset::{build_and_split, DatasetConfig};

fn main() -> lismap::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("lismap_dataset"));
    let _ = std::fs::remove_dir_all(&root);
    let config = DatasetConfig {
        total_samples: 120,
        lis_side: 32,
        kernel_side: 32,
        export_resolution: 64,
        master_seed: 1,
        ..DatasetConfig::default()
    };
    let manifest = build_and_split(&config, &root)?;
    for (split, n) in manifest.split_counts() {
        println!("{split:>6}: {n}");
    }
    let first = &manifest.records[0];
    println!(
        "{}: {} with K_a = {}, S = {}, seed {:#x} -> {}",
        first.sample_id, first.scenario_id, first.k_a, first.s, first.seed, first.radio_map_path
    );
    println!("manifest at {}", root.join("manifest.json").display());
    Ok(())
}
