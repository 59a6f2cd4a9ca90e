//! Build a small dataset, fit the least-squares map-to-plan estimator on the
//! training split, and score it on the test split.
//!
//! cargo run --release --example ls_reconstruction

use lismap::dataset::{build_and_split, DatasetConfig, Split};
use lismap::metrics::{evaluate, format_summary, summarize, SampleScore};
use lismap::reconstruct_ls::{resize_nearest, LinearMap, Ridge};

fn main() -> lismap::Result<()> {
    let root = std::env::temp_dir().join("lismap_ls_example");
    let _ = std::fs::remove_dir_all(&root);
    let config = DatasetConfig {
        total_samples: 240,
        lis_side: 48,
        kernel_side: 48,
        export_resolution: 64,
        ..DatasetConfig::default()
    };
    let manifest = build_and_split(&config, &root)?;
    let load = |p: &str| -> lismap::Result<image::RgbImage> { Ok(image::open(root.join(p))?.to_rgb8()) };

    let train = manifest
        .in_split(Split::Train)
        .map(|r| Ok((load(&r.radio_map_path)?, load(&r.floor_plan_path)?)))
        .collect::<lismap::Result<Vec<_>>>()?;
    let weights = LinearMap::fit(&train, 32, Ridge::Auto)?;
    println!("fitted on {} pairs, alpha = {:.3e}", train.len(), weights.ridge_alpha);

    let mut scores = Vec::new();
    for r in manifest.in_split(Split::Test) {
        let pred = weights.predict(&load(&r.radio_map_path)?)?;
        let pred = resize_nearest(&pred.image, config.export_resolution);
        let truth = load(&r.floor_plan_path)?;
        scores.push(SampleScore {
            sample_id: r.sample_id.clone(),
            method: "ls".into(),
            scenario_id: r.scenario_id.clone(),
            s: r.s,
            k_a: r.k_a,
            report: evaluate(&pred, &truth, r.room_extent, false)?,
        });
    }
    print!("{}", format_summary(&summarize(&scores)));
    Ok(())
}
