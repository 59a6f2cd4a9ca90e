//! Averaging S snapshots at γ = −10 dB: correlation of the noisy radio map
//! with the noiseless one, and the residual noise variance.
//!
//! cargo run --release --example s_averaging

use lismap::dataset::{filter_for, simulate_sample, DatasetConfig};
use lismap::metrics::correlation;

fn main() -> lismap::Result<()> {
    let config = DatasetConfig {
        lis_side: 64,
        ..DatasetConfig::default()
    };
    let template = &config.scenarios[0].scene;
    let filter = filter_for(template, &config)?;

    println!("{:>6}  {:>12}  {:>12}", "S", "sigma2/S", "correlation");
    for s in [1, 10, 100, 1000] {
        let sample = simulate_sample(template, &filter, &config, 5, s, -10.0, 42)?;
        let c = correlation(
            sample.radio_map.magnitude.as_slice(),
            sample.noiseless_magnitude.as_slice(),
        )?;
        println!("{s:>6}  {:>12.4e}  {c:>12.4}", sample.sigma2 / s as f64);
        sample.radio_map.rgb.save(format!("s_averaging_S{s}.png"))?;
    }
    Ok(())
}
