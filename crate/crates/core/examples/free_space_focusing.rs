//! One device in an empty room: trace, add noise at +20 dB, matched-filter,
//! and locate the device from the radio-map peak.
//!
//! cargo run --release --example free_space_focusing

use lismap::lis::{self, LisConfig};
use lismap::propagation;
use lismap::radiomap::{build_mf_kernel, form_radio_map, Colormap};
use lismap::scene::{Device, Scene};

fn main() -> lismap::Result<()> {
    let truth = [4.3, 6.1];
    let scene = Scene::empty_reference().with_devices(vec![Device::new([truth[0], truth[1], 0.0], 20.0)]);
    let lis = LisConfig::for_scene(&scene, lis::DEFAULT_SIDE);

    // direct path only
    let field = propagation::scene_field(&scene, &lis, 0)?;
    let sigma2 = lis::noise_sigma_for_snr(&field, 20.0, &lis)?;
    let signal = lis::synthesize_signal(&field, &lis, sigma2, 1)?;

    let kernel = build_mf_kernel(scene.carrier_frequency, 8.0, 100, lis.spacing)?;
    let map = form_radio_map(&signal, &kernel, &Colormap::viridis())?;
    let (ix, iy) = map.magnitude.argmax();
    let (x, y) = kernel.focal_position(&lis, ix, iy);

    println!("array: {}x{} elements, pitch {:.2} cm", lis.n_x, lis.n_y, 100.0 * lis.spacing);
    println!("device at ({:.3}, {:.3}) m, peak at ({x:.3}, {y:.3}) m", truth[0], truth[1]);
    println!(
        "error {:.2} cm",
        100.0 * ((x - truth[0]).powi(2) + (y - truth[1]).powi(2)).sqrt()
    );
    map.rgb.save("free_space_focusing.png")?;
    println!("wrote free_space_focusing.png");
    Ok(())
}
