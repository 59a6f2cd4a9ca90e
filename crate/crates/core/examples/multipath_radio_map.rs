//! Radio map of a furnished room: five devices, first-order reflections off
//! the brick walls and the metal scatterers, side by side with the floor plan.
//!
//! cargo run --release --example multipath_radio_map

use lismap::lis::{self, LisConfig};
use lismap::propagation;
use lismap::radiomap::{build_mf_kernel, form_radio_map, Colormap};
use lismap::scene::{rasterize_floorplan, sample_devices, Scene};

fn main() -> lismap::Result<()> {
    let scene = sample_devices(&Scene::scenario_1(), 5, 11)?;
    let lis = LisConfig::for_scene(&scene, lis::DEFAULT_SIDE);

    for d in 0..scene.devices.len() {
        let paths = propagation::trace_paths(&scene, &lis, d, 1)?;
        let reflected = paths.iter().filter(|p| p.order == 1).count();
        let [x, y, _] = scene.devices[d].position;
        println!(
            "device {d} at ({x:.2}, {y:.2}) m: {} paths, {reflected} reflected",
            paths.len()
        );
    }

    let field = propagation::scene_field(&scene, &lis, 1)?;
    let sigma2 = lis::noise_sigma_for_snr(&field, -10.0, &lis)?;
    let signal = lis::average_samples(&field, &lis, sigma2, 100, 3)?;
    let kernel = build_mf_kernel(scene.carrier_frequency, 8.0, 100, lis.spacing)?;
    let map = form_radio_map(&signal, &kernel, &Colormap::grayscale())?;

    map.rgb.save("multipath_map.png")?;
    rasterize_floorplan(&scene, 256)?.image.save("multipath_plan.png")?;
    println!("wrote multipath_map.png and multipath_plan.png");
    Ok(())
}
