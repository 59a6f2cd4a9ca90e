//! Image-source paths from one device, with the reflection coefficient of
//! each bounce, written in the plain-text dump format.
//!
//! cargo run --release --example path_dump

use lismap::lis::LisConfig;
use lismap::propagation::{fresnel_reflection, trace_paths, write_path_dump};
use lismap::scene::{Device, Material, Scene};

fn main() -> lismap::Result<()> {
    let f = 3.5e9;
    for (name, m) in [("metal", Material::metal()), ("brick", Material::brick())] {
        let g = fresnel_reflection(&m, 0.0, f);
        println!("{name}: |Γ| at normal incidence = {:.4}", g.norm());
    }

    let scene = Scene::scenario_1().with_devices(vec![Device::new([5.0, 5.0, 0.0], 20.0)]);
    let lis = LisConfig { n_x: 2, n_y: 2, ..LisConfig::for_scene(&scene, 2) };
    let paths = trace_paths(&scene, &lis, 0, 2)?;
    println!("{} paths of order ≤ 2 to 4 elements", paths.len());
    write_path_dump(&paths[..paths.len().min(8)], std::io::stdout().lock())?;
    Ok(())
}
