//! PSNR, SSIM and centroid errors on a floor plan and a shifted copy.
//!
//! cargo run --release --example evaluate_metrics

use lismap::metrics::{centroid_error, extract_centroids, psnr, ssim};
use lismap::scene::{rasterize_floorplan, Scene};

fn main() -> lismap::Result<()> {
    let room = [10.34, 10.34];
    let truth = rasterize_floorplan(&Scene::scenario_2(), 256)?.image;

    // shift the plan three pixels right, as a stand-in for a reconstruction
    let shifted = image::RgbImage::from_fn(256, 256, |x, y| *truth.get_pixel(x.saturating_sub(3), y));

    println!("PSNR(truth, truth)   = {:.2} dB", psnr(&truth, &truth)?);
    println!("PSNR(truth, shifted) = {:.2} dB", psnr(&truth, &shifted)?);
    println!("SSIM(truth, shifted) = {:.4}", ssim(&truth, &shifted)?);

    let t = extract_centroids(&truth, room);
    let p = extract_centroids(&shifted, room);
    let e = centroid_error(&p, &t);
    println!(
        "{} centroids matched, {} unmatched, error {:.2} ± {:.2} cm",
        e.pairs.len(),
        e.unmatched,
        e.mean_cm,
        e.std_cm
    );
    Ok(())
}
