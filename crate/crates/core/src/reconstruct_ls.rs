//! Linear least-squares reconstruction of floor plans from radio maps.
//!
//! Both images are converted to luminance and area-averaged down to a square
//! working resolution of `R` pixels per side, giving vectors of length
//! `P = R²`. The fitted map minimises
//! `Σᵢ ‖xᵢ − W yᵢ‖² + α‖W‖²_F`, i.e. `W = X Yᵀ (Y Yᵀ + αI)⁻¹`. When the
//! training set is smaller than `P` the equivalent dual form
//! `W = X (YᵀY + αI)⁻¹ Yᵀ` is used, which with `α = 0` is the minimum-norm
//! interpolating solution.

use std::io::{Read, Write};
use std::path::Path;

use image::{Rgb, RgbImage};
use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scene::FloorPlanImage;

/// Default working resolution (pixels per side).
pub const DEFAULT_WORKING_RESOLUTION: u32 = 64;

const WEIGHTS_MAGIC: &[u8; 4] = b"LISW";

/// Ridge term selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// `α = 10⁻⁶ · trace(Y Yᵀ) / P`.
    Auto,
    Fixed(f64),
}

impl Ridge {
    fn resolve(self, y: &DMatrix<f64>) -> f64 {
        match self {
            Ridge::Fixed(a) => a,
            Ridge::Auto => {
                let trace: f64 = y.iter().map(|v| v * v).sum();
                1e-6 * trace / y.nrows() as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    pub weights: DMatrix<f64>,
    pub working_resolution: u32,
    pub ridge_alpha: f64,
    /// Number of training pairs used in the fit.
    pub training_count: usize,
}

/// Mean of the three channels, row-major.
pub fn luminance(image: &RgbImage) -> Vec<f64> {
    image
        .pixels()
        .map(|p| (p.0[0] as f64 + p.0[1] as f64 + p.0[2] as f64) / 3.0)
        .collect()
}

/// Resample a square `src_side`² grid to `dst_side`² by pixel-area averaging.
pub fn area_resample(src: &[f64], src_side: usize, dst_side: usize) -> Vec<f64> {
    assert_eq!(src.len(), src_side * src_side);
    if src_side == dst_side {
        return src.to_vec();
    }
    // Overlap weights of each destination cell along one axis.
    let scale = src_side as f64 / dst_side as f64;
    let spans: Vec<Vec<(usize, f64)>> = (0..dst_side)
        .map(|d| {
            let lo = d as f64 * scale;
            let hi = lo + scale;
            let mut w = Vec::new();
            let mut s = lo.floor() as usize;
            while (s as f64) < hi && s < src_side {
                let overlap = (hi.min(s as f64 + 1.0) - lo.max(s as f64)).max(0.0);
                if overlap > 0.0 {
                    w.push((s, overlap / scale));
                }
                s += 1;
            }
            w
        })
        .collect();
    let mut out = vec![0.0; dst_side * dst_side];
    for (dy, wy) in spans.iter().enumerate() {
        for (dx, wx) in spans.iter().enumerate() {
            let mut acc = 0.0;
            for &(sy, fy) in wy {
                for &(sx, fx) in wx {
                    acc += fy * fx * src[sy * src_side + sx];
                }
            }
            out[dy * dst_side + dx] = acc;
        }
    }
    out
}

/// Luminance of a square image, resampled to `resolution`² pixels.
pub fn to_working_vector(image: &RgbImage, resolution: u32) -> Result<DVector<f64>> {
    if image.width() != image.height() {
        return Err(Error::shape(format!(
            "expected a square image, got {}x{}",
            image.width(),
            image.height()
        )));
    }
    let lum = luminance(image);
    Ok(DVector::from_vec(area_resample(
        &lum,
        image.width() as usize,
        resolution as usize,
    )))
}

/// Replicate a luminance vector into an RGB image after clipping to `[0, 255]`.
pub fn vector_to_image(v: &DVector<f64>, resolution: u32) -> RgbImage {
    RgbImage::from_fn(resolution, resolution, |x, y| {
        let g = v[(y * resolution + x) as usize].clamp(0.0, 255.0).round() as u8;
        Rgb([g, g, g])
    })
}

/// Nearest-neighbour resize of a square image.
pub fn resize_nearest(image: &RgbImage, side: u32) -> RgbImage {
    let src = image.width();
    RgbImage::from_fn(side, side, |x, y| {
        let sx = ((x as u64 * src as u64) / side as u64) as u32;
        let sy = ((y as u64 * src as u64) / side as u64) as u32;
        *image.get_pixel(sx, sy)
    })
}

fn cholesky_solver(gram: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let max_diag = gram.diagonal().iter().cloned().fold(0.0, f64::max);
    if !(max_diag > 0.0) {
        return Err(Error::SingularSystem);
    }
    let chol = Cholesky::new(gram).ok_or(Error::SingularSystem)?;
    let min_pivot = chol.l_dirty().diagonal().iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    if min_pivot < 1e-12 * max_diag {
        return Err(Error::SingularSystem);
    }
    Ok(chol)
}

impl LinearMap {
    /// Fit on column-stacked training vectors: `targets` is `P×T` (floor
    /// plans), `inputs` is `P×T` (radio maps).
    pub fn fit_vectors(targets: &DMatrix<f64>, inputs: &DMatrix<f64>, ridge: Ridge) -> Result<Self> {
        let (p, t) = inputs.shape();
        if targets.shape() != (p, t) {
            return Err(Error::shape(format!(
                "targets are {:?}, inputs are {:?}",
                targets.shape(),
                inputs.shape()
            )));
        }
        if t == 0 {
            return Err(Error::invalid("need at least one training pair"));
        }
        let alpha = ridge.resolve(inputs);
        if !(alpha >= 0.0) {
            return Err(Error::invalid("ridge term must be nonnegative"));
        }
        // Both branches produce Wᵀ.
        let weights_t = if t >= p {
            // (Y Yᵀ + αI) Wᵀ = Y Xᵀ
            let mut gram = inputs * inputs.transpose();
            for i in 0..p {
                gram[(i, i)] += alpha;
            }
            cholesky_solver(gram)?.solve(&(inputs * targets.transpose()))
        } else {
            // Wᵀ = Y (YᵀY + αI)⁻¹ Xᵀ
            let mut gram = inputs.transpose() * inputs;
            for i in 0..t {
                gram[(i, i)] += alpha;
            }
            inputs * cholesky_solver(gram)?.solve(&targets.transpose())
        };
        let resolution = (p as f64).sqrt().round() as u32;
        Ok(Self {
            weights: weights_t.transpose(),
            working_resolution: resolution,
            ridge_alpha: alpha,
            training_count: t,
        })
    }

    /// Fit on `(radio map, floor plan)` image pairs at `resolution`.
    pub fn fit(pairs: &[(RgbImage, RgbImage)], resolution: u32, ridge: Ridge) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("need at least one training pair"));
        }
        let p = (resolution * resolution) as usize;
        let mut x = DMatrix::zeros(p, pairs.len());
        let mut y = DMatrix::zeros(p, pairs.len());
        for (i, (map, plan)) in pairs.iter().enumerate() {
            y.set_column(i, &to_working_vector(map, resolution)?);
            x.set_column(i, &to_working_vector(plan, resolution)?);
        }
        let mut fitted = Self::fit_vectors(&x, &y, ridge)?;
        fitted.working_resolution = resolution;
        Ok(fitted)
    }

    pub fn identity(resolution: u32) -> Self {
        let p = (resolution * resolution) as usize;
        Self {
            weights: DMatrix::identity(p, p),
            working_resolution: resolution,
            ridge_alpha: 0.0,
            training_count: 0,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.weights.nrows()
    }

    /// `W y` before clipping.
    pub fn predict_vector(&self, input: &DVector<f64>) -> Result<DVector<f64>> {
        if input.len() != self.weights.ncols() {
            return Err(Error::shape(format!(
                "input has {} entries, map expects {}",
                input.len(),
                self.weights.ncols()
            )));
        }
        Ok(&self.weights * input)
    }

    /// Predicted floor plan at the working resolution, clipped to `[0, 255]`.
    pub fn predict(&self, radio_map: &RgbImage) -> Result<FloorPlanImage> {
        let y = to_working_vector(radio_map, self.working_resolution)?;
        let x = self.predict_vector(&y)?;
        Ok(FloorPlanImage::new(vector_to_image(&x, self.working_resolution)))
    }

    /// Mean squared residual `(1/T) Σ ‖xᵢ − W yᵢ‖²` over column-stacked data.
    pub fn objective(weights: &DMatrix<f64>, targets: &DMatrix<f64>, inputs: &DMatrix<f64>) -> f64 {
        let r = targets - weights * inputs;
        r.norm_squared() / targets.ncols() as f64
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        out.write_all(WEIGHTS_MAGIC)?;
        out.write_all(&(self.pixel_count() as u64).to_le_bytes())?;
        out.write_all(&self.ridge_alpha.to_le_bytes())?;
        out.write_all(&(self.training_count as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.weights.len());
        for r in 0..self.weights.nrows() {
            for c in 0..self.weights.ncols() {
                buf.extend_from_slice(&self.weights[(r, c)].to_le_bytes());
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut input: impl Read, origin: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            path: origin.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut head = [0u8; 28];
        input.read_exact(&mut head).map_err(|_| bad("truncated header"))?;
        if &head[..4] != WEIGHTS_MAGIC {
            return Err(bad("not a weights file"));
        }
        let p = u64::from_le_bytes(head[4..12].try_into().unwrap()) as usize;
        let alpha = f64::from_le_bytes(head[12..20].try_into().unwrap());
        let t = u64::from_le_bytes(head[20..28].try_into().unwrap()) as usize;
        let side = (p as f64).sqrt().round() as usize;
        if side * side != p {
            return Err(bad("pixel count is not a square"));
        }
        let mut payload = Vec::new();
        input.read_to_end(&mut payload)?;
        if payload.len() != 8 * p * p {
            return Err(bad("payload size does not match header"));
        }
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let weights = DMatrix::from_row_iterator(p, p, values);
        Ok(Self {
            weights,
            working_resolution: side as u32,
            ridge_alpha: alpha,
            training_count: t,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(file, path)
    }
}

/// Elementwise minimum of prediction and ground truth. The result consumes
/// the ground truth and is marked as oracle-assisted.
pub fn oracle_clamp(prediction: &FloorPlanImage, truth: &FloorPlanImage) -> Result<FloorPlanImage> {
    if prediction.image.dimensions() != truth.image.dimensions() {
        return Err(Error::shape(format!(
            "prediction is {:?}, truth is {:?}",
            prediction.image.dimensions(),
            truth.image.dimensions()
        )));
    }
    let (w, h) = prediction.image.dimensions();
    let image = RgbImage::from_fn(w, h, |x, y| {
        let a = prediction.image.get_pixel(x, y).0;
        let b = truth.image.get_pixel(x, y).0;
        Rgb([a[0].min(b[0]), a[1].min(b[1]), a[2].min(b[2])])
    });
    Ok(FloorPlanImage {
        image,
        oracle_assisted: true,
    })
}
