//! Antenna outputs of the ceiling array: field-to-voltage conversion,
//! SNR-calibrated noise, and S-averaging.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::propagation::FieldGrid;
use crate::scene::Scene;
use crate::SPEED_OF_LIGHT;

/// Free-space impedance in ohms (120π).
pub const FREE_SPACE_IMPEDANCE: f64 = 120.0 * PI;

/// Desk-scale default side length of the array.
pub const DEFAULT_SIDE: usize = 128;
/// Full-scale side length of the array.
pub const FULL_SIDE: usize = 259;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LisConfig {
    pub n_x: usize,
    pub n_y: usize,
    /// Element pitch in metres.
    pub spacing: f64,
    pub antenna_impedance: f64,
    /// Mounting height (z of every element) in metres.
    pub height: f64,
    /// Horizontal position of the array centre.
    pub center: [f64; 2],
}

impl LisConfig {
    /// `side`×`side` array with half-wavelength pitch, centred on the ceiling
    /// of `scene`.
    pub fn for_scene(scene: &Scene, side: usize) -> Self {
        let wavelength = SPEED_OF_LIGHT / scene.carrier_frequency;
        Self {
            n_x: side,
            n_y: side,
            spacing: 0.5 * wavelength,
            antenna_impedance: 1.0,
            height: scene.room.h,
            center: [0.5 * scene.room.lx, 0.5 * scene.room.ly],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x < 2 || self.n_y < 2 {
            return Err(Error::invalid("array needs at least 2 elements per side"));
        }
        if !(self.spacing > 0.0) || !(self.antenna_impedance > 0.0) {
            return Err(Error::invalid("spacing and antenna impedance must be positive"));
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.n_x * self.n_y
    }

    /// Position of element `(ix, iy)`.
    pub fn element_position(&self, ix: usize, iy: usize) -> [f64; 3] {
        let (fx, fy) = self.fractional_position(ix as f64, iy as f64);
        [fx, fy, self.height]
    }

    /// Room coordinates of a (possibly fractional) element index.
    pub fn fractional_position(&self, ix: f64, iy: f64) -> (f64, f64) {
        let ox = 0.5 * (self.n_x as f64 - 1.0);
        let oy = 0.5 * (self.n_y as f64 - 1.0);
        (
            self.center[0] + (ix - ox) * self.spacing,
            self.center[1] + (iy - oy) * self.spacing,
        )
    }

    /// Inverse of [`fractional_position`](Self::fractional_position).
    pub fn fractional_index(&self, x: f64, y: f64) -> (f64, f64) {
        let ox = 0.5 * (self.n_x as f64 - 1.0);
        let oy = 0.5 * (self.n_y as f64 - 1.0);
        (
            (x - self.center[0]) / self.spacing + ox,
            (y - self.center[1]) / self.spacing + oy,
        )
    }
}

/// Complex antenna outputs of one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSignal {
    pub values: Grid<Complex64>,
    /// Per-snapshot noise variance.
    pub sigma2: f64,
    /// Number of averaged snapshots.
    pub s_count: u32,
    pub frequency: f64,
    /// Element pitch in metres.
    pub spacing: f64,
}

impl ReceivedSignal {
    /// Noise variance left after averaging, `sigma2 / s_count`.
    pub fn effective_sigma2(&self) -> f64 {
        self.sigma2 / self.s_count as f64
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }
}

/// Field-to-voltage factor `sqrt(λ² Z_n / (4π Z₀))`.
pub fn antenna_gain(wavelength: f64, antenna_impedance: f64) -> f64 {
    (wavelength * wavelength * antenna_impedance / (4.0 * PI * FREE_SPACE_IMPEDANCE)).sqrt()
}

fn snr_numerator(field: &FieldGrid) -> f64 {
    let lambda = field.wavelength();
    lambda * lambda * field.values.energy() / (4.0 * PI * FREE_SPACE_IMPEDANCE)
}

/// Noise variance giving an SNR of `gamma_db` for this field:
/// `σ² = λ² Σ|E|² / (4π Z₀ N γ)`.
pub fn noise_sigma_for_snr(field: &FieldGrid, gamma_db: f64, lis: &LisConfig) -> Result<f64> {
    check_dims(field, lis)?;
    let num = snr_numerator(field);
    if num == 0.0 {
        return Err(Error::ZeroField);
    }
    let gamma = 10f64.powf(gamma_db / 10.0);
    Ok(num / (lis.element_count() as f64 * gamma))
}

/// SNR in dB of `field` against noise variance `sigma2`.
pub fn snr_db(field: &FieldGrid, sigma2: f64, lis: &LisConfig) -> Result<f64> {
    check_dims(field, lis)?;
    let num = snr_numerator(field);
    if num == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(10.0 * (num / (lis.element_count() as f64 * sigma2)).log10())
}

fn check_dims(field: &FieldGrid, lis: &LisConfig) -> Result<()> {
    if field.values.dims() != (lis.n_x, lis.n_y) {
        return Err(Error::shape(format!(
            "field is {:?}, array is {}x{}",
            field.values.dims(),
            lis.n_x,
            lis.n_y
        )));
    }
    Ok(())
}

fn snapshot_rng(seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    rng
}

fn add_noise(acc: &mut [Complex64], sigma2: f64, rng: &mut ChaCha8Rng) {
    let scale = (0.5 * sigma2).sqrt();
    for v in acc.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *v += Complex64::new(scale * re, scale * im);
    }
}

/// One noisy snapshot `y_n = sqrt(λ² Z_n / (4π Z₀)) E_n + n_n`, with
/// `n_n ~ CN(0, σ²)`.
pub fn synthesize_signal(field: &FieldGrid, lis: &LisConfig, sigma2: f64, seed: u64) -> Result<ReceivedSignal> {
    average_samples(field, lis, sigma2, 1, seed)
}

/// Mean of `s` independent snapshots sharing the same field. Snapshot `i`
/// draws its noise from stream `i` of the generator seeded with `seed`.
pub fn average_samples(field: &FieldGrid, lis: &LisConfig, sigma2: f64, s: u32, seed: u64) -> Result<ReceivedSignal> {
    check_dims(field, lis)?;
    if s == 0 {
        return Err(Error::invalid("S must be at least 1"));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid("noise variance must be nonnegative"));
    }
    let gain = antenna_gain(field.wavelength(), lis.antenna_impedance);
    let clean: Vec<Complex64> = field.values.as_slice().iter().map(|e| e * gain).collect();

    let mut noise_sum = vec![Complex64::new(0.0, 0.0); clean.len()];
    if sigma2 > 0.0 {
        for i in 0..s as u64 {
            let mut rng = snapshot_rng(seed, i);
            add_noise(&mut noise_sum, sigma2, &mut rng);
        }
    }
    let inv_s = 1.0 / s as f64;
    let values: Vec<Complex64> = clean
        .iter()
        .zip(&noise_sum)
        .map(|(c, n)| c + n * inv_s)
        .collect();
    Ok(ReceivedSignal {
        values: Grid::from_vec(lis.n_x, lis.n_y, values),
        sigma2,
        s_count: s,
        frequency: field.frequency,
        spacing: lis.spacing,
    })
}
