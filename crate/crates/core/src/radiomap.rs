//! Matched-filter radio maps.
//!
//! The received grid is correlated with the conjugate of a spherical-wave
//! pattern designed for a fixed depth, which focuses energy at source and
//! virtual-source (reflection) locations. The magnitude is then normalised
//! per map and rendered through a 256-entry colormap.

use std::f64::consts::PI;
use std::sync::Arc;

use image::{Rgb, RgbImage};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lis::{LisConfig, ReceivedSignal};
use crate::SPEED_OF_LIGHT;

/// Default kernel side (100×100 taps).
pub const DEFAULT_KERNEL_SIDE: usize = 100;
/// Default design depth in metres.
pub const DEFAULT_DESIGN_DEPTH: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MfKernel {
    pub taps: Grid<Complex64>,
    pub design_frequency: f64,
    pub design_depth: f64,
    pub spacing: f64,
}

impl MfKernel {
    pub fn side(&self) -> usize {
        self.taps.nx()
    }

    /// Offset, in elements, between an output index and the array position
    /// it focuses on: output `n` images element position `n - registration`.
    /// Zero for odd kernels and one half for even ones.
    pub fn registration(&self) -> f64 {
        let k = self.side();
        (k / 2) as f64 - 0.5 * (k as f64 - 1.0)
    }

    /// Room coordinates imaged by output pixel `(ix, iy)`.
    pub fn focal_position(&self, lis: &LisConfig, ix: usize, iy: usize) -> (f64, f64) {
        let r = self.registration();
        lis.fractional_position(ix as f64 - r, iy as f64 - r)
    }
}

/// Spherical-wave pattern `e^{-j2πd/λ} / d` seen by a `k_side`×`k_side`
/// patch from a point source `depth` below its centre.
pub fn build_mf_kernel(frequency: f64, depth: f64, k_side: usize, spacing: f64) -> Result<MfKernel> {
    if !(depth > 0.0) || k_side == 0 || !(spacing > 0.0) || !(frequency > 0.0) {
        return Err(Error::invalid("kernel needs positive depth, spacing, frequency and side"));
    }
    let wavelength = SPEED_OF_LIGHT / frequency;
    let k = 2.0 * PI / wavelength;
    let c = 0.5 * (k_side as f64 - 1.0);
    let taps = Grid::from_fn(k_side, k_side, |a, b| {
        let u = (a as f64 - c) * spacing;
        let v = (b as f64 - c) * spacing;
        let d = (depth * depth + u * u + v * v).sqrt();
        Complex64::from_polar(1.0 / d, -k * d)
    });
    Ok(MfKernel {
        taps,
        design_frequency: frequency,
        design_depth: depth,
        spacing,
    })
}

fn check_spacing(signal: &ReceivedSignal, kernel: &MfKernel) -> Result<()> {
    if (signal.spacing - kernel.spacing).abs() > 1e-9 * kernel.spacing.max(signal.spacing) {
        return Err(Error::SpacingMismatch {
            kernel: kernel.spacing,
            array: signal.spacing,
        });
    }
    Ok(())
}

/// Reference implementation by direct summation:
/// `out[n] = Σ_m conj(K[m]) · y[n + m − ⌊k/2⌋]`, zero outside the grid.
pub fn matched_filter_direct(signal: &ReceivedSignal, kernel: &MfKernel) -> Result<Grid<Complex64>> {
    check_spacing(signal, kernel)?;
    Ok(correlate_direct(&signal.values, &kernel.taps))
}

pub fn correlate_direct(signal: &Grid<Complex64>, taps: &Grid<Complex64>) -> Grid<Complex64> {
    let (nx, ny) = signal.dims();
    let (kx, ky) = taps.dims();
    let (hx, hy) = ((kx / 2) as isize, (ky / 2) as isize);
    Grid::from_fn(nx, ny, |ix, iy| {
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..ky {
            let sy = iy as isize + b as isize - hy;
            if sy < 0 || sy >= ny as isize {
                continue;
            }
            for a in 0..kx {
                let sx = ix as isize + a as isize - hx;
                if sx < 0 || sx >= nx as isize {
                    continue;
                }
                acc += taps.get(a, b).conj() * signal.get(sx as usize, sy as usize);
            }
        }
        acc
    })
}

/// Smallest 5-smooth integer ≥ n.
fn next_fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

struct Fft2 {
    w: usize,
    h: usize,
    row: Arc<dyn Fft<f64>>,
    col: Arc<dyn Fft<f64>>,
    irow: Arc<dyn Fft<f64>>,
    icol: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(w: usize, h: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            w,
            h,
            row: planner.plan_fft_forward(w),
            col: planner.plan_fft_forward(h),
            irow: planner.plan_fft_inverse(w),
            icol: planner.plan_fft_inverse(h),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let (row, col) = if inverse { (&self.irow, &self.icol) } else { (&self.row, &self.col) };
        row.process(data);
        let mut column = vec![Complex64::new(0.0, 0.0); self.h];
        for x in 0..self.w {
            for y in 0..self.h {
                column[y] = data[y * self.w + x];
            }
            col.process(&mut column);
            for y in 0..self.h {
                data[y * self.w + x] = column[y];
            }
        }
        if inverse {
            let scale = 1.0 / (self.w * self.h) as f64;
            data.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

/// FFT-based matched filter for a fixed kernel and input size. The kernel
/// spectrum is computed once and reused for every input.
pub struct MatchedFilter {
    kernel: MfKernel,
    nx: usize,
    ny: usize,
    fft: Fft2,
    kernel_spectrum: Vec<Complex64>,
}

impl MatchedFilter {
    pub fn new(kernel: MfKernel, nx: usize, ny: usize) -> Self {
        let (kx, ky) = kernel.taps.dims();
        let w = next_fast_len(nx + kx - 1);
        let h = next_fast_len(ny + ky - 1);
        let fft = Fft2::new(w, h);
        // flipped conjugate turns correlation into convolution
        let mut spec = vec![Complex64::new(0.0, 0.0); w * h];
        for b in 0..ky {
            for a in 0..kx {
                spec[b * w + a] = kernel.taps.get(kx - 1 - a, ky - 1 - b).conj();
            }
        }
        fft.run(&mut spec, false);
        Self {
            kernel,
            nx,
            ny,
            fft,
            kernel_spectrum: spec,
        }
    }

    pub fn kernel(&self) -> &MfKernel {
        &self.kernel
    }

    pub fn apply(&self, signal: &ReceivedSignal) -> Result<Grid<Complex64>> {
        check_spacing(signal, &self.kernel)?;
        self.correlate(&signal.values)
    }

    pub fn correlate(&self, values: &Grid<Complex64>) -> Result<Grid<Complex64>> {
        if values.dims() != (self.nx, self.ny) {
            return Err(Error::shape(format!(
                "filter planned for {}x{}, got {:?}",
                self.nx,
                self.ny,
                values.dims()
            )));
        }
        let (w, h) = (self.fft.w, self.fft.h);
        let mut buf = vec![Complex64::new(0.0, 0.0); w * h];
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                buf[iy * w + ix] = *values.get(ix, iy);
            }
        }
        self.fft.run(&mut buf, false);
        for (v, k) in buf.iter_mut().zip(&self.kernel_spectrum) {
            *v *= k;
        }
        self.fft.run(&mut buf, true);
        let (kx, ky) = self.kernel.taps.dims();
        let ox = kx - 1 - kx / 2;
        let oy = ky - 1 - ky / 2;
        Ok(Grid::from_fn(self.nx, self.ny, |ix, iy| buf[(iy + oy) * w + ix + ox]))
    }
}

/// Zero-padded correlation of `signal` with the conjugated kernel; the output
/// has the same dimensions as the input.
pub fn matched_filter(signal: &ReceivedSignal, kernel: &MfKernel) -> Result<Grid<Complex64>> {
    let (nx, ny) = signal.values.dims();
    MatchedFilter::new(kernel.clone(), nx, ny).apply(signal)
}

/// 256-entry RGB lookup table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Colormap {
    entries: Vec<[u8; 3]>,
}

impl Colormap {
    pub fn grayscale() -> Self {
        Self {
            entries: (0..=255u8).map(|v| [v, v, v]).collect(),
        }
    }

    pub fn viridis() -> Self {
        Self::parse(include_str!("../assets/viridis.lut")).expect("bundled colormap is well formed")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "gray" | "grey" | "grayscale" => Ok(Self::grayscale()),
            "viridis" => Ok(Self::viridis()),
            other => Err(Error::invalid(format!("unknown colormap `{other}`"))),
        }
    }

    /// Parse 256 lines of `r g b`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::with_capacity(256);
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let rgb: Vec<u8> = line
                .split_whitespace()
                .map(|t| t.parse::<u8>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::invalid(format!("colormap entry `{line}`: {e}")))?;
            if rgb.len() != 3 {
                return Err(Error::invalid(format!("colormap entry `{line}` needs 3 values")));
            }
            entries.push([rgb[0], rgb[1], rgb[2]]);
        }
        if entries.len() != 256 {
            return Err(Error::invalid(format!("colormap has {} entries, expected 256", entries.len())));
        }
        Ok(Self { entries })
    }

    pub fn entry(&self, index: u8) -> [u8; 3] {
        self.entries[index as usize]
    }
}

/// Min-max normalise `magnitude` and map it through `lut`. Index is
/// `⌊255·v + ½⌋`; a constant map renders as entry 0.
pub fn to_rgb(magnitude: &Grid<f64>, lut: &Colormap) -> RgbImage {
    let (lo, hi) = magnitude
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let (nx, ny) = magnitude.dims();
    RgbImage::from_fn(nx as u32, ny as u32, |x, y| {
        let v = *magnitude.get(x as usize, y as usize);
        let idx = if range > 0.0 {
            ((v - lo) / range * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
        } else {
            0
        };
        Rgb(lut.entry(idx))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap {
    pub magnitude: Grid<f64>,
    pub rgb: RgbImage,
}

impl RadioMap {
    pub fn from_magnitude(magnitude: Grid<f64>, lut: &Colormap) -> Self {
        let rgb = to_rgb(&magnitude, lut);
        Self { magnitude, rgb }
    }
}

/// Matched filter, magnitude, and colour mapping in one step.
pub fn form_radio_map(signal: &ReceivedSignal, kernel: &MfKernel, lut: &Colormap) -> Result<RadioMap> {
    let out = matched_filter(signal, kernel)?;
    Ok(RadioMap::from_magnitude(out.magnitude(), lut))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const F: f64 = 3.5e9;

    fn half_wave() -> f64 {
        0.5 * SPEED_OF_LIGHT / F
    }

    fn signal_from(values: Grid<Complex64>, spacing: f64) -> ReceivedSignal {
        ReceivedSignal {
            values,
            sigma2: 0.0,
            s_count: 1,
            frequency: F,
            spacing,
        }
    }

    fn random_grid(rng: &mut ChaCha8Rng, nx: usize, ny: usize) -> Grid<Complex64> {
        Grid::from_fn(nx, ny, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn centre_and_corner_taps() {
        let lambda = SPEED_OF_LIGHT / F;
        let k = build_mf_kernel(F, 8.0, 101, half_wave()).unwrap();
        let c = k.taps.get(50, 50);
        assert!((c.norm() - 0.125).abs() < 1e-15);
        let phase = (-2.0 * PI * 8.0 / lambda).rem_euclid(2.0 * PI);
        assert!((c.arg().rem_euclid(2.0 * PI) - phase).abs() < 1e-9);

        let k = build_mf_kernel(F, 8.0, 100, half_wave()).unwrap();
        let off = 49.5 * half_wave();
        assert!((off - 2.12).abs() < 0.01);
        let d = (64.0 + 2.0 * off * off).sqrt();
        assert!((d - 8.543).abs() < 1e-3);
        let corner = k.taps.get(0, 0).norm();
        assert!((corner - 1.0 / d).abs() < 1e-15);
        assert!((corner - 0.1171).abs() < 1e-4);
        for (a, b) in [(0, 99), (99, 0), (99, 99)] {
            assert!((k.taps.get(a, b) - k.taps.get(0, 0)).norm() < 1e-15);
        }
    }

    #[test]
    fn taps_have_rotational_symmetry() {
        let k = build_mf_kernel(F, 8.0, 10, half_wave()).unwrap();
        for b in 0..10 {
            for a in 0..10 {
                let rot = k.taps.get(b, 9 - a);
                assert!((k.taps.get(a, b) - rot).norm() < 1e-15);
            }
        }
        assert_eq!(k.registration(), 0.5);
        assert_eq!(build_mf_kernel(F, 8.0, 9, half_wave()).unwrap().registration(), 0.0);
    }

    #[test]
    fn single_tap_scales() {
        let k = build_mf_kernel(F, 8.0, 1, half_wave()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values = random_grid(&mut rng, 6, 5);
        let out = matched_filter(&signal_from(values.clone(), half_wave()), &k).unwrap();
        let tap = k.taps.get(0, 0).conj();
        for (o, v) in out.as_slice().iter().zip(values.as_slice()) {
            assert!((o - tap * v).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let k = build_mf_kernel(F, 8.0, 7, half_wave()).unwrap();
        let z = Grid::filled(12, 9, Complex64::new(0.0, 0.0));
        let out = matched_filter(&signal_from(z, half_wave()), &k).unwrap();
        assert!(out.as_slice().iter().all(|v| v.norm() == 0.0));
        assert_eq!(out.dims(), (12, 9));
    }

    #[test]
    fn peak_at_embedded_pattern() {
        let k = build_mf_kernel(F, 8.0, 15, half_wave()).unwrap();
        let (px, py) = (20, 13);
        let mut values = Grid::filled(40, 30, Complex64::new(0.0, 0.0));
        for b in 0..15 {
            for a in 0..15 {
                *values.get_mut(px + a - 7, py + b - 7) = *k.taps.get(a, b);
            }
        }
        let out = matched_filter(&signal_from(values, half_wave()), &k).unwrap();
        assert_eq!(out.magnitude().argmax(), (px, py));
    }

    #[test]
    fn fft_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (nx, ny, k) in [(16, 16, 5), (20, 13, 8), (9, 11, 14), (32, 32, 100)] {
            let kernel = build_mf_kernel(F, 8.0, k, half_wave()).unwrap();
            let sig = signal_from(random_grid(&mut rng, nx, ny), half_wave());
            let fast = matched_filter(&sig, &kernel).unwrap();
            let slow = matched_filter_direct(&sig, &kernel).unwrap();
            let peak = slow.as_slice().iter().map(|v| v.norm()).fold(0.0, f64::max);
            let worst = fast
                .as_slice()
                .iter()
                .zip(slow.as_slice())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(worst < 1e-9 * peak, "{nx}x{ny} k={k}: {worst} vs {peak}");
        }
    }

    #[test]
    fn spacing_mismatch_is_rejected() {
        let k = build_mf_kernel(F, 8.0, 3, half_wave()).unwrap();
        let sig = signal_from(Grid::filled(4, 4, Complex64::new(1.0, 0.0)), 0.05);
        assert!(matches!(matched_filter(&sig, &k), Err(Error::SpacingMismatch { .. })));
    }

    #[test]
    fn rgb_extremes_and_constant() {
        let lut = Colormap::viridis();
        let m = Grid::from_vec(2, 1, vec![0.0, 3.0]);
        let img = to_rgb(&m, &lut);
        assert_eq!(img.get_pixel(0, 0).0, lut.entry(0));
        assert_eq!(img.get_pixel(1, 0).0, lut.entry(255));
        let c = Grid::filled(3, 3, 2.5);
        assert!(to_rgb(&c, &lut).pixels().all(|p| p.0 == lut.entry(0)));
    }

    #[test]
    fn gray_midpoint() {
        let m = Grid::from_vec(3, 1, vec![0.0, 0.5, 1.0]);
        let img = to_rgb(&m, &Colormap::grayscale());
        // 0.5·255 + 0.5 = 128 after flooring
        assert_eq!(img.get_pixel(1, 0).0, [128, 128, 128]);
    }

    #[test]
    fn colormap_parser_rejects_short_tables() {
        assert!(Colormap::parse("0 0 0\n1 1 1\n").is_err());
        assert!(Colormap::by_name("jet").is_err());
        assert_eq!(Colormap::viridis().entry(0), [68, 1, 84]);
    }

    #[test]
    fn next_fast_len_is_smooth() {
        assert_eq!(next_fast_len(227), 240);
        assert_eq!(next_fast_len(256), 256);
        assert_eq!(next_fast_len(7), 8);
    }
}
