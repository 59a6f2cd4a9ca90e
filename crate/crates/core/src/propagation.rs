//! Specular multipath propagation from devices to the array elements.
//!
//! Paths are built with the image-source method: the source is mirrored
//! across a sequence of reflecting planes (room walls and scatterer faces),
//! and each candidate is kept only if its backtracked reflection points land
//! on the finite faces and every leg is unobstructed. Scatterers and walls are
//! opaque; transmission and diffraction are not modelled.
//!
//! Each path contributes `A · ΠΓ · e^{-j2πd/λ} / d` to the element field,
//! where `d` is the unfolded path length and `Γ` the perpendicular-polarization
//! Fresnel coefficient of each bounce.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lis::{LisConfig, FREE_SPACE_IMPEDANCE};
use crate::scene::{Device, Material, Scene, ScattererBox};
use crate::SPEED_OF_LIGHT;

/// Vacuum permittivity in F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;

/// Default reflection order: direct path plus single bounces.
pub const DEFAULT_MAX_ORDER: usize = 1;

const EPS: f64 = 1e-9;

type Vec3 = [f64; 3];

#[inline]
fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[inline]
fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Perpendicular-polarization reflection coefficient of a half-space of
/// `material` seen from air, at `incidence_angle` from the surface normal.
///
/// Uses the complex relative permittivity `ε_r − j·σ/(2πf ε₀)`; the material
/// is treated as non-magnetic.
pub fn fresnel_reflection(material: &Material, incidence_angle: f64, frequency: f64) -> Complex64 {
    let eps_c = complex_permittivity(material, frequency);
    let (sin_t, cos_t) = incidence_angle.sin_cos();
    let root = (eps_c - sin_t * sin_t).sqrt();
    (cos_t - root) / (cos_t + root)
}

pub fn complex_permittivity(material: &Material, frequency: f64) -> Complex64 {
    Complex64::new(
        material.relative_permittivity,
        -material.conductivity / (2.0 * PI * frequency * VACUUM_PERMITTIVITY),
    )
}

/// Field amplitude at 1 m of an isotropic unit-gain source radiating
/// `power_watts`: `sqrt(Z₀ P / 4π)` (RMS volts).
pub fn source_amplitude(power_watts: f64) -> f64 {
    (FREE_SPACE_IMPEDANCE * power_watts / (4.0 * PI)).sqrt()
}

/// Mirror `p` across the axis-aligned plane `x[axis] = coord`.
pub fn mirror(p: Vec3, axis: usize, coord: f64) -> Vec3 {
    let mut m = p;
    m[axis] = 2.0 * coord - p[axis];
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayPath {
    /// Flat index of the receiving element (`iy * n_x + ix`).
    pub element: usize,
    pub total_length: f64,
    pub reflection_coefficients: Vec<Complex64>,
    pub source_device: usize,
    pub order: usize,
}

impl RayPath {
    pub fn gamma_product(&self) -> Complex64 {
        self.reflection_coefficients
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, g| acc * g)
    }
}

/// Complex field at every element.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub values: Grid<Complex64>,
    pub frequency: f64,
}

impl FieldGrid {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    pub fn zeros(lis: &LisConfig, frequency: f64) -> Self {
        Self {
            values: Grid::filled(lis.n_x, lis.n_y, Complex64::new(0.0, 0.0)),
            frequency,
        }
    }

    /// Elementwise sum; panics on mismatched dimensions.
    pub fn add(&self, other: &FieldGrid) -> FieldGrid {
        assert_eq!(self.values.dims(), other.values.dims());
        let values: Vec<Complex64> = self
            .values
            .as_slice()
            .iter()
            .zip(other.values.as_slice())
            .map(|(a, b)| a + b)
            .collect();
        FieldGrid {
            values: Grid::from_vec(self.values.nx(), self.values.ny(), values),
            frequency: self.frequency,
        }
    }
}

/// A finite axis-aligned reflecting rectangle.
#[derive(Debug, Clone, Copy)]
struct Face {
    axis: usize,
    coord: f64,
    /// +1 or −1: the side of the plane the reflective surface faces.
    normal_sign: f64,
    lo: Vec3,
    hi: Vec3,
    material: Material,
}

impl Face {
    #[inline]
    fn front_distance(&self, p: Vec3) -> f64 {
        (p[self.axis] - self.coord) * self.normal_sign
    }

    #[inline]
    fn contains(&self, p: Vec3) -> bool {
        (0..3)
            .filter(|&a| a != self.axis)
            .all(|a| p[a] >= self.lo[a] - EPS && p[a] <= self.hi[a] + EPS)
    }
}

fn faces_of(scene: &Scene) -> Vec<Face> {
    let r = scene.room;
    let room_lo = [0.0, 0.0, 0.0];
    let room_hi = [r.lx, r.ly, r.h];
    let mut faces = Vec::new();
    for axis in 0..2 {
        faces.push(Face {
            axis,
            coord: 0.0,
            normal_sign: 1.0,
            lo: room_lo,
            hi: room_hi,
            material: scene.wall_material,
        });
        faces.push(Face {
            axis,
            coord: room_hi[axis],
            normal_sign: -1.0,
            lo: room_lo,
            hi: room_hi,
            material: scene.wall_material,
        });
    }
    for s in &scene.scatterers {
        let lo = s.min_corner();
        let hi = s.max_corner();
        for axis in 0..3 {
            if axis == 2 && lo[2] <= EPS {
                // bottom face rests on the floor
            } else {
                faces.push(Face {
                    axis,
                    coord: lo[axis],
                    normal_sign: -1.0,
                    lo,
                    hi,
                    material: s.material,
                });
            }
            faces.push(Face {
                axis,
                coord: hi[axis],
                normal_sign: 1.0,
                lo,
                hi,
                material: s.material,
            });
        }
    }
    faces
}

/// True if the open segment `a→b` passes through the interior of `b`.
fn segment_hits_box(a: Vec3, b: Vec3, lo: Vec3, hi: Vec3) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for k in 0..3 {
        let lo_k = lo[k] + EPS;
        let hi_k = hi[k] - EPS;
        let d = b[k] - a[k];
        if d.abs() < 1e-15 {
            if a[k] <= lo_k || a[k] >= hi_k {
                return false;
            }
        } else {
            let mut ta = (lo_k - a[k]) / d;
            let mut tb = (hi_k - a[k]) / d;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 >= t1 {
                return false;
            }
        }
    }
    t1 - t0 > 1e-12
}

#[derive(Debug, Clone)]
struct ImageSource {
    position: Vec3,
    /// Faces in bounce order (first bounce first).
    faces: Vec<usize>,
}

/// Precomputed reflector set and image sources for one device.
struct Tracer {
    faces: Vec<Face>,
    boxes: Vec<(Vec3, Vec3)>,
    images: Vec<ImageSource>,
    device: Vec3,
    frequency: f64,
    room: (f64, f64),
}

impl Tracer {
    fn new(scene: &Scene, device: Vec3, max_order: usize) -> Self {
        let faces = faces_of(scene);
        let boxes = scene
            .scatterers
            .iter()
            .map(|s: &ScattererBox| (s.min_corner(), s.max_corner()))
            .collect();
        let mut images = vec![ImageSource {
            position: device,
            faces: Vec::new(),
        }];
        let mut frontier = 0..1;
        for _ in 0..max_order {
            let start = images.len();
            for idx in frontier.clone() {
                let parent = images[idx].clone();
                for (fi, face) in faces.iter().enumerate() {
                    if parent.faces.last() == Some(&fi) || face.front_distance(parent.position) <= EPS {
                        continue;
                    }
                    let mut faces_seq = parent.faces.clone();
                    faces_seq.push(fi);
                    images.push(ImageSource {
                        position: mirror(parent.position, face.axis, face.coord),
                        faces: faces_seq,
                    });
                }
            }
            frontier = start..images.len();
        }
        Self {
            faces,
            boxes,
            images,
            device,
            frequency: scene.carrier_frequency,
            room: (scene.room.lx, scene.room.ly),
        }
    }

    fn leg_clear(&self, a: Vec3, b: Vec3) -> bool {
        !self.boxes.iter().any(|(lo, hi)| segment_hits_box(a, b, *lo, *hi))
    }

    /// Calls `emit(length, coefficients)` for every valid path to `receiver`.
    fn for_each_path(&self, receiver: Vec3, mut emit: impl FnMut(f64, &[Complex64])) {
        let (lx, ly) = self.room;
        if receiver[0] < -EPS || receiver[0] > lx + EPS || receiver[1] < -EPS || receiver[1] > ly + EPS {
            return;
        }
        let mut points: Vec<Vec3> = Vec::with_capacity(8);
        let mut coeffs: Vec<Complex64> = Vec::with_capacity(8);
        'images: for image in &self.images {
            points.clear();
            coeffs.clear();
            // Backtrack from the receiver through the bounces in reverse.
            let mut target = receiver;
            let mut source = image.position;
            for (depth, &fi) in image.faces.iter().enumerate().rev() {
                let face = &self.faces[fi];
                if face.front_distance(target) <= EPS {
                    continue 'images;
                }
                let a = face.axis;
                let t = (face.coord - source[a]) / (target[a] - source[a]);
                if !(t > 0.0 && t < 1.0) {
                    continue 'images;
                }
                let mut p = [
                    source[0] + t * (target[0] - source[0]),
                    source[1] + t * (target[1] - source[1]),
                    source[2] + t * (target[2] - source[2]),
                ];
                p[a] = face.coord;
                if !face.contains(p) {
                    continue 'images;
                }
                let leg = sub(target, p);
                let cos_i = (leg[a].abs() / norm(leg)).clamp(0.0, 1.0);
                coeffs.push(fresnel_reflection(&face.material, cos_i.acos(), self.frequency));
                points.push(p);
                target = p;
                source = self.image_position(image, depth);
            }
            // Legs: device → p_1 → … → p_m → receiver. `points` holds p_m..p_1.
            let mut prev = self.device;
            for p in points.iter().rev() {
                if !self.leg_clear(prev, *p) {
                    continue 'images;
                }
                prev = *p;
            }
            if !self.leg_clear(prev, receiver) {
                continue 'images;
            }
            coeffs.reverse();
            emit(distance(image.position, receiver), &coeffs);
        }
    }

    /// Position of the image of order `depth` along `image`'s bounce chain
    /// (`depth = 0` is the device itself).
    fn image_position(&self, image: &ImageSource, depth: usize) -> Vec3 {
        let mut p = self.device;
        for &fi in &image.faces[..depth] {
            let f = &self.faces[fi];
            p = mirror(p, f.axis, f.coord);
        }
        p
    }
}

/// Enumerate the direct and reflected paths from device `device_index` to
/// every element, up to `max_order` bounces.
pub fn trace_paths(scene: &Scene, lis: &LisConfig, device_index: usize, max_order: usize) -> Result<Vec<RayPath>> {
    let device = scene
        .devices
        .get(device_index)
        .ok_or_else(|| Error::invalid(format!("no device {device_index}")))?;
    let tracer = Tracer::new(scene, device.position, max_order);
    let per_element: Vec<Vec<RayPath>> = (0..lis.element_count())
        .into_par_iter()
        .map(|element| {
            let pos = lis.element_position(element % lis.n_x, element / lis.n_x);
            let mut out = Vec::new();
            tracer.for_each_path(pos, |length, coeffs| {
                out.push(RayPath {
                    element,
                    total_length: length,
                    reflection_coefficients: coeffs.to_vec(),
                    source_device: device_index,
                    order: coeffs.len(),
                })
            });
            out
        })
        .collect();
    Ok(per_element.into_iter().flatten().collect())
}

/// Superpose path contributions into the element field.
pub fn field_at_lis(paths: &[RayPath], devices: &[Device], lis: &LisConfig, wavelength: f64) -> Result<FieldGrid> {
    if !(wavelength > 0.0) {
        return Err(Error::invalid("wavelength must be positive"));
    }
    let mut field = FieldGrid::zeros(lis, SPEED_OF_LIGHT / wavelength);
    let k = 2.0 * PI / wavelength;
    let values = field.values.as_mut_slice();
    for p in paths {
        let device = devices
            .get(p.source_device)
            .ok_or_else(|| Error::invalid(format!("path refers to missing device {}", p.source_device)))?;
        if p.element >= values.len() {
            return Err(Error::shape(format!("path element {} outside the array", p.element)));
        }
        values[p.element] += path_contribution(device, p.total_length, &p.reflection_coefficients, k, wavelength)?;
    }
    Ok(field)
}

#[inline]
fn path_contribution(device: &Device, length: f64, coeffs: &[Complex64], k: f64, wavelength: f64) -> Result<Complex64> {
    if !(length >= 0.1 * wavelength) {
        return Err(Error::DegenerateGeometry { length });
    }
    let gamma = coeffs.iter().fold(Complex64::new(1.0, 0.0), |acc, g| acc * g);
    let amp = source_amplitude(device.tx_power_watts()) / length;
    Ok(device.symbol * gamma * Complex64::from_polar(amp, -k * length))
}

/// Field of all devices in `scene`; equivalent to tracing every device and
/// calling [`field_at_lis`], without materialising the path lists.
pub fn scene_field(scene: &Scene, lis: &LisConfig, max_order: usize) -> Result<FieldGrid> {
    let wavelength = scene.wavelength();
    let k = 2.0 * PI / wavelength;
    let tracers: Vec<Tracer> = scene
        .devices
        .iter()
        .map(|d| Tracer::new(scene, d.position, max_order))
        .collect();
    let values: Vec<Complex64> = (0..lis.element_count())
        .into_par_iter()
        .map(|element| {
            let pos = lis.element_position(element % lis.n_x, element / lis.n_x);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut err = None;
            for (device, tracer) in scene.devices.iter().zip(&tracers) {
                tracer.for_each_path(pos, |length, coeffs| match path_contribution(device, length, coeffs, k, wavelength) {
                    Ok(c) => acc += c,
                    Err(e) => err = Some(e),
                });
            }
            match err {
                Some(e) => Err(e),
                None => Ok(acc),
            }
        })
        .collect::<Result<_>>()?;
    Ok(FieldGrid {
        values: Grid::from_vec(lis.n_x, lis.n_y, values),
        frequency: scene.carrier_frequency,
    })
}

/// Debug dump: one line per path with device, element, order, length and |ΠΓ|.
pub fn write_path_dump(paths: &[RayPath], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "# device element order length_m gamma_abs")?;
    for p in paths {
        writeln!(
            out,
            "{} {} {} {:.9} {:.9}",
            p.source_device,
            p.element,
            p.order,
            p.total_length,
            p.gamma_product().norm()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{sample_devices, RoomExtent};
    use proptest::prelude::*;

    fn small_lis(scene: &Scene, side: usize) -> LisConfig {
        LisConfig::for_scene(scene, side)
    }

    fn one_device(scene: Scene, pos: Vec3) -> Scene {
        scene.with_devices(vec![Device::new(pos, 20.0)])
    }

    #[test]
    fn metal_is_nearly_perfect_reflector() {
        let metal = Material {
            relative_permeability: 1.0,
            ..Material::metal()
        };
        for i in 0..90 {
            let theta = i as f64 * PI / 180.0;
            let g = fresnel_reflection(&metal, theta, 3.5e9);
            assert!(g.norm() >= 0.99 && g.norm() <= 1.0, "angle {i}: {g}");
        }
        assert!(fresnel_reflection(&Material::metal(), 0.3, 3.5e9).norm() >= 0.99);
    }

    #[test]
    fn vacuum_reflects_nothing() {
        for theta in [0.0, 0.5, 1.2] {
            assert!(fresnel_reflection(&Material::vacuum(), theta, 3.5e9).norm() < 1e-15);
        }
    }

    #[test]
    fn brick_normal_incidence() {
        let eps_c = complex_permittivity(&Material::brick(), 3.5e9);
        assert!((eps_c.re - 4.0).abs() < 1e-12);
        assert!((eps_c.im + 0.4006).abs() < 1e-3, "{eps_c}");
        let expected = (1.0 - eps_c.sqrt()) / (1.0 + eps_c.sqrt());
        let g = fresnel_reflection(&Material::brick(), 0.0, 3.5e9);
        assert!((g - expected).norm() < 1e-12);
        assert!((g.norm() - 0.33).abs() < 0.01, "{}", g.norm());
    }

    #[test]
    fn free_space_has_one_direct_path_per_element() {
        let scene = one_device(Scene::empty_reference(), [5.17, 5.17, 0.0]);
        let lis = small_lis(&scene, 12);
        let paths = trace_paths(&scene, &lis, 0, 0).unwrap();
        assert_eq!(paths.len(), lis.element_count());
        for (i, p) in paths.iter().enumerate() {
            assert_eq!(p.element, i);
            assert_eq!(p.order, 0);
            let pos = lis.element_position(i % 12, i / 12);
            assert!((p.total_length - distance(pos, [5.17, 5.17, 0.0])).abs() < 1e-12);
        }
    }

    #[test]
    fn slab_shadows_device() {
        let mut scene = Scene::empty_reference();
        // thin slab hovering 1 m above the device
        scene.scatterers.push(
            ScattererBox::new([5.17, 5.17], [0.04, 0.04], Material::metal())
                .with_base(1.0)
                .with_height(0.2),
        );
        let scene = one_device(scene, [5.17, 5.17, 0.0]);
        let lis = small_lis(&scene, 16);
        let paths = trace_paths(&scene, &lis, 0, 0).unwrap();
        let lit: Vec<usize> = paths.iter().map(|p| p.element).collect();
        let mut shadowed = 0;
        for e in 0..lis.element_count() {
            let pos = lis.element_position(e % 16, e / 16);
            // the ray is narrowest at the slab's bottom face, z = 1
            let dx = (pos[0] - 5.17) / 8.0;
            let dy = (pos[1] - 5.17) / 8.0;
            let under = dx.abs() < 0.02 && dy.abs() < 0.02;
            assert_eq!(!under, lit.contains(&e), "element {e}");
            shadowed += under as usize;
        }
        assert_eq!(shadowed, 64);
    }

    /// Brute-force shortest two-leg path touching the face `x = x_f`,
    /// `y ∈ [y0, y1]`, `z ∈ [z0, z1]`.
    fn brute_force_reflection(src: Vec3, dst: Vec3, x_f: f64, y: (f64, f64), z: (f64, f64)) -> f64 {
        let len = |py: f64, pz: f64| {
            let p = [x_f, py, pz];
            distance(src, p) + distance(p, dst)
        };
        let (mut ylo, mut yhi, mut zlo, mut zhi) = (y.0, y.1, z.0, z.1);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for _ in 0..40 {
            let n = 40;
            for i in 0..=n {
                for j in 0..=n {
                    let py = ylo + (yhi - ylo) * i as f64 / n as f64;
                    let pz = zlo + (zhi - zlo) * j as f64 / n as f64;
                    let l = len(py, pz);
                    if l < best.0 {
                        best = (l, py, pz);
                    }
                }
            }
            let hy = (yhi - ylo) / 8.0;
            let hz = (zhi - zlo) / 8.0;
            ylo = (best.1 - hy).max(y.0);
            yhi = (best.1 + hy).min(y.1);
            zlo = (best.2 - hz).max(z.0);
            zhi = (best.2 + hz).min(z.1);
        }
        best.0
    }

    #[test]
    fn single_face_reflection_matches_brute_force() {
        // Room without walls to reflect off: make walls vacuum-like but still
        // geometric faces, then select the scatterer path by its coefficient.
        let mut scene = Scene::empty_reference();
        scene.wall_material = Material::vacuum();
        // tall thin plate whose -x face is the only reachable scatterer face
        scene
            .scatterers
            .push(ScattererBox::new([8.0, 5.17], [0.2, 4.0], Material::metal()).with_height(7.0));
        let dev = [4.0, 5.0, 0.0];
        let scene = one_device(scene, dev);
        let lis = LisConfig {
            n_x: 6,
            n_y: 6,
            spacing: 0.3,
            antenna_impedance: 1.0,
            height: 8.0,
            center: [5.0, 5.17],
        };
        let paths = trace_paths(&scene, &lis, 0, 1).unwrap();
        let mut checked = 0;
        for e in 0..lis.element_count() {
            let pos = lis.element_position(e % 6, e / 6);
            let here: Vec<&RayPath> = paths.iter().filter(|p| p.element == e).collect();
            assert!(here.iter().any(|p| p.order == 0), "direct path missing at {e}");
            let metal: Vec<&&RayPath> = here
                .iter()
                .filter(|p| p.order == 1 && p.reflection_coefficients[0].norm() > 0.5)
                .collect();
            assert_eq!(metal.len(), 1, "element {e}");
            let image = mirror(dev, 0, 7.9);
            assert!((metal[0].total_length - distance(image, pos)).abs() < 1e-12);
            let brute = brute_force_reflection(dev, pos, 7.9, (3.17, 7.17), (0.0, 7.0));
            assert!((metal[0].total_length - brute).abs() < 1e-6, "{} vs {brute}", metal[0].total_length);
            checked += 1;
        }
        assert_eq!(checked, 36);
    }

    #[test]
    fn single_direct_path_field() {
        let lis = LisConfig {
            n_x: 2,
            n_y: 2,
            spacing: 0.1,
            antenna_impedance: 1.0,
            height: 8.0,
            center: [0.0, 0.0],
        };
        let device = Device::new([0.0, 0.0, 0.0], 20.0);
        let lambda = SPEED_OF_LIGHT / 3.5e9;
        let path = RayPath {
            element: 0,
            total_length: 8.0,
            reflection_coefficients: vec![],
            source_device: 0,
            order: 0,
        };
        let f = field_at_lis(&[path], &[device], &lis, lambda).unwrap();
        let e = f.values.as_slice()[0];
        let a = source_amplitude(0.1);
        assert!((a - 3f64.sqrt()).abs() < 1e-12);
        assert!((e.norm() - a / 8.0).abs() < 1e-12);
        let expected_phase = (-2.0 * PI * 8.0 / lambda).rem_euclid(2.0 * PI);
        let diff = (e.arg().rem_euclid(2.0 * PI) - expected_phase).abs();
        assert!(diff < 1e-9 || (diff - 2.0 * PI).abs() < 1e-9);
        assert_eq!(f.values.as_slice()[1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn opposite_coefficients_cancel() {
        let lis = LisConfig {
            n_x: 2,
            n_y: 2,
            spacing: 0.1,
            antenna_impedance: 1.0,
            height: 8.0,
            center: [0.0, 0.0],
        };
        let mk = |g: f64| RayPath {
            element: 3,
            total_length: 9.5,
            reflection_coefficients: vec![Complex64::new(g, 0.0)],
            source_device: 0,
            order: 1,
        };
        let f = field_at_lis(&[mk(1.0), mk(-1.0)], &[Device::new([0.0; 3], 20.0)], &lis, 0.1).unwrap();
        assert!(f.values.as_slice()[3].norm() < 1e-15);
    }

    #[test]
    fn degenerate_path_rejected() {
        let lis = LisConfig {
            n_x: 2,
            n_y: 2,
            spacing: 0.1,
            antenna_impedance: 1.0,
            height: 8.0,
            center: [0.0, 0.0],
        };
        let p = RayPath {
            element: 0,
            total_length: 0.005,
            reflection_coefficients: vec![],
            source_device: 0,
            order: 0,
        };
        assert!(matches!(
            field_at_lis(&[p], &[Device::new([0.0; 3], 20.0)], &lis, 0.0857),
            Err(Error::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn field_is_linear_in_devices() {
        let scene = sample_devices(&Scene::scenario_1(), 2, 4).unwrap();
        let lis = small_lis(&scene, 16);
        let lambda = scene.wavelength();
        let p0 = trace_paths(&scene, &lis, 0, 1).unwrap();
        let p1 = trace_paths(&scene, &lis, 1, 1).unwrap();
        let f0 = field_at_lis(&p0, &scene.devices, &lis, lambda).unwrap();
        let f1 = field_at_lis(&p1, &scene.devices, &lis, lambda).unwrap();
        let all: Vec<RayPath> = p0.iter().chain(&p1).cloned().collect();
        let joint = field_at_lis(&all, &scene.devices, &lis, lambda).unwrap();
        let sum = f0.add(&f1);
        for (a, b) in joint.values.as_slice().iter().zip(sum.values.as_slice()) {
            assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }
        let fused = scene_field(&scene, &lis, 1).unwrap();
        for (a, b) in joint.values.as_slice().iter().zip(fused.values.as_slice()) {
            assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn free_space_magnitude_law() {
        let scene = one_device(Scene::empty_reference(), [4.0, 6.0, 0.0]);
        let lis = small_lis(&scene, 10);
        let paths = trace_paths(&scene, &lis, 0, 0).unwrap();
        let f = field_at_lis(&paths, &scene.devices, &lis, scene.wavelength()).unwrap();
        let expected = source_amplitude(0.1);
        for p in &paths {
            let product = f.values.as_slice()[p.element].norm() * p.total_length;
            assert!((product - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn lossy_reflector_carries_less_energy() {
        // Direct path blocked by a slab; only single bounces off the tall
        // plate reach the array. Swapping metal for brick can only lose energy.
        let build = |material: Material| {
            let mut scene = Scene::empty_reference();
            scene.wall_material = Material::vacuum();
            scene.scatterers.push(
                ScattererBox::new([3.0, 5.17], [0.1, 0.1], Material::vacuum())
                    .with_base(0.5)
                    .with_height(0.1),
            );
            scene
                .scatterers
                .push(ScattererBox::new([1.0, 5.17], [0.2, 4.0], material).with_height(7.0));
            one_device(scene, [3.0, 5.17, 0.0])
        };
        let metal = build(Material::metal());
        let brick = build(Material::brick());
        let lis = LisConfig {
            n_x: 8,
            n_y: 8,
            spacing: 0.1,
            antenna_impedance: 1.0,
            height: 8.0,
            center: [3.0, 5.17],
        };
        let direct = trace_paths(&metal, &lis, 0, 0).unwrap();
        assert!(direct.is_empty());
        let em = scene_field(&metal, &lis, 1).unwrap().values.energy();
        let eb = scene_field(&brick, &lis, 1).unwrap().values.energy();
        assert!(em > 0.0);
        assert!(eb <= em, "{eb} > {em}");
    }

    #[test]
    fn element_outside_room_receives_nothing() {
        let mut scene = one_device(Scene::empty_reference(), [5.0, 5.0, 0.0]);
        scene.room = RoomExtent { lx: 2.0, ly: 10.34, h: 8.0 };
        scene.devices[0].position = [1.0, 5.0, 0.0];
        let lis = LisConfig {
            n_x: 4,
            n_y: 2,
            spacing: 1.0,
            antenna_impedance: 1.0,
            height: 8.0,
            center: [1.0, 5.0],
        };
        let paths = trace_paths(&scene, &lis, 0, 1).unwrap();
        // columns at x = -0.5 and 2.5 are outside
        assert!(paths.iter().all(|p| matches!(p.element % 4, 1 | 2)));
    }

    #[test]
    fn second_order_paths_exist_between_parallel_walls() {
        let scene = one_device(Scene::empty_reference(), [2.0, 5.17, 0.0]);
        let lis = small_lis(&scene, 4);
        let p1 = trace_paths(&scene, &lis, 0, 1).unwrap();
        let p2 = trace_paths(&scene, &lis, 0, 2).unwrap();
        assert!(p2.len() > p1.len());
        assert!(p2.iter().any(|p| p.order == 2));
        assert!(p2.iter().all(|p| p.order == p.reflection_coefficients.len()));
    }

    #[test]
    fn dump_has_one_line_per_path() {
        let scene = one_device(Scene::empty_reference(), [5.0, 5.0, 0.0]);
        let lis = small_lis(&scene, 4);
        let paths = trace_paths(&scene, &lis, 0, 1).unwrap();
        let mut buf = Vec::new();
        write_path_dump(&paths, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), paths.len() + 1);
    }

    proptest! {
        #[test]
        fn image_construction_is_reciprocal(
            s in prop::array::uniform3(-10.0f64..10.0),
            r in prop::array::uniform3(-10.0f64..10.0),
            axis in 0usize..3,
            coord in -5.0f64..5.0,
        ) {
            let a = distance(mirror(s, axis, coord), r);
            let b = distance(s, mirror(r, axis, coord));
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn reflection_never_amplifies(
            sigma in 0.0f64..1e5,
            eps_r in 1.0f64..20.0,
            angle in 0.0f64..std::f64::consts::FRAC_PI_2,
        ) {
            let m = Material { conductivity: sigma, relative_permittivity: eps_r, relative_permeability: 1.0 };
            prop_assert!(fresnel_reflection(&m, angle, 3.5e9).norm() <= 1.0 + 1e-12);
        }
    }
}
