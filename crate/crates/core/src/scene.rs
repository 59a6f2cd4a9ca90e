//! Indoor scenes: room, material-tagged scatterer boxes, and active devices.
//!
//! Scatterers are axis-aligned boxes. Each box spans its footprint
//! `center ± extent / 2` in x and y, and `[base, base + height]` in z. Devices
//! are isotropic narrowband transmitters.
//!
//! Scenes load from and save to TOML files (see [`SceneFile`]); the field
//! names are documented in the repository README.

use std::collections::BTreeMap;
use std::path::Path;

use image::{Rgb, RgbImage};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transmit power of sampled devices, in dBm.
pub const DEFAULT_TX_POWER_DBM: f64 = 20.0;
/// Default scatterer height in metres.
pub const DEFAULT_SCATTERER_HEIGHT: f64 = 2.0;
/// Carrier frequency of the reference scenarios, in Hz.
pub const DEFAULT_FREQUENCY_HZ: f64 = 3.5e9;
/// Side length of the reference square room, in metres.
pub const REFERENCE_ROOM_SIDE: f64 = 10.34;
/// Height of the reference room (and of the ceiling-mounted array), in metres.
pub const REFERENCE_ROOM_HEIGHT: f64 = 8.0;

const EPS: f64 = 1e-9;
/// Minimum clearance between a sampled device and walls or scatterer footprints.
const PLACEMENT_CLEARANCE: f64 = 0.05;
const PLACEMENT_ATTEMPTS_PER_DEVICE: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Conductivity in S/m.
    pub conductivity: f64,
    #[serde(rename = "permittivity")]
    pub relative_permittivity: f64,
    #[serde(rename = "permeability")]
    pub relative_permeability: f64,
}

impl Material {
    pub fn new(conductivity: f64, relative_permittivity: f64, relative_permeability: f64) -> Result<Self> {
        let m = Self {
            conductivity,
            relative_permittivity,
            relative_permeability,
        };
        m.check()?;
        Ok(m)
    }

    pub fn metal() -> Self {
        Self {
            conductivity: 19444.0,
            relative_permittivity: 1.0,
            relative_permeability: 20.0,
        }
    }

    pub fn brick() -> Self {
        Self {
            conductivity: 0.078,
            relative_permittivity: 4.0,
            relative_permeability: 1.0,
        }
    }

    pub fn vacuum() -> Self {
        Self {
            conductivity: 0.0,
            relative_permittivity: 1.0,
            relative_permeability: 1.0,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.conductivity >= 0.0)
            || !(self.relative_permittivity >= 1.0)
            || !(self.relative_permeability > 0.0)
        {
            return Err(Error::invalid(format!("material out of range: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScattererBox {
    pub center_xy: [f64; 2],
    /// Full side lengths of the footprint.
    pub extent_xy: [f64; 2],
    pub height: f64,
    /// Elevation of the bottom face; zero for floor-standing objects.
    pub base: f64,
    pub material: Material,
}

impl ScattererBox {
    pub fn new(center_xy: [f64; 2], extent_xy: [f64; 2], material: Material) -> Self {
        Self {
            center_xy,
            extent_xy,
            height: DEFAULT_SCATTERER_HEIGHT,
            base: 0.0,
            material,
        }
    }

    pub fn with_height(mut self, height: f64) -> Self {
        self.height = height;
        self
    }

    pub fn with_base(mut self, base: f64) -> Self {
        self.base = base;
        self
    }

    pub fn min_corner(&self) -> [f64; 3] {
        [
            self.center_xy[0] - 0.5 * self.extent_xy[0],
            self.center_xy[1] - 0.5 * self.extent_xy[1],
            self.base,
        ]
    }

    pub fn max_corner(&self) -> [f64; 3] {
        [
            self.center_xy[0] + 0.5 * self.extent_xy[0],
            self.center_xy[1] + 0.5 * self.extent_xy[1],
            self.base + self.height,
        ]
    }

    pub fn footprint_area(&self) -> f64 {
        self.extent_xy[0] * self.extent_xy[1]
    }

    /// True if `(x, y)` lies inside the footprint grown by `margin`.
    pub fn footprint_contains(&self, x: f64, y: f64, margin: f64) -> bool {
        let lo = self.min_corner();
        let hi = self.max_corner();
        x >= lo[0] - margin && x <= hi[0] + margin && y >= lo[1] - margin && y <= hi[1] + margin
    }

    /// True if the point is strictly inside the box volume.
    pub fn interior_contains(&self, p: [f64; 3]) -> bool {
        let lo = self.min_corner();
        let hi = self.max_corner();
        (0..3).all(|a| p[a] > lo[a] + EPS && p[a] < hi[a] - EPS)
    }

    fn overlaps(&self, other: &ScattererBox) -> bool {
        let (a_lo, a_hi) = (self.min_corner(), self.max_corner());
        let (b_lo, b_hi) = (other.min_corner(), other.max_corner());
        (0..3).all(|k| a_lo[k] < b_hi[k] - EPS && b_lo[k] < a_hi[k] - EPS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Device {
    pub position: [f64; 3],
    pub tx_power_dbm: f64,
    /// Transmitted sensing symbol; unit modulus.
    pub symbol: Complex64,
}

impl Device {
    pub fn new(position: [f64; 3], tx_power_dbm: f64) -> Self {
        Self {
            position,
            tx_power_dbm,
            symbol: Complex64::new(1.0, 0.0),
        }
    }

    pub fn tx_power_watts(&self) -> f64 {
        1e-3 * 10f64.powf(self.tx_power_dbm / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomExtent {
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub room: RoomExtent,
    pub wall_material: Material,
    pub scatterers: Vec<ScattererBox>,
    pub devices: Vec<Device>,
    pub carrier_frequency: f64,
    /// Height at which [`sample_devices`] places new devices.
    pub device_height: f64,
}

impl Scene {
    /// Empty reference room with brick walls and no devices.
    pub fn empty_reference() -> Self {
        Self {
            room: RoomExtent {
                lx: REFERENCE_ROOM_SIDE,
                ly: REFERENCE_ROOM_SIDE,
                h: REFERENCE_ROOM_HEIGHT,
            },
            wall_material: Material::brick(),
            scatterers: Vec::new(),
            devices: Vec::new(),
            carrier_frequency: DEFAULT_FREQUENCY_HZ,
            device_height: 0.0,
        }
    }

    /// First reference layout: two elongated wall segments and two cabinets.
    pub fn scenario_1() -> Self {
        let metal = Material::metal();
        Self {
            scatterers: vec![
                ScattererBox::new([3.0, 2.4], [4.0, 0.6], metal),
                ScattererBox::new([7.6, 3.0], [1.2, 1.2], metal),
                ScattererBox::new([2.4, 7.2], [0.8, 3.0], metal),
                ScattererBox::new([7.2, 7.6], [1.6, 1.6], metal),
            ],
            ..Self::empty_reference()
        }
    }

    /// Second reference layout: a central machine, a long shelf and three crates.
    pub fn scenario_2() -> Self {
        let metal = Material::metal();
        Self {
            scatterers: vec![
                ScattererBox::new([5.17, 5.17], [2.0, 1.4], metal),
                ScattererBox::new([8.8, 5.6], [0.6, 5.0], metal),
                ScattererBox::new([1.8, 1.8], [1.0, 1.0], metal),
                ScattererBox::new([2.0, 8.4], [2.2, 0.8], metal),
                ScattererBox::new([5.6, 1.5], [1.4, 0.7], metal),
            ],
            ..Self::empty_reference()
        }
    }

    pub fn wavelength(&self) -> f64 {
        crate::SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn with_devices(mut self, devices: Vec<Device>) -> Self {
        self.devices = devices;
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: SceneFile = toml::from_str(&text)?;
        file.into_scene()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(&SceneFile::from_scene(self))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Check every scene invariant, including at least one device.
pub fn validate_scene(scene: &Scene) -> Result<()> {
    validate_template(scene)?;
    if scene.devices.is_empty() {
        return Err(Error::EmptyScene);
    }
    Ok(())
}

/// Check every scene invariant except the presence of devices; templates
/// get their devices from [`sample_devices`].
pub fn validate_template(scene: &Scene) -> Result<()> {
    let RoomExtent { lx, ly, h } = scene.room;
    if !(lx > 0.0 && ly > 0.0 && h > 0.0) {
        return Err(Error::invalid("room extent must be positive"));
    }
    if !(scene.carrier_frequency > 0.0) {
        return Err(Error::invalid("carrier frequency must be positive"));
    }
    scene.wall_material.check()?;
    for (i, s) in scene.scatterers.iter().enumerate() {
        s.material.check()?;
        if !(s.extent_xy[0] > 0.0 && s.extent_xy[1] > 0.0 && s.height > 0.0) {
            return Err(Error::invalid(format!("scatterer {i} has a non-positive extent")));
        }
        let lo = s.min_corner();
        let hi = s.max_corner();
        if lo[0] < -EPS || lo[1] < -EPS || lo[2] < -EPS || hi[0] > lx + EPS || hi[1] > ly + EPS || hi[2] > h + EPS {
            return Err(Error::OutOfBounds {
                what: format!("scatterer {i}"),
            });
        }
    }
    for i in 0..scene.scatterers.len() {
        for j in i + 1..scene.scatterers.len() {
            if scene.scatterers[i].overlaps(&scene.scatterers[j]) {
                return Err(Error::Overlap { first: i, second: j });
            }
        }
    }
    for (k, d) in scene.devices.iter().enumerate() {
        let [x, y, z] = d.position;
        let inside_room = x >= -EPS && x <= lx + EPS && y >= -EPS && y <= ly + EPS && z >= -EPS && z <= h + EPS;
        if !inside_room {
            return Err(Error::OutOfBounds {
                what: format!("device {k}"),
            });
        }
        if scene.scatterers.iter().any(|s| s.interior_contains(d.position)) {
            return Err(Error::OutOfBounds {
                what: format!("device {k} (inside a scatterer)"),
            });
        }
        if ((d.symbol.norm() - 1.0).abs()) > 1e-9 {
            return Err(Error::invalid(format!("device {k} symbol is not unit modulus")));
        }
    }
    Ok(())
}

/// Binary floor plan: white background (255), black scatterer footprints (0).
#[derive(Debug, Clone, PartialEq)]
pub struct FloorPlanImage {
    pub image: RgbImage,
    /// Set when the image was produced with access to the ground truth.
    pub oracle_assisted: bool,
}

impl FloorPlanImage {
    pub fn new(image: RgbImage) -> Self {
        Self {
            image,
            oracle_assisted: false,
        }
    }

    pub fn resolution(&self) -> u32 {
        self.image.width()
    }
}

pub const BACKGROUND: u8 = 255;
pub const OBJECT: u8 = 0;

/// Rasterize scatterer footprints onto an `resolution`×`resolution` image.
///
/// Pixel `(i, j)` covers `[i·lx/R, (i+1)·lx/R) × [j·ly/R, (j+1)·ly/R)` and is
/// marked as object when its centre falls inside a footprint.
pub fn rasterize_floorplan(scene: &Scene, resolution: u32) -> Result<FloorPlanImage> {
    if resolution < 8 {
        return Err(Error::Resolution(resolution));
    }
    let r = resolution as usize;
    let px = scene.room.lx / r as f64;
    let py = scene.room.ly / r as f64;
    let mut img = RgbImage::from_pixel(resolution, resolution, Rgb([BACKGROUND; 3]));
    for s in &scene.scatterers {
        let lo = s.min_corner();
        let hi = s.max_corner();
        let (i0, i1) = covered_range(lo[0], hi[0], px, r);
        let (j0, j1) = covered_range(lo[1], hi[1], py, r);
        for j in j0..j1 {
            for i in i0..i1 {
                img.put_pixel(i as u32, j as u32, Rgb([OBJECT; 3]));
            }
        }
    }
    Ok(FloorPlanImage::new(img))
}

/// Pixel indices whose centres `(i + 0.5)·pitch` lie in `[lo, hi)`.
fn covered_range(lo: f64, hi: f64, pitch: f64, n: usize) -> (usize, usize) {
    let first = (lo / pitch - 0.5).ceil().max(0.0) as usize;
    let end = ((hi / pitch - 0.5).ceil().max(0.0) as usize).min(n);
    (first.min(end), end)
}

/// Replace the template's devices with `k_a` devices drawn uniformly from free
/// floor space (outside every scatterer footprint) at the template's device
/// height.
pub fn sample_devices(template: &Scene, k_a: usize, seed: u64) -> Result<Scene> {
    if k_a == 0 {
        return Err(Error::EmptyScene);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let RoomExtent { lx, ly, .. } = template.room;
    let c = PLACEMENT_CLEARANCE;
    let max_attempts = PLACEMENT_ATTEMPTS_PER_DEVICE * k_a;
    let mut devices = Vec::with_capacity(k_a);
    let mut attempts = 0;
    while devices.len() < k_a {
        if attempts >= max_attempts || lx <= 2.0 * c || ly <= 2.0 * c {
            return Err(Error::Placement {
                requested: k_a,
                attempts,
            });
        }
        attempts += 1;
        let x = rng.random_range(c..lx - c);
        let y = rng.random_range(c..ly - c);
        if template.scatterers.iter().any(|s| s.footprint_contains(x, y, c)) {
            continue;
        }
        devices.push(Device::new([x, y, template.device_height], DEFAULT_TX_POWER_DBM));
    }
    Ok(Scene {
        devices,
        ..template.clone()
    })
}

// ---------------------------------------------------------------------------
// Scene file
// ---------------------------------------------------------------------------

/// On-disk scene description (TOML).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub frequency_hz: f64,
    #[serde(default)]
    pub device_height: f64,
    pub room: RoomExtent,
    pub walls: WallsEntry,
    pub materials: BTreeMap<String, Material>,
    #[serde(default)]
    pub scatterers: Vec<ScattererEntry>,
    #[serde(default)]
    pub devices: Vec<DeviceEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallsEntry {
    pub material: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererEntry {
    pub cx: f64,
    pub cy: f64,
    pub ex: f64,
    pub ey: f64,
    #[serde(default = "default_height")]
    pub height: f64,
    #[serde(default)]
    pub z0: f64,
    pub material: String,
}

fn default_height() -> f64 {
    DEFAULT_SCATTERER_HEIGHT
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceEntry {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(default = "default_power")]
    pub power_dbm: f64,
}

fn default_power() -> f64 {
    DEFAULT_TX_POWER_DBM
}

impl SceneFile {
    pub fn into_scene(self) -> Result<Scene> {
        let lookup = |name: &str| {
            self.materials
                .get(name)
                .copied()
                .ok_or_else(|| Error::invalid(format!("unknown material `{name}`")))
        };
        let wall_material = lookup(&self.walls.material)?;
        let scatterers = self
            .scatterers
            .iter()
            .map(|s| {
                Ok(ScattererBox {
                    center_xy: [s.cx, s.cy],
                    extent_xy: [s.ex, s.ey],
                    height: s.height,
                    base: s.z0,
                    material: lookup(&s.material)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let devices = self
            .devices
            .iter()
            .map(|d| Device::new([d.x, d.y, d.z], d.power_dbm))
            .collect();
        Ok(Scene {
            room: self.room,
            wall_material,
            scatterers,
            devices,
            carrier_frequency: self.frequency_hz,
            device_height: self.device_height,
        })
    }

    pub fn from_scene(scene: &Scene) -> Self {
        let mut materials = BTreeMap::<String, Material>::new();
        let mut name_of = |m: &Material| -> String {
            if let Some((name, _)) = materials.iter().find(|(_, v)| *v == m) {
                return name.clone();
            }
            let name = if *m == Material::metal() {
                "metal".to_string()
            } else if *m == Material::brick() {
                "brick".to_string()
            } else {
                format!("material{}", materials.len())
            };
            materials.insert(name.clone(), *m);
            name
        };
        let walls = WallsEntry {
            material: name_of(&scene.wall_material),
        };
        let scatterers = scene
            .scatterers
            .iter()
            .map(|s| ScattererEntry {
                cx: s.center_xy[0],
                cy: s.center_xy[1],
                ex: s.extent_xy[0],
                ey: s.extent_xy[1],
                height: s.height,
                z0: s.base,
                material: name_of(&s.material),
            })
            .collect();
        let devices = scene
            .devices
            .iter()
            .map(|d| DeviceEntry {
                x: d.position[0],
                y: d.position[1],
                z: d.position[2],
                power_dbm: d.tx_power_dbm,
            })
            .collect();
        Self {
            frequency_hz: scene.carrier_frequency,
            device_height: scene.device_height,
            room: scene.room,
            walls,
            materials,
            scatterers,
            devices,
        }
    }
}
