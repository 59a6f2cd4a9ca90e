//! Dataset generation, stratified splitting, and export.
//!
//! `build` writes every sample into `<root>/unassigned/`; `split` assigns
//! train/val/test per `(scenario, S, K_a)` stratum and `relocate` moves the
//! files into `<root>/<split>/<sample_id>_{map,plan}.png`. The manifest lives
//! at `<root>/manifest.json` with paths relative to `<root>`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lis::{self, LisConfig};
use crate::propagation::{self, DEFAULT_MAX_ORDER};
use crate::radiomap::{build_mf_kernel, Colormap, MatchedFilter, RadioMap, DEFAULT_DESIGN_DEPTH, DEFAULT_KERNEL_SIDE};
use crate::reconstruct_ls::resize_nearest;
use crate::scene::{rasterize_floorplan, sample_devices, FloorPlanImage, Scene};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_EXPORT_RESOLUTION: u32 = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTemplate {
    pub id: String,
    pub scene: Scene,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub scenarios: Vec<ScenarioTemplate>,
    pub s_values: Vec<u32>,
    pub k_a_values: Vec<usize>,
    pub gamma_db: f64,
    pub total_samples: usize,
    /// `(train, val, test)` fractions.
    pub split_ratios: [f64; 3],
    pub export_resolution: u32,
    pub master_seed: u64,
    /// Elements per side of the square array.
    pub lis_side: usize,
    pub kernel_side: usize,
    /// Focal depth of the matched-filter kernel, in metres.
    pub design_depth: f64,
    pub max_order: usize,
    pub colormap: Colormap,
}

impl Default for DatasetConfig {
    /// Two reference scenarios, `S ∈ {1, 100, 1000}`, `K_a ∈ {5, 20}`,
    /// γ = −10 dB, 2400 samples split 70/10/20.
    fn default() -> Self {
        Self {
            scenarios: vec![
                ScenarioTemplate {
                    id: "scenario1".into(),
                    scene: Scene::scenario_1(),
                },
                ScenarioTemplate {
                    id: "scenario2".into(),
                    scene: Scene::scenario_2(),
                },
            ],
            s_values: vec![1, 100, 1000],
            k_a_values: vec![5, 20],
            gamma_db: -10.0,
            total_samples: 2400,
            split_ratios: [0.7, 0.1, 0.2],
            export_resolution: DEFAULT_EXPORT_RESOLUTION,
            master_seed: 0,
            lis_side: lis::DEFAULT_SIDE,
            kernel_side: DEFAULT_KERNEL_SIDE,
            design_depth: DEFAULT_DESIGN_DEPTH,
            max_order: DEFAULT_MAX_ORDER,
            colormap: Colormap::grayscale(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.s_values.is_empty() || self.k_a_values.is_empty() {
            return Err(Error::invalid("scenarios, S values and K_a values must be nonempty"));
        }
        if self.total_samples < 10 {
            return Err(Error::invalid("total_samples must be at least 10"));
        }
        validate_ratios(self.split_ratios)?;
        if self.s_values.contains(&0) || self.k_a_values.contains(&0) {
            return Err(Error::invalid("S and K_a values must be positive"));
        }
        if self.export_resolution < 8 {
            return Err(Error::Resolution(self.export_resolution));
        }
        if self.lis_side < 2 || self.kernel_side == 0 {
            return Err(Error::invalid("array side must be ≥ 2 and kernel side ≥ 1"));
        }
        let mut ids: Vec<&str> = self.scenarios.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.scenarios.len() {
            return Err(Error::invalid("scenario ids must be unique"));
        }
        Ok(())
    }

    /// Every `(scenario index, S, K_a)` cell in enumeration order.
    pub fn combinations(&self) -> Vec<(usize, u32, usize)> {
        let mut out = Vec::new();
        for sc in 0..self.scenarios.len() {
            for &s in &self.s_values {
                for &k in &self.k_a_values {
                    out.push((sc, s, k));
                }
            }
        }
        out
    }
}

pub fn validate_ratios(r: [f64; 3]) -> Result<()> {
    if r.iter().any(|v| !(*v >= 0.0)) || ((r[0] + r[1] + r[2]) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split ratios {r:?} must be nonnegative and sum to 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::invalid(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub scenario_id: String,
    pub k_a: usize,
    pub s: u32,
    pub gamma_db: f64,
    pub seed: u64,
    /// Relative to the dataset root.
    pub radio_map_path: String,
    pub floor_plan_path: String,
    pub split: Split,
    /// Room footprint `[lx, ly]` in metres, for centroid scoring.
    pub room_extent: [f64; 2],
}

impl SampleRecord {
    pub fn stratum(&self) -> String {
        format!("{}/S={}/K_a={}", self.scenario_id, self.s, self.k_a)
    }

    fn paths_for(&self, split: Split) -> (String, String) {
        let dir = split.dir_name();
        (
            format!("{dir}/{}_map.png", self.sample_id),
            format!("{dir}/{}_plan.png", self.sample_id),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub export_resolution: u32,
    pub records: Vec<SampleRecord>,
}

impl Manifest {
    pub fn to_json(&self) -> Result<String> {
        let mut sorted = self.clone();
        sorted.records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        let mut text = serde_json::to_string_pretty(&sorted)?;
        text.push('\n');
        Ok(text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        let mut ids: Vec<&str> = manifest.records.iter().map(|r| r.sample_id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Format {
                path: path.to_path_buf(),
                reason: "duplicate sample_id".into(),
            });
        }
        Ok(manifest)
    }

    pub fn split_counts(&self) -> BTreeMap<Split, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.split).or_insert(0) += 1;
        }
        counts
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-independent seed for a named item: `hash(master_seed, name)`.
pub fn derive_seed(master_seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, mixed with the master seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(splitmix64(master_seed) ^ h)
}

pub fn sample_id(index: usize) -> String {
    format!("s{index:05}")
}

/// Everything produced for one sample, before export.
#[derive(Debug, Clone)]
pub struct SimulatedSample {
    pub scene: Scene,
    /// Radio map at array resolution.
    pub radio_map: RadioMap,
    /// `|y_mf|` of the noise-free signal.
    pub noiseless_magnitude: Grid<f64>,
    pub floor_plan: FloorPlanImage,
    pub sigma2: f64,
}

/// Planned matched filter for a scenario template under `config`.
pub fn filter_for(scene: &Scene, config: &DatasetConfig) -> Result<MatchedFilter> {
    let lis = LisConfig::for_scene(scene, config.lis_side);
    let kernel = build_mf_kernel(scene.carrier_frequency, config.design_depth, config.kernel_side, lis.spacing)?;
    Ok(MatchedFilter::new(kernel, lis.n_x, lis.n_y))
}

/// Place `k_a` devices, trace, synthesise the `s`-averaged signal at `gamma_db`
/// and form the radio map and floor plan. Device placement and noise draw
/// from seeds derived from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_sample(
    template: &Scene,
    filter: &MatchedFilter,
    config: &DatasetConfig,
    k_a: usize,
    s: u32,
    gamma_db: f64,
    seed: u64,
) -> Result<SimulatedSample> {
    let scene = sample_devices(template, k_a, splitmix64(seed))?;
    let lis = LisConfig::for_scene(&scene, config.lis_side);
    let field = propagation::scene_field(&scene, &lis, config.max_order)?;
    let sigma2 = lis::noise_sigma_for_snr(&field, gamma_db, &lis)?;
    let noisy = lis::average_samples(&field, &lis, sigma2, s, splitmix64(seed ^ 0x5eed))?;
    let clean = lis::average_samples(&field, &lis, 0.0, 1, 0)?;
    let radio_map = RadioMap::from_magnitude(filter.apply(&noisy)?.magnitude(), &config.colormap);
    let noiseless_magnitude = filter.apply(&clean)?.magnitude();
    let floor_plan = rasterize_floorplan(&scene, config.export_resolution)?;
    Ok(SimulatedSample {
        scene,
        radio_map,
        noiseless_magnitude,
        floor_plan,
        sigma2,
    })
}

/// Generate every sample into `<root>/unassigned/` and write the manifest.
/// Runs on the current rayon pool; output does not depend on its size.
pub fn build(config: &DatasetConfig, root: &Path) -> Result<Manifest> {
    config.validate()?;
    let dir = root.join(Split::Unassigned.dir_name());
    fs::create_dir_all(&dir)?;
    let filters = config
        .scenarios
        .iter()
        .map(|t| filter_for(&t.scene, config))
        .collect::<Result<Vec<_>>>()?;
    let combos = config.combinations();

    let mut records = (0..config.total_samples)
        .into_par_iter()
        .map(|i| {
            let (sc, s, k_a) = combos[i % combos.len()];
            let template = &config.scenarios[sc];
            let id = sample_id(i);
            let seed = derive_seed(config.master_seed, &id);
            let wrap = |e: Error| Error::Sample {
                sample_id: id.clone(),
                source: Box::new(e),
            };
            let sample =
                simulate_sample(&template.scene, &filters[sc], config, k_a, s, config.gamma_db, seed).map_err(wrap)?;
            let mut record = SampleRecord {
                sample_id: id.clone(),
                scenario_id: template.id.clone(),
                k_a,
                s,
                gamma_db: config.gamma_db,
                seed,
                radio_map_path: String::new(),
                floor_plan_path: String::new(),
                split: Split::Unassigned,
                room_extent: [template.scene.room.lx, template.scene.room.ly],
            };
            (record.radio_map_path, record.floor_plan_path) = record.paths_for(Split::Unassigned);
            let map = resize_nearest(&sample.radio_map.rgb, config.export_resolution);
            write_png(&map, &root.join(&record.radio_map_path)).map_err(wrap)?;
            write_png(&sample.floor_plan.image, &root.join(&record.floor_plan_path)).map_err(wrap)?;
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let manifest = Manifest {
        export_resolution: config.export_resolution,
        records,
    };
    manifest.save(&root.join(MANIFEST_FILE))?;
    Ok(manifest)
}

fn write_png(image: &RgbImage, path: &Path) -> Result<()> {
    image.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Stratified assignment. Each `(scenario, S, K_a)` stratum of `n` samples is
/// shuffled with a seed derived from `seed` and the stratum name, then cut
/// into `round(r_train·n)` train, `round(r_val·n)` val and the rest test.
/// Only the `split` field and paths change.
pub fn split(manifest: &Manifest, ratios: [f64; 3], seed: u64) -> Result<Manifest> {
    validate_ratios(ratios)?;
    let mut strata: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in manifest.records.iter().enumerate() {
        strata.entry(r.stratum()).or_default().push(i);
    }
    let mut out = manifest.clone();
    for (name, mut members) in strata {
        let n = members.len();
        if n < 3 {
            return Err(Error::StratumTooSmall { stratum: name, size: n });
        }
        members.sort_by(|&a, &b| manifest.records[a].sample_id.cmp(&manifest.records[b].sample_id));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &name));
        members.shuffle(&mut rng);
        let n_train = ((ratios[0] * n as f64).round() as usize).min(n);
        let n_val = ((ratios[1] * n as f64).round() as usize).min(n - n_train);
        for (rank, &i) in members.iter().enumerate() {
            let split = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            let rec = &mut out.records[i];
            rec.split = split;
            (rec.radio_map_path, rec.floor_plan_path) = rec.paths_for(split);
        }
    }
    Ok(out)
}

/// Move image files from the locations in `before` to those in `after` and
/// rewrite the manifest. Both manifests must list the same samples.
pub fn relocate(root: &Path, before: &Manifest, after: &Manifest) -> Result<()> {
    let old: BTreeMap<&str, &SampleRecord> = before.records.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    if old.len() != after.records.len() {
        return Err(Error::shape("manifests list different samples"));
    }
    for rec in &after.records {
        let prev = old
            .get(rec.sample_id.as_str())
            .ok_or_else(|| Error::shape(format!("sample {} missing from source manifest", rec.sample_id)))?;
        for (from, to) in [
            (&prev.radio_map_path, &rec.radio_map_path),
            (&prev.floor_plan_path, &rec.floor_plan_path),
        ] {
            if from != to {
                let dest = root.join(to);
                if let Some(parent) = dest.parent() {
                    fs::create_dir_all(parent)?;
                }
                fs::rename(root.join(from), dest)?;
            }
        }
    }
    after.save(&root.join(MANIFEST_FILE))?;
    for split in [Split::Unassigned, Split::Train, Split::Val, Split::Test] {
        // drop directories emptied by the move
        let dir = root.join(split.dir_name());
        if dir.is_dir() && fs::read_dir(&dir)?.next().is_none() {
            fs::remove_dir(&dir)?;
        }
    }
    Ok(())
}

/// `build`, then `split` with the configured ratios and master seed, then
/// `relocate`.
pub fn build_and_split(config: &DatasetConfig, root: &Path) -> Result<Manifest> {
    let built = build(config, root)?;
    let assigned = split(&built, config.split_ratios, config.master_seed)?;
    relocate(root, &built, &assigned)?;
    Ok(assigned)
}
