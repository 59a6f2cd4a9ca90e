//! The `lismap` command line.
//!
//! Exit codes: 0 on success, 1 when a pipeline stage fails, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use image::{Rgb, RgbImage};
use serde::Deserialize;

use crate::dataset::{self, DatasetConfig, Manifest, ScenarioTemplate, Split, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::io::{self as sigio, GridHeader};
use crate::lis::{self, LisConfig};
use crate::metrics::{self, SampleScore};
use crate::propagation;
use crate::radiomap::{self, build_mf_kernel, Colormap, MatchedFilter};
use crate::reconstruct_ls::{self, oracle_clamp, resize_nearest, LinearMap, Ridge};
use crate::scene::{rasterize_floorplan, sample_devices, validate_scene, validate_template, FloorPlanImage, Scene};

#[derive(Debug, Parser)]
#[command(name = "lismap", version, about = "Radio-map imaging and floor-plan reconstruction with a ceiling LIS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check, render or export scene descriptions.
    #[command(subcommand)]
    Scene(SceneCommand),
    /// Trace a scene and write the noisy, S-averaged array signal.
    Simulate(SimulateArgs),
    /// Matched-filter a signal file into a radio-map image.
    Radiomap(RadiomapArgs),
    /// Generate or re-split a dataset.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Fit or apply the least-squares map-to-plan estimator.
    #[command(subcommand)]
    Ls(LsCommand),
    /// Score predictions `<sample_id>_pred.png` against a dataset split.
    Evaluate(EvaluateArgs),
    /// Aggregate score files into a summary table.
    Report(ReportArgs),
    /// Mean PSNR per method and S, as CSV and a bar-chart PNG.
    Plot(PlotArgs),
}

#[derive(Debug, Subcommand)]
pub enum SceneCommand {
    /// Validate a scene file.
    Validate {
        /// Scene TOML file.
        #[arg(long)]
        scene: PathBuf,
    },
    /// Rasterize the floor plan of a scene.
    Render {
        /// Scene TOML file.
        #[arg(long)]
        scene: PathBuf,
        /// Image side in pixels.
        #[arg(long, default_value_t = dataset::DEFAULT_EXPORT_RESOLUTION)]
        resolution: u32,
        /// Output PNG.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a built-in scene (`scenario1`, `scenario2`, `empty`) as TOML.
    Builtin {
        /// Scene name.
        name: String,
        /// Output TOML file.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene TOML file.
    #[arg(long)]
    pub scene: PathBuf,
    /// Target SNR γ in dB.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: f64,
    /// Number of averaged snapshots S.
    #[arg(long, default_value_t = 1)]
    pub s: u32,
    /// RNG seed for noise and device placement.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace the scene's devices with this many uniformly placed ones.
    #[arg(long)]
    pub k_a: Option<usize>,
    /// Array side in elements (half-wavelength pitch).
    #[arg(long, default_value_t = lis::DEFAULT_SIDE)]
    pub lis_side: usize,
    /// Highest reflection order traced.
    #[arg(long, default_value_t = propagation::DEFAULT_MAX_ORDER)]
    pub max_order: usize,
    /// Also write every traced path (one line per path).
    #[arg(long)]
    pub paths: Option<PathBuf>,
    /// Output signal file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RadiomapArgs {
    /// Signal file written by `simulate`.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Kernel side in elements.
    #[arg(long, default_value_t = radiomap::DEFAULT_KERNEL_SIDE)]
    pub kernel_size: usize,
    /// Focal depth of the kernel in metres.
    #[arg(long, default_value_t = radiomap::DEFAULT_DESIGN_DEPTH)]
    pub depth: f64,
    /// `grayscale`, `viridis`, or a LUT file of 256 "r g b" lines.
    #[arg(long, default_value = "grayscale")]
    pub colormap: String,
    /// Also write the raw |y_mf| grid.
    #[arg(long)]
    pub magnitude_out: Option<PathBuf>,
    /// Output PNG.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Generate samples, then split them (unless --no-split).
    Build(Box<BuildArgs>),
    /// Reassign splits of an existing dataset and move its files.
    Split {
        /// Dataset root holding manifest.json.
        #[arg(long)]
        root: PathBuf,
        /// train,val,test fractions.
        #[arg(long, value_delimiter = ',', default_values_t = [0.7, 0.1, 0.2])]
        ratios: Vec<f64>,
        /// Shuffle seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args, Default)]
pub struct BuildArgs {
    /// Output root.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario: built-in name or scene TOML path (repeatable).
    #[arg(long = "scenario")]
    pub scenarios: Vec<String>,
    /// Total sample count.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// SNR γ in dB.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    /// Snapshot counts S, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub s_values: Option<Vec<u32>>,
    /// Active device counts K_a, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k_a_values: Option<Vec<usize>>,
    /// train,val,test fractions.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    /// Exported image side in pixels.
    #[arg(long)]
    pub resolution: Option<u32>,
    /// Array side in elements.
    #[arg(long)]
    pub lis_side: Option<usize>,
    /// Matched-filter kernel side in elements.
    #[arg(long)]
    pub kernel_size: Option<usize>,
    /// Kernel focal depth in metres.
    #[arg(long)]
    pub depth: Option<f64>,
    /// Highest reflection order traced.
    #[arg(long)]
    pub max_order: Option<usize>,
    /// `grayscale`, `viridis`, or a LUT file.
    #[arg(long)]
    pub colormap: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Leave every sample in `unassigned/`.
    #[arg(long)]
    pub no_split: bool,
}

/// Dataset build config file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfigFile {
    pub scenarios: Option<Vec<String>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub snr_db: Option<f64>,
    pub s_values: Option<Vec<u32>>,
    pub k_a_values: Option<Vec<usize>>,
    pub ratios: Option<[f64; 3]>,
    pub resolution: Option<u32>,
    pub lis_side: Option<usize>,
    pub kernel_size: Option<usize>,
    pub depth: Option<f64>,
    pub max_order: Option<usize>,
    pub colormap: Option<String>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum LsCommand {
    /// Fit weights on a dataset split.
    Fit {
        /// Dataset root holding manifest.json.
        #[arg(long)]
        dataset: PathBuf,
        /// Split to fit on: train, val, test or unassigned.
        #[arg(long, default_value = "train")]
        split: String,
        /// Working image side in pixels.
        #[arg(long, default_value_t = reconstruct_ls::DEFAULT_WORKING_RESOLUTION)]
        resolution: u32,
        /// Ridge α: `auto` or a nonnegative number.
        #[arg(long, default_value = "auto")]
        ridge: String,
        /// Output weights file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct floor plans with fitted weights.
    Predict {
        /// Weights file written by `ls fit`.
        #[arg(long)]
        weights: PathBuf,
        /// Single radio-map PNG (with --out as the output PNG).
        #[arg(long, conflicts_with = "dataset")]
        image: Option<PathBuf>,
        /// Dataset root (with --out as the output directory).
        #[arg(long, required_unless_present = "image")]
        dataset: Option<PathBuf>,
        /// Split to predict.
        #[arg(long, default_value = "test")]
        split: String,
        /// Output side in pixels; defaults to the dataset export resolution
        /// or the input image side.
        #[arg(long)]
        resolution: Option<u32>,
        /// Output PNG or directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset root holding manifest.json.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory of `<sample_id>_pred.png` files.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Split to score.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Method name recorded with every score.
    #[arg(long, default_value = "prediction")]
    pub method: String,
    /// Clamp each prediction with its ground truth first (oracle-assisted).
    #[arg(long)]
    pub oracle_clamp: bool,
    /// Output score file, one JSON record per line.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Score files written by `evaluate`.
    #[arg(long = "scores", required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// Also write the table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Score files written by `evaluate`.
    #[arg(long = "scores", required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// Output prefix; writes `<prefix>.csv` and `<prefix>.png`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            1
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Scene(c) => scene_cmd(c),
        Command::Simulate(a) => simulate(a),
        Command::Radiomap(a) => radiomap_cmd(a),
        Command::Dataset(DatasetCommand::Build(a)) => dataset_build(*a),
        Command::Dataset(DatasetCommand::Split { root, ratios, seed }) => dataset_split(&root, &ratios, seed),
        Command::Ls(c) => ls_cmd(c),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
        Command::Plot(a) => plot(a),
    }
}

fn builtin_scene(name: &str) -> Option<Scene> {
    match name {
        "scenario1" => Some(Scene::scenario_1()),
        "scenario2" => Some(Scene::scenario_2()),
        "empty" => Some(Scene::empty_reference()),
        _ => None,
    }
}

fn load_scene(path: &Path) -> Result<Scene> {
    let scene = Scene::load(path)?;
    validate_template(&scene)?;
    Ok(scene)
}

fn scene_cmd(c: SceneCommand) -> Result<()> {
    match c {
        SceneCommand::Validate { scene } => {
            let s = load_scene(&scene)?;
            if s.devices.is_empty() {
                println!("note: no devices; usable as a template with --k-a or in dataset builds");
            }
            println!(
                "ok: {} scatterers, {} devices, f = {} Hz",
                s.scatterers.len(),
                s.devices.len(),
                s.carrier_frequency
            );
        }
        SceneCommand::Render { scene, resolution, out } => {
            let plan = rasterize_floorplan(&load_scene(&scene)?, resolution)?;
            plan.image.save(&out)?;
        }
        SceneCommand::Builtin { name, out } => {
            let s = builtin_scene(&name).ok_or_else(|| Error::invalid(format!("no built-in scene '{name}'")))?;
            s.save(&out)?;
        }
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut scene = load_scene(&a.scene)?;
    if let Some(k) = a.k_a {
        scene = sample_devices(&scene, k, a.seed)?;
    }
    validate_scene(&scene)?;
    let lis = LisConfig::for_scene(&scene, a.lis_side);
    lis.validate()?;
    let field = propagation::scene_field(&scene, &lis, a.max_order)?;
    let sigma2 = lis::noise_sigma_for_snr(&field, a.snr_db, &lis)?;
    let signal = lis::average_samples(&field, &lis, sigma2, a.s, a.seed)?;
    sigio::save_signal(&signal, &a.out)?;
    if let Some(path) = &a.paths {
        let mut out = BufWriter::new(fs::File::create(path)?);
        for d in 0..scene.devices.len() {
            let paths = propagation::trace_paths(&scene, &lis, d, a.max_order)?;
            propagation::write_path_dump(&paths, &mut out)?;
        }
        out.flush()?;
    }
    println!(
        "wrote {} ({}x{} elements, sigma2 = {:.6e}, S = {})",
        a.out.display(),
        lis.n_x,
        lis.n_y,
        sigma2,
        a.s
    );
    Ok(())
}

fn radiomap_cmd(a: RadiomapArgs) -> Result<()> {
    let signal = sigio::load_signal(&a.input)?;
    let lut = Colormap::by_name(&a.colormap)?;
    let kernel = build_mf_kernel(signal.frequency, a.depth, a.kernel_size, signal.spacing)?;
    let (nx, ny) = signal.values.dims();
    let magnitude = MatchedFilter::new(kernel, nx, ny).apply(&signal)?.magnitude();
    radiomap::to_rgb(&magnitude, &lut).save(&a.out)?;
    if let Some(path) = &a.magnitude_out {
        sigio::save_magnitude(&magnitude, &GridHeader::of(&signal), path)?;
    }
    Ok(())
}

fn resolve_scenario(spec: &str, base: &Path) -> Result<ScenarioTemplate> {
    if let Some(scene) = builtin_scene(spec) {
        return Ok(ScenarioTemplate {
            id: spec.to_string(),
            scene,
        });
    }
    let path = base.join(spec);
    let scene = load_scene(&path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    Ok(ScenarioTemplate { id, scene })
}

fn ratios3(v: &[f64]) -> Result<[f64; 3]> {
    v.try_into()
        .map_err(|_| Error::invalid("ratios need exactly three values"))
}

/// Merge flags over the config file over the defaults.
pub fn build_config(a: &BuildArgs) -> Result<(DatasetConfig, Option<usize>)> {
    let (file, base) = match &a.config {
        Some(p) => (
            toml::from_str::<BuildConfigFile>(&fs::read_to_string(p)?)?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (BuildConfigFile::default(), PathBuf::new()),
    };
    let mut c = DatasetConfig::default();
    if !a.scenarios.is_empty() {
        c.scenarios = a
            .scenarios
            .iter()
            .map(|s| resolve_scenario(s, Path::new("")))
            .collect::<Result<_>>()?;
    } else if let Some(list) = &file.scenarios {
        c.scenarios = list.iter().map(|s| resolve_scenario(s, &base)).collect::<Result<_>>()?;
    }
    c.total_samples = a.samples.or(file.samples).unwrap_or(c.total_samples);
    c.master_seed = a.seed.or(file.seed).unwrap_or(c.master_seed);
    c.gamma_db = a.snr_db.or(file.snr_db).unwrap_or(c.gamma_db);
    c.s_values = a.s_values.clone().or(file.s_values).unwrap_or(c.s_values);
    c.k_a_values = a.k_a_values.clone().or(file.k_a_values).unwrap_or(c.k_a_values);
    if let Some(r) = &a.ratios {
        c.split_ratios = ratios3(r)?;
    } else if let Some(r) = file.ratios {
        c.split_ratios = r;
    }
    c.export_resolution = a.resolution.or(file.resolution).unwrap_or(c.export_resolution);
    c.lis_side = a.lis_side.or(file.lis_side).unwrap_or(c.lis_side);
    c.kernel_side = a.kernel_size.or(file.kernel_size).unwrap_or(c.kernel_side);
    c.design_depth = a.depth.or(file.depth).unwrap_or(c.design_depth);
    c.max_order = a.max_order.or(file.max_order).unwrap_or(c.max_order);
    if let Some(name) = a.colormap.as_ref().or(file.colormap.as_ref()) {
        c.colormap = Colormap::by_name(name)?;
    }
    c.validate()?;
    Ok((c, a.jobs.or(file.jobs)))
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(0) => Err(Error::invalid("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn dataset_build(a: BuildArgs) -> Result<()> {
    let (config, jobs) = build_config(&a)?;
    let manifest = with_jobs(jobs, || {
        if a.no_split {
            dataset::build(&config, &a.out)
        } else {
            dataset::build_and_split(&config, &a.out)
        }
    })??;
    print_counts(&manifest);
    Ok(())
}

fn print_counts(m: &Manifest) {
    let counts: Vec<String> = m
        .split_counts()
        .iter()
        .map(|(s, n)| format!("{s}={n}"))
        .collect();
    println!("{} samples: {}", m.records.len(), counts.join(" "));
}

fn dataset_split(root: &Path, ratios: &[f64], seed: u64) -> Result<()> {
    let before = Manifest::load(&root.join(MANIFEST_FILE))?;
    let after = dataset::split(&before, ratios3(ratios)?, seed)?;
    dataset::relocate(root, &before, &after)?;
    print_counts(&after);
    Ok(())
}

fn parse_ridge(s: &str) -> Result<Ridge> {
    if s == "auto" {
        return Ok(Ridge::Auto);
    }
    let alpha: f64 = s
        .parse()
        .map_err(|_| Error::invalid(format!("ridge must be 'auto' or a number, got '{s}'")))?;
    if !(alpha >= 0.0) {
        return Err(Error::invalid("ridge must be nonnegative"));
    }
    Ok(Ridge::Fixed(alpha))
}

fn read_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)?.to_rgb8())
}

fn ls_cmd(c: LsCommand) -> Result<()> {
    match c {
        LsCommand::Fit {
            dataset,
            split,
            resolution,
            ridge,
            out,
        } => {
            let split: Split = split.parse()?;
            let manifest = Manifest::load(&dataset.join(MANIFEST_FILE))?;
            let pairs = manifest
                .in_split(split)
                .map(|r| {
                    Ok((
                        read_rgb(&dataset.join(&r.radio_map_path))?,
                        read_rgb(&dataset.join(&r.floor_plan_path))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            if pairs.is_empty() {
                return Err(Error::invalid(format!("split '{split}' is empty")));
            }
            let map = LinearMap::fit(&pairs, resolution, parse_ridge(&ridge)?)?;
            map.save(&out)?;
            println!(
                "fitted on {} pairs at {r}x{r}, alpha = {:.3e}",
                pairs.len(),
                map.ridge_alpha,
                r = resolution
            );
        }
        LsCommand::Predict {
            weights,
            image,
            dataset,
            split,
            resolution,
            out,
        } => {
            let map = LinearMap::load(&weights)?;
            if let Some(path) = image {
                let input = read_rgb(&path)?;
                let side = resolution.unwrap_or(input.width());
                resize_nearest(&map.predict(&input)?.image, side).save(&out)?;
            } else if let Some(root) = dataset {
                let split: Split = split.parse()?;
                let manifest = Manifest::load(&root.join(MANIFEST_FILE))?;
                let side = resolution.unwrap_or(manifest.export_resolution);
                fs::create_dir_all(&out)?;
                let mut n = 0;
                for r in manifest.in_split(split) {
                    let input = read_rgb(&root.join(&r.radio_map_path))?;
                    let pred = resize_nearest(&map.predict(&input)?.image, side);
                    pred.save(out.join(format!("{}_pred.png", r.sample_id)))?;
                    n += 1;
                }
                println!("wrote {n} predictions to {}", out.display());
            }
        }
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let split: Split = a.split.parse()?;
    let manifest = Manifest::load(&a.dataset.join(MANIFEST_FILE))?;
    let mut scores = Vec::new();
    for r in manifest.in_split(split) {
        let score = (|| -> Result<SampleScore> {
            let truth = FloorPlanImage::new(read_rgb(&a.dataset.join(&r.floor_plan_path))?);
            let mut pred = FloorPlanImage::new(read_rgb(&a.predictions.join(format!("{}_pred.png", r.sample_id)))?);
            if a.oracle_clamp {
                pred = oracle_clamp(&pred, &truth)?;
            }
            let report = metrics::evaluate(&pred.image, &truth.image, r.room_extent, pred.oracle_assisted)?;
            Ok(SampleScore {
                sample_id: r.sample_id.clone(),
                method: a.method.clone(),
                scenario_id: r.scenario_id.clone(),
                s: r.s,
                k_a: r.k_a,
                report,
            })
        })()
        .map_err(|e| Error::Sample {
            sample_id: r.sample_id.clone(),
            source: Box::new(e),
        })?;
        scores.push(score);
    }
    if scores.is_empty() {
        return Err(Error::invalid(format!("split '{split}' is empty")));
    }
    let mut out = BufWriter::new(fs::File::create(&a.out)?);
    for s in &scores {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    print!("{}", metrics::format_summary(&metrics::summarize(&scores)));
    Ok(())
}

pub fn read_scores(paths: &[PathBuf]) -> Result<Vec<SampleScore>> {
    let mut scores = Vec::new();
    for p in paths {
        for (i, line) in BufReader::new(fs::File::open(p)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            scores.push(serde_json::from_str(&line).map_err(|e| Error::Format {
                path: p.clone(),
                reason: format!("line {}: {e}", i + 1),
            })?);
        }
    }
    Ok(scores)
}

fn report(a: ReportArgs) -> Result<()> {
    let table = metrics::format_summary(&metrics::summarize(&read_scores(&a.scores)?));
    print!("{table}");
    if let Some(out) = a.out {
        fs::write(out, &table)?;
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let bars = metrics::psnr_by_s(&read_scores(&a.scores)?);
    let csv_path = a.out.with_extension("csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::Format {
        path: csv_path.clone(),
        reason: e.to_string(),
    })?;
    for b in &bars {
        w.serialize(b).map_err(|e| Error::Format {
            path: csv_path.clone(),
            reason: e.to_string(),
        })?;
    }
    w.flush()?;
    render_bars(&bars).save(a.out.with_extension("png"))?;
    Ok(())
}

/// Grouped bars: one group per S (ascending), one bar per method (sorted),
/// heights on a fixed axis from 0 to 48.13 dB. Colours come from the viridis table.
pub fn render_bars(bars: &[metrics::PsnrBar]) -> RgbImage {
    const W: u32 = 640;
    const H: u32 = 360;
    const MARGIN: u32 = 30;
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let mut s_values: Vec<u32> = bars.iter().map(|b| b.s).collect();
    s_values.sort_unstable();
    s_values.dedup();
    let mut methods: Vec<&str> = bars.iter().map(|b| b.method.as_str()).collect();
    methods.sort_unstable();
    methods.dedup();
    let lut = Colormap::viridis();
    let plot_w = W - 2 * MARGIN;
    let plot_h = H - 2 * MARGIN;
    let mut fill = |x0: u32, y0: u32, x1: u32, y1: u32, c: [u8; 3]| {
        for y in y0.min(H)..y1.min(H) {
            for x in x0.min(W)..x1.min(W) {
                img.put_pixel(x, y, Rgb(c));
            }
        }
    };
    if !s_values.is_empty() {
        let group_w = plot_w / s_values.len() as u32;
        let bar_w = (group_w * 4 / 5 / methods.len() as u32).max(1);
        for b in bars {
            let g = s_values.iter().position(|&s| s == b.s).unwrap() as u32;
            let m = methods.iter().position(|&m| m == b.method).unwrap() as u32;
            let frac = (b.psnr_mean / metrics::PSNR_CAP_DB).clamp(0.0, 1.0);
            let height = (frac * plot_h as f64).round() as u32;
            let x0 = MARGIN + g * group_w + group_w / 10 + m * bar_w;
            let idx = if methods.len() > 1 {
                (m as usize * 200 / (methods.len() - 1)) as u8
            } else {
                100
            };
            fill(x0, H - MARGIN - height, x0 + bar_w, H - MARGIN, lut.entry(idx));
        }
    }
    fill(MARGIN - 1, MARGIN, MARGIN, H - MARGIN + 1, [0, 0, 0]);
    fill(MARGIN - 1, H - MARGIN, W - MARGIN, H - MARGIN + 1, [0, 0, 0]);
    img
}
