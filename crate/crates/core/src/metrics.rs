//! Reconstruction quality: PSNR, SSIM, and scatterer centroid distances.

use std::collections::{BTreeMap, VecDeque};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// MSE floor in gray levels²; caps PSNR at `10·log₁₀(255²) ≈ 48.13 dB`.
pub const MSE_FLOOR: f64 = 1.0;
/// PSNR of a perfect reconstruction.
pub const PSNR_CAP_DB: f64 = 48.130_803_608_679_1;

/// SSIM window side.
pub const SSIM_WINDOW: u32 = 8;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Luminance threshold below which a pixel belongs to an object.
pub const OBJECT_THRESHOLD: u8 = 128;
/// Components smaller than this many pixels are discarded as noise.
pub const MIN_COMPONENT_PIXELS: usize = 4;

fn same_dims(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::shape(format!("{:?} vs {:?}", a.dimensions(), b.dimensions())));
    }
    Ok(())
}

/// `10·log₁₀(255² / max(MSE, 1))` over all pixels and channels.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    same_dims(a, b)?;
    let n = a.as_raw().len();
    if n == 0 {
        return Err(Error::shape("empty images"));
    }
    let sse: u64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    let mse = sse as f64 / n as f64;
    Ok(10.0 * (255.0 * 255.0 / mse.max(MSE_FLOOR)).log10())
}

/// Integer luminance ×3 (sum of the channels), kept exact.
fn luma3(img: &RgbImage) -> Vec<i64> {
    img.pixels().map(|p| p.0.iter().map(|&c| c as i64).sum()).collect()
}

/// Summed-area table with a zero border: `(w + 1) × (h + 1)`.
fn integral(values: impl Iterator<Item = i64>, w: usize, h: usize) -> Vec<i64> {
    let mut table = vec![0i64; (w + 1) * (h + 1)];
    let vals: Vec<i64> = values.collect();
    for y in 0..h {
        let mut row = 0i64;
        for x in 0..w {
            row += vals[y * w + x];
            table[(y + 1) * (w + 1) + x + 1] = table[y * (w + 1) + x + 1] + row;
        }
    }
    table
}

fn window_sum(table: &[i64], w: usize, x: usize, y: usize, k: usize) -> i64 {
    let s = w + 1;
    table[(y + k) * s + x + k] - table[y * s + x + k] - table[(y + k) * s + x] + table[y * s + x]
}

/// Mean SSIM over all `8×8` windows (stride 1) of the luminance channel
/// (mean of R, G, B), with `C₁ = (0.01·255)²`, `C₂ = (0.03·255)²` and
/// population statistics.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    same_dims(a, b)?;
    let (w, h) = a.dimensions();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall {
            side: w.min(h),
            window: SSIM_WINDOW,
        });
    }
    let (w, h, k) = (w as usize, h as usize, SSIM_WINDOW as usize);
    let la = luma3(a);
    let lb = luma3(b);
    let sa = integral(la.iter().copied(), w, h);
    let sb = integral(lb.iter().copied(), w, h);
    let saa = integral(la.iter().map(|v| v * v), w, h);
    let sbb = integral(lb.iter().map(|v| v * v), w, h);
    let sab = integral(la.iter().zip(&lb).map(|(x, y)| x * y), w, h);

    // luminance was summed over 3 channels; divide by 3 and by the window area
    let n = (k * k) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for y in 0..=h - k {
        for x in 0..=w - k {
            let mu_a = window_sum(&sa, w, x, y, k) as f64 / (3.0 * n);
            let mu_b = window_sum(&sb, w, x, y, k) as f64 / (3.0 * n);
            let e_aa = window_sum(&saa, w, x, y, k) as f64 / (9.0 * n);
            let e_bb = window_sum(&sbb, w, x, y, k) as f64 / (9.0 * n);
            let e_ab = window_sum(&sab, w, x, y, k) as f64 / (9.0 * n);
            let var_a = e_aa - mu_a * mu_a;
            let var_b = e_bb - mu_b * mu_b;
            let cov = e_ab - mu_a * mu_b;
            let num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2);
            let den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CentroidSource {
    GroundTruth,
    Extracted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    /// Centroids in metres.
    pub points: Vec<[f64; 2]>,
    pub source: CentroidSource,
}

/// Centroids of dark connected regions.
///
/// Pixels with luminance below 128 are objects; regions are 4-connected and
/// must have at least 4 pixels. Each centroid is the mean of its pixel centres
/// mapped to metres with pitch `room_extent / resolution`.
pub fn extract_centroids(image: &RgbImage, room_extent: [f64; 2]) -> CentroidSet {
    let (w, h) = image.dimensions();
    let (w, h) = (w as usize, h as usize);
    let dark: Vec<bool> = image
        .pixels()
        .map(|p| {
            let sum: u32 = p.0.iter().map(|&c| c as u32).sum();
            // mean < 128  ⇔  sum < 384
            sum < 3 * OBJECT_THRESHOLD as u32
        })
        .collect();
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    let mut points = Vec::new();
    let (px, py) = (room_extent[0] / w as f64, room_extent[1] / h as f64);
    for start in 0..w * h {
        if !dark[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut n, mut sx, mut sy) = (0usize, 0.0, 0.0);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            n += 1;
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
            let mut visit = |j: usize| {
                if dark[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        if n >= MIN_COMPONENT_PIXELS {
            points.push([sx / n as f64 * px, sy / n as f64 * py]);
        }
    }
    CentroidSet {
        points,
        source: CentroidSource::Extracted,
    }
}

/// Distances between matched centroid pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidErrors {
    /// Per matched pair, in centimetres, ordered by predicted-point index.
    pub distances_cm: Vec<f64>,
    /// Matching as `(predicted index, truth index)`.
    pub pairs: Vec<(usize, usize)>,
    pub mean_cm: f64,
    pub std_cm: f64,
    /// Points left without a partner on either side.
    pub unmatched: usize,
}

/// Minimum-total-distance one-to-one matching of `min(|P|, |T|)` pairs.
pub fn centroid_error(predicted: &CentroidSet, truth: &CentroidSet) -> CentroidErrors {
    let p = &predicted.points;
    let t = &truth.points;
    let dist = |i: usize, j: usize| ((p[i][0] - t[j][0]).powi(2) + (p[i][1] - t[j][1]).powi(2)).sqrt();
    let pairs: Vec<(usize, usize)> = if p.len() <= t.len() {
        let cost: Vec<Vec<f64>> = (0..p.len()).map(|i| (0..t.len()).map(|j| dist(i, j)).collect()).collect();
        hungarian(&cost).into_iter().enumerate().collect()
    } else {
        let cost: Vec<Vec<f64>> = (0..t.len()).map(|j| (0..p.len()).map(|i| dist(i, j)).collect()).collect();
        let mut pairs: Vec<(usize, usize)> = hungarian(&cost).into_iter().enumerate().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        pairs
    };
    let distances_cm: Vec<f64> = pairs.iter().map(|&(i, j)| 100.0 * dist(i, j)).collect();
    let (mean_cm, std_cm) = mean_std(&distances_cm);
    CentroidErrors {
        distances_cm,
        pairs,
        mean_cm,
        std_cm,
        unmatched: p.len().max(t.len()) - p.len().min(t.len()),
    }
}

/// Population mean and standard deviation; zeros for an empty slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Rectangular assignment (rows ≤ columns) minimising total cost.
/// Returns the column chosen for every row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    debug_assert!(n <= m);
    // potentials and matching, 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut col_owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if col_owner[j] != 0 {
            assignment[col_owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Per-sample scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub psnr: f64,
    pub ssim: f64,
    pub centroid_errors: Vec<f64>,
    pub mean_error: f64,
    pub std_error: f64,
    pub unmatched_count: usize,
    pub oracle_assisted: bool,
}

/// Score a reconstruction against its ground truth. Centroids are extracted
/// from both images so that truth and prediction share the same convention.
pub fn evaluate(prediction: &RgbImage, truth: &RgbImage, room_extent: [f64; 2], oracle_assisted: bool) -> Result<EvaluationReport> {
    let psnr = psnr(prediction, truth)?;
    let ssim = ssim(prediction, truth)?;
    let mut truth_set = extract_centroids(truth, room_extent);
    truth_set.source = CentroidSource::GroundTruth;
    let errors = centroid_error(&extract_centroids(prediction, room_extent), &truth_set);
    Ok(EvaluationReport {
        psnr,
        ssim,
        centroid_errors: errors.distances_cm,
        mean_error: errors.mean_cm,
        std_error: errors.std_cm,
        unmatched_count: errors.unmatched,
        oracle_assisted,
    })
}

/// Pearson correlation of two equally long sequences; 0 if either is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape(format!("lengths {} and {}", a.len(), b.len())));
    }
    let (ma, _) = mean_std(a);
    let (mb, _) = mean_std(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// One line of a per-sample score file (JSON lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample_id: String,
    pub method: String,
    pub scenario_id: String,
    pub s: u32,
    pub k_a: usize,
    #[serde(flatten)]
    pub report: EvaluationReport,
}

/// Aggregate scores of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub samples: usize,
    /// `(mean, std)` in dB.
    pub psnr: (f64, f64),
    pub ssim: (f64, f64),
    /// Pooled centroid distances per `K_a`, `(mean, std)` in cm.
    pub error_by_k_a: BTreeMap<usize, (f64, f64)>,
    /// Pooled over all samples, `(mean, std)` in cm.
    pub average_error: (f64, f64),
    pub oracle_assisted: bool,
}

/// Group scores by method (sorted by name).
pub fn summarize(scores: &[SampleScore]) -> Vec<SummaryRow> {
    let mut by_method: BTreeMap<&str, Vec<&SampleScore>> = BTreeMap::new();
    for s in scores {
        by_method.entry(&s.method).or_default().push(s);
    }
    by_method
        .into_iter()
        .map(|(method, group)| {
            let psnr: Vec<f64> = group.iter().map(|s| s.report.psnr).collect();
            let ssim: Vec<f64> = group.iter().map(|s| s.report.ssim).collect();
            let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            let mut all = Vec::new();
            for s in &group {
                by_k.entry(s.k_a)
                    .or_default()
                    .extend_from_slice(&s.report.centroid_errors);
                all.extend_from_slice(&s.report.centroid_errors);
            }
            SummaryRow {
                method: method.to_string(),
                samples: group.len(),
                psnr: mean_std(&psnr),
                ssim: mean_std(&ssim),
                error_by_k_a: by_k.into_iter().map(|(k, v)| (k, mean_std(&v))).collect(),
                average_error: mean_std(&all),
                oracle_assisted: group.iter().any(|s| s.report.oracle_assisted),
            }
        })
        .collect()
}

/// Plain-text table: method, PSNR ± std, SSIM ± std, centroid error per
/// `K_a`, and the average error. Oracle-assisted rows are starred.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let ks: Vec<usize> = {
        let mut ks: Vec<usize> = rows.iter().flat_map(|r| r.error_by_k_a.keys().copied()).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    };
    let mut header = vec!["method".to_string(), "n".into(), "PSNR [dB]".into(), "SSIM".into()];
    header.extend(ks.iter().map(|k| format!("err K_a={k} [cm]")));
    header.push("err avg [cm]".into());
    let mut lines = vec![header];
    for r in rows {
        let pm = |(m, s): (f64, f64), p: usize| format!("{m:.p$} ± {s:.p$}");
        let name = if r.oracle_assisted { format!("{}*", r.method) } else { r.method.clone() };
        let mut line = vec![name, r.samples.to_string(), pm(r.psnr, 2), pm(r.ssim, 3)];
        for k in &ks {
            line.push(r.error_by_k_a.get(k).map_or_else(|| "-".into(), |&v| pm(v, 2)));
        }
        line.push(pm(r.average_error, 2));
        lines.push(line);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("-|-"));
            out.push('\n');
        }
    }
    if rows.iter().any(|r| r.oracle_assisted) {
        out.push_str("* oracle-assisted: prediction clamped with the ground truth\n");
    }
    out
}

/// Mean PSNR per `(method, S)` for bar charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsnrBar {
    pub method: String,
    pub s: u32,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub count: usize,
}

pub fn psnr_by_s(scores: &[SampleScore]) -> Vec<PsnrBar> {
    let mut groups: BTreeMap<(&str, u32), Vec<f64>> = BTreeMap::new();
    for s in scores {
        groups.entry((&s.method, s.s)).or_default().push(s.report.psnr);
    }
    groups
        .into_iter()
        .map(|((method, s), v)| {
            let (psnr_mean, psnr_std) = mean_std(&v);
            PsnrBar {
                method: method.to_string(),
                s,
                psnr_mean,
                psnr_std,
                count: v.len(),
            }
        })
        .collect()
}
