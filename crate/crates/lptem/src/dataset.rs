//! On-disk dataset layout:
//!
//! ```text
//! out/
//!   frames/frame_00000.pgm ...   16-bit counts
//!   masks/mask_00000.pgm ...     16-bit labels, 0 = background
//!   meta.json
//!   gt_trajectories.csv          continuous centres, nm
//!   config.toml                  normalized copy of the run configuration
//! ```

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lptem_core::imaging::{render_video_frame, video_frame_range, SceneConfig};
use lptem_core::rng::{derive_seed, substream, DOMAIN_SCENARIO};
use lptem_core::trajgen::{gen_brownian, gen_fbm, DiffusionParams, FgnMethod, Start};
use lptem_core::{LabelImage, Trajectory};

use crate::config::{DiffusionSection, RunConfig, SceneSection, SimulateSection};
use crate::error::{CliError, Result};
use crate::{fsutil, pgm, trajcsv};

pub const FORMAT_VERSION: u32 = 1;
pub const RNG_DESCRIPTION: &str = "ChaCha8, seeded per stream via SplitMix64(seed ^ domain)";

/// Linear scaling for the optional 8-bit previews:
/// `v8 = round(255 · v / preview_max)`, clamped to 255.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreviewScale {
    pub preview_max: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub seed: u64,
    pub first_frame: usize,
    pub n_frames: usize,
    pub n_particles: usize,
    pub frame_interval_s: f64,
    pub pixel_size_nm: f64,
    /// Scene as rendered, including the drawn thickness.
    pub scene: SceneSection,
    pub diffusion: DiffusionSection,
    pub contrast: f64,
    pub background_counts: f64,
    pub config_hash: String,
    pub rng: String,
    pub trajectory_model: String,
    pub placement_attempts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preview_8bit: Option<PreviewScale>,
}

/// Particle trajectories and the scene they will be rendered in.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scene: SceneConfig,
    pub trajectories: Vec<Trajectory>,
    pub model: String,
    pub attempts: usize,
}

fn min_distance(trajs: &[Trajectory]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in trajs.iter().enumerate() {
        for b in &trajs[i + 1..] {
            for (sa, sb) in a.samples.iter().zip(&b.samples) {
                best = best.min(((sa.x - sb.x).powi(2) + (sa.y - sb.y).powi(2)).sqrt());
            }
        }
    }
    best
}

/// Draws the particle count, thickness and trajectories for a run.
///
/// Particle centres move inside the field of view inset by the particle
/// extent, so particles never leave the image under reflecting or periodic
/// boundaries.
pub fn build_scenario(sim: &SimulateSection) -> Result<Scenario> {
    let mut scene = sim.scene.to_scene();
    let mut rng = substream(sim.seed, DOMAIN_SCENARIO, 0);
    let [lo, hi] = sim.n_particles_range;
    let n = sim.n_particles.unwrap_or_else(|| rng.random_range(lo..=hi));
    if !sim.thickness_choices_nm.is_empty() {
        scene.thickness = sim.thickness_choices_nm[rng.random_range(0..sim.thickness_choices_nm.len())];
    }
    scene.validate()?;
    let r = scene.particle_extent();
    let (w, h) = scene.image_size;
    let dom = ((w - 1) as f64 * scene.pixel_size - 2.0 * r, (h - 1) as f64 * scene.pixel_size - 2.0 * r);
    if !(dom.0 > 0.0 && dom.1 > 0.0) {
        return Err(CliError::Usage(format!(
            "particle extent {r} nm leaves no room inside a {w}x{h} px image"
        )));
    }
    let d = &sim.diffusion;
    let params = DiffusionParams {
        diffusion_coefficient: d.diffusion_coefficient_nm2_s,
        hurst: d.hurst,
        frame_interval: d.frame_interval_s,
        n_frames: d.n_frames,
        fov: dom,
        boundary: d.boundary,
        start: match d.start {
            Start::At { x, y } => Start::At { x: x - r, y: y - r },
            s => s,
        },
    };
    params.validate().map_err(|e| CliError::Usage(format!("simulate.diffusion: {e}")))?;
    let brownian = (d.hurst - 0.5).abs() < 1e-12;
    for attempt in 0..sim.max_attempts {
        let base = derive_seed(sim.seed, attempt as u64);
        let mut trajs = Vec::with_capacity(n);
        let mut method = None;
        for i in 0..n {
            let seed = derive_seed(base, i as u64);
            let mut t = if brownian {
                gen_brownian(&params, seed)?
            } else {
                let (t, m) = gen_fbm(&params, seed)?;
                method = Some(if method == Some(FgnMethod::Cholesky) { FgnMethod::Cholesky } else { m });
                t
            };
            t = t.translated(r, r);
            t.id = i as u32 + 1;
            trajs.push(t);
        }
        if sim.min_separation_nm <= 0.0 || min_distance(&trajs) >= sim.min_separation_nm {
            let model = match method {
                None => "brownian".to_string(),
                Some(FgnMethod::DaviesHarte) => "fbm/davies_harte".to_string(),
                Some(FgnMethod::Cholesky) => "fbm/cholesky".to_string(),
            };
            return Ok(Scenario { scene, trajectories: trajs, model, attempts: attempt + 1 });
        }
    }
    Err(CliError::Usage(format!(
        "no trajectory set kept {} nm separation within {} attempts",
        sim.min_separation_nm, sim.max_attempts
    )))
}

pub fn frame_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("frames").join(format!("frame_{index:05}.pgm"))
}

pub fn mask_path(dir: &Path, index: usize) -> PathBuf {
    dir.join("masks").join(format!("mask_{index:05}.pgm"))
}

/// Renders and writes a full dataset. Frames are rendered in parallel; each
/// frame uses its own random substream, so output does not depend on the
/// number of threads.
pub fn write_dataset(out: &Path, cfg: &RunConfig, preview_8bit: bool) -> Result<DatasetMeta> {
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Usage("configuration has no [simulate] section".into()))?;
    let sc = build_scenario(sim)?;
    let (first, last) = video_frame_range(&sc.trajectories)?;
    for sub in ["frames", "masks"] {
        fsutil::create_dir_all(&out.join(sub))?;
    }
    let preview = preview_8bit.then(|| PreviewScale {
        preview_max: (2.0 * sc.scene.expected_background()).ceil().clamp(1.0, 65535.0) as u16,
    });
    if preview.is_some() {
        fsutil::create_dir_all(&out.join("preview"))?;
    }
    (first..=last).into_par_iter().try_for_each(|f| -> Result<()> {
        let (img, mask) = render_video_frame(&sc.trajectories, &sc.scene, sim.seed, f)?;
        let idx = f - first;
        pgm::write_frame(&frame_path(out, idx), &img)?;
        pgm::write_mask(&mask_path(out, idx), &mask)?;
        if let Some(p) = preview {
            let bytes = pgm::encode_8bit(img.width, img.height, &pgm::scale_to_8bit(&img.data, 0, p.preview_max));
            fsutil::write_atomic(&out.join("preview").join(format!("frame_{idx:05}.pgm")), &bytes)?;
        }
        Ok(())
    })?;
    trajcsv::write_ground_truth(&out.join("gt_trajectories.csv"), &sc.trajectories)?;
    let meta = DatasetMeta {
        format_version: FORMAT_VERSION,
        seed: sim.seed,
        first_frame: first,
        n_frames: last - first + 1,
        n_particles: sc.trajectories.len(),
        frame_interval_s: sim.diffusion.frame_interval_s,
        pixel_size_nm: sc.scene.pixel_size,
        scene: SceneSection::from_scene(&sc.scene),
        diffusion: sim.diffusion.clone(),
        contrast: sc.scene.contrast(),
        background_counts: sc.scene.expected_background(),
        config_hash: format!("{:016x}", sc.scene.config_hash()),
        rng: RNG_DESCRIPTION.to_string(),
        trajectory_model: sc.model,
        placement_attempts: sc.attempts,
        preview_8bit: preview,
    };
    write_meta(out, &meta)?;
    fsutil::write_atomic(&out.join("config.toml"), cfg.to_toml().as_bytes())?;
    Ok(meta)
}

pub fn write_meta(dir: &Path, meta: &DatasetMeta) -> Result<()> {
    let mut text = serde_json::to_string_pretty(meta).expect("meta serializes");
    text.push('\n');
    fsutil::write_atomic(&dir.join("meta.json"), text.as_bytes())
}

pub fn read_meta(dir: &Path) -> Result<DatasetMeta> {
    let path = dir.join("meta.json");
    let text = fsutil::read_to_string(&path)?;
    serde_json::from_str(&text).map_err(|e| CliError::data(&path, e.to_string()))
}

/// `meta.json` next to a mask directory or in its parent, if present.
pub fn find_meta(mask_dir: &Path) -> Option<DatasetMeta> {
    [Some(mask_dir), mask_dir.parent()]
        .into_iter()
        .flatten()
        .find(|d| d.join("meta.json").is_file())
        .and_then(|d| read_meta(d).ok())
}

/// Accepts either a dataset directory (uses its `masks/`) or a directory of
/// mask files.
pub fn resolve_mask_dir(dir: &Path) -> PathBuf {
    let inner = dir.join("masks");
    if inner.is_dir() {
        inner
    } else {
        dir.to_path_buf()
    }
}

/// Files named `{prefix}_NNNNN.pgm` in `dir`, ordered by index. The indices
/// must be contiguous; a hole is reported as the missing file.
pub fn list_sequence(dir: &Path, prefix: &str) -> Result<Vec<(usize, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(rest) = name.strip_prefix(prefix).and_then(|r| r.strip_prefix('_')) else { continue };
        let Some(digits) = rest.strip_suffix(".pgm") else { continue };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        let idx: usize = digits.parse().map_err(|_| CliError::data(entry.path(), "index out of range"))?;
        found.push((idx, entry.path()));
    }
    if found.is_empty() {
        return Err(CliError::data(dir, format!("no {prefix}_NNNNN.pgm files")));
    }
    found.sort();
    let first = found[0].0;
    for (k, (idx, path)) in found.iter().enumerate() {
        if *idx != first + k {
            if *idx == first + k - 1 {
                return Err(CliError::data(path, "duplicate frame index"));
            }
            let missing = dir.join(format!("{prefix}_{:05}.pgm", first + k));
            return Err(CliError::data(missing, "missing frame in sequence"));
        }
    }
    Ok(found)
}

/// Reads a label-mask sequence in parallel, keeping frame order.
pub fn read_masks(dir: &Path) -> Result<Vec<(usize, LabelImage)>> {
    let files = list_sequence(dir, "mask")?;
    files.par_iter().map(|(i, p)| pgm::read_mask(p).map(|m| (*i, m))).collect()
}

/// Checks that a dataset directory has matching frame and mask sequences
/// and a versioned `meta.json`.
pub fn check_layout(dir: &Path) -> Result<DatasetMeta> {
    let meta = read_meta(dir)?;
    let frames = list_sequence(&dir.join("frames"), "frame")?;
    let masks = list_sequence(&dir.join("masks"), "mask")?;
    if frames.len() != masks.len() || frames.len() != meta.n_frames {
        return Err(CliError::data(
            dir,
            format!("{} frames, {} masks, meta.json says {}", frames.len(), masks.len(), meta.n_frames),
        ));
    }
    Ok(meta)
}
