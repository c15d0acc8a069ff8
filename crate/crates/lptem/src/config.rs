//! Declarative run configuration (TOML).
//!
//! Every field has a default, unknown keys are rejected, and
//! [`RunConfig::to_toml`] writes the normalized form with all fields filled in.

use std::path::Path;

use serde::{Deserialize, Serialize};

use lptem_core::imaging::{ParticleShape, SceneConfig, THICKNESS_GRID_NM};
use lptem_core::tracklink::{DetectConfig, LinkConfig, MaskKind};
use lptem_core::trajgen::{BoundaryMode, DiffusionParams, Start};
use lptem_core::trajstats::DisplacementAxis;

use crate::error::{CliError, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub track: TrackSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub seed: u64,
    /// Fixed particle count; drawn uniformly from `n_particles_range` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_particles: Option<usize>,
    #[serde(default = "default_particle_range")]
    pub n_particles_range: [usize; 2],
    /// Liquid thickness is drawn uniformly from this list when non-empty;
    /// otherwise `scene.thickness_nm` is used.
    #[serde(default)]
    pub thickness_choices_nm: Vec<f64>,
    /// Minimum centre-to-centre distance over the whole video. Trajectory sets
    /// violating it are redrawn, up to `max_attempts` times.
    #[serde(default)]
    pub min_separation_nm: f64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
    #[serde(default)]
    pub diffusion: DiffusionSection,
    #[serde(default)]
    pub scene: SceneSection,
}

fn default_particle_range() -> [usize; 2] {
    [1, 8]
}

fn default_max_attempts() -> usize {
    1000
}

impl SimulateSection {
    pub fn new(seed: u64) -> Self {
        SimulateSection {
            seed,
            n_particles: None,
            n_particles_range: default_particle_range(),
            thickness_choices_nm: Vec::new(),
            min_separation_nm: 0.0,
            max_attempts: default_max_attempts(),
            diffusion: DiffusionSection::default(),
            scene: SceneSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionSection {
    pub diffusion_coefficient_nm2_s: f64,
    pub hurst: f64,
    pub frame_interval_s: f64,
    pub n_frames: usize,
    pub boundary: BoundaryMode,
    /// Start position in image coordinates (nm).
    pub start: Start,
}

impl Default for DiffusionSection {
    fn default() -> Self {
        let d = DiffusionParams::default();
        DiffusionSection {
            diffusion_coefficient_nm2_s: d.diffusion_coefficient,
            hurst: d.hurst,
            frame_interval_s: d.frame_interval,
            n_frames: d.n_frames,
            boundary: d.boundary,
            start: d.start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub width_px: usize,
    pub height_px: usize,
    pub pixel_size_nm: f64,
    pub thickness_nm: f64,
    pub dose_rate_e_per_a2_s: f64,
    pub exposure_s: f64,
    pub particle: ParticleShape,
    pub base_contrast: f64,
    pub attenuation_length_nm: f64,
    pub psf_sigma_px: f64,
    pub read_noise_counts: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background_counts: Option<f64>,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self::from_scene(&SceneConfig::default())
    }
}

impl SceneSection {
    pub fn from_scene(s: &SceneConfig) -> Self {
        SceneSection {
            width_px: s.image_size.0,
            height_px: s.image_size.1,
            pixel_size_nm: s.pixel_size,
            thickness_nm: s.thickness,
            dose_rate_e_per_a2_s: s.dose_rate,
            exposure_s: s.exposure,
            particle: s.particle_shape,
            base_contrast: s.base_contrast,
            attenuation_length_nm: s.attenuation_length,
            psf_sigma_px: s.psf_sigma,
            read_noise_counts: s.read_noise_sigma,
            background_counts: s.background_level,
        }
    }

    pub fn to_scene(&self) -> SceneConfig {
        SceneConfig {
            image_size: (self.width_px, self.height_px),
            pixel_size: self.pixel_size_nm,
            thickness: self.thickness_nm,
            dose_rate: self.dose_rate_e_per_a2_s,
            exposure: self.exposure_s,
            particle_shape: self.particle,
            base_contrast: self.base_contrast,
            attenuation_length: self.attenuation_length_nm,
            psf_sigma: self.psf_sigma_px,
            read_noise_sigma: self.read_noise_counts,
            background_level: self.background_counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackSection {
    pub gate_px: f64,
    pub max_missed: usize,
    pub min_area_px: usize,
    pub mask_kind: MaskKind,
}

impl Default for TrackSection {
    fn default() -> Self {
        let l = LinkConfig::default();
        let d = DetectConfig::default();
        TrackSection { gate_px: l.gate, max_missed: l.max_missed, min_area_px: d.min_area, mask_kind: d.kind }
    }
}

impl TrackSection {
    pub fn link_config(&self) -> LinkConfig {
        LinkConfig { gate: self.gate_px, max_missed: self.max_missed, ..LinkConfig::default() }
    }

    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig { kind: self.mask_kind, min_area: self.min_area_px }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsSection {
    pub max_lag_fraction: f64,
    pub hist_lag_frames: usize,
    pub n_bins: usize,
    pub fit_lags: usize,
    pub axis: DisplacementAxis,
}

impl Default for StatsSection {
    fn default() -> Self {
        StatsSection {
            max_lag_fraction: lptem_core::trajstats::DEFAULT_MAX_LAG_FRACTION,
            hist_lag_frames: 1,
            n_bins: 40,
            fit_lags: lptem_core::trajstats::DEFAULT_FIT_LAGS,
            axis: DisplacementAxis::BothAxesPooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Boundary tolerance in px; `⌈0.008 · diagonal⌉` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance_px: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.validate().map_err(|m| CliError::Config { path: path.to_path_buf(), message: m })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fsutil::read_to_string(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if let Some(s) = &self.simulate {
            let [lo, hi] = s.n_particles_range;
            if lo == 0 || lo > hi {
                return Err(format!("simulate.n_particles_range [{lo}, {hi}] must satisfy 1 <= lo <= hi"));
            }
            if let Some(n) = s.n_particles {
                if n < lo || n > hi {
                    return Err(format!("simulate.n_particles = {n} lies outside n_particles_range [{lo}, {hi}]"));
                }
                if n > u16::MAX as usize {
                    return Err(format!("simulate.n_particles = {n} exceeds the mask label range"));
                }
            }
            if s.thickness_choices_nm.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return Err("simulate.thickness_choices_nm must be finite and >= 0".into());
            }
            if !(s.min_separation_nm >= 0.0 && s.min_separation_nm.is_finite()) {
                return Err("simulate.min_separation_nm must be finite and >= 0".into());
            }
            if s.max_attempts == 0 {
                return Err("simulate.max_attempts must be >= 1".into());
            }
            s.scene.to_scene().validate().map_err(|e| format!("simulate.scene: {e}"))?;
        }
        if !(self.track.gate_px > 0.0) {
            return Err("track.gate_px must be > 0".into());
        }
        let st = &self.stats;
        if !(st.max_lag_fraction > 0.0 && st.max_lag_fraction <= 1.0) {
            return Err("stats.max_lag_fraction must lie in (0, 1]".into());
        }
        if st.n_bins == 0 || st.fit_lags == 0 || st.hist_lag_frames == 0 {
            return Err("stats.n_bins, stats.fit_lags and stats.hist_lag_frames must be >= 1".into());
        }
        if let Some(t) = self.eval.tolerance_px {
            if !(t >= 0.0 && t.is_finite()) {
                return Err("eval.tolerance_px must be finite and >= 0".into());
            }
        }
        Ok(())
    }
}

pub const PRESETS: &[(&str, &str)] = &[
    ("training", "50 frames at 1024², 1 to 8 particles, thickness drawn from the grid"),
    ("test-video-1", "1024², 300 frames, 3 particles, occasional overlaps"),
    ("test-video-1-2p", "1024², 300 frames, 2 particles, minimal interaction"),
    ("test-video-2", "512², 275 frames, 1 particle"),
    ("test-video-3", "1024², 600 frames, 5 particles, minimal interaction"),
    ("test-video-3-4p", "1024², 600 frames, 4 particles, minimal interaction"),
    ("roundtrip", "512², 1000 frames, 1 particle, D = 0.5 nm²/s"),
];

fn preset_with(seed: u64, size: usize, frames: usize, n: usize, min_sep: f64) -> SimulateSection {
    let mut s = SimulateSection::new(seed);
    s.n_particles = Some(n);
    s.diffusion.n_frames = frames;
    s.scene.width_px = size;
    s.scene.height_px = size;
    s.min_separation_nm = min_sep;
    s
}

/// Named configuration, or `None` for an unknown name.
pub fn preset(name: &str) -> Option<RunConfig> {
    let sim = match name {
        "training" => {
            let mut s = SimulateSection::new(1);
            s.thickness_choices_nm = THICKNESS_GRID_NM.to_vec();
            s
        }
        "test-video-1" => preset_with(101, 1024, 300, 3, 0.0),
        "test-video-1-2p" => preset_with(102, 1024, 300, 2, 15.0),
        "test-video-2" => preset_with(201, 512, 275, 1, 0.0),
        "test-video-3" => preset_with(301, 1024, 600, 5, 15.0),
        "test-video-3-4p" => preset_with(302, 1024, 600, 4, 15.0),
        "roundtrip" => {
            let mut s = preset_with(401, 512, 1000, 1, 0.0);
            s.diffusion.diffusion_coefficient_nm2_s = 0.5;
            s.diffusion.start = Start::At { x: 64.0, y: 64.0 };
            s
        }
        _ => return None,
    };
    Some(RunConfig { simulate: Some(sim), ..RunConfig::default() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for (name, _) in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            let text = cfg.to_toml();
            let back = RunConfig::from_toml(&text, Path::new(name)).unwrap();
            assert_eq!(back, cfg, "{name}");
            assert_eq!(back.to_toml(), text);
        }
    }

    #[test]
    fn boundary_default_is_reflect() {
        let cfg = RunConfig::from_toml("[simulate]\nseed = 3\n", Path::new("x")).unwrap();
        assert_eq!(cfg.simulate.unwrap().diffusion.boundary, BoundaryMode::Reflect);
    }
}
