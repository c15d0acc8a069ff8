//! Synthetic LPTEM frame formation.
//!
//! Particles are dark silhouettes on a bright liquid background. Contrast decays
//! with liquid thickness as `c = c0 · exp(−thickness / Λ)`; the ideal image
//! `B · (1 − c · inside)` is blurred by a Gaussian PSF, then each pixel is drawn
//! from `Poisson(I)` plus Gaussian read noise and clamped to 16 bits. The
//! ground-truth mask is the unblurred silhouette; where silhouettes overlap the
//! lower id wins.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{bail, Result};
use crate::image::{Frame, LabelImage, Shaped};
use crate::math::{ceil, floor, mean_std, sqrt};
use crate::rng::{substream, DOMAIN_IMAGING};
use crate::trajectory::Trajectory;

/// Liquid thicknesses (nm) sampled for the training-style datasets.
pub const THICKNESS_GRID_NM: [f64; 9] = [5.0, 10.0, 25.0, 50.0, 75.0, 100.0, 125.0, 150.0, 160.0];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields))]
pub enum ParticleShape {
    /// Radius in nm.
    Disc { radius: f64 },
    /// Semi-axes in nm; `a` lies along the orientation angle.
    Ellipse { a: f64, b: f64 },
}

impl ParticleShape {
    fn extent(&self) -> f64 {
        match *self {
            ParticleShape::Disc { radius } => radius,
            ParticleShape::Ellipse { a, b } => a.max(b),
        }
    }

    fn min_extent(&self) -> f64 {
        match *self {
            ParticleShape::Disc { radius } => radius,
            ParticleShape::Ellipse { a, b } => a.min(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// `(width, height)` in pixels.
    pub image_size: (usize, usize),
    /// nm per pixel.
    pub pixel_size: f64,
    /// Liquid thickness, nm.
    pub thickness: f64,
    /// e⁻/Å²·s.
    pub dose_rate: f64,
    /// Seconds per frame.
    pub exposure: f64,
    pub particle_shape: ParticleShape,
    /// Contrast at zero thickness, in (0, 1].
    pub base_contrast: f64,
    /// Contrast attenuation length Λ, nm.
    pub attenuation_length: f64,
    /// Gaussian PSF sigma, px. Zero disables blurring.
    pub psf_sigma: f64,
    /// Gaussian read noise, counts.
    pub read_noise_sigma: f64,
    /// Expected background counts per pixel. `None` derives it from dose:
    /// `dose_rate · (pixel_size in Å)² · exposure`.
    pub background_level: Option<f64>,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            image_size: (1024, 1024),
            pixel_size: 0.25,
            thickness: 50.0,
            dose_rate: 35.0,
            exposure: 0.1,
            particle_shape: ParticleShape::Disc { radius: 5.0 },
            base_contrast: 0.5,
            // exp(-155/67) ≈ 0.1: SNR at 160 nm is about a tenth of SNR at 5 nm
            attenuation_length: 67.0,
            psf_sigma: 1.0,
            read_noise_sigma: 1.0,
            background_level: None,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let (w, h) = self.image_size;
        if w == 0 || h == 0 {
            bail!(InvalidParameter, "image size must be non-zero, got {w}x{h}");
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.pixel_size) {
            bail!(InvalidParameter, "pixel_size must be > 0, got {}", self.pixel_size);
        }
        if !(self.thickness >= 0.0 && self.thickness.is_finite()) {
            bail!(InvalidParameter, "thickness must be >= 0, got {}", self.thickness);
        }
        if !(self.base_contrast > 0.0 && self.base_contrast <= 1.0) {
            bail!(InvalidParameter, "base_contrast must lie in (0, 1], got {}", self.base_contrast);
        }
        if !positive(self.attenuation_length) {
            bail!(InvalidParameter, "attenuation_length must be > 0, got {}", self.attenuation_length);
        }
        if !(self.psf_sigma >= 0.0 && self.psf_sigma.is_finite()) {
            bail!(InvalidParameter, "psf_sigma must be >= 0, got {}", self.psf_sigma);
        }
        if !(self.read_noise_sigma >= 0.0 && self.read_noise_sigma.is_finite()) {
            bail!(InvalidParameter, "read_noise_sigma must be >= 0, got {}", self.read_noise_sigma);
        }
        if !(self.dose_rate >= 0.0 && self.exposure >= 0.0) {
            bail!(InvalidParameter, "dose_rate and exposure must be >= 0");
        }
        let bg = self.expected_background();
        if !(bg >= 0.0 && bg.is_finite()) {
            bail!(InvalidParameter, "background level must be >= 0, got {bg}");
        }
        let (fw, fh) = self.fov_nm();
        let limit = fw.min(fh) / 2.0;
        let shape = self.particle_shape;
        if !(shape.min_extent() > 0.0 && shape.extent() < limit) {
            bail!(
                InvalidParameter,
                "particle dimensions must be > 0 and < {limit} nm (half the field of view)"
            );
        }
        Ok(())
    }

    /// Effective contrast `c0 · exp(−thickness / Λ)`.
    pub fn contrast(&self) -> f64 {
        self.base_contrast * libm::exp(-self.thickness / self.attenuation_length)
    }

    /// Expected background counts per pixel.
    pub fn expected_background(&self) -> f64 {
        self.background_level.unwrap_or_else(|| {
            let px_angstrom = self.pixel_size * 10.0;
            self.dose_rate * px_angstrom * px_angstrom * self.exposure
        })
    }

    /// Field of view in nm; pixel `(i, j)` is centred at `(i, j) · pixel_size`.
    pub fn fov_nm(&self) -> (f64, f64) {
        (self.image_size.0 as f64 * self.pixel_size, self.image_size.1 as f64 * self.pixel_size)
    }

    /// Largest particle half-extent in nm.
    pub fn particle_extent(&self) -> f64 {
        self.particle_shape.extent()
    }

    /// Noise-free SNR of a large particle without blur: `c·B / sqrt(B + read²)`.
    pub fn nominal_snr(&self) -> f64 {
        let b = self.expected_background();
        self.contrast() * b / sqrt(b + self.read_noise_sigma * self.read_noise_sigma)
    }

    /// FNV-1a hash over every field, used to tag outputs.
    pub fn config_hash(&self) -> u64 {
        let mut h = Fnv::new();
        h.u64(self.image_size.0 as u64);
        h.u64(self.image_size.1 as u64);
        for v in [
            self.pixel_size,
            self.thickness,
            self.dose_rate,
            self.exposure,
            self.base_contrast,
            self.attenuation_length,
            self.psf_sigma,
            self.read_noise_sigma,
        ] {
            h.u64(v.to_bits());
        }
        match self.particle_shape {
            ParticleShape::Disc { radius } => {
                h.u64(1);
                h.u64(radius.to_bits());
            }
            ParticleShape::Ellipse { a, b } => {
                h.u64(2);
                h.u64(a.to_bits());
                h.u64(b.to_bits());
            }
        }
        match self.background_level {
            None => h.u64(0),
            Some(b) => {
                h.u64(1);
                h.u64(b.to_bits());
            }
        }
        h.0
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

/// Particle placement for one frame, in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticlePosition {
    pub id: u16,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Rasterises silhouettes by testing pixel centres. Lower ids win overlaps.
pub fn render_mask(particles: &[ParticlePosition], cfg: &SceneConfig) -> LabelImage {
    let (w, h) = cfg.image_size;
    let mut mask = LabelImage::new(w, h);
    let ps = cfg.pixel_size;
    let reach = cfg.particle_extent() / ps;
    for p in particles {
        if p.id == 0 {
            continue;
        }
        let (cx, cy) = (p.x / ps, p.y / ps);
        let x0 = ceil(cx - reach).max(0.0);
        let x1 = floor(cx + reach).min(w as f64 - 1.0);
        let y0 = ceil(cy - reach).max(0.0);
        let y1 = floor(cy + reach).min(h as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        let (cos_t, sin_t) = (libm::cos(p.theta), libm::sin(p.theta));
        for j in y0 as usize..=y1 as usize {
            for i in x0 as usize..=x1 as usize {
                let dx = i as f64 - cx;
                let dy = j as f64 - cy;
                let inside = match cfg.particle_shape {
                    ParticleShape::Disc { radius } => {
                        let r = radius / ps;
                        dx * dx + dy * dy <= r * r
                    }
                    ParticleShape::Ellipse { a, b } => {
                        let u = (dx * cos_t + dy * sin_t) / (a / ps);
                        let v = (-dx * sin_t + dy * cos_t) / (b / ps);
                        u * u + v * v <= 1.0
                    }
                };
                if inside {
                    let cur = mask.get(i, j);
                    if cur == 0 || p.id < cur {
                        mask.set(i, j, p.id);
                    }
                }
            }
        }
    }
    mask
}

/// Noise-free intensity `B · (1 − c · inside)`, blurred by the PSF.
pub fn ideal_intensity(mask: &LabelImage, cfg: &SceneConfig) -> Vec<f64> {
    let b = cfg.expected_background();
    let c = cfg.contrast();
    let img: Vec<f64> = mask
        .data
        .iter()
        .map(|&l| if l != 0 { b * (1.0 - c) } else { b })
        .collect();
    if cfg.psf_sigma > 0.0 {
        gaussian_blur(&img, mask.width, mask.height, cfg.psf_sigma)
    } else {
        img
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = ceil(4.0 * sigma) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn gaussian_blur(img: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = alloc::vec![0.0; img.len()];
    for y in 0..height {
        let row = &img[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * row[clamp(x as isize + t as isize - r, width)];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = alloc::vec![0.0; img.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * tmp[clamp(y as isize + t as isize - r, height) * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Draws a noisy frame from an ideal intensity map.
pub fn sample_counts<R: Rng + ?Sized>(ideal: &[f64], width: usize, height: usize, read_noise: f64, rng: &mut R) -> Frame {
    let mut data = Vec::with_capacity(ideal.len());
    let mut cached: Option<(f64, Poisson<f64>)> = None;
    for &lambda in ideal {
        let shot = if lambda > 0.0 {
            let dist = match cached {
                Some((l, d)) if l == lambda => d,
                _ => {
                    let d = Poisson::new(lambda).expect("positive finite rate");
                    cached = Some((lambda, d));
                    d
                }
            };
            dist.sample(rng)
        } else {
            0.0
        };
        let noise = if read_noise > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            read_noise * z
        } else {
            0.0
        };
        let v = libm::round(shot + noise).clamp(0.0, u16::MAX as f64);
        data.push(v as u16);
    }
    Frame { width, height, data }
}

/// Renders one frame and its ground-truth mask.
pub fn render_frame<R: Rng + ?Sized>(
    particles: &[ParticlePosition],
    cfg: &SceneConfig,
    rng: &mut R,
) -> Result<(Frame, LabelImage)> {
    cfg.validate()?;
    for p in particles {
        if !(p.x.is_finite() && p.y.is_finite() && p.theta.is_finite()) {
            bail!(InvalidParameter, "particle {} has a non-finite position", p.id);
        }
    }
    let mask = render_mask(particles, cfg);
    let ideal = ideal_intensity(&mask, cfg);
    let frame = sample_counts(&ideal, mask.width, mask.height, cfg.read_noise_sigma, rng);
    Ok((frame, mask))
}

/// Acquisition metadata carried with a frame stack.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameMeta {
    pub pixel_size: f64,
    pub exposure: f64,
    pub frame_interval: f64,
    pub seed: u64,
    pub thickness: f64,
    pub config_hash: u64,
    pub first_frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub frames: Vec<Frame>,
    pub meta: FrameMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedVideo {
    pub stack: FrameStack,
    pub masks: Vec<LabelImage>,
    /// Continuous (pre-rasterisation) particle centres, nm.
    pub ground_truth: Vec<Trajectory>,
}

/// Common `(first, last)` frame of a trajectory set.
pub fn video_frame_range(trajs: &[Trajectory]) -> Result<(usize, usize)> {
    let Some(first) = trajs.first() else {
        bail!(InputMismatch, "no trajectories to render");
    };
    let range = |t: &Trajectory| t.first_frame().zip(t.last_frame());
    let Some(r0) = range(first) else {
        bail!(InputMismatch, "trajectory {} is empty", first.id);
    };
    for t in trajs {
        if range(t) != Some(r0) {
            bail!(
                InputMismatch,
                "trajectory {} spans {:?}, expected {:?}",
                t.id,
                range(t),
                r0
            );
        }
        if t.id == 0 || t.id > u16::MAX as u32 {
            bail!(InvalidParameter, "trajectory id {} cannot be used as a mask label", t.id);
        }
    }
    Ok(r0)
}

/// Particle positions present at `frame`.
pub fn positions_at(trajs: &[Trajectory], frame: usize) -> Vec<ParticlePosition> {
    trajs
        .iter()
        .filter_map(|t| {
            t.at_frame(frame).map(|s| ParticlePosition {
                id: t.id as u16,
                x: s.x,
                y: s.y,
                theta: s.theta.unwrap_or(0.0),
            })
        })
        .collect()
}

/// Renders `frame` of a video. Each frame draws from its own substream so
/// frames can be rendered in any order.
pub fn render_video_frame(
    trajs: &[Trajectory],
    cfg: &SceneConfig,
    seed: u64,
    frame: usize,
) -> Result<(Frame, LabelImage)> {
    let mut rng = substream(seed, DOMAIN_IMAGING, frame as u64);
    render_frame(&positions_at(trajs, frame), cfg, &mut rng)
}

pub fn frame_meta(trajs: &[Trajectory], cfg: &SceneConfig, seed: u64, first_frame: usize) -> FrameMeta {
    FrameMeta {
        pixel_size: cfg.pixel_size,
        exposure: cfg.exposure,
        frame_interval: trajs.first().map_or(1.0, |t| t.frame_interval),
        seed,
        thickness: cfg.thickness,
        config_hash: cfg.config_hash(),
        first_frame,
    }
}

/// Renders every frame sequentially.
pub fn simulate_video(trajs: &[Trajectory], cfg: &SceneConfig, seed: u64) -> Result<SimulatedVideo> {
    cfg.validate()?;
    let (first, last) = video_frame_range(trajs)?;
    let mut frames = Vec::with_capacity(last - first + 1);
    let mut masks = Vec::with_capacity(last - first + 1);
    for f in first..=last {
        let (img, mask) = render_video_frame(trajs, cfg, seed, f)?;
        frames.push(img);
        masks.push(mask);
    }
    Ok(SimulatedVideo {
        stack: FrameStack { frames, meta: frame_meta(trajs, cfg, seed, first) },
        masks,
        ground_truth: trajs.to_vec(),
    })
}

/// `|mean(background) − mean(particle)| / std(background)` with the mask
/// splitting foreground (label != 0) from background.
pub fn measure_snr(image: &Frame, mask: &LabelImage) -> Result<f64> {
    if !image.same_shape(mask) {
        bail!(InputMismatch, "image {:?} and mask {:?} differ in shape", image.shape(), mask.shape());
    }
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for (&v, &l) in image.data.iter().zip(&mask.data) {
        if l != 0 {
            fg.push(v as f64);
        } else {
            bg.push(v as f64);
        }
    }
    if fg.is_empty() {
        bail!(UndefinedSnr, "mask has no foreground pixels");
    }
    if bg.is_empty() {
        bail!(UndefinedSnr, "mask has no background pixels");
    }
    let (mb, sb) = mean_std(&bg);
    let (mf, _) = mean_std(&fg);
    if sb <= 1e-12 * mb.abs().max(1.0) {
        bail!(UndefinedSnr, "background has zero variance");
    }
    Ok(libm::fabs(mb - mf) / sb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use alloc::vec;

    fn small_cfg() -> SceneConfig {
        SceneConfig { image_size: (128, 128), ..SceneConfig::default() }
    }

    fn centre(cfg: &SceneConfig, id: u16) -> ParticlePosition {
        let (w, h) = cfg.image_size;
        ParticlePosition {
            id,
            x: (w / 2) as f64 * cfg.pixel_size,
            y: (h / 2) as f64 * cfg.pixel_size,
            theta: 0.0,
        }
    }

    #[test]
    fn contrast_at_zero_thickness() {
        let cfg = SceneConfig { thickness: 0.0, attenuation_length: 50.0, ..SceneConfig::default() };
        assert_eq!(cfg.contrast(), cfg.base_contrast);
    }

    #[test]
    fn background_from_dose() {
        let cfg = SceneConfig { dose_rate: 35.0, exposure: 0.1, pixel_size: 0.25, ..SceneConfig::default() };
        assert!((cfg.expected_background() - 35.0 * 6.25 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn disc_area_matches_pixel_centre_count() {
        let cfg = SceneConfig {
            image_size: (256, 256),
            particle_shape: ParticleShape::Disc { radius: 10.0 },
            ..SceneConfig::default()
        };
        let mask = render_mask(&[centre(&cfg, 1)], &cfg);
        // brute force over every pixel centre, radius 40 px
        let mut expected = 0;
        for j in 0..256i64 {
            for i in 0..256i64 {
                if (i - 128).pow(2) + (j - 128).pow(2) <= 1600 {
                    expected += 1;
                }
            }
        }
        assert_eq!(mask.count(1), expected);
        let area = core::f64::consts::PI * 1600.0;
        assert!((expected as f64 - area).abs() / area < 0.01);
    }

    #[test]
    fn lower_id_wins_overlap() {
        let cfg = small_cfg();
        let a = centre(&cfg, 3);
        let b = ParticlePosition { id: 2, x: a.x + 1.0, ..a };
        let mask = render_mask(&[a, b], &cfg);
        assert_eq!(mask.get(64, 64), 2);
        assert!(mask.contains_label(3));
    }

    #[test]
    fn outside_particle_absent() {
        let cfg = small_cfg();
        let p = ParticlePosition { id: 1, x: -100.0, y: -100.0, theta: 0.0 };
        let mut rng = substream(1, 2, 3);
        let (_, mask) = render_frame(&[p], &cfg, &mut rng).unwrap();
        assert!(mask.labels().is_empty());
    }

    #[test]
    fn zero_contrast_is_pure_noise() {
        let cfg = SceneConfig {
            base_contrast: f64::MIN_POSITIVE,
            psf_sigma: 0.0,
            background_level: Some(1000.0),
            read_noise_sigma: 0.0,
            particle_shape: ParticleShape::Disc { radius: 8.0 },
            ..small_cfg()
        };
        let mut rng = substream(4, 2, 0);
        let (img, mask) = render_frame(&[centre(&cfg, 1)], &cfg, &mut rng).unwrap();
        assert!(mask.count(1) > 0);
        let n_fg = mask.count(1) as f64;
        let snr = measure_snr(&img, &mask).unwrap();
        assert!(snr < 3.0 / sqrt(n_fg) * 2.0, "snr {snr}");
    }

    #[test]
    fn noiseless_snr_is_undefined() {
        let cfg = SceneConfig { psf_sigma: 0.0, background_level: Some(1000.0), ..small_cfg() };
        let mask = render_mask(&[centre(&cfg, 1)], &cfg);
        let ideal = ideal_intensity(&mask, &cfg);
        let img = Frame::from_vec(128, 128, ideal.iter().map(|v| libm::round(*v) as u16).collect()).unwrap();
        assert!(matches!(measure_snr(&img, &mask), Err(crate::Error::UndefinedSnr(_))));
    }

    #[test]
    fn empty_foreground_snr_error() {
        let img = Frame::new(4, 4);
        let mask = LabelImage::new(4, 4);
        assert!(matches!(measure_snr(&img, &mask), Err(crate::Error::UndefinedSnr(_))));
    }

    #[test]
    fn thin_liquid_beats_thick() {
        let mut snr = vec![];
        for t in [5.0, 160.0] {
            let cfg = SceneConfig { thickness: t, ..small_cfg() };
            let mut rng = substream(8, 2, 0);
            let (img, mask) = render_frame(&[centre(&cfg, 1)], &cfg, &mut rng).unwrap();
            snr.push(measure_snr(&img, &mask).unwrap());
        }
        assert!(snr[0] > snr[1]);
    }

    #[test]
    fn default_attenuation_gives_tenfold_snr_drop() {
        let thin = SceneConfig { thickness: 5.0, ..SceneConfig::default() };
        let thick = SceneConfig { thickness: 160.0, ..SceneConfig::default() };
        let ratio = thick.nominal_snr() / thin.nominal_snr();
        assert!((0.08..0.12).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn blur_preserves_constant_image() {
        let img = vec![7.0; 20 * 10];
        let out = gaussian_blur(&img, 20, 10, 1.5);
        assert!(out.iter().all(|v| (v - 7.0).abs() < 1e-12));
    }

    #[test]
    fn mismatched_ranges_rejected() {
        use crate::trajectory::Sample;
        let a = Trajectory::new(1, vec![Sample::new(0, 1.0, 1.0), Sample::new(1, 1.0, 1.0)], 1.0).unwrap();
        let b = Trajectory::new(2, vec![Sample::new(0, 1.0, 1.0)], 1.0).unwrap();
        assert!(matches!(simulate_video(&[a, b], &small_cfg(), 0), Err(crate::Error::InputMismatch(_))));
    }

    #[test]
    fn invalid_scene_rejected() {
        let cfg = SceneConfig { base_contrast: 0.0, ..small_cfg() };
        assert!(cfg.validate().is_err());
        let cfg = SceneConfig { particle_shape: ParticleShape::Disc { radius: 20.0 }, ..small_cfg() };
        assert!(cfg.validate().is_err());
    }
}
