use alloc::vec::Vec;

use crate::image::LabelImage;

/// One segmented particle in one frame. Coordinates are pixel indices
/// (column `x`, row `y`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    pub frame: usize,
    pub source_label: u32,
    pub x: f64,
    pub y: f64,
    /// Orientation of the major axis in `[−π/2, π/2)`, image coordinates.
    pub theta: f64,
    /// Pixel count.
    pub area: usize,
}

/// How mask values are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum MaskKind {
    /// Each non-zero value is a particle identity.
    #[default]
    Labels,
    /// Any non-zero value is foreground; 8-connected components become particles.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectConfig {
    pub kind: MaskKind,
    /// Components with fewer pixels are dropped.
    pub min_area: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        DetectConfig { kind: MaskKind::Labels, min_area: 4 }
    }
}

/// Exact integer accumulators for raw moments up to second order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Moments {
    pub n: u64,
    pub sx: u64,
    pub sy: u64,
    pub sxx: u64,
    pub syy: u64,
    pub sxy: u64,
}

impl Moments {
    pub fn add(&mut self, x: usize, y: usize) {
        let (x, y) = (x as u64, y as u64);
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    pub fn centroid(&self) -> (f64, f64) {
        let n = self.n as f64;
        (self.sx as f64 / n, self.sy as f64 / n)
    }

    /// Central second moments `(μ20, μ02, μ11)` normalised by area. The
    /// numerators `n·Σx² − (Σx)²` are evaluated exactly in i128.
    pub fn central(&self) -> (f64, f64, f64) {
        let n = self.n as i128;
        let (sx, sy) = (self.sx as i128, self.sy as i128);
        let n2 = (n * n) as f64;
        let mu20 = (n * self.sxx as i128 - sx * sx) as f64 / n2;
        let mu02 = (n * self.syy as i128 - sy * sy) as f64 / n2;
        let mu11 = (n * self.sxy as i128 - sx * sy) as f64 / n2;
        (mu20, mu02, mu11)
    }

    /// `½·atan2(2μ11, μ20 − μ02)` folded into `[−π/2, π/2)`.
    pub fn orientation(&self) -> f64 {
        let (mu20, mu02, mu11) = self.central();
        let t = 0.5 * libm::atan2(2.0 * mu11, mu20 - mu02);
        if t >= core::f64::consts::FRAC_PI_2 {
            t - core::f64::consts::PI
        } else {
            t
        }
    }
}

/// 8-connected component labelling of the non-zero pixels. Components are
/// numbered from 1 in raster order of their first pixel.
pub fn label_components(mask: &LabelImage) -> LabelImage {
    let (w, h) = (mask.width, mask.height);
    let mut out = LabelImage::new(w, h);
    let mut next: u32 = 0;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if mask.data[start] == 0 || out.data[start] != 0 {
            continue;
        }
        next += 1;
        // labels beyond u16 saturate; such masks are far outside this tool's range
        let label = next.min(u16::MAX as u32) as u16;
        out.data[start] = label;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = ((p % w) as isize, (p / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let q = ny as usize * w + nx as usize;
                    if mask.data[q] != 0 && out.data[q] == 0 {
                        out.data[q] = label;
                        stack.push(q);
                    }
                }
            }
        }
    }
    out
}

/// One detection per label (or per 8-connected component for binary masks),
/// ordered by label.
pub fn extract_detections(mask: &LabelImage, frame: usize, cfg: &DetectConfig) -> Vec<Detection> {
    let labelled;
    let source = match cfg.kind {
        MaskKind::Labels => mask,
        MaskKind::Binary => {
            labelled = label_components(mask);
            &labelled
        }
    };
    let max_label = source.data.iter().copied().max().unwrap_or(0);
    if max_label == 0 {
        return Vec::new();
    }
    let mut acc: Vec<Moments> = alloc::vec![Moments::default(); max_label as usize + 1];
    for y in 0..source.height {
        for x in 0..source.width {
            let l = source.get(x, y);
            if l != 0 {
                acc[l as usize].add(x, y);
            }
        }
    }
    acc.iter()
        .enumerate()
        .filter(|(_, m)| m.n > 0 && m.n as usize >= cfg.min_area.max(1))
        .map(|(label, m)| {
            let (x, y) = m.centroid();
            Detection {
                frame,
                source_label: label as u32,
                x,
                y,
                theta: m.orientation(),
                area: m.n as usize,
            }
        })
        .collect()
}
