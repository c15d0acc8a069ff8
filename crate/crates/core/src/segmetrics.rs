//! Segmentation scoring: region similarity J (Jaccard), contour accuracy F
//! (boundary precision/recall under a pixel tolerance), their per-frame mean
//! J&F, video aggregation, and centroid agreement between two trajectory sets.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::LabelImage;
use crate::math::{ceil, sqrt};
use crate::tracklink::{min_cost_assignment, CostMatrix};
use crate::trajectory::Trajectory;

/// Boolean mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask { width, height, data: alloc::vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = BinaryMask::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.data[y * width + x] = f(x, y);
            }
        }
        m
    }

    /// Pixels carrying `label`.
    pub fn from_label(img: &LabelImage, label: u16) -> Self {
        BinaryMask { width: img.width, height: img.height, data: img.data.iter().map(|&v| v == label).collect() }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.contains(&true)
    }

    /// Foreground pixels with at least one 4-neighbour outside the mask; the
    /// image border counts as outside.
    pub fn boundary(&self) -> BinaryMask {
        let (w, h) = (self.width, self.height);
        BinaryMask::from_fn(w, h, |x, y| {
            self.get(x, y)
                && (x == 0
                    || y == 0
                    || x + 1 == w
                    || y + 1 == h
                    || !self.get(x - 1, y)
                    || !self.get(x + 1, y)
                    || !self.get(x, y - 1)
                    || !self.get(x, y + 1))
        })
    }

    fn points(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

fn check_shape(m: &BinaryMask, g: &BinaryMask) -> Result<()> {
    if (m.width, m.height) != (g.width, g.height) {
        bail!(InputMismatch, "mask sizes differ: {}x{} vs {}x{}", m.width, m.height, g.width, g.height);
    }
    Ok(())
}

/// `|M ∩ G| / |M ∪ G|`; two empty masks score 1.
pub fn jaccard(m: &BinaryMask, g: &BinaryMask) -> Result<f64> {
    check_shape(m, g)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in m.data.iter().zip(&g.data) {
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Contour precision/recall at a tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundaryMatch {
    /// Pixels (Euclidean, inclusive).
    pub tolerance: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Fraction of `from` boundary pixels within `tol` of some `to` boundary pixel.
fn matched_fraction(from: &BinaryMask, to: &BinaryMask, tol: f64) -> f64 {
    let src = from.points();
    if src.is_empty() {
        return 0.0;
    }
    let r = floor_tol(tol);
    let r2 = tol * tol;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| ((dx * dx + dy * dy) as f64) <= r2)
        .collect();
    let targets = to.points();
    let hit = |(x, y): (usize, usize)| -> bool {
        if offsets.len() <= targets.len() {
            offsets.iter().any(|&(dx, dy)| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                nx >= 0 && ny >= 0 && (nx as usize) < to.width && (ny as usize) < to.height && to.get(nx as usize, ny as usize)
            })
        } else {
            targets.iter().any(|&(tx, ty)| {
                let (dx, dy) = (tx as f64 - x as f64, ty as f64 - y as f64);
                dx * dx + dy * dy <= r2
            })
        }
    };
    src.iter().filter(|&&p| hit(p)).count() as f64 / src.len() as f64
}

fn floor_tol(tol: f64) -> isize {
    crate::math::floor(tol) as isize
}

/// Boundary F-measure `2·P·R / (P + R)`. Both boundaries empty → 1; exactly
/// one empty → 0.
pub fn boundary_f(m: &BinaryMask, g: &BinaryMask, tolerance: f64) -> Result<(f64, BoundaryMatch)> {
    check_shape(m, g)?;
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        bail!(InvalidParameter, "tolerance must be >= 0, got {tolerance}");
    }
    let (bm, bg) = (m.boundary(), g.boundary());
    let (em, eg) = (bm.is_empty(), bg.is_empty());
    if em && eg {
        return Ok((1.0, BoundaryMatch { tolerance, precision: 1.0, recall: 1.0 }));
    }
    if em || eg {
        return Ok((0.0, BoundaryMatch { tolerance, precision: 0.0, recall: 0.0 }));
    }
    let precision = matched_fraction(&bm, &bg, tolerance);
    let recall = matched_fraction(&bg, &bm, tolerance);
    let f = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok((f, BoundaryMatch { tolerance, precision, recall }))
}

/// J, F and their mean for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameScore {
    pub j: f64,
    pub f: f64,
    pub jf: f64,
}

pub fn jf_mean(j: f64, f: f64) -> f64 {
    (j + f) / 2.0
}

pub fn jf_frame(m: &BinaryMask, g: &BinaryMask, tolerance: f64) -> Result<FrameScore> {
    let j = jaccard(m, g)?;
    let (f, _) = boundary_f(m, g, tolerance)?;
    Ok(FrameScore { j, f, jf: jf_mean(j, f) })
}

/// `⌈0.008 · diagonal⌉` pixels.
pub fn default_tolerance(width: usize, height: usize) -> f64 {
    ceil(0.008 * sqrt((width * width + height * height) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameRecord {
    pub frame: usize,
    pub object_id: u16,
    pub j: f64,
    pub f: f64,
    pub jf: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObjectSummary {
    /// Ground-truth id.
    pub object_id: u16,
    /// Matched predicted id, if any.
    pub pred_id: Option<u16>,
    pub mean_j: Option<f64>,
    pub mean_f: Option<f64>,
    pub mean_jf: Option<f64>,
    pub frames_scored: usize,
    /// Frames where the object is absent from both prediction and truth.
    pub frames_absent_both: usize,
    /// Frames where exactly one side has the object (scored 0).
    pub frames_absent_one: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricReport {
    pub tolerance: f64,
    pub per_frame: Vec<FrameRecord>,
    pub per_object: Vec<ObjectSummary>,
    /// `(frame, mean J&F over the objects scored in that frame)`.
    pub frame_means: Vec<(usize, f64)>,
    /// Mean J over all scored (frame, object) records.
    pub video_mean_j: Option<f64>,
    pub video_mean_f: Option<f64>,
    /// Mean J&F over all scored (frame, object) records.
    pub video_mean_jf: Option<f64>,
    /// Mean of the per-object J&F means.
    pub mean_of_object_means: Option<f64>,
    pub frames_absent_both: usize,
    pub frames_absent_one: usize,
}

/// Pairs every ground-truth id with a predicted id by maximum IoU on the
/// first frame where the object and some prediction co-occur. Ground-truth ids
/// are processed in ascending order; ties go to the lower predicted id; each
/// predicted id is used at most once; IoU 0 never matches.
pub fn match_objects(pred: &[LabelImage], gt: &[LabelImage]) -> Vec<(u16, Option<u16>)> {
    let mut gt_ids: Vec<u16> = gt.iter().flat_map(|g| g.labels()).collect();
    gt_ids.sort_unstable();
    gt_ids.dedup();
    let mut used: Vec<u16> = Vec::new();
    let mut out = Vec::new();
    for id in gt_ids {
        let mut choice = None;
        for (p, g) in pred.iter().zip(gt) {
            if !g.contains_label(id) {
                continue;
            }
            let cands: Vec<u16> = p.labels().into_iter().filter(|l| !used.contains(l)).collect();
            if cands.is_empty() {
                continue;
            }
            let gm = BinaryMask::from_label(g, id);
            let mut best: Option<(f64, u16)> = None;
            for c in cands {
                let iou = jaccard(&BinaryMask::from_label(p, c), &gm).unwrap_or(0.0);
                if iou > 0.0 && best.map_or(true, |(b, _)| iou > b) {
                    best = Some((iou, c));
                }
            }
            choice = best.map(|(_, c)| c);
            break;
        }
        if let Some(c) = choice {
            used.push(c);
        }
        out.push((id, choice));
    }
    out
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Scores a predicted label video against ground truth. `correspondence`
/// pairs gt ids with predicted ids; `None` derives it with [`match_objects`].
///
/// Per object and frame: absent in both → excluded; absent in exactly one →
/// J = F = 0; otherwise J and F of the two binary masks.
pub fn jf_video(
    pred: &[LabelImage],
    gt: &[LabelImage],
    tolerance: f64,
    correspondence: Option<&[(u16, Option<u16>)]>,
) -> Result<MetricReport> {
    if pred.len() != gt.len() {
        bail!(InputMismatch, "prediction has {} frames, ground truth {}", pred.len(), gt.len());
    }
    for (i, (p, g)) in pred.iter().zip(gt).enumerate() {
        if (p.width, p.height) != (g.width, g.height) {
            bail!(InputMismatch, "frame {i}: {}x{} vs {}x{}", p.width, p.height, g.width, g.height);
        }
    }
    let pairs = match correspondence {
        Some(c) => c.to_vec(),
        None => match_objects(pred, gt),
    };
    let mut per_frame = Vec::new();
    let mut per_object = Vec::new();
    let (mut absent_both, mut absent_one) = (0, 0);
    for &(gid, pid) in &pairs {
        let mut summary = ObjectSummary {
            object_id: gid,
            pred_id: pid,
            mean_j: None,
            mean_f: None,
            mean_jf: None,
            frames_scored: 0,
            frames_absent_both: 0,
            frames_absent_one: 0,
        };
        let first = per_frame.len();
        for (frame, (p, g)) in pred.iter().zip(gt).enumerate() {
            let gm = BinaryMask::from_label(g, gid);
            let pm = match pid {
                Some(pid) => BinaryMask::from_label(p, pid),
                None => BinaryMask::new(g.width, g.height),
            };
            let (ge, pe) = (gm.is_empty(), pm.is_empty());
            let score = if ge && pe {
                summary.frames_absent_both += 1;
                continue;
            } else if ge || pe {
                summary.frames_absent_one += 1;
                FrameScore { j: 0.0, f: 0.0, jf: 0.0 }
            } else {
                jf_frame(&pm, &gm, tolerance)?
            };
            summary.frames_scored += 1;
            per_frame.push(FrameRecord { frame, object_id: gid, j: score.j, f: score.f, jf: score.jf });
        }
        let recs = &per_frame[first..];
        summary.mean_j = mean(recs.iter().map(|r| r.j));
        summary.mean_f = mean(recs.iter().map(|r| r.f));
        summary.mean_jf = mean(recs.iter().map(|r| r.jf));
        absent_both += summary.frames_absent_both;
        absent_one += summary.frames_absent_one;
        per_object.push(summary);
    }
    per_frame.sort_by_key(|r| (r.frame, r.object_id));
    let mut by_frame: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in &per_frame {
        let e = by_frame.entry(r.frame).or_insert((0.0, 0));
        e.0 += r.jf;
        e.1 += 1;
    }
    Ok(MetricReport {
        tolerance,
        frame_means: by_frame.into_iter().map(|(f, (s, n))| (f, s / n as f64)).collect(),
        video_mean_j: mean(per_frame.iter().map(|r| r.j)),
        video_mean_f: mean(per_frame.iter().map(|r| r.f)),
        video_mean_jf: mean(per_frame.iter().map(|r| r.jf)),
        mean_of_object_means: mean(per_object.iter().filter_map(|o| o.mean_jf)),
        per_frame,
        per_object,
        frames_absent_both: absent_both,
        frames_absent_one: absent_one,
    })
}

/// Box-plot statistics with linearly interpolated quartiles and 1.5·IQR fences.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxSummary {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    /// Most extreme values inside the fences.
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Quantile with linear interpolation between order statistics
/// (position `q·(n−1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = crate::math::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_summary(values: &[f64]) -> Option<BoxSummary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence);
    let lower_whisker = inside.clone().fold(f64::INFINITY, f64::min);
    let upper_whisker = inside.fold(f64::NEG_INFINITY, f64::max);
    let outliers = v.iter().copied().filter(|x| *x < lo_fence || *x > hi_fence).collect();
    Some(BoxSummary { n: v.len(), median, q1, q3, iqr, lower_whisker, upper_whisker, outliers })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CentroidDistance {
    pub frame: usize,
    pub ref_id: u32,
    pub pred_id: u32,
    /// nm.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CentroidAgreement {
    /// `(reference id, predicted id)`.
    pub pairs: Vec<(u32, u32)>,
    pub distances: Vec<CentroidDistance>,
    pub summary: BoxSummary,
}

/// Per-frame centroid distances between matched predicted and reference
/// trajectories (both in px), reported in nm.
///
/// Identities are matched by minimum total centroid distance on the first
/// frame both sets share.
pub fn centroid_agreement(pred: &[Trajectory], reference: &[Trajectory], pixel_size: f64) -> Result<CentroidAgreement> {
    if !(pixel_size > 0.0 && pixel_size.is_finite()) {
        bail!(InvalidParameter, "pixel_size must be > 0, got {pixel_size}");
    }
    let frames_of = |set: &[Trajectory]| -> BTreeMap<usize, ()> {
        set.iter().flat_map(|t| t.samples.iter().map(|s| (s.frame, ()))).collect()
    };
    let pf = frames_of(pred);
    let Some(first) = frames_of(reference).into_keys().find(|f| pf.contains_key(f)) else {
        bail!(InputMismatch, "prediction and reference share no frames");
    };
    let rs: Vec<(&Trajectory, (f64, f64))> =
        reference.iter().filter_map(|t| t.at_frame(first).map(|s| (t, (s.x, s.y)))).collect();
    let ps: Vec<(&Trajectory, (f64, f64))> =
        pred.iter().filter_map(|t| t.at_frame(first).map(|s| (t, (s.x, s.y)))).collect();
    let cost = CostMatrix::from_fn(rs.len(), ps.len(), |r, c| {
        let (a, b) = (rs[r].1, ps[c].1);
        sqrt((a.0 - b.0) * (a.0 - b.0) + (a.1 - b.1) * (a.1 - b.1))
    });
    let matched = min_cost_assignment(&cost);
    let mut pairs = Vec::new();
    let mut distances = Vec::new();
    for (r, c) in matched {
        let (rt, pt) = (rs[r].0, ps[c].0);
        pairs.push((rt.id, pt.id));
        for s in &rt.samples {
            if let Some(p) = pt.at_frame(s.frame) {
                let (dx, dy) = (p.x - s.x, p.y - s.y);
                distances.push(CentroidDistance {
                    frame: s.frame,
                    ref_id: rt.id,
                    pred_id: pt.id,
                    distance: sqrt(dx * dx + dy * dy) * pixel_size,
                });
            }
        }
    }
    distances.sort_by_key(|d| (d.frame, d.ref_id));
    let values: Vec<f64> = distances.iter().map(|d| d.distance).collect();
    let Some(summary) = box_summary(&values) else {
        bail!(InputMismatch, "no matched samples");
    };
    Ok(CentroidAgreement { pairs, distances, summary })
}
