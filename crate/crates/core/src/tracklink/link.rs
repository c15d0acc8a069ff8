use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::assign::{min_cost_assignment, CostMatrix};
use super::detect::Detection;
use crate::math::sqrt;
use crate::trajectory::{Sample, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CostKind {
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    /// Largest frame-to-frame displacement (px) that may be linked.
    pub gate: f64,
    /// Frames a track may go unmatched before it is closed.
    pub max_missed: usize,
    pub cost: CostKind,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig { gate: 20.0, max_missed: 2, cost: CostKind::Euclidean }
    }
}

/// A linked track: its detections in frame order.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u32,
    pub detections: Vec<Detection>,
}

impl Track {
    /// Frames skipped inside the track, as `(after_frame, missing_count)`.
    pub fn gaps(&self) -> Vec<(usize, usize)> {
        self.detections
            .windows(2)
            .filter(|w| w[1].frame > w[0].frame + 1)
            .map(|w| (w[0].frame, w[1].frame - w[0].frame - 1))
            .collect()
    }

    /// Converts to a trajectory, scaling px to physical units when
    /// `pixel_size` is given.
    pub fn to_trajectory(&self, pixel_size: Option<f64>, frame_interval: f64) -> Trajectory {
        let s = pixel_size.unwrap_or(1.0);
        let samples = self
            .detections
            .iter()
            .map(|d| Sample { frame: d.frame, x: d.x * s, y: d.y * s, theta: Some(d.theta) })
            .collect();
        Trajectory { id: self.id, samples, frame_interval }
    }
}

struct Active {
    track: usize,
    x: f64,
    y: f64,
    last_frame: usize,
}

/// Links per-frame detections into tracks.
///
/// At each frame the active tracks and the new detections are matched by a
/// global min-cost assignment on Euclidean distance, with pairs beyond the
/// gate forbidden. A track keeps its last observed position while unmatched
/// (no motion extrapolation) and is closed once it has been unmatched for
/// more than `max_missed` frames. Unmatched detections open new tracks; ids
/// are assigned from 1 in creation order.
pub fn link(detections_by_frame: &[Vec<Detection>], cfg: &LinkConfig) -> Vec<Track> {
    let mut tracks: Vec<Track> = Vec::new();
    let mut active: Vec<Active> = Vec::new();
    for dets in detections_by_frame {
        let Some(frame) = dets.first().map(|d| d.frame) else {
            continue;
        };
        active.retain(|a| frame.saturating_sub(a.last_frame + 1) <= cfg.max_missed);
        let cost = CostMatrix::from_fn(active.len(), dets.len(), |r, c| {
            let (dx, dy) = (active[r].x - dets[c].x, active[r].y - dets[c].y);
            let d = sqrt(dx * dx + dy * dy);
            if d <= cfg.gate {
                d
            } else {
                f64::INFINITY
            }
        });
        let pairs = min_cost_assignment(&cost);
        let mut taken = alloc::vec![false; dets.len()];
        for (r, c) in pairs {
            let d = dets[c];
            taken[c] = true;
            let a = &mut active[r];
            a.x = d.x;
            a.y = d.y;
            a.last_frame = d.frame;
            tracks[a.track].detections.push(d);
        }
        for (c, d) in dets.iter().enumerate() {
            if taken[c] {
                continue;
            }
            tracks.push(Track { id: tracks.len() as u32 + 1, detections: alloc::vec![*d] });
            active.push(Active { track: tracks.len() - 1, x: d.x, y: d.y, last_frame: d.frame });
        }
    }
    tracks
}

/// Counts identity switches of predicted trajectories against ground truth.
///
/// In every frame each predicted point is mapped to the nearest ground-truth
/// point within `match_radius` (ties to the lower id); frames without such a
/// point are skipped. A switch is charged whenever a predicted trajectory's
/// mapped ground-truth id differs from its previous mapped id.
pub fn identity_switch_count(pred: &[Trajectory], gt: &[Trajectory], match_radius: f64) -> usize {
    let mut by_frame: BTreeMap<usize, Vec<(u32, f64, f64)>> = BTreeMap::new();
    for t in gt {
        for s in &t.samples {
            by_frame.entry(s.frame).or_default().push((t.id, s.x, s.y));
        }
    }
    let r2 = match_radius * match_radius;
    let mut switches = 0;
    for t in pred {
        let mut prev: Option<u32> = None;
        for s in &t.samples {
            let Some(cands) = by_frame.get(&s.frame) else {
                continue;
            };
            let best = cands
                .iter()
                .map(|&(id, x, y)| ((x - s.x) * (x - s.x) + (y - s.y) * (y - s.y), id))
                .filter(|&(d2, _)| d2 <= r2)
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, id)) = best {
                if prev.is_some_and(|p| p != id) {
                    switches += 1;
                }
                prev = Some(id);
            }
        }
    }
    switches
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn det(frame: usize, x: f64, y: f64) -> Detection {
        Detection { frame, source_label: 1, x, y, theta: 0.0, area: 10 }
    }

    fn traj(id: u32, pts: &[(usize, f64, f64)]) -> Trajectory {
        Trajectory::new(id, pts.iter().map(|&(f, x, y)| Sample::new(f, x, y)).collect(), 1.0).unwrap()
    }

    #[test]
    fn single_detection_per_frame() {
        let frames: Vec<Vec<Detection>> = (0..10).map(|f| vec![det(f, f as f64, 0.0)]).collect();
        let tracks = link(&frames, &LinkConfig::default());
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].detections.len(), 10);
    }

    #[test]
    fn gap_within_memory_keeps_identity() {
        let cfg = LinkConfig { gate: 5.0, max_missed: 2, ..LinkConfig::default() };
        let mut frames: Vec<Vec<Detection>> = Vec::new();
        for f in 0..8 {
            if f == 3 || f == 4 {
                frames.push(vec![]);
            } else {
                frames.push(vec![det(f, 10.0 + f as f64 * 0.5, 10.0)]);
            }
        }
        let tracks = link(&frames, &cfg);
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].gaps(), vec![(2, 2)]);
    }

    #[test]
    fn gap_beyond_memory_starts_new_track() {
        let cfg = LinkConfig { gate: 5.0, max_missed: 1, ..LinkConfig::default() };
        let frames = vec![vec![det(0, 0.0, 0.0)], vec![], vec![], vec![det(3, 0.0, 0.0)]];
        let tracks = link(&frames, &cfg);
        assert_eq!(tracks.len(), 2);
        assert_eq!(tracks[1].id, 2);
    }

    #[test]
    fn jump_beyond_gate_starts_new_track() {
        let cfg = LinkConfig { gate: 5.0, ..LinkConfig::default() };
        let frames = vec![vec![det(0, 0.0, 0.0)], vec![det(1, 6.0, 0.0)]];
        assert_eq!(link(&frames, &cfg).len(), 2);
    }

    #[test]
    fn well_separated_pair_keeps_ids() {
        let cfg = LinkConfig { gate: 5.0, ..LinkConfig::default() };
        let frames: Vec<Vec<Detection>> = (0..20)
            .map(|f| vec![det(f, 1.0 * f as f64, 0.0), det(f, 1.0 * f as f64, 50.0)])
            .collect();
        let tracks = link(&frames, &cfg);
        assert_eq!(tracks.len(), 2);
        let pred: Vec<Trajectory> = tracks.iter().map(|t| t.to_trajectory(None, 1.0)).collect();
        let gt = vec![
            traj(1, &(0..20).map(|f| (f, f as f64, 0.0)).collect::<Vec<_>>()),
            traj(2, &(0..20).map(|f| (f, f as f64, 50.0)).collect::<Vec<_>>()),
        ];
        assert_eq!(identity_switch_count(&pred, &gt, 3.0), 0);
    }

    #[test]
    fn pixel_conversion() {
        let t = Track { id: 1, detections: vec![det(0, 4.0, 8.0)] };
        let tr = t.to_trajectory(Some(0.25), 0.1);
        assert_eq!((tr.samples[0].x, tr.samples[0].y), (1.0, 2.0));
    }

    #[test]
    fn identical_sets_have_no_switches() {
        let a = traj(1, &[(0, 0.0, 0.0), (1, 1.0, 0.0), (2, 2.0, 0.0)]);
        let b = traj(2, &[(0, 0.0, 9.0), (1, 1.0, 9.0), (2, 2.0, 9.0)]);
        let set = vec![a, b];
        assert_eq!(identity_switch_count(&set, &set, 1.0), 0);
    }

    #[test]
    fn crossing_swap_counts_two() {
        // ground truth: 1 stays at y=0, 2 at y=10. Predictions swap at frame 3.
        let gt = vec![
            traj(1, &(0..6).map(|f| (f, f as f64, 0.0)).collect::<Vec<_>>()),
            traj(2, &(0..6).map(|f| (f, f as f64, 10.0)).collect::<Vec<_>>()),
        ];
        let p1: Vec<_> = (0..6).map(|f| (f, f as f64, if f < 3 { 0.0 } else { 10.0 })).collect();
        let p2: Vec<_> = (0..6).map(|f| (f, f as f64, if f < 3 { 10.0 } else { 0.0 })).collect();
        let pred = vec![traj(1, &p1), traj(2, &p2)];
        assert_eq!(identity_switch_count(&pred, &gt, 1.0), 2);
    }

    #[test]
    fn unmatched_frames_are_not_charged() {
        let gt = vec![traj(1, &[(0, 0.0, 0.0), (1, 0.0, 0.0), (2, 0.0, 0.0)])];
        let pred = vec![traj(5, &[(0, 0.0, 0.0), (1, 100.0, 0.0), (2, 0.0, 0.0)])];
        assert_eq!(identity_switch_count(&pred, &gt, 1.0), 0);
    }
}
