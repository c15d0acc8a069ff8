//! Per-particle trajectories.

use alloc::vec::Vec;

use crate::error::{bail, Result};

/// One observation of a particle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
    /// In-plane orientation in radians, when known.
    pub theta: Option<f64>,
}

impl Sample {
    pub fn new(frame: usize, x: f64, y: f64) -> Self {
        Sample { frame, x, y, theta: None }
    }
}

/// Ordered samples of one particle. Frames are strictly increasing; gaps
/// (missed frames) are allowed. Coordinates are in whatever length unit the
/// producer used (nm for simulated ground truth, px for raw tracks).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub id: u32,
    pub samples: Vec<Sample>,
    /// Seconds between consecutive frames.
    pub frame_interval: f64,
}

impl Trajectory {
    /// Builds a trajectory, checking ordering and finiteness.
    pub fn new(id: u32, samples: Vec<Sample>, frame_interval: f64) -> Result<Self> {
        let t = Trajectory { id, samples, frame_interval };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frame_interval > 0.0 && self.frame_interval.is_finite()) {
            bail!(InvalidParameter, "frame interval must be positive, got {}", self.frame_interval);
        }
        for w in self.samples.windows(2) {
            if w[1].frame <= w[0].frame {
                bail!(
                    InvalidParameter,
                    "trajectory {}: frames not strictly increasing ({} then {})",
                    self.id,
                    w[0].frame,
                    w[1].frame
                );
            }
        }
        for s in &self.samples {
            if !(s.x.is_finite() && s.y.is_finite() && s.theta.map_or(true, f64::is_finite)) {
                bail!(InvalidParameter, "trajectory {}: non-finite sample at frame {}", self.id, s.frame);
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_frame(&self) -> Option<usize> {
        self.samples.first().map(|s| s.frame)
    }

    pub fn last_frame(&self) -> Option<usize> {
        self.samples.last().map(|s| s.frame)
    }

    /// Sample recorded at `frame`, if any.
    pub fn at_frame(&self, frame: usize) -> Option<&Sample> {
        self.samples
            .binary_search_by_key(&frame, |s| s.frame)
            .ok()
            .map(|i| &self.samples[i])
    }

    /// Positions laid out densely from the first to the last frame; missing
    /// frames are `None`.
    pub fn dense_positions(&self) -> Vec<Option<(f64, f64)>> {
        let (Some(first), Some(last)) = (self.first_frame(), self.last_frame()) else {
            return Vec::new();
        };
        let mut out = alloc::vec![None; last - first + 1];
        for s in &self.samples {
            out[s.frame - first] = Some((s.x, s.y));
        }
        out
    }

    /// Multiplies every coordinate by `factor` (unit conversion).
    pub fn scaled(&self, factor: f64) -> Trajectory {
        let mut t = self.clone();
        for s in &mut t.samples {
            s.x *= factor;
            s.y *= factor;
        }
        t
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Trajectory {
        let mut t = self.clone();
        for s in &mut t.samples {
            s.x += dx;
            s.y += dy;
        }
        t
    }

    /// Removes the sample at `frame`, leaving a gap.
    pub fn without_frame(&self, frame: usize) -> Trajectory {
        let mut t = self.clone();
        t.samples.retain(|s| s.frame != frame);
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_unordered_frames() {
        let s = vec![Sample::new(3, 0.0, 0.0), Sample::new(3, 1.0, 0.0)];
        assert!(Trajectory::new(1, s, 1.0).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let s = vec![Sample::new(0, f64::NAN, 0.0)];
        assert!(Trajectory::new(1, s, 1.0).is_err());
    }

    #[test]
    fn dense_layout_marks_gaps() {
        let s = vec![Sample::new(2, 0.0, 0.0), Sample::new(4, 1.0, 0.0)];
        let t = Trajectory::new(1, s, 1.0).unwrap();
        assert_eq!(t.dense_positions(), vec![Some((0.0, 0.0)), None, Some((1.0, 0.0))]);
        assert_eq!(t.at_frame(4).unwrap().x, 1.0);
        assert!(t.at_frame(3).is_none());
    }
}
