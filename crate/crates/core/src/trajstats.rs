//! Trajectory statistics: time-averaged MSD, velocity autocorrelation,
//! displacement distributions and diffusion fits.
//!
//! Every estimator is gap-aware: a pair (or a velocity) only exists when both
//! of its frames were observed. Nothing is interpolated.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math::{ceil, mean_std, sqrt};
use crate::trajectory::Trajectory;

/// Default fraction of the trajectory length used as the largest lag.
pub const DEFAULT_MAX_LAG_FRACTION: f64 = 0.25;
/// Default number of leading MSD points used by [`fit_diffusion`].
pub const DEFAULT_FIT_LAGS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MsdPoint {
    /// Lag in seconds.
    pub tau: f64,
    pub lag_frames: usize,
    pub msd: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MsdCurve {
    pub points: Vec<MsdPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VacfPoint {
    pub tau: f64,
    pub lag_frames: usize,
    pub c: f64,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VacfCurve {
    pub points: Vec<VacfPoint>,
}

fn max_lag(n_samples: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction.is_finite()) {
        bail!(InvalidParameter, "max lag fraction must be > 0, got {fraction}");
    }
    Ok((ceil(fraction * n_samples as f64) as usize).max(1))
}

/// Per-lag sums of squared displacement and pair counts, lags `1..=max_lag`.
fn msd_sums(traj: &Trajectory, max_lag: usize) -> Vec<(f64, usize)> {
    let pos = traj.dense_positions();
    let top = max_lag.min(pos.len().saturating_sub(1));
    let mut out = alloc::vec![(0.0, 0usize); top + 1];
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        for i in 0..pos.len() - k {
            if let (Some(a), Some(b)) = (pos[i], pos[i + k]) {
                let (dx, dy) = (b.0 - a.0, b.1 - a.1);
                slot.0 += dx * dx + dy * dy;
                slot.1 += 1;
            }
        }
    }
    out
}

fn curve_from_sums(sums: &[(f64, usize)], dt: f64) -> MsdCurve {
    let points = sums
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, s)| s.1 > 0)
        .map(|(k, &(sum, n))| MsdPoint { tau: k as f64 * dt, lag_frames: k, msd: sum / n as f64, n_pairs: n })
        .collect();
    MsdCurve { points }
}

/// Time-averaged MSD of one trajectory. Lags run from 1 to
/// `⌈max_lag_fraction · N⌉` frames (N = number of samples); lags without any
/// observed pair are omitted.
pub fn msd(traj: &Trajectory, max_lag_fraction: f64) -> Result<MsdCurve> {
    if traj.len() < 2 {
        bail!(InsufficientData, "MSD needs at least 2 samples, trajectory {} has {}", traj.id, traj.len());
    }
    let lag = max_lag(traj.len(), max_lag_fraction)?;
    Ok(curve_from_sums(&msd_sums(traj, lag), traj.frame_interval))
}

/// Ensemble MSD: pairs from all trajectories pooled per lag. The largest lag
/// follows the longest trajectory.
pub fn ensemble_msd(trajs: &[Trajectory], max_lag_fraction: f64) -> Result<MsdCurve> {
    let usable: Vec<&Trajectory> = trajs.iter().filter(|t| t.len() >= 2).collect();
    let Some(longest) = usable.iter().map(|t| t.len()).max() else {
        bail!(InsufficientData, "no trajectory with at least 2 samples");
    };
    let dt = usable[0].frame_interval;
    if usable.iter().any(|t| t.frame_interval != dt) {
        bail!(InputMismatch, "trajectories disagree on frame interval");
    }
    let lag = max_lag(longest, max_lag_fraction)?;
    let mut total = alloc::vec![(0.0, 0usize); lag + 1];
    for t in usable {
        for (k, (s, n)) in msd_sums(t, lag).into_iter().enumerate() {
            total[k].0 += s;
            total[k].1 += n;
        }
    }
    Ok(curve_from_sums(&total, dt))
}

fn velocities(traj: &Trajectory) -> Vec<Option<(f64, f64)>> {
    let pos = traj.dense_positions();
    let dt = traj.frame_interval;
    pos.windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some(((b.0 - a.0) / dt, (b.1 - a.1) / dt)),
            _ => None,
        })
        .collect()
}

fn vacf_sums(v: &[Option<(f64, f64)>], max_lag: usize) -> Vec<(f64, usize)> {
    let top = max_lag.min(v.len().saturating_sub(1));
    (0..=top)
        .map(|k| {
            let mut s = 0.0;
            let mut n = 0;
            for i in 0..v.len() - k {
                if let (Some(a), Some(b)) = (v[i], v[i + k]) {
                    s += a.0 * b.0 + a.1 * b.1;
                    n += 1;
                }
            }
            (s, n)
        })
        .collect()
}

fn vacf_from_sums(sums: &[(f64, usize)], dt: f64) -> Result<VacfCurve> {
    let Some(&(s0, n0)) = sums.first().filter(|s| s.1 > 0) else {
        bail!(InsufficientData, "no velocity is defined (need two adjacent observed frames)");
    };
    let norm = s0 / n0 as f64;
    if !(norm > 0.0) {
        bail!(InsufficientData, "velocity variance is zero");
    }
    let points = sums
        .iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(k, &(s, n))| VacfPoint { tau: k as f64 * dt, lag_frames: k, c: (s / n as f64) / norm, n_pairs: n })
        .collect();
    Ok(VacfCurve { points })
}

/// Normalised velocity autocorrelation `⟨v(t)·v(t+τ)⟩ / ⟨v(t)·v(t)⟩`, with
/// `v(t) = (r(t+1) − r(t)) / dt` defined only across adjacent observed
/// frames. `c(0)` is exactly 1.
pub fn vacf(traj: &Trajectory, max_lag_fraction: f64) -> Result<VacfCurve> {
    let v = velocities(traj);
    let lag = max_lag(v.len(), max_lag_fraction)?;
    vacf_from_sums(&vacf_sums(&v, lag), traj.frame_interval)
}

/// Velocity autocorrelation with products pooled over trajectories.
pub fn ensemble_vacf(trajs: &[Trajectory], max_lag_fraction: f64) -> Result<VacfCurve> {
    let vs: Vec<_> = trajs.iter().map(velocities).collect();
    let longest = vs.iter().map(Vec::len).max().unwrap_or(0);
    let lag = max_lag(longest, max_lag_fraction)?;
    let mut total = alloc::vec![(0.0, 0usize); lag + 1];
    for v in &vs {
        for (k, (s, n)) in vacf_sums(v, lag).into_iter().enumerate() {
            total[k].0 += s;
            total[k].1 += n;
        }
    }
    let dt = trajs.first().map_or(1.0, |t| t.frame_interval);
    vacf_from_sums(&total, dt)
}

/// Which displacement component a histogram describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DisplacementAxis {
    X,
    Y,
    Radial,
    /// Δx and Δy pooled into one sample.
    #[default]
    BothAxesPooled,
}

/// Displacements over `lag_frames` between observed frame pairs.
pub fn displacements(traj: &Trajectory, lag_frames: usize, axis: DisplacementAxis) -> Vec<f64> {
    let pos = traj.dense_positions();
    let mut out = Vec::new();
    if lag_frames == 0 || lag_frames >= pos.len() {
        return out;
    }
    for i in 0..pos.len() - lag_frames {
        if let (Some(a), Some(b)) = (pos[i], pos[i + lag_frames]) {
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            match axis {
                DisplacementAxis::X => out.push(dx),
                DisplacementAxis::Y => out.push(dy),
                DisplacementAxis::Radial => out.push(sqrt(dx * dx + dy * dy)),
                DisplacementAxis::BothAxesPooled => {
                    out.push(dx);
                    out.push(dy);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisplacementHist {
    /// Lag in seconds.
    pub tau: f64,
    pub axis: DisplacementAxis,
    pub bin_edges: Vec<f64>,
    /// Probability density per bin (1/length unit).
    pub density: Vec<f64>,
    /// Samples inside the binned range.
    pub n_samples: usize,
    /// Samples outside `mean ± 5·sd` that were not binned.
    pub n_outside: usize,
}

impl DisplacementHist {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `Σ density · width`.
    pub fn integral(&self) -> f64 {
        self.bin_edges.windows(2).zip(&self.density).map(|(w, d)| d * (w[1] - w[0])).sum()
    }
}

/// Normalised histogram over `mean ± 5·sd`, clipped to the data extent. A
/// degenerate sample (all values equal) gets a unit-wide range centred on the
/// value.
pub fn histogram_density(values: &[f64], n_bins: usize) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    if values.is_empty() {
        bail!(InsufficientData, "no values to histogram");
    }
    if n_bins == 0 {
        bail!(InvalidParameter, "n_bins must be >= 1");
    }
    let (m, sd) = mean_std(values);
    let (dmin, dmax) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mut lo = (m - 5.0 * sd).max(dmin);
    let mut hi = (m + 5.0 * sd).min(dmax);
    if !(hi > lo) {
        lo = dmin - 0.5;
        hi = dmin + 0.5;
    }
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|i| if i == n_bins { hi } else { lo + i as f64 * width }).collect();
    let mut counts = alloc::vec![0usize; n_bins];
    let mut inside = 0;
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let b = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[b] += 1;
        inside += 1;
    }
    let density = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, w)| c as f64 / (inside as f64 * (w[1] - w[0])))
        .collect();
    Ok((edges, density, inside))
}

/// Probability density of displacements at `lag_frames`.
pub fn displacement_pdf(
    traj: &Trajectory,
    lag_frames: usize,
    n_bins: usize,
    axis: DisplacementAxis,
) -> Result<DisplacementHist> {
    let values = displacements(traj, lag_frames, axis);
    if values.is_empty() {
        bail!(InsufficientData, "trajectory {} has no pairs at lag {lag_frames}", traj.id);
    }
    displacement_pdf_from(&values, lag_frames as f64 * traj.frame_interval, n_bins, axis)
}

/// Histogram of an already collected displacement sample (e.g. pooled over
/// several trajectories).
pub fn displacement_pdf_from(values: &[f64], tau: f64, n_bins: usize, axis: DisplacementAxis) -> Result<DisplacementHist> {
    let (bin_edges, density, n) = histogram_density(values, n_bins)?;
    Ok(DisplacementHist { tau, axis, bin_edges, density, n_samples: n, n_outside: values.len() - n })
}

/// Sample excess kurtosis `m4 / m2² − 3` (population moments).
pub fn excess_kurtosis(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let (m, _) = mean_std(values);
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in values {
        let d = (v - m) * (v - m);
        m2 += d;
        m4 += d * d;
    }
    let n = values.len() as f64;
    let (m2, m4) = (m2 / n, m4 / n);
    (m2 > 0.0).then(|| m4 / (m2 * m2) - 3.0)
}

/// Zero-mean Gaussian displacement law of Brownian motion, per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianReference {
    /// `2·D·τ`.
    pub variance: f64,
}

impl GaussianReference {
    pub fn pdf(&self, x: f64) -> f64 {
        libm::exp(-x * x / (2.0 * self.variance)) / sqrt(2.0 * core::f64::consts::PI * self.variance)
    }

    /// Density at each bin centre.
    pub fn on_bins(&self, edges: &[f64]) -> Vec<f64> {
        edges.windows(2).map(|w| self.pdf(0.5 * (w[0] + w[1]))).collect()
    }
}

pub fn gaussian_reference(diffusion_coefficient: f64, tau: f64) -> Result<GaussianReference> {
    if !(diffusion_coefficient > 0.0 && diffusion_coefficient.is_finite()) {
        bail!(InvalidParameter, "D must be > 0, got {diffusion_coefficient}");
    }
    if !(tau > 0.0 && tau.is_finite()) {
        bail!(InvalidParameter, "tau must be > 0, got {tau}");
    }
    Ok(GaussianReference { variance: 2.0 * diffusion_coefficient * tau })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiffusionFit {
    /// D̂ in (length unit)²/s from MSD = 4·D·τ.
    pub diffusion_coefficient: f64,
    /// Anomalous exponent: log-log slope of MSD against τ.
    pub alpha: f64,
    pub n_points: usize,
}

/// Fits the first `fit_lags` MSD points: D̂ by unweighted least squares of
/// `MSD = 4·D·τ` (through the origin), α̂ as the least-squares slope of
/// `log MSD` against `log τ`. Points with MSD <= 0 are left out of the log fit.
pub fn fit_diffusion(curve: &MsdCurve, fit_lags: usize) -> Result<DiffusionFit> {
    if fit_lags == 0 {
        bail!(InvalidParameter, "fit_lags must be >= 1");
    }
    if curve.points.len() < fit_lags {
        bail!(InsufficientData, "curve has {} points, fit needs {fit_lags}", curve.points.len());
    }
    let pts = &curve.points[..fit_lags];
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.tau * p.msd, b + p.tau * p.tau));
    let d = num / (4.0 * den);
    let logs: Vec<(f64, f64)> = pts
        .iter()
        .filter(|p| p.msd > 0.0)
        .map(|p| (libm::log(p.tau), libm::log(p.msd)))
        .collect();
    if logs.len() < 2 {
        bail!(Fit, "fewer than two positive MSD points for the log-log fit");
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if !(sxx > 0.0) {
        bail!(Fit, "log-lag values are degenerate");
    }
    Ok(DiffusionFit { diffusion_coefficient: d, alpha: sxy / sxx, n_points: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::Sample;
    use alloc::vec;

    fn line(xs: &[f64]) -> Trajectory {
        let s = xs.iter().enumerate().map(|(i, &x)| Sample::new(i, x, 0.0)).collect();
        Trajectory::new(1, s, 1.0).unwrap()
    }

    #[test]
    fn collinear_enumeration() {
        let c = msd(&line(&[0.0, 1.0, 2.0]), 1.0).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!((c.points[0].msd, c.points[0].n_pairs), (1.0, 2));
        assert_eq!((c.points[1].msd, c.points[1].n_pairs), (4.0, 1));
    }

    #[test]
    fn stationary_msd_zero() {
        let c = msd(&line(&[3.0; 40]), 0.25).unwrap();
        assert_eq!(c.points.len(), 10);
        assert!(c.points.iter().all(|p| p.msd == 0.0));
    }

    #[test]
    fn msd_needs_two_samples() {
        assert!(matches!(msd(&line(&[1.0]), 0.25), Err(crate::Error::InsufficientData(_))));
    }

    #[test]
    fn msd_lag_without_pairs_omitted() {
        let s = vec![Sample::new(0, 0.0, 0.0), Sample::new(2, 2.0, 0.0)];
        let t = Trajectory::new(1, s, 0.5).unwrap();
        let c = msd(&t, 1.0).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!((c.points[0].lag_frames, c.points[0].tau, c.points[0].msd), (2, 1.0, 4.0));
    }

    #[test]
    fn constant_velocity_vacf() {
        let xs: Vec<f64> = (0..30).map(|i| 2.0 * i as f64).collect();
        let c = vacf(&line(&xs), 0.5).unwrap();
        assert_eq!(c.points[0].c, 1.0);
        assert!(c.points.iter().all(|p| (p.c - 1.0).abs() < 1e-12));
    }

    #[test]
    fn back_and_forth_vacf() {
        let xs: Vec<f64> = (0..21).map(|i| if i % 2 == 0 { 0.0 } else { 1.5 }).collect();
        let c = vacf(&line(&xs), 0.25).unwrap();
        assert_eq!(c.points[0].c, 1.0);
        assert_eq!(c.points[1].c, -1.0);
        assert_eq!(c.points[2].c, 1.0);
    }

    #[test]
    fn vacf_skips_gaps() {
        let s = vec![Sample::new(0, 0.0, 0.0), Sample::new(2, 1.0, 0.0), Sample::new(4, 1.0, 0.0)];
        let t = Trajectory::new(1, s, 1.0).unwrap();
        assert!(matches!(vacf(&t, 0.25), Err(crate::Error::InsufficientData(_))));
    }

    #[test]
    fn deterministic_steps_single_bin() {
        let xs: Vec<f64> = (0..50).map(|i| 2.0 * i as f64).collect();
        let h = displacement_pdf(&line(&xs), 1, 5, DisplacementAxis::X).unwrap();
        let nonzero: Vec<usize> = h.density.iter().enumerate().filter(|(_, d)| **d > 0.0).map(|(i, _)| i).collect();
        assert_eq!(nonzero.len(), 1);
        let b = nonzero[0];
        assert!(h.bin_edges[b] <= 2.0 && 2.0 <= h.bin_edges[b + 1]);
        assert!((h.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_pairs_at_lag() {
        assert!(displacement_pdf(&line(&[0.0, 1.0]), 3, 10, DisplacementAxis::X).is_err());
    }

    #[test]
    fn gaussian_reference_values() {
        let g = gaussian_reference(1.0, 1.0).unwrap();
        assert!((g.pdf(0.0) - 0.28209).abs() < 5e-6);
        assert_eq!(g.pdf(0.0), 1.0 / sqrt(4.0 * core::f64::consts::PI));
        // midpoint rule over ±10 sd
        let n = 20_000;
        let (lo, hi) = (-10.0 * sqrt(2.0), 10.0 * sqrt(2.0));
        let w = (hi - lo) / n as f64;
        let integral: f64 = (0..n).map(|i| g.pdf(lo + (i as f64 + 0.5) * w) * w).sum();
        assert!((integral - 1.0).abs() < 1e-6);
        assert!(gaussian_reference(0.0, 1.0).is_err());
        assert!(gaussian_reference(1.0, -1.0).is_err());
    }

    fn exact_curve(f: impl Fn(f64) -> f64) -> MsdCurve {
        MsdCurve {
            points: (1..=10)
                .map(|k| MsdPoint { tau: k as f64, lag_frames: k, msd: f(k as f64), n_pairs: 1 })
                .collect(),
        }
    }

    #[test]
    fn fit_noiseless_curves() {
        let f = fit_diffusion(&exact_curve(|t| 4.0 * t), 10).unwrap();
        assert!((f.diffusion_coefficient - 1.0).abs() < 1e-12);
        assert!((f.alpha - 1.0).abs() < 1e-12);
        let f = fit_diffusion(&exact_curve(|t| 4.0 * t * t), 10).unwrap();
        assert!((f.alpha - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_diffusion(&exact_curve(|_| 0.0), 10), Err(crate::Error::Fit(_))));
        assert!(fit_diffusion(&exact_curve(|t| t), 11).is_err());
        // one non-positive point is dropped from the log fit only
        let mut c = exact_curve(|t| 4.0 * t);
        c.points[0].msd = 0.0;
        assert!((fit_diffusion(&c, 10).unwrap().alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kurtosis_of_two_point_law() {
        // ±1 symmetric: m4/m2² = 1 → excess −2
        let v = [1.0, -1.0, 1.0, -1.0];
        assert!((excess_kurtosis(&v).unwrap() + 2.0).abs() < 1e-12);
    }
}
