//! Ground-truth trajectory generators.
//!
//! Brownian paths use i.i.d. Gaussian increments; fractional Brownian paths
//! integrate fractional Gaussian noise synthesised exactly, by circulant
//! embedding (Davies–Harte) with a Cholesky fallback. Generators produce the
//! free path and then apply the boundary mode, so the increment law holds
//! before boundary handling.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{bail, Result};
use crate::fft::{fft, Complex};
use crate::math::{floor, sqrt};
use crate::rng::{substream, SimRng, DOMAIN_TRAJECTORY};
use crate::trajectory::{Sample, Trajectory};

/// What happens when a particle reaches the field-of-view edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum BoundaryMode {
    /// Mirror-fold coordinates into `[0, L]`.
    #[default]
    Reflect,
    /// Wrap coordinates modulo `L`.
    Periodic,
    /// Leave coordinates untouched; particles may leave the field of view.
    Open,
}

/// Initial position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Start {
    /// Uniformly random inside the field of view.
    #[default]
    UniformRandom,
    /// Explicit position in nm.
    At { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionParams {
    /// nm²/s.
    pub diffusion_coefficient: f64,
    /// Hurst exponent in (0, 1); 0.5 is ordinary Brownian motion.
    pub hurst: f64,
    /// Seconds per frame.
    pub frame_interval: f64,
    pub n_frames: usize,
    /// Field of view `(width, height)` in nm.
    pub fov: (f64, f64),
    pub boundary: BoundaryMode,
    pub start: Start,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        DiffusionParams {
            diffusion_coefficient: 2.0,
            hurst: 0.5,
            frame_interval: 0.1,
            n_frames: 50,
            fov: (256.0, 256.0),
            boundary: BoundaryMode::Reflect,
            start: Start::UniformRandom,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        let d = self.diffusion_coefficient;
        if !(d >= 0.0 && d.is_finite()) {
            bail!(InvalidParameter, "diffusion coefficient must be >= 0, got {d}");
        }
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            bail!(InvalidParameter, "Hurst exponent must lie in (0, 1), got {}", self.hurst);
        }
        if !(self.frame_interval > 0.0 && self.frame_interval.is_finite()) {
            bail!(InvalidParameter, "frame interval must be > 0, got {}", self.frame_interval);
        }
        if self.n_frames == 0 {
            bail!(InvalidParameter, "n_frames must be >= 1");
        }
        let (w, h) = self.fov;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            bail!(InvalidParameter, "field of view must be positive, got {w} x {h}");
        }
        if let Start::At { x, y } = self.start {
            if !(x >= 0.0 && x <= w && y >= 0.0 && y <= h) {
                bail!(InvalidParameter, "start ({x}, {y}) lies outside the {w} x {h} field of view");
            }
        }
        Ok(())
    }

    /// Per-axis increment variance `2·D·dt`.
    pub fn step_variance(&self) -> f64 {
        2.0 * self.diffusion_coefficient * self.frame_interval
    }
}

/// Which exact fGn synthesis produced a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FgnMethod {
    DaviesHarte,
    Cholesky,
}

fn start_position(params: &DiffusionParams, rng: &mut SimRng) -> (f64, f64) {
    match params.start {
        Start::At { x, y } => (x, y),
        Start::UniformRandom => (
            rng.random::<f64>() * params.fov.0,
            rng.random::<f64>() * params.fov.1,
        ),
    }
}

fn integrate(
    params: &DiffusionParams,
    start: (f64, f64),
    dx: &[f64],
    dy: &[f64],
) -> Trajectory {
    let mut samples = Vec::with_capacity(params.n_frames);
    let (mut x, mut y) = start;
    samples.push(Sample::new(0, x, y));
    for (k, (ix, iy)) in dx.iter().zip(dy).enumerate() {
        x += ix;
        y += iy;
        samples.push(Sample::new(k + 1, x, y));
    }
    let free = Trajectory { id: 1, samples, frame_interval: params.frame_interval };
    apply_boundary(&free, params.boundary, params.fov)
}

/// Brownian trajectory: per-axis increments i.i.d. `N(0, 2·D·dt)`.
pub fn gen_brownian(params: &DiffusionParams, seed: u64) -> Result<Trajectory> {
    params.validate()?;
    let mut rng = substream(seed, DOMAIN_TRAJECTORY, 0);
    let start = start_position(params, &mut rng);
    let steps = params.n_frames - 1;
    let sd = sqrt(params.step_variance());
    let normal = Normal::new(0.0, sd).expect("finite non-negative sd");
    let mut dx = Vec::with_capacity(steps);
    let mut dy = Vec::with_capacity(steps);
    for _ in 0..steps {
        dx.push(normal.sample(&mut rng));
        dy.push(normal.sample(&mut rng));
    }
    Ok(integrate(params, start, &dx, &dy))
}

/// Fractional Brownian trajectory with Hurst exponent `params.hurst`. Returns
/// the path and the synthesis route used.
pub fn gen_fbm(params: &DiffusionParams, seed: u64) -> Result<(Trajectory, FgnMethod)> {
    params.validate()?;
    let mut rng = substream(seed, DOMAIN_TRAJECTORY, 0);
    let start = start_position(params, &mut rng);
    let n = params.n_frames - 1;
    let (dx, dy, method) = fgn_pair(n, params.hurst, params.step_variance(), &mut rng);
    Ok((integrate(params, start, &dx, &dy), method))
}

/// Autocovariance of fractional Gaussian noise at lag `k`:
/// `σ²/2 · (|k+1|^{2H} − 2|k|^{2H} + |k−1|^{2H})`.
pub fn fgn_autocovariance(k: usize, hurst: f64, variance: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    let p = |v: f64| if v == 0.0 { 0.0 } else { libm::pow(libm::fabs(v), h2) };
    0.5 * variance * (p(k + 1.0) - 2.0 * p(k) + p(k - 1.0))
}

/// Two independent fGn series of length `n`, Davies–Harte first with the
/// Cholesky route as fallback.
pub fn fgn_pair(n: usize, hurst: f64, variance: f64, rng: &mut SimRng) -> (Vec<f64>, Vec<f64>, FgnMethod) {
    match fgn_davies_harte(n, hurst, variance, rng) {
        Some((a, b)) => (a, b, FgnMethod::DaviesHarte),
        None => {
            let (a, b) = fgn_cholesky(n, hurst, variance, rng);
            (a, b, FgnMethod::Cholesky)
        }
    }
}

/// Circulant-embedding synthesis. Returns `None` when the embedding has a
/// materially negative eigenvalue. The real and imaginary parts of one
/// complex transform give two independent series.
pub fn fgn_davies_harte(
    n: usize,
    hurst: f64,
    variance: f64,
    rng: &mut SimRng,
) -> Option<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Some((Vec::new(), Vec::new()));
    }
    let m = n.next_power_of_two();
    let size = 2 * m;
    let mut row = Vec::with_capacity(size);
    for k in 0..=m {
        row.push(Complex::new(fgn_autocovariance(k, hurst, variance), 0.0));
    }
    for k in (1..m).rev() {
        row.push(Complex::new(fgn_autocovariance(k, hurst, variance), 0.0));
    }
    fft(&mut row);
    let max = row.iter().fold(0.0f64, |a, c| a.max(c.re));
    let tol = 1e-10 * max.max(f64::MIN_POSITIVE);
    if row.iter().any(|c| c.re < -tol) {
        return None;
    }
    let mut w: Vec<Complex> = row
        .iter()
        .map(|c| {
            let scale = sqrt(c.re.max(0.0) / size as f64);
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            Complex::new(scale * a, scale * b)
        })
        .collect();
    fft(&mut w);
    let xs = w[..n].iter().map(|c| c.re).collect();
    let ys = w[..n].iter().map(|c| c.im).collect();
    Some((xs, ys))
}

/// Exact synthesis through the Cholesky factor of the Toeplitz covariance.
/// O(n³); meant for short series.
pub fn fgn_cholesky(n: usize, hurst: f64, variance: f64, rng: &mut SimRng) -> (Vec<f64>, Vec<f64>) {
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, hurst, variance)).collect();
    // lower-triangular factor, row-major
    let mut l = alloc::vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = gamma[i - j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                l[i * n + i] = sqrt(s.max(0.0));
            } else {
                let d = l[j * n + j];
                l[i * n + j] = if d > 0.0 { s / d } else { 0.0 };
            }
        }
    }
    let mut draw = || -> Vec<f64> {
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        (0..n).map(|i| (0..=i).map(|k| l[i * n + k] * z[k]).sum()).collect()
    };
    let xs = draw();
    let ys = draw();
    (xs, ys)
}

/// Mirror-folds `v` into `[0, len]`.
pub fn reflect_into(v: f64, len: f64) -> f64 {
    let period = 2.0 * len;
    let mut r = v - period * floor(v / period);
    if r >= period {
        r -= period;
    }
    if r > len {
        r = period - r;
    }
    r.clamp(0.0, len)
}

/// Wraps `v` into `[0, len)`.
pub fn wrap_into(v: f64, len: f64) -> f64 {
    let r = v - len * floor(v / len);
    if r >= len || r < 0.0 {
        0.0
    } else {
        r
    }
}

/// Applies a boundary mode to every sample.
pub fn apply_boundary(traj: &Trajectory, mode: BoundaryMode, fov: (f64, f64)) -> Trajectory {
    let mut out = traj.clone();
    let fold: fn(f64, f64) -> f64 = match mode {
        BoundaryMode::Open => return out,
        BoundaryMode::Reflect => reflect_into,
        BoundaryMode::Periodic => wrap_into,
    };
    for s in &mut out.samples {
        s.x = fold(s.x, fov.0);
        s.y = fold(s.y, fov.1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn open_params(n: usize, d: f64, h: f64) -> DiffusionParams {
        DiffusionParams {
            diffusion_coefficient: d,
            hurst: h,
            frame_interval: 1.0,
            n_frames: n,
            fov: (1e6, 1e6),
            boundary: BoundaryMode::Open,
            start: Start::At { x: 5e5, y: 5e5 },
        }
    }

    fn increments(t: &Trajectory) -> Vec<f64> {
        t.samples.windows(2).map(|w| w[1].x - w[0].x).collect()
    }

    #[test]
    fn zero_diffusion_stays_put() {
        let t = gen_brownian(&open_params(20, 0.0, 0.5), 3).unwrap();
        assert!(t.samples.iter().all(|s| s.x == 5e5 && s.y == 5e5));
        let (f, _) = gen_fbm(&open_params(20, 0.0, 0.7), 3).unwrap();
        assert!(f.samples.iter().all(|s| s.x == 5e5 && s.y == 5e5));
    }

    #[test]
    fn brownian_increment_variance() {
        let t = gen_brownian(&open_params(100_001, 1.0, 0.5), 11).unwrap();
        let inc = increments(&t);
        let (_, sd) = crate::math::mean_std(&inc);
        assert!((sd * sd - 2.0).abs() < 0.05, "variance {}", sd * sd);
    }

    #[test]
    fn generators_are_deterministic() {
        let p = DiffusionParams::default();
        assert_eq!(gen_brownian(&p, 5).unwrap(), gen_brownian(&p, 5).unwrap());
        assert_ne!(gen_brownian(&p, 5).unwrap(), gen_brownian(&p, 6).unwrap());
        let q = DiffusionParams { hurst: 0.3, ..p };
        assert_eq!(gen_fbm(&q, 5).unwrap(), gen_fbm(&q, 5).unwrap());
    }

    #[test]
    fn single_frame_is_start() {
        let (t, _) = gen_fbm(&open_params(1, 1.0, 0.8), 0).unwrap();
        assert_eq!(t.samples, vec![Sample::new(0, 5e5, 5e5)]);
    }

    #[test]
    fn autocovariance_closed_form() {
        for k in 1..10 {
            assert_eq!(fgn_autocovariance(k, 0.5, 2.0), 0.0);
        }
        assert_eq!(fgn_autocovariance(0, 0.8, 2.0), 2.0);
        let rho1 = fgn_autocovariance(1, 0.8, 1.0);
        assert!((rho1 - (libm::pow(2.0, 0.6) - 1.0)).abs() < 1e-15);
        assert!((rho1 - 0.5157).abs() < 5e-5);
    }

    #[test]
    fn fbm_lag_one_correlation() {
        let (t, method) = gen_fbm(&open_params(100_001, 1.0, 0.8), 21).unwrap();
        assert_eq!(method, FgnMethod::DaviesHarte);
        let inc = increments(&t);
        let (m, sd) = crate::math::mean_std(&inc);
        let c1 = inc.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>()
            / (inc.len() - 1) as f64
            / (sd * sd);
        assert!((c1 - 0.5157).abs() < 0.02, "lag-1 correlation {c1}");
    }

    #[test]
    fn cholesky_matches_covariance() {
        // Monte Carlo over many short series: empirical lag covariances
        // against the closed form.
        let (n, h) = (6, 0.7);
        let mut rng = substream(9, 1, 0);
        let reps = 20_000;
        let mut acc = [0.0f64; 3];
        for _ in 0..reps {
            let (a, b) = fgn_cholesky(n, h, 1.0, &mut rng);
            for s in [&a, &b] {
                for (lag, slot) in acc.iter_mut().enumerate() {
                    *slot += s[0] * s[lag];
                }
            }
        }
        for (lag, v) in acc.iter().enumerate() {
            let est = v / (2 * reps) as f64;
            let exact = fgn_autocovariance(lag, h, 1.0);
            assert!((est - exact).abs() < 0.03, "lag {lag}: {est} vs {exact}");
        }
    }

    #[test]
    fn davies_harte_matches_covariance() {
        let (n, h) = (6, 0.3);
        let mut rng = substream(10, 1, 0);
        let reps = 20_000;
        let mut acc = [0.0f64; 3];
        for _ in 0..reps {
            let (a, b) = fgn_davies_harte(n, h, 1.0, &mut rng).unwrap();
            for s in [&a, &b] {
                for (lag, slot) in acc.iter_mut().enumerate() {
                    *slot += s[2] * s[2 + lag];
                }
            }
        }
        for (lag, v) in acc.iter().enumerate() {
            let est = v / (2 * reps) as f64;
            let exact = fgn_autocovariance(lag, h, 1.0);
            assert!((est - exact).abs() < 0.03, "lag {lag}: {est} vs {exact}");
        }
    }

    #[test]
    fn boundary_examples() {
        let t = Trajectory::new(1, vec![Sample::new(0, -3.0, 103.0)], 1.0).unwrap();
        let r = apply_boundary(&t, BoundaryMode::Reflect, (100.0, 100.0));
        assert_eq!((r.samples[0].x, r.samples[0].y), (3.0, 97.0));
        let p = apply_boundary(&t, BoundaryMode::Periodic, (100.0, 100.0));
        assert!((p.samples[0].x - 97.0).abs() < 1e-12);
        assert!((p.samples[0].y - 3.0).abs() < 1e-12);
        let o = apply_boundary(&t, BoundaryMode::Open, (100.0, 100.0));
        assert_eq!(o, t);
    }

    #[test]
    fn reflect_stays_in_range() {
        for i in -1000..1000 {
            let v = i as f64 * 0.73;
            let r = reflect_into(v, 10.0);
            assert!((0.0..=10.0).contains(&r));
            let w = wrap_into(v, 10.0);
            assert!((0.0..10.0).contains(&w));
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = DiffusionParams::default();
        p.hurst = 1.0;
        assert!(gen_fbm(&p, 0).is_err());
        let mut p = DiffusionParams::default();
        p.start = Start::At { x: -1.0, y: 0.0 };
        assert!(gen_brownian(&p, 0).is_err());
        let mut p = DiffusionParams::default();
        p.n_frames = 0;
        assert!(gen_brownian(&p, 0).is_err());
    }
}
