//! Simulation and analysis core for liquid-phase TEM particle videos.
//!
//! The crate is `no_std` (with `alloc`) and holds the pure algorithms:
//!
//! * [`trajgen`] – Brownian and fractional-Brownian ground-truth trajectories.
//! * [`imaging`] – rendering of trajectories into noisy frames plus label masks.
//! * [`tracklink`] – mask moments, detections, gated min-cost linking.
//! * [`trajstats`] – MSD, velocity autocorrelation, displacement histograms, fits.
//! * [`segmetrics`] – J, F, J&F and centroid agreement.
//!
//! File formats, configuration and the command line live in the `lptem` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

mod error;
mod fft;
mod math;

pub mod image;
pub mod imaging;
pub mod rng;
pub mod segmetrics;
pub mod tracklink;
pub mod trajectory;
pub mod trajgen;
pub mod trajstats;

pub use error::{Error, Result};
pub use image::{Frame, LabelImage};
pub use trajectory::{Sample, Trajectory};
