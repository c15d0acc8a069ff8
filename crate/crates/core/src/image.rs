//! Minimal owned image buffers.

use alloc::vec::Vec;

use crate::error::{bail, Result};

/// A 16-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

/// Per-pixel particle identity: 0 is background, `k >= 1` is particle `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u16>,
}

macro_rules! buffer_impl {
    ($ty:ident) => {
        impl $ty {
            pub fn new(width: usize, height: usize) -> Self {
                $ty { width, height, data: alloc::vec![0; width * height] }
            }

            pub fn from_vec(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
                if data.len() != width * height {
                    bail!(
                        InputMismatch,
                        "buffer holds {} values, {}x{} needs {}",
                        data.len(),
                        width,
                        height,
                        width * height
                    );
                }
                Ok($ty { width, height, data })
            }

            #[inline]
            pub fn get(&self, x: usize, y: usize) -> u16 {
                self.data[y * self.width + x]
            }

            #[inline]
            pub fn set(&mut self, x: usize, y: usize, v: u16) {
                self.data[y * self.width + x] = v;
            }

            pub fn same_shape<T: Shaped>(&self, other: &T) -> bool {
                (self.width, self.height) == other.shape()
            }
        }

        impl Shaped for $ty {
            fn shape(&self) -> (usize, usize) {
                (self.width, self.height)
            }
        }
    };
}

/// Anything with a `(width, height)`.
pub trait Shaped {
    fn shape(&self) -> (usize, usize);
}

buffer_impl!(Frame);
buffer_impl!(LabelImage);

impl LabelImage {
    /// Distinct non-zero labels in ascending order.
    pub fn labels(&self) -> Vec<u16> {
        let mut seen = Vec::new();
        let mut present = alloc::vec![false; 1 << 16];
        for &v in &self.data {
            if v != 0 && !present[v as usize] {
                present[v as usize] = true;
                seen.push(v);
            }
        }
        seen.sort_unstable();
        seen
    }

    pub fn contains_label(&self, label: u16) -> bool {
        self.data.contains(&label)
    }

    pub fn count(&self, label: u16) -> usize {
        self.data.iter().filter(|&&v| v == label).count()
    }
}
