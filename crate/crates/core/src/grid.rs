//! Square sample grids over the periodicity cell and 2D FFT helpers.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::lattice::{Lattice2D, Vec2};

/// `M × M` grid of cell points `x = (i/M) a1 + (j/M) a2`, row-major in `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellGrid {
    pub m: usize,
}

impl CellGrid {
    pub fn new(m: usize) -> Self {
        Self { m }
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn fractional(&self, i: usize, j: usize) -> Vec2 {
        [i as f64 / self.m as f64, j as f64 / self.m as f64]
    }

    pub fn point(&self, lat: &Lattice2D, i: usize, j: usize) -> Vec2 {
        lat.to_cartesian(self.fractional(i, j))
    }

    pub fn points(&self, lat: &Lattice2D) -> Vec<Vec2> {
        (0..self.m)
            .flat_map(|i| (0..self.m).map(move |j| (i, j)))
            .map(|(i, j)| self.point(lat, i, j))
            .collect()
    }
}

/// In-place 2D DFT of a row-major `m × m` array.
///
/// Forward: `X[k1,k2] = Σ x[i,j] e^{-2πi (k1 i + k2 j)/m}`; inverse uses the
/// `+` sign. Neither direction is normalised.
pub(crate) fn fft2(data: &mut [Complex64], m: usize, inverse: bool) {
    assert_eq!(data.len(), m * m);
    let mut planner = FftPlanner::new();
    let fft = if inverse {
        planner.plan_fft_inverse(m)
    } else {
        planner.plan_fft_forward(m)
    };
    for row in data.chunks_exact_mut(m) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = data[i * m + j];
        }
        fft.process(&mut col);
        for i in 0..m {
            data[i * m + j] = col[i];
        }
    }
}

/// Wraps a signed frequency index into `0..m`.
#[inline]
pub(crate) fn wrap_index(k: i32, m: usize) -> usize {
    k.rem_euclid(m as i32) as usize
}
