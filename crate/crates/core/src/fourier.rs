//! Thin wrapper around rustfft holding the plans and `k^2` table for one grid.
//!
//! The inverse transform folds in the 1/N normalization that rustfft leaves
//! out. Propagation loops construct one `Spectral` and reuse it; one-shot
//! operations build it on the fly.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid1D;

pub(crate) struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k_sq: Vec<f64>,
    scratch: Vec<C64>,
    inv_n: f64,
}

impl Spectral {
    pub fn new(grid: Grid1D) -> Self {
        let n = grid.n_points();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Spectral {
            forward,
            inverse,
            k_sq: (0..n).map(|i| grid.wavenumber(i).powi(2)).collect(),
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
            inv_n: 1.0 / n as f64,
        }
    }

    pub fn k_sq(&self) -> &[f64] {
        &self.k_sq
    }

    pub fn forward(&mut self, buf: &mut [C64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// Inverse transform, normalized.
    pub fn inverse(&mut self, buf: &mut [C64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        for z in buf.iter_mut() {
            *z *= self.inv_n;
        }
    }

    /// Shared-reference forward transform for parallel callers; scratch is
    /// allocated per call instead of reused.
    pub fn forward_shared(&self, buf: &mut [C64]) {
        self.forward.process(buf);
    }

    /// Shared-reference normalized inverse transform.
    pub fn inverse_shared(&self, buf: &mut [C64]) {
        self.inverse.process(buf);
        for z in buf.iter_mut() {
            *z *= self.inv_n;
        }
    }

    /// In place: `buf <- IFFT( -k^2 * FFT(buf) )`.
    pub fn scale_by_neg_k_sq(&mut self, buf: &mut [C64]) {
        self.forward(buf);
        for (z, &k2) in buf.iter_mut().zip(&self.k_sq) {
            *z *= -k2;
        }
        self.inverse(buf);
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;

    #[test]
    fn roundtrip_is_identity() {
        let grid = Grid1D::new(32, 5.0).unwrap();
        let mut sp = Spectral::new(grid);
        let original: Vec<C64> = (0..32)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = original.clone();
        sp.forward(&mut buf);
        sp.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&original) {
            assert!((a - b).norm() < 1e-13);
        }
    }
}
