//! Symmetric split-step kernel shared by every propagation route.
//!
//! One step advances a state by
//!
//! ```text
//! psi <- exp(-z w_end / 2) . IFFT( exp(-z c k^2) . FFT( exp(-z w_start / 2) psi ) )
//! ```
//!
//! with `c = hbar^2 / 2m`. The complex step parameter `z` selects the physics:
//! `z = ds` gives the diffusive (imaginary-time) propagator, `z = i dt / hbar`
//! the unitary one. Both public propagation modules drive this same kernel, so
//! rotating between them really is the substitution `ds <-> i dt / hbar`.
//!
//! Second order: a time-dependent potential enters through its values at the
//! step's two endpoints, half a step each.

use num_complex::Complex64 as C64;

use crate::fourier::Spectral;
use crate::grid::{Grid1D, UnitsConfig};

pub(crate) struct SplitStep {
    spectral: Spectral,
    kinetic: Vec<C64>,
    z: C64,
}

impl SplitStep {
    pub fn new(grid: Grid1D, units: &UnitsConfig, z: C64) -> Self {
        let spectral = Spectral::new(grid);
        let coeff = units.kinetic_coefficient();
        let kinetic: Vec<C64> = spectral
            .k_sq()
            .iter()
            .map(|&k2| (-z * coeff * k2).exp())
            .collect();
        SplitStep { spectral, kinetic, z }
    }

    /// One step with potential samples at the step endpoints.
    pub fn advance(&mut self, state: &mut [C64], w_start: &[f64], w_end: &[f64]) {
        half_potential(state, w_start, self.z);
        self.spectral.forward(state);
        for (s, k) in state.iter_mut().zip(&self.kinetic) {
            *s *= k;
        }
        self.spectral.inverse(state);
        half_potential(state, w_end, self.z);
    }

    /// The same step applied to a family of states; the factor tables are
    /// shared and the per-state work runs in parallel when enabled.
    pub fn advance_many(&self, states: &mut [Vec<C64>], w_start: &[f64], w_end: &[f64]) {
        let half_start: Vec<C64> = w_start.iter().map(|&w| (-self.z * (0.5 * w)).exp()).collect();
        let half_end: Vec<C64> = w_end.iter().map(|&w| (-self.z * (0.5 * w)).exp()).collect();
        let one = |state: &mut Vec<C64>| {
            for (s, f) in state.iter_mut().zip(&half_start) {
                *s *= f;
            }
            self.spectral.forward_shared(state);
            for (s, k) in state.iter_mut().zip(&self.kinetic) {
                *s *= k;
            }
            self.spectral.inverse_shared(state);
            for (s, f) in state.iter_mut().zip(&half_end) {
                *s *= f;
            }
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            states.par_iter_mut().for_each(one);
        }
        #[cfg(not(feature = "parallel"))]
        {
            states.iter_mut().for_each(one);
        }
    }
}

fn half_potential(state: &mut [C64], w: &[f64], z: C64) {
    for (s, &wi) in state.iter_mut().zip(w) {
        *s *= (-z * (0.5 * wi)).exp();
    }
}
