//! Dense grid Hamiltonians, their spectra, and thermal occupancies.
//!
//! The Hamiltonian is assembled in position space as the circulant matrix of
//! the spectral kinetic operator plus the diagonal potential, so its
//! eigenstates agree with the split-step propagators to spectral accuracy on
//! the same grid. `eigendecompose` is both the production eigensolver and the
//! brute-force reference the propagation modules are tested against.
//!
//! Occupancy algebra:
//! the per-state chemical potentials `mu_k` are defined through the
//! omitted-state Boltzmann sum `exp(-mu_k beta) = sum_{j != k} exp(-E_j beta)`,
//! and the resulting logistic occupancies reproduce the Boltzmann ratios
//! exactly; `fermi_dirac_occupancy` instead fixes one global `mu` by bisection
//! on the particle-number constraint.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fourier::Spectral;
use crate::grid::{ComplexField, Grid1D, RealField, UnitsConfig};

/// Largest Boltzmann weight the top retained state may carry, relative to the
/// ground state, before an eigen-expansion is considered truncated.
pub const TRUNCATION_TOL: f64 = 1e-12;

/// Exponents beyond this overflow `exp` in f64.
pub(crate) const EXP_LIMIT: f64 = 700.0;

/// Dense position-space Hamiltonian `-(hbar^2/2m) d^2/dr^2 + w(r)` with the
/// kinetic block built from the grid's Fourier multiplier.
pub fn hamiltonian_matrix(w: &RealField, units: &UnitsConfig) -> DMatrix<f64> {
    let grid = w.grid();
    let n = grid.n_points();
    let coeff = units.kinetic_coefficient();

    // First row of the circulant kinetic block: inverse transform of c k^2.
    let mut spectral = Spectral::new(grid);
    let mut buf: Vec<C64> = spectral
        .k_sq()
        .iter()
        .map(|&k2| C64::new(coeff * k2, 0.0))
        .collect();
    spectral.inverse(&mut buf);
    // Symmetrize the row so the matrix is symmetric to the last bit.
    let row: Vec<f64> = (0..n)
        .map(|d| 0.5 * (buf[d].re + buf[(n - d) % n].re))
        .collect();

    let wv = w.values();
    let mut h = DMatrix::<f64>::zeros(n, n);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|l| {
                (0..n)
                    .map(|j| row[(j + n - l) % n] + if j == l { wv[j] } else { 0.0 })
                    .collect()
            })
            .collect();
        for (l, col) in cols.into_iter().enumerate() {
            for (j, v) in col.into_iter().enumerate() {
                h[(j, l)] = v;
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        for l in 0..n {
            for j in 0..n {
                h[(j, l)] = row[(j + n - l) % n] + if j == l { wv[j] } else { 0.0 };
            }
        }
    }
    h
}

/// The lowest `n_states` eigenpairs of the grid Hamiltonian, energies
/// ascending, orbitals orthonormal under the grid inner product.
#[derive(Debug, Clone)]
pub struct EigenSet {
    grid: Grid1D,
    energies: Vec<f64>,
    orbitals: Vec<ComplexField>,
}

impl EigenSet {
    /// Assemble a set from externally supplied pairs (for analytic spectra in
    /// tests or handcrafted models). Energies must ascend and the orbitals
    /// must be orthonormal within 1e-10.
    pub fn from_parts(energies: Vec<f64>, orbitals: Vec<ComplexField>) -> Result<Self> {
        if energies.is_empty() || energies.len() != orbitals.len() {
            return Err(Error::DimensionMismatch {
                what: "eigen set",
                expected: energies.len(),
                found: orbitals.len(),
            });
        }
        for (i, e) in energies.iter().enumerate() {
            if !e.is_finite() {
                return Err(Error::NonFinite { what: "energies", index: i });
            }
        }
        if energies.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::InvalidParameter {
                what: "energies (must ascend)",
                value: f64::NAN,
            });
        }
        let grid = orbitals[0].grid();
        for orb in &orbitals {
            if orb.grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        for i in 0..orbitals.len() {
            for j in i..orbitals.len() {
                let ip = orbitals[i].inner_product(&orbitals[j])?;
                let target = if i == j { 1.0 } else { 0.0 };
                if (ip - C64::new(target, 0.0)).norm() > 1e-10 {
                    return Err(Error::NotNormalized {
                        what: "eigen set orbitals",
                        deviation: (ip - C64::new(target, 0.0)).norm(),
                        tolerance: 1e-10,
                    });
                }
            }
        }
        Ok(Self { grid, energies, orbitals })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn orbitals(&self) -> &[ComplexField] {
        &self.orbitals
    }

    pub fn orbital(&self, j: usize) -> &ComplexField {
        &self.orbitals[j]
    }

    /// `exp(-i H t / hbar) psi0` projected on the retained span. Exact when
    /// the set is complete (`n_states == n_points`).
    pub fn evolve(&self, psi0: &ComplexField, t: f64, units: &UnitsConfig) -> Result<ComplexField> {
        if psi0.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut out = vec![C64::new(0.0, 0.0); self.grid.n_points()];
        for (e, orb) in self.energies.iter().zip(&self.orbitals) {
            let c = orb.inner_product(psi0)?;
            let phase = C64::from_polar(1.0, -e * t / units.hbar());
            let amp = c * phase;
            for (o, v) in out.iter_mut().zip(orb.values()) {
                *o += amp * v;
            }
        }
        ComplexField::new(self.grid, out)
    }

    /// `exp(-s H) f` projected on the retained span (imaginary-time kernel).
    pub fn heat_apply(&self, f: &RealField, s: f64) -> Result<RealField> {
        if f.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let fc = f.to_complex();
        let mut out = vec![0.0; self.grid.n_points()];
        for (e, orb) in self.energies.iter().zip(&self.orbitals) {
            if (e * s).abs() > EXP_LIMIT {
                return Err(Error::ScaleOverflow { exponent: (e * s).abs(), limit: EXP_LIMIT });
            }
            let c = orb.inner_product(&fc)?;
            let amp = c * (-e * s).exp();
            for (o, v) in out.iter_mut().zip(orb.values()) {
                *o += (amp * v).re;
            }
        }
        RealField::new(self.grid, out)
    }

    /// The orbitals carried to time `t` under the static Hamiltonian:
    /// `exp(-i E_j t / hbar) phi_j`.
    pub fn orbitals_at(&self, t: f64, units: &UnitsConfig) -> Vec<ComplexField> {
        self.energies
            .iter()
            .zip(&self.orbitals)
            .map(|(e, orb)| {
                let phase = C64::from_polar(1.0, -e * t / units.hbar());
                ComplexField::new(
                    self.grid,
                    orb.values().iter().map(|v| phase * v).collect(),
                )
                .expect("phase rotation preserves finiteness")
            })
            .collect()
    }
}

/// Diagonalize the grid Hamiltonian for the potential `w`, keeping the lowest
/// `n_states` states. More states than grid points cannot exist and are
/// rejected rather than padded.
pub fn eigendecompose(w: &RealField, units: &UnitsConfig, n_states: usize) -> Result<EigenSet> {
    let grid = w.grid();
    let n = grid.n_points();
    if n_states == 0 || n_states > n {
        return Err(Error::TooFewStates {
            have: n,
            need: n_states.max(1),
        });
    }

    let h = hamiltonian_matrix(w, units);
    let eig = h.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("eigenvalues of a finite symmetric matrix are finite")
    });

    let inv_sqrt_dx = 1.0 / grid.spacing().sqrt();
    let mut energies = Vec::with_capacity(n_states);
    let mut orbitals = Vec::with_capacity(n_states);
    for &idx in order.iter().take(n_states) {
        energies.push(eig.eigenvalues[idx]);
        let col = eig.eigenvectors.column(idx);
        // Fix the arbitrary eigenvector sign: largest-magnitude entry positive.
        let mut peak = 0usize;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[peak].abs() {
                peak = i;
            }
        }
        let sign = if col[peak] < 0.0 { -1.0 } else { 1.0 };
        let values: Vec<C64> = col
            .iter()
            .map(|&v| C64::new(sign * v * inv_sqrt_dx, 0.0))
            .collect();
        orbitals.push(ComplexField::new(grid, values)?);
    }
    Ok(EigenSet { grid, energies, orbitals })
}

/// Ring-propagator diagonal and trace at inverse temperature `beta` from an
/// eigen-expansion: `sum_j exp(-E_j beta) |phi_j(r)|^2` and
/// `Q = sum_j exp(-E_j beta)`.
///
/// The retained set must be deep enough that the top state's relative weight
/// `exp(-(E_top - E_0) beta)` is below [`TRUNCATION_TOL`]; a single-state set
/// is taken at face value since no truncation certificate is possible.
pub fn expand_propagator(eig: &EigenSet, beta: f64) -> Result<(RealField, f64)> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidParameter { what: "beta", value: beta });
    }
    let energies = eig.energies();
    let e0 = energies[0];
    let top = *energies.last().expect("eigen sets are non-empty");
    if energies.iter().any(|e| (e * beta).abs() > EXP_LIMIT) {
        return Err(Error::ScaleOverflow {
            exponent: energies.iter().fold(0.0f64, |a, e| a.max((e * beta).abs())),
            limit: EXP_LIMIT,
        });
    }
    if eig.len() >= 2 {
        let tail = (-(top - e0) * beta).exp();
        if tail >= TRUNCATION_TOL {
            return Err(Error::TruncationBound {
                retained: eig.len(),
                top_energy: top,
                tail_weight: tail,
                needed_energy: e0 + (1.0 / TRUNCATION_TOL).ln() / beta,
            });
        }
    }

    let weights: Vec<f64> = energies.iter().map(|e| (-e * beta).exp()).collect();
    let diagonal = weighted_abs2_sum(eig.grid(), eig.orbitals(), &weights);
    let trace: f64 = weights.iter().sum();
    Ok((diagonal, trace))
}

/// `sum_k weight_k |phi_k(r)|^2` with a fixed chunked reduction order, so the
/// result is bit-identical at any thread count.
fn weighted_abs2_sum(grid: Grid1D, orbitals: &[ComplexField], weights: &[f64]) -> RealField {
    debug_assert_eq!(orbitals.len(), weights.len());
    const CHUNK: usize = 8;
    let chunk_sum = |pairs: &[(f64, &ComplexField)]| -> Vec<f64> {
        let mut acc = vec![0.0; grid.n_points()];
        for (wgt, orb) in pairs {
            for (a, v) in acc.iter_mut().zip(orb.values()) {
                *a += wgt * v.norm_sqr();
            }
        }
        acc
    };
    let pairs: Vec<(f64, &ComplexField)> = weights
        .iter()
        .copied()
        .zip(orbitals.iter())
        .collect();

    let partials: Vec<Vec<f64>>;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        partials = pairs.par_chunks(CHUNK).map(chunk_sum).collect();
    }
    #[cfg(not(feature = "parallel"))]
    {
        partials = pairs.chunks(CHUNK).map(chunk_sum).collect();
    }

    let mut total = vec![0.0; grid.n_points()];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    RealField::from_values_unchecked(grid, total)
}

/// Thermal occupancies over a retained spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum OccupancySpectrum {
    /// Per-state chemical potentials from omitted-state Boltzmann sums; the
    /// occupancies sum to 1.
    Tilde {
        beta: f64,
        occupancies: Vec<f64>,
        mu_tilde: Vec<f64>,
    },
    /// One global chemical potential fixed by particle count; occupancies are
    /// per spin channel, so `sum_k spin_degeneracy * f_k = n_particles`.
    FermiDirac {
        beta: f64,
        occupancies: Vec<f64>,
        mu: f64,
        spin_degeneracy: f64,
    },
}

impl OccupancySpectrum {
    pub fn beta(&self) -> f64 {
        match self {
            Self::Tilde { beta, .. } | Self::FermiDirac { beta, .. } => *beta,
        }
    }

    pub fn len(&self) -> usize {
        self.occupancies().len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancies().is_empty()
    }

    pub fn occupancies(&self) -> &[f64] {
        match self {
            Self::Tilde { occupancies, .. } | Self::FermiDirac { occupancies, .. } => occupancies,
        }
    }

    /// Density weights: degeneracy-scaled occupancies for the Fermi-Dirac
    /// kind, raw occupancies for the tilde kind.
    pub fn weights(&self) -> Vec<f64> {
        match self {
            Self::Tilde { occupancies, .. } => occupancies.clone(),
            Self::FermiDirac { occupancies, spin_degeneracy, .. } => {
                occupancies.iter().map(|f| f * spin_degeneracy).collect()
            }
        }
    }
}

/// `1 / (1 + exp(x))`, evaluated on the side that cannot overflow.
fn fermi_factor(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Occupancies from the per-state chemical-potential construction:
/// `exp(-mu_k beta) = sum_{j != k} exp(-E_j beta)` and
/// `f_k = 1 / (1 + exp((E_k - mu_k) beta))`.
///
/// Needs at least two states (the omitted sum is empty otherwise). The
/// omitted sums are evaluated directly, smallest weights first, so the route
/// stays exact to rounding rather than suffering cancellation against a
/// precomputed total.
pub fn tilde_occupancy(eig: &EigenSet, beta: f64) -> Result<OccupancySpectrum> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidParameter { what: "beta", value: beta });
    }
    let energies = eig.energies();
    let n = energies.len();
    if n < 2 {
        return Err(Error::TooFewStates { have: n, need: 2 });
    }
    let e0 = energies[0];
    if energies.iter().any(|e| ((e - e0) * beta).abs() > EXP_LIMIT) {
        return Err(Error::ScaleOverflow {
            exponent: energies
                .iter()
                .fold(0.0f64, |a, e| a.max(((e - e0) * beta).abs())),
            limit: EXP_LIMIT,
        });
    }

    // Ground-shifted Boltzmann weights keep every exp() in range.
    let shifted: Vec<f64> = energies.iter().map(|e| (-(e - e0) * beta).exp()).collect();
    let mut occupancies = Vec::with_capacity(n);
    let mut mu_tilde = Vec::with_capacity(n);
    for (k, energy) in energies.iter().enumerate() {
        let mut omitted = 0.0;
        for j in (0..n).rev() {
            if j != k {
                omitted += shifted[j];
            }
        }
        if omitted <= 0.0 {
            return Err(Error::PartitionUnderflow(omitted));
        }
        let mu_k = e0 - omitted.ln() / beta;
        mu_tilde.push(mu_k);
        occupancies.push(fermi_factor((energy - mu_k) * beta));
    }
    Ok(OccupancySpectrum::Tilde { beta, occupancies, mu_tilde })
}

/// Fermi-Dirac occupancies with the chemical potential fixed by bisection on
/// `spin_degeneracy * sum_k f_k = n_particles` to 1e-13.
pub fn fermi_dirac_occupancy(
    eig: &EigenSet,
    beta: f64,
    n_particles: f64,
    spin_degeneracy: f64,
) -> Result<OccupancySpectrum> {
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidParameter { what: "beta", value: beta });
    }
    if !n_particles.is_finite() || n_particles < 1.0 {
        return Err(Error::InvalidParameter { what: "n_particles", value: n_particles });
    }
    if !spin_degeneracy.is_finite() || spin_degeneracy < 1.0 {
        return Err(Error::InvalidParameter { what: "spin_degeneracy", value: spin_degeneracy });
    }
    let energies = eig.energies();
    let capacity = spin_degeneracy * energies.len() as f64;
    if n_particles > capacity {
        return Err(Error::InfeasibleFilling { n_particles, capacity });
    }

    let filling_error = |mu: f64| -> f64 {
        let total: f64 = energies
            .iter()
            .map(|e| fermi_factor((e - mu) * beta))
            .sum();
        spin_degeneracy * total - n_particles
    };

    let tol = 1e-13;
    let margin = (1e16 * capacity).ln() / beta + 1.0;
    let mut lo = energies[0] - margin;
    let mut hi = *energies.last().expect("non-empty spectrum") + margin;
    let (f_lo, f_hi) = (filling_error(lo), filling_error(hi));
    if f_lo.abs() <= tol {
        return Ok(build_fd(energies, beta, lo, spin_degeneracy));
    }
    if f_hi.abs() <= tol {
        return Ok(build_fd(energies, beta, hi, spin_degeneracy));
    }
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: f_lo.abs().min(f_hi.abs()),
        });
    }

    let mut best = (f64::INFINITY, 0.5 * (lo + hi));
    for it in 0..500 {
        let mid = 0.5 * (lo + hi);
        let f = filling_error(mid);
        if f.abs() < best.0 {
            best = (f.abs(), mid);
        }
        if f.abs() <= tol {
            return Ok(build_fd(energies, beta, mid, spin_degeneracy));
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= f64::EPSILON * mid.abs().max(1.0) {
            // Interval exhausted; accept the best point if it meets the
            // looser 1e-12 contract, otherwise report the residual.
            if best.0 <= 1e-12 {
                return Ok(build_fd(energies, beta, best.1, spin_degeneracy));
            }
            return Err(Error::NonConvergence { iterations: it + 1, residual: best.0 });
        }
    }
    Err(Error::NonConvergence { iterations: 500, residual: best.0 })
}

fn build_fd(energies: &[f64], beta: f64, mu: f64, spin_degeneracy: f64) -> OccupancySpectrum {
    let occupancies = energies
        .iter()
        .map(|e| fermi_factor((e - mu) * beta))
        .collect();
    OccupancySpectrum::FermiDirac { beta, occupancies, mu, spin_degeneracy }
}

/// Density from occupancy-weighted orbitals: `sum_k weight_k |phi_k(r)|^2`.
///
/// With Fermi-Dirac weights the result integrates to the particle count the
/// occupancies were solved for; with tilde weights it integrates to 1 and
/// callers scale by N per the ring convention.
pub fn finite_t_density(
    occ: &OccupancySpectrum,
    orbitals: &[ComplexField],
) -> Result<RealField> {
    if orbitals.len() != occ.len() {
        return Err(Error::DimensionMismatch {
            what: "orbitals vs occupancies",
            expected: occ.len(),
            found: orbitals.len(),
        });
    }
    let grid = orbitals
        .first()
        .ok_or(Error::TooFewStates { have: 0, need: 1 })?
        .grid();
    if orbitals.iter().any(|o| o.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    Ok(weighted_abs2_sum(grid, orbitals, &occ.weights()))
}

/// Diagonal of the ring propagator at inverse temperature `beta` built from
/// orbitals at a common time, `(1/N) sum_k exp(-E_k beta) |phi_k(r)|^2`, with
/// its trace `sum_k exp(-E_k beta)`.
#[derive(Debug, Clone)]
pub struct RingPropagator {
    diagonal: RealField,
    trace: f64,
    n_particles: f64,
}

impl RingPropagator {
    pub fn diagonal(&self) -> &RealField {
        &self.diagonal
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn n_particles(&self) -> f64 {
        self.n_particles
    }

    /// The thermal density this propagator encodes:
    /// `(N / trace) * N * diagonal`, i.e. the occupancy-ratio form.
    pub fn density(&self) -> RealField {
        let scale = self.n_particles * self.n_particles / self.trace;
        RealField::from_values_unchecked(
            self.diagonal.grid(),
            self.diagonal.values().iter().map(|v| v * scale).collect(),
        )
    }
}

pub fn ring_propagator(
    orbitals: &[ComplexField],
    energies: &[f64],
    beta: f64,
    n_particles: f64,
) -> Result<RingPropagator> {
    if orbitals.is_empty() {
        return Err(Error::TooFewStates { have: 0, need: 1 });
    }
    if orbitals.len() != energies.len() {
        return Err(Error::DimensionMismatch {
            what: "orbitals vs energies",
            expected: energies.len(),
            found: orbitals.len(),
        });
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::InvalidParameter { what: "beta", value: beta });
    }
    if !n_particles.is_finite() || n_particles < 1.0 {
        return Err(Error::InvalidParameter { what: "n_particles", value: n_particles });
    }
    let grid = orbitals[0].grid();
    if orbitals.iter().any(|o| o.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    for (i, e) in energies.iter().enumerate() {
        if !e.is_finite() {
            return Err(Error::NonFinite { what: "energies", index: i });
        }
        if (e * beta).abs() > EXP_LIMIT {
            return Err(Error::ScaleOverflow { exponent: (e * beta).abs(), limit: EXP_LIMIT });
        }
    }

    let weights: Vec<f64> = energies.iter().map(|e| (-e * beta).exp()).collect();
    let trace: f64 = weights.iter().sum();
    let scaled: Vec<f64> = weights.iter().map(|w| w / n_particles).collect();
    let diagonal = weighted_abs2_sum(grid, orbitals, &scaled);
    Ok(RingPropagator { diagonal, trace, n_particles })
}
