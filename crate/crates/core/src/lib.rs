//! Numerical core for equilibrium and real-time quantum statistics on a 1D
//! periodic grid.
//!
//! One symmetric split-step kernel drives everything: with a real step
//! parameter it marches the diffusive thermal-contour propagator, with an
//! imaginary one it evolves orbitals unitarily in real time. On top of that
//! sit a dense eigensolver used both as a production path and as an oracle,
//! finite-temperature occupancy machinery, a self-consistent field loop, and
//! two-boundary weak values of the density.
//!
//! All floating-point reductions run in a fixed order, so results are
//! bit-identical across reruns and thread counts.

mod fourier;
mod stepper;

pub mod contour;
pub mod eigen;
pub mod error;
pub mod functional;
pub mod grid;
pub mod realtime;
pub mod scft;
pub mod weak;

pub use contour::{
    contour_density, energy_from_partition_decay, partition_q, propagate_contour,
    propagate_contour_adjoint, Contour, ContourTable,
};
pub use eigen::{
    eigendecompose, expand_propagator, fermi_dirac_occupancy, finite_t_density,
    hamiltonian_matrix, ring_propagator, tilde_occupancy, EigenSet, OccupancySpectrum,
    RingPropagator, TRUNCATION_TOL,
};
pub use error::{Error, Result};
pub use functional::{
    evaluate_energy, field_from_density, DensityMap, ExternalPotential, FieldSchedule,
    FunctionalSpec, HartreeTerm, DENSITY_FLOOR,
};
pub use grid::{ComplexField, Grid1D, RealField, UnitsConfig};
pub use realtime::{
    density_t, propagate_tdks, wick_rotation_check, OrbitalTrajectory, TdksMode, TimeTable,
    WickReport, NORM_TOL,
};
pub use scft::{
    ground_state_limit, solve_scft, GroundStateLimit, IterationRecord, ScftConfig, ScftState,
};
pub use weak::{
    backward_state, forward_state, weak_density, weak_value_decomposition, PolarWeakField,
    Selection, WeakValueField, OVERLAP_FLOOR,
};

pub use num_complex::Complex64;
