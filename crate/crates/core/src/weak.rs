//! Two-boundary weak values of the local density.
//!
//! A pre-selected state evolves forward from `t = 0`; a post-selected state
//! evolves backward from `t = T`. At an intermediate node the weak density is
//!
//! ```text
//! n_w(r, t) = N psi_i(r, t) conj(psi_f(r, t)) / <psi_f(t)|psi_i(t)>
//! ```
//!
//! which is complex in general but integrates to exactly `N`, and collapses
//! to the ordinary density whenever the post-selection is the forward-evolved
//! pre-selection. The backward state reuses the split-step kernel with the
//! step parameter negated and each step's endpoint fields swapped, making
//! every backward step the exact inverse of its forward partner.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::functional::FieldSchedule;
use crate::grid::{ComplexField, Grid1D, RealField, UnitsConfig};
use crate::realtime::{check_aliasing, TimeTable};
use crate::stepper::SplitStep;

/// Post-selections closer to orthogonal than this are rejected rather than
/// amplified into garbage.
pub const OVERLAP_FLOOR: f64 = 1e-10;

const SELECTION_NORM_TOL: f64 = 1e-10;

/// Pre- and post-selected boundary states for `n_particles` walkers.
#[derive(Debug, Clone)]
pub struct Selection {
    pre: ComplexField,
    post: ComplexField,
    n_particles: f64,
}

impl Selection {
    /// `pre` is the state prepared at `t = 0`, `post` the one selected at the
    /// final time. Both must be normalized.
    pub fn new(pre: ComplexField, post: ComplexField, n_particles: f64) -> Result<Self> {
        if pre.grid() != post.grid() {
            return Err(Error::GridMismatch);
        }
        if !n_particles.is_finite() || n_particles <= 0.0 {
            return Err(Error::InvalidParameter { what: "n_particles", value: n_particles });
        }
        for (what, f) in [("pre-selection", &pre), ("post-selection", &post)] {
            let deviation = (f.norm() - 1.0).abs();
            if deviation.is_nan() || deviation > SELECTION_NORM_TOL {
                return Err(Error::NotNormalized {
                    what,
                    deviation,
                    tolerance: SELECTION_NORM_TOL,
                });
            }
        }
        Ok(Self { pre, post, n_particles })
    }

    pub fn pre(&self) -> &ComplexField {
        &self.pre
    }

    pub fn post(&self) -> &ComplexField {
        &self.post
    }

    pub fn n_particles(&self) -> f64 {
        self.n_particles
    }
}

fn check_drive(
    psi: &ComplexField,
    schedule: &FieldSchedule,
    table: TimeTable,
    m: usize,
    units: &UnitsConfig,
) -> Result<()> {
    schedule.validate_nodes(table.n_nodes())?;
    if schedule.grid() != psi.grid() {
        return Err(Error::GridMismatch);
    }
    if m > table.n_steps() {
        return Err(Error::DimensionMismatch {
            what: "time node",
            expected: table.n_steps(),
            found: m,
        });
    }
    check_aliasing(schedule.max_abs(), table.dt(), units)
}

/// Evolve a state prepared at `t = 0` forward to node `m`.
pub fn forward_state(
    psi: &ComplexField,
    schedule: &FieldSchedule,
    table: TimeTable,
    m: usize,
    units: &UnitsConfig,
) -> Result<ComplexField> {
    check_drive(psi, schedule, table, m, units)?;
    let grid = psi.grid();
    let mut state = psi.values().to_vec();
    let mut stepper = SplitStep::new(grid, units, C64::new(0.0, table.dt() / units.hbar()));
    for k in 0..m {
        stepper.advance(&mut state, schedule.slice(k).values(), schedule.slice(k + 1).values());
    }
    Ok(ComplexField::from_values_unchecked(grid, state))
}

/// Evolve a state selected at the final node backward to node `m`: the
/// forward steps from `m` to the end, inverted and applied in reverse.
pub fn backward_state(
    psi: &ComplexField,
    schedule: &FieldSchedule,
    table: TimeTable,
    m: usize,
    units: &UnitsConfig,
) -> Result<ComplexField> {
    check_drive(psi, schedule, table, m, units)?;
    let grid = psi.grid();
    let mut state = psi.values().to_vec();
    let mut stepper = SplitStep::new(grid, units, C64::new(0.0, -table.dt() / units.hbar()));
    for k in (m..table.n_steps()).rev() {
        stepper.advance(&mut state, schedule.slice(k + 1).values(), schedule.slice(k).values());
    }
    Ok(ComplexField::from_values_unchecked(grid, state))
}

/// The complex weak density at one time node, together with the boundary
/// overlap it was conditioned on.
#[derive(Debug, Clone)]
pub struct WeakValueField {
    field: ComplexField,
    overlap: C64,
    n_particles: f64,
}

impl WeakValueField {
    pub fn grid(&self) -> Grid1D {
        self.field.grid()
    }

    pub fn field(&self) -> &ComplexField {
        &self.field
    }

    /// `<psi_f(t)|psi_i(t)>`, constant along the evolution.
    pub fn overlap(&self) -> C64 {
        self.overlap
    }

    pub fn n_particles(&self) -> f64 {
        self.n_particles
    }

    pub fn real_part(&self) -> RealField {
        RealField::from_values_unchecked(
            self.grid(),
            self.field.values().iter().map(|z| z.re).collect(),
        )
    }

    pub fn imag_part(&self) -> RealField {
        RealField::from_values_unchecked(
            self.grid(),
            self.field.values().iter().map(|z| z.im).collect(),
        )
    }

    pub fn integrate(&self) -> C64 {
        self.field.integrate()
    }
}

/// Weak density at node `m` of the schedule.
pub fn weak_density(
    selection: &Selection,
    schedule: &FieldSchedule,
    table: TimeTable,
    m: usize,
    units: &UnitsConfig,
) -> Result<WeakValueField> {
    let fwd = forward_state(selection.pre(), schedule, table, m, units)?;
    let bwd = backward_state(selection.post(), schedule, table, m, units)?;
    let overlap = bwd.inner_product(&fwd)?;
    let overlap_norm = overlap.norm();
    if overlap_norm.is_nan() || overlap_norm <= OVERLAP_FLOOR {
        return Err(Error::OrthogonalPostSelection {
            overlap: overlap_norm,
            floor: OVERLAP_FLOOR,
        });
    }
    let scale = selection.n_particles() / overlap;
    let values: Vec<C64> = fwd
        .values()
        .iter()
        .zip(bwd.values())
        .map(|(i, f)| scale * i * f.conj())
        .collect();
    Ok(WeakValueField {
        field: ComplexField::from_values_unchecked(fwd.grid(), values),
        overlap,
        n_particles: selection.n_particles(),
    })
}

/// Modulus and unwrapped argument of a weak density. The phase is meaningless
/// where the modulus vanishes; those points are masked out and skipped by the
/// unwrapping.
#[derive(Debug, Clone)]
pub struct PolarWeakField {
    modulus: RealField,
    argument: RealField,
    defined: Vec<bool>,
}

impl PolarWeakField {
    pub fn modulus(&self) -> &RealField {
        &self.modulus
    }

    /// Unwrapped phase; 0 at masked points.
    pub fn argument(&self) -> &RealField {
        &self.argument
    }

    pub fn defined(&self) -> &[bool] {
        &self.defined
    }
}

/// Split a weak density into modulus and minimally-jumping unwrapped phase.
pub fn weak_value_decomposition(field: &WeakValueField) -> PolarWeakField {
    let grid = field.grid();
    let values = field.field().values();
    let moduli: Vec<f64> = values.iter().map(|z| z.norm()).collect();
    let peak = moduli.iter().fold(0.0f64, |a, &m| a.max(m));
    let floor = 1e-10 * peak;
    let defined: Vec<bool> = moduli.iter().map(|&m| m > floor).collect();

    let two_pi = 2.0 * std::f64::consts::PI;
    let mut argument = vec![0.0; values.len()];
    let mut prev: Option<f64> = None;
    for (j, z) in values.iter().enumerate() {
        if !defined[j] {
            continue;
        }
        let raw = z.arg();
        let unwrapped = match prev {
            None => raw,
            Some(p) => raw + ((p - raw) / two_pi).round() * two_pi,
        };
        argument[j] = unwrapped;
        prev = Some(unwrapped);
    }
    PolarWeakField {
        modulus: RealField::from_values_unchecked(grid, moduli),
        argument: RealField::from_values_unchecked(grid, argument),
        defined,
    }
}
