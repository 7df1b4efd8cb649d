//! Real-time orbital propagation.
//!
//! The same split-step kernel that marches the thermal contour runs here with
//! the step parameter rotated onto the imaginary axis, `z = i dt / hbar`, so
//! each step applies `exp(-i H dt / hbar)` to every orbital. The fixed-field
//! mode walks a prescribed schedule; the self-consistent mode rebuilds the
//! field from the instantaneous density with a midpoint predictor-corrector.
//!
//! `wick_rotation_check` runs this module's own stepping loop with the
//! diffusive `z = ds` and compares it against the contour propagator node by
//! node. The two paths share one kernel, so the discrepancy is exactly zero;
//! anything else means the rotation stopped being a parameter substitution.

use num_complex::Complex64 as C64;

use crate::contour::{propagate_contour, Contour};
use crate::error::{Error, Result};
use crate::functional::{field_from_density, FieldSchedule, FunctionalSpec};
use crate::grid::{ComplexField, Grid1D, RealField, UnitsConfig};
use crate::stepper::SplitStep;

/// Orbital norms may drift this far from 1 before propagation aborts.
pub const NORM_TOL: f64 = 1e-8;

/// Uniform real-time mesh: `t_final` walked in `n_steps` equal steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeTable {
    t_final: f64,
    n_steps: usize,
}

impl TimeTable {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::InvalidParameter { what: "t_final", value: t_final });
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter { what: "n_steps", value: 0.0 });
        }
        Ok(Self { t_final, n_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn node(&self, m: usize) -> f64 {
        self.dt() * m as f64
    }
}

/// How the field driving the orbitals is obtained.
#[derive(Clone, Copy)]
pub enum TdksMode<'a> {
    /// A prescribed field at every time node.
    FixedField(&'a FieldSchedule),
    /// Field rebuilt each step from the weighted orbital density.
    SelfConsistent { spec: &'a FunctionalSpec, weights: &'a [f64] },
}

/// Orbitals sampled along the run, plus the worst norm deviation seen at any
/// step (sampled or not).
#[derive(Debug, Clone)]
pub struct OrbitalTrajectory {
    table: TimeTable,
    nodes: Vec<usize>,
    snapshots: Vec<Vec<ComplexField>>,
    max_norm_drift: f64,
}

impl OrbitalTrajectory {
    pub fn table(&self) -> TimeTable {
        self.table
    }

    pub fn grid(&self) -> Grid1D {
        self.snapshots[0][0].grid()
    }

    pub fn n_orbitals(&self) -> usize {
        self.snapshots[0].len()
    }

    /// Step indices at which snapshots were stored; always starts at 0 and
    /// ends at the final step.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn snapshot(&self, i: usize) -> &[ComplexField] {
        &self.snapshots[i]
    }

    pub fn node_time(&self, i: usize) -> f64 {
        self.table.node(self.nodes[i])
    }

    pub fn final_orbitals(&self) -> &[ComplexField] {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.max_norm_drift
    }
}

fn state_norm(grid: Grid1D, state: &[C64]) -> f64 {
    (state.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing()).sqrt()
}

fn to_fields(grid: Grid1D, states: &[Vec<C64>]) -> Vec<ComplexField> {
    states
        .iter()
        .map(|s| ComplexField::from_values_unchecked(grid, s.clone()))
        .collect()
}

fn weighted_density(grid: Grid1D, states: &[Vec<C64>], weights: &[f64]) -> RealField {
    let mut values = vec![0.0; grid.n_points()];
    for (state, &w) in states.iter().zip(weights) {
        for (v, z) in values.iter_mut().zip(state) {
            *v += w * z.norm_sqr();
        }
    }
    RealField::from_values_unchecked(grid, values)
}

pub(crate) fn check_aliasing(max_abs_w: f64, dt: f64, units: &UnitsConfig) -> Result<()> {
    let phase = dt * max_abs_w / units.hbar();
    if phase > std::f64::consts::PI {
        return Err(Error::PhaseAliasing(phase));
    }
    Ok(())
}

/// The fixed-schedule stepping loop, shared verbatim between real-time
/// propagation and the rotation check.
fn drive_schedule(
    states: &mut [Vec<C64>],
    schedule: &FieldSchedule,
    n_steps: usize,
    stepper: &SplitStep,
    mut on_node: impl FnMut(usize, &[Vec<C64>]) -> Result<()>,
) -> Result<()> {
    for m in 0..n_steps {
        stepper.advance_many(states, schedule.slice(m).values(), schedule.slice(m + 1).values());
        on_node(m + 1, states)?;
    }
    Ok(())
}

/// Evolve the orbitals to `t_final`, storing a snapshot every `sample_stride`
/// steps (the initial and final nodes are always stored).
pub fn propagate_tdks(
    initial: &[ComplexField],
    table: TimeTable,
    mode: TdksMode<'_>,
    units: &UnitsConfig,
    sample_stride: usize,
) -> Result<OrbitalTrajectory> {
    if initial.is_empty() {
        return Err(Error::DimensionMismatch { what: "initial orbitals", expected: 1, found: 0 });
    }
    if sample_stride == 0 {
        return Err(Error::InvalidParameter { what: "sample_stride", value: 0.0 });
    }
    let grid = initial[0].grid();
    for f in initial {
        if f.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let deviation = (f.norm() - 1.0).abs();
        if deviation.is_nan() || deviation > NORM_TOL {
            return Err(Error::NotNormalized {
                what: "initial orbital",
                deviation,
                tolerance: NORM_TOL,
            });
        }
    }
    let dt = table.dt();
    match mode {
        TdksMode::FixedField(schedule) => {
            schedule.validate_nodes(table.n_nodes())?;
            if schedule.grid() != grid {
                return Err(Error::GridMismatch);
            }
            check_aliasing(schedule.max_abs(), dt, units)?;
        }
        TdksMode::SelfConsistent { weights, .. } => {
            if weights.len() != initial.len() {
                return Err(Error::DimensionMismatch {
                    what: "occupancy weights",
                    expected: initial.len(),
                    found: weights.len(),
                });
            }
            if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::InvalidParameter {
                    what: "occupancy weight",
                    value: f64::NAN,
                });
            }
        }
    }

    let z = C64::new(0.0, dt / units.hbar());
    let mut states: Vec<Vec<C64>> = initial.iter().map(|f| f.values().to_vec()).collect();
    let mut nodes = vec![0];
    let mut snapshots = vec![to_fields(grid, &states)];
    let mut max_norm_drift = 0.0f64;

    let mut observe = |node: usize, states: &[Vec<C64>]| -> Result<()> {
        for state in states {
            let deviation = (state_norm(grid, state) - 1.0).abs();
            if deviation.is_nan() || deviation > NORM_TOL {
                return Err(Error::NotNormalized {
                    what: "orbital during propagation",
                    deviation,
                    tolerance: NORM_TOL,
                });
            }
            max_norm_drift = max_norm_drift.max(deviation);
        }
        if node % sample_stride == 0 || node == table.n_steps() {
            nodes.push(node);
            snapshots.push(to_fields(grid, states));
        }
        Ok(())
    };

    match mode {
        TdksMode::FixedField(schedule) => {
            let stepper = SplitStep::new(grid, units, z);
            drive_schedule(&mut states, schedule, table.n_steps(), &stepper, &mut observe)?;
        }
        TdksMode::SelfConsistent { spec, weights } => {
            let full = SplitStep::new(grid, units, z);
            let half = SplitStep::new(grid, units, C64::new(0.0, 0.5 * dt / units.hbar()));
            for m in 0..table.n_steps() {
                let n_now = weighted_density(grid, &states, weights);
                let w_now = field_from_density(spec, &n_now, units)?;
                check_aliasing(w_now.max_abs(), dt, units)?;

                let mut predicted = states.clone();
                half.advance_many(&mut predicted, w_now.values(), w_now.values());
                let n_half = weighted_density(grid, &predicted, weights);
                let w_half = field_from_density(spec, &n_half, units)?;

                full.advance_many(&mut states, w_half.values(), w_half.values());
                observe(m + 1, &states)?;
            }
        }
    }
    Ok(OrbitalTrajectory { table, nodes, snapshots, max_norm_drift })
}

/// Weighted orbital density `n(r) = sum_j w_j |phi_j(r)|^2`; without weights
/// every orbital counts once.
pub fn density_t(orbitals: &[ComplexField], weights: Option<&[f64]>) -> Result<RealField> {
    if orbitals.is_empty() {
        return Err(Error::DimensionMismatch { what: "orbitals", expected: 1, found: 0 });
    }
    let grid = orbitals[0].grid();
    if orbitals.iter().any(|f| f.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    if let Some(ws) = weights {
        if ws.len() != orbitals.len() {
            return Err(Error::DimensionMismatch {
                what: "occupancy weights",
                expected: orbitals.len(),
                found: ws.len(),
            });
        }
        for &w in ws {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParameter { what: "occupancy weight", value: w });
            }
        }
    }
    let mut values = vec![0.0; grid.n_points()];
    for (j, orbital) in orbitals.iter().enumerate() {
        let w = weights.map_or(1.0, |ws| ws[j]);
        for (v, z) in values.iter_mut().zip(orbital.values()) {
            *v += w * z.norm_sqr();
        }
    }
    Ok(RealField::from_values_unchecked(grid, values))
}

/// Node-by-node comparison of the contour propagator against this module's
/// stepping loop run at the diffusive step parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WickReport {
    /// `max_m max_r |q_contour(r, m) - Re q_realtime(r, m)|`.
    pub max_discrepancy: f64,
    /// Largest imaginary part the nominally real state picked up.
    pub max_imaginary: f64,
    pub nodes_compared: usize,
}

/// Propagate `q0` along the contour twice: once through the contour module,
/// once through the real-time driver with `z = ds` substituted for
/// `z = i dt / hbar`. Both run the same kernel, so the report's discrepancy
/// is zero when the rotation really is a parameter substitution.
pub fn wick_rotation_check(
    schedule: &FieldSchedule,
    contour: Contour,
    q0: &RealField,
    units: &UnitsConfig,
) -> Result<WickReport> {
    let table = propagate_contour(schedule, contour, q0, units)?;
    let grid = q0.grid();

    let mut states = vec![q0.values().iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<C64>>()];
    let stepper = SplitStep::new(grid, units, C64::new(contour.ds(), 0.0));
    let mut max_discrepancy = 0.0f64;
    let mut max_imaginary = 0.0f64;
    drive_schedule(
        &mut states,
        schedule,
        contour.n_steps(),
        &stepper,
        |node, states| {
            let slice = table.slice(node);
            for (z, &q) in states[0].iter().zip(slice.values()) {
                max_discrepancy = max_discrepancy.max((z.re - q).abs());
                max_imaginary = max_imaginary.max(z.im.abs());
            }
            Ok(())
        },
    )?;
    Ok(WickReport { max_discrepancy, max_imaginary, nodes_compared: contour.n_steps() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eigendecompose;
    use crate::functional::ExternalPotential;
    use std::f64::consts::PI;

    fn units() -> UnitsConfig {
        UnitsConfig::default()
    }

    fn gaussian(grid: Grid1D, center: f64, width: f64) -> ComplexField {
        ComplexField::from_fn(grid, |r| {
            C64::new((-((r - center) / (2.0 * width)).powi(2)).exp(), 0.0)
        })
        .unwrap()
        .normalized()
        .unwrap()
    }

    #[test]
    fn free_packet_stays_normalized() {
        let grid = Grid1D::new(128, 40.0).unwrap();
        let psi = gaussian(grid, 20.0, 1.5);
        let schedule = FieldSchedule::Static(RealField::constant(grid, 0.0));
        let table = TimeTable::new(5.0, 500).unwrap();
        let traj = propagate_tdks(
            &[psi],
            table,
            TdksMode::FixedField(&schedule),
            &units(),
            50,
        )
        .unwrap();
        assert!(traj.max_norm_drift() < 1e-12);
        assert_eq!(traj.len(), 11);
        assert_eq!(traj.nodes()[0], 0);
        assert_eq!(*traj.nodes().last().unwrap(), 500);
        let n = density_t(traj.final_orbitals(), None).unwrap();
        assert!((n.integrate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenstate_picks_up_only_a_phase() {
        let grid = Grid1D::new(128, 20.0).unwrap();
        let w = ExternalPotential::Harmonic { omega: 1.0 }
            .sample(grid, &units())
            .unwrap();
        let eig = eigendecompose(&w, &units(), 4).unwrap();
        let phi0 = eig.orbital(0).clone();
        let schedule = FieldSchedule::Static(w);
        let table = TimeTable::new(1.0, 1000).unwrap();
        let traj = propagate_tdks(
            std::slice::from_ref(&phi0),
            table,
            TdksMode::FixedField(&schedule),
            &units(),
            1000,
        )
        .unwrap();
        let phase = C64::new(0.0, -eig.energies()[0] * 1.0).exp();
        let expected = ComplexField::from_values_unchecked(
            grid,
            phi0.values().iter().map(|z| z * phase).collect(),
        );
        let err = traj.final_orbitals()[0].max_abs_diff(&expected).unwrap();
        assert!(err < 1e-5, "phase evolution error {err:e}");
        // phi_0 is not an exact eigenvector of the discrete step, so its
        // density wobbles at O(dt^2) rather than staying frozen
        let n0 = density_t(&[phi0], None).unwrap();
        let n1 = density_t(traj.final_orbitals(), None).unwrap();
        assert!(n1.max_abs_diff(&n0).unwrap() < 1e-6);
    }

    #[test]
    fn aliasing_guard_trips_before_stepping() {
        let grid = Grid1D::new(32, 4.0).unwrap();
        let psi = gaussian(grid, 2.0, 0.5);
        let schedule = FieldSchedule::Static(RealField::constant(grid, 4000.0));
        let table = TimeTable::new(1.0, 100).unwrap();
        assert!(matches!(
            propagate_tdks(&[psi], table, TdksMode::FixedField(&schedule), &units(), 1),
            Err(Error::PhaseAliasing(_))
        ));
    }

    #[test]
    fn uniform_interacting_gas_keeps_its_density() {
        let grid = Grid1D::new(64, 8.0).unwrap();
        let v = grid.volume();
        let psi = ComplexField::constant(grid, C64::new((1.0 / v).sqrt(), 0.0));
        let spec = FunctionalSpec::new(ExternalPotential::Uniform { value: 0.0 }, 1.3).unwrap();
        let weights = [2.0];
        let table = TimeTable::new(1.0, 100).unwrap();
        let traj = propagate_tdks(
            std::slice::from_ref(&psi),
            table,
            TdksMode::SelfConsistent { spec: &spec, weights: &weights },
            &units(),
            100,
        )
        .unwrap();
        let n0 = density_t(&[psi], Some(&weights)).unwrap();
        let n1 = density_t(traj.final_orbitals(), Some(&weights)).unwrap();
        assert!(n1.max_abs_diff(&n0).unwrap() < 1e-12);
        assert!((n1.integrate() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_substitution_is_exact() {
        let grid = Grid1D::new(64, 6.0).unwrap();
        let w = RealField::from_fn(grid, |r| {
            (2.0 * PI * r / 6.0).cos() + 0.3 * (4.0 * PI * r / 6.0).sin()
        })
        .unwrap();
        let schedule = FieldSchedule::Static(w);
        let contour = Contour::new(1.0, 200).unwrap();
        let q0 = RealField::constant(grid, 1.0);
        let report = wick_rotation_check(&schedule, contour, &q0, &units()).unwrap();
        assert_eq!(report.nodes_compared, 200);
        assert_eq!(report.max_discrepancy, 0.0, "kernels diverged");
        assert!(report.max_imaginary < 1e-13);
    }

    #[test]
    fn weighted_density_validates_lengths() {
        let grid = Grid1D::new(32, 4.0).unwrap();
        let psi = gaussian(grid, 2.0, 0.5);
        assert!(density_t(std::slice::from_ref(&psi), Some(&[1.0, 2.0])).is_err());
        let n = density_t(&[psi.clone(), psi], Some(&[0.5, 0.25])).unwrap();
        assert!((n.integrate() - 0.75).abs() < 1e-12);
    }
}
