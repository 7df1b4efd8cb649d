//! Self-consistent field iteration.
//!
//! The loop closes the cycle field -> contour propagation -> midpoint density
//! -> functional derivative -> mixed field, with simple linear mixing
//! `w <- w + alpha (w[n] - w)`. Convergence is declared when the applied
//! change `alpha * max|w[n] - w|` drops below the tolerance, and the returned
//! state always holds a mutually consistent (field, density, partition)
//! triple: the one produced by the last propagation, never the mixed field
//! that was about to be tried next.

use crate::contour::{contour_density, partition_q, propagate_contour, Contour};
use crate::error::{Error, Result};
use crate::functional::{field_from_density, FieldSchedule, FunctionalSpec};
use crate::grid::{Grid1D, RealField, UnitsConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScftConfig {
    contour: Contour,
    mixing_alpha: f64,
    tolerance: f64,
    max_iterations: usize,
}

impl ScftConfig {
    /// The contour must have an even number of steps so the density can be
    /// read at the exact midpoint node.
    pub fn new(
        contour: Contour,
        mixing_alpha: f64,
        tolerance: f64,
        max_iterations: usize,
    ) -> Result<Self> {
        if contour.n_steps() % 2 != 0 {
            return Err(Error::InvalidParameter {
                what: "n_steps (must be even)",
                value: contour.n_steps() as f64,
            });
        }
        if !mixing_alpha.is_finite() || mixing_alpha <= 0.0 || mixing_alpha > 1.0 {
            return Err(Error::InvalidParameter { what: "mixing_alpha", value: mixing_alpha });
        }
        if !tolerance.is_finite() || tolerance < 1e-14 {
            return Err(Error::InvalidParameter { what: "tolerance", value: tolerance });
        }
        if max_iterations == 0 {
            return Err(Error::InvalidParameter { what: "max_iterations", value: 0.0 });
        }
        Ok(Self { contour, mixing_alpha, tolerance, max_iterations })
    }

    pub fn contour(&self) -> Contour {
        self.contour
    }

    pub fn mixing_alpha(&self) -> f64 {
        self.mixing_alpha
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
    pub partition: f64,
}

#[derive(Debug, Clone)]
pub struct ScftState {
    field: RealField,
    density: RealField,
    partition: f64,
    converged: bool,
    history: Vec<IterationRecord>,
}

impl ScftState {
    pub fn field(&self) -> &RealField {
        &self.field
    }

    pub fn density(&self) -> &RealField {
        &self.density
    }

    pub fn partition(&self) -> f64 {
        self.partition
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

fn solve_from(
    spec: &FunctionalSpec,
    config: ScftConfig,
    mut field: RealField,
    units: &UnitsConfig,
    n_particles: f64,
) -> Result<ScftState> {
    if !n_particles.is_finite() || n_particles <= 0.0 {
        return Err(Error::InvalidParameter { what: "n_particles", value: n_particles });
    }
    let grid = field.grid();
    let q0 = RealField::constant(grid, 1.0);
    let midpoint = config.contour.n_steps() / 2;
    let mut history = Vec::new();

    for iteration in 0..config.max_iterations {
        let schedule = FieldSchedule::Static(field.clone());
        let table = propagate_contour(&schedule, config.contour, &q0, units)?;
        // the field is static over the contour, so the forward table doubles
        // as the adjoint one
        let partition = partition_q(&table, &table, midpoint)?;
        let density = contour_density(&table, &table, midpoint, n_particles)?;
        let target = field_from_density(spec, &density, units)?;
        let residual = target.max_abs_diff(&field)?;
        history.push(IterationRecord { iteration, residual, partition });

        if config.mixing_alpha * residual <= config.tolerance
            || iteration + 1 == config.max_iterations
        {
            let converged = config.mixing_alpha * residual <= config.tolerance;
            return Ok(ScftState { field, density, partition, converged, history });
        }
        let alpha = config.mixing_alpha;
        let mixed: Vec<f64> = field
            .values()
            .iter()
            .zip(target.values())
            .map(|(w, t)| w + alpha * (t - w))
            .collect();
        field = RealField::new(grid, mixed)?;
    }
    unreachable!("loop returns on the final iteration");
}

/// Run the field iteration starting from the bare external potential.
pub fn solve_scft(
    spec: &FunctionalSpec,
    config: &ScftConfig,
    grid: Grid1D,
    units: &UnitsConfig,
    n_particles: f64,
) -> Result<ScftState> {
    let field = spec.external().sample(grid, units)?;
    solve_from(spec, *config, field, units, n_particles)
}

/// Converged states along an ascending ladder of contour lengths, each rung
/// warm-started from the previous field.
#[derive(Debug, Clone)]
pub struct GroundStateLimit {
    state: ScftState,
    betas: Vec<f64>,
    drifts: Vec<f64>,
    all_converged: bool,
}

impl GroundStateLimit {
    /// Converged state of the longest contour.
    pub fn state(&self) -> &ScftState {
        &self.state
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// `max|n_{k+1} - n_k|` between consecutive rungs.
    pub fn drifts(&self) -> &[f64] {
        &self.drifts
    }

    pub fn all_converged(&self) -> bool {
        self.all_converged
    }
}

/// Walk `betas` from shortest to longest, solving at each rung; the step size
/// is inherited from `config.contour()` and each rung's step count is rounded
/// to the nearest even value. The density drift between consecutive rungs
/// measures how close the longest contour is to the zero-temperature limit.
pub fn ground_state_limit(
    spec: &FunctionalSpec,
    config: &ScftConfig,
    betas: &[f64],
    grid: Grid1D,
    units: &UnitsConfig,
    n_particles: f64,
) -> Result<GroundStateLimit> {
    if betas.len() < 2 {
        return Err(Error::InvalidParameter {
            what: "beta ladder (need at least two rungs)",
            value: betas.len() as f64,
        });
    }
    for pair in betas.windows(2) {
        if !pair[0].is_finite() || pair[0] <= 0.0 || pair[1] <= pair[0] {
            return Err(Error::InvalidParameter {
                what: "beta ladder (must ascend)",
                value: pair[1],
            });
        }
    }
    let ds = config.contour.ds();
    let mut field = spec.external().sample(grid, units)?;
    let mut densities: Vec<RealField> = Vec::with_capacity(betas.len());
    let mut last_state = None;
    let mut all_converged = true;

    for &beta in betas {
        let mut n_steps = ((beta / ds).round() as usize).max(2);
        n_steps += n_steps % 2;
        let rung = ScftConfig { contour: Contour::new(beta, n_steps)?, ..*config };
        let state = solve_from(spec, rung, field.clone(), units, n_particles)?;
        field = state.field().clone();
        all_converged &= state.converged();
        densities.push(state.density().clone());
        last_state = Some(state);
    }
    let drifts = densities
        .windows(2)
        .map(|pair| pair[1].max_abs_diff(&pair[0]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(GroundStateLimit {
        state: last_state.expect("ladder has at least two rungs"),
        betas: betas.to_vec(),
        drifts,
        all_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::ExternalPotential;

    fn units() -> UnitsConfig {
        UnitsConfig::default()
    }

    fn harmonic(g: f64) -> FunctionalSpec {
        FunctionalSpec::new(ExternalPotential::Harmonic { omega: 1.0 }, g).unwrap()
    }

    #[test]
    fn config_validation() {
        let contour = Contour::new(2.0, 100).unwrap();
        assert!(ScftConfig::new(contour, 0.5, 1e-9, 50).is_ok());
        assert!(ScftConfig::new(Contour::new(2.0, 101).unwrap(), 0.5, 1e-9, 50).is_err());
        assert!(ScftConfig::new(contour, 0.0, 1e-9, 50).is_err());
        assert!(ScftConfig::new(contour, 1.1, 1e-9, 50).is_err());
        assert!(ScftConfig::new(contour, 0.5, 1e-15, 50).is_err());
        assert!(ScftConfig::new(contour, 0.5, 1e-9, 0).is_err());
    }

    #[test]
    fn external_only_converges_immediately() {
        let grid = Grid1D::new(64, 12.0).unwrap();
        let config = ScftConfig::new(Contour::new(4.0, 200).unwrap(), 0.5, 1e-10, 50).unwrap();
        let state = solve_scft(&harmonic(0.0), &config, grid, &units(), 1.0).unwrap();
        assert!(state.converged());
        assert_eq!(state.iterations(), 1);
        assert!(state.history()[0].residual < 1e-13);
        assert!((state.density().integrate() - 1.0).abs() < 1e-12);
        assert!(state.partition() > 0.0);
    }

    #[test]
    fn fixed_point_is_idempotent() {
        let grid = Grid1D::new(64, 12.0).unwrap();
        let config = ScftConfig::new(Contour::new(3.0, 300).unwrap(), 0.6, 1e-10, 200).unwrap();
        let spec = harmonic(0.4);
        let state = solve_scft(&spec, &config, grid, &units(), 2.0).unwrap();
        assert!(state.converged(), "first solve ran out of budget");

        let again =
            solve_from(&spec, config, state.field().clone(), &units(), 2.0).unwrap();
        assert!(again.converged());
        assert!(again.iterations() <= 2, "restart took {}", again.iterations());
        assert!(again.density().max_abs_diff(state.density()).unwrap() < 1e-9);
    }

    #[test]
    fn converged_triple_is_self_consistent() {
        let grid = Grid1D::new(64, 12.0).unwrap();
        let config = ScftConfig::new(Contour::new(3.0, 300).unwrap(), 0.6, 1e-10, 200).unwrap();
        let spec = harmonic(0.4);
        let state = solve_scft(&spec, &config, grid, &units(), 2.0).unwrap();
        assert!(state.converged());
        let target = field_from_density(&spec, state.density(), &units()).unwrap();
        let residual = target.max_abs_diff(state.field()).unwrap();
        assert!(residual <= config.tolerance() / config.mixing_alpha() * 1.01);
        // repulsion pushes the cloud outward relative to the bare well
        let bare = solve_scft(&harmonic(0.0), &config, grid, &units(), 2.0).unwrap();
        let peak = state.density().max();
        let bare_peak = bare.density().max();
        assert!(peak < bare_peak, "contact repulsion should flatten the peak");
    }

    #[test]
    fn budget_exhaustion_reports_not_converged() {
        let grid = Grid1D::new(64, 12.0).unwrap();
        let config = ScftConfig::new(Contour::new(3.0, 300).unwrap(), 0.3, 1e-12, 3).unwrap();
        let state = solve_scft(&harmonic(2.0), &config, grid, &units(), 3.0).unwrap();
        assert!(!state.converged());
        assert_eq!(state.iterations(), 3);
        assert!(state.partition().is_finite());
        assert!((state.density().integrate() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ladder_drift_shrinks_toward_ground_state() {
        let grid = Grid1D::new(64, 12.0).unwrap();
        let config = ScftConfig::new(Contour::new(2.0, 100).unwrap(), 0.5, 1e-9, 100).unwrap();
        let ladder = ground_state_limit(
            &harmonic(0.0),
            &config,
            &[2.0, 4.0, 8.0],
            grid,
            &units(),
            1.0,
        )
        .unwrap();
        assert!(ladder.all_converged());
        assert_eq!(ladder.drifts().len(), 2);
        assert!(ladder.drifts()[1] < ladder.drifts()[0]);
        assert!(ladder.state().converged());
    }

    #[test]
    fn ladder_must_ascend() {
        let grid = Grid1D::new(64, 12.0).unwrap();
        let config = ScftConfig::new(Contour::new(2.0, 100).unwrap(), 0.5, 1e-9, 100).unwrap();
        assert!(ground_state_limit(&harmonic(0.0), &config, &[4.0], grid, &units(), 1.0).is_err());
        assert!(
            ground_state_limit(&harmonic(0.0), &config, &[4.0, 2.0], grid, &units(), 1.0).is_err()
        );
    }
}
