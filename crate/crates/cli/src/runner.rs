//! Maps a parsed scenario onto the core solvers and writes the artifacts.

use std::path::Path;

use serde_json::json;
use wicklab_core::{
    eigendecompose, evaluate_energy, fermi_dirac_occupancy, finite_t_density, ground_state_limit,
    propagate_tdks, solve_scft, tilde_occupancy, weak_density, weak_value_decomposition,
    wick_rotation_check, Complex64, ComplexField, Contour, EigenSet, Error, ExternalPotential,
    FieldSchedule, FunctionalSpec, Grid1D, HartreeTerm, OccupancySpectrum, RealField, ScftConfig,
    ScftState, Selection, TdksMode, TimeTable, UnitsConfig,
};

use crate::export::{Cell, OutputSink};
use crate::scenario::{FieldMode, OccupancyKind, PotentialSpec, RunKind, Scenario, SeedSpec};
use crate::CliError;

/// Run one scenario, writing everything into `out_dir`. The manifest is
/// written even when the run ends in a reportable failure (a solver that did
/// not converge, a post-selection orthogonal to the propagated state), so the
/// output directory always says what happened.
pub fn execute(scenario: &Scenario, out_dir: &Path, quiet: bool) -> Result<(), CliError> {
    let grid = Grid1D::new(scenario.grid_points, scenario.grid_length).map_err(CliError::Physics)?;
    let units =
        UnitsConfig::new(scenario.hbar, scenario.mass, scenario.k_b).map_err(CliError::Physics)?;
    let mut sink = OutputSink::new(out_dir, scenario.output_csv, scenario.output_json, quiet)?;

    match scenario.run_kind {
        RunKind::Scft => run_scft(scenario, grid, &units, &mut sink, quiet),
        RunKind::GroundState => run_ground_state(scenario, grid, &units, &mut sink, quiet),
        RunKind::FiniteTemperature => run_finite_temperature(scenario, grid, &units, &mut sink),
        RunKind::Tdks => run_tdks(scenario, grid, &units, &mut sink),
        RunKind::WeakValue => run_weak_value(scenario, grid, &units, &mut sink),
        RunKind::WickCheck => run_wick_check(scenario, grid, &units, &mut sink),
    }
}

fn external_potential(scenario: &Scenario) -> ExternalPotential {
    match &scenario.potential {
        PotentialSpec::Harmonic { omega } => ExternalPotential::Harmonic { omega: *omega },
        PotentialSpec::BoxCosine { depth, wavenumber } => {
            ExternalPotential::BoxCosine { depth: *depth, mode: *wavenumber }
        }
        PotentialSpec::Uniform { value } => ExternalPotential::Uniform { value: *value },
    }
}

fn functional(scenario: &Scenario, grid: Grid1D) -> Result<FunctionalSpec, CliError> {
    let mut spec = FunctionalSpec::new(external_potential(scenario), scenario.contact)
        .map_err(CliError::Physics)?;
    if scenario.hartree_strength != 0.0 {
        let mode = f64::from(scenario.hartree_mode.expect("validated: kernel accompanies strength"));
        let length = grid.length();
        let kernel =
            RealField::from_fn(grid, |r| (2.0 * std::f64::consts::PI * mode * r / length).cos())
                .map_err(CliError::Physics)?;
        let term =
            HartreeTerm::new(kernel, scenario.hartree_strength).map_err(CliError::Physics)?;
        spec = spec.with_hartree(term);
    }
    Ok(spec)
}

/// Materialize state seeds. Eigenstate seeds share one decomposition of the
/// external potential, deep enough for the highest requested index.
fn resolve_seeds(
    seeds: &[SeedSpec],
    scenario: &Scenario,
    grid: Grid1D,
    units: &UnitsConfig,
) -> Result<Vec<ComplexField>, CliError> {
    let deepest = seeds
        .iter()
        .filter_map(|s| match s {
            SeedSpec::Eigenstate(k) => Some(*k),
            _ => None,
        })
        .max();
    let eig: Option<EigenSet> = match deepest {
        Some(k) => {
            let w = external_potential(scenario).sample(grid, units).map_err(CliError::Physics)?;
            Some(eigendecompose(&w, units, k + 1).map_err(CliError::Physics)?)
        }
        None => None,
    };
    seeds
        .iter()
        .map(|seed| match seed {
            SeedSpec::Gaussian { center, width, momentum } => {
                let (c, w, p) = (*center, *width, *momentum);
                ComplexField::from_fn(grid, |r| {
                    let envelope = (-(r - c).powi(2) / (4.0 * w * w)).exp();
                    Complex64::from_polar(envelope, p * r)
                })
                .and_then(|f| f.normalized())
                .map_err(CliError::Physics)
            }
            SeedSpec::Eigenstate(k) => {
                Ok(eig.as_ref().expect("decomposed above").orbital(*k).clone())
            }
            SeedSpec::Uniform => {
                let value = Complex64::new(1.0 / grid.length().sqrt(), 0.0);
                Ok(ComplexField::constant(grid, value))
            }
        })
        .collect()
}

fn convergence_rows(state: &ScftState) -> Vec<Vec<Cell>> {
    state
        .history()
        .iter()
        .map(|rec| {
            vec![Cell::Int(rec.iteration as u64), Cell::Num(rec.residual), Cell::Num(rec.partition)]
        })
        .collect()
}

fn print_history(state: &ScftState, quiet: bool) {
    if quiet {
        return;
    }
    for rec in state.history() {
        println!("iteration {:4}  residual {:.6e}  Q {:.9e}", rec.iteration, rec.residual, rec.partition);
    }
}

fn run_scft(
    scenario: &Scenario,
    grid: Grid1D,
    units: &UnitsConfig,
    sink: &mut OutputSink,
    quiet: bool,
) -> Result<(), CliError> {
    let spec = functional(scenario, grid)?;
    let beta = scenario.beta.expect("validated");
    let n_steps = scenario.contour_steps.expect("validated");
    let contour = Contour::new(beta, n_steps).map_err(CliError::Physics)?;
    let config = ScftConfig::new(
        contour,
        scenario.mixing_alpha,
        scenario.tolerance,
        scenario.max_iterations,
    )
    .map_err(CliError::Physics)?;

    let state =
        solve_scft(&spec, &config, grid, units, scenario.n_particles).map_err(CliError::Physics)?;
    print_history(&state, quiet);

    sink.real_field("density", "density", state.density())?;
    sink.real_field("field", "field", state.field())?;
    sink.table("convergence", &["iteration", "residual", "Q"], &convergence_rows(&state))?;

    let energy = evaluate_energy(&spec, state.density(), units).map_err(CliError::Physics)?;
    let final_residual = state.history().last().map(|r| r.residual);
    let summary = json!({
        "kind": "scft",
        "n_particles": scenario.n_particles,
        "beta": beta,
        "n_steps": n_steps,
        "converged": state.converged(),
        "iterations": state.iterations(),
        "partition": state.partition(),
        "final_residual": final_residual,
        "functional_energy": energy,
    });
    let status = if state.converged() { "ok" } else { "not-converged" };
    sink.manifest(&scenario.canonical(), status, &summary)?;

    if state.converged() {
        Ok(())
    } else {
        Err(CliError::NotConverged {
            iterations: state.iterations(),
            residual: final_residual.unwrap_or(f64::NAN),
        })
    }
}

fn run_ground_state(
    scenario: &Scenario,
    grid: Grid1D,
    units: &UnitsConfig,
    sink: &mut OutputSink,
    quiet: bool,
) -> Result<(), CliError> {
    let spec = functional(scenario, grid)?;
    let ds = scenario.contour_ds.expect("validated");
    let betas = scenario.beta_ladder.clone().expect("validated");
    // The config's contour only supplies the step size; each rung rebuilds
    // its own contour from the requested length.
    let reference = Contour::new(2.0 * ds, 2).map_err(CliError::Physics)?;
    let config = ScftConfig::new(
        reference,
        scenario.mixing_alpha,
        scenario.tolerance,
        scenario.max_iterations,
    )
    .map_err(CliError::Physics)?;

    let limit = ground_state_limit(&spec, &config, &betas, grid, units, scenario.n_particles)
        .map_err(CliError::Physics)?;

    if !quiet {
        for (i, drift) in limit.drifts().iter().enumerate() {
            println!("rung {:2}  beta {:8.3}  density drift {:.6e}", i + 1, limit.betas()[i + 1], drift);
        }
    }

    sink.real_field("density", "density", limit.state().density())?;
    sink.real_field("field", "field", limit.state().field())?;
    let ladder_rows: Vec<Vec<Cell>> = limit
        .drifts()
        .iter()
        .enumerate()
        .map(|(i, drift)| {
            vec![Cell::Int((i + 1) as u64), Cell::Num(limit.betas()[i + 1]), Cell::Num(*drift)]
        })
        .collect();
    sink.table("ladder", &["rung", "beta", "drift_from_previous"], &ladder_rows)?;
    sink.table("convergence", &["iteration", "residual", "Q"], &convergence_rows(limit.state()))?;

    let summary = json!({
        "kind": "ground-state",
        "n_particles": scenario.n_particles,
        "betas": limit.betas(),
        "drifts": limit.drifts(),
        "all_converged": limit.all_converged(),
        "partition": limit.state().partition(),
    });
    let status = if limit.all_converged() { "ok" } else { "not-converged" };
    sink.manifest(&scenario.canonical(), status, &summary)?;

    if limit.all_converged() {
        Ok(())
    } else {
        let last = limit.state().history().last();
        Err(CliError::NotConverged {
            iterations: limit.state().iterations(),
            residual: last.map(|r| r.residual).unwrap_or(f64::NAN),
        })
    }
}

fn run_finite_temperature(
    scenario: &Scenario,
    grid: Grid1D,
    units: &UnitsConfig,
    sink: &mut OutputSink,
) -> Result<(), CliError> {
    let beta = scenario.beta.expect("validated");
    let w = external_potential(scenario).sample(grid, units).map_err(CliError::Physics)?;
    let eig = eigendecompose(&w, units, scenario.n_states).map_err(CliError::Physics)?;

    let occ = match scenario.occupancy {
        OccupancyKind::FermiDirac => {
            fermi_dirac_occupancy(&eig, beta, scenario.n_particles, scenario.spin_degeneracy)
                .map_err(CliError::Physics)?
        }
        OccupancyKind::Tilde => tilde_occupancy(&eig, beta).map_err(CliError::Physics)?,
    };

    let mut density = finite_t_density(&occ, eig.orbitals()).map_err(CliError::Physics)?;
    if let OccupancySpectrum::Tilde { .. } = occ {
        let scaled: Vec<f64> =
            density.values().iter().map(|v| v * scenario.n_particles).collect();
        density = RealField::new(grid, scaled).map_err(CliError::Physics)?;
    }

    sink.real_field("density", "density", &density)?;

    let weights = occ.weights();
    let mut columns = vec!["index", "energy", "occupancy", "weight"];
    let mut rows: Vec<Vec<Cell>> = eig
        .energies()
        .iter()
        .zip(occ.occupancies())
        .zip(&weights)
        .enumerate()
        .map(|(k, ((energy, f), weight))| {
            vec![Cell::Int(k as u64), Cell::Num(*energy), Cell::Num(*f), Cell::Num(*weight)]
        })
        .collect();
    let mut summary = json!({
        "kind": "finite-temperature",
        "beta": beta,
        "n_states": scenario.n_states,
        "occupancy": scenario.occupancy.as_str(),
        "n_particles": scenario.n_particles,
        "total_density": density.integrate(),
    });
    match &occ {
        OccupancySpectrum::FermiDirac { mu, spin_degeneracy, .. } => {
            summary["chemical_potential"] = json!(mu);
            summary["spin_degeneracy"] = json!(spin_degeneracy);
        }
        OccupancySpectrum::Tilde { mu_tilde, .. } => {
            columns.push("mu_tilde");
            for (row, mu) in rows.iter_mut().zip(mu_tilde) {
                row.push(Cell::Num(*mu));
            }
        }
    }
    sink.table("spectrum", &columns, &rows)?;
    sink.manifest(&scenario.canonical(), "ok", &summary)?;
    Ok(())
}

fn run_tdks(
    scenario: &Scenario,
    grid: Grid1D,
    units: &UnitsConfig,
    sink: &mut OutputSink,
) -> Result<(), CliError> {
    let spec = functional(scenario, grid)?;
    let table = TimeTable::new(scenario.t_final.expect("validated"), scenario.time_steps.expect("validated"))
        .map_err(CliError::Physics)?;
    let orbitals = resolve_seeds(&scenario.initial, scenario, grid, units)?;
    let weights = vec![scenario.n_particles / orbitals.len() as f64; orbitals.len()];

    let static_field;
    let mode = match scenario.field_mode {
        FieldMode::Fixed => {
            static_field = FieldSchedule::Static(
                external_potential(scenario).sample(grid, units).map_err(CliError::Physics)?,
            );
            TdksMode::FixedField(&static_field)
        }
        FieldMode::SelfConsistent => TdksMode::SelfConsistent { spec: &spec, weights: &weights },
    };

    let traj = propagate_tdks(&orbitals, table, mode, units, scenario.sample_stride)
        .map_err(CliError::Physics)?;

    let initial_density =
        wicklab_core::density_t(traj.snapshot(0), Some(&weights)).map_err(CliError::Physics)?;
    let final_density = wicklab_core::density_t(traj.final_orbitals(), Some(&weights))
        .map_err(CliError::Physics)?;
    sink.real_field("density_initial", "density", &initial_density)?;
    sink.real_field("density_final", "density", &final_density)?;

    let mut rows = Vec::with_capacity(traj.len());
    for i in 0..traj.len() {
        let density = wicklab_core::density_t(traj.snapshot(i), Some(&weights))
            .map_err(CliError::Physics)?;
        let total = density.integrate();
        let first_moment: f64 = density
            .values()
            .iter()
            .enumerate()
            .map(|(j, n)| grid.coordinate(j) * n)
            .sum::<f64>()
            * grid.spacing();
        rows.push(vec![
            Cell::Num(traj.node_time(i)),
            Cell::Num(total),
            Cell::Num(first_moment / total),
        ]);
    }
    sink.table("observables", &["t", "total_density", "mean_position"], &rows)?;

    let summary = json!({
        "kind": "tdks",
        "t_final": table.t_final(),
        "n_steps": table.n_steps(),
        "dt": table.dt(),
        "mode": scenario.field_mode.as_str(),
        "n_orbitals": orbitals.len(),
        "n_particles": scenario.n_particles,
        "max_norm_drift": traj.max_norm_drift(),
        "nodes_stored": traj.len(),
    });
    sink.manifest(&scenario.canonical(), "ok", &summary)?;
    Ok(())
}

fn run_weak_value(
    scenario: &Scenario,
    grid: Grid1D,
    units: &UnitsConfig,
    sink: &mut OutputSink,
) -> Result<(), CliError> {
    let table = TimeTable::new(scenario.t_final.expect("validated"), scenario.time_steps.expect("validated"))
        .map_err(CliError::Physics)?;
    let seeds = [
        scenario.selection_pre.clone().expect("validated"),
        scenario.selection_post.clone().expect("validated"),
    ];
    let mut states = resolve_seeds(&seeds, scenario, grid, units)?;
    let post = states.pop().expect("two seeds");
    let pre = states.pop().expect("two seeds");
    let selection =
        Selection::new(pre, post, scenario.n_particles).map_err(CliError::Physics)?;
    let schedule = FieldSchedule::Static(
        external_potential(scenario).sample(grid, units).map_err(CliError::Physics)?,
    );

    let eval_t = scenario.eval_t.expect("validated");
    let m = ((eval_t / table.dt()).round() as usize).min(table.n_steps());

    let wv = match weak_density(&selection, &schedule, table, m, units) {
        Ok(wv) => wv,
        Err(err @ Error::OrthogonalPostSelection { .. }) => {
            let summary = json!({
                "kind": "weak-value",
                "node": m,
                "time": table.node(m),
                "failure": err.to_string(),
            });
            sink.manifest(&scenario.canonical(), "failed", &summary)?;
            return Err(CliError::Physics(err));
        }
        Err(err) => return Err(CliError::Physics(err)),
    };

    sink.complex_field("weak_density", wv.field())?;
    let polar = weak_value_decomposition(&wv);
    let polar_rows: Vec<Vec<Cell>> = polar
        .modulus()
        .values()
        .iter()
        .zip(polar.argument().values())
        .zip(polar.defined())
        .enumerate()
        .map(|(i, ((modulus, argument), defined))| {
            vec![
                Cell::Num(grid.coordinate(i)),
                Cell::Num(*modulus),
                Cell::Num(*argument),
                Cell::Int(u64::from(*defined)),
            ]
        })
        .collect();
    sink.table("weak_polar", &["r", "modulus", "argument", "defined"], &polar_rows)?;

    let overlap = wv.overlap();
    let total = wv.integrate();
    let summary = json!({
        "kind": "weak-value",
        "node": m,
        "time": table.node(m),
        "n_particles": scenario.n_particles,
        "overlap_re": overlap.re,
        "overlap_im": overlap.im,
        "total_re": total.re,
        "total_im": total.im,
    });
    sink.manifest(&scenario.canonical(), "ok", &summary)?;
    Ok(())
}

fn run_wick_check(
    scenario: &Scenario,
    grid: Grid1D,
    units: &UnitsConfig,
    sink: &mut OutputSink,
) -> Result<(), CliError> {
    let beta = scenario.beta.expect("validated");
    let n_steps = scenario.contour_steps.expect("validated");
    let contour = Contour::new(beta, n_steps).map_err(CliError::Physics)?;
    let schedule = FieldSchedule::Static(
        external_potential(scenario).sample(grid, units).map_err(CliError::Physics)?,
    );
    let q0 = RealField::constant(grid, 1.0);

    let report = wick_rotation_check(&schedule, contour, &q0, units).map_err(CliError::Physics)?;

    let body = json!({
        "kind": "wick-check",
        "beta": beta,
        "n_steps": n_steps,
        "max_discrepancy": report.max_discrepancy,
        "max_imaginary": report.max_imaginary,
        "nodes_compared": report.nodes_compared,
    });
    sink.report("wick", &body)?;
    sink.manifest(&scenario.canonical(), "ok", &body)?;
    Ok(())
}
