//! The whole field loop against an eigen-expansion replica.

use wicklab_core::{
    eigendecompose, energy_from_partition_decay, field_from_density, ground_state_limit,
    propagate_contour, solve_scft, Contour, ExternalPotential, FieldSchedule, FunctionalSpec,
    Grid1D, RealField, ScftConfig, UnitsConfig,
};

fn units() -> UnitsConfig {
    UnitsConfig::default()
}

#[test]
fn bare_well_density_collapses_onto_the_ground_orbital() {
    let grid = Grid1D::new(128, 20.0).unwrap();
    let spec = FunctionalSpec::new(ExternalPotential::Harmonic { omega: 1.0 }, 0.0).unwrap();
    let beta = 16.0;
    let config = ScftConfig::new(Contour::new(beta, 16000).unwrap(), 0.5, 1e-10, 10).unwrap();
    let state = solve_scft(&spec, &config, grid, &units(), 1.0).unwrap();
    assert!(state.converged());

    let w = spec.external().sample(grid, &units()).unwrap();
    let eig = eigendecompose(&w, &units(), 4).unwrap();
    let reference = eig.orbital(0).modulus_squared();
    let err = state.density().l2_diff(&reference).unwrap();
    assert!(err < 1e-6, "density vs |phi_0|^2: {err:e}");

    // the tail of the partial partition sum decays at the ground energy
    let schedule = FieldSchedule::Static(state.field().clone());
    let q0 = RealField::constant(grid, 1.0);
    let table = propagate_contour(&schedule, config.contour(), &q0, &units()).unwrap();
    let e0 = energy_from_partition_decay(&table, 12.0).unwrap();
    assert!(
        (e0 - eig.energies()[0]).abs() < 1e-5,
        "decay rate {e0} vs eigenvalue {}",
        eig.energies()[0]
    );
}

#[test]
fn interacting_fixed_point_agrees_with_an_eigen_route_replica() {
    // replicate the mixing loop with the propagation swapped out for a dense
    // eigen-expansion of exp(-beta H / 2); the two independent routes must
    // land on the same fixed point
    let grid = Grid1D::new(64, 12.0).unwrap();
    let spec = FunctionalSpec::new(ExternalPotential::Harmonic { omega: 1.0 }, 0.6).unwrap();
    let beta = 4.0;
    let n_particles = 2.0;
    let alpha = 0.6;

    let config = ScftConfig::new(Contour::new(beta, 4000).unwrap(), alpha, 1e-11, 300).unwrap();
    let state = solve_scft(&spec, &config, grid, &units(), n_particles).unwrap();
    assert!(state.converged());

    let mut field = spec.external().sample(grid, &units()).unwrap();
    let q0 = RealField::constant(grid, 1.0);
    let mut replica = None;
    for _ in 0..300 {
        let eig = eigendecompose(&field, &units(), 64).unwrap();
        let half = eig.heat_apply(&q0, beta / 2.0).unwrap();
        let weight: Vec<f64> = half.values().iter().map(|v| v * v).collect();
        let total: f64 = weight.iter().sum::<f64>() * grid.spacing();
        let density =
            RealField::new(grid, weight.into_iter().map(|p| p * n_particles / total).collect())
                .unwrap();
        let target = field_from_density(&spec, &density, &units()).unwrap();
        let residual = target.max_abs_diff(&field).unwrap();
        if alpha * residual <= 1e-11 {
            replica = Some(density);
            break;
        }
        field = RealField::new(
            grid,
            field
                .values()
                .iter()
                .zip(target.values())
                .map(|(w, t)| w + alpha * (t - w))
                .collect(),
        )
        .unwrap();
    }
    let replica = replica.expect("eigen-route iteration did not settle");
    let gap = state.density().max_abs_diff(&replica).unwrap();
    assert!(gap < 1e-5, "fixed points disagree by {gap:e}");
}

#[test]
fn contour_ladder_freezes_the_interacting_cloud() {
    let grid = Grid1D::new(128, 14.0).unwrap();
    let spec = FunctionalSpec::new(ExternalPotential::Harmonic { omega: 1.0 }, 0.5).unwrap();
    let config = ScftConfig::new(Contour::new(5.0, 1000).unwrap(), 0.7, 1e-9, 200).unwrap();
    let ladder = ground_state_limit(
        &spec,
        &config,
        &[5.0, 10.0, 20.0],
        grid,
        &units(),
        2.0,
    )
    .unwrap();
    assert!(ladder.all_converged());
    let drifts = ladder.drifts();
    assert!(
        drifts[1] < drifts[0],
        "drift should fall along the ladder: {drifts:?}"
    );
    assert!(drifts[1] < 1e-3, "still far from the cold limit: {}", drifts[1]);
    assert!((ladder.state().density().integrate() - 2.0).abs() < 1e-10);
}
