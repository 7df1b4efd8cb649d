//! Diffusive propagation along the thermal contour.
//!
//! `q(r, s)` solves `dq/ds = (hbar^2/2m) lap q - w q` with `q(r, 0) = q0(r)`,
//! marched by the shared split-step kernel at `z = ds`. The adjoint propagator
//! runs the same kernel through the field schedule in reverse order, which
//! makes it the exact transpose of the forward step product; the two-sided
//! overlap
//!
//! ```text
//! Q = (1/V) integral q(r, s) q_adj(r, beta - s) dr
//! ```
//!
//! is then independent of the split point `s` to rounding, schedule or not.

use num_complex::Complex64 as C64;

use crate::eigen::EXP_LIMIT;
use crate::error::{Error, Result};
use crate::functional::FieldSchedule;
use crate::grid::{Grid1D, RealField, UnitsConfig};
use crate::stepper::SplitStep;

/// Discretized contour: total length `beta` walked in `n_steps` equal steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    beta: f64,
    n_steps: usize,
}

impl Contour {
    pub fn new(beta: f64, n_steps: usize) -> Result<Self> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidParameter { what: "beta", value: beta });
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter { what: "n_steps", value: 0.0 });
        }
        Ok(Self { beta, n_steps })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    pub fn ds(&self) -> f64 {
        self.beta / self.n_steps as f64
    }

    /// Contour position of node `m`.
    pub fn node(&self, m: usize) -> f64 {
        self.ds() * m as f64
    }
}

/// Propagator slices at every contour node, `slice(0) = q0` through
/// `slice(n_steps)`.
#[derive(Debug, Clone)]
pub struct ContourTable {
    contour: Contour,
    slices: Vec<RealField>,
}

impl ContourTable {
    pub fn contour(&self) -> Contour {
        self.contour
    }

    pub fn grid(&self) -> Grid1D {
        self.slices[0].grid()
    }

    pub fn slice(&self, m: usize) -> &RealField {
        &self.slices[m]
    }

    pub fn slices(&self) -> &[RealField] {
        &self.slices
    }

    /// Volume-averaged integral of the slice at node `m`.
    pub fn partial_partition(&self, m: usize) -> f64 {
        self.slices[m].integrate() / self.grid().volume()
    }
}

fn node_fields(schedule: &FieldSchedule, n_nodes: usize, reverse: bool) -> Vec<&RealField> {
    (0..n_nodes)
        .map(|m| schedule.slice(if reverse { n_nodes - 1 - m } else { m }))
        .collect()
}

fn check_start(q0: &RealField) -> Result<()> {
    let floor = -1e-12 * q0.max_abs().max(1.0);
    for (i, &v) in q0.values().iter().enumerate() {
        if v < floor {
            return Err(Error::NegativeDensity { index: i, value: v });
        }
    }
    Ok(())
}

fn drive(
    fields: &[&RealField],
    contour: Contour,
    q0: &RealField,
    units: &UnitsConfig,
) -> Result<ContourTable> {
    let grid = q0.grid();
    let mut state: Vec<C64> = q0.values().iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut stepper = SplitStep::new(grid, units, C64::new(contour.ds(), 0.0));
    let mut slices = Vec::with_capacity(contour.n_nodes());
    slices.push(q0.clone());
    for m in 0..contour.n_steps() {
        stepper.advance(&mut state, fields[m].values(), fields[m + 1].values());
        let values: Vec<f64> = state.iter().map(|z| z.re).collect();
        let floor = -1e-12 * values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { what: "contour slice", index: i });
            }
            if v < floor {
                return Err(Error::NegativeDensity { index: i, value: v });
            }
        }
        slices.push(RealField::from_values_unchecked(grid, values));
    }
    Ok(ContourTable { contour, slices })
}

fn validated(
    schedule: &FieldSchedule,
    contour: Contour,
    q0: &RealField,
    units: &UnitsConfig,
) -> Result<()> {
    schedule.validate_nodes(contour.n_nodes())?;
    if schedule.grid() != q0.grid() {
        return Err(Error::GridMismatch);
    }
    check_start(q0)?;
    let min_w = schedule.min();
    if min_w < 0.0 {
        let exponent = -min_w * contour.beta();
        if exponent > EXP_LIMIT {
            return Err(Error::ScaleOverflow { exponent, limit: EXP_LIMIT });
        }
    }
    let _ = units;
    Ok(())
}

/// March `q0` forward along the contour under the field schedule.
pub fn propagate_contour(
    schedule: &FieldSchedule,
    contour: Contour,
    q0: &RealField,
    units: &UnitsConfig,
) -> Result<ContourTable> {
    validated(schedule, contour, q0, units)?;
    let fields = node_fields(schedule, contour.n_nodes(), false);
    drive(&fields, contour, q0, units)
}

/// March the adjoint propagator: same equation, field schedule traversed from
/// the far end of the contour inward. For a static field this coincides with
/// the forward table.
pub fn propagate_contour_adjoint(
    schedule: &FieldSchedule,
    contour: Contour,
    q0: &RealField,
    units: &UnitsConfig,
) -> Result<ContourTable> {
    validated(schedule, contour, q0, units)?;
    let fields = node_fields(schedule, contour.n_nodes(), true);
    drive(&fields, contour, q0, units)
}

fn check_pair(fwd: &ContourTable, adj: &ContourTable, m: usize) -> Result<()> {
    if fwd.grid() != adj.grid() || fwd.contour() != adj.contour() {
        return Err(Error::GridMismatch);
    }
    let n = fwd.contour().n_steps();
    if m > n {
        return Err(Error::DimensionMismatch { what: "contour node", expected: n, found: m });
    }
    Ok(())
}

/// Single-walker partition function from the two-sided overlap at node `m`.
pub fn partition_q(fwd: &ContourTable, adj: &ContourTable, m: usize) -> Result<f64> {
    check_pair(fwd, adj, m)?;
    let n = fwd.contour().n_steps();
    let q = fwd.slice(m).inner_product(adj.slice(n - m))? / fwd.grid().volume();
    if !q.is_finite() || q <= 1e-250 {
        return Err(Error::PartitionUnderflow(q));
    }
    Ok(q)
}

/// Density of `n_particles` independent walkers read off at node `m`:
/// `n(r) = N q(r, m) q_adj(r, beta - m) / integral(...)`, normalized so it
/// integrates to exactly `N`.
pub fn contour_density(
    fwd: &ContourTable,
    adj: &ContourTable,
    m: usize,
    n_particles: f64,
) -> Result<RealField> {
    check_pair(fwd, adj, m)?;
    if !n_particles.is_finite() || n_particles <= 0.0 {
        return Err(Error::InvalidParameter { what: "n_particles", value: n_particles });
    }
    let n = fwd.contour().n_steps();
    let grid = fwd.grid();
    let product: Vec<f64> = fwd
        .slice(m)
        .values()
        .iter()
        .zip(adj.slice(n - m).values())
        .map(|(a, b)| a * b)
        .collect();
    let total: f64 = product.iter().sum::<f64>() * grid.spacing();
    if !total.is_finite() || total <= 1e-250 {
        return Err(Error::PartitionUnderflow(total));
    }
    let scale = n_particles / total;
    RealField::new(grid, product.into_iter().map(|p| p * scale).collect())
}

/// Ground-state energy estimate from the decay of the partial partition sum:
/// `E0 = -ln(Qp(beta)/Qp(s)) / (beta - s)`, read between the node nearest
/// `s_start` and the contour end.
pub fn energy_from_partition_decay(table: &ContourTable, s_start: f64) -> Result<f64> {
    let contour = table.contour();
    if !s_start.is_finite() || s_start < 0.0 || s_start >= contour.beta() {
        return Err(Error::InvalidParameter { what: "s_start", value: s_start });
    }
    let m = ((s_start / contour.ds()).round() as usize).min(contour.n_steps() - 1);
    let q_start = table.partial_partition(m);
    let q_end = table.partial_partition(contour.n_steps());
    if q_start <= 1e-250 || q_end <= 1e-250 {
        return Err(Error::PartitionUnderflow(q_start.min(q_end)));
    }
    let span = contour.beta() - contour.node(m);
    Ok(-(q_end / q_start).ln() / span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eigendecompose;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn units() -> UnitsConfig {
        UnitsConfig::default()
    }

    fn smooth_field(grid: Grid1D, seed: u64, amplitude: f64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = grid.length();
        let coeffs: Vec<(f64, f64, f64)> = (1..=4)
            .map(|m| {
                (
                    m as f64 * 2.0 * PI / l,
                    rng.gen_range(-amplitude..amplitude),
                    rng.gen_range(-amplitude..amplitude),
                )
            })
            .collect();
        RealField::from_fn(grid, |r| {
            coeffs
                .iter()
                .map(|(k, a, b)| a * (k * r).cos() + b * (k * r).sin())
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn free_diffusion_conserves_mass() {
        let grid = Grid1D::new(64, 8.0).unwrap();
        let schedule = FieldSchedule::Static(RealField::constant(grid, 0.0));
        let contour = Contour::new(2.0, 100).unwrap();
        let q0 = RealField::from_fn(grid, |r| 1.0 + 0.5 * (2.0 * PI * r / 8.0).cos()).unwrap();
        let table = propagate_contour(&schedule, contour, &q0, &units()).unwrap();
        let q_init = table.partial_partition(0);
        for m in 0..=100 {
            assert!((table.partial_partition(m) - q_init).abs() < 1e-13);
        }
    }

    #[test]
    fn uniform_field_decays_exactly() {
        let grid = Grid1D::new(32, 5.0).unwrap();
        let schedule = FieldSchedule::Static(RealField::constant(grid, 0.8));
        let contour = Contour::new(3.0, 60).unwrap();
        let q0 = RealField::constant(grid, 1.0);
        let table = propagate_contour(&schedule, contour, &q0, &units()).unwrap();
        for m in [15, 30, 60] {
            let expected = (-0.8 * contour.node(m)).exp();
            assert!(
                (table.partial_partition(m) - expected).abs() < 1e-10,
                "node {m}"
            );
        }
        let e = energy_from_partition_decay(&table, 1.0).unwrap();
        assert!((e - 0.8).abs() < 1e-10);
    }

    #[test]
    fn matches_eigen_heat_kernel() {
        let grid = Grid1D::new(64, 6.0).unwrap();
        let w = smooth_field(grid, 11, 1.0);
        let eig = eigendecompose(&w, &units(), 64).unwrap();
        let q0 = RealField::constant(grid, 1.0);
        let oracle = eig.heat_apply(&q0, 1.0).unwrap();

        let contour = Contour::new(1.0, 2000).unwrap();
        let schedule = FieldSchedule::Static(w);
        let table = propagate_contour(&schedule, contour, &q0, &units()).unwrap();
        let err = table.slice(2000).max_abs_diff(&oracle).unwrap();
        assert!(err < 1e-6, "split-step vs eigen-expansion: {err:e}");
    }

    #[test]
    fn strang_error_is_second_order() {
        let grid = Grid1D::new(64, 6.0).unwrap();
        let w = smooth_field(grid, 23, 2.0);
        let eig = eigendecompose(&w, &units(), 64).unwrap();
        let q0 = RealField::constant(grid, 1.0);
        let oracle = eig.heat_apply(&q0, 1.0).unwrap();
        let schedule = FieldSchedule::Static(w);

        let mut errors = Vec::new();
        for n_steps in [250, 500, 1000] {
            let table = propagate_contour(
                &schedule,
                Contour::new(1.0, n_steps).unwrap(),
                &q0,
                &units(),
            )
            .unwrap();
            errors.push(table.slice(n_steps).max_abs_diff(&oracle).unwrap());
        }
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((3.5..4.5).contains(&ratio), "halving ds gave ratio {ratio}");
        }
    }

    #[test]
    fn two_sided_partition_is_node_independent() {
        let grid = Grid1D::new(32, 5.0).unwrap();
        let contour = Contour::new(1.5, 120).unwrap();
        // genuinely schedule-dependent field: interpolate between two shapes
        let a = smooth_field(grid, 3, 1.0);
        let b = smooth_field(grid, 4, 1.0);
        let slices: Vec<RealField> = (0..=120)
            .map(|m| {
                let t = m as f64 / 120.0;
                RealField::new(
                    grid,
                    a.values()
                        .iter()
                        .zip(b.values())
                        .map(|(x, y)| (1.0 - t) * x + t * y)
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let schedule = FieldSchedule::TimeDependent(slices);
        let q0 = RealField::constant(grid, 1.0);
        let fwd = propagate_contour(&schedule, contour, &q0, &units()).unwrap();
        let adj = propagate_contour_adjoint(&schedule, contour, &q0, &units()).unwrap();
        let reference = partition_q(&fwd, &adj, 0).unwrap();
        for m in [17, 30, 60, 90, 120] {
            let q = partition_q(&fwd, &adj, m).unwrap();
            assert!(
                (q - reference).abs() < 1e-12 * reference.abs(),
                "node {m}: {q} vs {reference}"
            );
        }
    }

    #[test]
    fn density_integrates_to_particle_number() {
        let grid = Grid1D::new(64, 10.0).unwrap();
        let w = RealField::from_fn(grid, |r| 0.5 * (r - 5.0) * (r - 5.0)).unwrap();
        let schedule = FieldSchedule::Static(w);
        let contour = Contour::new(4.0, 400).unwrap();
        let q0 = RealField::constant(grid, 1.0);
        let table = propagate_contour(&schedule, contour, &q0, &units()).unwrap();
        let n = contour_density(&table, &table, 200, 3.0).unwrap();
        assert!((n.integrate() - 3.0).abs() < 1e-12);
        assert!(n.min() >= -1e-12);
    }

    #[test]
    fn deep_well_is_rejected_before_stepping() {
        let grid = Grid1D::new(32, 4.0).unwrap();
        let schedule = FieldSchedule::Static(RealField::constant(grid, -800.0));
        let contour = Contour::new(1.0, 10).unwrap();
        let q0 = RealField::constant(grid, 1.0);
        assert!(matches!(
            propagate_contour(&schedule, contour, &q0, &units()),
            Err(Error::ScaleOverflow { .. })
        ));
    }

    #[test]
    fn schedule_node_count_is_enforced() {
        let grid = Grid1D::new(32, 4.0).unwrap();
        let f = RealField::constant(grid, 0.0);
        let schedule = FieldSchedule::TimeDependent(vec![f.clone(); 10]);
        let contour = Contour::new(1.0, 10).unwrap();
        assert!(matches!(
            propagate_contour(&schedule, contour, &f, &units()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn negative_start_is_rejected() {
        let grid = Grid1D::new(32, 4.0).unwrap();
        let schedule = FieldSchedule::Static(RealField::constant(grid, 0.0));
        let contour = Contour::new(1.0, 10).unwrap();
        let mut vals = vec![1.0; 32];
        vals[5] = -1e-6;
        let q0 = RealField::new(grid, vals).unwrap();
        assert!(matches!(
            propagate_contour(&schedule, contour, &q0, &units()),
            Err(Error::NegativeDensity { index: 5, .. })
        ));
    }
}
