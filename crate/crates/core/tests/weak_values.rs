//! Structural identities of conditioned densities.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use wicklab_core::{
    weak_density, ComplexField, FieldSchedule, Grid1D, RealField, Selection, TimeTable,
    UnitsConfig,
};

fn units() -> UnitsConfig {
    UnitsConfig::default()
}

fn real_gaussian(grid: Grid1D, center: f64, width: f64) -> ComplexField {
    ComplexField::from_fn(grid, |r| {
        C64::new((-((r - center) / (2.0 * width)).powi(2)).exp(), 0.0)
    })
    .unwrap()
    .normalized()
    .unwrap()
}

#[test]
fn swapping_the_boundaries_mirrors_the_field_in_time() {
    // for real boundary states under a real static field, exchanging pre- and
    // post-selection and reflecting the node through the midpoint returns the
    // identical weak density; this only holds if the backward propagation is
    // the exact adjoint of the forward one
    let grid = Grid1D::new(64, 10.0).unwrap();
    let w = RealField::from_fn(grid, |r| 0.7 * (2.0 * PI * r / 10.0).cos()).unwrap();
    let schedule = FieldSchedule::Static(w);
    let table = TimeTable::new(1.2, 120).unwrap();
    let a = real_gaussian(grid, 4.0, 1.0);
    let b = real_gaussian(grid, 6.0, 1.0);

    let forward = Selection::new(a.clone(), b.clone(), 2.0).unwrap();
    let swapped = Selection::new(b, a, 2.0).unwrap();

    for m in [20, 60, 95] {
        let f = weak_density(&forward, &schedule, table, m, &units()).unwrap();
        let g = weak_density(&swapped, &schedule, table, 120 - m, &units()).unwrap();
        let err = f.field().max_abs_diff(g.field()).unwrap();
        assert!(err < 1e-10, "node {m}: mirrored weak density off by {err:e}");
    }
}

#[test]
fn conditioned_total_is_exactly_the_particle_number() {
    let grid = Grid1D::new(64, 10.0).unwrap();
    let w = RealField::from_fn(grid, |r| 0.5 * (2.0 * PI * r / 10.0).sin()).unwrap();
    let schedule = FieldSchedule::Static(w);
    let table = TimeTable::new(2.0, 200).unwrap();
    let selection = Selection::new(
        real_gaussian(grid, 4.0, 1.0),
        real_gaussian(grid, 6.5, 1.2),
        4.0,
    )
    .unwrap();

    for m in [0, 37, 118, 200] {
        let nw = weak_density(&selection, &schedule, table, m, &units()).unwrap();
        let total = nw.integrate();
        assert!(
            (total.re - 4.0).abs() < 1e-10 && total.im.abs() < 1e-10,
            "node {m}: integral {total}"
        );
    }
}

#[test]
fn the_weak_field_feels_future_edits() {
    // the companion of the causality test on ordinary densities: the weak
    // density at node m is conditioned on the final boundary, so a field edit
    // strictly after m must shift it
    let grid = Grid1D::new(64, 10.0).unwrap();
    let base = RealField::from_fn(grid, |r| 0.4 * (2.0 * PI * r / 10.0).cos()).unwrap();
    let n_steps = 100;
    let cut = 55;
    let plain = FieldSchedule::TimeDependent(vec![base.clone(); n_steps + 1]);
    let edited: Vec<RealField> = (0..=n_steps)
        .map(|m| {
            if m > cut {
                RealField::from_fn(grid, |r| {
                    0.4 * (2.0 * PI * r / 10.0).cos() + 0.6 * (4.0 * PI * r / 10.0).sin()
                })
                .unwrap()
            } else {
                base.clone()
            }
        })
        .collect();
    let edited = FieldSchedule::TimeDependent(edited);

    let table = TimeTable::new(1.0, n_steps).unwrap();
    let selection = Selection::new(
        real_gaussian(grid, 4.0, 1.0),
        real_gaussian(grid, 6.0, 1.0),
        1.0,
    )
    .unwrap();

    let before = weak_density(&selection, &plain, table, cut, &units()).unwrap();
    let after = weak_density(&selection, &edited, table, cut, &units()).unwrap();
    let shift = before.field().max_abs_diff(after.field()).unwrap();
    assert!(shift > 1e-6, "future edit left no trace: {shift:e}");
}
