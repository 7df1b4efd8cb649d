//! The spectral Laplacian against a second-order finite-difference stencil.
//!
//! For an analytic periodic function the spectral derivative is exact to
//! rounding, so the difference between the two is the stencil's own O(dx^2)
//! truncation error and must shrink by 4x per grid doubling.

use wicklab_core::{eigendecompose, Grid1D, RealField, UnitsConfig};

fn test_function(r: f64, length: f64) -> f64 {
    let k = 2.0 * std::f64::consts::PI / length;
    (k * r).sin().exp() * (2.0 * k * r).cos()
}

fn stencil_laplacian(f: &RealField) -> Vec<f64> {
    let v = f.values();
    let n = v.len();
    let dx2 = f.grid().spacing().powi(2);
    (0..n)
        .map(|i| (v[(i + 1) % n] - 2.0 * v[i] + v[(i + n - 1) % n]) / dx2)
        .collect()
}

#[test]
fn stencil_converges_to_the_spectral_laplacian() {
    let length = 2.0 * std::f64::consts::PI;
    let mut errors = Vec::new();
    for n in [64, 128, 256] {
        let grid = Grid1D::new(n, length).unwrap();
        let f = RealField::from_fn(grid, |r| test_function(r, length)).unwrap();
        let spectral = f.laplacian().unwrap();
        let stencil = stencil_laplacian(&f);
        let err = spectral
            .values()
            .iter()
            .zip(&stencil)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        errors.push(err);
    }
    assert!(errors[2] < 0.05, "finest-grid disagreement {:.3e}", errors[2]);
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!(
            (3.7..4.3).contains(&ratio),
            "expected O(dx^2) convergence, got ratio {ratio}"
        );
    }
}

#[test]
fn free_spectrum_scales_with_the_units() {
    // E = (hbar^2 / 2m) k^2 for every plane-wave mode
    let grid = Grid1D::new(32, 4.0).unwrap();
    let units = UnitsConfig::new(2.0, 0.5, 1.0).unwrap();
    let w = RealField::constant(grid, 0.0);
    let eig = eigendecompose(&w, &units, 8).unwrap();
    let c = units.kinetic_coefficient();
    assert!((c - 4.0).abs() < 1e-15);

    let k1 = 2.0 * std::f64::consts::PI / 4.0;
    let mut expected = vec![0.0, c * k1 * k1, c * k1 * k1, c * 4.0 * k1 * k1];
    expected.push(c * 4.0 * k1 * k1);
    for (e, x) in eig.energies().iter().zip(&expected) {
        assert!((e - x).abs() < 1e-9, "{e} vs {x}");
    }
}
