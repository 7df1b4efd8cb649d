//! 1D periodic grids and the scalar fields living on them.
//!
//! The box `[0, L)` is sampled at `n_points` uniform sites `r_i = i L / n`.
//! With periodic wrap the midpoint and trapezoid quadratures coincide, so
//! `integrate` is a plain Riemann sum, and derivatives are Fourier
//! multipliers: `laplacian` transforms, scales by `-k^2` and transforms back,
//! which is exact for band-limited data.
//!
//! `n_points` is restricted to powers of two (>= 8) so every FFT hits the
//! radix-2 fast path and spectral ops stay cheap enough to sit inside
//! propagation loops.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fourier::Spectral;

/// Uniform periodic grid over `[0, length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    n_points: usize,
    length: f64,
}

impl Grid1D {
    pub fn new(n_points: usize, length: f64) -> Result<Self> {
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::InvalidGrid(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { n_points, length })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    /// Box volume (in 1D, the length).
    pub fn volume(&self) -> f64 {
        self.length
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn coordinates(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.coordinate(i))
    }

    /// Angular wavenumber of FFT bin `i` in standard (unshifted) order.
    pub fn wavenumber(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_points);
        let n = self.n_points as i64;
        let m = i as i64;
        let folded = if m <= n / 2 { m } else { m - n };
        2.0 * PI * folded as f64 / self.length
    }
}

/// Physical constants entering the kinetic operator and thermal weights.
///
/// Natural units (`hbar = m = k_B = 1`) are the default; every constant can be
/// overridden for dimensional runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitsConfig {
    hbar: f64,
    mass: f64,
    k_b: f64,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0, k_b: 1.0 }
    }
}

impl UnitsConfig {
    pub fn new(hbar: f64, mass: f64, k_b: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("mass", mass), ("k_b", k_b)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidUnits(name, v));
            }
        }
        Ok(Self { hbar, mass, k_b })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn k_b(&self) -> f64 {
        self.k_b
    }

    /// `hbar^2 / 2m`, the prefactor of the Laplacian in the Hamiltonian.
    pub fn kinetic_coefficient(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.mass)
    }
}

fn check_finite_real(what: &'static str, values: &[f64]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { what, index: i });
        }
    }
    Ok(())
}

fn check_finite_complex(what: &'static str, values: &[C64]) -> Result<()> {
    for (i, v) in values.iter().enumerate() {
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::NonFinite { what, index: i });
        }
    }
    Ok(())
}

fn check_len(grid: &Grid1D, what: &'static str, len: usize) -> Result<()> {
    if len != grid.n_points() {
        return Err(Error::DimensionMismatch {
            what,
            expected: grid.n_points(),
            found: len,
        });
    }
    Ok(())
}

/// Real scalar samples on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid1D,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, "real field", values.len())?;
        check_finite_real("real field", &values)?;
        Ok(Self { grid, values })
    }

    /// Uniform field. Panics on a non-finite value; use [`RealField::new`]
    /// for data that needs validation.
    pub fn constant(grid: Grid1D, value: f64) -> Self {
        assert!(value.is_finite(), "constant field value must be finite");
        Self { grid, values: vec![value; grid.n_points()] }
    }

    /// Sample `f` at every grid coordinate.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.coordinates().map(f).collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_values_unchecked(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
    }

    /// Max-norm distance to another field on the same grid.
    pub fn max_abs_diff(&self, other: &RealField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs())))
    }

    /// `sqrt(integral (f - g)^2 dr)`.
    pub fn l2_diff(&self, other: &RealField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let dx = self.grid.spacing();
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok((sum * dx).sqrt())
    }

    /// Periodic Riemann sum `sum_i f_i dx`.
    pub fn integrate(&self) -> f64 {
        let sum: f64 = self.values.iter().sum();
        sum * self.grid.spacing()
    }

    /// `integral f g dr` on matching grids.
    pub fn inner_product(&self, other: &RealField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let dx = self.grid.spacing();
        let sum: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(sum * dx)
    }

    /// Spectral Laplacian: FFT, scale by `-k^2`, inverse FFT.
    pub fn laplacian(&self) -> Result<RealField> {
        check_finite_real("laplacian input", &self.values)?;
        let mut spectral = Spectral::new(self.grid);
        let mut buf: Vec<C64> = self.values.iter().map(|&v| C64::new(v, 0.0)).collect();
        spectral.scale_by_neg_k_sq(&mut buf);
        Ok(Self::from_values_unchecked(
            self.grid,
            buf.into_iter().map(|z| z.re).collect(),
        ))
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        }
    }
}

/// Complex scalar samples on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid1D,
    values: Vec<C64>,
}

impl ComplexField {
    pub fn new(grid: Grid1D, values: Vec<C64>) -> Result<Self> {
        check_len(&grid, "complex field", values.len())?;
        check_finite_complex("complex field", &values)?;
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid1D, value: C64) -> Self {
        assert!(
            value.re.is_finite() && value.im.is_finite(),
            "constant field value must be finite"
        );
        Self { grid, values: vec![value; grid.n_points()] }
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> C64) -> Result<Self> {
        let values: Vec<C64> = grid.coordinates().map(f).collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_values_unchecked(grid: Grid1D, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, values }
    }

    pub fn grid(&self) -> Grid1D {
        self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn integrate(&self) -> C64 {
        let sum: C64 = self.values.iter().sum();
        sum * self.grid.spacing()
    }

    /// `integral conj(self) other dr`; conjugate-linear in `self`.
    pub fn inner_product(&self, other: &ComplexField) -> Result<C64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let dx = self.grid.spacing();
        let sum: C64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(sum * dx)
    }

    /// `sqrt(integral |psi|^2 dr)`.
    pub fn norm(&self) -> f64 {
        let dx = self.grid.spacing();
        let sum: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        (sum * dx).sqrt()
    }

    /// Rescale to unit norm; rejects fields with numerically zero norm.
    pub fn normalized(&self) -> Result<ComplexField> {
        let n = self.norm();
        if n < 1e-14 {
            return Err(Error::NotNormalized {
                what: "field",
                deviation: 1.0,
                tolerance: 1e-14,
            });
        }
        let inv = 1.0 / n;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z * inv).collect(),
        })
    }

    /// Pointwise `|psi|^2` as a real field.
    pub fn modulus_squared(&self) -> RealField {
        RealField::from_values_unchecked(
            self.grid,
            self.values.iter().map(|z| z.norm_sqr()).collect(),
        )
    }

    pub fn conj(&self) -> ComplexField {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).norm())))
    }

    pub fn laplacian(&self) -> Result<ComplexField> {
        check_finite_complex("laplacian input", &self.values)?;
        let mut spectral = Spectral::new(self.grid);
        let mut buf = self.values.clone();
        spectral.scale_by_neg_k_sq(&mut buf);
        Ok(Self::from_values_unchecked(self.grid, buf))
    }
}
