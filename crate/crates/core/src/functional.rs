//! External potentials, interaction functionals, and the density-to-field map.
//!
//! The effective field is the functional derivative of
//!
//! ```text
//! U[n] = integral v_ext n dr + (g/2) integral n^2 dr
//!      + (lambda/2) integral n (K * n) dr
//! ```
//!
//! so `field_from_density` returns `w = v_ext + g n + lambda (K * n)`, with
//! `*` the periodic convolution. The kernel `K` must be even; the convolution
//! itself runs through the FFT.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fourier::Spectral;
use crate::grid::{Grid1D, RealField, UnitsConfig};

/// Density floor: entries below this are rejected as unphysical rather than
/// silently clamped.
pub const DENSITY_FLOOR: f64 = -1e-12;

/// Analytic or tabulated one-body potentials.
#[derive(Debug, Clone, PartialEq)]
pub enum ExternalPotential {
    /// `(m omega^2 / 2) (r - L/2)^2`, centered so the walls of the periodic
    /// box sit in the exponentially dead region.
    Harmonic { omega: f64 },
    /// `depth * cos(2 pi mode r / L)`; `mode` must be an integer so the
    /// potential is commensurate with the box.
    BoxCosine { depth: f64, mode: f64 },
    Uniform { value: f64 },
    Tabulated(RealField),
}

impl ExternalPotential {
    pub fn sample(&self, grid: Grid1D, units: &UnitsConfig) -> Result<RealField> {
        match self {
            Self::Harmonic { omega } => {
                if !omega.is_finite() || *omega <= 0.0 {
                    return Err(Error::InvalidParameter { what: "omega", value: *omega });
                }
                let center = 0.5 * grid.length();
                let k = 0.5 * units.mass() * omega * omega;
                RealField::from_fn(grid, |r| k * (r - center) * (r - center))
            }
            Self::BoxCosine { depth, mode } => {
                if !depth.is_finite() {
                    return Err(Error::InvalidParameter { what: "depth", value: *depth });
                }
                if !mode.is_finite() || (mode - mode.round()).abs() > 1e-9 {
                    return Err(Error::InvalidParameter { what: "mode", value: *mode });
                }
                let k = 2.0 * std::f64::consts::PI * mode.round() / grid.length();
                RealField::from_fn(grid, |r| depth * (k * r).cos())
            }
            Self::Uniform { value } => {
                if !value.is_finite() {
                    return Err(Error::InvalidParameter { what: "value", value: *value });
                }
                Ok(RealField::constant(grid, *value))
            }
            Self::Tabulated(field) => {
                if field.grid() != grid {
                    return Err(Error::GridMismatch);
                }
                Ok(field.clone())
            }
        }
    }
}

/// Extra density-to-field map slotted into the functional (exchange-
/// correlation or Pauli-type terms). Contributes to the field only; it has no
/// energy represented in `evaluate_energy`.
pub type DensityMap = Arc<dyn Fn(&RealField) -> RealField + Send + Sync>;

/// Nonlocal interaction: `lambda * (K * n)` in the field,
/// `(lambda/2) integral n (K * n)` in the energy.
#[derive(Debug, Clone, PartialEq)]
pub struct HartreeTerm {
    kernel: RealField,
    strength: f64,
}

impl HartreeTerm {
    /// The kernel must be even under `r -> -r` on the periodic grid.
    pub fn new(kernel: RealField, strength: f64) -> Result<Self> {
        if !strength.is_finite() {
            return Err(Error::InvalidParameter { what: "hartree strength", value: strength });
        }
        let v = kernel.values();
        let n = v.len();
        let scale = kernel.max_abs().max(1.0);
        let mut asymmetry = 0.0f64;
        for i in 0..n {
            asymmetry = asymmetry.max((v[i] - v[(n - i) % n]).abs());
        }
        if asymmetry > 1e-10 * scale {
            return Err(Error::AsymmetricKernel(asymmetry));
        }
        Ok(Self { kernel, strength })
    }

    pub fn kernel(&self) -> &RealField {
        &self.kernel
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }
}

/// The interaction functional: external potential, contact strength, optional
/// nonlocal kernel, and an optional extra density-to-field slot.
#[derive(Clone)]
pub struct FunctionalSpec {
    external: ExternalPotential,
    contact_strength: f64,
    hartree: Option<HartreeTerm>,
    extra: Option<DensityMap>,
}

impl fmt::Debug for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionalSpec")
            .field("external", &self.external)
            .field("contact_strength", &self.contact_strength)
            .field("hartree", &self.hartree)
            .field("extra", &self.extra.as_ref().map(|_| "<density map>"))
            .finish()
    }
}

impl FunctionalSpec {
    pub fn new(external: ExternalPotential, contact_strength: f64) -> Result<Self> {
        if !contact_strength.is_finite() || contact_strength < 0.0 {
            return Err(Error::InvalidParameter {
                what: "contact_strength",
                value: contact_strength,
            });
        }
        Ok(Self { external, contact_strength, hartree: None, extra: None })
    }

    pub fn with_hartree(mut self, term: HartreeTerm) -> Self {
        self.hartree = Some(term);
        self
    }

    pub fn with_extra_map(mut self, map: DensityMap) -> Self {
        self.extra = Some(map);
        self
    }

    pub fn external(&self) -> &ExternalPotential {
        &self.external
    }

    pub fn contact_strength(&self) -> f64 {
        self.contact_strength
    }

    pub fn hartree(&self) -> Option<&HartreeTerm> {
        self.hartree.as_ref()
    }

    /// Whether the field actually depends on the density.
    pub fn is_interacting(&self) -> bool {
        self.contact_strength != 0.0 || self.hartree.is_some() || self.extra.is_some()
    }
}

fn check_density(n: &RealField) -> Result<()> {
    for (i, &v) in n.values().iter().enumerate() {
        if v < DENSITY_FLOOR {
            return Err(Error::NegativeDensity { index: i, value: v });
        }
    }
    Ok(())
}

/// Periodic convolution `(K * n)(r) = integral K(r - r') n(r') dr'` via FFT.
fn convolve(kernel: &RealField, n: &RealField) -> RealField {
    let grid = n.grid();
    let mut spectral = Spectral::new(grid);
    let mut kbuf: Vec<C64> = kernel.values().iter().map(|&v| C64::new(v, 0.0)).collect();
    let mut nbuf: Vec<C64> = n.values().iter().map(|&v| C64::new(v, 0.0)).collect();
    spectral.forward(&mut kbuf);
    spectral.forward(&mut nbuf);
    for (a, b) in nbuf.iter_mut().zip(&kbuf) {
        *a *= b;
    }
    spectral.inverse(&mut nbuf);
    let dx = grid.spacing();
    RealField::from_values_unchecked(grid, nbuf.into_iter().map(|z| z.re * dx).collect())
}

/// `w = v_ext + g n + lambda (K * n) (+ extra)`, the functional derivative of
/// the energy at density `n`. Densities below the -1e-12 floor are rejected.
pub fn field_from_density(
    spec: &FunctionalSpec,
    n: &RealField,
    units: &UnitsConfig,
) -> Result<RealField> {
    check_density(n)?;
    let grid = n.grid();
    let v_ext = spec.external.sample(grid, units)?;
    let g = spec.contact_strength;

    let mut w: Vec<f64> = v_ext
        .values()
        .iter()
        .zip(n.values())
        .map(|(v, d)| v + g * d)
        .collect();

    if let Some(h) = &spec.hartree {
        if h.kernel.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let conv = convolve(&h.kernel, n);
        for (wi, c) in w.iter_mut().zip(conv.values()) {
            *wi += h.strength * c;
        }
    }
    if let Some(map) = &spec.extra {
        let extra = map(n);
        if extra.grid() != grid {
            return Err(Error::GridMismatch);
        }
        for (wi, e) in w.iter_mut().zip(extra.values()) {
            *wi += e;
        }
    }
    RealField::new(grid, w)
}

/// The energy `U[n]` whose functional derivative `field_from_density`
/// returns. The extra density-map slot carries no energy and is ignored here.
pub fn evaluate_energy(spec: &FunctionalSpec, n: &RealField, units: &UnitsConfig) -> Result<f64> {
    check_density(n)?;
    let grid = n.grid();
    let v_ext = spec.external.sample(grid, units)?;
    let dx = grid.spacing();

    let mut external = 0.0;
    let mut contact = 0.0;
    for (v, d) in v_ext.values().iter().zip(n.values()) {
        external += v * d;
        contact += d * d;
    }
    let mut energy = external * dx + 0.5 * spec.contact_strength * contact * dx;

    if let Some(h) = &spec.hartree {
        if h.kernel.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let conv = convolve(&h.kernel, n);
        let pair: f64 = n
            .values()
            .iter()
            .zip(conv.values())
            .map(|(a, b)| a * b)
            .sum();
        energy += 0.5 * h.strength * pair * dx;
    }
    Ok(energy)
}

/// A field for every node of a contour or time table: either one static slice
/// or one slice per node.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSchedule {
    Static(RealField),
    TimeDependent(Vec<RealField>),
}

impl FieldSchedule {
    pub fn grid(&self) -> Grid1D {
        match self {
            Self::Static(f) => f.grid(),
            Self::TimeDependent(fs) => fs[0].grid(),
        }
    }

    /// The field at node `m`.
    pub fn slice(&self, m: usize) -> &RealField {
        match self {
            Self::Static(f) => f,
            Self::TimeDependent(fs) => &fs[m],
        }
    }

    /// Check the schedule can drive a table with `n_nodes` nodes.
    pub fn validate_nodes(&self, n_nodes: usize) -> Result<()> {
        match self {
            Self::Static(_) => Ok(()),
            Self::TimeDependent(fs) => {
                if fs.is_empty() {
                    return Err(Error::DimensionMismatch {
                        what: "field schedule",
                        expected: n_nodes,
                        found: 0,
                    });
                }
                let grid = fs[0].grid();
                if fs.iter().any(|f| f.grid() != grid) {
                    return Err(Error::GridMismatch);
                }
                if fs.len() != n_nodes {
                    return Err(Error::DimensionMismatch {
                        what: "field schedule",
                        expected: n_nodes,
                        found: fs.len(),
                    });
                }
                Ok(())
            }
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Self::Static(f) => f.min(),
            Self::TimeDependent(fs) => fs.iter().map(|f| f.min()).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Self::Static(f) => f.max_abs(),
            Self::TimeDependent(fs) => fs.iter().map(|f| f.max_abs()).fold(0.0, f64::max),
        }
    }
}
