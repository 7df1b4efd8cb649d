use thiserror::Error;

/// Crate-wide error type.
///
/// Everything a public operation can reject is spelled out here so callers can
/// match on the failure class instead of parsing strings.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid units: {0} must be positive and finite, got {1}")]
    InvalidUnits(&'static str, f64),

    #[error("invalid parameter: {what} = {value} is out of range")]
    InvalidParameter { what: &'static str, value: f64 },

    #[error("{what}: expected {expected} entries, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("entry {value:e} at index {index} is below the -1e-12 non-negativity floor")]
    NegativeDensity { index: usize, value: f64 },

    #[error("interaction kernel is not even under r -> -r (max asymmetry {0:e})")]
    AsymmetricKernel(f64),

    #[error("{what} is not normalized: |norm - 1| = {deviation:e} exceeds {tolerance:e}")]
    NotNormalized {
        what: &'static str,
        deviation: f64,
        tolerance: f64,
    },

    #[error(
        "step exponent {exponent:.3} exceeds {limit}; the field scale overflows \
         exp() at this step size (rescale w or shorten the step)"
    )]
    ScaleOverflow { exponent: f64, limit: f64 },

    #[error("dt * max|w| = {0:.3} exceeds pi; the potential phase aliases at this step size")]
    PhaseAliasing(f64),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error(
        "spectrum truncated too early: the top retained state (index {retained}, energy \
         {top_energy:.6}) still carries Boltzmann weight {tail_weight:e}; retain states \
         up to energy {needed_energy:.6}"
    )]
    TruncationBound {
        retained: usize,
        top_energy: f64,
        tail_weight: f64,
        needed_energy: f64,
    },

    #[error("need at least {need} states for this operation, got {have}")]
    TooFewStates { have: usize, need: usize },

    #[error("cannot place {n_particles} particles in {capacity} available slots")]
    InfeasibleFilling { n_particles: f64, capacity: f64 },

    #[error("thermal sum {0:e} is below the numerical floor; the Boltzmann weights underflowed")]
    PartitionUnderflow(f64),

    #[error("orthogonal post-selection: |<psi_f|psi_i>| = {overlap:e} is below the {floor:e} floor")]
    OrthogonalPostSelection { overlap: f64, floor: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
