//! Simulation and analysis toolkit for driven-dissipative collective quantum
//! optics.
//!
//! The crate builds open-system models of interacting quantum emitters
//! (optionally coupled to lossy cavities and cascaded sensor modes), solves
//! for steady states, dynamics, spectra, photon correlations, entanglement
//! measures, and Fisher information, and cross-validates the numerics against
//! closed-form analytic reductions.
//!
//! Module map:
//! - [`hilbert`]: tensor-product bookkeeping and operator/state algebra;
//! - [`models`]: canonical system builders (driven dimer, dimer + cavity,
//!   Dicke ensemble, two-level system, Λ-system) and derived parameters;
//! - [`liouville`]: vectorized Liouvillians, steady states, spectral
//!   decompositions, metastability analysis;
//! - [`dynamics`]: time propagation, quantum trajectories, conditional
//!   no-jump evolution;
//! - [`correlators`]: two-time correlators, emission spectra, sensor and
//!   cascaded frequency-resolved statistics, temporal-mode capture,
//!   ring-down observables;
//! - [`entanglement`]: concurrence, (log-)negativity, fidelities, witnesses;
//! - [`metrology`]: classical / Poissonian / spectrum-summed / joint Fisher
//!   information;
//! - [`reductions`]: analytic oracles and effective models.
//!
//! Conventions fixed across the crate:
//! - all rates are expressed in units of the local decay rate γ (γ ≡ 1);
//! - each dissipative channel `(A, B, rate)` contributes
//!   `(rate/2)·(2 A ρ B† − {B†A, ρ})` to the master equation;
//! - vectorization is row-major, with the identity `A ρ B ↔ (A ⊗ Bᵀ) vec ρ`;
//! - subsystem order is emitters first (ascending index), then cavity, then
//!   sensor modes.

pub mod hilbert;
pub mod models;
pub mod liouville;
pub mod dynamics;
pub mod correlators;
pub mod entanglement;
pub mod metrology;
pub mod reductions;

pub use hilbert::{ Operator, SpaceDescriptor, StateMatrix };
pub use models::SystemModel;
pub use liouville::{ SpectralDecomposition, Superoperator };

// Link the system BLAS so ndarray's matrix products use it.
extern crate blas_src;

use num_complex::Complex64 as C64;
use thiserror::Error;

/// Errors produced by any operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid truncation: n_trunc must be >= 1, got {0}")]
    InvalidTruncation(usize),
    #[error("dimension mismatch: operator is {op_dim}, expected {expected}")]
    DimensionMismatch { op_dim: usize, expected: usize },
    #[error("subsystem index {site} out of range for {n_sites} subsystems")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("partial trace: keep set must be a nonempty subset of sites")]
    BadKeepSet,
    #[error("spaces do not match: {0} vs {1} total dimensions")]
    SpaceMismatch(usize, usize),
    #[error("state invariant violated: {0}")]
    InvalidState(String),
    #[error("model invariant violated: {0}")]
    InvalidModel(String),
    #[error("singular inter-emitter distance: k*r12 = 0 (use the Dicke limit)")]
    SingularDistance,
    #[error("mixing angle undefined: J = delta = 0")]
    UndefinedAngle,
    #[error("degenerate steady state: second eigenvalue within tolerance of zero")]
    DegenerateSteadyState,
    #[error("time-dependent channels present; use dynamics::propagate_timedep")]
    TimeDependentChannels,
    #[error("linear algebra backend failure: {0}")]
    Linalg(String),
    #[error("integration failure: {0}")]
    Integration(String),
    #[error("trajectory step refinement failed: jump probability stayed above 0.1")]
    StepRefinement,
    #[error("empty emission: emitter population below 1e-14")]
    EmptyEmission,
    #[error("sensor back-action: halving the coupling changed the result by more than 1%")]
    NonlinearBackaction,
    #[error("cascade efficiency must lie in (0, 1], got {0}")]
    BadEfficiency(f64),
    #[error("herald impossible: herald operator annihilates the state")]
    HeraldImpossible,
    #[error("undefined witness: zero denominator in {0}")]
    UndefinedWitness(String),
    #[error("empty counting distribution")]
    EmptyDistribution,
    #[error("mean photon number must be positive, got {0}")]
    NonpositiveMean(f64),
    #[error("Fock truncation did not converge up to n_trunc = {0}")]
    TruncationNotConverged(usize),
    #[error("{0}")]
    Invalid(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };
