//! Simulation engine for nonlinear (mean-field) Lindblad dynamics unraveled
//! into interacting stochastic quantum trajectories.
//!
//! The central object is the nonlinear evolution of a single-particle density
//! matrix `m_t` on a d-dimensional Hilbert space,
//!
//! ```text
//! dm/dt = -i [H + A{m}, m] + L m L^† - (1/2) {L^†L, m},
//! ```
//!
//! where the effective mean-field operator `A{m}` is built from a two-particle
//! interaction kernel `a` (a d²×d² matrix) acting conjugate-linearly on `m`:
//!
//! ```text
//! A{m}(x, y) = Σ_{x',y'} a(x,y; x',y') conj(m(x',y')).
//! ```
//!
//! The crate provides three independent routes to this dynamics, which the
//! test suites play against each other:
//!
//! * [`generators`]: deterministic RK4 reference solutions of the nonlinear
//!   equation itself, and of the linear N-body Lindblad equation whose
//!   single-site marginal converges to `m_t` as N grows.
//! * [`trajectories`]: Euler-Maruyama ensembles of N interacting stochastic
//!   trajectories (normalized pure-state, unnormalized pure-state, and
//!   density-matrix forms) whose empirical state tracks `m_t` with O(1/N)
//!   mean-square error.
//! * [`experiments`]: convergence studies that measure that O(1/N) rate, the
//!   synchronous-coupling distance to i.i.d. mean-field trajectories, and the
//!   marginal-vs-N-body discrepancy, each with a log-log slope fit.
//!
//! All randomness flows through [`noise::NoiseStream`], a counter-based
//! generator that makes every recorded number a pure function of
//! `(seed, particle, step)` regardless of thread count.

pub mod experiments;
pub mod generators;
pub mod kernel;
pub mod noise;
pub mod ops;
mod parallel;
pub mod state;
pub mod tolerances;
pub mod trajectories;

/// Crate-wide error type.
///
/// `Dimension` and `Invalid` signal rejected inputs; `Numerics` signals an
/// aborted run (non-finite values or a violated physicality floor) and carries
/// the step index at which the abort happened.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("{context}: expected dimension {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("numerical failure at step {step}: {what}")]
    Numerics { step: usize, what: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
