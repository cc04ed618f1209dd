//! Numeric tolerances used by library checks and pinned by the test suites.
//!
//! Everything that gates a validation or an assertion lives here so a change
//! is visible in one diff. Values fall into three bands: machine-precision
//! identities (1e-15 to 1e-12), accumulated floating-point error over a long
//! run (1e-10 to 1e-6), and statistical bands for Monte Carlo estimates.

/// Entrywise agreement for algebraic identities evaluated in one or two
/// floating-point operations (golden kernel values, exact cancellations).
pub const EXACT: f64 = 1e-15;

/// Agreement between the matrix route devec(a · vec_dagger(rho)) and the
/// direct double-sum evaluation of the mean-field operator. Both routes sum
/// d² products per entry in different orders.
pub const KERNEL_ROUTE_AGREEMENT: f64 = 1e-13;

/// Entrywise bound for the two structural kernel symmetries
/// a(x,y;x',y') = a(y,x;y',x') and a = a^†. Violations above this reject the
/// kernel outright.
pub const KERNEL_SYMMETRY: f64 = 1e-12;

/// Hermiticity of A{rho} on random Hermitian probes during kernel validation.
/// Looser than the structural checks because it stacks d² multiplications.
pub const KERNEL_PROBE_HERMITICITY: f64 = 1e-10;

/// Additive slack when asserting the operator bound
/// ||A{rho}||² ≤ ||rho||² ||a||² on random inputs.
pub const BOUND_SLACK: f64 = 1e-10;

/// Hermiticity required of Hamiltonians and initial density matrices.
pub const HERMITIAN_INPUT: f64 = 1e-12;

/// Positivity floor for initial density matrices (smallest eigenvalue).
pub const INITIAL_EIG_FLOOR: f64 = -1e-10;

/// Trace drift allowed in a deterministic reference solution over the whole
/// integration window.
pub const REFERENCE_TRACE: f64 = 1e-8;

/// Hermiticity drift allowed in a deterministic reference solution.
pub const REFERENCE_HERMITICITY: f64 = 1e-10;

/// Eigenvalue floor for reference solutions; RK4 keeps states positive up to
/// integrator error, so anything below this is recorded as a positivity
/// breach in the physicality report.
pub const REFERENCE_EIG_FLOOR: f64 = -1e-6;

/// Eigenvalue level at which a reference solve gives up. Fixed-step
/// integration can transiently dip slightly negative without invalidating
/// the run, so breaches between the floor and this level warn rather than
/// abort.
pub const REFERENCE_EIG_ABORT: f64 = -1e-4;

/// Unit-norm drift allowed on a renormalized trajectory state (a handful of
/// ulps from the square root and division).
pub const RENORMALIZED_UNIT: f64 = 1e-14;

/// Trace magnitude below which a density-mode renormalization is treated as
/// a collapsed state rather than divided through.
pub const TRACE_UNDERFLOW: f64 = 1e-9;

/// Hermiticity/trace agreement for empirical ensemble states built as plain
/// averages of projectors.
pub const EMPIRICAL_STATE: f64 = 1e-12;

/// Hilbert-Schmidt distance allowed between the empirical mean of 1e4
/// mean-field trajectories and the deterministic reference at T = 1
/// (CLT width ~ 3/sqrt(M) plus the O(dt) Euler bias band).
pub const MEAN_CONSISTENCY: f64 = 0.05;

/// |mean| bound for 1e6 standard-normal draws (4.5 sigma ~ 0.0045, padded).
pub const NOISE_MEAN: f64 = 0.01;

/// |variance - 1| bound for 1e6 standard-normal draws.
pub const NOISE_VARIANCE: f64 = 0.02;
