//! Two-particle interaction kernels and the mean-field operator they induce.
//!
//! A kernel is a d²×d² complex matrix `a` indexed by the pair map
//! (x, y) -> (x-1)·d + (y-1). It enters the dynamics only through the
//! conjugate-linear map
//!
//! ```text
//! A{rho}(x, y) = Σ_{x',y'} a(x,y; x',y') conj(rho(x',y')),
//! ```
//!
//! equivalently `A{rho} = devec(a · vec_dagger(rho))`. Three structural
//! conditions make the induced dynamics well posed:
//!
//! * exchange: a(x,y; x',y') = a(y,x; y',x') (relabeling the two particles),
//! * self-adjointness: a = a^† as a d²×d² matrix (the same matrix read as a
//!   two-site operator in the product basis is an observable),
//! * Hermiticity preservation: A{rho}^† = A{rho} for Hermitian rho, so that
//!   H + A{m} remains a Hamiltonian.
//!
//! The third condition does not follow from the first two; given them, it is
//! equivalent to the matrix having real entries in the product basis (and
//! hence being symmetric). [`validate_kernel`] scans the first two entrywise
//! and probes the third on deterministic random Hermitian inputs. Any kernel
//! also obeys the Hilbert-Schmidt bound ||A{rho}||² ≤ ||rho||²·||a||² checked
//! by [`kernel_bound_check`].

use num_complex::Complex64 as C64;

use crate::noise::NoiseStream;
use crate::ops::{self, CMatrix};
use crate::state::PureState;
use crate::tolerances as tol;
use crate::{Error, Result};

/// Number of random Hermitian probes run by [`validate_kernel`].
const HERMITICITY_PROBES: usize = 8;
/// Fixed seed for those probes; validation must be deterministic.
const PROBE_SEED: u64 = 0x6b65726e;

/// A validated d²×d² interaction kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionKernel {
    dim: usize,
    matrix: CMatrix,
}

/// Outcome of the structural checks on a candidate kernel matrix.
#[derive(Debug, Clone, serde::Serialize)]
pub struct KernelReport {
    /// max |a(x,y;x',y') - a(y,x;y',x')|
    pub exchange_violation: f64,
    /// max |a - a^†|
    pub self_adjoint_violation: f64,
    /// max Hermiticity defect of A{rho} over the random Hermitian probes
    pub probe_hermiticity_violation: f64,
    /// Hilbert-Schmidt norm of the kernel matrix
    pub hs_norm: f64,
    pub passed: bool,
}

/// Runs every structural check without rejecting anything, so callers can
/// report all violations of an invalid kernel at once.
pub fn validate_kernel(dim: usize, matrix: &CMatrix) -> Result<KernelReport> {
    let d2 = dim * dim;
    if matrix.nrows() != d2 || matrix.ncols() != d2 {
        return Err(Error::Dimension {
            context: "kernel matrix must be d²×d²",
            expected: d2,
            got: matrix.nrows(),
        });
    }
    if !ops::is_finite(matrix) {
        return Err(Error::invalid("kernel matrix has non-finite entries"));
    }
    let idx = |x: usize, y: usize| x * dim + y;
    let mut exchange = 0.0f64;
    for x in 0..dim {
        for y in 0..dim {
            for xp in 0..dim {
                for yp in 0..dim {
                    let delta = matrix[(idx(x, y), idx(xp, yp))] - matrix[(idx(y, x), idx(yp, xp))];
                    exchange = exchange.max(delta.norm());
                }
            }
        }
    }
    let self_adjoint = ops::hermiticity_violation(matrix);

    // Probe Hermiticity preservation on deterministic random Hermitian
    // inputs. This is a genuine third requirement, not a consequence of the
    // two scans above: exchange plus self-adjointness still admit complex
    // kernels whose A{rho} picks up an anti-Hermitian part.
    let noise = NoiseStream::new(PROBE_SEED);
    let mut probe_violation = 0.0f64;
    for p in 0..HERMITICITY_PROBES {
        let mut g = ops::zeros(dim);
        let mut draw = 0u64;
        for i in 0..dim {
            for j in 0..dim {
                let re = noise.standard_normal(p as u64, draw);
                let im = noise.standard_normal(p as u64, draw + 1);
                draw += 2;
                g[(i, j)] = C64::new(re, im);
            }
        }
        let h = (&g + &ops::dagger(&g)).mapv(|v| v * 0.5);
        let a_h = apply_kernel_matrix(dim, matrix, &h);
        probe_violation = probe_violation.max(ops::hermiticity_violation(&a_h));
    }

    let passed = exchange <= tol::KERNEL_SYMMETRY
        && self_adjoint <= tol::KERNEL_SYMMETRY
        && probe_violation <= tol::KERNEL_PROBE_HERMITICITY;
    Ok(KernelReport {
        exchange_violation: exchange,
        self_adjoint_violation: self_adjoint,
        probe_hermiticity_violation: probe_violation,
        hs_norm: ops::hs_norm(matrix),
        passed,
    })
}

impl InteractionKernel {
    /// Validates and wraps a kernel matrix; rejects any structural violation.
    pub fn new(dim: usize, matrix: CMatrix) -> Result<Self> {
        let report = validate_kernel(dim, &matrix)?;
        if !report.passed {
            return Err(Error::invalid(format!(
                "kernel rejected: exchange violation {:.3e}, self-adjointness violation {:.3e}, \
                 probe Hermiticity violation {:.3e}",
                report.exchange_violation,
                report.self_adjoint_violation,
                report.probe_hermiticity_violation
            )));
        }
        Ok(Self { dim, matrix })
    }

    /// The kernel that is identically zero: free (uncoupled) dynamics.
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            matrix: ops::zeros(dim * dim),
        }
    }

    /// Qubit kernel diag(1, 0, 0, 1): the projector onto the aligned-pair
    /// subspace span{e1⊗e1, e2⊗e2}. Its mean-field action on a state with
    /// Bloch coordinate z is A{rho} = (1/2) diag(1-z, 1+z).
    pub fn alignment_projector() -> Self {
        let mut m = ops::zeros(4);
        m[(0, 0)] = C64::new(1.0, 0.0);
        m[(3, 3)] = C64::new(1.0, 0.0);
        Self { dim: 2, matrix: m }
    }

    /// Rescales the interaction strength. Real scaling preserves all the
    /// structural conditions.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            matrix: self.matrix.mapv(|v| v * factor),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// ||a||₂, the constant in the mean-field operator bound.
    pub fn hs_norm(&self) -> f64 {
        ops::hs_norm(&self.matrix)
    }
}

fn check_state_dim(dim: usize, rho: &CMatrix) -> Result<()> {
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::Dimension {
            context: "state dimension does not match kernel",
            expected: dim,
            got: rho.nrows(),
        });
    }
    Ok(())
}

fn apply_kernel_matrix(dim: usize, kernel: &CMatrix, rho: &CMatrix) -> CMatrix {
    let w = kernel.dot(&ops::vec_dagger(rho));
    let mut out = ops::zeros(dim);
    for x in 0..dim {
        for y in 0..dim {
            out[(x, y)] = w[x * dim + y];
        }
    }
    out
}

/// Mean-field operator A{rho} via the matrix route devec(a · vec_dagger(rho)).
pub fn apply_kernel(kernel: &InteractionKernel, rho: &CMatrix) -> Result<CMatrix> {
    check_state_dim(kernel.dim, rho)?;
    Ok(apply_kernel_matrix(kernel.dim, &kernel.matrix, rho))
}

/// Mean-field operator evaluated straight from the defining double sum.
///
/// Slower than [`apply_kernel`] and kept as an independent route; the test
/// suites require the two to agree entrywise to [`tol::KERNEL_ROUTE_AGREEMENT`].
pub fn apply_kernel_direct(kernel: &InteractionKernel, rho: &CMatrix) -> Result<CMatrix> {
    check_state_dim(kernel.dim, rho)?;
    let d = kernel.dim;
    let mut out = ops::zeros(d);
    for x in 0..d {
        for y in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for xp in 0..d {
                for yp in 0..d {
                    acc += kernel.matrix[(x * d + y, xp * d + yp)] * rho[(xp, yp)].conj();
                }
            }
            out[(x, y)] = acc;
        }
    }
    Ok(out)
}

/// Evaluates both sides of the Hilbert-Schmidt bound
/// ||A{rho}||² ≤ ||rho||²·||a||², returning (lhs, rhs).
pub fn kernel_bound_check(kernel: &InteractionKernel, rho: &CMatrix) -> Result<(f64, f64)> {
    let a_rho = apply_kernel(kernel, rho)?;
    let lhs = ops::hs_norm(&a_rho).powi(2);
    let rhs = ops::hs_norm(rho).powi(2) * kernel.hs_norm().powi(2);
    Ok((lhs, rhs))
}

/// Plain average of the projectors |psi_l><psi_l| in particle order.
///
/// No normalization is applied, so unnormalized ensembles average to a state
/// with trace equal to the mean squared norm. Summation order is fixed by the
/// slice order to keep results bit-identical under any thread count.
pub fn empirical_state(states: &[PureState]) -> Result<CMatrix> {
    if states.is_empty() {
        return Err(Error::invalid("empirical state of an empty ensemble"));
    }
    let d = states[0].dim();
    let mut acc = ops::zeros(d);
    for s in states {
        if s.dim() != d {
            return Err(Error::Dimension {
                context: "ensemble states must share one dimension",
                expected: d,
                got: s.dim(),
            });
        }
        acc = &acc + &s.density();
    }
    let n = states.len() as f64;
    Ok(acc.mapv(|v| v / n))
}

/// Plain average of density matrices in slice order.
pub fn mean_density(states: &[CMatrix]) -> Result<CMatrix> {
    if states.is_empty() {
        return Err(Error::invalid("empirical state of an empty ensemble"));
    }
    let d = states[0].nrows();
    let mut acc = ops::zeros(d);
    for s in states {
        check_state_dim(d, s)?;
        acc = &acc + s;
    }
    let n = states.len() as f64;
    Ok(acc.mapv(|v| v / n))
}

/// A{(1/N) Σ_l |psi_l><psi_l|}, the frozen drift operator of one ensemble step.
pub fn empirical_mean_field(kernel: &InteractionKernel, states: &[PureState]) -> Result<CMatrix> {
    apply_kernel(kernel, &empirical_state(states)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{dagger, identity, qubit_density, zeros, CMatrix};
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rng: &mut StdRng, d: usize) -> CMatrix {
        Array2::from_shape_fn((d, d), |_| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn random_hermitian(rng: &mut StdRng, d: usize) -> CMatrix {
        let g = random_matrix(rng, d);
        (&g + &dagger(&g)).mapv(|v| v * 0.5)
    }

    // Draws a real symmetric matrix and averages it with its particle-swap
    // conjugate. Real plus symmetric gives self-adjointness and the
    // Hermiticity-preservation condition; the swap average adds exchange
    // symmetry while keeping the first two (the swap is a real orthogonal
    // involution).
    fn random_valid_kernel(rng: &mut StdRng, d: usize) -> InteractionKernel {
        let d2 = d * d;
        let g = Array2::from_shape_fn((d2, d2), |_| rng.gen_range(-1.0f64..1.0));
        let sym = (&g + &g.t()).mapv(|v| v * 0.5);
        let idx = |x: usize, y: usize| x * d + y;
        let mut m = zeros(d2);
        for x in 0..d {
            for y in 0..d {
                for xp in 0..d {
                    for yp in 0..d {
                        let avg =
                            (sym[(idx(x, y), idx(xp, yp))] + sym[(idx(y, x), idx(yp, xp))]) * 0.5;
                        m[(idx(x, y), idx(xp, yp))] = c(avg, 0.0);
                    }
                }
            }
        }
        InteractionKernel::new(d, m).expect("symmetrized kernel must validate")
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn alignment_projector_matches_golden_values() {
        let k = InteractionKernel::alignment_projector();
        for z in [-1.0, 0.0, 0.37, 1.0] {
            let rho = qubit_density(0.3, -0.2, z);
            let a = apply_kernel(&k, &rho).unwrap();
            assert!((a[(0, 0)] - c((1.0 - z) / 2.0, 0.0)).norm() <= tol::EXACT);
            assert!((a[(1, 1)] - c((1.0 + z) / 2.0, 0.0)).norm() <= tol::EXACT);
            assert!(a[(0, 1)].norm() <= tol::EXACT);
            assert!(a[(1, 0)].norm() <= tol::EXACT);
        }
    }

    #[test]
    fn routes_agree_on_random_hermitian_states() {
        let mut rng = StdRng::seed_from_u64(31);
        for d in [2usize, 3, 4] {
            let k = random_valid_kernel(&mut rng, d);
            for _ in 0..20 {
                let rho = random_hermitian(&mut rng, d);
                let a = apply_kernel(&k, &rho).unwrap();
                let b = apply_kernel_direct(&k, &rho).unwrap();
                assert!(max_abs(&(&a - &b)) <= tol::KERNEL_ROUTE_AGREEMENT);
            }
        }
    }

    #[test]
    fn apply_kernel_is_conjugate_linear_and_hermiticity_preserving() {
        let mut rng = StdRng::seed_from_u64(32);
        let k = random_valid_kernel(&mut rng, 3);
        let r1 = random_hermitian(&mut rng, 3);
        let r2 = random_hermitian(&mut rng, 3);
        let sum = apply_kernel(&k, &(&r1 + &r2)).unwrap();
        let parts = &apply_kernel(&k, &r1).unwrap() + &apply_kernel(&k, &r2).unwrap();
        assert!(max_abs(&(&sum - &parts)) < 1e-12);
        // Scaling by i conjugates out: A{i rho} = -i A{rho}.
        let scaled = apply_kernel(&k, &r1.mapv(|v| v * c(0.0, 1.0))).unwrap();
        let expect = apply_kernel(&k, &r1).unwrap().mapv(|v| v * c(0.0, -1.0));
        assert!(max_abs(&(&scaled - &expect)) < 1e-12);
        for _ in 0..20 {
            let rho = random_hermitian(&mut rng, 3);
            let a = apply_kernel(&k, &rho).unwrap();
            assert!(ops::hermiticity_violation(&a) <= tol::KERNEL_PROBE_HERMITICITY);
        }
        let zero = apply_kernel(&k, &zeros(3)).unwrap();
        assert_eq!(max_abs(&zero), 0.0);
    }

    #[test]
    fn validation_accepts_valid_and_rejects_broken_kernels() {
        let k = InteractionKernel::alignment_projector();
        let report = validate_kernel(2, k.matrix()).unwrap();
        assert!(report.passed);
        assert_eq!(report.exchange_violation, 0.0);
        assert_eq!(report.self_adjoint_violation, 0.0);
        assert_relative_eq!(report.hs_norm, 2.0f64.sqrt(), max_relative = 1e-15);

        let zero = InteractionKernel::zero(3);
        assert!(validate_kernel(3, zero.matrix()).unwrap().passed);

        // One asymmetric entry breaks self-adjointness (and its report value).
        let mut broken = k.matrix().clone();
        broken[(0, 1)] = c(0.5, 0.0);
        let report = validate_kernel(2, &broken).unwrap();
        assert!(!report.passed);
        assert!(report.self_adjoint_violation >= 0.5);
        assert!(InteractionKernel::new(2, broken).is_err());

        // Hermitian as a matrix but exchange-asymmetric: a(1,1;1,2) pairs
        // with a(1,1;2,1) under exchange of the two particles.
        let mut exchange_broken = k.matrix().clone();
        exchange_broken[(0, 1)] = c(0.25, 0.0);
        exchange_broken[(1, 0)] = c(0.25, 0.0);
        let report = validate_kernel(2, &exchange_broken).unwrap();
        assert!(!report.passed);
        assert!(report.exchange_violation >= 0.25);

        // Wrong shape and non-finite entries are hard errors.
        assert!(validate_kernel(3, k.matrix()).is_err());
        let mut nan = k.matrix().clone();
        nan[(2, 2)] = c(f64::NAN, 0.0);
        assert!(validate_kernel(2, &nan).is_err());
    }

    #[test]
    fn bound_holds_with_slack_on_random_pairs() {
        let mut rng = StdRng::seed_from_u64(33);
        for d in [2usize, 3] {
            for _ in 0..100 {
                let k = random_valid_kernel(&mut rng, d);
                let rho = random_hermitian(&mut rng, d);
                let (lhs, rhs) = kernel_bound_check(&k, &rho).unwrap();
                assert!(lhs <= rhs + tol::BOUND_SLACK, "lhs {lhs} rhs {rhs}");
            }
        }
        // Golden point: maximally mixed state under the alignment projector.
        let k = InteractionKernel::alignment_projector();
        let half = identity(2).mapv(|v| v * c(0.5, 0.0));
        let (lhs, rhs) = kernel_bound_check(&k, &half).unwrap();
        assert_relative_eq!(lhs, 0.5, max_relative = 1e-14);
        assert_relative_eq!(rhs, 1.0, max_relative = 1e-14);
        let (lhs0, rhs0) = kernel_bound_check(&k, &zeros(2)).unwrap();
        assert_eq!((lhs0, rhs0), (0.0, 0.0));
    }

    #[test]
    fn empirical_state_averages_projectors_in_order() {
        let plus = PureState::qubit_plus();
        let copies = vec![plus.clone(); 5];
        let m = empirical_state(&copies).unwrap();
        assert!(max_abs(&(&m - &plus.density())) < 1e-15);

        let e0 = PureState::basis(2, 0).unwrap();
        let e1 = PureState::basis(2, 1).unwrap();
        let m = empirical_state(&[e0, e1]).unwrap();
        assert!(max_abs(&(&m - &identity(2).mapv(|v| v * c(0.5, 0.0)))) < 1e-15);

        // Mean-field of the empirical state equals the average of per-state
        // mean fields (conjugate linearity over a real-weighted average).
        let mut rng = StdRng::seed_from_u64(34);
        let k = random_valid_kernel(&mut rng, 2);
        let states: Vec<PureState> = (0..7)
            .map(|_| {
                let v = ndarray::Array1::from_shape_fn(2, |_| {
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                PureState::normalized(v).unwrap()
            })
            .collect();
        let direct = empirical_mean_field(&k, &states).unwrap();
        let mut averaged = zeros(2);
        for s in &states {
            averaged = &averaged + &apply_kernel(&k, &s.density()).unwrap();
        }
        averaged.mapv_inplace(|v| v / 7.0);
        assert!(max_abs(&(&direct - &averaged)) < 1e-12);

        assert!(empirical_state(&[]).is_err());
    }

    #[test]
    fn mean_density_matches_empirical_state_on_projectors() {
        let mut rng = StdRng::seed_from_u64(35);
        let states: Vec<PureState> = (0..4)
            .map(|_| {
                let v = ndarray::Array1::from_shape_fn(3, |_| {
                    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                });
                PureState::normalized(v).unwrap()
            })
            .collect();
        let mats: Vec<CMatrix> = states.iter().map(|s| s.density()).collect();
        let a = empirical_state(&states).unwrap();
        let b = mean_density(&mats).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaled_kernels_stay_valid_and_scale_the_mean_field() {
        let k = InteractionKernel::alignment_projector();
        let k2 = k.scaled(0.35);
        assert!(validate_kernel(2, k2.matrix()).unwrap().passed);
        let rho = qubit_density(0.1, 0.2, 0.5);
        let a1 = apply_kernel(&k, &rho).unwrap();
        let a2 = apply_kernel(&k2, &rho).unwrap();
        assert!(max_abs(&(&a2 - &a1.mapv(|v| v * 0.35))) < 1e-15);
    }
}
