//! Dense complex-matrix primitives shared by every other module.
//!
//! Conventions pinned here and relied on everywhere else:
//!
//! * Basis: computational basis e_1, ..., e_d with `sigma_z() = diag(1, -1)`
//!   at d = 2. Code indices are 0-based; the math notation (x, y) is 1-based.
//! * Flattening: the index map (x, y) -> (x-1)·d + (y-1) is the single source
//!   of truth for turning a matrix entry into a vector slot, for row-major
//!   entry order in emitted files, and for the two-site index in [`kron`].
//! * [`vec_dagger`] stacks conj(m(x,y)) in that order; [`devec`] is the plain
//!   (non-conjugating) inverse scan, so `devec(vec_dagger(m))` is the
//!   entrywise conjugate of `m` (equivalently m^T when m is Hermitian).
//! * Bloch coordinates at d = 2 are defined by the parametrization
//!   rho = (1/2) [[1-z, x-iy], [x+iy, 1+z]], i.e. z = rho(2,2) - rho(1,1).
//!   This keeps the interaction-kernel worked example exactly reproducible:
//!   the alignment-projector kernel sends rho to (1/2) diag(1-z, 1+z).

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

/// d x d identity.
pub fn identity(d: usize) -> CMatrix {
    Array2::from_diag_elem(d, C64::new(1.0, 0.0))
}

/// d x d zero matrix.
pub fn zeros(d: usize) -> CMatrix {
    Array2::zeros((d, d))
}

pub fn sigma_x() -> CMatrix {
    ndarray::array![
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
    ]
}

pub fn sigma_y() -> CMatrix {
    ndarray::array![
        [C64::new(0.0, 0.0), C64::new(0.0, -1.0)],
        [C64::new(0.0, 1.0), C64::new(0.0, 0.0)]
    ]
}

pub fn sigma_z() -> CMatrix {
    ndarray::array![
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]
    ]
}

/// Lowering operator [[0, 1], [0, 0]]: maps e_2 to e_1, annihilates e_1.
pub fn sigma_minus() -> CMatrix {
    ndarray::array![
        [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        [C64::new(0.0, 0.0), C64::new(0.0, 0.0)]
    ]
}

/// Conjugate transpose.
pub fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|v| v.conj())
}

/// [a, b] = ab - ba.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.dot(b) - b.dot(a)
}

/// {a, b} = ab + ba.
pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.dot(b) + b.dot(a)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diag().sum()
}

/// Hilbert-Schmidt inner product tr(a^† b).
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    // tr(a^† b) = sum_ij conj(a_ij) b_ij, no intermediate product needed.
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Euclidean norm of a state vector.
pub fn vector_norm(v: &CVector) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// <psi| op |psi>. Callers pass a normalized psi when they mean an average.
pub fn expectation(op: &CMatrix, psi: &CVector) -> C64 {
    let opv = op.dot(psi);
    psi.iter().zip(opv.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Rank-one projector |psi><psi| (no normalization applied).
pub fn density_from_pure(psi: &CVector) -> CMatrix {
    let d = psi.len();
    let mut out = Array2::zeros((d, d));
    for (i, a) in psi.iter().enumerate() {
        for (j, b) in psi.iter().enumerate() {
            out[(i, j)] = a * b.conj();
        }
    }
    out
}

/// True when every entry is finite (no NaN or infinity in either part).
pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

/// Largest entrywise deviation from self-adjointness, max |m - m^†|.
pub fn hermiticity_violation(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Stacks conj(m(x, y)) into slot (x-1)·d + (y-1), scanning rows first.
///
/// For Hermitian m this equals the row-major scan of m^T; at d = 2 a
/// Hermitian gamma flattens to (g11, g21, g12, g22).
pub fn vec_dagger(m: &CMatrix) -> CVector {
    let d = m.nrows();
    let mut out = Array1::zeros(d * d);
    for x in 0..d {
        for y in 0..d {
            out[x * d + y] = m[(x, y)].conj();
        }
    }
    out
}

/// Inverse scan of the flattening: slot (x-1)·d + (y-1) becomes entry (x, y).
/// No conjugation is applied. Errors unless the length is a perfect square.
pub fn devec(v: &CVector) -> Result<CMatrix> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::Dimension {
            context: "devec: length is not a perfect square",
            expected: d * d,
            got: n,
        });
    }
    let mut out = Array2::zeros((d, d));
    for x in 0..d {
        for y in 0..d {
            out[(x, y)] = v[x * d + y];
        }
    }
    Ok(out)
}

/// Kronecker product; the left factor owns the most significant index digit.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

fn check_site(context: &'static str, site: usize, n_sites: usize) -> Result<()> {
    if site >= n_sites {
        return Err(Error::Dimension {
            context,
            expected: n_sites,
            got: site,
        });
    }
    Ok(())
}

/// Site `site` (0-based) of `n_sites` d-dimensional factors carries `op`;
/// every other factor carries the identity. Site 0 is the leftmost factor.
pub fn embed_single(op: &CMatrix, site: usize, n_sites: usize) -> Result<CMatrix> {
    check_site("embed_single: site out of range", site, n_sites)?;
    let d = op.nrows();
    let dim = d.pow(n_sites as u32);
    let right = d.pow((n_sites - 1 - site) as u32);
    let mut out = Array2::zeros((dim, dim));
    // Row index decomposes as (lead, i, tail) with i the digit at `site`.
    for lead in 0..dim / (d * right) {
        for i in 0..d {
            for j in 0..d {
                let v = op[(i, j)];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                for tail in 0..right {
                    let row = (lead * d + i) * right + tail;
                    let col = (lead * d + j) * right + tail;
                    out[(row, col)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Embeds a two-site operator (d²×d², first tensor slot = `site_a`, second =
/// `site_b`) into `n_sites` factors. The sites must be distinct.
pub fn embed_pair(op: &CMatrix, site_a: usize, site_b: usize, n_sites: usize) -> Result<CMatrix> {
    check_site("embed_pair: first site out of range", site_a, n_sites)?;
    check_site("embed_pair: second site out of range", site_b, n_sites)?;
    if site_a == site_b {
        return Err(Error::invalid("embed_pair: sites must be distinct"));
    }
    let d2 = op.nrows();
    let d = (d2 as f64).sqrt().round() as usize;
    if d * d != d2 {
        return Err(Error::Dimension {
            context: "embed_pair: operator is not d²×d²",
            expected: d * d,
            got: d2,
        });
    }
    let dim = d.pow(n_sites as u32);
    let mut out = Array2::zeros((dim, dim));
    let digit =
        |index: usize, site: usize| -> usize { index / d.pow((n_sites - 1 - site) as u32) % d };
    let stride_a = d.pow((n_sites - 1 - site_a) as u32);
    let stride_b = d.pow((n_sites - 1 - site_b) as u32);
    for row in 0..dim {
        let ia = digit(row, site_a);
        let ib = digit(row, site_b);
        // Columns agree with the row on every site except a and b.
        let base = row - ia * stride_a - ib * stride_b;
        for ja in 0..d {
            for jb in 0..d {
                let v = op[(ia * d + ib, ja * d + jb)];
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                out[(row, base + ja * stride_a + jb * stride_b)] = v;
            }
        }
    }
    Ok(out)
}

/// Traces out every site except `keep` from a state on d^n dimensions,
/// returning the d x d marginal.
pub fn partial_trace(rho: &CMatrix, d: usize, n_sites: usize, keep: usize) -> Result<CMatrix> {
    check_site("partial_trace: kept site out of range", keep, n_sites)?;
    let dim = d.pow(n_sites as u32);
    if rho.nrows() != dim || rho.ncols() != dim {
        return Err(Error::Dimension {
            context: "partial_trace: state size is not d^n",
            expected: dim,
            got: rho.nrows(),
        });
    }
    let right = d.pow((n_sites - 1 - keep) as u32);
    let left = dim / (d * right);
    let mut out = zeros(d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for lead in 0..left {
                for tail in 0..right {
                    let row = (lead * d + i) * right + tail;
                    let col = (lead * d + j) * right + tail;
                    acc += rho[(row, col)];
                }
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Works through the real symmetric embedding [[Re, -Im], [Im, Re]], whose
/// spectrum is that of the input with every eigenvalue doubled. Pure Rust,
/// no LAPACK, happily compiles for wasm.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let d = m.nrows();
    let mut real = nalgebra::DMatrix::<f64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let v = m[(i, j)];
            real[(i, j)] = v.re;
            real[(i + d, j + d)] = v.re;
            real[(i + d, j)] = v.im;
            real[(i, j + d)] = -v.im;
        }
    }
    let mut eig: Vec<f64> = real.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    // Each eigenvalue appears twice; keep one representative per pair.
    eig.into_iter().step_by(2).collect()
}

/// Smallest eigenvalue of a Hermitian matrix (used for positivity floors).
pub fn min_eigenvalue_hermitian(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(f64::NAN)
}

/// Re tr(m²) for Hermitian m; equals 1 exactly on pure states.
pub fn purity(m: &CMatrix) -> f64 {
    let mut acc = 0.0;
    let d = m.nrows();
    for i in 0..d {
        for j in 0..d {
            acc += (m[(i, j)] * m[(j, i)]).re;
        }
    }
    acc
}

/// Bloch coordinates (x, y, z) of a qubit state, using the parametrization
/// rho = (1/2)[[1-z, x-iy],[x+iy, 1+z]].
pub fn bloch_coords(rho: &CMatrix) -> (f64, f64, f64) {
    let x = 2.0 * rho[(0, 1)].re;
    let y = -2.0 * rho[(0, 1)].im;
    let z = (rho[(1, 1)] - rho[(0, 0)]).re;
    (x, y, z)
}

/// Qubit density matrix with the given Bloch coordinates,
/// rho = (1/2)[[1-z, x-iy],[x+iy, 1+z]].
pub fn qubit_density(x: f64, y: f64, z: f64) -> CMatrix {
    ndarray::array![
        [C64::new((1.0 - z) / 2.0, 0.0), C64::new(x / 2.0, -y / 2.0)],
        [C64::new(x / 2.0, y / 2.0), C64::new((1.0 + z) / 2.0, 0.0)]
    ]
}
