//! Pure-state wrapper used by the trajectory ensembles.

use crate::ops::{self, CMatrix, CVector};
use crate::{Error, Result};
use num_complex::Complex64 as C64;

/// A state vector plus a flag recording whether it is currently unit-norm.
///
/// Normalized and unnormalized trajectories flow through the same type; the
/// flag is bookkeeping for metadata and debug assertions, not a contract the
/// numerics rely on (steppers renormalize explicitly where the scheme says to).
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
    normalized: bool,
}

impl PureState {
    /// Wraps amplitudes as given; rejects empty or non-finite input.
    pub fn raw(amplitudes: CVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::invalid("state vector must not be empty"));
        }
        if !amplitudes
            .iter()
            .all(|a| a.re.is_finite() && a.im.is_finite())
        {
            return Err(Error::invalid("state vector has non-finite amplitudes"));
        }
        let normalized = (ops::vector_norm(&amplitudes) - 1.0).abs() < 1e-12;
        Ok(Self {
            amplitudes,
            normalized,
        })
    }

    /// Wraps and rescales to unit norm; rejects the zero vector.
    pub fn normalized(amplitudes: CVector) -> Result<Self> {
        let mut state = Self::raw(amplitudes)?;
        let n = state.norm();
        if n == 0.0 {
            return Err(Error::invalid("cannot normalize the zero vector"));
        }
        state.amplitudes.mapv_inplace(|a| a / n);
        state.normalized = true;
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        ops::vector_norm(&self.amplitudes)
    }

    /// |psi><psi| without normalization; trace equals norm².
    pub fn density(&self) -> CMatrix {
        ops::density_from_pure(&self.amplitudes)
    }

    pub fn expectation(&self, op: &CMatrix) -> C64 {
        ops::expectation(op, &self.amplitudes)
    }

    /// Basis state e_index.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Dimension {
                context: "basis state index out of range",
                expected: dim,
                got: index,
            });
        }
        let mut v: CVector = ndarray::Array1::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Self::raw(v)
    }

    /// Equal superposition (1, 1)/sqrt(2) of a qubit.
    pub fn qubit_plus() -> Self {
        let v: CVector = ndarray::array![
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
            C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
        ];
        Self {
            amplitudes: v,
            normalized: true,
        }
    }
}
