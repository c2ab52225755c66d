//! Exact time evolution through a one-time spectral decomposition of `H`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::spin::{zeros, HermitianOperator, PureState, C64};

const MAX_EIGEN_ITERATIONS: usize = 100_000;

/// Eigenpairs of a Hermitian operator, energies ascending.
///
/// Column `k` of `vectors` belongs to `energies[k]`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    energies: DVector<f64>,
    vectors: DMatrix<C64>,
}

pub fn diagonalize(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    let dim = h.dim();
    let eig = SymmetricEigen::try_new(h.matrix().clone(), f64::EPSILON, MAX_EIGEN_ITERATIONS)
        .ok_or(Error::Eigensolver { dim })?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = DVector::from_iterator(dim, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SpectralDecomposition { energies, vectors })
}

impl SpectralDecomposition {
    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }

    pub fn vectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `V diag(lambda) V^dagger`
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col.scale_mut(self.energies[k]);
        }
        scaled * self.vectors.adjoint()
    }

    /// Dense `exp(-i H t)` for repeated application at a fixed interval.
    pub fn propagator(&self, t: f64) -> Result<Propagator> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        let dim = self.dim();
        let phases: Vec<C64> = self
            .energies
            .iter()
            .map(|&e| {
                let (s, c) = Float::sin_cos(-e * t);
                C64::new(c, s)
            })
            .collect();
        let mut data = zeros(dim * dim);
        for r in 0..dim {
            for k in 0..dim {
                let vk = self.vectors[(r, k)] * phases[k];
                if vk == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &mut data[r * dim..(r + 1) * dim];
                for (c, out) in row.iter_mut().enumerate() {
                    *out += vk * self.vectors[(c, k)].conj();
                }
            }
        }
        Ok(Propagator { dim, data })
    }
}

/// `|psi(t)> = V exp(-i lambda t) V^dagger |psi>`.
pub fn evolve(state: &PureState, decomp: &SpectralDecomposition, t: f64) -> Result<PureState> {
    if state.dim() != decomp.dim() {
        return Err(Error::DimensionMismatch {
            expected: decomp.dim(),
            found: state.dim(),
        });
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let mut coeffs = decomp.vectors.ad_mul(state.amplitudes());
    for (k, c) in coeffs.iter_mut().enumerate() {
        let (s, co) = Float::sin_cos(-decomp.energies[k] * t);
        *c *= C64::new(co, s);
    }
    Ok(PureState::from_raw(state.n_sites(), &decomp.vectors * coeffs))
}

/// Row-major unitary `exp(-i H t)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    dim: usize,
    data: Vec<C64>,
}

impl Propagator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    /// `out = U psi`, skipping input components that are exactly zero.
    pub fn apply_into(&self, psi: &[C64], out: &mut [C64]) {
        debug_assert_eq!(psi.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.dim..(r + 1) * self.dim];
            let mut acc = C64::new(0.0, 0.0);
            for (u, p) in row.iter().zip(psi) {
                acc += u * p;
            }
            *o = acc;
        }
    }

    /// `U psi` where only components with `index & mask == bit` may be nonzero.
    pub(crate) fn apply_half_into(&self, psi: &[C64], mask: usize, bit: usize, out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.dim..(r + 1) * self.dim];
            let mut acc = C64::new(0.0, 0.0);
            for c in (0..self.dim).filter(|c| c & mask == bit) {
                acc += row[c] * psi[c];
            }
            *o = acc;
        }
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        if state.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: state.dim(),
            });
        }
        let mut out = zeros(self.dim);
        self.apply_into(state.amplitudes().as_slice(), &mut out);
        Ok(PureState::from_raw(
            state.n_sites(),
            DVector::from_vec(out),
        ))
    }
}
