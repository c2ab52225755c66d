//! Chain operators, the Heisenberg Hamiltonian with a local transverse field,
//! and single-site observables.
//!
//! Basis convention shared by every module: site `j` (1-based) lives at bit
//! position `N - j` of the basis index, so site 1 is the most significant bit
//! and site `N` the least significant. Bit value 0 is spin down, 1 is spin up,
//! which makes the all-down ferromagnetic state basis index 0.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Largest chain accepted by [`ChainSpec::new`] (dimension 4096).
pub const DEFAULT_MAX_SITES: usize = 12;

const NORM_TOLERANCE: f64 = 1e-10;
const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Chain geometry and coupling, without the field being sensed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainTemplate {
    n_sites: usize,
    coupling: f64,
}

impl ChainTemplate {
    pub fn new(n_sites: usize, coupling: f64) -> Result<Self> {
        Self::with_site_limit(n_sites, coupling, DEFAULT_MAX_SITES)
    }

    pub fn with_site_limit(n_sites: usize, coupling: f64, max_sites: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidChain("chain needs at least one site"));
        }
        if n_sites > max_sites {
            return Err(Error::InvalidChain("chain exceeds the dense-matrix site limit"));
        }
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidChain("exchange coupling must be positive and finite"));
        }
        Ok(Self { n_sites, coupling })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn with_field(self, field: f64) -> ChainSpec {
        ChainSpec {
            template: self,
            field,
        }
    }
}

/// A chain together with the value of the local field on site 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    template: ChainTemplate,
    field: f64,
}

impl ChainSpec {
    pub fn new(n_sites: usize, coupling: f64, field: f64) -> Result<Self> {
        if !field.is_finite() {
            return Err(Error::InvalidChain("field must be finite"));
        }
        Ok(ChainTemplate::new(n_sites, coupling)?.with_field(field))
    }

    pub fn template(&self) -> ChainTemplate {
        self.template
    }

    pub fn n_sites(&self) -> usize {
        self.template.n_sites
    }

    pub fn coupling(&self) -> f64 {
        self.template.coupling
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.template.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Normalized state vector over the `2^N` computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_sites: usize,
    amplitudes: DVector<C64>,
}

impl PureState {
    /// All spins down.
    pub fn ferromagnetic(n_sites: usize) -> Self {
        Self::basis(n_sites, 0)
    }

    pub fn basis(n_sites: usize, index: usize) -> Self {
        let dim = 1usize << n_sites;
        assert!(index < dim, "basis index {index} out of range for {n_sites} sites");
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[index] = C64::new(1.0, 0.0);
        Self {
            n_sites,
            amplitudes,
        }
    }

    /// Wraps an amplitude vector, checking its length and unit norm.
    pub fn from_amplitudes(n_sites: usize, amplitudes: DVector<C64>) -> Result<Self> {
        let dim = 1usize << n_sites;
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if Float::abs(norm - 1.0) > NORM_TOLERANCE {
            return Err(Error::InvalidChain("state is not normalized"));
        }
        Ok(Self {
            n_sites,
            amplitudes,
        })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(n_sites: usize, mut amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidChain("cannot normalize a zero vector"));
        }
        amplitudes.unscale_mut(norm);
        Self::from_amplitudes(n_sites, amplitudes)
    }

    pub(crate) fn from_raw(n_sites: usize, amplitudes: DVector<C64>) -> Self {
        Self {
            n_sites,
            amplitudes,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Probability of finding `site` spin up.
    pub fn up_probability(&self, site: usize) -> Result<f64> {
        let mask = site_mask(site, self.n_sites)?;
        let p: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        Ok(p.clamp(0.0, 1.0))
    }
}

/// Dense Hermitian matrix of dimension `2^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: DMatrix<C64>,
}

impl HermitianOperator {
    pub fn from_matrix(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let n = matrix.nrows();
        for r in 0..n {
            for c in r..n {
                if (matrix[(r, c)] - matrix[(c, r)].conj()).norm() > HERMITIAN_TOLERANCE {
                    return Err(Error::InvalidChain("operator is not Hermitian"));
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, state: &PureState) -> Result<DVector<C64>> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.dim(),
            });
        }
        Ok(&self.matrix * state.amplitudes())
    }

    /// `<state|self|state>`; real for a Hermitian operator.
    pub fn expectation(&self, state: &PureState) -> Result<f64> {
        let applied = self.apply(state)?;
        Ok(state.amplitudes().dotc(&applied).re)
    }
}

pub(crate) fn site_mask(site: usize, n_sites: usize) -> Result<usize> {
    if site == 0 || site > n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    Ok(1 << (n_sites - site))
}

/// Pauli matrix on `site`, identity elsewhere.
pub fn pauli_at(site: usize, axis: Axis, n_sites: usize) -> Result<HermitianOperator> {
    let mask = site_mask(site, n_sites)?;
    let dim = 1usize << n_sites;
    let mut m = DMatrix::zeros(dim, dim);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    for col in 0..dim {
        let up = col & mask != 0;
        match axis {
            Axis::X => m[(col ^ mask, col)] = one,
            // sigma_y |up> = i |down>, sigma_y |down> = -i |up>
            Axis::Y => m[(col ^ mask, col)] = if up { i } else { -i },
            Axis::Z => m[(col, col)] = if up { one } else { -one },
        }
    }
    Ok(HermitianOperator { matrix: m })
}

/// `H = J sum_j sigma_j . sigma_{j+1} + B sigma_1^x`.
///
/// Each bond uses `sigma_j . sigma_{j+1} = 2 SWAP - 1`: diagonal `+1` on
/// aligned pairs, `-1` on anti-aligned pairs, and amplitude `2` exchanging
/// an anti-aligned pair.
pub fn build_hamiltonian(spec: &ChainSpec) -> HermitianOperator {
    let n = spec.n_sites();
    let dim = spec.dim();
    let j = spec.coupling();
    let mut m: DMatrix<C64> = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        for bond in 1..n {
            let a = 1usize << (n - bond);
            let b = 1usize << (n - bond - 1);
            let aligned = (col & a != 0) == (col & b != 0);
            if aligned {
                m[(col, col)] += C64::new(j, 0.0);
            } else {
                m[(col, col)] -= C64::new(j, 0.0);
                m[(col ^ a ^ b, col)] += C64::new(2.0 * j, 0.0);
            }
        }
        let first = 1usize << (n - 1);
        m[(col ^ first, col)] += C64::new(spec.field(), 0.0);
    }
    HermitianOperator { matrix: m }
}

/// `<sigma_site^z> = p_up - p_down`.
pub fn magnetization(state: &PureState, site: usize) -> Result<f64> {
    let up = state.up_probability(site)?;
    Ok(2.0 * up - 1.0)
}

/// `prod_j sigma_j^x`, the global spin flip.
pub fn global_spin_flip(n_sites: usize) -> DMatrix<C64> {
    let dim = 1usize << n_sites;
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        m[((dim - 1) ^ col, col)] = C64::new(1.0, 0.0);
    }
    m
}

pub(crate) fn zeros(dim: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); dim]
}
