//! Reference implementations that share no code path with the library.
#![allow(dead_code)]

use chainsense_core::spin::{pauli_at, Axis, C64};
use nalgebra::{DMatrix, DVector};

/// Hamiltonian assembled from explicit Pauli products.
pub fn pauli_sum_hamiltonian(n: usize, j: f64, b: f64) -> DMatrix<C64> {
    let mut h = pauli_at(1, Axis::X, n).unwrap().into_matrix() * C64::new(b, 0.0);
    for site in 1..n {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let a = pauli_at(site, axis, n).unwrap().into_matrix();
            let c = pauli_at(site + 1, axis, n).unwrap().into_matrix();
            h += (a * c) * C64::new(j, 0.0);
        }
    }
    h
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations on its real
/// `2n x 2n` embedding; every eigenvalue appears twice and is reported once.
pub fn jacobi_eigenvalues(h: &DMatrix<C64>) -> Vec<f64> {
    let n = h.nrows();
    let m = 2 * n;
    let mut a = vec![vec![0.0f64; m]; m];
    for r in 0..n {
        for c in 0..n {
            let z = h[(r, c)];
            a[r][c] = z.re;
            a[r + n][c + n] = z.re;
            a[r][c + n] = -z.im;
            a[r + n][c] = z.im;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|p| (0..m).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..m).map(|i| a[i][i]).collect();
    d.sort_by(f64::total_cmp);
    d.into_iter().step_by(2).collect()
}

/// `exp(-i H t)` by scaling and squaring of a Taylor series.
pub fn expm_taylor(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let n = h.nrows();
    let a = h * C64::new(0.0, -t);
    let norm = a.norm();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let a = a / C64::new(2f64.powi(s), 0.0);
    let mut term = DMatrix::<C64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / C64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Projector onto the given value of the last site (`up` = bit 0 set).
pub fn last_site_projector(n: usize, up: bool) -> DMatrix<C64> {
    let dim = 1 << n;
    DMatrix::from_fn(dim, dim, |r, c| {
        if r == c && ((r & 1 == 1) == up) {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `|| M_n U_n ... M_1 U_1 |psi0> ||^2` as one matrix product.
pub fn joint_probability(n: usize, j: f64, b: f64, taus: &[f64], ups: &[bool]) -> f64 {
    let h = pauli_sum_hamiltonian(n, j, b);
    let dim = 1 << n;
    let mut chain = DMatrix::<C64>::identity(dim, dim);
    for (&tau, &up) in taus.iter().zip(ups) {
        chain = last_site_projector(n, up) * expm_taylor(&h, tau) * chain;
    }
    let mut psi0 = DVector::<C64>::zeros(dim);
    psi0[0] = C64::new(1.0, 0.0);
    (chain * psi0).norm_squared()
}

pub fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
