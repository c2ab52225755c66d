//! Dense reference implementation of the measurement chain.
//!
//! Builds the Hamiltonian from Kronecker products of Pauli matrices and the
//! propagators from a Taylor series, then evaluates a whole outcome sequence
//! as one product of projectors and propagators. Shares no code with the
//! spectral path in `chainsense_core`.

use nalgebra::{DMatrix, DVector};

use chainsense_core::spin::C64;

fn pauli(which: char) -> DMatrix<C64> {
    let (o, l, i) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 1.0));
    // basis order per site: index 0 = down, 1 = up
    match which {
        'x' => DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        'y' => DMatrix::from_row_slice(2, 2, &[o, i, -i, o]),
        'z' => DMatrix::from_row_slice(2, 2, &[-l, o, o, l]),
        _ => DMatrix::identity(2, 2),
    }
}

/// `ops[k]` acts on site `k + 1`; site 1 is the most significant factor.
fn kron_chain(ops: &[DMatrix<C64>]) -> DMatrix<C64> {
    ops.iter()
        .skip(1)
        .fold(ops[0].clone(), |acc, op| acc.kronecker(op))
}

fn site_operator(n_sites: usize, placed: &[(usize, char)]) -> DMatrix<C64> {
    let ops: Vec<DMatrix<C64>> = (1..=n_sites)
        .map(|site| {
            placed
                .iter()
                .find(|(s, _)| *s == site)
                .map_or_else(|| pauli('1'), |(_, w)| pauli(*w))
        })
        .collect();
    kron_chain(&ops)
}

/// `J sum_j (XX + YY + ZZ)_{j,j+1} + B X_1`.
pub fn hamiltonian(n_sites: usize, coupling: f64, field: f64) -> DMatrix<C64> {
    let dim = 1usize << n_sites;
    let mut h = DMatrix::zeros(dim, dim);
    for j in 1..n_sites {
        for w in ['x', 'y', 'z'] {
            h += site_operator(n_sites, &[(j, w), (j + 1, w)]) * C64::new(coupling, 0.0);
        }
    }
    h + site_operator(n_sites, &[(1, 'x')]) * C64::new(field, 0.0)
}

/// `exp(-i H t)` by scaling and squaring of a truncated Taylor series.
pub fn propagator(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let a = h * C64::new(0.0, -t);
    let norm = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * a.nrows() as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = &a * C64::new(0.5f64.powi(squarings as i32), 0.0);
    let dim = a.nrows();
    let mut term = DMatrix::<C64>::identity(dim, dim);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &scaled * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Projector onto spin up (`up = true`) or down at the last site.
pub fn last_site_projector(n_sites: usize, up: bool) -> DMatrix<C64> {
    let dim = 1usize << n_sites;
    DMatrix::from_fn(dim, dim, |r, c| {
        if r == c && (r & 1 == 1) == up {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `|| P_n U_n ... P_1 U_1 |down...down> ||^2`.
pub fn joint_probability(n_sites: usize, coupling: f64, field: f64, taus: &[f64], ups: &[bool]) -> f64 {
    let h = hamiltonian(n_sites, coupling, field);
    let dim = 1usize << n_sites;
    let mut chain = DMatrix::<C64>::identity(dim, dim);
    for (&tau, &up) in taus.iter().zip(ups) {
        chain = last_site_projector(n_sites, up) * propagator(&h, tau) * chain;
    }
    let mut psi0 = DVector::zeros(dim);
    psi0[0] = C64::new(1.0, 0.0);
    (chain * psi0).norm_squared()
}

/// `sin^2(B t)`: spin-up probability of a lone spin in a transverse field.
pub fn two_level_up_probability(field: f64, t: f64) -> f64 {
    (field * t).sin().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singlet_triplet_pair() {
        let h = hamiltonian(2, 1.0, 0.0);
        let mut e: Vec<f64> = (0..4).map(|i| h[(i, i)].re).collect();
        e.sort_by(f64::total_cmp);
        // diagonal of ZZ in the product basis
        assert_eq!(e, vec![-1.0, -1.0, 1.0, 1.0]);
        let trace: C64 = (0..4).map(|i| h[(i, i)]).sum();
        assert!(trace.norm() < 1e-15);
    }

    #[test]
    fn propagator_is_unitary_and_matches_two_level() {
        let h = hamiltonian(1, 1.0, 0.3);
        let u = propagator(&h, 7.0);
        let eye = &u * u.adjoint();
        assert!((eye - DMatrix::<C64>::identity(2, 2)).iter().all(|z| z.norm() < 1e-12));
        let p = joint_probability(1, 1.0, 0.3, &[7.0], &[true]);
        assert!((p - two_level_up_probability(0.3, 7.0)).abs() < 1e-12);
    }

    #[test]
    fn outcomes_sum_to_one() {
        let taus = [6.0, 8.0];
        let total: f64 = [[false, false], [false, true], [true, false], [true, true]]
            .iter()
            .map(|ups| joint_probability(3, 1.0, 0.15, &taus, ups))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
