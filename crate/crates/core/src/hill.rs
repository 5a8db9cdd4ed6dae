//! Plane-wave (Hill matrix) discretisation of the fibre operators.
//!
//! On quasimomentum `k` the operator acts on `e^{i(k + 2 pi m)x}` as
//! `H_{m m'} = (k + 2 pi m)^2 delta_{m m'} + hat P(m - m')`. Truncated to
//! `|m| <= M` it is a Hermitian matrix whose low eigenvalues converge
//! super-exponentially for trigonometric polynomials. It serves as the
//! bracket source for band edges and as an independent propagator.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::potential::PeriodicPotential;

/// Truncated fibre Hamiltonian on modes `m_lo ..= m_hi`.
#[derive(Debug, Clone)]
pub struct HillMatrix {
    pub k: f64,
    pub m_lo: i64,
    pub matrix: DMatrix<Complex64>,
}

impl HillMatrix {
    pub fn new(pot: &PeriodicPotential, k: f64, m_lo: i64, m_hi: i64) -> Self {
        let n = (m_hi - m_lo + 1) as usize;
        let deg = pot.degree() as i64;
        let mut h = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            let m = m_lo + i as i64;
            let q = k + 2.0 * PI * m as f64;
            h[(i, i)] = Complex64::new(q * q, 0.0) + pot.hat(0);
            for l in 1..=deg {
                let j = i as i64 - l;
                if j >= 0 {
                    h[(i, j as usize)] = pot.hat(l);
                    h[(j as usize, i)] = pot.hat(-l);
                }
            }
        }
        HillMatrix { k, m_lo, matrix: h }
    }

    /// Mode set symmetric about `-k / 2 pi`.
    pub fn centered(pot: &PeriodicPotential, k: f64, half: i64) -> Self {
        let c = (-k / (2.0 * PI)).round() as i64;
        HillMatrix::new(pot, k, c - half, c + half)
    }

    pub fn frequency(&self, i: usize) -> f64 {
        self.k + 2.0 * PI * (self.m_lo + i as i64) as f64
    }

    /// Eigenvalues ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Eigenvalues ascending with matching unit eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<Complex64>) {
        let se = SymmetricEigen::new(self.matrix.clone());
        let mut idx: Vec<usize> = (0..se.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
        let vals = idx.iter().map(|&i| se.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(se.eigenvectors.nrows(), idx.len(), |r, c| se.eigenvectors[(r, idx[c])]);
        (vals, vecs)
    }
}

/// Periodic (`k = 0`) and antiperiodic (`k = pi`) eigenvalues, ascending.
pub fn periodic_spectra(pot: &PeriodicPotential, half: i64) -> (Vec<f64>, Vec<f64>) {
    let per = HillMatrix::new(pot, 0.0, -half, half).eigenvalues();
    let anti = HillMatrix::new(pot, PI, -half - 1, half).eigenvalues();
    (per, anti)
}
