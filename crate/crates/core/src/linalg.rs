//! Dense complex linear-algebra helpers and the Hermitian eigensolver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Relative tolerance for accepting a matrix as Hermitian.
const HERMITIAN_TOL: f64 = 1e-12;

/// Largest entry of `|H - H^dagger|`.
pub fn hermitian_deviation(h: &CMatrix) -> f64 {
    let n = h.nrows();
    let mut dev = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Maximum absolute row sum (the induced infinity norm).
pub fn max_row_sum(h: &CMatrix) -> f64 {
    h.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Real matrix promoted to complex.
pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Spectral decomposition `H = V diag(values) V^dagger` with the eigenvalues
/// in descending order.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, ordered like `values`.
    pub vectors: CMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> CVector {
        self.vectors.column(k).into_owned()
    }

    /// Coefficients `<phi_k|psi>` of a state in the eigenbasis.
    pub fn coefficients(&self, psi: &CVector) -> CVector {
        self.vectors.ad_mul(psi)
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues descending.
///
/// Each eigenvector's phase is fixed so that its first non-negligible
/// component is real and positive, which makes the output deterministic.
pub fn eig_descending(h: &CMatrix) -> Result<EigenDecomposition> {
    if !h.is_square() {
        return Err(Error::Validation(format!(
            "eigensolver needs a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(h);
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }

    let n = h.nrows();
    let (values, vectors) = if h.iter().all(|z| z.im == 0.0) {
        let eig = h.map(|z| z.re).symmetric_eigen();
        (eig.eigenvalues.as_slice().to_vec(), to_complex(&eig.eigenvectors))
    } else {
        let eig = h.clone().symmetric_eigen();
        (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut sorted = CMatrix::zeros(n, n);
    let mut sorted_values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_values.push(values[src]);
        let mut col = vectors.column(src).into_owned();
        if let Some(pivot) = col.iter().find(|z| z.norm() > 1e-12).copied() {
            let phase = pivot.conj() / pivot.norm();
            col *= phase;
        }
        sorted.set_column(dst, &col);
    }

    Ok(EigenDecomposition {
        values: sorted_values,
        vectors: sorted,
    })
}

/// Eigenvalues of a real symmetric matrix, descending, without vectors.
pub fn symmetric_eigenvalues_descending(m: &RMatrix) -> Vec<f64> {
    let mut v = m.clone().symmetric_eigenvalues().as_slice().to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}
