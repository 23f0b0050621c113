//! Symmetric-definite generalized eigenproblem `A v = λ B v`.
//!
//! Reduced to a standard symmetric problem through the Cholesky factor of
//! `B = L Lᵀ`: `C = L⁻¹ A L⁻ᵀ`, `C y = λ y`, `v = L⁻ᵀ y`. The resulting
//! vectors are `B`-orthonormal.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Column `i` pairs with `values[i]`.
    pub vectors: DMatrix<f64>,
}

/// Whether `b` admits a Cholesky factorization.
pub fn is_positive_definite(b: &DMatrix<f64>) -> bool {
    b.clone().cholesky().is_some()
}

/// Flips `v` so its first entry of non-negligible magnitude is positive.
pub fn canonical_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if scale == 0.0 {
        return;
    }
    if let Some(&first) = v.iter().find(|x| x.abs() > 1e-9 * scale) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// The `count` eigenpairs of largest eigenvalue. Ties keep the order the
/// symmetric solver produced them in.
pub fn generalized_symmetric_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>, count: usize) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    if a.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::Numerical("eigenproblem matrices must be square and equal in size".into()));
    }
    if count == 0 || count > n {
        return Err(Error::config(format!("cannot retain {count} eigenvectors of a {n}×{n} problem")));
    }
    let chol = b.clone().cholesky().ok_or_else(|| {
        Error::Numerical("scatter matrix is not positive definite; increase --reg-sigma".into())
    })?;
    let l = chol.l();
    let left = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    order.truncate(count);

    let lt = l.transpose();
    let mut vectors = DMatrix::zeros(n, count);
    let mut values = Vec::with_capacity(count);
    for (col, &i) in order.iter().enumerate() {
        let y = eig.eigenvectors.column(i).clone_owned();
        let mut v = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        canonical_sign(&mut v);
        vectors.set_column(col, &v);
        values.push(eig.eigenvalues[i]);
    }
    Ok(GeneralizedEigen { values, vectors })
}

/// `‖A v − λ B v‖` against the bound `1e-6 (‖A‖_F + |λ| ‖B‖_F) ‖v‖`.
/// Returns the worst ratio of residual to bound (≤ 1 passes).
pub fn worst_residual_ratio(a: &DMatrix<f64>, b: &DMatrix<f64>, eig: &GeneralizedEigen) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    eig.values
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let v = eig.vectors.column(i);
            let r = (a * v - (b * v) * lambda).norm();
            let bound = 1e-6 * (na + lambda.abs() * nb) * v.norm();
            if bound > 0.0 {
                r / bound
            } else if r == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}
