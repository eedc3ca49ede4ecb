//! Thin helpers over ndarray / LAPACK shared by the analytic and readout code.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::cholesky::{CholeskyFactorized, FactorizeC, SolveC};
use ndarray_linalg::solve::{Factorize, LUFactorized, ReciprocalConditionNum, Solve};
use ndarray_linalg::UPLO;
use num_complex::Complex64;

use crate::{Error, Result};

pub type C64 = Complex64;

/// Factorization of `A + reg·I` for a symmetric `A`, reused across many
/// right-hand sides. Cholesky is tried first; an LU factorization covers
/// matrices that are only PSD up to roundoff.
pub struct SymmetricSolver {
    inner: SolverKind,
    dim: usize,
}

enum SolverKind {
    Cholesky(CholeskyFactorized<ndarray::OwnedRepr<f64>>),
    Lu(LUFactorized<ndarray::OwnedRepr<f64>>),
}

impl SymmetricSolver {
    pub fn new(a: ArrayView2<'_, f64>, reg: f64) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::param("matrix", "expected a non-empty square matrix"));
        }
        if !(reg >= 0.0) {
            return Err(Error::param("reg", "regularization must be non-negative"));
        }
        let mut m = a.to_owned();
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("non-finite entry in covariance matrix".into()));
        }
        for i in 0..n {
            m[[i, i]] += reg;
        }
        if let Ok(f) = m.factorizec(UPLO::Lower) {
            return Ok(Self {
                inner: SolverKind::Cholesky(f),
                dim: n,
            });
        }
        // getrf only flags exact zero pivots; reject numerically singular systems too.
        let rcond = m.rcond().unwrap_or(0.0);
        if !(rcond > 1e-15) {
            return Err(Error::Singular(format!(
                "(A + {reg:e} I) is numerically singular (rcond {rcond:.3e})"
            )));
        }
        let lu = m
            .factorize()
            .map_err(|e| Error::Singular(format!("(A + {reg:e} I) could not be factorized: {e}")))?;
        Ok(Self {
            inner: SolverKind::Lu(lu),
            dim: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if b.len() != self.dim {
            return Err(Error::LengthMismatch {
                left: self.dim,
                right: b.len(),
            });
        }
        let b = b.to_owned();
        let x = match &self.inner {
            SolverKind::Cholesky(f) => f.solvec(&b)?,
            SolverKind::Lu(f) => f.solve(&b)?,
        };
        if x.iter().all(|v| v.is_finite()) {
            Ok(x)
        } else {
            Err(Error::Singular("solution has non-finite entries".into()))
        }
    }

    /// `bᵀ (A + reg·I)⁻¹ b`.
    pub fn quadratic_form(&self, b: ArrayView1<'_, f64>) -> Result<f64> {
        let x = self.solve(b)?;
        Ok(b.dot(&x))
    }
}

/// Converts a complex matrix that should be real, failing when the imaginary
/// residue exceeds `1e-9` relative to the magnitude of the real part.
pub fn checked_real(m: &Array2<C64>, what: &str) -> Result<Array2<f64>> {
    let scale = m.iter().map(|z| z.re.abs()).fold(1.0_f64, f64::max);
    let residue = m.iter().map(|z| z.im.abs()).fold(0.0_f64, f64::max);
    if residue > 1e-9 * scale || !residue.is_finite() {
        return Err(Error::Numerical(format!(
            "{what}: imaginary residue {residue:.3e} exceeds tolerance"
        )));
    }
    Ok(m.mapv(|z| z.re))
}

pub fn checked_real_vec(v: &Array1<C64>, what: &str) -> Result<Array1<f64>> {
    let scale = v.iter().map(|z| z.re.abs()).fold(1.0_f64, f64::max);
    let residue = v.iter().map(|z| z.im.abs()).fold(0.0_f64, f64::max);
    if residue > 1e-9 * scale || !residue.is_finite() {
        return Err(Error::Numerical(format!(
            "{what}: imaginary residue {residue:.3e} exceeds tolerance"
        )));
    }
    Ok(v.mapv(|z| z.re))
}

pub fn to_complex(m: &Array2<f64>) -> Array2<C64> {
    m.mapv(|x| C64::new(x, 0.0))
}

pub fn frobenius(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖_F / ‖b‖_F` (absolute difference when `b` is zero).
pub fn rel_frobenius(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let diff = frobenius((&a - &b).view());
    let nb = frobenius(b);
    if nb > 0.0 {
        diff / nb
    } else {
        diff
    }
}

pub fn max_abs(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

/// Induced 1-norm of a complex matrix.
pub fn norm_one(m: &Array2<C64>) -> f64 {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn symmetrize(m: &mut Array2<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
}

/// Solves `a x = b` for a general real matrix.
pub fn solve_general(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let x = a
        .solve(b)
        .map_err(|e| Error::Singular(format!("general solve failed: {e}")))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular("general solve produced non-finite values".into()))
    }
}

/// Solves `a x = b` for a general complex matrix.
pub fn solve_complex(a: &Array2<C64>, b: &Array1<C64>) -> Result<Array1<C64>> {
    let x = a
        .solve(b)
        .map_err(|e| Error::Singular(format!("complex solve failed: {e}")))?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn symmetric_solver_matches_hand_solution() {
        let a = array![[4.0, 1.0], [1.0, 3.0]];
        let s = SymmetricSolver::new(a.view(), 0.0).unwrap();
        let x = s.solve(array![1.0, 2.0].view()).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn singular_without_reg_is_rejected() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(matches!(
            SymmetricSolver::new(a.view(), 0.0),
            Err(Error::Singular(_))
        ));
        assert!(SymmetricSolver::new(a.view(), 1e-3).is_ok());
    }

    #[test]
    fn checked_real_rejects_residue() {
        let m = array![[C64::new(1.0, 1e-6)]];
        assert!(checked_real(&m, "t").is_err());
        let m = array![[C64::new(1.0, 1e-12)]];
        assert_eq!(checked_real(&m, "t").unwrap()[[0, 0]], 1.0);
    }
}
