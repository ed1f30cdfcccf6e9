use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Solves `P A + A' P = -Q` for `P` by a direct solve of the vectorised
/// (Kronecker) system. Intended for the small state dimensions used here.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(Error::dims(
            "Lyapunov operands",
            format!("{n}x{n}"),
            format!("{:?}", q.shape()),
        ));
    }
    // vec(P A) = (A' kron I) vec(P),  vec(A' P) = (I kron A') vec(P)
    let id = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = at.kronecker(&id) + id.kronecker(&at);
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Certificate("Lyapunov operator is singular".into()))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}
