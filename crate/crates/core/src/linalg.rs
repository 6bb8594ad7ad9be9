//! Dense solves for the Newton correctors.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Solve `A x = b` by LU with partial pivoting.
pub fn lu_solve(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.nrows(), n);
    let scale = a.amax();
    let lu = a.lu();
    // reject pivots that are zero at working precision
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > scale * 1e-15 * n as f64) {
        return Err(Error::SingularJacobian);
    }
    let x = lu
        .solve(&DVector::from_column_slice(b))
        .ok_or(Error::SingularJacobian)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularJacobian);
    }
    Ok(x.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let x = lu_solve(a.clone(), &[1.0, 2.0, 3.0]).unwrap();
        let r = &a * DVector::from_column_slice(&x) - DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        assert!(r.amax() < 1e-14);
    }

    #[test]
    fn flags_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(lu_solve(a, &[1.0, 1.0]), Err(Error::SingularJacobian)));
    }
}
