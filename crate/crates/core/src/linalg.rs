//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, RowDVector, SymmetricEigen};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type CRowVector = RowDVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// `exp(j * phase)`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Squared Frobenius norm.
pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Unit-magnitude vector carrying the phases of `v`.
///
/// Zero entries map to phase zero.
pub fn phases_of(v: &CVector) -> CVector {
    v.map(|z| cis(z.arg()))
}

/// Eigenvector belonging to the largest eigenvalue of a Hermitian matrix.
///
/// Ties resolve to the first index reported by the decomposition.
pub fn principal_eigenvector(h: &CMatrix) -> (f64, CVector) {
    let eig = SymmetricEigen::new(h.clone());
    let mut best = 0;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v > eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).into_owned())
}

/// Principal left singular vector of `h`, computed from the smaller Gram matrix.
///
/// Returns `None` when `h` is identically zero.
pub fn principal_left_singular_vector(h: &CMatrix) -> Option<CVector> {
    if h.iter().all(|z| *z == ZERO) {
        return None;
    }
    if h.nrows() <= h.ncols() {
        let gram = h * h.adjoint();
        Some(principal_eigenvector(&gram).1)
    } else {
        let gram = h.adjoint() * h;
        let (_, v) = principal_eigenvector(&gram);
        let u = h * v;
        let n = u.norm();
        if n == 0.0 {
            return None;
        }
        Some(u / C64::new(n, 0.0))
    }
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
pub fn hermitian_inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().cholesky().map(|c| c.inverse())
}

/// Kahan-compensated sum, so that totals do not depend on how parallel
/// workers chunked the inputs.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Converts dBm to watts.
#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_lin(dbm)
}

#[inline]
pub fn watts_to_dbm(w: f64) -> f64 {
    lin_to_db(w * 1e3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_vector_of_rank_one() {
        let a = CVector::from_vec(vec![ONE, C64::new(0.0, 1.0), C64::new(-1.0, 0.0)]);
        let b = CVector::from_vec(vec![C64::new(2.0, 0.0), C64::new(0.5, -0.5)]);
        let h = &a * b.adjoint();
        let u = principal_left_singular_vector(&h).unwrap();
        // u is a unit vector parallel to a
        let overlap = (u.adjoint() * &a)[(0, 0)].norm();
        assert!((overlap - a.norm()).abs() < 1e-10);
    }

    #[test]
    fn tall_matrix_route_matches_wide_route() {
        let h = CMatrix::from_fn(5, 2, |i, j| C64::new((i * 3 + j) as f64, (i as f64) - (j as f64)));
        let u_tall = principal_left_singular_vector(&h).unwrap();
        let u_wide = principal_eigenvector(&(&h * h.adjoint())).1;
        let overlap = (u_tall.adjoint() * &u_wide)[(0, 0)].norm();
        assert!((overlap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_has_no_principal_vector() {
        assert!(principal_left_singular_vector(&CMatrix::zeros(3, 4)).is_none());
    }

    #[test]
    fn hermitian_inverse_roundtrip() {
        let a = CMatrix::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64 * 0.3, (i as f64 - j as f64) * 0.1));
        let k = &a * a.adjoint() + CMatrix::identity(3, 3);
        let inv = hermitian_inverse(&k).unwrap();
        let id = &k * inv;
        assert!((id - CMatrix::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn compensated_sum_is_order_stable() {
        let v: Vec<f64> = (0..10_000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let fwd = compensated_sum(v.iter().copied());
        let rev = compensated_sum(v.iter().rev().copied());
        assert!((fwd - rev).abs() < 1e-13);
    }
}
