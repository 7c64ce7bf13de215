//! Dense linear-algebra helpers over `Complex<T>`.
//!
//! Quadratic forms in this crate are complex *symmetric* (`A = Aᵀ`), not
//! Hermitian, so the factorizations here never conjugate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{cabs, cln, csqrt, czero, Complex, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

pub fn to_complex<T: Real>(a: &DMatrix<T>) -> CMatrix<T> {
    a.map(|x| Complex::new(x, T::zero()))
}

pub fn real_part<T: Real>(a: &CMatrix<T>) -> DMatrix<T> {
    a.map(|z| z.re)
}

/// Largest entry of `|A - Aᵀ|`.
pub fn asymmetry<T: Real>(a: &CMatrix<T>) -> T {
    let n = a.nrows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max(cabs(a[(i, j)] - a[(j, i)]));
        }
    }
    worst
}

pub fn max_abs<T: Real>(a: &CMatrix<T>) -> T {
    a.iter().fold(T::zero(), |m, z| m.max(cabs(*z)))
}

/// Smallest eigenvalue of the symmetrized real part.
pub fn min_real_eigenvalue<T: Real>(a: &CMatrix<T>) -> T {
    let r = real_part(a);
    let sym = (&r + r.transpose()) * nalgebra::convert::<f64, T>(0.5);
    let eig = sym.symmetric_eigenvalues();
    eig.iter().fold(T::max_value().unwrap(), |m, &x| m.min(x))
}

/// Checks that `Re(A)` is positive definite relative to its scale.
pub fn check_real_positive<T: Real>(a: &CMatrix<T>, what: &str) -> Result<()> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Degenerate(format!("{what} is empty")));
    }
    let scale = max_abs(a);
    let lo = min_real_eigenvalue(a);
    let floor = scale * T::eps() * crate::scalar::count::<T>(n) * crate::scalar::lit(16.0);
    if lo > floor {
        Ok(())
    } else {
        Err(Error::Degenerate(format!(
            "{what}: real part not positive definite (smallest eigenvalue {lo})"
        )))
    }
}

/// LU inverse; fails on a numerically singular matrix.
pub fn invert<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    a.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("matrix is singular".into()))
}

/// Complex log-determinant via LU (principal branch of each pivot).
pub fn logdet<T: Real>(a: &CMatrix<T>) -> Result<Complex<T>> {
    let lu = a.clone().lu();
    let u = lu.u();
    let mut acc = czero::<T>();
    for i in 0..u.nrows() {
        let p = u[(i, i)];
        if cabs(p) == T::zero() {
            return Err(Error::Degenerate("zero pivot in log-determinant".into()));
        }
        acc += cln(p);
    }
    if lu.p().determinant::<T>() < T::zero() {
        acc += Complex::new(T::zero(), T::pi());
    }
    Ok(acc)
}

/// Factor `A = L Lᵀ` for complex symmetric `A` with positive definite real part.
///
/// Pivots are principal square roots; for real SPD input this is the usual
/// Cholesky factor.
pub fn symmetric_cholesky<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let n = a.nrows();
    let mut l = CMatrix::<T>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if cabs(d) <= T::eps() * max_abs(a) {
            return Err(Error::Degenerate(format!("vanishing pivot at column {j}")));
        }
        let piv = csqrt(d);
        l[(j, j)] = piv;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / piv;
        }
    }
    Ok(l)
}

/// `xᵀ A y` without conjugation.
pub fn bilinear<T: Real>(x: &[Complex<T>], a: &CMatrix<T>, y: &[Complex<T>]) -> Complex<T> {
    let n = a.nrows();
    let mut acc = czero::<T>();
    for i in 0..n {
        let mut row = czero::<T>();
        for j in 0..n {
            row += a[(i, j)] * y[j];
        }
        acc += x[i] * row;
    }
    acc
}

pub fn matvec<T: Real>(a: &CMatrix<T>, x: &[Complex<T>]) -> Vec<Complex<T>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).fold(czero::<T>(), |s, j| s + a[(i, j)] * x[j]))
        .collect()
}

pub fn dot<T: Real>(x: &[Complex<T>], y: &[Complex<T>]) -> Complex<T> {
    x.iter().zip(y).fold(czero::<T>(), |s, (a, b)| s + *a * *b)
}

/// Numerical rank from the singular values of a real matrix.
pub fn rank<T: Real>(a: &DMatrix<T>, rel_tol: T) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(T::zero(), |m, &x| m.max(x));
    if top == T::zero() {
        return 0;
    }
    sv.iter().filter(|&&x| x > top * rel_tol).count()
}

/// Numerical rank of a complex matrix.
pub fn rank_complex<T: Real>(a: &CMatrix<T>, rel_tol: T) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(T::zero(), |m, &x| m.max(x));
    if top == T::zero() {
        return 0;
    }
    sv.iter().filter(|&&x| x > top * rel_tol).count()
}

/// `max(floor, factor·ε)`: tolerances stated for `f64` degrade gracefully for `f32`.
pub fn tol<T: Real>(floor: f64, factor: f64) -> T {
    crate::scalar::lit::<T>(floor).max(T::eps() * crate::scalar::lit::<T>(factor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reproduces_complex_symmetric_matrix() {
        let a = CMatrix::<f64>::from_row_slice(
            2,
            2,
            &[
                Complex::new(2.0, 0.5),
                Complex::new(0.3, -0.2),
                Complex::new(0.3, -0.2),
                Complex::new(1.5, 0.1),
            ],
        );
        let l = symmetric_cholesky(&a).unwrap();
        let back = &l * l.transpose();
        assert!(max_abs(&(back - &a)) < 1e-14);
    }

    #[test]
    fn logdet_matches_determinant() {
        let a = to_complex(&DMatrix::<f64>::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 1.0]));
        let ld = logdet(&a).unwrap();
        let det = crate::scalar::cexp(ld);
        assert!((det - Complex::new(-6.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn singular_matrix_is_degenerate() {
        let a = to_complex(&DMatrix::<f64>::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert!(check_real_positive(&a, "A").is_err());
    }
}
