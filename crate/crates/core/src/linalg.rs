//! Small dense linear-algebra helpers shared across the crate: Kronecker
//! products, partial traces, Hermitian matrix functions, and the principal
//! matrix logarithm used to extract gate generators.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Real part of a complex matrix; callers are responsible for knowing the
/// imaginary part is negligible.
pub fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn max_imag_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMat::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Partial trace over the first (leftmost) tensor factor of size `d_first`.
pub fn trace_first(m: &CMat, d_first: usize, d_second: usize) -> CMat {
    assert_eq!(m.nrows(), d_first * d_second);
    assert_eq!(m.ncols(), d_first * d_second);
    let mut out = CMat::zeros(d_second, d_second);
    for a in 0..d_first {
        for i in 0..d_second {
            for j in 0..d_second {
                out[(i, j)] += m[(a * d_second + i, a * d_second + j)];
            }
        }
    }
    out
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn herm_eigenvalues(h: &CMat) -> Vec<f64> {
    let eig = h.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

pub fn min_herm_eigenvalue(h: &CMat) -> f64 {
    herm_eigenvalues(h)
        .first()
        .copied()
        .unwrap_or(f64::INFINITY)
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn herm_trace_norm(h: &CMat) -> f64 {
    herm_eigenvalues(h).iter().map(|v| v.abs()).sum()
}

/// Spectral norm (largest absolute eigenvalue) of a Hermitian matrix.
pub fn herm_spectral_norm(h: &CMat) -> f64 {
    herm_eigenvalues(h)
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Apply a real scalar function to a Hermitian matrix through its
/// eigendecomposition.
pub fn herm_map(h: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let eig = h.clone().symmetric_eigen();
    let n = h.nrows();
    let mut d = CMat::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = Complex64::new(f(eig.eigenvalues[i]), 0.0);
    }
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Square root of a PSD matrix; small negative eigenvalues are clipped to 0.
pub fn psd_sqrt(h: &CMat) -> CMat {
    herm_map(h, |v| v.max(0.0).sqrt())
}

/// Inverse square root of a positive definite matrix.
pub fn pd_inv_sqrt(h: &CMat) -> CMat {
    herm_map(h, |v| 1.0 / v.max(1e-300).sqrt())
}

/// Principal square root of an upper triangular complex matrix.
fn tri_sqrt(t: &CMat) -> Result<CMat> {
    let n = t.nrows();
    let mut r = CMat::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = t[(i, i)].sqrt();
    }
    for off in 1..n {
        for i in 0..(n - off) {
            let j = i + off;
            let mut s = t[(i, j)];
            for k in (i + 1)..j {
                s -= r[(i, k)] * r[(k, j)];
            }
            let denom = r[(i, i)] + r[(j, j)];
            if denom.norm() < 1e-300 {
                return Err(Error::Numerical(
                    "triangular square root: zero diagonal pivot".into(),
                ));
            }
            r[(i, j)] = s / denom;
        }
    }
    Ok(r)
}

/// Mercator series for log(I + E), valid for small `E`.
fn log_series(e: &CMat) -> CMat {
    let n = e.nrows();
    let mut acc = CMat::zeros(n, n);
    let mut pow = CMat::identity(n, n);
    for j in 1..=32 {
        pow = &pow * e;
        let coeff = if j % 2 == 1 { 1.0 } else { -1.0 } / j as f64;
        acc += &pow * Complex64::new(coeff, 0.0);
    }
    acc
}

/// Principal logarithm of a real square matrix.
///
/// Fails when an eigenvalue lies on the closed negative real axis (no real
/// principal logarithm exists there) or when the result has a non-negligible
/// imaginary part.
pub fn real_log(a: &RMat) -> Result<RMat> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("matrix logarithm requires square input".into()));
    }
    let schur = to_complex(a).schur();
    let (q, mut t) = schur.unpack();
    for i in 0..n {
        let lam = t[(i, i)];
        if lam.re <= 0.0 && lam.im.abs() < 1e-12 {
            return Err(Error::Numerical(format!(
                "matrix logarithm undefined: eigenvalue {:.6e}{:+.6e}i on the negative real axis",
                lam.re, lam.im
            )));
        }
    }
    let ident = CMat::identity(n, n);
    let mut k = 0u32;
    while (&t - &ident).norm() > 0.25 {
        t = tri_sqrt(&t)?;
        k += 1;
        if k > 60 {
            return Err(Error::Numerical(
                "matrix logarithm failed to converge in square-root phase".into(),
            ));
        }
    }
    let e = &t - &ident;
    let mut l = log_series(&e);
    l *= Complex64::new(2f64.powi(k as i32), 0.0);
    let full = &q * l * q.adjoint();
    let imag = max_imag_abs(&full);
    if imag > 1e-8 {
        return Err(Error::Numerical(format!(
            "matrix logarithm has imaginary residue {:.3e}",
            imag
        )));
    }
    Ok(real_part(&full))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64 as C;

    #[test]
    fn symmetric_eigen_handles_complex_hermitian() {
        let h = CMat::from_row_slice(
            2,
            2,
            &[C::new(1.0, 0.0), C::new(0.0, -1.0), C::new(0.0, 1.0), C::new(1.0, 0.0)],
        );
        let vals = herm_eigenvalues(&h);
        assert_abs_diff_eq!(vals[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(vals[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn log_inverts_exp_for_rotation_generators() {
        // generator of a plane rotation embedded in 4x4
        let mut g = RMat::zeros(4, 4);
        g[(2, 3)] = -1.3;
        g[(3, 2)] = 1.3;
        let e = g.clone().exp();
        let back = real_log(&e).unwrap();
        assert_abs_diff_eq!((back - g).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn log_of_identity_is_zero() {
        let l = real_log(&RMat::identity(4, 4)).unwrap();
        assert!(l.norm() < 1e-12);
    }

    #[test]
    fn log_rejects_negative_eigenvalues() {
        let mut m = RMat::identity(3, 3);
        m[(0, 0)] = -0.5;
        assert!(real_log(&m).is_err());
    }

    #[test]
    fn log_handles_contraction_plus_rotation() {
        // typical noisy-gate spectrum: {1, a, a e^{±iθ}}
        let mut g = RMat::zeros(4, 4);
        g[(1, 1)] = -0.02;
        g[(2, 2)] = -0.015;
        g[(3, 3)] = -0.015;
        g[(2, 3)] = -1.57;
        g[(3, 2)] = 1.57;
        let e = g.clone().exp();
        let back = real_log(&e).unwrap();
        assert_abs_diff_eq!((back - g).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn partial_trace_first_factor() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[C::new(1.0, 0.0), C::new(2.0, 0.0), C::new(3.0, 0.0), C::new(4.0, 0.0)],
        );
        let b = CMat::from_row_slice(
            2,
            2,
            &[C::new(0.5, 0.0), C::new(0.0, 0.7), C::new(0.0, -0.7), C::new(0.25, 0.0)],
        );
        let m = kron(&a, &b);
        let tr = trace_first(&m, 2, 2);
        // Tr(a) * b
        assert_abs_diff_eq!((tr - b * C::new(5.0, 0.0)).norm(), 0.0, epsilon = 1e-12);
    }
}
