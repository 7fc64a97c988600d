//! Antilinear operators and their polar decomposition.
//!
//! An antilinear operator is stored through the matrix `A` of the linear map
//! `T ∘ conj`, so that `T x = A conj(x)` in the standard basis. All
//! antilinear algebra then reduces to ordinary matrix algebra plus explicit
//! conjugations. Under this encoding the antilinear adjoint is the plain
//! transpose: `T* x = Aᵀ conj(x)`.

use num_complex::Complex64;

use super::{frob_norm, is_finite, CMat, CVec};
use crate::error::{Error, Result};

/// Antilinear operator `x ↦ A conj(x)` in the standard basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AntilinearOp {
    mat: CMat,
}

impl AntilinearOp {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimMismatch {
                left: mat.nrows(),
                right: mat.ncols(),
            });
        }
        if !is_finite(&mat) {
            return Err(Error::NonFinite {
                context: "antilinear operator",
            });
        }
        Ok(Self { mat })
    }

    /// Plain complex conjugation in the standard basis.
    pub fn conjugation(dim: usize) -> Self {
        Self {
            mat: CMat::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn apply(&self, x: &CVec) -> CVec {
        &self.mat * x.map(|z| z.conj())
    }

    /// The antilinear adjoint, satisfying `<T* xi, eta> = <T eta, xi>`.
    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.transpose(),
        }
    }

    /// The linear operator `T* T` (matrix `Aᵀ conj(A)`), Hermitian PSD.
    pub fn gram(&self) -> CMat {
        self.mat.transpose() * self.mat.map(|z| z.conj())
    }

    /// The linear operator `T T*` (matrix `A A†`), Hermitian PSD.
    pub fn cogram(&self) -> CMat {
        &self.mat * self.mat.adjoint()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            mat: self.mat.map(|z| z * factor),
        }
    }

    /// Conjugate a linear operator: the matrix of `T M T*` restricted along
    /// the antilinear calculus, `A conj(M) A†`.
    pub fn sandwich(&self, m: &CMat) -> CMat {
        &self.mat * m.map(|z| z.conj()) * self.mat.adjoint()
    }
}

/// Left polar decomposition `T = U |T|` of an antilinear operator, with
/// `N(U) = N(|T|)`.
#[derive(Debug, Clone)]
pub struct AntilinearPolar {
    pub isometry: AntilinearOp,
    pub modulus: CMat,
}

/// Polar-decompose an antilinear operator.
///
/// Via the SVD of the stored matrix `A = W diag(s) V*`: the modulus is
/// `|T| = sqrt(T*T) = conj(V diag(s) V*)` and the antilinear partial
/// isometry has matrix `sum_{s_k > cutoff} w_k v_k*`, so no inverse of a
/// small singular value ever appears. Singular values below a relative
/// cutoff count as kernel, which realizes the normalization
/// `N(U) = N(|T|)`.
pub fn polar_antilinear(op: &AntilinearOp) -> Result<AntilinearPolar> {
    let n = op.dim();
    let decomp = crate::linalg::svd(&op.mat)?;
    let top = decomp.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = top * (n as f64) * 1e-13;

    let mut weighted = CMat::zeros(n, n);
    let mut isometry_mat = CMat::zeros(n, n);
    for (k, &sigma) in decomp.singular_values.iter().enumerate() {
        let v_row = decomp.v_t.row(k);
        let v_col = v_row.adjoint();
        weighted += (&v_col * v_row).map(|z| z * sigma);
        if sigma > cutoff {
            let w = decomp.u.column(k);
            isometry_mat += w * v_row;
        }
    }
    let modulus = weighted.map(|z| z.conj());
    Ok(AntilinearPolar {
        isometry: AntilinearOp { mat: isometry_mat },
        modulus,
    })
}

impl AntilinearPolar {
    /// `||T - U |T|||` for the decomposed operator.
    pub fn reconstruction_defect(&self, op: &AntilinearOp) -> f64 {
        let recon = &self.isometry.mat * self.modulus.map(|z| z.conj());
        frob_norm(&(recon - &op.mat))
    }

    /// Defect of the right modulus identity `|T*| = U |T| U*`.
    pub fn right_modulus_defect(&self, op: &AntilinearOp) -> Result<f64> {
        // |T*| = sqrt(A A†) = W diag(s) W* straight from the SVD; squaring
        // first would cost sqrt(eps) at small singular values
        let decomp = crate::linalg::svd(&op.mat)?;
        let n = op.dim();
        let mut right = CMat::zeros(n, n);
        for (k, &sigma) in decomp.singular_values.iter().enumerate() {
            let w = decomp.u.column(k);
            right += (w * w.adjoint()).map(|z| z * sigma);
        }
        let transported = self.isometry.sandwich(&self.modulus);
        Ok(frob_norm(&(transported - right)))
    }

    /// Defect of `(U*U)^2 = U*U`, i.e. how far the initial support is from
    /// being a projection.
    pub fn initial_support_defect(&self) -> f64 {
        let p = self.isometry.gram();
        frob_norm(&(&p * &p - &p))
    }
}

/// Check the adjoint pairing `<T* e_i, e_j> = <T e_j, e_i>` entrywise.
pub fn adjoint_pairing_defect(op: &AntilinearOp) -> f64 {
    let n = op.dim();
    let adj = op.adjoint();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let ei = CVec::from_fn(n, |k, _| {
            if k == i {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let t_star_ei = adj.apply(&ei);
        for j in 0..n {
            let ej = CVec::from_fn(n, |k, _| {
                if k == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            let lhs = t_star_ei.dotc(&ej);
            let rhs = op.apply(&ej).dotc(&ei);
            worst = worst.max((lhs - rhs).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{column_span_basis, lin_tol};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn conjugation_polar_is_trivial() {
        let t = AntilinearOp::conjugation(3);
        let polar = polar_antilinear(&t).unwrap();
        assert!(frob_norm(&(polar.modulus.clone() - CMat::identity(3, 3))) < 1e-12);
        assert!(polar.reconstruction_defect(&t) < 1e-12);
    }

    #[test]
    fn rank_deficient_polar() {
        // A = diag(2, 0): |T| = diag(2, 0), U acts as conjugation on
        // span(e1) and kills e2.
        let t = AntilinearOp::new(CMat::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        ))
        .unwrap();
        let polar = polar_antilinear(&t).unwrap();
        let expected = CMat::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        assert!(frob_norm(&(polar.modulus.clone() - expected)) < 1e-12);
        assert!(
            frob_norm(
                &(polar.isometry.matrix()
                    - CMat::from_row_slice(
                        2,
                        2,
                        &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]
                    ))
            ) < 1e-12
        );
        // kernel of U equals kernel of |T|
        let span_u = column_span_basis(polar.isometry.matrix(), 1e-10).unwrap();
        let span_mod = column_span_basis(&polar.modulus, 1e-10).unwrap();
        assert_eq!(span_u.ncols(), span_mod.ncols());
    }

    #[test]
    fn zero_operator_polar() {
        let t = AntilinearOp::new(CMat::zeros(2, 2)).unwrap();
        let polar = polar_antilinear(&t).unwrap();
        assert!(frob_norm(&polar.modulus) < 1e-14);
        assert!(frob_norm(polar.isometry.matrix()) < 1e-14);
    }

    #[test]
    fn adjoint_pairing_holds() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[c(1.0, 2.0), c(-0.5, 0.3), c(0.0, 1.0), c(2.0, -1.0)],
        );
        let t = AntilinearOp::new(a).unwrap();
        assert!(adjoint_pairing_defect(&t) < lin_tol(2));
    }

    #[test]
    fn antilinear_apply_conjugates_scalars() {
        let t = AntilinearOp::conjugation(2);
        let x = CVec::from_vec(vec![c(1.0, 1.0), c(0.0, -2.0)]);
        let lam = c(0.0, 1.0);
        let lhs = t.apply(&x.map(|z| z * lam));
        let rhs = t.apply(&x).map(|z| z * lam.conj());
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
