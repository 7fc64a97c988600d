//! The Grassmannian of finite-rank orthogonal projections as a geodesic
//! metric space.
//!
//! Points are Hermitian idempotents `P`; the tangent space at `P` consists
//! of the Hermitian operators that are codiagonal with respect to `P`
//! (`PZP = (1-P)Z(1-P) = 0`), and geodesics take the form
//! `t ↦ exp(itZ) P exp(-itZ)`. Distances between equal-rank projections are
//! computed through principal angles; projections of different rank live in
//! different connected components and sit at infinite distance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    frob_norm, hermitian_defect, is_finite, lin_tol, matrix_from_json, matrix_to_json, svd,
    unitary_exp, unitary_exp_skew, CMat, CVec, MatrixJson,
};

/// Principal angles this close to pi/2 are treated as the cut locus.
pub const CUT_LOCUS_MARGIN: f64 = 1e-9;

/// Normalization of the geodesic distance.
///
/// `Canonical` is `||theta||_2` over the principal angles, matching the
/// diameter pi/2 on rank-one components. `Embedded` carries the extra
/// sqrt(2) of the Hilbert-Schmidt submanifold metric, so that the speed of
/// `t ↦ exp(itZ) P exp(-itZ)` equals `||i[Z,P]||_HS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DistanceScale {
    #[default]
    #[serde(rename = "canonical")]
    Canonical,
    #[serde(rename = "embedded")]
    Embedded,
}

impl DistanceScale {
    pub fn factor(self) -> f64 {
        match self {
            DistanceScale::Canonical => 1.0,
            DistanceScale::Embedded => std::f64::consts::SQRT_2,
        }
    }
}

/// A finite-rank orthogonal projection (`P = P*`, `P^2 = P`, rank >= 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    mat: CMat,
    rank: usize,
}

impl Projection {
    pub fn new(mat: CMat) -> Result<Self> {
        let n = mat.nrows();
        if n != mat.ncols() {
            return Err(Error::DimMismatch {
                left: n,
                right: mat.ncols(),
            });
        }
        if !is_finite(&mat) {
            return Err(Error::NonFinite {
                context: "projection",
            });
        }
        let tol = lin_tol(n);
        let herm = hermitian_defect(&mat);
        if herm > tol {
            return Err(Error::NotHermitian {
                deviation: herm,
                tol,
            });
        }
        let idem = frob_norm(&(&mat * &mat - &mat));
        if idem > tol {
            return Err(Error::Validation {
                path: "projection".into(),
                reason: format!("not idempotent: ||P^2 - P|| = {idem:.3e}"),
            });
        }
        let tr = mat.diagonal().sum().re;
        let rank = tr.round() as usize;
        if rank == 0 || (tr - rank as f64).abs() > tol {
            return Err(Error::Validation {
                path: "projection".into(),
                reason: format!("trace {tr} is not a positive integer rank"),
            });
        }
        Ok(Self { mat, rank })
    }

    /// Projection onto the span of the given vectors (need not be
    /// orthonormal, must be linearly independent).
    pub fn from_span(vectors: &[CVec]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::Validation {
                path: "projection".into(),
                reason: "empty span".into(),
            });
        }
        let n = vectors[0].len();
        let mut m = CMat::zeros(n, vectors.len());
        for (j, v) in vectors.iter().enumerate() {
            if v.norm() < 1e-12 {
                return Err(Error::ZeroVector { index: j });
            }
            m.set_column(j, v);
        }
        let basis = crate::linalg::column_span_basis(&m, n as f64 * 1e-12)?;
        if basis.ncols() != vectors.len() {
            return Err(Error::Validation {
                path: "projection".into(),
                reason: "spanning vectors are linearly dependent".into(),
            });
        }
        Self::new(&basis * basis.adjoint())
    }

    /// Rank-one projection onto the line through `v`.
    pub fn line(v: &CVec) -> Result<Self> {
        Self::from_span(std::slice::from_ref(v))
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Orthonormal basis of the range, `dim x rank`.
    pub fn range_basis(&self) -> CMat {
        let decomp = svd(&self.mat).expect("projection is finite");
        decomp.u.columns(0, self.rank).into()
    }

    /// Orthonormal basis of the kernel, `dim x (dim - rank)`.
    pub fn kernel_basis(&self) -> CMat {
        let complement = CMat::identity(self.dim(), self.dim()) - &self.mat;
        let decomp = svd(&complement).expect("projection is finite");
        decomp.u.columns(0, self.dim() - self.rank).into()
    }

    /// Frobenius defect of `Q <= P` (zero iff `self` dominates `other`).
    pub fn subprojection_defect(&self, other: &Projection) -> f64 {
        frob_norm(&(&other.mat * &self.mat - &other.mat))
    }

    pub fn to_json(&self) -> ProjectionJson {
        ProjectionJson {
            matrix: matrix_to_json(&self.mat),
            rank: self.rank,
        }
    }

    pub fn from_json(json: &ProjectionJson) -> Result<Self> {
        let proj = Self::new(matrix_from_json(&json.matrix)?)?;
        if proj.rank != json.rank {
            return Err(Error::Validation {
                path: "projection".into(),
                reason: format!("declared rank {} but trace gives {}", json.rank, proj.rank),
            });
        }
        Ok(proj)
    }
}

/// Projection wire format: matrix plus declared rank, re-verified on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionJson {
    pub matrix: MatrixJson,
    pub rank: usize,
}

/// A tangent vector at a base projection: Hermitian and codiagonal.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: Projection,
    mat: CMat,
}

impl TangentVector {
    pub fn new(base: Projection, mat: CMat) -> Result<Self> {
        let defect = codiagonal_defect(&base, &mat);
        let tol = lin_tol(base.dim()) * (1.0 + frob_norm(&mat));
        if defect > tol {
            return Err(Error::NotTangent { deviation: defect });
        }
        Ok(Self { base, mat })
    }

    pub fn base(&self) -> &Projection {
        &self.base
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Initial velocity `i[Z, P]` of the geodesic generated by this vector.
    pub fn velocity(&self) -> CMat {
        let z = &self.mat;
        let p = &self.base.mat;
        (z * p - p * z).map(|w| w * Complex64::new(0.0, 1.0))
    }

    /// Hilbert-Schmidt norm of the velocity, i.e. the geodesic speed in the
    /// embedded metric.
    pub fn speed(&self) -> f64 {
        frob_norm(&self.velocity())
    }
}

fn codiagonal_defect(base: &Projection, x: &CMat) -> f64 {
    let p = &base.mat;
    let q = CMat::identity(p.nrows(), p.ncols()) - p;
    let herm = hermitian_defect(x);
    frob_norm(&(p * x * p)) + frob_norm(&(&q * x * &q)) + herm
}

/// Codiagonal part of a Hermitian operator at `P`:
/// `PX(1-P) + (1-P)XP`, the orthogonal projection onto the tangent space.
pub fn codiagonal_project(base: &Projection, x: &CMat) -> Result<TangentVector> {
    let tol = lin_tol(base.dim()) * (1.0 + frob_norm(x));
    let herm = hermitian_defect(x);
    if herm > tol {
        return Err(Error::NotHermitian {
            deviation: herm,
            tol,
        });
    }
    let p = &base.mat;
    let q = CMat::identity(p.nrows(), p.ncols()) - p;
    let projected = p * x * &q + &q * x * p;
    TangentVector::new(base.clone(), projected)
}

/// Point `exp(itZ) P exp(-itZ)` of the geodesic generated by `Z` at `P`.
pub fn geodesic_point(base: &Projection, z: &TangentVector, t: f64) -> Result<Projection> {
    if frob_norm(&(base.matrix() - z.base().matrix())) > lin_tol(base.dim()) {
        return Err(Error::BaseMismatch);
    }
    let u = unitary_exp(&z.mat, t)?;
    let conjugated = &u * &base.mat * u.adjoint();
    let symmetrized = (&conjugated + conjugated.adjoint()).map(|w| w * 0.5);
    Projection::new(symmetrized)
}

/// Principal angles between two equal-rank subspaces, in `[0, pi/2]`,
/// non-decreasing: `theta_i = arccos(sigma_i)` for the singular values of
/// the range-basis overlap.
pub fn principal_angles(p: &Projection, q: &Projection) -> Result<Vec<f64>> {
    if p.rank != q.rank {
        return Err(Error::RankMismatch {
            left: p.rank,
            right: q.rank,
        });
    }
    let overlap = p.range_basis().adjoint() * q.range_basis();
    let sigma = svd(&overlap)?.singular_values;
    Ok(sigma
        .iter()
        .map(|&s| s.clamp(0.0, 1.0).acos())
        .collect())
}

/// Deterministic order on projection matrices, used to make the distance
/// computation symmetric bit for bit.
fn matrix_order(a: &CMat, b: &CMat) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let ord = x
            .re
            .partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap());
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

/// Geodesic distance: `scale * ||theta||_2`, or `+inf` across components.
/// Exactly zero when the matrices agree within the linear tolerance.
pub fn distance(p: &Projection, q: &Projection, scale: DistanceScale) -> f64 {
    if p.rank != q.rank {
        return f64::INFINITY;
    }
    if frob_norm(&(&p.mat - &q.mat)) <= lin_tol(p.dim()) {
        return 0.0;
    }
    let (first, second) = if matrix_order(&p.mat, &q.mat) == std::cmp::Ordering::Greater {
        (q, p)
    } else {
        (p, q)
    };
    let angles = principal_angles(first, second).expect("ranks checked");
    let norm = angles.iter().map(|t| t * t).sum::<f64>().sqrt();
    scale.factor() * norm
}

/// Inverse of the geodesic exponential: the codiagonal generator `Z` with
/// `exp(iZ) P exp(-iZ) = Q`, defined when all principal angles stay below
/// the cut locus.
///
/// Built from principal vectors: for each angle `theta_k` with cosine
/// direction `xi_k` in `R(P)` and sine direction `zeta_k` orthogonal to it,
/// `Z` rotates the plane `(xi_k, zeta_k)` by `theta_k`.
pub fn log_map(p: &Projection, q: &Projection) -> Result<TangentVector> {
    if p.rank != q.rank {
        return Err(Error::RankMismatch {
            left: p.rank,
            right: q.rank,
        });
    }
    let n = p.dim();
    let yp = p.range_basis();
    let yq = q.range_basis();
    let overlap = yp.adjoint() * &yq;
    let decomp = svd(&overlap)?;

    let mut z = CMat::zeros(n, n);
    for k in 0..p.rank {
        let sigma = decomp.singular_values[k].clamp(0.0, 1.0);
        let xi: CVec = (&yp * decomp.u.column(k)).column(0).into();
        let v_col: CVec = decomp.v_t.row(k).adjoint().column(0).into();
        let eta: CVec = (&yq * &v_col).column(0).into();
        // sine part of eta relative to R(P); atan2 keeps small angles exact
        let w = &eta - p.matrix() * &eta;
        let s = w.norm();
        let theta = s.atan2(sigma);
        if theta >= std::f64::consts::FRAC_PI_2 - CUT_LOCUS_MARGIN {
            return Err(Error::CutLocus { angle: theta });
        }
        if s > 1e-14 {
            let zeta = w.map(|c| c / s);
            let outer = (&xi * zeta.adjoint()).map(|c| c * Complex64::new(0.0, theta));
            z += &outer;
            z += outer.adjoint();
        }
    }
    TangentVector::new(p.clone(), z)
}

/// A Hilbert-space embedding of C^r: an `n x r` matrix with orthonormal
/// columns (a point of the Stiefel manifold).
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    mat: CMat,
}

impl StiefelPoint {
    pub fn new(mat: CMat) -> Result<Self> {
        if !is_finite(&mat) {
            return Err(Error::NonFinite { context: "stiefel" });
        }
        let gram = mat.adjoint() * &mat;
        let defect = frob_norm(&(gram - CMat::identity(mat.ncols(), mat.ncols())));
        if defect > lin_tol(mat.nrows()) {
            return Err(Error::Validation {
                path: "stiefel".into(),
                reason: format!("columns not orthonormal: defect {defect:.3e}"),
            });
        }
        Ok(Self { mat })
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Image under the bundle projection onto the Grassmannian.
    pub fn projection(&self) -> Result<Projection> {
        Projection::new(&self.mat * self.mat.adjoint())
    }
}

/// Closed-form Stiefel geodesic `gamma(t) = exp(tM) exp(-tQ) phi0` with the
/// block generators
/// `A = 2 (phi0 phi0*) X phi0*` and `B = phi0 X* (phi0 phi0* - 1)`,
/// so that `gamma(0) = phi0` and `gamma'(0) = X`.
pub fn stiefel_geodesic(phi0: &StiefelPoint, x: &CMat, t: f64) -> Result<StiefelPoint> {
    let n = phi0.mat.nrows();
    let r = phi0.mat.ncols();
    if x.nrows() != n || x.ncols() != r {
        return Err(Error::DimMismatch {
            left: x.nrows() * x.ncols(),
            right: n * r,
        });
    }
    let tangency = frob_norm(&(x.adjoint() * &phi0.mat + phi0.mat.adjoint() * x));
    if tangency > lin_tol(n) * (1.0 + frob_norm(x)) {
        return Err(Error::NotTangent {
            deviation: tangency,
        });
    }
    let pi = &phi0.mat * phi0.mat.adjoint();
    let eye = CMat::identity(n, n);
    let a_full = (&pi * x * phi0.mat.adjoint()).map(|z| z * 2.0);
    let b_full = &phi0.mat * x.adjoint() * (&pi - &eye);
    let c_full = (&eye - &pi) * x * phi0.mat.adjoint();
    let m_raw = &a_full + &b_full + &c_full;
    let q_raw = &pi * x * phi0.mat.adjoint();
    // project out roundoff so the exponentials stay exactly unitary
    let m_skew = (&m_raw - m_raw.adjoint()).map(|z| z * 0.5);
    let q_skew = (&q_raw - q_raw.adjoint()).map(|z| z * 0.5);
    let left = unitary_exp_skew(&m_skew, t)?;
    let right = unitary_exp_skew(&q_skew, -t)?;
    StiefelPoint::new(left * right * &phi0.mat)
}

/// Central-difference residual of the geodesic equation
/// `gamma'' + gamma (gamma'* gamma') = 0` at time `t`, step `h`.
pub fn stiefel_geodesic_residual(
    phi0: &StiefelPoint,
    x: &CMat,
    t: f64,
    h: f64,
) -> Result<f64> {
    let center = stiefel_geodesic(phi0, x, t)?;
    let plus = stiefel_geodesic(phi0, x, t + h)?;
    let minus = stiefel_geodesic(phi0, x, t - h)?;
    let vel = (plus.matrix() - minus.matrix()).map(|z| z / (2.0 * h));
    let acc = (plus.matrix() + minus.matrix() - center.matrix().map(|z| z * 2.0))
        .map(|z| z / (h * h));
    let residual = &acc + center.matrix() * (vel.adjoint() * &vel);
    Ok(frob_norm(&residual))
}

/// Curvature tensor `R(X,Y)Z = [[X,Y],Z]` at a common base point.
pub fn curvature_tensor(x: &TangentVector, y: &TangentVector, z: &TangentVector) -> Result<CMat> {
    let tol = lin_tol(x.base.dim());
    if frob_norm(&(&x.base.mat - &y.base.mat)) > tol
        || frob_norm(&(&x.base.mat - &z.base.mat)) > tol
    {
        return Err(Error::BaseMismatch);
    }
    let xy = x.matrix() * y.matrix() - y.matrix() * x.matrix();
    Ok(&xy * z.matrix() - z.matrix() * &xy)
}

/// Real Hilbert-Schmidt pairing `Re tr(A* B)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// The Alexandrov comparison for nonnegative curvature:
/// `d(p,x)^2 + d(p,y)^2 + d(p,z)^2 >= (d(x,y)^2 + d(y,z)^2 + d(z,x)^2)/3`.
pub fn four_point_check(
    p: &Projection,
    x: &Projection,
    y: &Projection,
    z: &Projection,
    scale: DistanceScale,
) -> Result<bool> {
    for other in [x, y, z] {
        if other.rank != p.rank {
            return Err(Error::RankMismatch {
                left: p.rank,
                right: other.rank,
            });
        }
    }
    let d2 = |a: &Projection, b: &Projection| distance(a, b, scale).powi(2);
    let lhs = d2(p, x) + d2(p, y) + d2(p, z);
    let rhs = (d2(x, y) + d2(y, z) + d2(z, x)) / 3.0;
    Ok(lhs >= rhs - 1e-9)
}

/// Transport a subprojection `Q <= P` along the geodesic generated by `Z`:
/// returns `Q1 = exp(iZ) Q exp(-iZ)`, the distance `d(Q, Q1)` and the length
/// of the geodesic through `P`. The transported distance never exceeds the
/// geodesic length.
pub fn subprojection_transport(
    p: &Projection,
    q: &Projection,
    z: &TangentVector,
    scale: DistanceScale,
) -> Result<(Projection, f64, f64)> {
    let defect = p.subprojection_defect(q);
    if defect > lin_tol(p.dim()) {
        return Err(Error::NotSubprojection { deviation: defect });
    }
    if frob_norm(&(p.matrix() - z.base().matrix())) > lin_tol(p.dim()) {
        return Err(Error::BaseMismatch);
    }
    let u = unitary_exp(z.matrix(), 1.0)?;
    let q1_mat = &u * q.matrix() * u.adjoint();
    let q1 = Projection::new((&q1_mat + q1_mat.adjoint()).map(|w| w * 0.5))?;
    let dq = distance(q, &q1, scale);
    let dp = z.speed() * scale.factor() / std::f64::consts::SQRT_2;
    Ok((q1, dq, dp))
}
