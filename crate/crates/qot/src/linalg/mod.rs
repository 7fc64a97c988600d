//! Dense complex linear algebra substrate: Hermitian eigendecomposition,
//! SVD, unitary exponentials, trace norms and antilinear operators.
//!
//! Everything downstream (projections, densities, transport costs) reduces
//! to the handful of primitives in this module. Matrices are
//! `nalgebra::DMatrix<Complex64>` throughout; the inner product is
//! antilinear in the first argument, `inner(x, y) = x† y`.

mod antilinear;
mod json;

pub use antilinear::{adjoint_pairing_defect, polar_antilinear, AntilinearOp, AntilinearPolar};
pub use json::{matrix_from_json, matrix_to_json, MatrixJson};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Tolerance for linear-algebra identities at a given ambient dimension.
pub fn lin_tol(dim: usize) -> f64 {
    1e-10 * dim.max(1) as f64
}

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const CLUSTER_GAP: f64 = 1e-8;

pub fn inner(x: &CVec, y: &CVec) -> Complex64 {
    x.dotc(y)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn frob_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    frob_norm(&(m - m.adjoint()))
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().sum()
}

fn check_finite(m: &CMat, context: &'static str) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

fn check_hermitian(m: &CMat, context: &'static str) -> Result<()> {
    check_finite(m, context)?;
    let defect = hermitian_defect(m);
    let tol = lin_tol(m.nrows());
    if defect > tol {
        return Err(Error::NotHermitian {
            deviation: defect,
            tol,
        });
    }
    Ok(())
}

/// Spectral data of a Hermitian matrix: eigenvalues in non-increasing order
/// with orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

/// A maximal run of eigenvalues closer than the cluster gap, treated as a
/// single eigenspace downstream.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    /// Mean eigenvalue of the cluster.
    pub value: f64,
    /// Column range of the associated eigenvectors.
    pub cols: std::ops::Range<usize>,
}

impl HermitianSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn reconstruct(&self) -> CMat {
        let n = self.dim();
        let mut acc = CMat::zeros(n, n);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(k);
            acc += (v * v.adjoint()).map(|z| z * lambda);
        }
        acc
    }

    /// Group eigenvalues into degenerate clusters (consecutive gap < `gap`).
    pub fn clusters(&self, gap: f64) -> Vec<EigenCluster> {
        let mut out = Vec::new();
        let n = self.eigenvalues.len();
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && (self.eigenvalues[end - 1] - self.eigenvalues[end]).abs() < gap {
                end += 1;
            }
            let value =
                self.eigenvalues[start..end].iter().sum::<f64>() / (end - start) as f64;
            out.push(EigenCluster {
                value,
                cols: start..end,
            });
            start = end;
        }
        out
    }

    /// Orthogonal projection onto the eigenspace of a cluster.
    pub fn cluster_projection(&self, cluster: &EigenCluster) -> CMat {
        let basis = self.eigenvectors.columns_range(cluster.cols.clone());
        basis * basis.adjoint()
    }
}

/// Deterministic total order on complex numbers (real part, then imaginary).
fn cmp_complex(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap()
        .then(a.im.partial_cmp(&b.im).unwrap())
}

/// Rotate the column so its first entry of significant modulus is positive
/// real. Removes the phase gauge so repeated runs agree bit for bit.
fn phase_normalize(col: &mut CVec) {
    let lead = col.iter().find(|z| z.norm() > 1e-12);
    if let Some(z) = lead {
        let phase = z / z.norm();
        let correction = phase.conj();
        for entry in col.iter_mut() {
            *entry *= correction;
        }
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues come out non-increasing; exact ties are broken by the
/// lexicographic order of the phase-normalized eigenvector entries.
/// Numerically degenerate clusters are re-orthonormalized jointly so that
/// downstream code sees genuine eigenspaces rather than split ones.
pub fn hermitian_eig(m: &CMat) -> Result<HermitianSpectrum> {
    check_hermitian(m, "hermitian_eig input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(HermitianSpectrum {
            eigenvalues: Vec::new(),
            eigenvectors: CMat::zeros(0, 0),
        });
    }
    let sym = (m + m.adjoint()).map(|z| z * 0.5);
    let decomp = nalgebra::linalg::SymmetricEigen::new(sym);

    let mut cols: Vec<(f64, CVec)> = (0..n)
        .map(|k| {
            let mut v: CVec = decomp.eigenvectors.column(k).into();
            phase_normalize(&mut v);
            (decomp.eigenvalues[k], v)
        })
        .collect();
    cols.sort_by(|a, b| {
        b.0.partial_cmp(&a.0).unwrap().then_with(|| {
            for (x, y) in a.1.iter().zip(b.1.iter()) {
                let ord = cmp_complex(x, y);
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    });

    let eigenvalues: Vec<f64> = cols.iter().map(|c| c.0).collect();
    let mut eigenvectors = CMat::zeros(n, n);
    for (k, (_, v)) in cols.iter().enumerate() {
        eigenvectors.set_column(k, v);
    }

    let mut spectrum = HermitianSpectrum {
        eigenvalues,
        eigenvectors,
    };
    reorthonormalize_clusters(&mut spectrum);
    Ok(spectrum)
}

/// QR-clean the eigenvector columns inside each degenerate cluster.
fn reorthonormalize_clusters(spectrum: &mut HermitianSpectrum) {
    let clusters = spectrum.clusters(CLUSTER_GAP);
    for cluster in clusters.iter().filter(|c| c.cols.len() > 1) {
        let block: CMat = spectrum
            .eigenvectors
            .columns_range(cluster.cols.clone())
            .into();
        let qr = block.qr();
        let q = qr.q();
        for (offset, col) in cluster.cols.clone().enumerate() {
            let mut v: CVec = q.column(offset).into();
            phase_normalize(&mut v);
            spectrum.eigenvectors.set_column(col, &v);
        }
    }
}

/// The unitary `exp(i t Z)` for Hermitian `Z`, via eigendecomposition.
pub fn unitary_exp(z: &CMat, t: f64) -> Result<CMat> {
    let spectrum = hermitian_eig(z)?;
    let n = z.nrows();
    let mut diag = CMat::zeros(n, n);
    for (k, &lambda) in spectrum.eigenvalues.iter().enumerate() {
        diag[(k, k)] = Complex64::from_polar(1.0, t * lambda);
    }
    Ok(&spectrum.eigenvectors * diag * spectrum.eigenvectors.adjoint())
}

/// `exp(t M)` for skew-adjoint `M` (so `-iM` is Hermitian).
pub fn unitary_exp_skew(m: &CMat, t: f64) -> Result<CMat> {
    let h = m.map(|z| z * Complex64::new(0.0, -1.0));
    unitary_exp(&h, t)
}

/// Square root of a positive semidefinite Hermitian matrix. Slightly
/// negative eigenvalues (roundoff) are clamped to zero.
pub fn hermitian_sqrt(m: &CMat) -> Result<CMat> {
    let spectrum = hermitian_eig(m)?;
    let n = m.nrows();
    let mut acc = CMat::zeros(n, n);
    for (k, &lambda) in spectrum.eigenvalues.iter().enumerate() {
        let root = lambda.max(0.0).sqrt();
        let v = spectrum.eigenvectors.column(k);
        acc += (v * v.adjoint()).map(|z| z * root);
    }
    Ok(acc)
}

/// Singular value decomposition `M = U diag(s) V*` with `s` non-increasing,
/// `U` of shape `rows x k` and `V*` of shape `k x cols`, `k = min(rows,
/// cols)`.
pub struct Svd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v_t: CMat,
}

/// SVD through the Hermitian eigendecomposition of the smaller Gram matrix.
///
/// The factor on the Gram side inherits the cluster re-orthonormalization
/// of `hermitian_eig`; the opposite factor comes from normalized images,
/// which stay exactly orthonormal inside degenerate clusters. Singular
/// values are refined as image norms, which keeps tiny ones at roundoff
/// scale instead of sqrt(eps).
pub fn svd(m: &CMat) -> Result<Svd> {
    check_finite(m, "svd input")?;
    let (rows, cols) = (m.nrows(), m.ncols());
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: CMat::zeros(rows, 0),
            singular_values: Vec::new(),
            v_t: CMat::zeros(0, cols),
        });
    }
    let (gram_side, image_map) = if rows <= cols {
        (m * m.adjoint(), m.adjoint())
    } else {
        (m.adjoint() * m, m.clone())
    };
    let eig = hermitian_eig(&gram_side)?;
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let cutoff = top.sqrt() * (rows.max(cols) as f64) * 1e-14;

    let mut entries: Vec<(f64, CVec, Option<CVec>)> = Vec::with_capacity(k);
    for col in 0..k {
        let w: CVec = eig.eigenvectors.column(col).into();
        let image = &image_map * &w;
        let sigma = image.norm();
        if sigma > cutoff {
            entries.push((sigma, w, Some(image.map(|z| z / sigma))));
        } else {
            entries.push((sigma, w, None));
        }
    }
    entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    // orthonormal completion of the image factor on the null part
    let image_dim = image_map.nrows();
    let computed: Vec<&CVec> = entries.iter().filter_map(|e| e.2.as_ref()).collect();
    let missing = k - computed.len();
    let completion = if missing > 0 {
        let mut perp = CMat::identity(image_dim, image_dim);
        for v in &computed {
            perp -= *v * v.adjoint();
        }
        let perp_eig = hermitian_eig(&perp)?;
        (0..missing)
            .map(|i| -> CVec { perp_eig.eigenvectors.column(i).into() })
            .collect::<Vec<_>>()
    } else {
        Vec::new()
    };

    let mut singular_values = Vec::with_capacity(k);
    let mut gram_factor = CMat::zeros(gram_side.nrows(), k);
    let mut image_factor = CMat::zeros(image_dim, k);
    let mut fill = completion.into_iter();
    for (col, (sigma, w, image)) in entries.into_iter().enumerate() {
        singular_values.push(sigma);
        gram_factor.set_column(col, &w);
        match image {
            Some(v) => image_factor.set_column(col, &v),
            None => image_factor.set_column(col, &fill.next().expect("completion vector")),
        }
    }
    if rows <= cols {
        Ok(Svd {
            u: gram_factor,
            singular_values,
            v_t: image_factor.adjoint(),
        })
    } else {
        Ok(Svd {
            u: image_factor,
            singular_values,
            v_t: gram_factor.adjoint(),
        })
    }
}

/// Trace norm `tr|M|`, the sum of singular values.
pub fn trace_norm(m: &CMat) -> Result<f64> {
    Ok(svd(m)?.singular_values.iter().sum())
}

/// Thin orthonormal basis of the column span of `m`, keeping columns whose
/// singular value exceeds `rank_tol`.
pub fn column_span_basis(m: &CMat, rank_tol: f64) -> Result<CMat> {
    let decomp = svd(m)?;
    let rank = decomp
        .singular_values
        .iter()
        .take_while(|&&s| s > rank_tol)
        .count();
    Ok(decomp.u.columns(0, rank).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eig_diagonal() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
        let s = hermitian_eig(&m).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvalues[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvectors[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvectors[(1, 1)].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eig_pauli_x() {
        // characteristic polynomial by hand: eigenvalues 1, -1 with
        // eigenvectors (e1 ± e2)/sqrt(2)
        let m = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let s = hermitian_eig(&m).unwrap();
        assert_abs_diff_eq!(s.eigenvalues[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvalues[1], -1.0, epsilon = 1e-12);
        let r = 0.5f64.sqrt();
        assert_abs_diff_eq!(s.eigenvectors[(0, 0)].re, r, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvectors[(1, 0)].re, r, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvectors[(1, 1)].re, -r, epsilon = 1e-10);
    }

    #[test]
    fn eig_identity_reconstructs() {
        let m = CMat::identity(4, 4);
        let s = hermitian_eig(&m).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-12));
        assert!(frob_norm(&(s.reconstruct() - &m)) < lin_tol(4));
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(
            hermitian_eig(&m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn eig_rejects_nan() {
        let m = CMat::from_row_slice(1, 1, &[c(f64::NAN, 0.0)]);
        assert!(matches!(hermitian_eig(&m), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn exp_zero_is_identity() {
        let z = CMat::zeros(3, 3);
        let u = unitary_exp(&z, 1.7).unwrap();
        assert!(frob_norm(&(u - CMat::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn exp_diagonal_at_pi() {
        let z = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        let u = unitary_exp(&z, std::f64::consts::PI).unwrap();
        assert!(frob_norm(&(u + CMat::identity(2, 2))) < 1e-10);
    }

    #[test]
    fn exp_involution_series_identity() {
        // Z^2 = I gives exp(itZ) = cos(t) I + i sin(t) Z
        let z = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let t = std::f64::consts::FRAC_PI_2;
        let u = unitary_exp(&z, t).unwrap();
        let expected = z.map(|w| w * Complex64::new(0.0, t.sin()))
            + CMat::identity(2, 2).map(|w| w * t.cos());
        assert!(frob_norm(&(u - expected)) < 1e-12);
    }

    #[test]
    fn trace_norm_diagonal() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-2.0, 0.0)]));
        assert_abs_diff_eq!(trace_norm(&m).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_norm_rank_one() {
        // single singular value |xi| |eta|
        let xi = CVec::from_vec(vec![c(1.0, 1.0), c(2.0, 0.0)]);
        let eta = CVec::from_vec(vec![c(0.0, 3.0), c(4.0, 0.0), c(0.0, 0.0)]);
        let m = &xi * eta.adjoint();
        assert_abs_diff_eq!(
            trace_norm(&m).unwrap(),
            xi.norm() * eta.norm(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn svd_zero() {
        let m = CMat::zeros(2, 3);
        let s = svd(&m).unwrap();
        assert!(s.singular_values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sqrt_of_psd() {
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        let r = hermitian_sqrt(&m).unwrap();
        assert!(frob_norm(&(&r * &r - &m)) < 1e-10);
    }
}
