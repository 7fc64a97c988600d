//! Seeded random instances: Haar frames, projections, densities and tensor
//! states. Every generator takes an explicit RNG so runs reproduce exactly;
//! there is no hidden global state.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::grassmann::{codiagonal_project, Projection, TangentVector};
use crate::linalg::{CMat, CVec};
use crate::spectral::DensityMatrix;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_complex(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

pub fn gaussian_vector(n: usize, rng: &mut impl Rng) -> CVec {
    CVec::from_fn(n, |_, _| gaussian_complex(rng))
}

/// Haar-distributed unitary via QR of a complex Gaussian matrix, with the
/// phase convention that makes the R diagonal positive.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..n {
                u[(i, j)] *= phase;
            }
        }
    }
    u
}

pub fn random_unit_vector(n: usize, rng: &mut impl Rng) -> CVec {
    let v = gaussian_vector(n, rng);
    let norm = v.norm();
    v.map(|z| z / norm)
}

pub fn random_hermitian(n: usize, rng: &mut impl Rng) -> CMat {
    let g = gaussian_matrix(n, n, rng);
    (&g + g.adjoint()).map(|z| z * 0.5)
}

/// Traceless Hermitian perturbation direction.
pub fn random_traceless_hermitian(n: usize, rng: &mut impl Rng) -> CMat {
    let mut h = random_hermitian(n, rng);
    let shift = h.diagonal().sum().re / n as f64;
    for i in 0..n {
        h[(i, i)] -= Complex64::new(shift, 0.0);
    }
    h
}

/// Full-rank random density: a Wishart matrix `G G†` (with a couple of
/// extra columns so the smallest eigenvalue stays comfortably positive),
/// normalized to unit trace.
pub fn random_density(n: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = gaussian_matrix(n, n + 2, rng);
    let w = &g * g.adjoint();
    let tr = w.diagonal().sum().re;
    DensityMatrix::new(w.map(|z| z / tr)).expect("wishart density")
}

/// Random density with prescribed eigenvalues and a Haar eigenbasis.
pub fn random_density_with_spectrum(weights: &[f64], rng: &mut impl Rng) -> DensityMatrix {
    let n = weights.len();
    let u = haar_unitary(n, rng);
    let mut acc = CMat::zeros(n, n);
    for (k, &w) in weights.iter().enumerate() {
        let col = u.column(k);
        acc += (col * col.adjoint()).map(|z| z * w);
    }
    DensityMatrix::new(acc).expect("spectral density")
}

/// Haar-random rank-`r` projection in dimension `n`.
pub fn random_projection(n: usize, r: usize, rng: &mut impl Rng) -> Projection {
    let u = haar_unitary(n, rng);
    let basis = u.columns(0, r);
    Projection::new(basis * basis.adjoint()).expect("rank-r projection")
}

/// Random tangent vector at `p` with roughly unit scale.
pub fn random_tangent(p: &Projection, rng: &mut impl Rng) -> TangentVector {
    let h = random_hermitian(p.dim(), rng);
    codiagonal_project(p, &h).expect("codiagonal part")
}

/// Random same-rank pair at bounded principal angles: the second projection
/// is the first transported by a scaled tangent.
pub fn random_projection_pair(
    n: usize,
    r: usize,
    max_angle: f64,
    rng: &mut impl Rng,
) -> (Projection, Projection) {
    let p = random_projection(n, r, rng);
    let z = random_tangent(&p, rng);
    let speed = z.speed();
    let scale = if speed > 1e-12 {
        // ||i[Z,P]||_HS = sqrt(2)||theta||_2, so this caps the max angle
        let target: f64 = rng.random_range(0.0..max_angle);
        target * std::f64::consts::SQRT_2 / speed
    } else {
        0.0
    };
    let zmat = z.matrix().map(|w| w * scale);
    let z = TangentVector::new(p.clone(), zmat).expect("scaled tangent");
    let q = crate::grassmann::geodesic_point(&p, &z, 1.0).expect("transported projection");
    (p, q)
}

/// Unit-norm random tensor-state coefficient matrix.
pub fn random_tensor_coeff(n: usize, rng: &mut impl Rng) -> CMat {
    let g = gaussian_matrix(n, n, rng);
    let norm = g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    g.map(|z| z / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frob_norm, lin_tol};

    #[test]
    fn haar_unitary_is_unitary_and_deterministic() {
        let mut rng = rng_from_seed(7);
        let u = haar_unitary(5, &mut rng);
        let defect = frob_norm(&(u.adjoint() * &u - CMat::identity(5, 5)));
        assert!(defect < lin_tol(5));
        let mut rng2 = rng_from_seed(7);
        let u2 = haar_unitary(5, &mut rng2);
        assert_eq!(u, u2);
    }

    #[test]
    fn random_density_validates() {
        let mut rng = rng_from_seed(11);
        for n in 1..=8 {
            let rho = random_density(n, &mut rng);
            assert_eq!(rho.dim(), n);
        }
    }

    #[test]
    fn projection_pair_respects_angle_bound() {
        let mut rng = rng_from_seed(3);
        for _ in 0..20 {
            let (p, q) = random_projection_pair(5, 2, 0.8, &mut rng);
            let angles = crate::grassmann::principal_angles(&p, &q).unwrap();
            let norm: f64 = angles.iter().map(|t| t * t).sum::<f64>();
            assert!(norm.sqrt() <= 0.8 + 1e-6);
        }
    }
}
