//! Density matrices and their discrete spectral-projection measures.
//!
//! The spectral decomposition of a density matrix, listed without repeated
//! eigenvalues, is a discrete measure on the Grassmannian: an atom
//! `(lambda_i, P_i)` per distinct eigenvalue, kernel excluded. Integration
//! sends a measure back to the operator `sum lambda_i P_i`; it is a left
//! inverse of the spectral map but not a right one, because a density has
//! many orthogonal representations once eigenvalues repeat. Those
//! representations are parametrized here by per-eigenspace unitary frames
//! and rank splits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{distance, DistanceScale, Projection, ProjectionJson};
use crate::linalg::{
    frob_norm, hermitian_defect, hermitian_eig, is_finite, lin_tol, trace_norm, CMat, CVec,
    EigenCluster, HermitianSpectrum, CLUSTER_GAP,
};
use crate::WEIGHT_FLOOR;

/// Positive semidefinite, unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    pub fn new(mat: CMat) -> Result<Self> {
        let n = mat.nrows();
        if n != mat.ncols() {
            return Err(Error::DimMismatch {
                left: n,
                right: mat.ncols(),
            });
        }
        if !is_finite(&mat) {
            return Err(Error::NonFinite { context: "density" });
        }
        let tol = lin_tol(n);
        let herm = hermitian_defect(&mat);
        if herm > tol {
            return Err(Error::InvalidDensity {
                reason: format!("not Hermitian: defect {herm:.3e}"),
            });
        }
        let spectrum = hermitian_eig(&mat)?;
        if let Some(&min) = spectrum
            .eigenvalues
            .last()
            .filter(|&&min| min < -tol)
        {
            return Err(Error::InvalidDensity {
                reason: format!("negative eigenvalue {min:.3e}"),
            });
        }
        let tr = mat.diagonal().sum().re;
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidDensity {
                reason: format!("trace {tr} differs from 1"),
            });
        }
        Ok(Self { mat })
    }

    /// The pure state `|v><v| / ||v||^2`.
    pub fn pure(v: &CVec) -> Result<Self> {
        let norm = v.norm();
        if norm < 1e-12 {
            return Err(Error::ZeroVector { index: 0 });
        }
        let unit = v.map(|z| z / norm);
        Self::new(&unit * unit.adjoint())
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            mat: CMat::identity(n, n).map(|z| z / n as f64),
        }
    }

    /// Diagonal density from a probability vector.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        Self::new(CMat::from_fn(n, n, |i, j| {
            if i == j {
                num_complex::Complex64::new(weights[i], 0.0)
            } else {
                num_complex::Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn spectrum(&self) -> HermitianSpectrum {
        hermitian_eig(&self.mat).expect("validated on construction")
    }

    /// Eigenvalue clusters above the kernel threshold, largest first.
    pub fn eigen_clusters(&self) -> Vec<(EigenCluster, HermitianSpectrum)> {
        let spectrum = self.spectrum();
        spectrum
            .clusters(CLUSTER_GAP)
            .into_iter()
            .filter(|c| c.value > CLUSTER_GAP)
            .map(|c| (c, spectrum.clone()))
            .collect()
    }

    /// Trace-norm distance to another density.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        trace_norm(&(&self.mat - &other.mat))
    }
}

/// One atom of a discrete measure on the Grassmannian.
#[derive(Debug, Clone)]
pub struct Atom {
    pub weight: f64,
    pub projection: Projection,
}

/// Discrete measure `sum_i lambda_i delta_{P_i}` with positive weights and
/// pairwise distinct atoms.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
}

/// Class flags of a measure, always recomputed, never trusted from files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureClass {
    /// Integrated trace equals one.
    pub is_d1: bool,
    /// Pairwise orthogonal supports.
    pub is_orthogonal: bool,
    /// Every atom has rank one.
    pub is_rank1: bool,
    /// All weights pairwise distinct (membership in the spectral image).
    pub is_distinct_weights: bool,
}

impl DiscreteMeasure {
    /// Build from atoms; drops weights below the floor and rejects
    /// coincident projections.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let kept: Vec<Atom> = atoms
            .into_iter()
            .filter(|a| a.weight > WEIGHT_FLOOR)
            .collect();
        for (i, a) in kept.iter().enumerate() {
            for b in kept.iter().skip(i + 1) {
                if a.projection.rank() == b.projection.rank()
                    && frob_norm(&(a.projection.matrix() - b.projection.matrix()))
                        <= lin_tol(a.projection.dim())
                {
                    return Err(Error::Validation {
                        path: "measure".into(),
                        reason: format!("atoms {i} and later coincide"),
                    });
                }
            }
        }
        if kept.is_empty() {
            return Err(Error::Validation {
                path: "measure".into(),
                reason: "no atoms above the weight floor".into(),
            });
        }
        Ok(Self { atoms: kept })
    }

    /// Build from atoms, merging coincident projections by adding weights.
    pub fn merging(atoms: Vec<Atom>) -> Result<Self> {
        let mut merged: Vec<Atom> = Vec::new();
        for atom in atoms {
            if atom.weight <= WEIGHT_FLOOR {
                continue;
            }
            if let Some(existing) = merged.iter_mut().find(|m| {
                m.projection.rank() == atom.projection.rank()
                    && frob_norm(&(m.projection.matrix() - atom.projection.matrix()))
                        <= lin_tol(atom.projection.dim())
            }) {
                existing.weight += atom.weight;
            } else {
                merged.push(atom);
            }
        }
        Self::new(merged)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].projection.dim()
    }

    /// Integral of the trace, `sum lambda_i tr(P_i)`.
    pub fn total_mass(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * a.projection.rank() as f64)
            .sum()
    }

    pub fn classify(&self) -> MeasureClass {
        let is_d1 = (self.total_mass() - 1.0).abs() <= 1e-9;
        let mut is_orthogonal = true;
        for (i, a) in self.atoms.iter().enumerate() {
            for b in self.atoms.iter().skip(i + 1) {
                let overlap = (a.projection.matrix() * b.projection.matrix())
                    .diagonal()
                    .sum()
                    .re;
                if overlap.abs() > 1e-9 {
                    is_orthogonal = false;
                }
            }
        }
        let is_rank1 = self.atoms.iter().all(|a| a.projection.rank() == 1);
        let mut is_distinct_weights = true;
        for (i, a) in self.atoms.iter().enumerate() {
            for b in self.atoms.iter().skip(i + 1) {
                if (a.weight - b.weight).abs() <= WEIGHT_FLOOR {
                    is_distinct_weights = false;
                }
            }
        }
        MeasureClass {
            is_d1,
            is_orthogonal,
            is_rank1,
            is_distinct_weights,
        }
    }

    pub fn to_json(&self) -> MeasureJson {
        MeasureJson {
            atoms: self
                .atoms
                .iter()
                .map(|a| AtomJson {
                    weight: a.weight,
                    projection: a.projection.to_json(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &MeasureJson) -> Result<Self> {
        let atoms = json
            .atoms
            .iter()
            .map(|a| {
                Ok(Atom {
                    weight: a.weight,
                    projection: Projection::from_json(&a.projection)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomJson {
    pub weight: f64,
    pub projection: ProjectionJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureJson {
    pub atoms: Vec<AtomJson>,
}

/// The spectral-projection measure of a density: one atom per distinct
/// eigenvalue with its full eigenprojection, kernel excluded. The result
/// integrates the trace to one, has orthogonal support and strictly
/// decreasing weights.
pub fn spectral_measure(rho: &DensityMatrix) -> DiscreteMeasure {
    let spectrum = rho.spectrum();
    let mut atoms = Vec::new();
    for cluster in spectrum.clusters(CLUSTER_GAP) {
        if cluster.value <= CLUSTER_GAP {
            continue; // kernel
        }
        let proj = spectrum.cluster_projection(&cluster);
        let symmetrized = (&proj + proj.adjoint()).map(|z| z * 0.5);
        atoms.push(Atom {
            weight: cluster.value,
            projection: Projection::new(symmetrized).expect("eigenprojection"),
        });
    }
    DiscreteMeasure::new(atoms).expect("spectral atoms are distinct")
}

/// Integrate a normalized measure back to its density,
/// `sum lambda_i P_i`. Requires the integrated trace to be one.
pub fn integrate(mu: &DiscreteMeasure) -> Result<DensityMatrix> {
    let mass = mu.total_mass();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { mass });
    }
    let n = mu.dim();
    let mut acc = CMat::zeros(n, n);
    for atom in mu.atoms() {
        acc += atom.projection.matrix().map(|z| z * atom.weight);
    }
    DensityMatrix::new(acc)
}

/// An orthogonal representation of a density: each eigenprojection is
/// refined into orthogonal subprojections along a rotated frame, repeating
/// the eigenvalue as the weight. The all-ones split produces a rank-one
/// representation.
///
/// `frames[i]` is a `k_i x k_i` unitary acting on the i-th eigenspace (of
/// dimension `k_i`, kernel excluded, eigenvalues in decreasing order);
/// `splits[i]` is an ordered partition of `k_i`.
pub fn orthogonal_representation(
    rho: &DensityMatrix,
    frames: &[CMat],
    splits: &[Vec<usize>],
) -> Result<DiscreteMeasure> {
    let spectrum = rho.spectrum();
    let clusters: Vec<EigenCluster> = spectrum
        .clusters(CLUSTER_GAP)
        .into_iter()
        .filter(|c| c.value > CLUSTER_GAP)
        .collect();
    if frames.len() != clusters.len() || splits.len() != clusters.len() {
        return Err(Error::DimMismatch {
            left: frames.len().max(splits.len()),
            right: clusters.len(),
        });
    }
    let mut atoms = Vec::new();
    for (idx, cluster) in clusters.iter().enumerate() {
        let k = cluster.cols.len();
        let frame = &frames[idx];
        if frame.nrows() != k || frame.ncols() != k {
            return Err(Error::BadFrame {
                index: idx,
                deviation: f64::INFINITY,
            });
        }
        let unitary_defect = frob_norm(&(frame.adjoint() * frame - CMat::identity(k, k)));
        if unitary_defect > lin_tol(k) {
            return Err(Error::BadFrame {
                index: idx,
                deviation: unitary_defect,
            });
        }
        if splits[idx].iter().sum::<usize>() != k || splits[idx].contains(&0) {
            return Err(Error::BadPartition { index: idx });
        }
        let basis = spectrum.eigenvectors.columns_range(cluster.cols.clone());
        let rotated = basis * frame;
        let mut offset = 0;
        for &part in &splits[idx] {
            let sub = rotated.columns(offset, part);
            let proj = sub * sub.adjoint();
            let symmetrized = (&proj + proj.adjoint()).map(|z| z * 0.5);
            atoms.push(Atom {
                weight: cluster.value,
                projection: Projection::new(symmetrized)?,
            });
            offset += part;
        }
    }
    DiscreteMeasure::new(atoms)
}

/// Identity frames and all-ones splits: the rank-one refinement of the
/// spectral measure along the eigenvector basis.
pub fn rank_one_representation(rho: &DensityMatrix) -> Result<DiscreteMeasure> {
    let spectrum = rho.spectrum();
    let clusters: Vec<EigenCluster> = spectrum
        .clusters(CLUSTER_GAP)
        .into_iter()
        .filter(|c| c.value > CLUSTER_GAP)
        .collect();
    let frames: Vec<CMat> = clusters
        .iter()
        .map(|c| CMat::identity(c.cols.len(), c.cols.len()))
        .collect();
    let splits: Vec<Vec<usize>> = clusters.iter().map(|c| vec![1; c.cols.len()]).collect();
    orthogonal_representation(rho, &frames, &splits)
}

/// `sum_i |lambda_i - lambda'_i|` over the non-increasing spectra (with
/// multiplicity, zero-padded). Bounded by the trace norm of the difference.
pub fn eigenvalue_l1_gap(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimMismatch {
            left: rho1.dim(),
            right: rho2.dim(),
        });
    }
    let a = rho1.spectrum().eigenvalues;
    let b = rho2.spectrum().eigenvalues;
    let len = a.len().max(b.len());
    let mut gap = 0.0;
    for i in 0..len {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        gap += (x - y).abs();
    }
    Ok(gap)
}

/// Density `sum ||xi_k||^2 P_[xi_k]` from vectors with squared norms
/// summing to one. The vectors need not be orthogonal; the spectrum of the
/// result generally differs from the weights.
pub fn density_from_vectors(vectors: &[CVec]) -> Result<DensityMatrix> {
    if vectors.is_empty() {
        return Err(Error::Validation {
            path: "density_from_vectors".into(),
            reason: "empty vector list".into(),
        });
    }
    let mut total = 0.0;
    for (k, v) in vectors.iter().enumerate() {
        let norm_sq = v.norm_squared();
        if norm_sq < WEIGHT_FLOOR {
            return Err(Error::ZeroVector { index: k });
        }
        total += norm_sq;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { mass: total });
    }
    let n = vectors[0].len();
    let mut acc = CMat::zeros(n, n);
    for v in vectors {
        let norm_sq = v.norm_squared();
        let unit = v.map(|z| z / norm_sq.sqrt());
        acc += (&unit * unit.adjoint()).map(|z| z * norm_sq);
    }
    DensityMatrix::new(acc)
}

/// Check that every atom of `mu` is dominated by some eigenprojection of
/// `rho` (the finite-dimensional support picture of the representation
/// sets). Returns the worst subordination defect.
pub fn support_defect(rho: &DensityMatrix, mu: &DiscreteMeasure) -> f64 {
    let spectral = spectral_measure(rho);
    let mut worst: f64 = 0.0;
    for atom in mu.atoms() {
        let best = spectral
            .atoms()
            .iter()
            .map(|eig| eig.projection.subprojection_defect(&atom.projection))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(best);
    }
    worst
}

/// Largest pairwise overlap `tr(P_i P_j)` and distance-based coincidence
/// check used by tests and reports.
pub fn orthogonality_defect(mu: &DiscreteMeasure) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in mu.atoms().iter().enumerate() {
        for b in mu.atoms().iter().skip(i + 1) {
            let overlap = (a.projection.matrix() * b.projection.matrix())
                .diagonal()
                .sum()
                .re;
            worst = worst.max(overlap.abs());
        }
    }
    worst
}

/// Distance between measures' supports under a scale, used when checking
/// that distinct atoms stay separated.
pub fn min_atom_separation(mu: &DiscreteMeasure, scale: DistanceScale) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in mu.atoms().iter().enumerate() {
        for b in mu.atoms().iter().skip(i + 1) {
            best = best.min(distance(&a.projection, &b.projection, scale));
        }
    }
    best
}
