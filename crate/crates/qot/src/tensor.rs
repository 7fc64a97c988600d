//! Composite systems: partial traces, the isomorphism between tensor
//! vectors and antilinear Hilbert-Schmidt operators, correlation operators,
//! and pure states of the doubled system acting as transport-plan families
//! between their marginals.
//!
//! A unit vector of `H (x) H` is stored through its coefficient matrix `M`
//! (`zeta = sum M_ij e_i (x) e_j`). The associated antilinear operator maps
//! `x` to `M^T conj(x)`; its polar decomposition produces the correlation
//! operator, an antilinear partial isometry carrying the first marginal
//! onto the second. Pushing a spectral representation of the first marginal
//! forward through it yields an admissible transport plan, and minimizing
//! the transported cost over rank-one representations gives the cost of the
//! pure state itself.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{DistanceScale, Projection};
use crate::linalg::{
    frob_norm, is_finite, lin_tol, matrix_from_json, matrix_to_json, polar_antilinear, svd,
    AntilinearOp, CMat, CVec, MatrixJson, CLUSTER_GAP,
};
use crate::par;
use crate::sample::{haar_unitary, rng_from_seed};
use crate::spectral::{integrate, Atom, DensityMatrix, DiscreteMeasure};
use crate::state_cost::OptimizerBudget;
use crate::transport::TransportPlan;

/// Pure state of the doubled system, held as its coefficient matrix with
/// unit Frobenius norm.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorState {
    coeff: CMat,
}

impl TensorState {
    pub fn new(coeff: CMat) -> Result<Self> {
        if coeff.nrows() != coeff.ncols() {
            return Err(Error::DimMismatch {
                left: coeff.nrows(),
                right: coeff.ncols(),
            });
        }
        if !is_finite(&coeff) {
            return Err(Error::NonFinite {
                context: "tensor state",
            });
        }
        let norm = frob_norm(&coeff);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NotNormalized { mass: norm });
        }
        Ok(Self { coeff })
    }

    /// Normalize an arbitrary nonzero coefficient matrix.
    pub fn normalized(coeff: CMat) -> Result<Self> {
        let norm = frob_norm(&coeff);
        if norm < 1e-12 {
            return Err(Error::ZeroVector { index: 0 });
        }
        Self::new(coeff.map(|z| z / norm))
    }

    /// Build from weighted simple tensors `sum w_k xi_k (x) eta_k`.
    pub fn from_simple_tensors(terms: &[(Complex64, CVec, CVec)]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::ZeroVector { index: 0 });
        }
        let n = terms[0].1.len();
        let mut coeff = CMat::zeros(n, n);
        for (w, xi, eta) in terms {
            if xi.len() != n || eta.len() != n {
                return Err(Error::DimMismatch {
                    left: xi.len().max(eta.len()),
                    right: n,
                });
            }
            coeff += (xi * eta.transpose()).map(|z| z * w);
        }
        Self::normalized(coeff)
    }

    /// The simple tensor `xi (x) eta`, normalized.
    pub fn simple(xi: &CVec, eta: &CVec) -> Result<Self> {
        Self::from_simple_tensors(&[(Complex64::new(1.0, 0.0), xi.clone(), eta.clone())])
    }

    /// Maximally entangled state `sum_i e_i (x) e_i / sqrt(n)`.
    pub fn maximally_entangled(n: usize) -> Self {
        let coeff = CMat::identity(n, n).map(|z| z / (n as f64).sqrt());
        Self { coeff }
    }

    pub fn coeff(&self) -> &CMat {
        &self.coeff
    }

    pub fn dim(&self) -> usize {
        self.coeff.nrows()
    }

    /// The vector in the doubled space, index `(i, j) = i * n + j`.
    pub fn vector(&self) -> CVec {
        let n = self.dim();
        CVec::from_fn(n * n, |k, _| self.coeff[(k / n, k % n)])
    }

    /// Swap the two factors: the coefficient matrix transposes.
    pub fn flip(&self) -> Self {
        Self {
            coeff: self.coeff.transpose(),
        }
    }

    /// Schmidt coefficients (singular values of the coefficient matrix) and
    /// separability: exactly one nonzero coefficient means a simple tensor.
    pub fn schmidt(&self) -> (Vec<f64>, bool) {
        let values = svd(&self.coeff)
            .expect("finite coefficients")
            .singular_values;
        let significant = values.iter().filter(|&&s| s > 1e-9).count();
        (values, significant == 1)
    }

    /// The antilinear Hilbert-Schmidt operator of the state:
    /// simple tensors act by `x -> <x, xi> eta`, so the matrix is `M^T`.
    pub fn antilinear_op(&self) -> AntilinearOp {
        AntilinearOp::new(self.coeff.transpose()).expect("finite square matrix")
    }

    pub fn to_json(&self) -> TensorStateJson {
        TensorStateJson::Coeff {
            coeff: matrix_to_json(&self.coeff),
        }
    }

    pub fn from_json(json: &TensorStateJson) -> Result<Self> {
        match json {
            TensorStateJson::Coeff { coeff } => Self::new(matrix_from_json(coeff)?),
            TensorStateJson::Terms { terms } => {
                let parsed = terms
                    .iter()
                    .map(|t| {
                        Ok((
                            Complex64::new(t.weight_re, t.weight_im),
                            vector_from_json(&t.xi)?,
                            vector_from_json(&t.eta)?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::from_simple_tensors(&parsed)
            }
        }
    }
}

/// Complex vector wire format, mirroring the matrix one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorJson {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

fn vector_from_json(json: &VectorJson) -> Result<CVec> {
    if json.re.len() != json.im.len() {
        return Err(Error::Validation {
            path: "vector".into(),
            reason: "re/im length mismatch".into(),
        });
    }
    let v = CVec::from_fn(json.re.len(), |k, _| Complex64::new(json.re[k], json.im[k]));
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { context: "vector" });
    }
    Ok(v)
}

/// One weighted simple tensor `w * xi (x) eta` of a term list.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimpleTensorJson {
    pub weight_re: f64,
    pub weight_im: f64,
    pub xi: VectorJson,
    pub eta: VectorJson,
}

/// Tensor-state wire format: either the coefficient matrix directly or a
/// list of weighted simple tensors (normalized on load).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TensorStateJson {
    Coeff { coeff: MatrixJson },
    Terms { terms: Vec<SimpleTensorJson> },
}

/// Partial trace of an operator on a bipartite space with factor
/// dimensions `(dim1, dim2)`; `side` selects which factor is traced out
/// (2 keeps the first marginal, 1 keeps the second).
pub fn partial_trace(t: &CMat, dim1: usize, dim2: usize, side: u8) -> Result<CMat> {
    let total = dim1 * dim2;
    if t.nrows() != total || t.ncols() != total {
        return Err(Error::BadDimension { size: t.nrows() });
    }
    match side {
        2 => {
            let mut out = CMat::zeros(dim1, dim1);
            for i in 0..dim1 {
                for k in 0..dim1 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..dim2 {
                        acc += t[(i * dim2 + j, k * dim2 + j)];
                    }
                    out[(i, k)] = acc;
                }
            }
            Ok(out)
        }
        1 => {
            let mut out = CMat::zeros(dim2, dim2);
            for j in 0..dim2 {
                for l in 0..dim2 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in 0..dim1 {
                        acc += t[(i * dim2 + j, i * dim2 + l)];
                    }
                    out[(j, l)] = acc;
                }
            }
            Ok(out)
        }
        _ => Err(Error::Validation {
            path: "partial_trace".into(),
            reason: format!("side must be 1 or 2, got {side}"),
        }),
    }
}

/// The correlation data of a pure state: marginals and the antilinear
/// partial isometry intertwining them.
#[derive(Debug, Clone)]
pub struct CorrelationOperator {
    pub op: AntilinearOp,
    /// Projection onto the initial support (the range of the first
    /// marginal).
    pub initial: CMat,
    /// Projection onto the final support (the range of the second
    /// marginal).
    pub final_: CMat,
}

impl CorrelationOperator {
    /// Push a projection dominated by the initial support through the
    /// antilinear calculus: `A conj(P) A†`.
    pub fn pushforward(&self, p: &Projection) -> Result<Projection> {
        let defect = frob_norm(&(&self.initial * p.matrix() - p.matrix()));
        if defect > lin_tol(p.dim()) {
            return Err(Error::NotSubordinate { deviation: defect });
        }
        let moved = self.op.sandwich(p.matrix());
        let symmetrized = (&moved + moved.adjoint()).map(|z| z * 0.5);
        Projection::new(symmetrized)
    }
}

/// Marginals and correlation operator of a pure state, with the kernel
/// normalization `N(U) = N(rho_1)`.
pub struct Correlation {
    pub rho1: DensityMatrix,
    pub rho2: DensityMatrix,
    pub correlation: CorrelationOperator,
}

/// Reduced densities and the polar part of the state's antilinear operator.
pub fn correlation(zeta: &TensorState) -> Result<Correlation> {
    let m = zeta.coeff();
    let rho1 = DensityMatrix::new(m * m.adjoint())?;
    let rho2 = DensityMatrix::new(m.transpose() * m.map(|z| z.conj()))?;
    let theta = zeta.antilinear_op();
    let polar = polar_antilinear(&theta)?;
    let correlation = CorrelationOperator {
        initial: polar.isometry.gram(),
        final_: polar.isometry.cogram(),
        op: polar.isometry,
    };
    Ok(Correlation {
        rho1,
        rho2,
        correlation,
    })
}

/// The transport plan a pure state induces on a representation of its
/// first marginal: every atom is pushed forward through the correlation
/// operator, preserving weights and ranks.
pub fn tensor_plan(zeta: &TensorState, mu: &DiscreteMeasure) -> Result<TransportPlan> {
    let data = correlation(zeta)?;
    let integrated = integrate(mu)?;
    let defect = integrated.trace_distance(&data.rho1)?;
    if defect > 1e-8 {
        return Err(Error::NotRepresentation { deviation: defect });
    }
    let mut target_atoms = Vec::with_capacity(mu.len());
    for atom in mu.atoms() {
        let moved = data.correlation.pushforward(&atom.projection)?;
        target_atoms.push(Atom {
            weight: atom.weight,
            projection: moved,
        });
    }
    let target = DiscreteMeasure::new(target_atoms)?;
    let mut masses = vec![0.0; mu.len() * target.len()];
    for (i, atom) in mu.atoms().iter().enumerate() {
        masses[i * target.len() + i] = atom.weight * atom.projection.rank() as f64;
    }
    TransportPlan::new(mu.clone(), target, masses)
}

/// Result of the pure-state cost minimization.
#[derive(Debug, Clone)]
pub struct PureCost {
    pub value: f64,
    pub representation: DiscreteMeasure,
    pub iterations: usize,
}

/// The transport cost of the pure state itself: minimize
/// `sum_i lambda_i d(P_i, U(P_i))^p` over rank-one orthogonal
/// representations of the first marginal. The objective splits over the
/// eigenspaces, so each frame is optimized independently by the same
/// pattern search as the state cost (restart 0 from the eigenvector basis).
pub fn pure_cost(
    zeta: &TensorState,
    p: f64,
    scale: DistanceScale,
    budget: &OptimizerBudget,
) -> Result<PureCost> {
    if !(1.0..=16.0).contains(&p) {
        return Err(Error::BadExponent { p });
    }
    let data = correlation(zeta)?;
    let spectrum = data.rho1.spectrum();
    let clusters: Vec<(f64, CMat)> = spectrum
        .clusters(CLUSTER_GAP)
        .into_iter()
        .filter(|c| c.value > CLUSTER_GAP)
        .map(|c| {
            (
                c.value,
                CMat::from(spectrum.eigenvectors.columns_range(c.cols)),
            )
        })
        .collect();
    let op = &data.correlation.op;

    // transported distance of a single line
    let line_cost = |v: &CVec| -> f64 {
        let image = op.apply(v);
        let norm = image.norm();
        if norm < 1e-12 {
            return (scale.factor() * std::f64::consts::FRAC_PI_2).powf(p);
        }
        let image = image.map(|z| z / norm);
        let overlap = v.dotc(&image).norm().clamp(0.0, 1.0);
        (scale.factor() * overlap.acos()).powf(p)
    };
    let frame_cost = |basis: &CMat, frame: &CMat| -> f64 {
        let rotated = basis * frame;
        (0..rotated.ncols())
            .map(|l| line_cost(&rotated.column(l).into()))
            .sum()
    };

    // per-eigenspace optimization; eigenspaces do not interact
    let results: Vec<(CMat, usize)> = par::map_slice(&clusters, |(_, basis)| {
        let k = basis.ncols();
        if k == 1 {
            return (CMat::identity(1, 1), 0);
        }
        let mut best_frame = CMat::identity(k, k);
        let mut best_value = frame_cost(basis, &best_frame);
        let mut total_evals = 0usize;
        for r in 0..budget.restarts.max(1) {
            let mut frame = if r == 0 {
                CMat::identity(k, k)
            } else {
                let mut rng = rng_from_seed(budget.seed.wrapping_add(r as u64));
                haar_unitary(k, &mut rng)
            };
            let mut value = frame_cost(basis, &frame);
            let mut step = budget.initial_step;
            let dirs = pattern_dirs(k);
            while step > budget.min_step {
                let mut improved = false;
                for dir in &dirs {
                    for sign in [1.0, -1.0] {
                        let rot = crate::linalg::unitary_exp(dir, sign * step)
                            .expect("Hermitian direction");
                        let candidate = &frame * rot;
                        let cand_value = frame_cost(basis, &candidate);
                        total_evals += 1;
                        if cand_value < value - 1e-14 {
                            value = cand_value;
                            frame = candidate;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            if value < best_value - 1e-15 {
                best_value = value;
                best_frame = frame;
            }
        }
        (best_frame, total_evals)
    });

    let mut atoms = Vec::new();
    let mut value_power = 0.0;
    let mut iterations = 0;
    for ((weight, basis), (frame, evals)) in clusters.iter().zip(&results) {
        iterations += evals;
        let rotated = basis * frame;
        for l in 0..rotated.ncols() {
            let v: CVec = rotated.column(l).into();
            value_power += weight * line_cost(&v);
            atoms.push(Atom {
                weight: *weight,
                projection: Projection::line(&v)?,
            });
        }
    }
    let representation = DiscreteMeasure::new(atoms)?;
    Ok(PureCost {
        value: value_power.max(0.0).powf(1.0 / p),
        representation,
        iterations,
    })
}

fn pattern_dirs(k: usize) -> Vec<CMat> {
    let mut dirs = Vec::new();
    for a in 0..k {
        for b in (a + 1)..k {
            let mut re = CMat::zeros(k, k);
            re[(a, b)] = Complex64::new(1.0, 0.0);
            re[(b, a)] = Complex64::new(1.0, 0.0);
            dirs.push(re);
            let mut im = CMat::zeros(k, k);
            im[(a, b)] = Complex64::new(0.0, 1.0);
            im[(b, a)] = Complex64::new(0.0, -1.0);
            dirs.push(im);
        }
    }
    dirs
}

/// Worst defect of the structural identities tying a state to its
/// correlation data: `|Theta|^2 = Tr_2 |zeta><zeta|`,
/// `|Theta*|^2 = Tr_1 |zeta><zeta|`, `Theta = U rho1^(1/2)` and
/// `rho2 = U rho1 U*`.
pub fn correlation_identity_defect(zeta: &TensorState) -> Result<f64> {
    let n = zeta.dim();
    let vec = zeta.vector();
    let outer = &vec * vec.adjoint();
    let theta = zeta.antilinear_op();
    let data = correlation(zeta)?;

    let gram = theta.gram();
    let tr2 = partial_trace(&outer, n, n, 2)?;
    let mut worst = frob_norm(&(&gram - &tr2));

    let cogram = theta.cogram();
    let tr1 = partial_trace(&outer, n, n, 1)?;
    worst = worst.max(frob_norm(&(&cogram - &tr1)));

    let root = crate::linalg::hermitian_sqrt(data.rho1.matrix())?;
    let recon = data.correlation.op.matrix() * root.map(|z| z.conj());
    worst = worst.max(frob_norm(&(recon - theta.matrix())));

    let conj = data.correlation.op.sandwich(data.rho1.matrix());
    worst = worst.max(frob_norm(&(conj - data.rho2.matrix())));
    Ok(worst)
}
