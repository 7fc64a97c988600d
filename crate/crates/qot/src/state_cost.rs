//! State-level transport quantities: the cost semi-distance minimized over
//! rank-one spectral representations, the extended Wasserstein distance on
//! canonical spectral measures, displacement interpolation of states, and
//! rigidity diagnostics for orthogonal geodesics.
//!
//! The cost of a pair of states minimizes the measure-level Wasserstein
//! distance over all rank-one orthogonal representations of both densities.
//! With simple spectra the representations are unique and the problem is a
//! single exact solve. Degenerate eigenspaces leave a unitary frame of
//! freedom per eigenspace; those are optimized by block-coordinate descent
//! (frames against the inner transport plan) with multi-start over seeded
//! Haar frames, restart 0 always starting from the eigenvector basis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{geodesic_point, log_map, DistanceScale, Projection};
use crate::linalg::{
    hermitian_defect, hermitian_eig, lin_tol, trace_norm, unitary_exp, CMat, CVec,
    CLUSTER_GAP,
};
use crate::par;
use crate::sample::{haar_unitary, rng_from_seed};
use crate::spectral::{
    integrate, orthogonality_defect, spectral_measure, Atom, DensityMatrix, DiscreteMeasure,
};
use crate::transport::{self, TransportPlan};
use crate::WEIGHT_FLOOR;

/// Optimization budget for the representation search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerBudget {
    /// Number of independent starts; restart 0 uses identity frames.
    pub restarts: usize,
    /// Maximum alternating rounds per start.
    pub max_rounds: usize,
    /// Initial pattern-search step (radians on the frame group).
    pub initial_step: f64,
    /// Pattern search stops once the step falls below this.
    pub min_step: f64,
    /// Stop a start when a full round improves less than this.
    pub round_tol: f64,
    /// Seed for the Haar restart frames.
    pub seed: u64,
    /// Confirm tiny degenerate instances against a dense frame grid.
    pub certify_grid: bool,
}

impl Default for OptimizerBudget {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_rounds: 60,
            initial_step: std::f64::consts::FRAC_PI_4,
            min_step: 1e-6,
            round_tol: 1e-10,
            seed: 0,
            certify_grid: false,
        }
    }
}

/// Result of a cost solve: the optimizing rank-one representations, the
/// optimal plan between them and bookkeeping about the search.
#[derive(Debug, Clone)]
pub struct CostResult {
    pub value: f64,
    pub mu0: DiscreteMeasure,
    pub mu1: DiscreteMeasure,
    pub plan: TransportPlan,
    pub p: f64,
    pub iterations: usize,
    pub restarts: usize,
    /// True when the representations were unique (simple spectra) or a grid
    /// oracle confirmed the optimum within tolerance.
    pub certified: bool,
    /// Objective value after every alternating round of the winning start.
    pub objective_trace: Vec<f64>,
}

/// Eigenstructure of one state, kernel excluded: per-cluster weight and
/// eigenbasis.
struct ClusterData {
    weights: Vec<f64>,
    bases: Vec<CMat>,
}

impl ClusterData {
    fn from_density(rho: &DensityMatrix) -> Self {
        let spectrum = rho.spectrum();
        let mut weights = Vec::new();
        let mut bases = Vec::new();
        for cluster in spectrum.clusters(CLUSTER_GAP) {
            if cluster.value <= CLUSTER_GAP {
                continue;
            }
            weights.push(cluster.value);
            bases.push(spectrum.eigenvectors.columns_range(cluster.cols).into());
        }
        Self { weights, bases }
    }

    fn degenerate(&self) -> bool {
        self.bases.iter().any(|b| b.ncols() > 1)
    }

    fn atom_count(&self) -> usize {
        self.bases.iter().map(|b| b.ncols()).sum()
    }
}

/// Rank-one atoms (weight, unit vector) induced by frames on the clusters.
fn frame_atoms(data: &ClusterData, frames: &[CMat]) -> Vec<(f64, CVec)> {
    let mut atoms = Vec::with_capacity(data.atom_count());
    for ((basis, frame), &weight) in data.bases.iter().zip(frames).zip(&data.weights) {
        let rotated = basis * frame;
        for col in 0..rotated.ncols() {
            atoms.push((weight, rotated.column(col).into()));
        }
    }
    atoms
}

/// Geodesic distance between lines given by unit vectors.
fn line_distance(v: &CVec, w: &CVec, scale: DistanceScale) -> f64 {
    let overlap = v.dotc(w).norm().clamp(0.0, 1.0);
    scale.factor() * overlap.acos()
}

fn identity_frames(data: &ClusterData) -> Vec<CMat> {
    data.bases
        .iter()
        .map(|b| CMat::identity(b.ncols(), b.ncols()))
        .collect()
}

fn haar_frames(data: &ClusterData, seed: u64) -> Vec<CMat> {
    let mut rng = rng_from_seed(seed);
    data.bases
        .iter()
        .map(|b| haar_unitary(b.ncols(), &mut rng))
        .collect()
}

/// Off-diagonal Hermitian basis directions of u(k); diagonal directions only
/// rephase frame columns and leave the atom lines unchanged.
fn pattern_directions(k: usize) -> Vec<CMat> {
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

struct RestartOutcome {
    value_power: f64,
    frames0: Vec<CMat>,
    frames1: Vec<CMat>,
    rounds: usize,
    trace: Vec<f64>,
}

/// Solve the inner transport problem between two rank-one atom lists.
fn inner_solve(
    src: &[(f64, CVec)],
    tgt: &[(f64, CVec)],
    p: f64,
    scale: DistanceScale,
) -> Result<(f64, Vec<f64>)> {
    let supply: Vec<f64> = src.iter().map(|(w, _)| *w).collect();
    let demand: Vec<f64> = tgt.iter().map(|(w, _)| *w).collect();
    let mut cost = vec![0.0; src.len() * tgt.len()];
    for (i, (_, v)) in src.iter().enumerate() {
        for (j, (_, w)) in tgt.iter().enumerate() {
            cost[i * tgt.len() + j] = line_distance(v, w, scale).powf(p);
        }
    }
    let sol = crate::transport::solve_rank_one(&supply, &demand, &cost)?;
    Ok((sol.cost, sol.flows))
}

/// Objective of the rows belonging to one cluster of the source side, for
/// fixed plan masses and fixed opposite atoms.
#[allow(clippy::too_many_arguments)]
fn cluster_objective(
    basis: &CMat,
    frame: &CMat,
    row_offset: usize,
    masses: &[f64],
    cols: usize,
    opposite: &[(f64, CVec)],
    p: f64,
    scale: DistanceScale,
    transposed: bool,
) -> f64 {
    let rotated = basis * frame;
    let mut total = 0.0;
    for l in 0..rotated.ncols() {
        let v: CVec = rotated.column(l).into();
        let row = row_offset + l;
        for (j, (_, w)) in opposite.iter().enumerate() {
            let mass = if transposed {
                masses[j * cols + row]
            } else {
                masses[row * cols + j]
            };
            if mass > WEIGHT_FLOOR {
                total += mass * line_distance(&v, w, scale).powf(p);
            }
        }
    }
    total
}

/// Pattern search on one cluster frame: multiplicative steps along the
/// off-diagonal directions, halving from the initial step to the floor.
#[allow(clippy::too_many_arguments)]
fn improve_frame(
    basis: &CMat,
    frame: &mut CMat,
    row_offset: usize,
    masses: &[f64],
    cols: usize,
    opposite: &[(f64, CVec)],
    p: f64,
    scale: DistanceScale,
    budget: &OptimizerBudget,
    transposed: bool,
) {
    let k = frame.ncols();
    if k < 2 {
        return;
    }
    let dirs = pattern_directions(k);
    let mut best = cluster_objective(
        basis, frame, row_offset, masses, cols, opposite, p, scale, transposed,
    );
    let mut step = budget.initial_step;
    while step > budget.min_step {
        let mut improved = false;
        for dir in &dirs {
            for sign in [1.0, -1.0] {
                let rot = unitary_exp(dir, sign * step).expect("bounded Hermitian direction");
                let candidate = &*frame * rot;
                let value = cluster_objective(
                    basis, &candidate, row_offset, masses, cols, opposite, p, scale, transposed,
                );
                if value < best - 1e-14 {
                    best = value;
                    *frame = candidate;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
}

fn run_restart(
    src: &ClusterData,
    tgt: &ClusterData,
    frames0: Vec<CMat>,
    frames1: Vec<CMat>,
    p: f64,
    scale: DistanceScale,
    budget: &OptimizerBudget,
) -> Result<RestartOutcome> {
    let mut frames0 = frames0;
    let mut frames1 = frames1;
    let mut trace = Vec::new();
    let mut rounds = 0;
    let (mut value_power, mut masses) = {
        let a0 = frame_atoms(src, &frames0);
        let a1 = frame_atoms(tgt, &frames1);
        inner_solve(&a0, &a1, p, scale)?
    };
    trace.push(value_power);
    for _ in 0..budget.max_rounds {
        rounds += 1;
        // frame sweep on both sides for the fixed plan
        let a1 = frame_atoms(tgt, &frames1);
        let cols = a1.len();
        let mut offset = 0;
        for (c, basis) in src.bases.iter().enumerate() {
            improve_frame(
                basis,
                &mut frames0[c],
                offset,
                &masses,
                cols,
                &a1,
                p,
                scale,
                budget,
                false,
            );
            offset += basis.ncols();
        }
        let a0 = frame_atoms(src, &frames0);
        let mut offset = 0;
        for (c, basis) in tgt.bases.iter().enumerate() {
            improve_frame(
                basis,
                &mut frames1[c],
                offset,
                &masses,
                cols,
                &a0,
                p,
                scale,
                budget,
                true,
            );
            offset += basis.ncols();
        }
        // re-solve the plan for the moved frames
        let a0 = frame_atoms(src, &frames0);
        let a1 = frame_atoms(tgt, &frames1);
        let (next_power, next_masses) = inner_solve(&a0, &a1, p, scale)?;
        let gain = value_power - next_power;
        value_power = next_power.min(value_power);
        masses = next_masses;
        trace.push(value_power);
        if gain < budget.round_tol {
            break;
        }
    }
    Ok(RestartOutcome {
        value_power,
        frames0,
        frames1,
        rounds,
        trace,
    })
}

fn measure_from_atoms(atoms: Vec<(f64, CVec)>) -> Result<DiscreteMeasure> {
    let atoms = atoms
        .into_iter()
        .map(|(weight, v)| {
            Ok(Atom {
                weight,
                projection: Projection::line(&v)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteMeasure::new(atoms)
}

/// Dense frame grid for instances whose only degeneracy is a single
/// two-dimensional eigenspace: sweep the sphere of line pairs inside it.
fn grid_certify(
    src: &ClusterData,
    tgt: &ClusterData,
    p: f64,
    scale: DistanceScale,
    found_power: f64,
) -> Option<bool> {
    let mut degenerate: Vec<(bool, usize)> = Vec::new();
    for (c, b) in src.bases.iter().enumerate() {
        if b.ncols() == 2 {
            degenerate.push((false, c));
        } else if b.ncols() > 2 {
            return None;
        }
    }
    for (c, b) in tgt.bases.iter().enumerate() {
        if b.ncols() == 2 {
            degenerate.push((true, c));
        } else if b.ncols() > 2 {
            return None;
        }
    }
    if degenerate.len() != 1 {
        return None;
    }
    let (on_target, cluster) = degenerate[0];
    let steps_theta = 400;
    let steps_phase = 200;
    let mut best = f64::INFINITY;
    for it in 0..=steps_theta {
        let theta = std::f64::consts::FRAC_PI_2 * it as f64 / steps_theta as f64;
        for ip in 0..steps_phase {
            let phase = 2.0 * std::f64::consts::PI * ip as f64 / steps_phase as f64;
            let e = Complex64::from_polar(1.0, phase);
            let frame = CMat::from_row_slice(
                2,
                2,
                &[
                    Complex64::new(theta.cos(), 0.0),
                    Complex64::new(theta.sin(), 0.0),
                    e * theta.sin(),
                    -e * theta.cos(),
                ],
            );
            let (mut f0, mut f1) = (identity_frames(src), identity_frames(tgt));
            if on_target {
                f1[cluster] = frame;
            } else {
                f0[cluster] = frame;
            }
            let a0 = frame_atoms(src, &f0);
            let a1 = frame_atoms(tgt, &f1);
            if let Ok((power, _)) = inner_solve(&a0, &a1, p, scale) {
                best = best.min(power);
            }
        }
    }
    Some(found_power <= best + 1e-4)
}

/// The transport cost between two states: the Wasserstein distance
/// minimized over rank-one orthogonal representations of both densities.
/// Always finite, bounded by `scale * pi/2`.
pub fn transport_cost(
    phi: &DensityMatrix,
    psi: &DensityMatrix,
    p: f64,
    scale: DistanceScale,
    budget: &OptimizerBudget,
) -> Result<CostResult> {
    if phi.dim() != psi.dim() {
        return Err(Error::DimMismatch {
            left: phi.dim(),
            right: psi.dim(),
        });
    }
    let src = ClusterData::from_density(phi);
    let tgt = ClusterData::from_density(psi);
    let degenerate = src.degenerate() || tgt.degenerate();

    let restarts = if degenerate {
        budget.restarts.max(1)
    } else {
        1
    };
    let outcomes: Vec<Result<RestartOutcome>> = par::map_indexed(restarts, |r| {
        let (f0, f1) = if r == 0 {
            (identity_frames(&src), identity_frames(&tgt))
        } else {
            (
                haar_frames(&src, budget.seed.wrapping_add(2 * r as u64)),
                haar_frames(&tgt, budget.seed.wrapping_add(2 * r as u64 + 1)),
            )
        };
        run_restart(&src, &tgt, f0, f1, p, scale, budget)
    });
    let mut best: Option<(usize, RestartOutcome)> = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        let outcome = outcome?;
        let better = match &best {
            None => true,
            Some((_, current)) => outcome.value_power < current.value_power - 1e-15,
        };
        if better {
            best = Some((r, outcome));
        }
    }
    let (_, winner) = best.expect("at least one restart");

    let atoms0 = frame_atoms(&src, &winner.frames0);
    let atoms1 = frame_atoms(&tgt, &winner.frames1);
    let mu0 = measure_from_atoms(atoms0)?;
    let mu1 = measure_from_atoms(atoms1)?;
    let solved = transport::solve(&mu0, &mu1, p, scale)?;
    let plan = solved.plan.ok_or(Error::Infeasible)?;

    let certified = if !degenerate {
        true
    } else if budget.certify_grid {
        grid_certify(&src, &tgt, p, scale, winner.value_power).unwrap_or(false)
    } else {
        false
    };

    Ok(CostResult {
        value: solved.cost,
        mu0,
        mu1,
        plan,
        p,
        iterations: winner.rounds,
        restarts,
        certified,
        objective_trace: winner.trace,
    })
}

/// The extended Wasserstein distance between states: the measure-level
/// distance between the canonical spectral measures. Infinite whenever the
/// eigenspace dimension profiles are incompatible.
pub fn wasserstein_distance(
    phi: &DensityMatrix,
    psi: &DensityMatrix,
    p: f64,
    scale: DistanceScale,
) -> Result<(f64, Option<TransportPlan>)> {
    if phi.dim() != psi.dim() {
        return Err(Error::DimMismatch {
            left: phi.dim(),
            right: psi.dim(),
        });
    }
    transport::wasserstein(
        &spectral_measure(phi),
        &spectral_measure(psi),
        p,
        scale,
    )
}

/// Triangle inequality for the state distance on three finite legs.
pub fn triangle_check(
    phi: &DensityMatrix,
    psi: &DensityMatrix,
    chi: &DensityMatrix,
    p: f64,
    scale: DistanceScale,
) -> Result<bool> {
    let (ab, _) = wasserstein_distance(phi, psi, p, scale)?;
    let (bc, _) = wasserstein_distance(psi, chi, p, scale)?;
    let (ac, _) = wasserstein_distance(phi, chi, p, scale)?;
    if !(ab.is_finite() && bc.is_finite() && ac.is_finite()) {
        return Err(Error::Infeasible);
    }
    Ok(ac <= ab + bc + 1e-8)
}

/// One semidistance violation found by [`check_semidistance`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemidistanceViolation {
    pub pair: (usize, usize),
    pub kind: String,
    pub magnitude: f64,
}

/// Report of the semidistance checks over a sample of states.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemidistanceReport {
    pub pairs_checked: usize,
    pub violations: Vec<SemidistanceViolation>,
}

/// Check, over all pairs in the sample: symmetry of the cost, the bound
/// `cost <= scale * pi/2`, the ordering `cost <= W_p`, and the spot check
/// that a near-zero cost forces near-equal densities.
pub fn check_semidistance(
    sample: &[DensityMatrix],
    p: f64,
    scale: DistanceScale,
    budget: &OptimizerBudget,
) -> Result<SemidistanceReport> {
    let mut report = SemidistanceReport {
        pairs_checked: 0,
        violations: Vec::new(),
    };
    let bound = scale.factor() * std::f64::consts::FRAC_PI_2;
    for i in 0..sample.len() {
        for j in (i + 1)..sample.len() {
            report.pairs_checked += 1;
            let forward = transport_cost(&sample[i], &sample[j], p, scale, budget)?;
            let backward = transport_cost(&sample[j], &sample[i], p, scale, budget)?;
            let asym = (forward.value - backward.value).abs();
            if asym > 1e-6 {
                report.violations.push(SemidistanceViolation {
                    pair: (i, j),
                    kind: "symmetry".into(),
                    magnitude: asym,
                });
            }
            if forward.value > bound + 1e-9 {
                report.violations.push(SemidistanceViolation {
                    pair: (i, j),
                    kind: "diameter".into(),
                    magnitude: forward.value - bound,
                });
            }
            let (wp, _) = wasserstein_distance(&sample[i], &sample[j], p, scale)?;
            if wp.is_finite() && forward.value > wp + 1e-6 {
                report.violations.push(SemidistanceViolation {
                    pair: (i, j),
                    kind: "cost_exceeds_wasserstein".into(),
                    magnitude: forward.value - wp,
                });
            }
            if forward.value < 1e-6 {
                let gap = sample[i].trace_distance(&sample[j])?;
                if gap > 1e-4 {
                    report.violations.push(SemidistanceViolation {
                        pair: (i, j),
                        kind: "indiscernible".into(),
                        magnitude: gap,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Displacement interpolation of a solved plan: measures, densities and
/// orthogonality flags along a time grid.
#[derive(Debug, Clone)]
pub struct StatePath {
    pub times: Vec<f64>,
    pub measures: Vec<DiscreteMeasure>,
    pub densities: Vec<DensityMatrix>,
    /// Whether the measure at each time stays on an orthogonal family.
    pub orthogonal_flags: Vec<bool>,
}

impl StatePath {
    pub fn all_orthogonal(&self) -> bool {
        self.orthogonal_flags.iter().all(|&f| f)
    }

    /// Largest deviation from `W_p(rho_s, rho_t) = |t-s| W_p(rho_0, rho_1)`
    /// over grid pairs; only meaningful when the whole path is orthogonal,
    /// `None` otherwise.
    pub fn geodesic_deviation(&self, p: f64, scale: DistanceScale) -> Result<Option<f64>> {
        if !self.all_orthogonal() {
            return Ok(None);
        }
        let last = self.densities.len() - 1;
        let (total, _) = wasserstein_distance(&self.densities[0], &self.densities[last], p, scale)?;
        if !total.is_finite() {
            return Err(Error::Infeasible);
        }
        let mut worst: f64 = 0.0;
        for s in 0..self.densities.len() {
            for t in (s + 1)..self.densities.len() {
                let (w, _) =
                    wasserstein_distance(&self.densities[s], &self.densities[t], p, scale)?;
                let expected = (self.times[t] - self.times[s]).abs() * total;
                if w.is_finite() {
                    worst = worst.max((w - expected).abs());
                } else {
                    worst = f64::INFINITY;
                }
            }
        }
        Ok(Some(worst))
    }
}

/// Build the displacement interpolation of a plan: every support pair
/// travels along the connecting Grassmann geodesic, carrying its mass.
pub fn state_geodesic(plan: &TransportPlan, grid: &[f64]) -> Result<StatePath> {
    let support = plan.support();
    // each supported pair gets its log map; cut-locus pairs abort
    let mut legs = Vec::with_capacity(support.len());
    for &(i, j) in &support {
        let p = &plan.source().atoms()[i].projection;
        let q = &plan.target().atoms()[j].projection;
        let z = log_map(p, q)?;
        let mass = plan.mass(i, j);
        legs.push((p.clone(), z, mass));
    }
    let mut measures = Vec::with_capacity(grid.len());
    let mut densities = Vec::with_capacity(grid.len());
    let mut flags = Vec::with_capacity(grid.len());
    for &t in grid {
        let mut atoms = Vec::with_capacity(legs.len());
        for (p, z, mass) in &legs {
            let moved = geodesic_point(p, z, t)?;
            atoms.push(Atom {
                weight: mass / p.rank() as f64,
                projection: moved,
            });
        }
        let mu = DiscreteMeasure::merging(atoms)?;
        let rho = integrate(&mu)?;
        flags.push(orthogonality_defect(&mu) <= 1e-7);
        measures.push(mu);
        densities.push(rho);
    }
    Ok(StatePath {
        times: grid.to_vec(),
        measures,
        densities,
        orthogonal_flags: flags,
    })
}

/// Outcome of the rigidity analysis of an orthogonal geodesic.
#[derive(Debug, Clone)]
pub struct RigidityDiagnosis {
    /// Whether the plan is induced by a bijection on atoms.
    pub bijective: bool,
    /// Matched atom pairs when bijective.
    pub matching: Vec<(usize, usize)>,
    /// Worst weight disagreement across matched atoms.
    pub weight_mismatch: f64,
    /// The intertwining unitary, when one was constructed.
    pub unitary: Option<CMat>,
    /// `|| rho_psi - u rho_phi u* ||_1` for the constructed unitary.
    pub conjugation_error: Option<f64>,
}

/// Check the rigidity consequences of an orthogonal geodesic: the plan must
/// come from a bijection matching atoms of equal trace and weight, and the
/// matched states are then unitarily conjugate. A non-bijective plan is
/// reported, not fatal.
pub fn rigidity_check(plan: &TransportPlan, path: &StatePath) -> Result<RigidityDiagnosis> {
    if let Some(idx) = path.orthogonal_flags.iter().position(|&f| !f) {
        return Err(Error::NotOrthogonalPath {
            time: path.times[idx],
        });
    }
    let support = plan.support();
    let mut row_hits = vec![0usize; plan.source().len()];
    let mut col_hits = vec![0usize; plan.target().len()];
    for &(i, j) in &support {
        row_hits[i] += 1;
        col_hits[j] += 1;
    }
    let bijective = row_hits.iter().all(|&h| h == 1) && col_hits.iter().all(|&h| h == 1);
    if !bijective {
        return Ok(RigidityDiagnosis {
            bijective: false,
            matching: Vec::new(),
            weight_mismatch: f64::NAN,
            unitary: None,
            conjugation_error: None,
        });
    }

    let mut weight_mismatch: f64 = 0.0;
    for &(i, j) in &support {
        let a = &plan.source().atoms()[i];
        let b = &plan.target().atoms()[j];
        weight_mismatch = weight_mismatch.max((a.weight - b.weight).abs());
    }

    // u maps each source range onto its matched target range, extended by
    // an arbitrary orthonormal completion on the kernels
    let n = plan.source().dim();
    let mut u = CMat::zeros(n, n);
    for &(i, j) in &support {
        let yp = plan.source().atoms()[i].projection.range_basis();
        let yq = plan.target().atoms()[j].projection.range_basis();
        u += &yq * yp.adjoint();
    }
    let rho_phi = integrate(plan.source())?;
    let rho_psi = integrate(plan.target())?;
    let spectrum_phi = hermitian_eig(rho_phi.matrix())?;
    let spectrum_psi = hermitian_eig(rho_psi.matrix())?;
    let kernel_phi = kernel_basis_of(&spectrum_phi);
    let kernel_psi = kernel_basis_of(&spectrum_psi);
    if kernel_phi.ncols() != kernel_psi.ncols() {
        return Err(Error::RankMismatch {
            left: kernel_phi.ncols(),
            right: kernel_psi.ncols(),
        });
    }
    u += &kernel_psi * kernel_phi.adjoint();

    let conj = &u * rho_phi.matrix() * u.adjoint();
    let error = trace_norm(&(conj - rho_psi.matrix()))?;
    Ok(RigidityDiagnosis {
        bijective: true,
        matching: support,
        weight_mismatch,
        unitary: Some(u),
        conjugation_error: Some(error),
    })
}

fn kernel_basis_of(spectrum: &crate::linalg::HermitianSpectrum) -> CMat {
    let keep: Vec<usize> = spectrum
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= CLUSTER_GAP)
        .map(|(k, _)| k)
        .collect();
    let n = spectrum.dim();
    let mut basis = CMat::zeros(n, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        basis.set_column(col, &spectrum.eigenvectors.column(k));
    }
    basis
}

/// One row of the convergence experiment table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub trace_gap: f64,
    pub cost: f64,
    pub wasserstein_finite: bool,
}

/// Cost convergence along the perturbation family
/// `rho_n = rho + delta / n`: the cost must vanish as the trace gap does,
/// whether or not the Wasserstein distance stays infinite.
pub fn convergence_experiment(
    rho: &DensityMatrix,
    delta: &CMat,
    n_max: usize,
    p: f64,
    scale: DistanceScale,
    budget: &OptimizerBudget,
) -> Result<Vec<ConvergenceRow>> {
    let n_dim = rho.dim();
    if delta.nrows() != n_dim || delta.ncols() != n_dim {
        return Err(Error::DimMismatch {
            left: delta.nrows(),
            right: n_dim,
        });
    }
    if hermitian_defect(delta) > lin_tol(n_dim) {
        return Err(Error::NotHermitian {
            deviation: hermitian_defect(delta),
            tol: lin_tol(n_dim),
        });
    }
    let tr = delta.diagonal().sum().re;
    if tr.abs() > 1e-9 {
        return Err(Error::Validation {
            path: "perturbation".into(),
            reason: format!("not traceless: tr = {tr:.3e}"),
        });
    }
    let mut ns = Vec::new();
    let mut n = 1usize;
    while n < n_max {
        ns.push(n);
        n *= 2;
    }
    ns.push(n_max);

    let mut rows = Vec::with_capacity(ns.len());
    for &n in &ns {
        let perturbed = rho.matrix() + delta.map(|z| z / n as f64);
        let trace = perturbed.diagonal().sum().re;
        let normalized = perturbed.map(|z| z / trace);
        let spectrum = hermitian_eig(&normalized)?;
        if let Some(&min) = spectrum.eigenvalues.last() {
            if min < -lin_tol(n_dim) {
                return Err(Error::NotPsd { min_eig: min });
            }
        }
        let rho_n = DensityMatrix::new(normalized)?;
        let cost = transport_cost(&rho_n, rho, p, scale, budget)?;
        let (wp, _) = wasserstein_distance(&rho_n, rho, p, scale)?;
        rows.push(ConvergenceRow {
            n,
            trace_gap: rho_n.trace_distance(rho)?,
            cost: cost.value,
            wasserstein_finite: wp.is_finite(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn e(n: usize, k: usize) -> CVec {
        CVec::from_fn(n, |i, _| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) })
    }

    #[test]
    fn cost_identical_states_is_zero() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let result = transport_cost(
            &rho,
            &rho,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        assert!(result.value < 1e-9);
        assert!(result.certified);
    }

    #[test]
    fn cost_orthogonal_pure_states() {
        let phi = DensityMatrix::pure(&e(2, 0)).unwrap();
        let psi = DensityMatrix::pure(&e(2, 1)).unwrap();
        let result = transport_cost(
            &phi,
            &psi,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(result.value, FRAC_PI_2, epsilon = 1e-9);
        assert!(result.certified);
    }

    #[test]
    fn cost_degenerate_benchmark() {
        // half the mass travels theta, half pi/2 - theta: optimal at pi/4
        let phi = DensityMatrix::maximally_mixed(2);
        let psi = DensityMatrix::pure(&e(2, 0)).unwrap();
        let result = transport_cost(
            &phi,
            &psi,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(result.value, FRAC_PI_4, epsilon = 1e-6);
        // objective never increases along the winning run
        for pair in result.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn cost_certify_grid_on_benchmark() {
        let phi = DensityMatrix::maximally_mixed(2);
        let psi = DensityMatrix::pure(&e(2, 0)).unwrap();
        let budget = OptimizerBudget {
            certify_grid: true,
            ..OptimizerBudget::default()
        };
        let result =
            transport_cost(&phi, &psi, 2.0, DistanceScale::Canonical, &budget).unwrap();
        assert!(result.certified);
    }

    #[test]
    fn wasserstein_distance_infinite_across_profiles() {
        let phi = DensityMatrix::maximally_mixed(2);
        let psi = DensityMatrix::pure(&e(2, 0)).unwrap();
        let (value, plan) =
            wasserstein_distance(&phi, &psi, 2.0, DistanceScale::Canonical).unwrap();
        assert!(value.is_infinite());
        assert!(plan.is_none());
    }

    #[test]
    fn wasserstein_distance_diagonal_pair() {
        let phi = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let psi = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let (value, plan) =
            wasserstein_distance(&phi, &psi, 2.0, DistanceScale::Canonical).unwrap();
        assert!(value.is_finite());
        assert!(plan.is_some());
        // identity matching is optimal: cost (0.1 each leg moved nowhere,
        // atoms coincide pairwise)
        assert!(value < FRAC_PI_2);
    }

    #[test]
    fn nondegenerate_cost_equals_wasserstein() {
        let phi = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let psi = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let cost = transport_cost(
            &phi,
            &psi,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        let (wp, _) = wasserstein_distance(&phi, &psi, 2.0, DistanceScale::Canonical).unwrap();
        assert_abs_diff_eq!(cost.value, wp, epsilon = 1e-9);
    }

    #[test]
    fn geodesic_pure_rotation() {
        // a single atom travelling along a rotating line; the endpoint sits
        // strictly inside the cut locus so the connecting geodesic is unique
        let phi = DensityMatrix::pure(&e(2, 0)).unwrap();
        let angle = 1.0f64;
        let psi = DensityMatrix::pure(&CVec::from_vec(vec![
            c(angle.cos(), 0.0),
            c(angle.sin(), 0.0),
        ]))
        .unwrap();
        let result = transport_cost(
            &phi,
            &psi,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        let grid: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
        let path = state_geodesic(&result.plan, &grid).unwrap();
        assert!(path.all_orthogonal());
        // endpoints match
        assert!(path.densities[0].trace_distance(&phi).unwrap() < 1e-8);
        assert!(path.densities[4].trace_distance(&psi).unwrap() < 1e-8);
        let deviation = path
            .geodesic_deviation(2.0, DistanceScale::Canonical)
            .unwrap()
            .unwrap();
        assert!(deviation < 1e-6, "deviation {deviation}");
    }

    #[test]
    fn geodesic_rejects_cut_locus_pairs() {
        // orthogonal lines sit at distance exactly pi/2 where the geodesic
        // is not unique; the interpolation refuses to pick one
        let phi = DensityMatrix::pure(&e(2, 0)).unwrap();
        let psi = DensityMatrix::pure(&e(2, 1)).unwrap();
        let result = transport_cost(
            &phi,
            &psi,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        assert!(matches!(
            state_geodesic(&result.plan, &[0.0, 1.0]),
            Err(Error::CutLocus { .. })
        ));
    }

    #[test]
    fn constant_path_for_identical_states() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let result = transport_cost(
            &rho,
            &rho,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        let path = state_geodesic(&result.plan, &[0.0, 0.5, 1.0]).unwrap();
        for density in &path.densities {
            assert!(density.trace_distance(&rho).unwrap() < 1e-9);
        }
    }

    #[test]
    fn rigidity_on_identical_states() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let result = transport_cost(
            &rho,
            &rho,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        let path = state_geodesic(&result.plan, &[0.0, 1.0]).unwrap();
        let diagnosis = rigidity_check(&result.plan, &path).unwrap();
        assert!(diagnosis.bijective);
        assert!(diagnosis.conjugation_error.unwrap() < 1e-9);
    }

    #[test]
    fn semidistance_report_is_clean() {
        let sample = vec![
            DensityMatrix::diagonal(&[0.7, 0.3]).unwrap(),
            DensityMatrix::diagonal(&[0.6, 0.4]).unwrap(),
            DensityMatrix::maximally_mixed(2),
            DensityMatrix::pure(&e(2, 0)).unwrap(),
        ];
        let report = check_semidistance(
            &sample,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        assert_eq!(report.pairs_checked, 6);
        assert!(
            report.violations.is_empty(),
            "violations: {:?}",
            report.violations
        );
    }

    #[test]
    fn rigidity_reports_non_bijective_or_crossing_paths() {
        // different spectra cannot be matched atom-to-atom: either the plan
        // splits an atom or the interpolation leaves the orthogonal family
        let phi = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let angle = 0.5f64;
        let rot = CMat::from_row_slice(
            2,
            2,
            &[
                c(angle.cos(), 0.0),
                c(-angle.sin(), 0.0),
                c(angle.sin(), 0.0),
                c(angle.cos(), 0.0),
            ],
        );
        let psi_mat = &rot
            * DensityMatrix::diagonal(&[0.6, 0.4]).unwrap().matrix()
            * rot.adjoint();
        let psi = DensityMatrix::new(psi_mat).unwrap();
        let result = transport_cost(
            &phi,
            &psi,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        let grid: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
        match state_geodesic(&result.plan, &grid) {
            Ok(path) => match rigidity_check(&result.plan, &path) {
                Ok(diagnosis) => assert!(!diagnosis.bijective),
                Err(Error::NotOrthogonalPath { .. }) => {}
                Err(e) => panic!("unexpected: {e}"),
            },
            Err(Error::CutLocus { .. }) => {}
            Err(e) => panic!("unexpected: {e}"),
        }
    }

    #[test]
    fn triangle_on_common_eigenbasis() {
        let a = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let b = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
        let c = DensityMatrix::diagonal(&[0.55, 0.45]).unwrap();
        assert!(triangle_check(&a, &b, &c, 2.0, DistanceScale::Canonical).unwrap());
    }

    #[test]
    fn triangle_rejects_infinite_leg() {
        let a = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let b = DensityMatrix::maximally_mixed(2);
        let c = DensityMatrix::diagonal(&[0.55, 0.45]).unwrap();
        assert!(matches!(
            triangle_check(&a, &b, &c, 2.0, DistanceScale::Canonical),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn convergence_trivial_perturbation() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let delta = CMat::zeros(2, 2);
        let rows = convergence_experiment(
            &rho,
            &delta,
            8,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        for row in rows {
            assert!(row.cost < 1e-9);
        }
    }

    #[test]
    fn convergence_nondegenerate_family() {
        // moving mass epsilon across orthogonal lines costs (pi/2) sqrt(eps),
        // so the monotone decay is like 1/sqrt(n)
        let rho = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let delta = CMat::from_row_slice(
            2,
            2,
            &[c(0.1, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.1, 0.0)],
        );
        let rows = convergence_experiment(
            &rho,
            &delta,
            64,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        let last = rows.last().unwrap();
        let expected = std::f64::consts::FRAC_PI_2 * (0.1f64 / 64.0).sqrt();
        assert_abs_diff_eq!(last.cost, expected, epsilon = 1e-6);
        assert!(last.wasserstein_finite);
        for pair in rows.windows(2) {
            assert!(pair[1].cost <= pair[0].cost + 1e-4);
        }
    }

    #[test]
    fn convergence_small_perturbation_reaches_threshold() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let delta = CMat::from_row_slice(
            2,
            2,
            &[c(0.002, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.002, 0.0)],
        );
        let rows = convergence_experiment(
            &rho,
            &delta,
            64,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        assert!(rows.last().unwrap().cost < 1e-2);
    }

    #[test]
    fn convergence_degenerate_limit_keeps_wasserstein_infinite() {
        let rho = DensityMatrix::maximally_mixed(2);
        let delta = CMat::from_row_slice(
            2,
            2,
            &[c(0.002, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.002, 0.0)],
        );
        let rows = convergence_experiment(
            &rho,
            &delta,
            64,
            2.0,
            DistanceScale::Canonical,
            &OptimizerBudget::default(),
        )
        .unwrap();
        for row in &rows {
            assert!(!row.wasserstein_finite);
        }
        assert!(rows.last().unwrap().cost < 1e-2);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = DensityMatrix::maximally_mixed(2);
        let b = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            transport_cost(
                &a,
                &b,
                2.0,
                DistanceScale::Canonical,
                &OptimizerBudget::default()
            ),
            Err(Error::DimMismatch { .. })
        ));
    }
}
