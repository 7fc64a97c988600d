//! Exact discrete optimal transport on the Grassmannian.
//!
//! Transport plans between normalized discrete measures must couple atoms
//! of equal rank (the distance is infinite across connected components), so
//! the problem splits into independent per-rank blocks. Each block is a
//! dense transportation problem solved exactly by the simplex in
//! [`simplex`]; the blocks also yield Kantorovich potentials with zero
//! duality gap and complementary slackness.

mod simplex;

pub use simplex::TransportSolution;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grassmann::{distance, DistanceScale, Projection};
use crate::linalg::CMat;
use crate::par;
use crate::spectral::{spectral_measure, DensityMatrix, DiscreteMeasure, MeasureJson};
use crate::WEIGHT_FLOOR;

/// Tolerance on marginal masses.
pub const MASS_TOL: f64 = 1e-9;

fn check_exponent(p: f64) -> Result<()> {
    if !(1.0..=16.0).contains(&p) {
        return Err(Error::BadExponent { p });
    }
    Ok(())
}

/// Mass of an atom under the trace normalization.
fn atom_mass(weight: f64, proj: &Projection) -> f64 {
    weight * proj.rank() as f64
}

/// A coupling of two normalized discrete measures, concentrated on
/// equal-rank atom pairs.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    /// Row-major `source.len() x target.len()` masses.
    masses: Vec<f64>,
}

impl TransportPlan {
    pub fn new(
        source: DiscreteMeasure,
        target: DiscreteMeasure,
        masses: Vec<f64>,
    ) -> Result<Self> {
        if masses.len() != source.len() * target.len() {
            return Err(Error::DimMismatch {
                left: masses.len(),
                right: source.len() * target.len(),
            });
        }
        let plan = Self {
            source,
            target,
            masses,
        };
        let defect = plan.marginal_defect();
        if defect > MASS_TOL {
            return Err(Error::Validation {
                path: "transport plan".into(),
                reason: format!("marginal defect {defect:.3e}"),
            });
        }
        for (i, j) in plan.support() {
            let (rp, rq) = (
                plan.source.atoms()[i].projection.rank(),
                plan.target.atoms()[j].projection.rank(),
            );
            if rp != rq {
                return Err(Error::RankMismatch { left: rp, right: rq });
            }
        }
        Ok(plan)
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.masses[i * self.target.len() + j]
    }

    /// Atom pairs carrying mass above the weight floor.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for i in 0..self.source.len() {
            for j in 0..self.target.len() {
                if self.mass(i, j) > WEIGHT_FLOOR {
                    pairs.push((i, j));
                }
            }
        }
        pairs
    }

    /// Worst deviation of row/column sums from the marginal masses.
    pub fn marginal_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, atom) in self.source.atoms().iter().enumerate() {
            let row: f64 = (0..self.target.len()).map(|j| self.mass(i, j)).sum();
            worst = worst.max((row - atom_mass(atom.weight, &atom.projection)).abs());
        }
        for (j, atom) in self.target.atoms().iter().enumerate() {
            let col: f64 = (0..self.source.len()).map(|i| self.mass(i, j)).sum();
            worst = worst.max((col - atom_mass(atom.weight, &atom.projection)).abs());
        }
        worst
    }

    /// Total `p`-cost `sum m_ij d(P_i, Q_j)^p` of the plan.
    pub fn cost_power(&self, p: f64, scale: DistanceScale) -> f64 {
        let mut total = 0.0;
        for (i, j) in self.support() {
            let d = distance(
                &self.source.atoms()[i].projection,
                &self.target.atoms()[j].projection,
                scale,
            );
            total += self.mass(i, j) * d.powf(p);
        }
        total
    }

    pub fn to_json(&self) -> PlanJson {
        let mut masses = Vec::new();
        for (i, j) in self.support() {
            masses.push(MassEntry {
                i,
                j,
                mass: self.mass(i, j),
            });
        }
        PlanJson {
            source: self.source.to_json(),
            target: self.target.to_json(),
            masses,
        }
    }

    pub fn from_json(json: &PlanJson) -> Result<Self> {
        let source = DiscreteMeasure::from_json(&json.source)?;
        let target = DiscreteMeasure::from_json(&json.target)?;
        let mut masses = vec![0.0; source.len() * target.len()];
        for entry in &json.masses {
            if entry.i >= source.len() || entry.j >= target.len() {
                return Err(Error::Validation {
                    path: "plan".into(),
                    reason: format!("mass entry ({}, {}) out of range", entry.i, entry.j),
                });
            }
            masses[entry.i * target.len() + entry.j] = entry.mass;
        }
        Self::new(source, target, masses)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MassEntry {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanJson {
    pub source: MeasureJson,
    pub target: MeasureJson,
    pub masses: Vec<MassEntry>,
}

/// One per-rank transportation block of a solved problem.
#[derive(Debug, Clone)]
pub struct RankBlock {
    pub rank: usize,
    pub source_idx: Vec<usize>,
    pub target_idx: Vec<usize>,
    pub solution: TransportSolution,
}

/// A solved discrete problem: total cost, assembled plan and the per-rank
/// simplex data (kept for duals).
#[derive(Debug, Clone)]
pub struct WassersteinSolve {
    pub cost: f64,
    pub plan: Option<TransportPlan>,
    pub blocks: Vec<RankBlock>,
}

fn group_by_rank(mu: &DiscreteMeasure) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, atom) in mu.atoms().iter().enumerate() {
        groups.entry(atom.projection.rank()).or_default().push(idx);
    }
    groups
}

/// Raw transportation solve on explicit masses and a dense cost matrix
/// (row-major). Used on hot paths where atoms are all of one rank and the
/// cost matrix is already at hand.
pub fn solve_rank_one(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
) -> Result<TransportSolution> {
    simplex::solve_transportation(supply, demand, cost)
}

/// Solve the optimal transport problem between two normalized measures,
/// keeping the per-block simplex solutions.
pub fn solve(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    p: f64,
    scale: DistanceScale,
) -> Result<WassersteinSolve> {
    check_exponent(p)?;
    for mu in [mu0, mu1] {
        let mass = mu.total_mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::NotNormalized { mass });
        }
    }
    let src_groups = group_by_rank(mu0);
    let tgt_groups = group_by_rank(mu1);

    // Feasibility: the per-rank masses have to agree.
    let ranks: std::collections::BTreeSet<usize> = src_groups
        .keys()
        .chain(tgt_groups.keys())
        .copied()
        .collect();
    for &rank in &ranks {
        let src_mass: f64 = src_groups
            .get(&rank)
            .map(|idx| {
                idx.iter()
                    .map(|&i| {
                        let a = &mu0.atoms()[i];
                        atom_mass(a.weight, &a.projection)
                    })
                    .sum()
            })
            .unwrap_or(0.0);
        let tgt_mass: f64 = tgt_groups
            .get(&rank)
            .map(|idx| {
                idx.iter()
                    .map(|&j| {
                        let a = &mu1.atoms()[j];
                        atom_mass(a.weight, &a.projection)
                    })
                    .sum()
            })
            .unwrap_or(0.0);
        if (src_mass - tgt_mass).abs() > MASS_TOL {
            return Ok(WassersteinSolve {
                cost: f64::INFINITY,
                plan: None,
                blocks: Vec::new(),
            });
        }
    }

    // Rank blocks solve independently; merge in rank order.
    let jobs: Vec<(usize, Vec<usize>, Vec<usize>)> = ranks
        .iter()
        .map(|&rank| {
            (
                rank,
                src_groups.get(&rank).cloned().unwrap_or_default(),
                tgt_groups.get(&rank).cloned().unwrap_or_default(),
            )
        })
        .collect();
    let solved: Vec<Result<RankBlock>> = par::map_slice(&jobs, |(rank, src_idx, tgt_idx)| {
        let supply: Vec<f64> = src_idx
            .iter()
            .map(|&i| {
                let a = &mu0.atoms()[i];
                atom_mass(a.weight, &a.projection)
            })
            .collect();
        let demand: Vec<f64> = tgt_idx
            .iter()
            .map(|&j| {
                let a = &mu1.atoms()[j];
                atom_mass(a.weight, &a.projection)
            })
            .collect();
        let mut cost = vec![0.0; src_idx.len() * tgt_idx.len()];
        for (bi, &i) in src_idx.iter().enumerate() {
            for (bj, &j) in tgt_idx.iter().enumerate() {
                let d = distance(
                    &mu0.atoms()[i].projection,
                    &mu1.atoms()[j].projection,
                    scale,
                );
                cost[bi * tgt_idx.len() + bj] = d.powf(p);
            }
        }
        let solution = simplex::solve_transportation(&supply, &demand, &cost)?;
        Ok(RankBlock {
            rank: *rank,
            source_idx: src_idx.clone(),
            target_idx: tgt_idx.clone(),
            solution,
        })
    });
    let blocks = solved.into_iter().collect::<Result<Vec<_>>>()?;

    let mut masses = vec![0.0; mu0.len() * mu1.len()];
    let mut cost_power = 0.0;
    for block in &blocks {
        cost_power += block.solution.cost;
        for (bi, &i) in block.source_idx.iter().enumerate() {
            for (bj, &j) in block.target_idx.iter().enumerate() {
                masses[i * mu1.len() + j] = block.solution.flows[bi * block.target_idx.len() + bj];
            }
        }
    }
    let plan = TransportPlan::new(mu0.clone(), mu1.clone(), masses)?;
    Ok(WassersteinSolve {
        cost: cost_power.max(0.0).powf(1.0 / p),
        plan: Some(plan),
        blocks,
    })
}

/// The `p`-Wasserstein distance between normalized discrete measures, with
/// an optimal plan when the cost is finite.
pub fn wasserstein(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    p: f64,
    scale: DistanceScale,
) -> Result<(f64, Option<TransportPlan>)> {
    let solve = solve(mu0, mu1, p, scale)?;
    Ok((solve.cost, solve.plan))
}

/// Kantorovich potentials on the atoms of a solved problem: `f` on the
/// source, `g = f^{ d^p }` on the target, with
/// `g(Q) - f(P) <= d(P,Q)^p` everywhere and equality on the plan support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub p: f64,
}

impl DualPotentials {
    /// Dual objective `sum g beta - sum f alpha` under trace-normalized
    /// atom masses.
    pub fn value(&self, mu0: &DiscreteMeasure, mu1: &DiscreteMeasure) -> f64 {
        let src: f64 = mu0
            .atoms()
            .iter()
            .zip(&self.f)
            .map(|(a, &f)| atom_mass(a.weight, &a.projection) * f)
            .sum();
        let tgt: f64 = mu1
            .atoms()
            .iter()
            .zip(&self.g)
            .map(|(a, &g)| atom_mass(a.weight, &a.projection) * g)
            .sum();
        tgt - src
    }

    /// Worst violation of `g(Q) - f(P) <= d(P,Q)^p` over same-rank pairs.
    pub fn feasibility_defect(
        &self,
        mu0: &DiscreteMeasure,
        mu1: &DiscreteMeasure,
        scale: DistanceScale,
    ) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in mu0.atoms().iter().enumerate() {
            for (j, b) in mu1.atoms().iter().enumerate() {
                if a.projection.rank() != b.projection.rank() {
                    continue;
                }
                let d = distance(&a.projection, &b.projection, scale);
                worst = worst.max(self.g[j] - self.f[i] - d.powf(self.p));
            }
        }
        worst
    }
}

/// The `d^p`-transform `f^{d^p}(Q) = inf_P f(P) + d(P,Q)^p` over same-rank
/// source atoms; `+inf` when a target atom sees no same-rank source.
pub fn c_transform(
    f: &[f64],
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    p: f64,
    scale: DistanceScale,
) -> Vec<f64> {
    mu1.atoms()
        .iter()
        .map(|b| {
            let mut best = f64::INFINITY;
            for (i, a) in mu0.atoms().iter().enumerate() {
                if a.projection.rank() != b.projection.rank() {
                    continue;
                }
                let d = distance(&a.projection, &b.projection, scale);
                best = best.min(f[i] + d.powf(p));
            }
            best
        })
        .collect()
}

/// Reverse transform `g_{d^p}(P) = sup_Q g(Q) - d(P,Q)^p`, used for the
/// double-transform contraction property.
pub fn c_transform_reverse(
    g: &[f64],
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    p: f64,
    scale: DistanceScale,
) -> Vec<f64> {
    mu0.atoms()
        .iter()
        .map(|a| {
            let mut best = f64::NEG_INFINITY;
            for (j, b) in mu1.atoms().iter().enumerate() {
                if a.projection.rank() != b.projection.rank() {
                    continue;
                }
                let d = distance(&a.projection, &b.projection, scale);
                best = best.max(g[j] - d.powf(p));
            }
            best
        })
        .collect()
}

/// Solve the dual problem: potentials achieving the primal cost.
///
/// `f` comes from the per-block simplex potentials; `g` is then replaced by
/// the transform of `f`, which preserves feasibility and optimality and
/// makes `g = f^{d^p}` exact on the target support.
pub fn dual_solve(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    p: f64,
    scale: DistanceScale,
) -> Result<DualPotentials> {
    let solved = solve(mu0, mu1, p, scale)?;
    if !solved.cost.is_finite() {
        return Err(Error::Infeasible);
    }
    let mut f = vec![0.0; mu0.len()];
    for block in &solved.blocks {
        for (bi, &i) in block.source_idx.iter().enumerate() {
            f[i] = -block.solution.row_potentials[bi];
        }
    }
    let g = c_transform(&f, mu0, mu1, p, scale);
    Ok(DualPotentials { f, g, p })
}

/// Check `d^p`-cyclical monotonicity of the plan support over all cycles of
/// length up to `max_cycle` (capped at 5).
pub fn is_cyclically_monotone(
    plan: &TransportPlan,
    p: f64,
    scale: DistanceScale,
    max_cycle: usize,
) -> bool {
    let max_cycle = max_cycle.min(5);
    let support = plan.support();
    let cost = |i: usize, j: usize| {
        distance(
            &plan.source().atoms()[i].projection,
            &plan.target().atoms()[j].projection,
            scale,
        )
        .powf(p)
    };
    // cached pair costs over the support
    let costs: Vec<Vec<f64>> = support
        .iter()
        .map(|&(i, _)| support.iter().map(|&(_, j)| cost(i, j)).collect())
        .collect();
    let diag: Vec<f64> = (0..support.len()).map(|k| costs[k][k]).collect();

    let mut ok = true;
    let mut combo = Vec::new();
    for len in 2..=max_cycle.min(support.len()) {
        combinations(support.len(), len, &mut combo, 0, &mut |subset| {
            // all cyclic arrangements with the first element fixed
            let mut rest: Vec<usize> = subset[1..].to_vec();
            permutations(&mut rest, 0, &mut |tail| {
                let mut order = Vec::with_capacity(subset.len());
                order.push(subset[0]);
                order.extend_from_slice(tail);
                let own: f64 = order.iter().map(|&k| diag[k]).sum();
                let rotated: f64 = order
                    .iter()
                    .enumerate()
                    .map(|(pos, &k)| costs[k][order[(pos + 1) % order.len()]])
                    .sum();
                if own > rotated + 1e-9 {
                    ok = false;
                }
            });
        });
        if !ok {
            return false;
        }
    }
    ok
}

fn combinations(
    n: usize,
    len: usize,
    current: &mut Vec<usize>,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if current.len() == len {
        visit(current);
        return;
    }
    for k in start..n {
        current.push(k);
        combinations(n, len, current, k + 1, visit);
        current.pop();
    }
}

fn permutations(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// A Kantorovich potential represented as an operator `C = f(rho)` by
/// functional calculus: one diagonal value per eigenvalue cluster.
#[derive(Debug, Clone)]
pub struct KantorovichOperator {
    diag_values: Vec<f64>,
    support: DiscreteMeasure,
}

impl KantorovichOperator {
    pub fn diag_values(&self) -> &[f64] {
        &self.diag_values
    }

    pub fn support(&self) -> &DiscreteMeasure {
        &self.support
    }

    /// Dense matrix `sum f_i P_{V_i}`.
    pub fn matrix(&self) -> CMat {
        let n = self.support.dim();
        let mut acc = CMat::zeros(n, n);
        for (atom, &value) in self.support.atoms().iter().zip(&self.diag_values) {
            acc += atom.projection.matrix().map(|z| z * value);
        }
        acc
    }

    /// `tr(C M)` for an arbitrary operator.
    pub fn trace_against(&self, m: &CMat) -> f64 {
        (self.matrix() * m).diagonal().sum().re
    }

    /// `tr(C rho)` for a density.
    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        self.trace_against(rho.matrix())
    }
}

/// Represent potential values on the spectral atoms of `rho` as the
/// operator `f(rho)`, verifying `tr(C P) = tr(P) f(P)` on the support.
pub fn potential_operator(f: &[f64], rho: &DensityMatrix) -> Result<KantorovichOperator> {
    let support = spectral_measure(rho);
    if f.len() != support.len() {
        return Err(Error::SupportMismatch {
            expected: support.len(),
            got: f.len(),
        });
    }
    let op = KantorovichOperator {
        diag_values: f.to_vec(),
        support,
    };
    for (atom, &value) in op.support.atoms().iter().zip(&op.diag_values) {
        let lhs = op.trace_against(atom.projection.matrix());
        let rhs = atom.projection.rank() as f64 * value;
        if (lhs - rhs).abs() > 1e-9 * (1.0 + rhs.abs()) {
            return Err(Error::Validation {
                path: "potential operator".into(),
                reason: format!("tr(CP) = {lhs} but tr(P) f(P) = {rhs}"),
            });
        }
    }
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVec;
    use crate::spectral::Atom;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn line(v: Vec<Complex64>) -> Projection {
        Projection::line(&CVec::from_vec(v)).unwrap()
    }

    fn basis_pair_measure() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![
            Atom {
                weight: 0.5,
                projection: line(vec![c(1.0, 0.0), c(0.0, 0.0)]),
            },
            Atom {
                weight: 0.5,
                projection: line(vec![c(0.0, 0.0), c(1.0, 0.0)]),
            },
        ])
        .unwrap()
    }

    fn rotated_pair_measure() -> DiscreteMeasure {
        let r = 0.5f64.sqrt();
        DiscreteMeasure::new(vec![
            Atom {
                weight: 0.5,
                projection: line(vec![c(r, 0.0), c(r, 0.0)]),
            },
            Atom {
                weight: 0.5,
                projection: line(vec![c(r, 0.0), c(-r, 0.0)]),
            },
        ])
        .unwrap()
    }

    #[test]
    fn identical_measures_zero_cost() {
        let mu = basis_pair_measure();
        let (cost, plan) =
            wasserstein(&mu, &mu, 2.0, DistanceScale::Canonical).unwrap();
        assert!(cost.abs() < 1e-9);
        let plan = plan.unwrap();
        assert!(plan.mass(0, 0) > 0.49 && plan.mass(1, 1) > 0.49);
    }

    #[test]
    fn rotated_pair_ties_at_pi_over_4() {
        // all four pairwise distances are pi/4; any matching costs the same
        let mu0 = basis_pair_measure();
        let mu1 = rotated_pair_measure();
        let (cost, plan) =
            wasserstein(&mu0, &mu1, 2.0, DistanceScale::Canonical).unwrap();
        assert_abs_diff_eq!(cost, FRAC_PI_4, epsilon = 1e-10);
        assert!(plan.is_some());
    }

    #[test]
    fn rank_mismatch_is_infinite() {
        let mu0 = DiscreteMeasure::new(vec![Atom {
            weight: 1.0,
            projection: line(vec![c(1.0, 0.0), c(0.0, 0.0)]),
        }])
        .unwrap();
        let id2 = Projection::new(CMat::identity(2, 2)).unwrap();
        let mu1 = DiscreteMeasure::new(vec![Atom {
            weight: 0.5,
            projection: id2,
        }])
        .unwrap();
        let (cost, plan) =
            wasserstein(&mu0, &mu1, 2.0, DistanceScale::Canonical).unwrap();
        assert!(cost.is_infinite());
        assert!(plan.is_none());
    }

    #[test]
    fn unnormalized_rejected() {
        let mu0 = DiscreteMeasure::new(vec![Atom {
            weight: 0.25,
            projection: line(vec![c(1.0, 0.0), c(0.0, 0.0)]),
        }])
        .unwrap();
        let mu = basis_pair_measure();
        assert!(matches!(
            wasserstein(&mu0, &mu, 2.0, DistanceScale::Canonical),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn exponent_range_enforced() {
        let mu = basis_pair_measure();
        assert!(matches!(
            wasserstein(&mu, &mu, 0.5, DistanceScale::Canonical),
            Err(Error::BadExponent { .. })
        ));
        assert!(matches!(
            wasserstein(&mu, &mu, 17.0, DistanceScale::Canonical),
            Err(Error::BadExponent { .. })
        ));
    }

    #[test]
    fn dual_matches_primal_on_tied_instance() {
        let mu0 = basis_pair_measure();
        let mu1 = rotated_pair_measure();
        let p = 2.0;
        let (cost, _) = wasserstein(&mu0, &mu1, p, DistanceScale::Canonical).unwrap();
        let duals = dual_solve(&mu0, &mu1, p, DistanceScale::Canonical).unwrap();
        assert_abs_diff_eq!(duals.value(&mu0, &mu1), cost.powf(p), epsilon = 1e-10);
        assert!(duals.feasibility_defect(&mu0, &mu1, DistanceScale::Canonical) < 1e-10);
        // g equals the transform of f by construction
        let g = c_transform(&duals.f, &mu0, &mu1, p, DistanceScale::Canonical);
        for (a, b) in duals.g.iter().zip(&g) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn dual_identical_measures_admits_zero() {
        let mu = basis_pair_measure();
        let duals = dual_solve(&mu, &mu, 2.0, DistanceScale::Canonical).unwrap();
        assert!(duals.value(&mu, &mu).abs() < 1e-10);
    }

    #[test]
    fn dual_infeasible_when_cost_infinite() {
        let mu0 = DiscreteMeasure::new(vec![Atom {
            weight: 1.0,
            projection: line(vec![c(1.0, 0.0), c(0.0, 0.0)]),
        }])
        .unwrap();
        let id2 = Projection::new(CMat::identity(2, 2)).unwrap();
        let mu1 = DiscreteMeasure::new(vec![Atom {
            weight: 0.5,
            projection: id2,
        }])
        .unwrap();
        assert!(matches!(
            dual_solve(&mu0, &mu1, 2.0, DistanceScale::Canonical),
            Err(Error::Infeasible)
        ));
    }

    #[test]
    fn transform_single_source() {
        let p0 = line(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let mu0 = DiscreteMeasure::new(vec![Atom {
            weight: 1.0,
            projection: p0.clone(),
        }])
        .unwrap();
        let mu1 = basis_pair_measure();
        let f = vec![0.3];
        let g = c_transform(&f, &mu0, &mu1, 2.0, DistanceScale::Canonical);
        for (j, atom) in mu1.atoms().iter().enumerate() {
            let d = distance(&p0, &atom.projection, DistanceScale::Canonical);
            assert_abs_diff_eq!(g[j], 0.3 + d * d, epsilon = 1e-12);
        }
    }

    #[test]
    fn double_transform_contraction() {
        // for arbitrary f the double transform can only shrink it; for the
        // optimal potentials (c-convex) it reproduces f on the support
        let mu0 = basis_pair_measure();
        let mu1 = rotated_pair_measure();
        let p = 2.0;
        let f = vec![0.1, -0.2];
        let g = c_transform(&f, &mu0, &mu1, p, DistanceScale::Canonical);
        let back = c_transform_reverse(&g, &mu0, &mu1, p, DistanceScale::Canonical);
        for (orig, rec) in f.iter().zip(&back) {
            assert!(rec <= &(orig + 1e-12));
        }
        let duals = dual_solve(&mu0, &mu1, p, DistanceScale::Canonical).unwrap();
        let back = c_transform_reverse(&duals.g, &mu0, &mu1, p, DistanceScale::Canonical);
        for (orig, rec) in duals.f.iter().zip(&back) {
            assert_abs_diff_eq!(orig, rec, epsilon = 1e-10);
        }
    }

    #[test]
    fn monotone_diagonal_plan() {
        let mu = basis_pair_measure();
        let (_, plan) = wasserstein(&mu, &mu, 2.0, DistanceScale::Canonical).unwrap();
        assert!(is_cyclically_monotone(
            &plan.unwrap(),
            2.0,
            DistanceScale::Canonical,
            4
        ));
    }

    #[test]
    fn swapped_plan_fails_monotonicity() {
        // sources e1, e2; targets close to e1 and close to e2; the crossed
        // matching has strictly larger cost and must fail the cycle test
        let mu0 = basis_pair_measure();
        let tilt = 0.3f64;
        let mu1 = DiscreteMeasure::new(vec![
            Atom {
                weight: 0.5,
                projection: line(vec![c(tilt.cos(), 0.0), c(tilt.sin(), 0.0)]),
            },
            Atom {
                weight: 0.5,
                projection: line(vec![c(-tilt.sin(), 0.0), c(tilt.cos(), 0.0)]),
            },
        ])
        .unwrap();
        let crossed = TransportPlan::new(
            mu0.clone(),
            mu1.clone(),
            vec![0.0, 0.5, 0.5, 0.0],
        )
        .unwrap();
        assert!(!is_cyclically_monotone(
            &crossed,
            2.0,
            DistanceScale::Canonical,
            4
        ));
        let (_, optimal) = wasserstein(&mu0, &mu1, 2.0, DistanceScale::Canonical).unwrap();
        assert!(is_cyclically_monotone(
            &optimal.unwrap(),
            2.0,
            DistanceScale::Canonical,
            4
        ));
    }

    #[test]
    fn potential_operator_diagonal() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let op = potential_operator(&[2.0, -1.0], &rho).unwrap();
        assert_abs_diff_eq!(op.expectation(&rho), 0.7 * 2.0 - 0.3, epsilon = 1e-10);
        let zero = potential_operator(&[0.0, 0.0], &rho).unwrap();
        assert!(zero.expectation(&rho).abs() < 1e-12);
    }

    #[test]
    fn potential_operators_realize_dual_value() {
        // tr(C' rho_psi) - tr(C rho_phi) recovers the p-th power of the
        // distance when C, C' represent the optimal potentials
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
        let p = 2.0;
        let mu0 = spectral_measure(&phi);
        let mu1 = spectral_measure(&psi);
        let (value, _) = wasserstein(&mu0, &mu1, p, DistanceScale::Canonical).unwrap();
        let duals = dual_solve(&mu0, &mu1, p, DistanceScale::Canonical).unwrap();
        let c_src = potential_operator(&duals.f, &phi).unwrap();
        let c_tgt = potential_operator(&duals.g, &psi).unwrap();
        let dual_value = c_tgt.expectation(&psi) - c_src.expectation(&phi);
        assert_abs_diff_eq!(dual_value, value.powf(p), epsilon = 1e-8);
    }

    #[test]
    fn potential_operator_support_mismatch() {
        let rho = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        assert!(matches!(
            potential_operator(&[1.0], &rho),
            Err(Error::SupportMismatch { .. })
        ));
    }
}
