//! Self-contained check suites over bundled fixtures and seeded random
//! instances. Each check yields one pass/fail line; the full battery backs
//! `qot check --suite all`.

use qot::grassmann::{
    self, distance, four_point_check, geodesic_point, log_map, stiefel_geodesic_residual,
    DistanceScale, StiefelPoint,
};
use qot::linalg::{matrix_from_json, MatrixJson};
use qot::sample::{
    gaussian_matrix, random_density, random_projection, random_projection_pair, random_tangent,
    random_tensor_coeff, rng_from_seed,
};
use qot::spectral::{
    eigenvalue_l1_gap, integrate, rank_one_representation, spectral_measure, DensityMatrix,
};
use qot::state_cost::{
    convergence_experiment, state_geodesic, transport_cost, triangle_check, rigidity_check,
    wasserstein_distance, OptimizerBudget,
};
use qot::tensor::{correlation, correlation_identity_defect, pure_cost, TensorState};
use qot::transport::{dual_solve, is_cyclically_monotone, wasserstein};
use qot::{DiscreteMeasure, Projection};
use rand::Rng;

use crate::report::Check;

const HALF_IDENTITY_2: &str = include_str!("../fixtures/density_half_identity_2.json");
const PURE_E1_2: &str = include_str!("../fixtures/density_pure_e1_2.json");
const DIAG_07_03: &str = include_str!("../fixtures/density_diag_07_03.json");
const DIAG_06_04: &str = include_str!("../fixtures/density_diag_06_04.json");
const DELTA_2: &str = include_str!("../fixtures/perturbation_diag_2.json");

fn fixture_density(text: &str) -> Result<DensityMatrix, String> {
    let json: MatrixJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let mat = matrix_from_json(&json).map_err(|e| e.to_string())?;
    DensityMatrix::new(mat).map_err(|e| e.to_string())
}

fn fixture_matrix(text: &str) -> Result<qot::linalg::CMat, String> {
    let json: MatrixJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
    matrix_from_json(&json).map_err(|e| e.to_string())
}

pub fn run_suite(
    suite: &str,
    seed: u64,
    scale: DistanceScale,
) -> Result<Vec<Check>, String> {
    let mut checks = Vec::new();
    let all = suite == "all";
    if all || suite == "spectral" {
        spectral_suite(seed, &mut checks)?;
    }
    if all || suite == "geodesy" {
        geodesy_suite(seed, scale, &mut checks)?;
    }
    if all || suite == "transport" {
        transport_suite(seed, scale, &mut checks)?;
    }
    if all || suite == "states" {
        states_suite(seed, scale, &mut checks)?;
    }
    if all || suite == "tensor" {
        tensor_suite(seed, scale, &mut checks)?;
    }
    if checks.is_empty() {
        return Err(format!(
            "unknown suite '{suite}' (expected all, spectral, geodesy, transport, states, tensor)"
        ));
    }
    Ok(checks)
}

fn spectral_suite(seed: u64, checks: &mut Vec<Check>) -> Result<(), String> {
    let mut rng = rng_from_seed(seed);
    let mut round_trip: f64 = 0.0;
    let mut robinson: f64 = f64::NEG_INFINITY;
    for _ in 0..60 {
        let n = rng.random_range(1..=6usize);
        let rho = random_density(n, &mut rng);
        let back = integrate(&spectral_measure(&rho)).map_err(|e| e.to_string())?;
        round_trip = round_trip.max(rho.trace_distance(&back).map_err(|e| e.to_string())?);

        let sigma = random_density(n, &mut rng);
        let gap = eigenvalue_l1_gap(&rho, &sigma).map_err(|e| e.to_string())?;
        let norm = rho.trace_distance(&sigma).map_err(|e| e.to_string())?;
        robinson = robinson.max(gap - norm);
    }
    checks.push(Check::bound("spectral_round_trip", round_trip, 1e-9));
    checks.push(Check::bound("eigenvalue_gap_vs_trace_norm", robinson, 1e-9));

    let mut representation: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(2..=5usize);
        let rho = random_density(n, &mut rng);
        let mu = rank_one_representation(&rho).map_err(|e| e.to_string())?;
        let back = integrate(&mu).map_err(|e| e.to_string())?;
        representation =
            representation.max(rho.trace_distance(&back).map_err(|e| e.to_string())?);
    }
    checks.push(Check::bound(
        "rank_one_representation_integrates",
        representation,
        1e-9,
    ));
    Ok(())
}

fn geodesy_suite(
    seed: u64,
    scale: DistanceScale,
    checks: &mut Vec<Check>,
) -> Result<(), String> {
    let mut rng = rng_from_seed(seed.wrapping_add(1));
    let mut round_trip: f64 = 0.0;
    let mut midpoint: f64 = 0.0;
    for _ in 0..60 {
        let n = rng.random_range(2..=6usize);
        let r = rng.random_range(1..=2usize.min(n - 1));
        let (p, q) = random_projection_pair(n, r, std::f64::consts::FRAC_PI_2 - 0.1, &mut rng);
        let z = log_map(&p, &q).map_err(|e| e.to_string())?;
        let back = geodesic_point(&p, &z, 1.0).map_err(|e| e.to_string())?;
        round_trip = round_trip.max(qot::linalg::frob_norm(&(back.matrix() - q.matrix())));
        let half = geodesic_point(&p, &z, 0.5).map_err(|e| e.to_string())?;
        let total = distance(&p, &q, scale);
        midpoint = midpoint
            .max((distance(&p, &half, scale) - total / 2.0).abs())
            .max((distance(&half, &q, scale) - total / 2.0).abs());
    }
    checks.push(Check::bound("exp_log_round_trip", round_trip, 6.0 * 1e-8));
    checks.push(Check::bound("geodesic_midpoint", midpoint, 1e-8));

    let mut four_point_ok = true;
    for _ in 0..60 {
        let quad: Vec<Projection> = (0..4).map(|_| random_projection(3, 1, &mut rng)).collect();
        four_point_ok &= four_point_check(&quad[0], &quad[1], &quad[2], &quad[3], scale)
            .map_err(|e| e.to_string())?;
        let quad: Vec<Projection> = (0..4).map(|_| random_projection(5, 2, &mut rng)).collect();
        four_point_ok &= four_point_check(&quad[0], &quad[1], &quad[2], &quad[3], scale)
            .map_err(|e| e.to_string())?;
    }
    checks.push(Check::flag("alexandrov_four_point", four_point_ok));

    let mut residual: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(2..=6usize);
        let r = rng.random_range(1..=2usize.min(n - 1));
        let phi0 = StiefelPoint::new(
            random_projection(n, r, &mut rng).range_basis(),
        )
        .map_err(|e| e.to_string())?;
        // tangent: remove the Hermitian part of phi0* X
        let raw = gaussian_matrix(n, r, &mut rng);
        let herm = (phi0.matrix().adjoint() * &raw + raw.adjoint() * phi0.matrix())
            .map(|z| z * 0.5);
        let x = &raw - phi0.matrix() * herm;
        let t = rng.random_range(0.1..0.9);
        residual = residual.max(
            stiefel_geodesic_residual(&phi0, &x, t, 1e-4).map_err(|e| e.to_string())?,
        );
    }
    checks.push(Check::bound("stiefel_geodesic_equation", residual, 1e-5));

    let mut transported_ok = true;
    for _ in 0..20 {
        let p = random_projection(4, 2, &mut rng);
        let q_basis = p.range_basis().columns(0, 1).into_owned();
        let q = Projection::new(&q_basis * q_basis.adjoint()).map_err(|e| e.to_string())?;
        let z = random_tangent(&p, &mut rng);
        let (_, dq, dp) =
            grassmann::subprojection_transport(&p, &q, &z, scale).map_err(|e| e.to_string())?;
        transported_ok &= dq <= dp + 1e-9;
    }
    checks.push(Check::flag("subprojection_contraction", transported_ok));
    Ok(())
}

fn transport_suite(
    seed: u64,
    scale: DistanceScale,
    checks: &mut Vec<Check>,
) -> Result<(), String> {
    let mut rng = rng_from_seed(seed.wrapping_add(2));
    // exact solver against permutation enumeration on equal-mass atoms
    let mut oracle_gap: f64 = 0.0;
    for _ in 0..40 {
        let k = rng.random_range(2..=5usize);
        let mu0 = equal_mass_lines(k, &mut rng)?;
        let mu1 = equal_mass_lines(k, &mut rng)?;
        let p = 2.0;
        let (value, _) = wasserstein(&mu0, &mu1, p, scale).map_err(|e| e.to_string())?;
        let best = permutation_minimum(&mu0, &mu1, p, scale);
        oracle_gap = oracle_gap.max((value.powf(p) - best).abs());
    }
    checks.push(Check::bound("lp_equals_enumeration", oracle_gap, 1e-10));

    let mut gap: f64 = 0.0;
    let mut slack: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..40 {
        let n = rng.random_range(2..=4usize);
        let rho0 = random_density(n, &mut rng);
        let rho1 = random_density(n, &mut rng);
        let mu0 = spectral_measure(&rho0);
        let mu1 = spectral_measure(&rho1);
        let p = 2.0;
        let (value, plan) = wasserstein(&mu0, &mu1, p, scale).map_err(|e| e.to_string())?;
        if !value.is_finite() {
            continue;
        }
        let plan = plan.expect("finite cost");
        let duals = dual_solve(&mu0, &mu1, p, scale).map_err(|e| e.to_string())?;
        gap = gap.max((duals.value(&mu0, &mu1) - value.powf(p)).abs());
        for (i, j) in plan.support() {
            let d = distance(
                &mu0.atoms()[i].projection,
                &mu1.atoms()[j].projection,
                scale,
            );
            slack = slack.max((duals.g[j] - duals.f[i] - d.powf(p)).abs());
        }
        monotone &= is_cyclically_monotone(&plan, p, scale, 4);
    }
    checks.push(Check::bound("strong_duality_gap", gap, 1e-8));
    checks.push(Check::bound("complementary_slackness", slack, 1e-8));
    checks.push(Check::flag("optimal_plans_cyclically_monotone", monotone));
    Ok(())
}

fn states_suite(
    seed: u64,
    scale: DistanceScale,
    checks: &mut Vec<Check>,
) -> Result<(), String> {
    let budget = OptimizerBudget {
        seed,
        ..OptimizerBudget::default()
    };
    let half = fixture_density(HALF_IDENTITY_2)?;
    let pure = fixture_density(PURE_E1_2)?;

    // cost benchmark against the analytic one-parameter frame oracle
    let p = 2.0;
    let result = transport_cost(&half, &pure, p, scale, &budget).map_err(|e| e.to_string())?;
    let mut oracle = f64::INFINITY;
    let steps = (std::f64::consts::FRAC_PI_2 / 1e-4) as usize;
    for k in 0..=steps {
        let theta = k as f64 * 1e-4;
        let a = scale.factor() * theta;
        let b = scale.factor() * (std::f64::consts::FRAC_PI_2 - theta);
        oracle = oracle.min(0.5 * a.powf(p) + 0.5 * b.powf(p));
    }
    let oracle = oracle.powf(1.0 / p);
    checks.push(Check::bound(
        "degenerate_cost_benchmark",
        (result.value - oracle).abs(),
        1e-4,
    ));

    let (wp, _) = wasserstein_distance(&half, &pure, p, scale).map_err(|e| e.to_string())?;
    checks.push(Check::flag("wasserstein_infinite_across_profiles", wp.is_infinite()));

    // triangle inequality on generic triples (simple spectra match profiles)
    let mut rng = rng_from_seed(seed.wrapping_add(3));
    let mut triangle_ok = true;
    for _ in 0..20 {
        let n = rng.random_range(2..=4usize);
        let a = random_density(n, &mut rng);
        let b = random_density(n, &mut rng);
        let c = random_density(n, &mut rng);
        triangle_ok &= triangle_check(&a, &b, &c, p, scale).map_err(|e| e.to_string())?;
    }
    checks.push(Check::flag("wasserstein_triangle", triangle_ok));

    // rigidity: unitarily conjugated states admit an intertwining unitary
    let mut rigidity_worst: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(2..=4usize);
        let phi = random_density(n, &mut rng);
        let u = qot::sample::haar_unitary(n, &mut rng);
        let psi = DensityMatrix::new(&u * phi.matrix() * u.adjoint())
            .map_err(|e| e.to_string())?;
        let cost = transport_cost(&phi, &psi, p, scale, &budget).map_err(|e| e.to_string())?;
        let path = match state_geodesic(&cost.plan, &[0.0, 0.5, 1.0]) {
            Ok(path) => path,
            Err(qot::Error::CutLocus { .. }) => continue,
            Err(e) => return Err(e.to_string()),
        };
        if !path.all_orthogonal() {
            continue;
        }
        let diagnosis = rigidity_check(&cost.plan, &path).map_err(|e| e.to_string())?;
        if let Some(err) = diagnosis.conjugation_error {
            rigidity_worst = rigidity_worst.max(err);
        }
    }
    checks.push(Check::bound("rigidity_conjugation", rigidity_worst, 1e-8));

    // convergence fixtures: cost vanishes; the degenerate family keeps the
    // distance infinite at every step
    let delta = fixture_matrix(DELTA_2)?;
    let rows = convergence_experiment(
        &fixture_density(DIAG_07_03)?,
        &delta,
        64,
        p,
        scale,
        &budget,
    )
    .map_err(|e| e.to_string())?;
    checks.push(Check::bound(
        "convergence_nondegenerate",
        rows.last().map(|r| r.cost).unwrap_or(f64::INFINITY),
        1e-2,
    ));
    let rows = convergence_experiment(&half, &delta, 64, p, scale, &budget)
        .map_err(|e| e.to_string())?;
    checks.push(Check::bound(
        "convergence_degenerate_limit",
        rows.last().map(|r| r.cost).unwrap_or(f64::INFINITY),
        1e-2,
    ));
    checks.push(Check::flag(
        "degenerate_limit_distance_stays_infinite",
        rows.iter().all(|r| !r.wasserstein_finite),
    ));

    // the two fixtures with matching profiles have a finite distance
    let (finite, _) = wasserstein_distance(
        &fixture_density(DIAG_07_03)?,
        &fixture_density(DIAG_06_04)?,
        p,
        scale,
    )
    .map_err(|e| e.to_string())?;
    checks.push(Check::flag("fixture_pair_finite", finite.is_finite()));
    Ok(())
}

fn tensor_suite(
    seed: u64,
    scale: DistanceScale,
    checks: &mut Vec<Check>,
) -> Result<(), String> {
    let mut rng = rng_from_seed(seed.wrapping_add(4));
    let mut identity: f64 = 0.0;
    for _ in 0..40 {
        let n = rng.random_range(2..=5usize);
        let zeta = TensorState::new(random_tensor_coeff(n, &mut rng))
            .map_err(|e| e.to_string())?;
        identity = identity.max(correlation_identity_defect(&zeta).map_err(|e| e.to_string())?);
    }
    checks.push(Check::bound("correlation_identities", identity, 1e-9));

    let budget = OptimizerBudget {
        seed,
        ..OptimizerBudget::default()
    };
    let p = 2.0;
    let bell = TensorState::maximally_entangled(2);
    let bell_cost = pure_cost(&bell, p, scale, &budget).map_err(|e| e.to_string())?;
    checks.push(Check::bound("maximally_entangled_cost", bell_cost.value, 1e-6));

    let mut ordering_worst: f64 = f64::NEG_INFINITY;
    for _ in 0..15 {
        let n = rng.random_range(2..=3usize);
        let zeta = TensorState::new(random_tensor_coeff(n, &mut rng))
            .map_err(|e| e.to_string())?;
        let data = correlation(&zeta).map_err(|e| e.to_string())?;
        let pure = pure_cost(&zeta, p, scale, &budget).map_err(|e| e.to_string())?;
        let marginal = transport_cost(&data.rho1, &data.rho2, p, scale, &budget)
            .map_err(|e| e.to_string())?;
        ordering_worst = ordering_worst.max(marginal.value - pure.value);
    }
    checks.push(Check::bound(
        "marginal_cost_below_pure_cost",
        ordering_worst,
        1e-6,
    ));
    Ok(())
}

fn equal_mass_lines(
    k: usize,
    rng: &mut impl Rng,
) -> Result<DiscreteMeasure, String> {
    let mut atoms = Vec::with_capacity(k);
    // orthonormal lines from a Haar frame keep the atoms distinct
    let frame = qot::sample::haar_unitary(k.max(2) + 1, rng);
    for i in 0..k {
        atoms.push(qot::spectral::Atom {
            weight: 1.0 / k as f64,
            projection: Projection::line(&frame.column(i).into())
                .map_err(|e| e.to_string())?,
        });
    }
    DiscreteMeasure::new(atoms).map_err(|e| e.to_string())
}

fn permutation_minimum(
    mu0: &DiscreteMeasure,
    mu1: &DiscreteMeasure,
    p: f64,
    scale: DistanceScale,
) -> f64 {
    let k = mu0.len();
    let mass = 1.0 / k as f64;
    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (0..k).collect();
    permute(&mut perm, 0, &mut |assignment| {
        let total: f64 = assignment
            .iter()
            .enumerate()
            .map(|(i, &j)| {
                mass * distance(
                    &mu0.atoms()[i].projection,
                    &mu1.atoms()[j].projection,
                    scale,
                )
                .powf(p)
            })
            .sum();
        best = best.min(total);
    });
    best
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}
