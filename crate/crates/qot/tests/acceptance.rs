//! Acceptance gate: every release criterion runs here at its stated
//! tolerance and instance count, printing one pass/fail line per criterion.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::time::Instant;

use qot::grassmann::{
    distance, four_point_check, geodesic_point, log_map, stiefel_geodesic_residual,
    DistanceScale, Projection, StiefelPoint,
};
use qot::linalg::{frob_norm, CMat, CVec};
use qot::sample::{
    gaussian_matrix, haar_unitary, random_density, random_projection, random_projection_pair,
    random_tensor_coeff, rng_from_seed,
};
use qot::spectral::{
    eigenvalue_l1_gap, integrate, spectral_measure, Atom, DensityMatrix, DiscreteMeasure,
};
use qot::state_cost::{
    convergence_experiment, rigidity_check, state_geodesic, transport_cost, triangle_check,
    wasserstein_distance, OptimizerBudget,
};
use qot::tensor::{correlation, correlation_identity_defect, pure_cost, TensorState};
use qot::transport::{dual_solve, is_cyclically_monotone, wasserstein};

const SCALE: DistanceScale = DistanceScale::Canonical;

struct Criterion {
    label: &'static str,
    passed: bool,
    detail: String,
}

fn report(list: &mut Vec<Criterion>, label: &'static str, passed: bool, detail: String) {
    println!(
        "{} {:60} {}",
        if passed { "PASS" } else { "FAIL" },
        label,
        detail
    );
    list.push(Criterion {
        label,
        passed,
        detail,
    });
}

fn e(n: usize, k: usize) -> CVec {
    CVec::from_fn(n, |i, _| {
        if i == k {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

#[test]
fn acceptance() {
    let mut results = Vec::new();

    criterion_1_degenerate_cost_benchmark(&mut results);
    criterion_2_wasserstein_infinity(&mut results);
    criterion_3_spectral_round_trip(&mut results);
    criterion_4_geodesic_equation(&mut results);
    criterion_5_exp_log_consistency(&mut results);
    criterion_6_strong_duality(&mut results);
    criterion_7_oracle_equivalence(&mut results);
    criterion_8_robinson_bound(&mut results);
    criterion_9_tensor_identities(&mut results);
    criterion_10_pure_cost_ordering(&mut results);
    criterion_11_alexandrov(&mut results);
    criterion_12_convergence_topology(&mut results);
    criterion_13_triangle_inequality(&mut results);
    criterion_14_rigidity(&mut results);

    let failed: Vec<&Criterion> = results.iter().filter(|c| !c.passed).collect();
    assert!(
        failed.is_empty(),
        "{} criteria failed: {:?}",
        failed.len(),
        failed
            .iter()
            .map(|c| format!("{}: {}", c.label, c.detail))
            .collect::<Vec<_>>()
    );
}

/// Cost of the maximally mixed qubit against a pure state matches the
/// one-parameter frame-angle grid oracle at pi/4.
fn criterion_1_degenerate_cost_benchmark(results: &mut Vec<Criterion>) {
    let start = Instant::now();
    let phi = DensityMatrix::maximally_mixed(2);
    let psi = DensityMatrix::pure(&e(2, 0)).unwrap();
    let p = 2.0;
    let found = transport_cost(&phi, &psi, p, SCALE, &OptimizerBudget::default())
        .unwrap()
        .value;

    // grid oracle: orthonormal frames of C^2 put the two lines at angles
    // theta and pi/2 - theta from e1, each carrying mass 1/2
    let step = 1e-4;
    let mut oracle = f64::INFINITY;
    let steps = (FRAC_PI_2 / step) as usize;
    for k in 0..=steps {
        let theta = k as f64 * step;
        oracle = oracle.min(0.5 * theta.powf(p) + 0.5 * (FRAC_PI_2 - theta).powf(p));
    }
    let oracle = oracle.powf(1.0 / p);
    let elapsed = start.elapsed().as_secs_f64();
    let gap = (found - oracle).abs();
    report(
        results,
        "1 degenerate-cost benchmark (pi/4 vs grid oracle)",
        gap <= 1e-4 && (oracle - FRAC_PI_4).abs() <= 1e-4 && elapsed < 5.0,
        format!("found {found:.9}, oracle {oracle:.9}, gap {gap:.2e}, {elapsed:.2}s"),
    );
}

/// The maximally mixed qubit and a pure state live in incompatible
/// components: the distance is exactly infinite.
fn criterion_2_wasserstein_infinity(results: &mut Vec<Criterion>) {
    let phi = DensityMatrix::maximally_mixed(2);
    let psi = DensityMatrix::pure(&e(2, 0)).unwrap();
    let (value, plan) = wasserstein_distance(&phi, &psi, 2.0, SCALE).unwrap();
    report(
        results,
        "2 wasserstein distance infinite across components",
        value == f64::INFINITY && plan.is_none(),
        format!("value {value}"),
    );
}

/// Integrating the spectral measure reproduces the density in trace norm.
fn criterion_3_spectral_round_trip(results: &mut Vec<Criterion>) {
    let start = Instant::now();
    let mut rng = rng_from_seed(100);
    let mut worst: f64 = 0.0;
    for i in 0..500 {
        let n = 1 + (i % 12);
        let rho = random_density(n, &mut rng);
        let back = integrate(&spectral_measure(&rho)).unwrap();
        worst = worst.max(rho.trace_distance(&back).unwrap());
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        results,
        "3 spectral round trip (500 densities, dims 1-12)",
        worst <= 1e-9 && elapsed < 10.0,
        format!("worst {worst:.2e}, {elapsed:.2}s"),
    );
}

/// Closed-form Stiefel curves satisfy the geodesic equation under central
/// differences.
fn criterion_4_geodesic_equation(results: &mut Vec<Criterion>) {
    let mut rng = rng_from_seed(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=6usize);
        let r = rng.random_range(1..=2usize.min(n - 1));
        let phi0 = StiefelPoint::new(random_projection(n, r, &mut rng).range_basis()).unwrap();
        let raw = gaussian_matrix(n, r, &mut rng);
        let herm =
            (phi0.matrix().adjoint() * &raw + raw.adjoint() * phi0.matrix()).map(|z| z * 0.5);
        let x = &raw - phi0.matrix() * herm;
        let t = rng.random_range(0.1..0.9);
        worst = worst.max(stiefel_geodesic_residual(&phi0, &x, t, 1e-4).unwrap());
    }
    report(
        results,
        "4 stiefel geodesic equation residual (100 instances)",
        worst <= 1e-5,
        format!("worst residual {worst:.2e}"),
    );
}

/// The exponential of the log map recovers the target projection.
fn criterion_5_exp_log_consistency(results: &mut Vec<Criterion>) {
    let mut rng = rng_from_seed(102);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.random_range(2..=8usize);
        let r = rng.random_range(1..=3usize.min(n - 1));
        let (p, q) = random_projection_pair(n, r, FRAC_PI_2 - 0.1, &mut rng);
        let z = log_map(&p, &q).unwrap();
        let back = geodesic_point(&p, &z, 1.0).unwrap();
        worst = worst.max(frob_norm(&(back.matrix() - q.matrix())));
    }
    report(
        results,
        "5 exp/log consistency (500 same-rank pairs)",
        worst <= 1e-8,
        format!("worst defect {worst:.2e}"),
    );
}

/// Random mixed-rank measures with matched per-rank masses.
fn random_measure_pair(rng: &mut ChaChaRng) -> (DiscreteMeasure, DiscreteMeasure) {
    let n = 6;
    let use_rank2 = rng.random_bool(0.5);
    let rank2_mass = if use_rank2 {
        rng.random_range(0.2..0.6f64)
    } else {
        0.0
    };
    let rank1_mass = 1.0 - rank2_mass;
    let side = |rng: &mut ChaChaRng| -> DiscreteMeasure {
        let mut atoms = Vec::new();
        if rank2_mass > 0.0 {
            let count = rng.random_range(1..=2usize);
            let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            for w in raw {
                atoms.push(Atom {
                    weight: w / total * rank2_mass / 2.0,
                    projection: random_projection(n, 2, rng),
                });
            }
        }
        let count = rng.random_range(2..=6usize);
        let raw: Vec<f64> = (0..count).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        for w in raw {
            atoms.push(Atom {
                weight: w / total * rank1_mass,
                projection: random_projection(n, 1, rng),
            });
        }
        DiscreteMeasure::new(atoms).unwrap()
    };
    (side(rng), side(rng))
}

type ChaChaRng = rand_chacha::ChaCha8Rng;

/// Exact duality on random discrete instances: zero gap, complementary
/// slackness, and cyclically monotone optimal plans.
fn criterion_6_strong_duality(results: &mut Vec<Criterion>) {
    let mut rng = rng_from_seed(103);
    let p = 2.0;
    let mut worst_gap: f64 = 0.0;
    let mut worst_slack: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..200 {
        let (mu0, mu1) = random_measure_pair(&mut rng);
        let (value, plan) = wasserstein(&mu0, &mu1, p, SCALE).unwrap();
        assert!(value.is_finite(), "matched masses give finite cost");
        let plan = plan.unwrap();
        let duals = dual_solve(&mu0, &mu1, p, SCALE).unwrap();
        worst_gap = worst_gap.max((duals.value(&mu0, &mu1) - value.powf(p)).abs());
        for (i, j) in plan.support() {
            let d = distance(
                &mu0.atoms()[i].projection,
                &mu1.atoms()[j].projection,
                SCALE,
            );
            worst_slack = worst_slack.max((duals.g[j] - duals.f[i] - d.powf(p)).abs());
        }
        monotone &= is_cyclically_monotone(&plan, p, SCALE, 4);
    }
    report(
        results,
        "6 strong duality + slackness + monotonicity (200 instances)",
        worst_gap <= 1e-8 && worst_slack <= 1e-8 && monotone,
        format!("gap {worst_gap:.2e}, slack {worst_slack:.2e}, monotone {monotone}"),
    );
}

/// On equal-mass instances the solver matches exhaustive permutation
/// enumeration.
fn criterion_7_oracle_equivalence(results: &mut Vec<Criterion>) {
    let mut rng = rng_from_seed(104);
    let p = 2.0;
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.random_range(2..=5usize);
        let n = k + 1;
        let atoms = |rng: &mut ChaChaRng| {
            DiscreteMeasure::new(
                (0..k)
                    .map(|_| Atom {
                        weight: 1.0 / k as f64,
                        projection: random_projection(n, 1, rng),
                    })
                    .collect(),
            )
            .unwrap()
        };
        let mu0 = atoms(&mut rng);
        let mu1 = atoms(&mut rng);
        let (value, _) = wasserstein(&mu0, &mu1, p, SCALE).unwrap();

        let mut best = f64::INFINITY;
        let mut perm: Vec<usize> = (0..k).collect();
        permute(&mut perm, 0, &mut |assignment| {
            let total: f64 = assignment
                .iter()
                .enumerate()
                .map(|(i, &j)| {
                    distance(
                        &mu0.atoms()[i].projection,
                        &mu1.atoms()[j].projection,
                        SCALE,
                    )
                    .powf(p)
                        / k as f64
                })
                .sum();
            best = best.min(total);
        });
        worst = worst.max((value.powf(p) - best).abs());
    }
    report(
        results,
        "7 solver equals permutation enumeration (200 instances)",
        worst <= 1e-10,
        format!("worst gap {worst:.2e}"),
    );
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

/// The l1 gap of sorted spectra is bounded by the trace norm.
fn criterion_8_robinson_bound(results: &mut Vec<Criterion>) {
    let mut rng = rng_from_seed(105);
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..500 {
        let n = 1 + (i % 10);
        let a = random_density(n, &mut rng);
        let b = random_density(n, &mut rng);
        let gap = eigenvalue_l1_gap(&a, &b).unwrap();
        let norm = a.trace_distance(&b).unwrap();
        worst = worst.max(gap - norm);
    }
    report(
        results,
        "8 eigenvalue l1 gap below trace norm (500 pairs)",
        worst <= 1e-9,
        format!("worst excess {worst:.2e}"),
    );
}

/// The structural identities tying a tensor state to its marginals and
/// correlation operator.
fn criterion_9_tensor_identities(results: &mut Vec<Criterion>) {
    let mut rng = rng_from_seed(106);
    let mut worst: f64 = 0.0;
    for i in 0..500 {
        let n = 2 + (i % 7);
        let zeta = TensorState::new(random_tensor_coeff(n, &mut rng)).unwrap();
        worst = worst.max(correlation_identity_defect(&zeta).unwrap());
    }
    report(
        results,
        "9 tensor correlation identities (500 states, n <= 8)",
        worst <= 1e-9,
        format!("worst defect {worst:.2e}"),
    );
}

/// The pure-state cost dominates the cost of its marginals, and vanishes
/// for the maximally entangled state.
fn criterion_10_pure_cost_ordering(results: &mut Vec<Criterion>) {
    let mut rng = rng_from_seed(107);
    let p = 2.0;
    let budget = OptimizerBudget::default();
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..200 {
        let n = 2 + (i % 3);
        let zeta = TensorState::new(random_tensor_coeff(n, &mut rng)).unwrap();
        let data = correlation(&zeta).unwrap();
        let pure = pure_cost(&zeta, p, SCALE, &budget).unwrap();
        let marginal = transport_cost(&data.rho1, &data.rho2, p, SCALE, &budget).unwrap();
        worst = worst.max(marginal.value - pure.value);
    }
    let bell = TensorState::maximally_entangled(4);
    let bell_cost = pure_cost(&bell, p, SCALE, &budget).unwrap().value;
    report(
        results,
        "10 pure-cost ordering (200 states) + entangled zero",
        worst <= 1e-6 && bell_cost <= 1e-6,
        format!("worst excess {worst:.2e}, entangled cost {bell_cost:.2e}"),
    );
}

/// Alexandrov four-point comparison on random quadruples.
fn criterion_11_alexandrov(results: &mut Vec<Criterion>) {
    let mut rng = rng_from_seed(108);
    let mut ok = true;
    for _ in 0..1000 {
        let quad: Vec<Projection> = (0..4).map(|_| random_projection(3, 1, &mut rng)).collect();
        ok &= four_point_check(&quad[0], &quad[1], &quad[2], &quad[3], SCALE).unwrap();
        let quad: Vec<Projection> = (0..4).map(|_| random_projection(5, 2, &mut rng)).collect();
        ok &= four_point_check(&quad[0], &quad[1], &quad[2], &quad[3], SCALE).unwrap();
    }
    report(
        results,
        "11 alexandrov four-point inequality (1000 + 1000 quadruples)",
        ok,
        String::from(if ok { "no violations" } else { "violated" }),
    );
}

/// Cost convergence along both fixture families, the degenerate one keeping
/// the distance infinite throughout.
fn criterion_12_convergence_topology(results: &mut Vec<Criterion>) {
    let p = 2.0;
    let budget = OptimizerBudget::default();
    let delta = CMat::from_fn(2, 2, |i, j| {
        if i == j {
            Complex64::new(if i == 0 { 0.002 } else { -0.002 }, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let nondegenerate = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
    let rows_a =
        convergence_experiment(&nondegenerate, &delta, 128, p, SCALE, &budget).unwrap();
    let degenerate = DensityMatrix::maximally_mixed(2);
    let rows_b = convergence_experiment(&degenerate, &delta, 128, p, SCALE, &budget).unwrap();

    let tail_ok = |rows: &[qot::state_cost::ConvergenceRow]| {
        rows.iter().filter(|r| r.n >= 64).all(|r| r.cost <= 1e-2)
    };
    let pass = tail_ok(&rows_a)
        && tail_ok(&rows_b)
        && rows_a.iter().all(|r| r.wasserstein_finite)
        && rows_b.iter().all(|r| !r.wasserstein_finite);
    let detail = format!(
        "nondegenerate tail {:.2e}, degenerate tail {:.2e} (distance infinite: {})",
        rows_a.last().unwrap().cost,
        rows_b.last().unwrap().cost,
        rows_b.iter().all(|r| !r.wasserstein_finite),
    );
    report(results, "12 convergence topology (two families)", pass, detail);
}

/// The triangle inequality for the state distance on finite triples.
fn criterion_13_triangle_inequality(results: &mut Vec<Criterion>) {
    let mut rng = rng_from_seed(109);
    let p = 2.0;
    let mut ok = true;
    for i in 0..200 {
        let n = 2 + (i % 4);
        let a = random_density(n, &mut rng);
        let b = random_density(n, &mut rng);
        let c = random_density(n, &mut rng);
        ok &= triangle_check(&a, &b, &c, p, SCALE).unwrap();
    }
    report(
        results,
        "13 triangle inequality (200 finite triples)",
        ok,
        String::from(if ok { "no violations" } else { "violated" }),
    );
}

/// Unitarily conjugated states are detected as rigid: the plan is a
/// bijection and the constructed unitary intertwines the densities.
fn criterion_14_rigidity(results: &mut Vec<Criterion>) {
    let mut rng = rng_from_seed(110);
    let p = 2.0;
    let budget = OptimizerBudget::default();
    let mut worst: f64 = 0.0;
    let mut all_bijective = true;
    let mut tested = 0;
    while tested < 50 {
        let n = rng.random_range(2..=5usize);
        let phi = random_density(n, &mut rng);
        let v = haar_unitary(n, &mut rng);
        let psi = DensityMatrix::new(&v * phi.matrix() * v.adjoint()).unwrap();
        let cost = transport_cost(&phi, &psi, p, SCALE, &budget).unwrap();
        let path = match state_geodesic(&cost.plan, &[0.0, 0.5, 1.0]) {
            Ok(path) => path,
            // a conjugated eigenline can land at the cut locus; such draws
            // carry no rigidity content for the constructed-u check
            Err(qot::Error::CutLocus { .. }) => continue,
            Err(e) => panic!("unexpected error: {e}"),
        };
        if !path.all_orthogonal() {
            continue;
        }
        tested += 1;
        let diagnosis = rigidity_check(&cost.plan, &path).unwrap();
        all_bijective &= diagnosis.bijective;
        if let Some(err) = diagnosis.conjugation_error {
            worst = worst.max(err);
        }
    }
    report(
        results,
        "14 rigidity of unitarily conjugated states (50 instances)",
        all_bijective && worst <= 1e-8,
        format!("bijective {all_bijective}, worst conjugation error {worst:.2e}"),
    );
}
