//! Subcommand handlers: load inputs, run the library, assemble the report.

use serde_json::{json, Value};
use std::path::PathBuf;

use qot::grassmann::{distance, principal_angles, DistanceScale};
use qot::spectral::{integrate, orthogonality_defect, spectral_measure};
use qot::state_cost::{state_geodesic, transport_cost, wasserstein_distance, OptimizerBudget};
use qot::tensor::{correlation, correlation_identity_defect, pure_cost, tensor_plan};
use qot::transport::{dual_solve, is_cyclically_monotone, wasserstein, TransportPlan};
use qot::linalg::matrix_to_json;

use crate::inputs::{self, LoadError};
use crate::report::{ext_real, Check, Report};

pub struct Settings {
    pub p: f64,
    pub scale: DistanceScale,
    pub seed: u64,
    pub restarts: usize,
    pub grid: usize,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

impl Settings {
    pub fn budget(&self) -> OptimizerBudget {
        OptimizerBudget {
            restarts: self.restarts,
            seed: self.seed,
            ..OptimizerBudget::default()
        }
    }

    pub fn config_echo(&self, inputs: &[&PathBuf]) -> Value {
        json!({
            "p": self.p,
            "scale": scale_name(self.scale),
            "seed": self.seed,
            "restarts": self.restarts,
            "grid": self.grid,
            "tol": self.tol,
            "inputs": inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        })
    }

    pub fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

pub fn scale_name(scale: DistanceScale) -> &'static str {
    match scale {
        DistanceScale::Canonical => "canonical",
        DistanceScale::Embedded => "embedded",
    }
}

fn lib_error(e: qot::Error) -> LoadError {
    LoadError::Validate("computation".into(), e.to_string())
}

fn measure_value(mu: &qot::DiscreteMeasure) -> Value {
    serde_json::to_value(mu.to_json()).expect("measure json")
}

fn plan_value(plan: &TransportPlan) -> Value {
    serde_json::to_value(plan.to_json()).expect("plan json")
}

fn plan_checks(
    plan: &TransportPlan,
    p: f64,
    scale: DistanceScale,
    checks: &mut Vec<Check>,
) {
    checks.push(Check::bound(
        "plan_marginal_defect",
        plan.marginal_defect(),
        1e-9,
    ));
    checks.push(Check::flag(
        "plan_cyclically_monotone",
        is_cyclically_monotone(plan, p, scale, 4),
    ));
}

pub fn run_dist(a: &PathBuf, b: &PathBuf, settings: &Settings) -> Result<Report, LoadError> {
    let pa = inputs::load_projection(a)?;
    let pb = inputs::load_projection(b)?;
    let d_ab = distance(&pa, &pb, settings.scale);
    let d_ba = distance(&pb, &pa, settings.scale);
    let angles = if pa.rank() == pb.rank() {
        Some(principal_angles(&pa, &pb).map_err(lib_error)?)
    } else {
        None
    };
    let result = json!({
        "distance": ext_real(d_ab),
        "principal_angles": angles,
        "rank_a": pa.rank(),
        "rank_b": pb.rank(),
    });
    let checks = vec![Check::flag(
        "distance_symmetric",
        d_ab == d_ba || (d_ab.is_infinite() && d_ba.is_infinite()),
    )];
    Ok(Report::new(
        "dist",
        settings.config_echo(&[a, b]),
        result,
        checks,
    ))
}

pub fn run_wp(a: &PathBuf, b: &PathBuf, settings: &Settings) -> Result<Report, LoadError> {
    let phi = inputs::load_density(a)?;
    let psi = inputs::load_density(b)?;
    let (value, plan) =
        wasserstein_distance(&phi, &psi, settings.p, settings.scale).map_err(lib_error)?;
    let mut checks = Vec::new();
    let mut result = json!({
        "value": ext_real(value),
        "source_measure": measure_value(&spectral_measure(&phi)),
        "target_measure": measure_value(&spectral_measure(&psi)),
        "plan": Value::Null,
    });
    if let Some(plan) = &plan {
        result["plan"] = plan_value(plan);
        plan_checks(plan, settings.p, settings.scale, &mut checks);
        let mu0 = spectral_measure(&phi);
        let mu1 = spectral_measure(&psi);
        let duals = dual_solve(&mu0, &mu1, settings.p, settings.scale).map_err(lib_error)?;
        let gap = (duals.value(&mu0, &mu1) - value.powf(settings.p)).abs();
        checks.push(Check::bound("duality_gap", gap, settings.tol_or(1e-8)));
    } else {
        checks.push(Check::flag("infinite_cost_has_no_plan", value.is_infinite()));
    }
    Ok(Report::new(
        "wp",
        settings.config_echo(&[a, b]),
        result,
        checks,
    ))
}

pub fn run_cost(a: &PathBuf, b: &PathBuf, settings: &Settings) -> Result<Report, LoadError> {
    let phi = inputs::load_density(a)?;
    let psi = inputs::load_density(b)?;
    let budget = settings.budget();
    let cost = transport_cost(&phi, &psi, settings.p, settings.scale, &budget)
        .map_err(lib_error)?;
    let mut checks = Vec::new();
    let defect0 = integrate(&cost.mu0)
        .and_then(|rho| rho.trace_distance(&phi))
        .map_err(lib_error)?;
    let defect1 = integrate(&cost.mu1)
        .and_then(|rho| rho.trace_distance(&psi))
        .map_err(lib_error)?;
    checks.push(Check::bound("representation_defect_source", defect0, 1e-9));
    checks.push(Check::bound("representation_defect_target", defect1, 1e-9));
    checks.push(Check::bound(
        "orthogonality_defect_source",
        orthogonality_defect(&cost.mu0),
        1e-9,
    ));
    checks.push(Check::bound(
        "orthogonality_defect_target",
        orthogonality_defect(&cost.mu1),
        1e-9,
    ));
    let bound = settings.scale.factor() * std::f64::consts::FRAC_PI_2;
    checks.push(Check::bound("cost_within_diameter", cost.value, bound + 1e-9));
    let monotone = cost
        .objective_trace
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12);
    checks.push(Check::flag("objective_monotone", monotone));
    let plan_cost = cost.plan.cost_power(settings.p, settings.scale);
    checks.push(Check::bound(
        "plan_cost_consistency",
        (plan_cost - cost.value.powf(settings.p)).abs(),
        1e-9,
    ));
    plan_checks(&cost.plan, settings.p, settings.scale, &mut checks);
    let result = json!({
        "value": cost.value,
        "iterations": cost.iterations,
        "restarts": cost.restarts,
        "certified": cost.certified,
        "mu0": measure_value(&cost.mu0),
        "mu1": measure_value(&cost.mu1),
        "plan": plan_value(&cost.plan),
    });
    Ok(Report::new(
        "cost",
        settings.config_echo(&[a, b]),
        result,
        checks,
    ))
}

pub fn run_dual(a: &PathBuf, b: &PathBuf, settings: &Settings) -> Result<Report, LoadError> {
    let phi = inputs::load_density(a)?;
    let psi = inputs::load_density(b)?;
    let mu0 = spectral_measure(&phi);
    let mu1 = spectral_measure(&psi);
    let (value, plan) =
        wasserstein(&mu0, &mu1, settings.p, settings.scale).map_err(lib_error)?;
    if !value.is_finite() {
        return Err(LoadError::Validate(
            a.display().to_string(),
            "dual problem infeasible: states live in incompatible components".into(),
        ));
    }
    let duals = dual_solve(&mu0, &mu1, settings.p, settings.scale).map_err(lib_error)?;
    let plan = plan.expect("finite cost has a plan");
    let mut checks = Vec::new();
    let gap = (duals.value(&mu0, &mu1) - value.powf(settings.p)).abs();
    checks.push(Check::bound("duality_gap", gap, settings.tol_or(1e-8)));
    checks.push(Check::bound(
        "dual_feasibility",
        duals.feasibility_defect(&mu0, &mu1, settings.scale),
        1e-9,
    ));
    let mut slack: f64 = 0.0;
    for (i, j) in plan.support() {
        let d = distance(
            &mu0.atoms()[i].projection,
            &mu1.atoms()[j].projection,
            settings.scale,
        );
        slack = slack.max((duals.g[j] - duals.f[i] - d.powf(settings.p)).abs());
    }
    checks.push(Check::bound("complementary_slackness", slack, 1e-8));
    let result = json!({
        "value": value,
        "potentials": serde_json::to_value(&duals).expect("potentials json"),
        "plan": plan_value(&plan),
    });
    Ok(Report::new(
        "dual",
        settings.config_echo(&[a, b]),
        result,
        checks,
    ))
}

pub fn run_geodesic(a: &PathBuf, b: &PathBuf, settings: &Settings) -> Result<Report, LoadError> {
    let phi = inputs::load_density(a)?;
    let psi = inputs::load_density(b)?;
    let budget = settings.budget();
    let cost = transport_cost(&phi, &psi, settings.p, settings.scale, &budget)
        .map_err(lib_error)?;
    let steps = settings.grid.max(2);
    let grid: Vec<f64> = (0..steps)
        .map(|k| k as f64 / (steps - 1) as f64)
        .collect();
    let path = state_geodesic(&cost.plan, &grid).map_err(lib_error)?;
    let mut checks = Vec::new();
    let start_defect = path.densities[0].trace_distance(&phi).map_err(lib_error)?;
    let end_defect = path.densities[steps - 1]
        .trace_distance(&psi)
        .map_err(lib_error)?;
    checks.push(Check::bound("endpoint_defect_source", start_defect, 1e-8));
    checks.push(Check::bound("endpoint_defect_target", end_defect, 1e-8));
    let deviation = path
        .geodesic_deviation(settings.p, settings.scale)
        .map_err(lib_error)?;
    if let Some(dev) = deviation {
        checks.push(Check::bound(
            "geodesic_deviation",
            dev,
            settings.tol_or(1e-6),
        ));
    }
    let result = json!({
        "times": path.times,
        "orthogonal_flags": path.orthogonal_flags,
        "geodesic_deviation": deviation.map(ext_real),
        "densities": path
            .densities
            .iter()
            .map(|rho| serde_json::to_value(matrix_to_json(rho.matrix())).expect("matrix json"))
            .collect::<Vec<_>>(),
        "cost": cost.value,
    });
    Ok(Report::new(
        "geodesic",
        settings.config_echo(&[a, b]),
        result,
        checks,
    ))
}

pub fn run_tensor_cost(input: &PathBuf, settings: &Settings) -> Result<Report, LoadError> {
    let zeta = inputs::load_tensor_state(input)?;
    let budget = settings.budget();
    let pure = pure_cost(&zeta, settings.p, settings.scale, &budget).map_err(lib_error)?;
    let data = correlation(&zeta).map_err(lib_error)?;
    let marginal = transport_cost(
        &data.rho1,
        &data.rho2,
        settings.p,
        settings.scale,
        &budget,
    )
    .map_err(lib_error)?;
    let (schmidt, separable) = zeta.schmidt();
    let identity_defect = correlation_identity_defect(&zeta).map_err(lib_error)?;

    let mut checks = Vec::new();
    checks.push(Check::bound(
        "correlation_identity_defect",
        identity_defect,
        1e-9,
    ));
    checks.push(Check::bound(
        "marginal_cost_below_pure_cost",
        marginal.value - pure.value,
        settings.tol_or(1e-6),
    ));
    let plan = tensor_plan(&zeta, &pure.representation).map_err(lib_error)?;
    let target_defect = integrate(plan.target())
        .and_then(|rho| rho.trace_distance(&data.rho2))
        .map_err(lib_error)?;
    checks.push(Check::bound(
        "pushforward_integrates_to_second_marginal",
        target_defect,
        1e-8,
    ));
    let result = json!({
        "pure_cost": pure.value,
        "marginal_cost": marginal.value,
        "schmidt_coefficients": schmidt,
        "separable": separable,
        "representation": measure_value(&pure.representation),
        "rho1": serde_json::to_value(matrix_to_json(data.rho1.matrix())).expect("matrix json"),
        "rho2": serde_json::to_value(matrix_to_json(data.rho2.matrix())).expect("matrix json"),
    });
    Ok(Report::new(
        "tensor-cost",
        settings.config_echo(&[input]),
        result,
        checks,
    ))
}

pub fn run_check(suite: &str, settings: &Settings) -> Result<Report, LoadError> {
    let checks = crate::check::run_suite(suite, settings.seed, settings.scale)
        .map_err(|e| LoadError::Validate("check".into(), e))?;
    for check in &checks {
        eprintln!(
            "{} {}",
            if check.pass { "PASS" } else { "FAIL" },
            check.name
        );
    }
    let result = json!({
        "suite": suite,
        "total": checks.len(),
        "passed": checks.iter().filter(|c| c.pass).count(),
    });
    Ok(Report::new(
        "check",
        settings.config_echo(&[]),
        result,
        checks,
    ))
}


