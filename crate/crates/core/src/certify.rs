//! The full certification suite for one problem instance.

use serde::{Deserialize, Serialize};

use crate::energy::{
    dual_extremality_probes, minimality_probes, nodal_minimality_probes, report_from, EnergyQuadrature, EnergyReport,
    ProbeResult, SecondVariationSample, TestFunction, VariationKind, CERTIFICATION_TOL,
};
use crate::error::Result;
use crate::numerics::QuadratureRule;
use crate::oracle::{compare, minimize_discrete_energy, poisson_closed_form, FieldDistance, GridFunction};
use crate::problem::{ProblemSpec, RadialGrid};
use crate::radial::{evaluate_solution, SolutionProfile};
use crate::scalar::{lit, Scalar};

/// Euler-Lagrange residual accepted for a certified solve.
pub const EL_TOL: f64 = 1e-6;
/// `|u(R2)|` relative to `max(1, max |u|)`.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Allowed negative excursion of `σ·u`.
pub const SIGN_TOL: f64 = 1e-10;
/// Worst tolerated `|E(λ) - θ²|` relative to `max(1, θ²)`.
pub const DAE_TOL: f64 = 1e-10;
/// Energy probes may dip this far below zero from rounding.
pub const PROBE_TOL: f64 = 1e-9;
/// Absolute slack on second-variation signs.
pub const VARIATION_TOL: f64 = 1e-12;
/// Sup distance to the Newton minimizer relative to `max |u|`. A cross-check for gross
/// disagreement only: the piecewise-linear oracle is itself only accurate to about `h^{3/2}`.
pub const ORACLE_TOL: f64 = 1e-3;

/// Bound on `sup|u_h - u| / (h² max|u|)` for the Newton minimizer at `p = 2`.
pub const POISSON_CONSTANT: f64 = 1.0;

/// Knobs of a verification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// First seed; probe `k` uses `seed + k`.
    pub seed: u64,
    pub minimality_probes: usize,
    pub variation_samples: usize,
    /// Primal perturbation size relative to `max |u|`.
    pub probe_amplitude: f64,
    /// Log-amplitude of dual perturbations.
    pub dual_amplitude: f64,
    pub oracle: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            minimality_probes: 50,
            variation_samples: 100,
            probe_amplitude: 1e-3,
            dual_amplitude: 1e-3,
            oracle: true,
        }
    }
}

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check<T> {
    pub name: String,
    pub pass: bool,
    pub value: T,
    pub threshold: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl<T: Scalar> Check<T> {
    fn at_most(name: &str, value: T, threshold: f64) -> Self {
        let threshold = lit::<T>(threshold);
        Check { name: name.into(), pass: value <= threshold, value, threshold, note: None }
    }

    fn at_least(name: &str, value: T, threshold: f64) -> Self {
        let threshold = lit::<T>(threshold);
        Check { name: name.into(), pass: value >= threshold, value, threshold, note: None }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Newton minimizer versus analytic profile on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison<T> {
    pub distance: FieldDistance<T>,
    pub relative_sup: T,
    pub newton_iterations: usize,
    pub discrete_objective: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport<T> {
    pub passed: bool,
    pub checks: Vec<Check<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergyReport<T>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusion_radius: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleComparison<T>>,
    pub minimality: Vec<ProbeResult<T>>,
    pub dual_extremality: Vec<ProbeResult<T>>,
    pub second_variations: Vec<SecondVariationSample<T>>,
}

impl<T: Scalar> VerificationReport<T> {
    fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.pass);
        self
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check<T>> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn worst<T: Scalar>(probes: &[ProbeResult<T>]) -> T {
    probes.iter().fold(T::infinity(), |m, p| m.min(p.increase))
}

/// Checks that make a solve certified: duality gap, equation residual, boundary value, sign.
pub fn certification_checks<T: Scalar>(profile: &SolutionProfile<T>, energy: &EnergyReport<T>) -> Vec<Check<T>> {
    let unit = profile.scale().max(T::one());
    vec![
        Check::at_most("duality_gap", energy.gap_rel, CERTIFICATION_TOL),
        Check::at_most("euler_lagrange", energy.el_residual_norm, EL_TOL),
        Check::at_most("boundary", energy.boundary_residual / unit, BOUNDARY_TOL),
        Check::at_least("sign", profile.signed_minimum(), -SIGN_TOL),
    ]
}

/// Solves, then runs every check on the analytic profile.
pub fn verify<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &RadialGrid<T>,
    rule: &QuadratureRule,
    options: &VerifyOptions,
) -> Result<(SolutionProfile<T>, VerificationReport<T>)> {
    let profile = evaluate_solution(spec, grid, rule)?;
    let report = verify_profile(&profile, rule, options)?;
    Ok((profile, report))
}

pub fn verify_profile<T: Scalar>(
    profile: &SolutionProfile<T>,
    rule: &QuadratureRule,
    options: &VerifyOptions,
) -> Result<VerificationReport<T>> {
    let spec = &profile.spec;
    let quad = EnergyQuadrature::new(profile, rule)?;
    let energy = report_from(&quad, profile);
    let mut checks = certification_checks(profile, &energy);
    checks.push(Check::at_most("dae", profile.dae_residual()?, DAE_TOL));

    let minimality =
        minimality_probes(&quad, profile, options.seed, options.minimality_probes, lit(options.probe_amplitude));
    checks.push(Check::at_least("minimality", worst(&minimality), -PROBE_TOL));
    let dual_extremality =
        dual_extremality_probes(&quad, options.seed, options.minimality_probes, lit(options.dual_amplitude));
    let direction = if spec.p < lit::<T>(2.0) { "minimum" } else { "maximum" };
    checks.push(
        Check::at_least("dual_extremality", worst(&dual_extremality), -PROBE_TOL)
            .with_note(format!("dual is a {direction} at the critical point")),
    );

    let exclusion_radius = quad.exclusion_radius();
    let mut second_variations = Vec::with_capacity(2 * options.variation_samples);
    for k in 0..options.variation_samples as u64 {
        let phi = TestFunction::seeded(options.seed.wrapping_add(k), spec.r_inner, spec.r_outer);
        second_variations.push(quad.second_variation_primal(&phi));
        second_variations.push(quad.second_variation_dual(&phi));
    }
    let slack = lit::<T>(VARIATION_TOL);
    for (kind, name) in [(VariationKind::Primal, "primal"), (VariationKind::Dual, "dual")] {
        let failures = second_variations.iter().filter(|s| s.kind == kind && !s.holds(spec.p, slack)).count();
        let mut check = Check {
            name: format!("second_variation_{name}"),
            pass: failures == 0,
            value: lit::<T>(failures as f64),
            threshold: T::zero(),
            note: None,
        };
        if kind == VariationKind::Dual {
            if let (Some(radius), Some(r0)) = (exclusion_radius, profile.kink()) {
                check = check.with_note(format!("samples within {radius:?} of the flux zero at r = {r0:?} excluded"));
            }
        }
        checks.push(check);
    }

    let oracle = if options.oracle && !spec.is_oracle_only() {
        let state = minimize_discrete_energy(spec, &profile.grid)?;
        let distance = compare(&state.grid_function(), &profile.grid_function(), spec)?;
        let relative_sup = distance.sup / profile.scale();
        checks.push(
            Check::at_most("oracle_agreement", relative_sup, ORACLE_TOL)
                .with_note(format!("Newton minimizer converged in {} iterations", state.iterations)),
        );
        Some(OracleComparison {
            distance,
            relative_sup,
            newton_iterations: state.iterations,
            discrete_objective: state.objective,
        })
    } else {
        None
    };

    Ok(VerificationReport {
        passed: false,
        checks,
        energy: Some(energy),
        exclusion_radius,
        oracle,
        minimality,
        dual_extremality,
        second_variations,
    }
    .finish())
}

/// Checks a foreign profile given only by nodal values: boundary data and minimality probes.
pub fn verify_nodal<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &RadialGrid<T>,
    u: &[T],
    options: &VerifyOptions,
) -> Result<VerificationReport<T>> {
    let sign = spec.validate()?.value::<T>();
    let unit = u.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let ends = u[0].abs().max(u[u.len() - 1].abs());
    let minimality =
        nodal_minimality_probes(spec, grid, u, options.seed, options.minimality_probes, lit(options.probe_amplitude))?;
    let lowest = u.iter().fold(T::infinity(), |m, &v| m.min(sign * v));
    let checks = vec![
        Check::at_most("boundary", ends / unit, BOUNDARY_TOL),
        Check::at_least("sign", lowest, -SIGN_TOL),
        Check::at_least("minimality", worst(&minimality), -PROBE_TOL)
            .with_note("nodal profile: centered-difference slopes, trapezoidal energy"),
    ];
    Ok(VerificationReport {
        passed: false,
        checks,
        energy: None,
        exclusion_radius: None,
        oracle: None,
        minimality,
        dual_extremality: Vec::new(),
        second_variations: Vec::new(),
    }
    .finish())
}

/// `p = 2`: the Newton minimizer against the classical radial Poisson solution.
pub fn verify_poisson<T: Scalar>(spec: &ProblemSpec<T>, grid: &RadialGrid<T>) -> Result<VerificationReport<T>> {
    let exact = poisson_closed_form(spec)?.sample(grid);
    let state = minimize_discrete_energy(spec, grid)?;
    let distance = compare(&state.grid_function(), &exact, spec)?;
    let scale = exact.u.iter().fold(T::min_positive_value(), |m, v| m.max(v.abs()));
    let h = grid.max_spacing();
    let constant = distance.sup / (h * h);
    let checks = vec![Check::at_most("poisson_anchor", constant / scale, POISSON_CONSTANT)
        .with_note(format!("sup error {:?} = C h^2 with C = {constant:?}, h = {h:?}", distance.sup))];
    Ok(VerificationReport {
        passed: false,
        checks,
        energy: None,
        exclusion_radius: None,
        oracle: Some(OracleComparison {
            distance,
            relative_sup: distance.sup / scale,
            newton_iterations: state.iterations,
            discrete_objective: state.objective,
        }),
        minimality: Vec::new(),
        dual_extremality: Vec::new(),
        second_variations: Vec::new(),
    }
    .finish())
}

/// Distance of a foreign nodal profile to a reference, for reporting.
pub fn nodal_distance<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &RadialGrid<T>,
    u: &[T],
    reference: &SolutionProfile<T>,
) -> Result<FieldDistance<T>> {
    compare(&GridFunction::from_nodal(grid.clone(), u.to_vec()), &reference.grid_function(), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::SourceTerm;

    fn grid(m: usize) -> RadialGrid<f64> {
        RadialGrid::chebyshev(1.0, 2.0, m).unwrap()
    }

    #[test]
    fn reference_cases_pass_everything() {
        for (p, eps) in [(1.5, 0.1), (3.0, 0.0)] {
            let s = ProblemSpec::new(1.0, 2.0, 2, p, eps, SourceTerm::constant(1.0));
            let (_, report) = verify(&s, &grid(513), &QuadratureRule::default(), &VerifyOptions::default()).unwrap();
            let failed: Vec<_> = report.failed_checks().collect();
            assert!(report.passed, "p = {p}: {failed:?}");
            assert_eq!(report.second_variations.len(), 200);
            assert_eq!(report.exclusion_radius.is_some(), p > 2.0);
            let oracle = report.oracle.as_ref().unwrap();
            assert!(oracle.relative_sup < 1e-4);
        }
    }

    #[test]
    fn bent_profile_fails() {
        let s = ProblemSpec::new(1.0, 2.0, 2, 1.5, 0.1, SourceTerm::constant(1.0));
        let g = grid(129);
        let prof = evaluate_solution(&s, &g, &QuadratureRule::default()).unwrap();
        let good = verify_nodal(&s, &g, &prof.u, &VerifyOptions::default()).unwrap();
        assert!(good.passed, "{:?}", good.failed_checks().collect::<Vec<_>>());
        let bent: Vec<f64> = prof.u.iter().zip(g.radii()).map(|(&u, &r)| u + 0.05 * (r - 1.0) * (2.0 - r)).collect();
        let bad = verify_nodal(&s, &g, &bent, &VerifyOptions::default()).unwrap();
        assert!(!bad.passed);
        assert!(bad.failed_checks().any(|c| c.name == "minimality"));
        let d = nodal_distance(&s, &g, &bent, &prof).unwrap();
        assert!((d.sup - 0.0125).abs() < 1e-3);
    }

    #[test]
    fn poisson_anchor() {
        let s = ProblemSpec::new(1.0, 2.0, 2, 2.0, 0.0, SourceTerm::constant(1.0));
        let report = verify_poisson(&s, &RadialGrid::uniform(1.0, 2.0, 257).unwrap()).unwrap();
        assert!(report.passed);
        assert!(report.oracle.unwrap().distance.sup < 1e-6);
        let s = ProblemSpec::new(1.0, 2.0, 2, 2.0, 0.0, SourceTerm::power(1.0, 1.0));
        assert_eq!(verify_poisson(&s, &grid(33)).unwrap_err().kind(), "unsupported-oracle");
    }

    #[test]
    fn report_serializes() {
        let s = ProblemSpec::new(1.0, 2.0, 3, 4.0, 0.0, SourceTerm::constant(-1.0));
        let opts = VerifyOptions { minimality_probes: 3, variation_samples: 3, ..Default::default() };
        let (_, report) = verify(&s, &grid(129), &QuadratureRule::default(), &opts).unwrap();
        let v = serde_json::to_value(&report).unwrap();
        assert_eq!(v["passed"], serde_json::Value::Bool(report.passed));
        assert!(v["checks"]
            .as_array()
            .unwrap()
            .iter()
            .any(|c| c["name"] == "second_variation_dual" && c.get("note").is_some()));
        let back: VerificationReport<f64> = serde_json::from_value(v).unwrap();
        assert_eq!(back, report);
    }
}
