//! Primal and dual energies, the duality gap and second variations.
//!
//! All integrals carry the radial measure `ω_{n-1} r^{n-1} dr`. Analytic
//! profiles are integrated on the kink-aware layout of
//! [`piece_points`](crate::radial::piece_points); foreign grid functions
//! use centered differences and the trapezoidal rule on their own nodes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::duality::DualAlgebra;
use crate::error::{Error, Result};
use crate::numerics::{nodal_derivative, QuadratureRule};
use crate::problem::{ProblemSpec, RadialGrid};
use crate::radial::{euler_lagrange_residual, piece_points, FieldSample, SolutionProfile};
use crate::scalar::{from_usize, lit, to_f64, Scalar};

/// Relative duality gap accepted for a certified solve.
pub const CERTIFICATION_TOL: f64 = 1e-6;
/// Sine modes in a random test function.
pub const TEST_FUNCTION_MODES: usize = 8;
/// Fraction of `R2 - R1` excluded around the zero of `θ` from dual sampling when `p > 2`.
pub const DUAL_EXCLUSION_FRACTION: f64 = 0.01;

/// Energies of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport<T> {
    pub primal: T,
    pub dual: T,
    pub gap: T,
    pub gap_rel: T,
    pub el_residual_norm: T,
    pub boundary_residual: T,
    pub c_epsilon: T,
}

impl<T: Scalar> EnergyReport<T> {
    pub fn certified(&self) -> bool {
        self.gap_rel <= lit::<T>(CERTIFICATION_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariationKind {
    Primal,
    Dual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondVariationSample<T> {
    pub kind: VariationKind,
    pub seed: u64,
    pub value: T,
}

impl<T: Scalar> SecondVariationSample<T> {
    /// Sign claim with an absolute slack: primal `≥ 0`, dual `≥ 0` for `p < 2` and `≤ 0` for `p > 2`.
    pub fn holds(&self, p: T, slack: T) -> bool {
        match self.kind {
            VariationKind::Primal => self.value >= -slack,
            VariationKind::Dual if p < lit::<T>(2.0) => self.value >= -slack,
            VariationKind::Dual => self.value <= slack,
        }
    }
}

/// `φ(r) = Σ_k a_k sin(kπs)/k²` with `s = (r - R1)/(R2 - R1)` and seeded `a_k ∈ [-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction<T> {
    pub seed: u64,
    coefficients: Vec<T>,
    r_inner: T,
    r_outer: T,
}

impl<T: Scalar> TestFunction<T> {
    pub fn seeded(seed: u64, r_inner: T, r_outer: T) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coefficients = (0..TEST_FUNCTION_MODES).map(|_| lit::<T>(rng.gen_range(-1.0..=1.0))).collect();
        TestFunction { seed, coefficients, r_inner, r_outer }
    }

    /// The zero function.
    pub fn zero(r_inner: T, r_outer: T) -> Self {
        TestFunction { seed: 0, coefficients: Vec::new(), r_inner, r_outer }
    }

    pub fn scaled(&self, c: T) -> Self {
        TestFunction { coefficients: self.coefficients.iter().map(|&a| a * c).collect(), ..self.clone() }
    }

    /// `(φ(r), φ'(r))`.
    pub fn eval(&self, r: T) -> (T, T) {
        let len = self.r_outer - self.r_inner;
        let s = (r - self.r_inner) / len;
        let mut v = T::zero();
        let mut dv = T::zero();
        for (i, &a) in self.coefficients.iter().enumerate() {
            let k = from_usize::<T>(i + 1);
            let arg = k * T::PI() * s;
            v = v + a * arg.sin() / (k * k);
            dv = dv + a * arg.cos() * T::PI() / (k * len);
        }
        (v, dv)
    }

    /// `max |φ|` on 257 equispaced radii.
    pub fn sup(&self) -> T {
        let g = RadialGrid::uniform(self.r_inner, self.r_outer, 257).expect("valid annulus");
        g.radii().iter().fold(T::zero(), |m, &r| m.max(self.eval(r).0.abs()))
    }
}

/// The analytic profile sampled on its kink-aware quadrature layout.
#[derive(Debug, Clone)]
pub struct EnergyQuadrature<T: Scalar> {
    spec: ProblemSpec<T>,
    law: DualAlgebra<T>,
    samples: Vec<FieldSample<T>>,
    /// Quadrature weight times `ω_{n-1} r^{n-1}`.
    weights: Vec<T>,
    source: Vec<T>,
    kink: Option<T>,
}

impl<T: Scalar> EnergyQuadrature<T> {
    pub fn new(profile: &SolutionProfile<T>, rule: &QuadratureRule) -> Result<Self> {
        let spec = profile.spec.clone();
        let kink = profile.kink();
        let breaks = profile.breakpoints();
        let mut points = Vec::new();
        for w in breaks.windows(2) {
            points.extend(piece_points(w[0], w[1], kink, rule));
        }
        let radii: Vec<T> = points.iter().map(|p| p.0).collect();
        let samples = profile.sample_sorted(&radii)?;
        let omega = spec.sphere_area()?;
        let n = spec.dim as i32;
        let weights = points.iter().map(|&(r, w)| omega * w * r.powi(n - 1)).collect();
        let source = radii.iter().map(|&r| spec.source.eval(r)).collect();
        let law = DualAlgebra::new(spec.p, spec.epsilon)?;
        Ok(EnergyQuadrature { spec, law, samples, weights, source, kink })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn stored(&self, slope: T) -> T {
        let xi = slope * slope + self.law.regularization();
        xi.powf(self.spec.p / lit::<T>(2.0)) / self.spec.p
    }

    /// `I[ū + φ]`.
    pub fn primal_perturbed(&self, phi: &TestFunction<T>) -> T {
        let mut total = T::zero();
        for ((s, &w), &f) in self.samples.iter().zip(&self.weights).zip(&self.source) {
            let (v, dv) = phi.eval(s.r);
            total = total + w * (self.stored(s.du_dr + dv) - f * (s.u + v));
        }
        total
    }

    /// `I[c·ū]`.
    pub fn primal_scaled(&self, c: T) -> T {
        let mut total = T::zero();
        for ((s, &w), &f) in self.samples.iter().zip(&self.weights).zip(&self.source) {
            total = total + w * (self.stored(c * s.du_dr) - f * c * s.u);
        }
        total
    }

    pub fn primal(&self) -> T {
        self.primal_scaled(T::one())
    }

    fn dual_density(&self, theta: T, lam: T) -> T {
        let p = self.spec.p;
        let two = lit::<T>(2.0);
        if lam == T::zero() {
            // p > 2 at the zero of θ: every term vanishes
            return T::zero();
        }
        let t = theta * theta / lam - self.law.regularization() * lam + (p - two) * lam.powf(p / (p - two)) / p;
        -t / two
    }

    /// `I_d` at the dual field `λ̄`.
    pub fn dual(&self) -> T {
        self.samples.iter().zip(&self.weights).map(|(s, &w)| w * self.dual_density(s.theta, s.lambda)).sum()
    }

    /// `I_d` at `λ̄·exp(ψ)`, clipped into `(0, ε^{p-2}]` when `p < 2`.
    pub fn dual_perturbed(&self, psi: &TestFunction<T>) -> T {
        let cap = self.law.lambda_max();
        let mut total = T::zero();
        for (s, &w) in self.samples.iter().zip(&self.weights) {
            let lam = (s.lambda * psi.eval(s.r).0.exp()).min(cap);
            total = total + w * self.dual_density(s.theta, lam);
        }
        total
    }

    /// Half-width of the neighborhood of the zero of `θ` skipped by dual sampling.
    pub fn exclusion_radius(&self) -> Option<T> {
        if self.law.is_singular() {
            return None;
        }
        self.kink.map(|_| lit::<T>(DUAL_EXCLUSION_FRACTION) * (self.spec.r_outer - self.spec.r_inner))
    }

    /// `δ²I[φ] = ∫ [(p-2) ξ^{(p-4)/2} (u'φ')² + ξ^{(p-2)/2} φ'²] dμ`.
    pub fn second_variation_primal(&self, phi: &TestFunction<T>) -> SecondVariationSample<T> {
        let p = self.spec.p;
        let two = lit::<T>(2.0);
        let mut total = T::zero();
        for (s, &w) in self.samples.iter().zip(&self.weights) {
            let dphi = phi.eval(s.r).1;
            let xi = s.du_dr * s.du_dr + self.law.regularization();
            if xi == T::zero() {
                continue;
            }
            // ξ^{(p-2)/2}·(1 + (p-2)u'²/ξ) avoids 0·∞ where u' = 0
            let density = xi.powf((p - two) / two) * (T::one() + (p - two) * s.du_dr * s.du_dr / xi);
            total = total + w * density * dphi * dphi;
        }
        SecondVariationSample { kind: VariationKind::Primal, seed: phi.seed, value: total }
    }

    /// `δ²I_d[ψ] = -½ ∫ {θ²/ζ³ + 8(2ζ)^{(4-p)/(p-2)}/(p-2)} ψ² dμ`, skipping the exclusion zone.
    pub fn second_variation_dual(&self, psi: &TestFunction<T>) -> SecondVariationSample<T> {
        let p = self.spec.p;
        let two = lit::<T>(2.0);
        let eight = lit::<T>(8.0);
        let skip = self.exclusion_radius().zip(self.kink);
        let mut total = T::zero();
        for (s, &w) in self.samples.iter().zip(&self.weights) {
            if let Some((radius, r0)) = skip {
                if (s.r - r0).abs() < radius {
                    continue;
                }
            }
            if s.lambda == T::zero() {
                continue;
            }
            let zeta = s.lambda / two;
            let v = psi.eval(s.r).0;
            let brace = s.theta * s.theta / (zeta * zeta * zeta)
                + eight * s.lambda.powf((lit::<T>(4.0) - p) / (p - two)) / (p - two);
            total = total + w * brace * v * v;
        }
        SecondVariationSample { kind: VariationKind::Dual, seed: psi.seed, value: -total / two }
    }
}

/// `I^(ε)[ū]` for an analytic profile.
pub fn primal_energy<T: Scalar>(profile: &SolutionProfile<T>, rule: &QuadratureRule) -> Result<T> {
    Ok(EnergyQuadrature::new(profile, rule)?.primal())
}

/// `I_d^(ε)[ζ̄]` for an analytic profile.
pub fn dual_energy<T: Scalar>(profile: &SolutionProfile<T>, rule: &QuadratureRule) -> Result<T> {
    Ok(EnergyQuadrature::new(profile, rule)?.dual())
}

/// Both energies, their gap and the profile residuals.
pub fn duality_gap<T: Scalar>(profile: &SolutionProfile<T>, rule: &QuadratureRule) -> Result<EnergyReport<T>> {
    let quad = EnergyQuadrature::new(profile, rule)?;
    Ok(report_from(&quad, profile))
}

pub fn report_from<T: Scalar>(quad: &EnergyQuadrature<T>, profile: &SolutionProfile<T>) -> EnergyReport<T> {
    let primal = quad.primal();
    let dual = quad.dual();
    let gap = primal - dual;
    EnergyReport {
        primal,
        dual,
        gap,
        gap_rel: gap.abs() / primal.abs().max(T::one()),
        el_residual_norm: euler_lagrange_residual(profile),
        boundary_residual: profile.boundary_residual(),
        c_epsilon: profile.c_epsilon,
    }
}

pub fn second_variation_primal<T: Scalar>(
    profile: &SolutionProfile<T>,
    phi: &TestFunction<T>,
    rule: &QuadratureRule,
) -> Result<SecondVariationSample<T>> {
    Ok(EnergyQuadrature::new(profile, rule)?.second_variation_primal(phi))
}

pub fn second_variation_dual<T: Scalar>(
    profile: &SolutionProfile<T>,
    psi: &TestFunction<T>,
    rule: &QuadratureRule,
) -> Result<SecondVariationSample<T>> {
    Ok(EnergyQuadrature::new(profile, rule)?.second_variation_dual(psi))
}

/// Outcome of one minimality probe: `I[u ± v] - I[u]`, the smaller of the two signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult<T> {
    pub seed: u64,
    pub increase: T,
}

/// `count` probes `I[ū ± a·φ_k] - I[ū]` with seeds `seed, seed+1, ...` and `a = amplitude·max|ū|/max|φ_k|`.
pub fn minimality_probes<T: Scalar>(
    quad: &EnergyQuadrature<T>,
    profile: &SolutionProfile<T>,
    seed: u64,
    count: usize,
    amplitude: T,
) -> Vec<ProbeResult<T>> {
    let base = quad.primal();
    let (a, b) = (profile.spec.r_inner, profile.spec.r_outer);
    (0..count as u64)
        .map(|k| {
            let phi = TestFunction::seeded(seed.wrapping_add(k), a, b);
            let phi = phi.scaled(amplitude * profile.scale() / phi.sup());
            let up = quad.primal_perturbed(&phi) - base;
            let down = quad.primal_perturbed(&phi.scaled(-T::one())) - base;
            ProbeResult { seed: seed.wrapping_add(k), increase: up.min(down) }
        })
        .collect()
}

/// `I_d[λ̄·exp(±a ψ_k)] - I_d[λ̄]`, the extreme over the two signs toward the claimed extremum
/// (smaller for `p < 2`, larger for `p > 2`).
pub fn dual_extremality_probes<T: Scalar>(
    quad: &EnergyQuadrature<T>,
    seed: u64,
    count: usize,
    amplitude: T,
) -> Vec<ProbeResult<T>> {
    let base = quad.dual();
    let singular = quad.law.is_singular();
    let (a, b) = (quad.spec.r_inner, quad.spec.r_outer);
    (0..count as u64)
        .map(|k| {
            let psi = TestFunction::seeded(seed.wrapping_add(k), a, b);
            let psi = psi.scaled(amplitude / psi.sup());
            let up = quad.dual_perturbed(&psi) - base;
            let down = quad.dual_perturbed(&psi.scaled(-T::one())) - base;
            let increase = if singular { up.min(down) } else { -up.max(down) };
            ProbeResult { seed: seed.wrapping_add(k), increase }
        })
        .collect()
}

/// `I^(ε)` of a grid function given only by nodal values.
pub fn primal_energy_nodal<T: Scalar>(spec: &ProblemSpec<T>, grid: &RadialGrid<T>, u: &[T]) -> Result<T> {
    if u.len() != grid.len() {
        return Err(Error::Profile(format!("{} values for {} nodes", u.len(), grid.len())));
    }
    if spec.is_oracle_only() {
        return Err(Error::OracleOnlyExponent);
    }
    let r = grid.radii();
    let du = nodal_derivative(r, u);
    let omega = spec.sphere_area()?;
    let reg = spec.regularization();
    let n = spec.dim as i32;
    let mut total = T::zero();
    for (i, w) in grid.trapezoid_weights().into_iter().enumerate() {
        let h = (du[i] * du[i] + reg).powf(spec.p / lit::<T>(2.0)) / spec.p;
        let v = w * r[i].powi(n - 1) * (h - spec.source.eval(r[i]) * u[i]);
        if !v.is_finite() {
            return Err(Error::NumericalEvaluation { x: to_f64(r[i]), value: to_f64(v) });
        }
        total = total + v;
    }
    Ok(omega * total)
}

/// Minimality probes on nodal data: `min(I[u + v], I[u - v]) - I[u]` for seeded test functions
/// sampled at the nodes, `v = amplitude·max(max|u|, 1)/max|φ|·φ`.
pub fn nodal_minimality_probes<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &RadialGrid<T>,
    u: &[T],
    seed: u64,
    count: usize,
    amplitude: T,
) -> Result<Vec<ProbeResult<T>>> {
    let base = primal_energy_nodal(spec, grid, u)?;
    let scale = u.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let mut out = Vec::with_capacity(count);
    for k in 0..count as u64 {
        let phi = TestFunction::seeded(seed.wrapping_add(k), spec.r_inner, spec.r_outer);
        let c = amplitude * scale / phi.sup();
        let v: Vec<T> = grid.radii().iter().map(|&r| c * phi.eval(r).0).collect();
        let plus: Vec<T> = u.iter().zip(&v).map(|(&a, &b)| a + b).collect();
        let minus: Vec<T> = u.iter().zip(&v).map(|(&a, &b)| a - b).collect();
        let up = primal_energy_nodal(spec, grid, &plus)? - base;
        let down = primal_energy_nodal(spec, grid, &minus)? - base;
        out.push(ProbeResult { seed: seed.wrapping_add(k), increase: up.min(down) });
    }
    Ok(out)
}
