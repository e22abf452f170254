//! Radial reduction: flux, shooting constant and the analytic profile.
//!
//! With `G(r) = ∫_{R1}^r f ρ^{n-1} dρ` and a signed constant `C̃ = σ·y`,
//! the flux coefficient is `F(r) = (R1ⁿ C̃ - G(r)) / rⁿ` and the signed
//! radial flux is `θ(r) = F(r)·r`. The slope follows pointwise from the
//! dual algebraic equation, `u' = θ/λ` with `λ = E⁻¹(θ²)`, and
//! `M(y) = ∫_{R1}^{R2} u'` is the shooting mismatch whose zero is `C_ε`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::duality::DualAlgebra;
use crate::error::{Error, Result};
use crate::numerics::{
    centered_derivative, graded_points, solve_monotone, try_expand_bracket, try_solve_monotone, Monotonicity,
    QuadratureRule, RootBracket, MAX_GL_ORDER,
};
use crate::oracle::GridFunction;
use crate::problem::{ProblemSpec, RadialGrid, Sign, SourceTerm};
use crate::scalar::{from_usize, lit, to_f64, Scalar};

/// Uniform panels laid under the shooting integral before kink splitting.
pub const SHOOTING_PANELS: usize = 32;
/// Log-spaced trial constants of the fallback scan.
pub const FALLBACK_SCAN_POINTS: usize = 256;

/// `F(r)` for one trial constant, together with the location of its zero.
#[derive(Debug, Clone)]
pub struct FluxField<T: Scalar> {
    source: SourceTerm<T>,
    r_inner: T,
    r_outer: T,
    dim: usize,
    sign: Sign,
    c_signed: T,
    /// `R1ⁿ C̃`
    head: T,
    kink: Option<T>,
    /// `∫_{knot_0}^{knot_j} f ρ^{n-1}` for tabulated sources.
    prefix: Vec<T>,
    law: Option<DualAlgebra<T>>,
}

/// Builds `F` for the signed constant `c_signed` without validating `spec`.
///
/// The slope methods need `p ≠ 2`; the flux itself is defined for any `p`.
pub fn build_flux<T: Scalar>(spec: &ProblemSpec<T>, c_signed: T) -> Result<FluxField<T>> {
    let mid = (spec.r_inner + spec.r_outer) / lit::<T>(2.0);
    let sign = if spec.source.eval(mid) < T::zero() { Sign::Negative } else { Sign::Positive };
    FluxField::new(spec, sign, c_signed)
}

impl<T: Scalar> FluxField<T> {
    fn new(spec: &ProblemSpec<T>, sign: Sign, c_signed: T) -> Result<Self> {
        if !c_signed.is_finite() {
            return Err(Error::Domain { quantity: "shooting constant", value: to_f64(c_signed) });
        }
        let law = if spec.is_oracle_only() { None } else { Some(DualAlgebra::new(spec.p, spec.epsilon)?) };
        let n = spec.dim;
        let knots = spec.source.knots();
        let mut prefix = Vec::with_capacity(knots.len());
        let mut acc = T::zero();
        for (j, &k) in knots.iter().enumerate() {
            if j > 0 {
                acc = acc + spec.source.moment(knots[j - 1], k, n);
            }
            prefix.push(acc);
        }
        let mut flux = FluxField {
            source: spec.source.clone(),
            r_inner: spec.r_inner,
            r_outer: spec.r_outer,
            dim: n,
            sign,
            c_signed,
            head: spec.r_inner.powi(n as i32) * c_signed,
            kink: None,
            prefix,
            law,
        };
        flux.kink = flux.locate_kink()?;
        Ok(flux)
    }

    pub fn c_signed(&self) -> T {
        self.c_signed
    }

    /// Zero of `F` in `[R1, R2]`, if any.
    pub fn kink(&self) -> Option<T> {
        self.kink
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    /// `∫_a^b f ρ^{n-1} dρ`, summing stored knot prefixes across interior knots.
    fn moment(&self, a: T, b: T) -> T {
        if a > b {
            return -self.moment(b, a);
        }
        let knots = self.source.knots();
        let first = knots.iter().position(|&k| k > a);
        let last = knots.iter().rposition(|&k| k < b);
        match (first, last) {
            (Some(i), Some(j)) if i < j => {
                self.source.moment(a, knots[i], self.dim)
                    + (self.prefix[j] - self.prefix[i])
                    + self.source.moment(knots[j], b, self.dim)
            }
            _ => self.source.moment(a, b, self.dim),
        }
    }

    /// `G(r) = ∫_{R1}^r f ρ^{n-1} dρ`.
    pub fn cumulative_source(&self, r: T) -> T {
        self.moment(self.r_inner, r)
    }

    /// `Θ(r) = F(r)·rⁿ = R1ⁿ C̃ - G(r)`, measured from the kink when there is one.
    pub fn total_flux(&self, r: T) -> T {
        match self.kink {
            Some(r0) => -self.moment(r0, r),
            None => self.head - self.cumulative_source(r),
        }
    }

    /// `F(r)`.
    pub fn coefficient(&self, r: T) -> T {
        self.total_flux(r) / r.powi(self.dim as i32)
    }

    /// Signed radial flux `θ(r) = F(r)·r`.
    pub fn theta(&self, r: T) -> T {
        self.total_flux(r) / r.powi(self.dim as i32 - 1)
    }

    fn law(&self) -> Result<&DualAlgebra<T>> {
        self.law.as_ref().ok_or(Error::OracleOnlyExponent)
    }

    /// `u'(r)`.
    pub fn slope(&self, r: T) -> Result<T> {
        self.law()?.slope_from_flux(self.theta(r))
    }

    /// `(u'(r), λ(r), θ(r))`.
    pub fn slope_lambda_theta(&self, r: T) -> Result<(T, T, T)> {
        let theta = self.theta(r);
        let (slope, lam) = self.law()?.slope_and_lambda(theta)?;
        Ok((slope, lam, theta))
    }

    fn locate_kink(&self) -> Result<Option<T>> {
        // σΘ is strictly decreasing; normalizing by σ keeps mirrored sources bit-identical
        let s = self.sign.value::<T>();
        let h = |r: T| s * (self.head - self.cumulative_source(r));
        let (a, b) = (self.r_inner, self.r_outer);
        let (ha, hb) = (h(a), h(b));
        if ha == T::zero() {
            return Ok(Some(a));
        }
        if hb == T::zero() {
            return Ok(Some(b));
        }
        if (ha > T::zero()) == (hb > T::zero()) {
            return Ok(None);
        }
        let bracket = RootBracket { lo: a, hi: b, f_lo: ha, f_hi: hb };
        let tol_x = lit::<T>(4.0) * T::epsilon() * b;
        solve_monotone(h, bracket, tol_x, T::zero()).map(Some)
    }

    /// `∫_a^b u'` on a piece that does not straddle the kink.
    fn slope_piece(&self, a: T, b: T, rule: &QuadratureRule) -> Result<T> {
        let mut total = T::zero();
        for (x, w) in piece_points(a, b, self.kink, rule) {
            let v = self.slope(x)?;
            if !v.is_finite() {
                return Err(Error::NumericalEvaluation { x: to_f64(x), value: to_f64(v) });
            }
            total = total + w * v;
        }
        Ok(total)
    }

    /// Sorted breakpoints: `extra` plus table knots and the kink, restricted to `[R1, R2]`.
    fn breakpoints(&self, extra: &[T]) -> Vec<T> {
        let (a, b) = (self.r_inner, self.r_outer);
        let mut pts: Vec<T> = extra.to_vec();
        pts.push(a);
        pts.push(b);
        pts.extend(self.source.knots().into_iter().filter(|&k| k > a && k < b));
        if let Some(r0) = self.kink {
            pts.push(r0);
        }
        pts.sort_by(|x, y| x.partial_cmp(y).expect("finite breakpoint"));
        pts.dedup();
        pts
    }

    /// `M = ∫_{R1}^{R2} u'` for this constant.
    pub fn mismatch(&self, rule: &QuadratureRule) -> Result<T> {
        let grid = RadialGrid::uniform(self.r_inner, self.r_outer, SHOOTING_PANELS + 1)?;
        let pts = self.breakpoints(grid.radii());
        let mut total = T::zero();
        for w in pts.windows(2) {
            total = total + self.slope_piece(w[0], w[1], rule)?;
        }
        Ok(total)
    }
}

/// Rule for the geometric pieces next to the kink: the requested one, raised to
/// the highest tabulated order so that `|r - r0|^α` stays at round-off level.
pub fn kink_rule(rule: &QuadratureRule) -> QuadratureRule {
    QuadratureRule::new(MAX_GL_ORDER, rule.panels()).expect("tabulated order")
}

/// Quadrature nodes and weights on `[a, b]`, a piece that does not straddle `kink`.
///
/// Pieces touching the kink are graded down to round-off; pieces closer to
/// it than their own width are cut at `r0 ± d·2^k` so that every panel is
/// at least its own width away from the singularity.
pub fn piece_points<T: Scalar>(a: T, b: T, kink: Option<T>, rule: &QuadratureRule) -> Vec<(T, T)> {
    let Some(r0) = kink else {
        return rule.points(a, b);
    };
    let fine = kink_rule(rule);
    if r0 == a || r0 == b {
        return graded_points(a, b, r0 == b, T::mantissa_levels(), &fine);
    }
    let width = b - a;
    let dist = if r0 < a { a - r0 } else { r0 - b };
    if dist >= lit::<T>(4.0) * width {
        return rule.points(a, b);
    }
    if dist >= width {
        return fine.points(a, b);
    }
    let two = lit::<T>(2.0);
    let mut cuts = vec![a, b];
    let mut step = dist;
    loop {
        step = step * two;
        let c = if r0 < a { r0 + step } else { r0 - step };
        if c <= a || c >= b {
            break;
        }
        cuts.push(c);
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite cut"));
    cuts.windows(2).flat_map(|w| fine.points(w[0], w[1])).collect()
}

/// `u'(r)` for the given flux.
pub fn du_dr_at<T: Scalar>(r: T, flux: &FluxField<T>) -> Result<T> {
    flux.slope(r)
}

/// `M_ε(y)`: the value `u(R2)` reached from `u(R1) = 0` with the constant `σ·y`.
pub fn shooting_mismatch<T: Scalar>(spec: &ProblemSpec<T>, y: T, rule: &QuadratureRule) -> Result<T> {
    let sign = spec.validate()?;
    if spec.is_oracle_only() {
        return Err(Error::OracleOnlyExponent);
    }
    mismatch_signed(spec, sign, y, rule)
}

fn mismatch_signed<T: Scalar>(spec: &ProblemSpec<T>, sign: Sign, y: T, rule: &QuadratureRule) -> Result<T> {
    if !(y > T::zero()) {
        return Err(Error::Domain { quantity: "y", value: to_f64(y) });
    }
    FluxField::new(spec, sign, sign.value::<T>() * y)?.mismatch(rule)
}

/// How `C_ε` was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingResult<T> {
    pub c_epsilon: T,
    /// `M_ε(C_ε)`
    pub mismatch: T,
    pub tol_f: T,
    pub bracket_lo: T,
    pub bracket_hi: T,
    pub evaluations: usize,
    /// Set when bracket expansion failed and the log-spaced scan supplied the bracket.
    pub fallback_scan: bool,
}

/// `C_ε = M_ε⁻¹(0)` with the rule's default order.
pub fn solve_constant<T: Scalar>(spec: &ProblemSpec<T>) -> Result<ShootingResult<T>> {
    solve_constant_with(spec, &QuadratureRule::default())
}

/// `C_ε = M_ε⁻¹(0)`.
pub fn solve_constant_with<T: Scalar>(spec: &ProblemSpec<T>, rule: &QuadratureRule) -> Result<ShootingResult<T>> {
    let sign = spec.validate()?;
    if spec.is_oracle_only() {
        return Err(Error::OracleOnlyExponent);
    }
    let s = sign.value::<T>();
    let mut evaluations = 0usize;
    // σM(σy) is increasing for either sign, and identical for mirrored sources
    let mut h = |y: T| -> Result<T> {
        evaluations += 1;
        Ok(s * mismatch_signed(spec, sign, y, rule)?)
    };
    // F changes sign inside the annulus, so C_ε < |G(R2)| / R1ⁿ
    let upper = (spec.source.moment(spec.r_inner, spec.r_outer, spec.dim) / spec.r_inner.powi(spec.dim as i32)).abs();
    let seed = upper / lit::<T>(2.0);
    let (bracket, fallback_scan) = match try_expand_bracket(&mut h, seed, Monotonicity::Increasing) {
        Ok(b) => (b, false),
        Err(Error::BracketNotFound { .. }) => (scan_bracket(&mut h, seed)?, true),
        Err(e) => return Err(e),
    };
    let scale = bracket.f_lo.abs().max(bracket.f_hi.abs());
    let tol_f = T::rel_tol(1e-12) * scale;
    let tol_x = lit::<T>(4.0) * T::epsilon() * bracket.hi;
    let c = try_solve_monotone(&mut h, bracket, tol_x, tol_f)?;
    let mismatch = s * h(c)?;
    Ok(ShootingResult {
        c_epsilon: c,
        mismatch,
        tol_f,
        bracket_lo: bracket.lo,
        bracket_hi: bracket.hi,
        evaluations,
        fallback_scan,
    })
}

fn scan_bracket<T: Scalar>(h: &mut impl FnMut(T) -> Result<T>, seed: T) -> Result<RootBracket<T>> {
    let span = lit::<T>(64.0 * std::f64::consts::LN_2);
    let m = from_usize::<T>(FALLBACK_SCAN_POINTS - 1);
    let ys: Vec<T> = (0..FALLBACK_SCAN_POINTS)
        .map(|i| seed * (-span + lit::<T>(2.0) * span * from_usize::<T>(i) / m).exp())
        .collect();
    let mut prev: Option<(T, T)> = None;
    for &y in &ys {
        let v = match h(y) {
            Ok(v) if v.is_finite() => v,
            _ => continue,
        };
        if let Some((py, pv)) = prev {
            if pv <= T::zero() && v >= T::zero() {
                return Ok(RootBracket { lo: py, hi: y, f_lo: pv, f_hi: v });
            }
        }
        prev = Some((y, v));
    }
    Err(Error::MonotonicityViolation)
}

/// The analytic solution sampled on a grid.
#[derive(Debug, Clone)]
pub struct SolutionProfile<T: Scalar> {
    pub spec: ProblemSpec<T>,
    pub sign: Sign,
    pub grid: RadialGrid<T>,
    pub u: Vec<T>,
    pub du_dr: Vec<T>,
    pub lam: Vec<T>,
    pub f_vals: Vec<T>,
    pub theta_abs: Vec<T>,
    pub c_epsilon: T,
    pub flux: FluxField<T>,
    pub shooting: ShootingResult<T>,
    rule: QuadratureRule,
}

/// Pointwise fields of the analytic solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample<T> {
    pub r: T,
    pub u: T,
    pub du_dr: T,
    pub lambda: T,
    /// Signed radial flux `F·r`.
    pub theta: T,
}

/// Solves for `C_ε` and samples `u`, `u'`, `λ`, `F` and `|θ|` on `grid`.
pub fn evaluate_solution<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &RadialGrid<T>,
    rule: &QuadratureRule,
) -> Result<SolutionProfile<T>> {
    let sign = spec.validate()?;
    if spec.is_oracle_only() {
        return Err(Error::OracleOnlyExponent);
    }
    if grid.first() != spec.r_inner || grid.last() != spec.r_outer {
        return Err(Error::InvalidGrid(format!(
            "grid spans [{}, {}] but the annulus is [{}, {}]",
            grid.first(),
            grid.last(),
            spec.r_inner,
            spec.r_outer
        )));
    }
    let shooting = solve_constant_with(spec, rule)?;
    let flux = FluxField::new(spec, sign, sign.value::<T>() * shooting.c_epsilon)?;
    let radii = grid.radii();
    let pts = flux.breakpoints(radii);
    let mut u = Vec::with_capacity(radii.len());
    u.push(T::zero());
    let mut acc = T::zero();
    let mut next = 1;
    for w in pts.windows(2) {
        acc = acc + flux.slope_piece(w[0], w[1], rule)?;
        if next < radii.len() && w[1] == radii[next] {
            u.push(acc);
            next += 1;
        }
    }
    let n = radii.len();
    let (mut du_dr, mut lam, mut f_vals, mut theta_abs) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &r in radii {
        let (slope, l, theta) = flux.slope_lambda_theta(r)?;
        du_dr.push(slope);
        lam.push(l);
        f_vals.push(flux.coefficient(r));
        theta_abs.push(theta.abs());
    }
    Ok(SolutionProfile {
        spec: spec.clone(),
        sign,
        grid: grid.clone(),
        u,
        du_dr,
        lam,
        f_vals,
        theta_abs,
        c_epsilon: shooting.c_epsilon,
        flux,
        shooting,
        rule: *rule,
    })
}

impl<T: Scalar> SolutionProfile<T> {
    pub fn kink(&self) -> Option<T> {
        self.flux.kink()
    }

    /// Breakpoints that quadrature over this profile must respect: grid nodes, knots and the kink.
    pub fn breakpoints(&self) -> Vec<T> {
        self.flux.breakpoints(self.grid.radii())
    }

    /// `max |u|`, floored at the smallest positive normal to keep ratios finite.
    pub fn scale(&self) -> T {
        self.u.iter().fold(T::min_positive_value(), |m, v| m.max(v.abs()))
    }

    /// `|u(R2)|`.
    pub fn boundary_residual(&self) -> T {
        self.u[self.u.len() - 1].abs()
    }

    /// `max_i |E(λ_i) - θ_i²| / max(1, θ_i²)`.
    pub fn dae_residual(&self) -> Result<T> {
        let law = self.flux.law()?;
        let mut worst = T::zero();
        for (&l, &t) in self.lam.iter().zip(&self.theta_abs) {
            let t2 = t * t;
            let e = law.forward(l)?;
            worst = worst.max((e - t2).abs() / t2.max(T::one()));
        }
        Ok(worst)
    }

    /// `min_i σ·u_i`; nonnegative when the sign property holds.
    pub fn signed_minimum(&self) -> T {
        let s = self.sign.value::<T>();
        self.u.iter().fold(T::infinity(), |m, &v| m.min(s * v))
    }

    /// Fields at sorted radii inside `[R1, R2]`, by integrating `u'` forward from the nearest node.
    pub fn sample_sorted(&self, points: &[T]) -> Result<Vec<FieldSample<T>>> {
        if points.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidGrid("sample radii must be sorted".into()));
        }
        let radii = self.grid.radii();
        let breaks = self.breakpoints();
        let mut out = Vec::with_capacity(points.len());
        let mut x = radii[0];
        let mut u = T::zero();
        let mut bi = 0;
        let mut node = 0;
        for &t in points {
            if t < radii[0] || t > radii[radii.len() - 1] {
                return Err(Error::Domain { quantity: "sample radius", value: to_f64(t) });
            }
            while bi < breaks.len() && breaks[bi] <= t {
                let b = breaks[bi];
                if b > x {
                    u = u + self.flux.slope_piece(x, b, &self.rule)?;
                    x = b;
                }
                while node < radii.len() && radii[node] < b {
                    node += 1;
                }
                if node < radii.len() && radii[node] == b {
                    u = self.u[node];
                }
                bi += 1;
            }
            if t > x {
                u = u + self.flux.slope_piece(x, t, &self.rule)?;
                x = t;
            }
            let (du_dr, lambda, theta) = self.flux.slope_lambda_theta(t)?;
            out.push(FieldSample { r: t, u, du_dr, lambda, theta });
        }
        Ok(out)
    }

    /// Writes `r,u,du_dr,lambda,F,theta_abs` rows in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        crate::io::write_profile_csv(
            out,
            self.grid.radii(),
            &self.u,
            &self.du_dr,
            &self.lam,
            &self.f_vals,
            &self.theta_abs,
        )
    }

    /// Nodal values with exact slopes, for comparison against other solutions.
    pub fn grid_function(&self) -> GridFunction<T> {
        GridFunction { grid: self.grid.clone(), u: self.u.clone(), du_dr: self.du_dr.clone() }
    }
}

/// Max-norm of `Θ'(r_i) + f r_i^{n-1}` over interior nodes, relative to `max |f r^{n-1}|`.
fn flux_balance<T: Scalar>(spec: &ProblemSpec<T>, r: &[T], total: &[T]) -> T {
    let n = spec.dim as i32;
    let mut worst = T::zero();
    let mut scale = T::zero();
    for i in 1..r.len() - 1 {
        let load = spec.source.eval(r[i]) * r[i].powi(n - 1);
        scale = scale.max(load.abs());
        worst = worst.max((centered_derivative(r, total, i) + load).abs());
    }
    if scale > T::zero() {
        worst / scale
    } else {
        worst
    }
}

/// Finite-difference residual of `(r^{n-1} λ u')' + f r^{n-1} = 0`, normalized by `max |f r^{n-1}|`.
pub fn euler_lagrange_residual<T: Scalar>(profile: &SolutionProfile<T>) -> T {
    let n = profile.spec.dim as i32;
    let r = profile.grid.radii();
    let total: Vec<T> = (0..r.len()).map(|i| r[i].powi(n - 1) * profile.lam[i] * profile.du_dr[i]).collect();
    flux_balance(&profile.spec, r, &total)
}

/// Finite-difference residual of `(F rⁿ)' + f r^{n-1} = 0`, same normalization.
pub fn conservation_residual<T: Scalar>(profile: &SolutionProfile<T>) -> T {
    let n = profile.spec.dim as i32;
    let r = profile.grid.radii();
    let total: Vec<T> = (0..r.len()).map(|i| profile.f_vals[i] * r[i].powi(n)).collect();
    flux_balance(&profile.spec, r, &total)
}
