//! Independent checks: Newton minimization of the discretized primal energy
//! over piecewise-linear functions, and the classical `p = 2` closed forms.
//!
//! Nothing here touches the duality pipeline; only the problem definition
//! and shared numerics are reused.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::nodal_derivative;
use crate::problem::{ProblemSpec, RadialGrid, SourceTerm};
use crate::scalar::{lit, to_f64, Scalar};

pub const MAX_NEWTON_ITERATIONS: usize = 500;
/// Stop once `max |∇J| ≤ GRADIENT_TOL · max |b_i|`.
pub const GRADIENT_TOL: f64 = 1e-10;
pub const ARMIJO: f64 = 1e-4;
/// Element curvature floor relative to the largest one; only bites where `H''` degenerates (`p > 2`).
pub const HESSIAN_FLOOR: f64 = 1e-12;
/// Also stop once the Newton step is below `STEP_FLOOR · eps · max |u|`.
pub const STEP_FLOOR: f64 = 16.0;

/// Result of a discrete minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEnergyState<T: Scalar> {
    pub grid: RadialGrid<T>,
    pub u: Vec<T>,
    pub objective: T,
    pub gradient_norm: T,
    pub iterations: usize,
    /// Objective after each accepted step, starting with the initial guess.
    pub history: Vec<T>,
}

/// Element and load data of the discrete functional
/// `J(u) = Σ_e w_e H((u_{e+1}-u_e)/h_e) - Σ_i b_i u_i`.
#[derive(Debug, Clone)]
struct Discretization<T: Scalar> {
    p: T,
    reg: T,
    h: Vec<T>,
    /// `ω h_e r_mid^{n-1}`
    w: Vec<T>,
    /// `ω f(r_i) r_i^{n-1} (h_{i-1} + h_i)/2`
    b: Vec<T>,
}

impl<T: Scalar> Discretization<T> {
    fn new(spec: &ProblemSpec<T>, grid: &RadialGrid<T>) -> Result<Self> {
        let omega = spec.sphere_area()?;
        let n = spec.dim as i32;
        let r = grid.radii();
        let half = lit::<T>(0.5);
        let h: Vec<T> = r.windows(2).map(|x| x[1] - x[0]).collect();
        let w = r.windows(2).zip(&h).map(|(x, &he)| omega * he * ((x[0] + x[1]) * half).powi(n - 1)).collect();
        let tw = grid.trapezoid_weights();
        let b = r.iter().zip(tw).map(|(&ri, t)| omega * spec.source.eval(ri) * ri.powi(n - 1) * t).collect();
        Ok(Discretization { p: spec.p, reg: spec.regularization(), h, w, b })
    }

    fn xi(&self, g: T) -> T {
        g * g + self.reg
    }

    fn energy_density(&self, g: T) -> T {
        self.xi(g).powf(self.p / lit::<T>(2.0)) / self.p
    }

    /// `H'(γ) = ξ^{(p-2)/2} γ`.
    fn first(&self, g: T) -> T {
        let xi = self.xi(g);
        if xi == T::zero() {
            return T::zero();
        }
        xi.powf((self.p - lit::<T>(2.0)) / lit::<T>(2.0)) * g
    }

    /// `H''(γ) = ξ^{(p-4)/2} ((p-1)γ² + χε²)`.
    fn second(&self, g: T) -> T {
        let two = lit::<T>(2.0);
        let xi = self.xi(g);
        if xi == T::zero() {
            return if self.p == two { T::one() } else { T::zero() };
        }
        xi.powf((self.p - two) / two) * ((self.p - T::one()) * g * g + self.reg) / xi
    }

    fn slopes(&self, u: &[T]) -> Vec<T> {
        u.windows(2).zip(&self.h).map(|(x, &h)| (x[1] - x[0]) / h).collect()
    }

    fn objective(&self, u: &[T]) -> T {
        let stored: T = self.slopes(u).iter().zip(&self.w).map(|(&g, &w)| w * self.energy_density(g)).sum();
        let load: T = u.iter().zip(&self.b).map(|(&x, &b)| x * b).sum();
        stored - load
    }

    /// Gradient with respect to the interior values (ends entries zero).
    fn gradient(&self, u: &[T]) -> Vec<T> {
        let n = u.len();
        let flux: Vec<T> =
            self.slopes(u).iter().zip(&self.w).zip(&self.h).map(|((&g, &w), &h)| w * self.first(g) / h).collect();
        let mut grad = vec![T::zero(); n];
        for i in 1..n - 1 {
            grad[i] = flux[i - 1] - flux[i] - self.b[i];
        }
        grad
    }

    /// Element stiffness `w_e H''(γ_e) / h_e²`, floored.
    fn stiffness(&self, u: &[T], floor: bool) -> Vec<T> {
        let mut k: Vec<T> = self
            .slopes(u)
            .iter()
            .zip(&self.w)
            .zip(&self.h)
            .map(|((&g, &w), &h)| w * self.second(g) / (h * h))
            .collect();
        if floor {
            let top = k.iter().fold(T::zero(), |m, &v| m.max(v));
            let min = lit::<T>(HESSIAN_FLOOR) * top;
            for v in &mut k {
                *v = v.max(min);
            }
        }
        k
    }

    fn load_scale(&self) -> T {
        let n = self.b.len();
        self.b[1..n - 1].iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Solves `K d = rhs` on the interior for the tridiagonal matrix assembled from element stiffnesses.
fn solve_tridiagonal<T: Scalar>(k: &[T], rhs: &[T]) -> Vec<T> {
    let n = rhs.len();
    let m = n - 2;
    let mut out = vec![T::zero(); n];
    if m == 0 {
        return out;
    }
    // interior unknown j ↔ node j+1
    let mut c = vec![T::zero(); m];
    let mut d = vec![T::zero(); m];
    for j in 0..m {
        let i = j + 1;
        let diag = k[i - 1] + k[i];
        let lower = -k[i - 1];
        let upper = -k[i];
        let (denom, dprev) = if j == 0 { (diag, T::zero()) } else { (diag - lower * c[j - 1], d[j - 1]) };
        c[j] = upper / denom;
        d[j] = (rhs[i] - lower * dprev) / denom;
    }
    out[m] = d[m - 1];
    for j in (0..m - 1).rev() {
        out[j + 1] = d[j] - c[j] * out[j + 2];
    }
    out
}

/// The discrete objective `J(u)` for nodal values with `u[0] = u[last] = 0`.
pub fn discrete_objective<T: Scalar>(spec: &ProblemSpec<T>, grid: &RadialGrid<T>, u: &[T]) -> Result<T> {
    if u.len() != grid.len() {
        return Err(Error::Profile(format!("{} values for {} nodes", u.len(), grid.len())));
    }
    Ok(Discretization::new(spec, grid)?.objective(u))
}

/// Damped Newton minimization of the discretized primal energy over continuous
/// piecewise-linear functions vanishing at both radii.
pub fn minimize_discrete_energy<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &RadialGrid<T>,
) -> Result<DiscreteEnergyState<T>> {
    spec.validate()?;
    if grid.first() != spec.r_inner || grid.last() != spec.r_outer {
        return Err(Error::InvalidGrid("grid must span [r_inner, r_outer] exactly".into()));
    }
    if grid.len() < 3 {
        return Err(Error::InvalidGrid("need at least one interior node".into()));
    }
    let disc = Discretization::new(spec, grid)?;
    let n = grid.len();
    // start from the p = 2 minimizer
    let unit: Vec<T> = disc.w.iter().zip(&disc.h).map(|(&w, &h)| w / (h * h)).collect();
    let mut u = solve_tridiagonal(&unit, &disc.b);
    let degenerate = spec.p > lit::<T>(2.0);
    let target = lit::<T>(GRADIENT_TOL) * disc.load_scale();
    let mut objective = disc.objective(&u);
    let mut history = vec![objective];
    let mut iterations = 0;
    loop {
        let grad = disc.gradient(&u);
        let gnorm = grad.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if gnorm <= target {
            return Ok(DiscreteEnergyState {
                grid: grid.clone(),
                u,
                objective,
                gradient_norm: gnorm,
                iterations,
                history,
            });
        }
        if iterations == MAX_NEWTON_ITERATIONS {
            return Err(Error::NewtonStalled {
                iterations,
                objective: to_f64(objective),
                gradient_norm: to_f64(gnorm),
            });
        }
        let k = disc.stiffness(&u, degenerate);
        let neg: Vec<T> = grad.iter().map(|&g| -g).collect();
        let step = solve_tridiagonal(&k, &neg);
        // a step at rounding level of u cannot move the iterate; the gradient is then at its noise floor
        let step_max = step.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let u_max = u.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if step_max <= lit::<T>(STEP_FLOOR) * T::epsilon() * u_max {
            return Ok(DiscreteEnergyState {
                grid: grid.clone(),
                u,
                objective,
                gradient_norm: gnorm,
                iterations,
                history,
            });
        }
        let slope: T = grad.iter().zip(&step).map(|(&g, &d)| g * d).sum();
        let slack = lit::<T>(64.0) * T::epsilon() * objective.abs().max(T::min_positive_value());
        let mut t = T::one();
        let accepted = loop {
            let trial: Vec<T> = u.iter().zip(&step).map(|(&x, &d)| x + t * d).collect();
            let value = disc.objective(&trial);
            if value <= objective + lit::<T>(ARMIJO) * t * slope + slack {
                break Some((trial, value));
            }
            t = t * lit::<T>(0.5);
            if t < T::epsilon() {
                break None;
            }
        };
        let Some((trial, value)) = accepted else {
            return Err(Error::NewtonStalled {
                iterations,
                objective: to_f64(objective),
                gradient_norm: to_f64(gnorm),
            });
        };
        // keep the record non-increasing: a step inside the rounding allowance is not an increase
        objective = value.min(objective);
        u = trial;
        u[0] = T::zero();
        u[n - 1] = T::zero();
        history.push(objective);
        iterations += 1;
    }
}

impl<T: Scalar> DiscreteEnergyState<T> {
    /// Nodal values with centered-difference slopes.
    pub fn grid_function(&self) -> GridFunction<T> {
        GridFunction::from_nodal(self.grid.clone(), self.u.clone())
    }

    /// Same columns as the analytic profile; `λ`, `F` and `|θ|` recomputed from centered slopes.
    pub fn write_csv<W: Write>(&self, spec: &ProblemSpec<T>, out: W) -> Result<()> {
        let r = self.grid.radii();
        let du = nodal_derivative(r, &self.u);
        let two = lit::<T>(2.0);
        let reg = spec.regularization();
        let lam: Vec<T> = du.iter().map(|&g| (g * g + reg).powf((spec.p - two) / two)).collect();
        let theta: Vec<T> = du.iter().zip(&lam).map(|(&g, &l)| g * l).collect();
        let f: Vec<T> = theta.iter().zip(r).map(|(&t, &x)| t / x).collect();
        let abs: Vec<T> = theta.iter().map(|t| t.abs()).collect();
        crate::io::write_profile_csv(out, r, &self.u, &du, &lam, &f, &abs)
    }
}

/// Classical radial solution of `-Δu = c` on the annulus with zero Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonSolution<T> {
    pub c: T,
    /// Coefficient of the harmonic part.
    pub a: T,
    r_inner: T,
    dim: usize,
}

/// `u(r) = c[(R1² - r²)/4 + A ln(r/R1)]` for `n = 2`, and
/// `u(r) = c[(R1² - r²)/(2n) + A(R1^{2-n} - r^{2-n})]` for `n ≥ 3`.
pub fn poisson_closed_form<T: Scalar>(spec: &ProblemSpec<T>) -> Result<PoissonSolution<T>> {
    spec.validate()?;
    if !spec.is_oracle_only() {
        return Err(Error::UnsupportedOracle(format!("closed form needs p = 2, got p = {}", spec.p)));
    }
    let SourceTerm::Constant { value: c } = spec.source else {
        return Err(Error::UnsupportedOracle("closed form needs a constant source".into()));
    };
    let (r1, r2) = (spec.r_inner, spec.r_outer);
    let n = spec.dim;
    let nt = lit::<T>(n as f64);
    let a = if n == 2 {
        (r2 * r2 - r1 * r1) / (lit::<T>(4.0) * (r2 / r1).ln())
    } else {
        let k = 2 - n as i32;
        (r2 * r2 - r1 * r1) / (lit::<T>(2.0) * nt * (r1.powi(k) - r2.powi(k)))
    };
    Ok(PoissonSolution { c, a, r_inner: r1, dim: n })
}

impl<T: Scalar> PoissonSolution<T> {
    pub fn eval(&self, r: T) -> T {
        let r1 = self.r_inner;
        let two = lit::<T>(2.0);
        if self.dim == 2 {
            self.c * ((r1 * r1 - r * r) / lit::<T>(4.0) + self.a * (r / r1).ln())
        } else {
            let k = 2 - self.dim as i32;
            let n = lit::<T>(self.dim as f64);
            self.c * ((r1 * r1 - r * r) / (two * n) + self.a * (r1.powi(k) - r.powi(k)))
        }
    }

    pub fn derivative(&self, r: T) -> T {
        let n = lit::<T>(self.dim as f64);
        // -r/n + A(n-2) r^{1-n}, with n-2 replaced by 1 and r^{1-n} by 1/r when n = 2
        let harmonic =
            if self.dim == 2 { self.a / r } else { self.a * (n - lit::<T>(2.0)) * r.powi(1 - self.dim as i32) };
        self.c * (-r / n + harmonic)
    }

    pub fn sample(&self, grid: &RadialGrid<T>) -> GridFunction<T> {
        let r = grid.radii();
        GridFunction {
            grid: grid.clone(),
            u: r.iter().map(|&x| self.eval(x)).collect(),
            du_dr: r.iter().map(|&x| self.derivative(x)).collect(),
        }
    }
}

/// Nodal values and slopes of a radial function.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T: Scalar> {
    pub grid: RadialGrid<T>,
    pub u: Vec<T>,
    pub du_dr: Vec<T>,
}

impl<T: Scalar> GridFunction<T> {
    /// Slopes from centered differences.
    pub fn from_nodal(grid: RadialGrid<T>, u: Vec<T>) -> Self {
        let du_dr = nodal_derivative(grid.radii(), &u);
        GridFunction { grid, u, du_dr }
    }

    /// Piecewise-linear interpolation of values and slopes onto `grid`.
    pub fn resample(&self, grid: &RadialGrid<T>) -> Self {
        let src = self.grid.radii();
        let lerp = |v: &[T], x: T| {
            let i = self.grid.interval(x);
            let t = ((x - src[i]) / (src[i + 1] - src[i])).max(T::zero()).min(T::one());
            v[i] + t * (v[i + 1] - v[i])
        };
        let r = grid.radii();
        GridFunction {
            grid: grid.clone(),
            u: r.iter().map(|&x| lerp(&self.u, x)).collect(),
            du_dr: r.iter().map(|&x| lerp(&self.du_dr, x)).collect(),
        }
    }
}

/// Distances between two radial functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldDistance<T> {
    pub sup: T,
    /// `(ω_{n-1} ∫ |u'_A - u'_B|^p r^{n-1} dr)^{1/p}` by the trapezoidal rule on the nodes.
    pub seminorm: T,
    /// Set when the grids differed and the coarser one was interpolated.
    pub interpolated: bool,
}

/// Sup-norm and `W^{1,p}` seminorm distance; differing grids are interpolated onto the finer one.
pub fn compare<T: Scalar>(a: &GridFunction<T>, b: &GridFunction<T>, spec: &ProblemSpec<T>) -> Result<FieldDistance<T>> {
    let (a, b, interpolated) = if a.grid.same_nodes(&b.grid) {
        (a.clone(), b.clone(), false)
    } else if a.grid.len() >= b.grid.len() {
        (a.clone(), b.resample(&a.grid), true)
    } else {
        (a.resample(&b.grid), b.clone(), true)
    };
    let r = a.grid.radii();
    let n = spec.dim as i32;
    let sup = a.u.iter().zip(&b.u).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()));
    let integral: T = a
        .grid
        .trapezoid_weights()
        .into_iter()
        .enumerate()
        .map(|(i, w)| w * r[i].powi(n - 1) * (a.du_dr[i] - b.du_dr[i]).abs().powf(spec.p))
        .sum();
    let seminorm = (spec.sphere_area()? * integral).powf(T::one() / spec.p);
    Ok(FieldDistance { sup, seminorm, interpolated })
}
