//! Composite Gauss–Legendre quadrature and bracketed root finding for
//! strictly monotone scalar functions.

use crate::error::{Error, Result};
use crate::problem::RadialGrid;
use crate::scalar::{from_usize, lit, to_f64, Scalar};

/// Iteration cap of [`solve_monotone`].
pub const MAX_ROOT_ITERATIONS: usize = 200;
/// Doubling cap of [`expand_bracket`].
pub const MAX_EXPANSION_STEPS: usize = 64;

/// Highest Gauss–Legendre order available.
pub const MAX_GL_ORDER: usize = 10;

/// Gauss–Legendre `(node, weight)` pairs on `[-1, 1]` for orders 1 through 10.
#[allow(clippy::excessive_precision)]
const GAUSS_LEGENDRE: [&[(f64, f64)]; MAX_GL_ORDER] = [
    &[(0.0, 2.0)],
    &[(-0.577350269189625764509, 1.0), (0.577350269189625764509, 1.0)],
    &[
        (-0.774596669241483377036, 0.555555555555555555556),
        (0.0, 0.888888888888888888889),
        (0.774596669241483377036, 0.555555555555555555556),
    ],
    &[
        (-0.861136311594052575224, 0.347854845137453857373),
        (-0.339981043584856264803, 0.652145154862546142627),
        (0.339981043584856264803, 0.652145154862546142627),
        (0.861136311594052575224, 0.347854845137453857373),
    ],
    &[
        (-0.906179845938663992798, 0.236926885056189087514),
        (-0.538469310105683091036, 0.478628670499366468041),
        (0.0, 0.568888888888888888889),
        (0.538469310105683091036, 0.478628670499366468041),
        (0.906179845938663992798, 0.236926885056189087514),
    ],
    &[
        (-0.932469514203152027812, 0.17132449237917034504),
        (-0.661209386466264513661, 0.36076157304813860757),
        (-0.238619186083196908631, 0.46791393457269104739),
        (0.238619186083196908631, 0.46791393457269104739),
        (0.661209386466264513661, 0.36076157304813860757),
        (0.932469514203152027812, 0.17132449237917034504),
    ],
    &[
        (-0.949107912342758524526, 0.129484966168869693271),
        (-0.741531185599394439864, 0.279705391489276667901),
        (-0.405845151377397166907, 0.38183005050511894495),
        (0.0, 0.417959183673469387755),
        (0.405845151377397166907, 0.38183005050511894495),
        (0.741531185599394439864, 0.279705391489276667901),
        (0.949107912342758524526, 0.129484966168869693271),
    ],
    &[
        (-0.960289856497536231684, 0.101228536290376259153),
        (-0.796666477413626739592, 0.222381034453374470544),
        (-0.525532409916328985818, 0.313706645877887287338),
        (-0.183434642495649804939, 0.362683783378361982965),
        (0.183434642495649804939, 0.362683783378361982965),
        (0.525532409916328985818, 0.313706645877887287338),
        (0.796666477413626739592, 0.222381034453374470544),
        (0.960289856497536231684, 0.101228536290376259153),
    ],
    &[
        (-0.968160239507626089836, 0.0812743883615744119719),
        (-0.836031107326635794299, 0.180648160694857404058),
        (-0.613371432700590397309, 0.260610696402935462319),
        (-0.324253423403808929039, 0.312347077040002840069),
        (0.0, 0.330239355001259763165),
        (0.324253423403808929039, 0.312347077040002840069),
        (0.613371432700590397309, 0.260610696402935462319),
        (0.836031107326635794299, 0.180648160694857404058),
        (0.968160239507626089836, 0.0812743883615744119719),
    ],
    &[
        (-0.973906528517171720078, 0.0666713443086881375936),
        (-0.865063366688984510732, 0.149451349150580593146),
        (-0.679409568299024406234, 0.219086362515982043996),
        (-0.433395394129247190799, 0.269266719309996355091),
        (-0.148874338981631210885, 0.295524224714752870174),
        (0.148874338981631210885, 0.295524224714752870174),
        (0.433395394129247190799, 0.269266719309996355091),
        (0.679409568299024406234, 0.219086362515982043996),
        (0.865063366688984510732, 0.149451349150580593146),
        (0.973906528517171720078, 0.0666713443086881375936),
    ],
];

/// Composite Gauss–Legendre rule: `order` points on each of `panels` equal panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureRule {
    order: usize,
    panels: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule { order: 5, panels: 1 }
    }
}

impl QuadratureRule {
    pub fn new(order: usize, panels: usize) -> Result<Self> {
        if !(1..=GAUSS_LEGENDRE.len()).contains(&order) || panels == 0 {
            return Err(Error::InvalidQuadrature { order, panels });
        }
        Ok(QuadratureRule { order, panels })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn with_panels(self, panels: usize) -> Result<Self> {
        Self::new(self.order, panels)
    }

    /// Highest polynomial degree integrated exactly on each panel.
    pub fn exact_degree(&self) -> usize {
        2 * self.order - 1
    }

    /// Nodes and weights of one panel mapped onto `[a, b]`.
    pub fn panel_points<T: Scalar>(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) / lit::<T>(2.0);
        let mid = (a + b) / lit::<T>(2.0);
        GAUSS_LEGENDRE[self.order - 1].iter().map(move |&(x, w)| (mid + half * lit::<T>(x), half * lit::<T>(w)))
    }

    /// Nodes and weights of all panels on `[a, b]`, in increasing order of `t ∈ [0,1]`.
    pub fn points<T: Scalar>(&self, a: T, b: T) -> Vec<(T, T)> {
        let m = from_usize::<T>(self.panels);
        (0..self.panels)
            .flat_map(|k| {
                let lo = a + (b - a) * from_usize::<T>(k) / m;
                let hi = if k + 1 == self.panels { b } else { a + (b - a) * from_usize::<T>(k + 1) / m };
                self.panel_points(lo, hi).collect::<Vec<_>>()
            })
            .collect()
    }

    /// Unchecked signed integral of `g` over `[a, b]`.
    pub fn apply<T: Scalar>(&self, g: &impl Fn(T) -> T, a: T, b: T) -> T {
        self.points(a, b).into_iter().map(|(x, w)| w * g(x)).sum()
    }

    /// Signed integral of a fallible integrand; non-finite samples are errors.
    pub fn try_apply<T: Scalar>(&self, g: &mut impl FnMut(T) -> Result<T>, a: T, b: T) -> Result<T> {
        let mut total = T::zero();
        for (x, w) in self.points(a, b) {
            let v = g(x)?;
            if !v.is_finite() {
                return Err(Error::NumericalEvaluation { x: to_f64(x), value: to_f64(v) });
            }
            total = total + w * v;
        }
        Ok(total)
    }
}

/// Signed integral `∫_a^b g`, antisymmetric in `(a, b)`.
pub fn integrate<T: Scalar>(g: impl Fn(T) -> T, a: T, b: T, rule: &QuadratureRule) -> Result<T> {
    rule.try_apply(&mut |x| Ok(g(x)), a, b)
}

/// Fallible variant of [`integrate`].
pub fn try_integrate<T: Scalar>(mut g: impl FnMut(T) -> Result<T>, a: T, b: T, rule: &QuadratureRule) -> Result<T> {
    rule.try_apply(&mut g, a, b)
}

/// Integral of `g` over `[a, b]` with panels graded geometrically toward
/// `focus` (which must be `a` or `b`), for integrands with an endpoint
/// singularity such as `|x - focus|^α`.
///
/// The piece nearest the focus has width `|b - a|·2^{-levels}`; each
/// geometric piece is integrated with `rule`.
pub fn integrate_graded<T: Scalar>(
    g: &mut impl FnMut(T) -> Result<T>,
    a: T,
    b: T,
    focus_at_b: bool,
    levels: usize,
    rule: &QuadratureRule,
) -> Result<T> {
    let (near, far) = if focus_at_b { (b, a) } else { (a, b) };
    let half = lit::<T>(0.5);
    let mut total = T::zero();
    let mut outer = far;
    let mut width = far - near;
    for _ in 0..levels {
        width = width * half;
        let inner = near + width;
        total = total + rule.try_apply(g, inner, outer)?;
        outer = inner;
    }
    total = total + rule.try_apply(g, near, outer)?;
    // pieces run from `near` side to `far` side
    Ok(if focus_at_b { -total } else { total })
}

/// Nodes and weights of [`integrate_graded`] on `a < b`, in increasing order.
pub fn graded_points<T: Scalar>(a: T, b: T, focus_at_b: bool, levels: usize, rule: &QuadratureRule) -> Vec<(T, T)> {
    let half = lit::<T>(0.5);
    let mut cuts = Vec::with_capacity(levels + 2);
    let width = b - a;
    cuts.push(T::zero());
    let mut w = width;
    for _ in 0..levels {
        w = w * half;
        cuts.push(w);
    }
    cuts.push(width);
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() * rule.order * rule.panels);
    for c in cuts.windows(2) {
        let (lo, hi) = if focus_at_b { (b - c[1], b - c[0]) } else { (a + c[0], a + c[1]) };
        out.extend(rule.points(lo, hi));
    }
    out.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
    out
}

/// Running integral `value[i] = ∫_{radii[0]}^{radii[i]} g`, with `value[0] = 0`.
pub fn cumulative_integral<T: Scalar>(
    g: impl Fn(T) -> T,
    grid: &RadialGrid<T>,
    rule: &QuadratureRule,
) -> Result<Vec<T>> {
    try_cumulative_integral(|x| Ok(g(x)), grid, rule)
}

/// Fallible variant of [`cumulative_integral`].
pub fn try_cumulative_integral<T: Scalar>(
    mut g: impl FnMut(T) -> Result<T>,
    grid: &RadialGrid<T>,
    rule: &QuadratureRule,
) -> Result<Vec<T>> {
    let radii = grid.radii();
    let mut out = Vec::with_capacity(radii.len());
    let mut acc = T::zero();
    out.push(acc);
    for w in radii.windows(2) {
        acc = acc + rule.try_apply(&mut g, w[0], w[1])?;
        out.push(acc);
    }
    Ok(out)
}

/// Three-point derivative of nodal data at interior node `i`, second order on nonuniform grids.
pub fn centered_derivative<T: Scalar>(r: &[T], v: &[T], i: usize) -> T {
    let h1 = r[i] - r[i - 1];
    let h2 = r[i + 1] - r[i];
    (v[i + 1] * h1 * h1 - v[i - 1] * h2 * h2 + v[i] * (h2 * h2 - h1 * h1)) / (h1 * h2 * (h1 + h2))
}

/// Derivative of nodal data: centered in the interior, one-sided at the ends.
pub fn nodal_derivative<T: Scalar>(r: &[T], v: &[T]) -> Vec<T> {
    let n = r.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (v[1] - v[0]) / (r[1] - r[0])
            } else if i == n - 1 {
                (v[n - 1] - v[n - 2]) / (r[n - 1] - r[n - 2])
            } else {
                centered_derivative(r, v, i)
            }
        })
        .collect()
}

/// Direction of a strictly monotone function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

impl Monotonicity {
    fn factor<T: Scalar>(self) -> T {
        match self {
            Monotonicity::Increasing => T::one(),
            Monotonicity::Decreasing => -T::one(),
        }
    }
}

/// Interval `[lo, hi]` over which a function changes sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootBracket<T> {
    pub lo: T,
    pub hi: T,
    pub f_lo: T,
    pub f_hi: T,
}

impl<T: Scalar> RootBracket<T> {
    /// Evaluates `h` at both ends and checks the sign condition.
    pub fn new(h: &mut impl FnMut(T) -> Result<T>, lo: T, hi: T) -> Result<Self> {
        let b = RootBracket { lo, hi, f_lo: h(lo)?, f_hi: h(hi)? };
        b.check()?;
        Ok(b)
    }

    pub fn check(&self) -> Result<()> {
        let finite = [self.lo, self.hi, self.f_lo, self.f_hi].iter().all(|v| v.is_finite());
        if !finite || self.lo >= self.hi || self.f_lo * self.f_hi > T::zero() {
            return Err(Error::InvalidBracket {
                lo: to_f64(self.lo),
                hi: to_f64(self.hi),
                f_lo: to_f64(self.f_lo),
                f_hi: to_f64(self.f_hi),
            });
        }
        Ok(())
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }
}

/// Root of a strictly monotone function inside `bracket`.
///
/// Each step tries a secant (false-position) point through the bracket
/// ends and bisects instead whenever that point leaves the bracket or the
/// previous step failed to halve it. Returns as soon as `|h(x)| ≤ tol_f`,
/// or the bracket end with the smaller residual once the width is at most
/// `tol_x`.
pub fn solve_monotone<T: Scalar>(h: impl Fn(T) -> T, bracket: RootBracket<T>, tol_x: T, tol_f: T) -> Result<T> {
    try_solve_monotone(|x| Ok(h(x)), bracket, tol_x, tol_f)
}

/// Fallible variant of [`solve_monotone`].
pub fn try_solve_monotone<T: Scalar>(
    mut h: impl FnMut(T) -> Result<T>,
    bracket: RootBracket<T>,
    tol_x: T,
    tol_f: T,
) -> Result<T> {
    bracket.check()?;
    let RootBracket { lo: mut a, hi: mut b, f_lo: mut fa, f_hi: mut fb } = bracket;
    let zero = T::zero();
    let half = lit::<T>(0.5);
    if fa.abs() <= tol_f || fa == zero {
        return Ok(a);
    }
    if fb.abs() <= tol_f || fb == zero {
        return Ok(b);
    }
    let mut force_bisect = false;
    for _ in 0..MAX_ROOT_ITERATIONS {
        let width = b - a;
        if width <= tol_x {
            return Ok(if fa.abs() <= fb.abs() { a } else { b });
        }
        let secant = b - fb * (b - a) / (fb - fa);
        let x = if force_bisect || !(secant > a && secant < b) { a + width * half } else { secant };
        if !(x > a && x < b) {
            // bracket is down to adjacent floating-point numbers
            return Ok(if fa.abs() <= fb.abs() { a } else { b });
        }
        let fx = h(x)?;
        if !fx.is_finite() {
            return Err(Error::NumericalEvaluation { x: to_f64(x), value: to_f64(fx) });
        }
        if fx.abs() <= tol_f || fx == zero {
            return Ok(x);
        }
        if (fx > zero) == (fa > zero) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        force_bisect = b - a > width * half;
    }
    Err(Error::Convergence { what: "monotone root solve", iterations: MAX_ROOT_ITERATIONS })
}

/// Finds a sign-change bracket on `(0, ∞)` by doubling or halving from `seed`.
pub fn expand_bracket<T: Scalar>(h: impl Fn(T) -> T, seed: T, direction: Monotonicity) -> Result<RootBracket<T>> {
    try_expand_bracket(|x| Ok(h(x)), seed, direction)
}

/// Fallible variant of [`expand_bracket`].
pub fn try_expand_bracket<T: Scalar>(
    mut h: impl FnMut(T) -> Result<T>,
    seed: T,
    direction: Monotonicity,
) -> Result<RootBracket<T>> {
    if !(seed > T::zero()) || !seed.is_finite() {
        return Err(Error::Domain { quantity: "bracket seed", value: to_f64(seed) });
    }
    let s = direction.factor::<T>();
    let two = lit::<T>(2.0);
    let zero = T::zero();
    let mut x = seed;
    let mut hx = h(x)?;
    let not_found = Error::BracketNotFound { seed: to_f64(seed), steps: MAX_EXPANSION_STEPS };
    if s * hx <= zero {
        for _ in 0..MAX_EXPANSION_STEPS {
            let next = x * two;
            let hn = h(next)?;
            if s * hn >= zero {
                return Ok(RootBracket { lo: x, hi: next, f_lo: hx, f_hi: hn });
            }
            x = next;
            hx = hn;
        }
    } else {
        for _ in 0..MAX_EXPANSION_STEPS {
            let next = x / two;
            let hn = h(next)?;
            if s * hn <= zero {
                return Ok(RootBracket { lo: next, hi: x, f_lo: hn, f_hi: hx });
            }
            x = next;
            hx = hn;
        }
    }
    Err(not_found)
}
