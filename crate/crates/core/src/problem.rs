//! Problem instances: annulus geometry, exponent, regularization and the
//! radial source term.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::QuadratureRule;
use crate::scalar::{from_usize, lit, to_f64, Scalar};

/// Number of equispaced radii used by the sign check, in addition to table knots.
pub const SIGN_SAMPLES: usize = 1000;

/// Cut-off `χ(p)`: 1 on `(1,2)`, 0 on `(2,∞)`.
pub fn chi<T: Scalar>(p: T) -> Result<T> {
    let two = lit::<T>(2.0);
    if !p.is_finite() || p <= T::one() || p == two {
        return Err(Error::InvalidExponent { p: to_f64(p) });
    }
    Ok(if p < two { T::one() } else { T::zero() })
}

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
///
/// Uses `ω(n) = 2π/(n-2) · ω(n-2)` seeded by `ω(2) = 2π`, `ω(3) = 4π`,
/// i.e. the integer/half-integer steps of `2π^{n/2}/Γ(n/2)`.
pub fn sphere_area<T: Scalar>(dim: usize) -> Result<T> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim });
    }
    let two_pi = lit::<T>(2.0) * T::PI();
    let (mut area, mut k) = if dim.is_multiple_of(2) { (two_pi, 2) } else { (lit::<T>(2.0) * two_pi, 3) };
    while k < dim {
        area = area * two_pi / from_usize::<T>(k);
        k += 2;
    }
    Ok(area)
}

/// Constant sign of a validated source term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn value<T: Scalar>(self) -> T {
        match self {
            Sign::Positive => T::one(),
            Sign::Negative => -T::one(),
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }
}

/// Radially symmetric source term `f(r)`.
///
/// JSON form: `{"kind":"constant","value":c}`,
/// `{"kind":"power","coefficient":c,"exponent":k}` (for `c·r^k`) or
/// `{"kind":"table","samples":[[r,f],...]}` (monotone cubic through the samples).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub enum SourceTerm<T: Scalar> {
    Constant { value: T },
    Power { coefficient: T, exponent: T },
    Table(MonotoneCubic<T>),
}

impl<T: Scalar> SourceTerm<T> {
    pub fn constant(value: T) -> Self {
        SourceTerm::Constant { value }
    }

    pub fn power(coefficient: T, exponent: T) -> Self {
        SourceTerm::Power { coefficient, exponent }
    }

    pub fn table(samples: Vec<(T, T)>) -> Result<Self> {
        Ok(SourceTerm::Table(MonotoneCubic::new(samples)?))
    }

    /// Tabulates `g` at `count` equispaced radii of `[a, b]`.
    pub fn tabulate(a: T, b: T, count: usize, g: impl Fn(T) -> T) -> Result<Self> {
        let grid = RadialGrid::uniform(a, b, count)?;
        Self::table(grid.radii().iter().map(|&r| (r, g(r))).collect())
    }

    pub fn eval(&self, r: T) -> T {
        match self {
            SourceTerm::Constant { value } => *value,
            SourceTerm::Power { coefficient, exponent } => *coefficient * r.powf(*exponent),
            SourceTerm::Table(table) => table.eval(r),
        }
    }

    /// The same source with the opposite sign.
    pub fn negated(&self) -> Self {
        match self {
            SourceTerm::Constant { value } => SourceTerm::Constant { value: -*value },
            SourceTerm::Power { coefficient, exponent } => {
                SourceTerm::Power { coefficient: -*coefficient, exponent: *exponent }
            }
            SourceTerm::Table(table) => SourceTerm::Table(table.negated()),
        }
    }

    /// Radial moment `∫_a^b f(ρ) ρ^{n-1} dρ`, signed in the orientation of `[a, b]`.
    ///
    /// Closed form for constant and power sources; tables are integrated
    /// piece by piece with a rule exact for the cubic times the weight.
    pub fn moment(&self, a: T, b: T, dim: usize) -> T {
        let n = from_usize::<T>(dim);
        match self {
            SourceTerm::Constant { value } => *value * (b.powf(n) - a.powf(n)) / n,
            SourceTerm::Power { coefficient, exponent } => {
                let m = n + *exponent;
                if m.abs() <= T::epsilon() {
                    *coefficient * (b / a).ln()
                } else {
                    *coefficient * (b.powf(m) - a.powf(m)) / m
                }
            }
            SourceTerm::Table(table) => table.moment(a, b, dim),
        }
    }

    /// Knots of a tabulated source; empty for closed-form kinds.
    pub fn knots(&self) -> Vec<T> {
        match self {
            SourceTerm::Table(table) => table.samples.iter().map(|s| s.0).collect(),
            _ => Vec::new(),
        }
    }

    fn check_parameters(&self) -> Result<()> {
        match self {
            SourceTerm::Constant { value } if !value.is_finite() => {
                Err(Error::InvalidSource("non-finite constant".into()))
            }
            SourceTerm::Power { coefficient, exponent } if !coefficient.is_finite() || !exponent.is_finite() => {
                Err(Error::InvalidSource("non-finite power parameters".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson slopes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableSamples<T>", into = "TableSamples<T>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct MonotoneCubic<T: Scalar> {
    samples: Vec<(T, T)>,
    slopes: Vec<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct TableSamples<T: Scalar> {
    samples: Vec<(T, T)>,
}

impl<T: Scalar> TryFrom<TableSamples<T>> for MonotoneCubic<T> {
    type Error = Error;
    fn try_from(t: TableSamples<T>) -> Result<Self> {
        MonotoneCubic::new(t.samples)
    }
}

impl<T: Scalar> From<MonotoneCubic<T>> for TableSamples<T> {
    fn from(m: MonotoneCubic<T>) -> Self {
        TableSamples { samples: m.samples }
    }
}

impl<T: Scalar> MonotoneCubic<T> {
    pub fn new(samples: Vec<(T, T)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidSource("table needs at least two samples".into()));
        }
        if samples.iter().any(|(r, f)| !r.is_finite() || !f.is_finite()) {
            return Err(Error::InvalidSource("non-finite table sample".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidSource("table radii must be strictly increasing".into()));
        }
        let slopes = pchip_slopes(&samples);
        Ok(MonotoneCubic { samples, slopes })
    }

    pub fn samples(&self) -> &[(T, T)] {
        &self.samples
    }

    fn negated(&self) -> Self {
        MonotoneCubic {
            samples: self.samples.iter().map(|&(r, f)| (r, -f)).collect(),
            slopes: self.slopes.iter().map(|&d| -d).collect(),
        }
    }

    fn piece(&self, r: T) -> usize {
        let last = self.samples.len() - 2;
        match self.samples.binary_search_by(|s| s.0.partial_cmp(&r).expect("finite radius")) {
            Ok(i) => i.min(last),
            Err(0) => 0,
            Err(i) => (i - 1).min(last),
        }
    }

    /// Evaluates the interpolant; constant extension outside the knot range.
    pub fn eval(&self, r: T) -> T {
        let first = self.samples[0];
        let last = self.samples[self.samples.len() - 1];
        if r <= first.0 {
            return first.1;
        }
        if r >= last.0 {
            return last.1;
        }
        let k = self.piece(r);
        let (x0, y0) = self.samples[k];
        let (x1, y1) = self.samples[k + 1];
        let h = x1 - x0;
        let t = (r - x0) / h;
        let one = T::one();
        let two = lit::<T>(2.0);
        let three = lit::<T>(3.0);
        let h00 = (one + two * t) * (one - t) * (one - t);
        let h10 = t * (one - t) * (one - t);
        let h01 = t * t * (three - two * t);
        let h11 = t * t * (t - one);
        h00 * y0 + h10 * h * self.slopes[k] + h01 * y1 + h11 * h * self.slopes[k + 1]
    }

    fn moment(&self, a: T, b: T, dim: usize) -> T {
        if a > b {
            return -self.moment(b, a, dim);
        }
        // cubic × ρ^{n-1} has degree n+2
        let order = ((dim + 4) / 2).min(10);
        let rule = QuadratureRule::new(order, 1 + dim / 16).expect("valid order");
        let weight = |r: T| self.eval(r) * r.powi(dim as i32 - 1);
        let mut breaks = vec![a];
        breaks.extend(self.samples.iter().map(|s| s.0).filter(|&x| x > a && x < b));
        breaks.push(b);
        breaks.windows(2).map(|w| rule.apply(&weight, w[0], w[1])).sum()
    }
}

fn pchip_slopes<T: Scalar>(samples: &[(T, T)]) -> Vec<T> {
    let n = samples.len();
    let h: Vec<T> = samples.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let delta: Vec<T> = samples.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let zero = T::zero();
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let mut d = vec![zero; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] <= zero {
            d[k] = zero;
        } else {
            let w1 = two * h[k] + h[k - 1];
            let w2 = h[k] + two * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: T, h1: T, m0: T, m1: T| -> T {
        let d = ((two * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if d.signum() != m0.signum() {
            zero
        } else if m0.signum() != m1.signum() && d.abs() > three * m0.abs() {
            three * m0
        } else {
            d
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// A Dirichlet problem on the annulus `R1 < |x| < R2` in `R^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct ProblemSpec<T: Scalar> {
    pub r_inner: T,
    pub r_outer: T,
    pub dim: usize,
    pub p: T,
    pub epsilon: T,
    pub source: SourceTerm<T>,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn new(r_inner: T, r_outer: T, dim: usize, p: T, epsilon: T, source: SourceTerm<T>) -> Self {
        ProblemSpec { r_inner, r_outer, dim, p, epsilon, source }
    }

    /// `p = 2` passes validation but only the oracle consumes it.
    pub fn is_oracle_only(&self) -> bool {
        self.p == lit::<T>(2.0)
    }

    /// `χ(p)`; errors for `p = 2`.
    pub fn chi(&self) -> Result<T> {
        chi(self.p)
    }

    /// Regularization actually entering the energy, `χ(p) ε²` (zero for `p ≥ 2`).
    pub fn regularization(&self) -> T {
        if self.p < lit::<T>(2.0) {
            self.epsilon * self.epsilon
        } else {
            T::zero()
        }
    }

    /// Surface measure `ω_{n-1}`.
    pub fn sphere_area(&self) -> Result<T> {
        sphere_area(self.dim)
    }

    /// Checks every invariant and returns the sign of the source.
    pub fn validate(&self) -> Result<Sign> {
        if self.dim < 2 {
            return Err(Error::InvalidDimension { dim: self.dim });
        }
        if !self.r_inner.is_finite() || !self.r_outer.is_finite() {
            return Err(Error::InvalidGeometry { r_inner: to_f64(self.r_inner), r_outer: to_f64(self.r_outer) });
        }
        if self.r_inner <= T::zero() {
            return Err(Error::DegenerateAnnulus { r_inner: to_f64(self.r_inner) });
        }
        if self.r_outer <= self.r_inner {
            return Err(Error::InvalidGeometry { r_inner: to_f64(self.r_inner), r_outer: to_f64(self.r_outer) });
        }
        if !self.p.is_finite() || self.p <= T::one() {
            return Err(Error::InvalidExponent { p: to_f64(self.p) });
        }
        if !self.epsilon.is_finite() || self.epsilon < T::zero() {
            return Err(Error::InvalidRegularization { epsilon: to_f64(self.epsilon) });
        }
        if self.p < lit::<T>(2.0) && self.epsilon == T::zero() {
            return Err(Error::MissingRegularization { p: to_f64(self.p) });
        }
        self.source.check_parameters()?;
        if let SourceTerm::Table(table) = &self.source {
            let s = table.samples();
            if s[0].0 > self.r_inner || s[s.len() - 1].0 < self.r_outer {
                return Err(Error::InvalidSource("table does not cover [r_inner, r_outer]".into()));
            }
        }
        self.source_sign()
    }

    fn source_sign(&self) -> Result<Sign> {
        let grid = RadialGrid::uniform(self.r_inner, self.r_outer, SIGN_SAMPLES)?;
        let knots = self.source.knots();
        let inside = knots.into_iter().filter(|&r| r >= self.r_inner && r <= self.r_outer);
        let mut positive = None;
        let mut negative = None;
        let mut zero = None;
        for r in grid.radii().iter().copied().chain(inside) {
            let f = self.source.eval(r);
            if !f.is_finite() {
                return Err(Error::NumericalEvaluation { x: to_f64(r), value: to_f64(f) });
            }
            if f == T::zero() {
                zero.get_or_insert(r);
            } else if f > T::zero() {
                positive.get_or_insert(r);
            } else {
                negative.get_or_insert(r);
            }
        }
        match (positive, negative) {
            (Some(rp), Some(rn)) => Err(Error::MixedSignSource { r_positive: to_f64(rp), r_negative: to_f64(rn) }),
            _ if zero.is_some() => Err(Error::VanishingSource { r: to_f64(zero.unwrap()) }),
            (Some(_), None) => Ok(Sign::Positive),
            _ => Ok(Sign::Negative),
        }
    }

    /// Same geometry and exponent with `f → -f`.
    pub fn mirrored(&self) -> Self {
        ProblemSpec { source: self.source.negated(), ..self.clone() }
    }

    pub fn with_epsilon(&self, epsilon: T) -> Self {
        ProblemSpec { epsilon, ..self.clone() }
    }

    pub fn with_p(&self, p: T) -> Self {
        ProblemSpec { p, ..self.clone() }
    }
}

/// Ordered radii covering `[R1, R2]` with exact endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T: Scalar> {
    radii: Vec<T>,
}

impl<T: Scalar> RadialGrid<T> {
    pub fn new(radii: Vec<T>) -> Result<Self> {
        if radii.len() < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {}", radii.len())));
        }
        if radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidGrid("non-finite radius".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("radii must be strictly increasing".into()));
        }
        Ok(RadialGrid { radii })
    }

    pub fn uniform(a: T, b: T, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {count}")));
        }
        let m = from_usize::<T>(count - 1);
        let mut radii: Vec<T> = (0..count).map(|i| a + (b - a) * from_usize::<T>(i) / m).collect();
        radii[count - 1] = b;
        Self::new(radii)
    }

    /// Chebyshev–Lobatto nodes mapped to `[a, b]`, clustered at both ends.
    pub fn chebyshev(a: T, b: T, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {count}")));
        }
        let m = from_usize::<T>(count - 1);
        let mid = (a + b) / lit::<T>(2.0);
        let half = (b - a) / lit::<T>(2.0);
        let mut radii: Vec<T> = (0..count).map(|i| mid - half * (T::PI() * from_usize::<T>(i) / m).cos()).collect();
        radii[0] = a;
        radii[count - 1] = b;
        Self::new(radii)
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn first(&self) -> T {
        self.radii[0]
    }

    pub fn last(&self) -> T {
        self.radii[self.radii.len() - 1]
    }

    /// Largest interval width.
    pub fn max_spacing(&self) -> T {
        self.radii.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max)
    }

    /// Index `i` of the interval `[radii[i], radii[i+1]]` containing `r` (clamped).
    pub fn interval(&self, r: T) -> usize {
        let last = self.radii.len() - 2;
        match self.radii.binary_search_by(|x| x.partial_cmp(&r).expect("finite radius")) {
            Ok(i) => i.min(last),
            Err(0) => 0,
            Err(i) => (i - 1).min(last),
        }
    }

    /// Trapezoidal weights for plain node sums.
    pub fn trapezoid_weights(&self) -> Vec<T> {
        let n = self.radii.len();
        let half = lit::<T>(0.5);
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.radii[i] - self.radii[i - 1] } else { T::zero() };
                let right = if i + 1 < n { self.radii[i + 1] - self.radii[i] } else { T::zero() };
                half * (left + right)
            })
            .collect()
    }

    pub fn same_nodes(&self, other: &Self) -> bool {
        self.radii == other.radii
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn spec(source: SourceTerm<f64>) -> ProblemSpec<f64> {
        ProblemSpec::new(1.0, 2.0, 2, 3.0, 0.0, source)
    }

    #[test]
    fn chi_cutoff() {
        assert_eq!(chi(1.5).unwrap(), 1.0);
        assert_eq!(chi(3.0).unwrap(), 0.0);
        assert_eq!(chi(2.0).unwrap_err().kind(), "invalid-exponent");
        assert!(chi(1.0).is_err());
        assert!(chi(f64::NAN).is_err());
        assert!(chi(f64::INFINITY).is_err());
    }

    #[test]
    fn sphere_area_closed_forms() {
        assert_relative_eq!(sphere_area::<f64>(2).unwrap(), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area::<f64>(3).unwrap(), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area::<f64>(4).unwrap(), 2.0 * PI * PI, max_relative = 1e-15);
        assert_eq!(sphere_area::<f64>(1).unwrap_err().kind(), "invalid-dimension");
    }

    #[test]
    fn sphere_area_matches_spherical_measure() {
        // ω(n) = ω(n-1) ∫_0^π sin^{n-2}θ dθ
        let rule = QuadratureRule::new(10, 64).unwrap();
        let mut area = 2.0 * PI;
        for n in 3..=5 {
            let slice = rule.apply(&|t: f64| t.sin().powi(n as i32 - 2), 0.0, PI);
            area *= slice;
            let closed: f64 = sphere_area(n).unwrap();
            assert!((closed - area).abs() <= 1e-12 * closed, "n = {n}");
        }
    }

    #[test]
    fn validate_examples() {
        assert_eq!(spec(SourceTerm::constant(1.0)).validate().unwrap(), Sign::Positive);
        assert_eq!(spec(SourceTerm::constant(-2.0)).validate().unwrap(), Sign::Negative);
        let ramp = SourceTerm::tabulate(1.0, 2.0, 11, |r| r - 1.5).unwrap();
        assert_eq!(spec(ramp).validate().unwrap_err().kind(), "mixed-sign-source");
    }

    #[test]
    fn validate_errors() {
        let mut s = spec(SourceTerm::constant(1.0));
        s.r_inner = 0.0;
        assert_eq!(s.validate().unwrap_err().kind(), "degenerate-annulus");
        let s = spec(SourceTerm::constant(1.0)).with_p(1.5);
        assert_eq!(s.validate().unwrap_err().kind(), "missing-regularization");
        let s = spec(SourceTerm::constant(0.0));
        assert_eq!(s.validate().unwrap_err().kind(), "vanishing-source");
        let s = spec(SourceTerm::tabulate(1.2, 2.0, 5, |_| 1.0).unwrap());
        assert_eq!(s.validate().unwrap_err().kind(), "invalid-source");
        let mut s = spec(SourceTerm::constant(1.0));
        s.dim = 1;
        assert_eq!(s.validate().unwrap_err().kind(), "invalid-dimension");
        assert!(spec(SourceTerm::constant(1.0)).with_p(2.0).validate().is_ok());
        assert!(spec(SourceTerm::constant(1.0)).with_p(2.0).is_oracle_only());
    }

    #[test]
    fn spec_json_field_names() {
        let s = ProblemSpec::new(1.0, 2.0, 3, 1.5, 0.1, SourceTerm::power(2.0, 1.0));
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["r_inner"], 1.0);
        assert_eq!(v["source"]["kind"], "power");
        assert_eq!(v["source"]["exponent"], 1.0);
        let t = ProblemSpec::new(1.0, 2.0, 2, 3.0, 0.0, SourceTerm::table(vec![(1.0, 1.0), (2.0, 3.0)]).unwrap());
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.contains(r#""source":{"kind":"table","samples":[[1.0,1.0],[2.0,3.0]]}"#));
        let back: ProblemSpec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
        let bad =
            r#"{"r_inner":1,"r_outer":2,"dim":2,"p":3,"epsilon":0,"source":{"kind":"table","samples":[[2,1],[1,1]]}}"#;
        assert!(serde_json::from_str::<ProblemSpec<f64>>(bad).is_err());
    }

    #[test]
    fn monotone_cubic_preserves_monotone_data() {
        let t = MonotoneCubic::new(vec![(0.0, 0.0), (1.0, 0.1), (2.0, 5.0), (3.0, 5.1)]).unwrap();
        let mut prev = t.eval(0.0);
        for i in 1..=300 {
            let v = t.eval(i as f64 / 100.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert_eq!(t.eval(2.0), 5.0);
    }

    #[test]
    fn moments_closed_form() {
        let c = SourceTerm::constant(1.0);
        assert_relative_eq!(c.moment(1.0, 2.0, 2), 1.5, max_relative = 1e-15);
        let pw = SourceTerm::power(1.0, -2.0);
        assert_relative_eq!(pw.moment(1.0, 2.0, 2), 2f64.ln(), max_relative = 1e-15);
        // a cubic table reproduces quadratic data exactly only approximately; a linear one exactly
        let lin = SourceTerm::table(vec![(1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_relative_eq!(lin.moment(1.0, 2.0, 3), (16.0 - 1.0) / 4.0, max_relative = 1e-14);
        assert_relative_eq!(lin.moment(2.0, 1.0, 3), -(16.0 - 1.0) / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn grids() {
        let g = RadialGrid::chebyshev(1.0, 2.0, 5).unwrap();
        assert_eq!(g.first(), 1.0);
        assert_eq!(g.last(), 2.0);
        assert_relative_eq!(g.radii()[2], 1.5, epsilon = 1e-15);
        assert!(RadialGrid::new(vec![1.0, 1.0]).is_err());
        assert!(RadialGrid::<f64>::uniform(1.0, 2.0, 1).is_err());
        let u = RadialGrid::uniform(1.0, 2.0, 3).unwrap();
        assert_eq!(u.interval(1.7), 1);
        assert_eq!(u.interval(2.0), 1);
        assert_eq!(u.interval(1.0), 0);
        assert_relative_eq!(u.trapezoid_weights().iter().sum::<f64>(), 1.0);
    }

    fn expected_valid(r1: f64, r2: f64, dim: usize, p: f64, eps: f64, c: f64) -> bool {
        dim >= 2 && r1 > 0.0 && r2 > r1 && p > 1.0 && eps >= 0.0 && !(p < 2.0 && eps == 0.0) && c != 0.0
    }

    proptest! {
        #[test]
        fn validate_accepts_exactly_valid_specs(
            r1 in -0.5f64..2.0,
            width in -0.5f64..2.0,
            dim in 0usize..6,
            p in prop_oneof![0.5f64..4.0, Just(2.0), Just(1.0)],
            eps in prop_oneof![-0.1f64..0.3, Just(0.0)],
            c in prop_oneof![-2.0f64..2.0, Just(0.0)],
            power in any::<bool>(),
        ) {
            let source = if power { SourceTerm::power(c, 1.5) } else { SourceTerm::constant(c) };
            let s = ProblemSpec::new(r1, r1 + width, dim, p, eps, source);
            let ok = s.validate();
            prop_assert_eq!(ok.is_ok(), expected_valid(r1, r1 + width, dim, p, eps, c));
            if let Ok(sign) = ok {
                prop_assert_eq!(sign == Sign::Positive, c > 0.0);
            }
        }

        #[test]
        fn chi_constant_on_each_branch(a in 1.0001f64..1.9999, b in 2.0001f64..50.0) {
            prop_assert_eq!(chi(a).unwrap(), 1.0);
            prop_assert_eq!(chi(b).unwrap(), 0.0);
        }
    }
}
