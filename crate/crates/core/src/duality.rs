//! Scalar algebra of the canonical dual transformation.
//!
//! With the geometric map `ξ = |∇u|² + χ(p)ε²` and canonical energy
//! `Ψ(ξ) = ξ^{p/2}/p`, the dual variable is `ζ = Ψ'(ξ) = ξ^{(p-2)/2}/2` and
//! the transport density `λ = 2ζ`. Flux `θ = λ∇u` and `λ` are tied
//! pointwise by the dual algebraic equation
//!
//! ```text
//! |θ|² = E(λ) = λ^{(2p-2)/(p-2)} - χ(p) ε² λ²
//! ```
//!
//! which is strictly increasing on `[0, ∞)` for `p > 2` and strictly
//! decreasing on `(0, ε^{p-2}]` for `p < 2`.

use crate::error::{Error, Result};
use crate::numerics::{try_solve_monotone, RootBracket};
use crate::problem::chi;
use crate::scalar::{lit, to_f64, Scalar};

/// Halvings allowed while bracketing `λ` from above.
const MAX_SHRINK: usize = 4096;

/// The pair `(ξ, ζ)` at one point, with `λ = 2ζ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalState<T> {
    pub xi: T,
    pub zeta: T,
    pub lambda: T,
}

impl<T: Scalar> CanonicalState<T> {
    /// State for a radial slope `u'`: `ξ = u'² + χε²`.
    pub fn from_slope(slope: T, p: T, epsilon: T) -> Result<Self> {
        let law = DualAlgebra::new(p, epsilon)?;
        let xi = slope * slope + law.reg;
        Self::from_xi_with(&law, xi)
    }

    pub fn from_xi(xi: T, p: T, epsilon: T) -> Result<Self> {
        Self::from_xi_with(&DualAlgebra::new(p, epsilon)?, xi)
    }

    fn from_xi_with(law: &DualAlgebra<T>, xi: T) -> Result<Self> {
        if xi < law.reg || !xi.is_finite() {
            return Err(Error::Domain { quantity: "xi", value: to_f64(xi) });
        }
        let lambda = law.lambda_of_xi(xi);
        let zeta = lambda / lit::<T>(2.0);
        law.check_zeta(zeta)?;
        Ok(CanonicalState { xi, zeta, lambda })
    }
}

/// Branch-specific constants of the transformation for fixed `p` and `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualAlgebra<T> {
    p: T,
    epsilon: T,
    /// `χ(p) ε²`
    reg: T,
    /// `(2p-2)/(p-2)`, the leading exponent of `E`.
    dae_exp: T,
    /// `ε^{p-2}` for `p < 2`, infinity otherwise.
    lambda_max: T,
}

impl<T: Scalar> DualAlgebra<T> {
    pub fn new(p: T, epsilon: T) -> Result<Self> {
        let c = chi(p)?;
        let two = lit::<T>(2.0);
        let singular = p < two;
        if singular && !(epsilon > T::zero() && epsilon.is_finite()) {
            return Err(Error::MissingRegularization { p: to_f64(p) });
        }
        let lambda_max = if singular { epsilon.powf(p - two) } else { T::infinity() };
        Ok(DualAlgebra { p, epsilon, reg: c * epsilon * epsilon, dae_exp: (two * p - two) / (p - two), lambda_max })
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// `p ∈ (1, 2)`.
    pub fn is_singular(&self) -> bool {
        self.p < lit::<T>(2.0)
    }

    /// `χ(p) ε²`.
    pub fn regularization(&self) -> T {
        self.reg
    }

    /// Upper end of the admissible `λ` range: `ε^{p-2}` for `p < 2`, `∞` for `p > 2`.
    pub fn lambda_max(&self) -> T {
        self.lambda_max
    }

    fn slack(&self) -> T {
        T::one() + lit::<T>(16.0) * T::epsilon()
    }

    fn check_zeta(&self, zeta: T) -> Result<()> {
        let half_max = self.lambda_max / lit::<T>(2.0);
        let ok = if self.is_singular() {
            zeta > T::zero() && zeta <= half_max * self.slack()
        } else {
            zeta >= T::zero() && zeta.is_finite()
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain { quantity: "zeta", value: to_f64(zeta) })
        }
    }

    fn lambda_of_xi(&self, xi: T) -> T {
        xi.powf((self.p - lit::<T>(2.0)) / lit::<T>(2.0))
    }

    /// `E(λ)` without domain checks.
    #[inline]
    pub fn forward_unchecked(&self, lam: T) -> T {
        if self.is_singular() {
            lam.powf(self.dae_exp) - self.reg * lam * lam
        } else {
            lam.powf(self.dae_exp)
        }
    }

    /// `E(λ)` on its monotonicity domain.
    pub fn forward(&self, lam: T) -> Result<T> {
        let ok = if self.is_singular() {
            lam > T::zero() && lam <= self.lambda_max * self.slack()
        } else {
            lam >= T::zero() && lam.is_finite()
        };
        if !ok {
            return Err(Error::Domain { quantity: "lambda", value: to_f64(lam) });
        }
        Ok(self.forward_unchecked(lam.min(self.lambda_max)))
    }

    /// `λ = E⁻¹(|θ|²)`.
    pub fn invert(&self, theta_sq: T) -> Result<T> {
        if !(theta_sq >= T::zero()) || !theta_sq.is_finite() {
            return Err(Error::Domain { quantity: "theta_sq", value: to_f64(theta_sq) });
        }
        if !self.is_singular() {
            return Ok(theta_sq.powf(T::one() / self.dae_exp));
        }
        if theta_sq == T::zero() {
            return Ok(self.lambda_max);
        }
        // E(λ) < λ^k, so the root lies below θ^{2/k}; E → ∞ as λ → 0⁺.
        let mut hi = self.lambda_max.min(theta_sq.powf(T::one() / self.dae_exp));
        let mut e_hi = self.forward_unchecked(hi);
        if e_hi > theta_sq {
            hi = self.lambda_max;
            e_hi = T::zero();
        }
        let half = lit::<T>(0.5);
        let mut lo = hi * half;
        let mut e_lo = self.forward_unchecked(lo);
        let mut steps = 0;
        while e_lo < theta_sq {
            hi = lo;
            e_hi = e_lo;
            lo = lo * half;
            e_lo = self.forward_unchecked(lo);
            steps += 1;
            if steps > MAX_SHRINK || lo == T::zero() {
                return Err(Error::Convergence { what: "DAE inversion bracket", iterations: steps });
            }
        }
        let bracket = RootBracket { lo, hi, f_lo: theta_sq - e_lo, f_hi: theta_sq - e_hi };
        // |λE'(λ)| ≥ |k| max(θ², ε^{2p-2}) turns the residual bound into a relative bound on λ
        let floor = self.lambda_max.powf(self.dae_exp);
        let tol_f = T::rel_tol(1e-13) * self.dae_exp.abs() * theta_sq.max(floor);
        let tol_x = lit::<T>(8.0) * T::epsilon() * lo;
        try_solve_monotone(|l| Ok(theta_sq - self.forward_unchecked(l)), bracket, tol_x, tol_f)
    }

    /// Radial slope `u' = θ/λ` for the signed radial flux `θ = F(r)·r`.
    ///
    /// For `p > 2` this is the closed form `sign(θ)|θ|^{1/(p-1)}`, finite
    /// where `θ = 0 = λ`.
    pub fn slope_from_flux(&self, theta: T) -> Result<T> {
        if self.is_singular() {
            let lam = self.invert(theta * theta)?;
            Ok(theta / lam)
        } else {
            let g = theta.abs().powf(T::one() / (self.p - T::one()));
            Ok(if theta < T::zero() { -g } else { g })
        }
    }

    /// `(slope, λ)` for the signed radial flux.
    pub fn slope_and_lambda(&self, theta: T) -> Result<(T, T)> {
        let lam = self.invert(theta * theta)?;
        let slope = if self.is_singular() {
            theta / lam
        } else {
            let g = theta.abs().powf(T::one() / (self.p - T::one()));
            if theta < T::zero() {
                -g
            } else {
                g
            }
        };
        Ok((slope, lam))
    }
}

/// Stored strain energy density `H(γ) = (|γ|² + χ(p)ε²)^{p/2}/p`.
pub fn stored_energy_density<T: Scalar>(gamma_sq: T, p: T, epsilon: T) -> Result<T> {
    let c = chi(p)?;
    if !(gamma_sq >= T::zero()) {
        return Err(Error::Domain { quantity: "gamma_sq", value: to_f64(gamma_sq) });
    }
    Ok((gamma_sq + c * epsilon * epsilon).powf(p / lit::<T>(2.0)) / p)
}

/// Canonical energy `Ψ(ξ) = ξ^{p/2}/p`.
pub fn canonical_energy<T: Scalar>(xi: T, p: T) -> Result<T> {
    chi(p)?;
    let bad = xi < T::zero() || (p < lit::<T>(2.0) && xi == T::zero()) || !xi.is_finite();
    if bad {
        return Err(Error::Domain { quantity: "xi", value: to_f64(xi) });
    }
    Ok(xi.powf(p / lit::<T>(2.0)) / p)
}

/// Dual variable `ζ = Ψ'(ξ) = ξ^{(p-2)/2}/2`.
pub fn zeta_of_xi<T: Scalar>(xi: T, p: T) -> Result<T> {
    chi(p)?;
    if !(xi > T::zero()) || !xi.is_finite() {
        return Err(Error::Domain { quantity: "xi", value: to_f64(xi) });
    }
    Ok(xi.powf((p - lit::<T>(2.0)) / lit::<T>(2.0)) / lit::<T>(2.0))
}

/// Legendre conjugate `Ψ*(ζ) = (p-2)(2ζ)^{p/(p-2)}/(2p)` on the admissible set.
pub fn legendre_conjugate<T: Scalar>(zeta: T, p: T, epsilon: T) -> Result<T> {
    let law = DualAlgebra::new(p, epsilon)?;
    law.check_zeta(zeta)?;
    let two = lit::<T>(2.0);
    Ok((p - two) * (two * zeta).powf(p / (p - two)) / (two * p))
}

/// `E(λ)` on its monotonicity domain.
pub fn dae_forward<T: Scalar>(lam: T, p: T, epsilon: T) -> Result<T> {
    DualAlgebra::new(p, epsilon)?.forward(lam)
}

/// `λ = E⁻¹(|θ|²)`: closed form for `p > 2`, monotone root solve for `p < 2`.
pub fn dae_invert<T: Scalar>(theta_sq: T, p: T, epsilon: T) -> Result<T> {
    DualAlgebra::new(p, epsilon)?.invert(theta_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn stored_energy_examples() {
        assert_eq!(stored_energy_density(0.0, 3.0, 0.7).unwrap(), 0.0);
        let v = stored_energy_density(0.0, 1.5, 0.1).unwrap();
        assert_relative_eq!(v, 0.01f64.powf(0.75) / 1.5, max_relative = 1e-15);
        assert!((v - 0.02108).abs() < 1e-5);
        assert_relative_eq!(stored_energy_density(4.0, 4.0, 0.0).unwrap(), 4.0);
        assert_eq!(stored_energy_density(-1.0, 3.0, 0.0).unwrap_err().kind(), "domain");
    }

    #[test]
    fn canonical_energy_examples() {
        assert_relative_eq!(canonical_energy(4.0, 4.0).unwrap(), 4.0);
        for p in [1.3, 2.5, 7.0] {
            assert_relative_eq!(canonical_energy(1.0, p).unwrap(), 1.0 / p);
        }
        assert_eq!(canonical_energy(0.0, 3.0).unwrap(), 0.0);
        assert!(canonical_energy(-1.0, 3.0).is_err());
        assert!(canonical_energy(0.0, 1.5).is_err());
    }

    #[test]
    fn zeta_examples() {
        assert_relative_eq!(zeta_of_xi(4.0, 4.0).unwrap(), 2.0);
        assert_relative_eq!(zeta_of_xi(1.0, 1.7).unwrap(), 0.5);
        assert_relative_eq!(zeta_of_xi(0.01, 1.5).unwrap(), 0.01f64.powf(-0.25) / 2.0, max_relative = 1e-15);
        assert!((zeta_of_xi(0.01f64, 1.5).unwrap() - 1.5811).abs() < 1e-4);
        assert!(zeta_of_xi(0.0, 3.0).is_err());
    }

    #[test]
    fn legendre_examples() {
        assert_relative_eq!(legendre_conjugate(2.0, 4.0, 0.0).unwrap(), 4.0);
        assert_relative_eq!(legendre_conjugate(0.5, 3.0, 0.0).unwrap(), 1.0 / 6.0);
        // 2ζ = 1 is admissible for p < 2 when ε^{p-2} ≥ 1
        assert_relative_eq!(legendre_conjugate(0.5, 1.5, 0.1).unwrap(), -0.5 / 3.0);
        let xi = 4.0;
        let zeta = zeta_of_xi(xi, 4.0).unwrap();
        let lhs = xi * zeta - canonical_energy(xi, 4.0).unwrap();
        assert_relative_eq!(lhs, legendre_conjugate(zeta, 4.0, 0.0).unwrap());
        assert_eq!(legendre_conjugate(2.0, 1.5, 0.1).unwrap_err().kind(), "domain");
        assert!(legendre_conjugate(-1.0, 3.0, 0.0).is_err());
    }

    #[test]
    fn dae_forward_examples() {
        assert_relative_eq!(dae_forward(2.0, 4.0, 0.0).unwrap(), 8.0);
        assert_relative_eq!(dae_forward(1.0, 1.5, 0.1).unwrap(), 0.99, max_relative = 1e-15);
        let top = 0.1f64.powf(-0.5);
        assert!(dae_forward(top, 1.5, 0.1).unwrap().abs() < 1e-15);
        assert!(dae_forward(top * 1.01, 1.5, 0.1).is_err());
        assert!(dae_forward(0.0, 1.5, 0.1).is_err());
        assert!(dae_forward(-1.0, 3.0, 0.0).is_err());
        assert!(dae_forward(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn dae_invert_examples() {
        assert_relative_eq!(dae_invert(8.0, 4.0, 0.0).unwrap(), 2.0, max_relative = 1e-15);
        assert_eq!(dae_invert(0.0, 3.0, 0.0).unwrap(), 0.0);
        let lam = dae_invert(0.99, 1.5, 0.1).unwrap();
        assert_relative_eq!(lam, 1.0, max_relative = 1e-12);
        assert!((dae_forward(lam, 1.5f64, 0.1).unwrap() - 0.99).abs() < 1e-13);
        assert_relative_eq!(dae_invert(0.0, 1.5, 0.1).unwrap(), 0.1f64.powf(-0.5));
        assert!(dae_invert(-1.0, 3.0, 0.0).is_err());
        assert_eq!(dae_invert(1.0, 1.5, 0.0).unwrap_err().kind(), "missing-regularization");
    }

    #[test]
    fn slopes_from_flux() {
        let law = DualAlgebra::new(3.0, 0.0).unwrap();
        assert_eq!(law.slope_from_flux(0.0).unwrap(), 0.0);
        assert_relative_eq!(law.slope_from_flux(4.0).unwrap(), 2.0);
        assert_relative_eq!(law.slope_from_flux(-4.0).unwrap(), -2.0);
        let law = DualAlgebra::new(1.5, 0.1).unwrap();
        let theta = 0.99f64.sqrt();
        assert_relative_eq!(law.slope_from_flux(theta).unwrap(), theta, max_relative = 1e-12);
        // λ u' = θ and ξ^{(p-2)/2} = λ
        for theta in [-3.0, -0.2, 1e-9, 0.5, 40.0] {
            let (u, lam) = law.slope_and_lambda(theta).unwrap();
            assert_relative_eq!(lam * u, theta, max_relative = 1e-12);
            let st = CanonicalState::from_slope(u, 1.5, 0.1).unwrap();
            assert_relative_eq!(st.lambda, lam, max_relative = 1e-11);
        }
    }

    #[test]
    fn canonical_state_bounds() {
        let st = CanonicalState::from_slope(0.0, 1.5, 0.1).unwrap();
        assert_relative_eq!(st.zeta, 0.1f64.powf(-0.5) / 2.0, max_relative = 1e-14);
        assert!(CanonicalState::from_xi(1e-4, 1.5, 0.1).is_err());
        let st = CanonicalState::from_slope(0.0, 3.0, 0.0).unwrap();
        assert_eq!(st.lambda, 0.0);
    }

    fn branch() -> impl Strategy<Value = (f64, f64)> {
        prop_oneof![(1.05f64..1.95, 0.01f64..0.5), (2.05f64..12.0, Just(0.0)),]
    }

    proptest! {
        #[test]
        fn dae_round_trip((p, eps) in branch(), u in 0.0f64..1.0, decades in 0.0f64..6.0) {
            let law = DualAlgebra::new(p, eps).unwrap();
            let lam = if law.is_singular() {
                law.lambda_max() * 10f64.powf(-decades * u)
            } else {
                10f64.powf(decades * (2.0 * u - 1.0))
            };
            let back = law.invert(law.forward(lam).unwrap()).unwrap();
            prop_assert!((back - lam).abs() <= 1e-10 * lam, "p={} lam={} back={}", p, lam, back);
        }

        #[test]
        fn fenchel_equality((p, eps) in branch(), s in -3.0f64..3.0) {
            let xi = eps * eps + 10f64.powf(s);
            let zeta = zeta_of_xi(xi, p).unwrap();
            let r = canonical_energy(xi, p).unwrap() + legendre_conjugate(zeta, p, eps).unwrap() - xi * zeta;
            let scale = (xi * zeta).abs().max(1.0);
            prop_assert!(r.abs() <= 1e-12 * scale);
        }

        #[test]
        fn zeta_is_derivative_of_canonical_energy((p, _eps) in branch(), s in -1.0f64..1.0) {
            let xi = 10f64.powf(s);
            let h = 1e-5 * xi;
            let fd = (canonical_energy(xi + h, p).unwrap() - canonical_energy(xi - h, p).unwrap()) / (2.0 * h);
            let z = zeta_of_xi(xi, p).unwrap();
            prop_assert!((fd - z).abs() <= 1e-6 * z.abs());
        }

        #[test]
        fn inverse_respects_admissible_bound(p in 1.05f64..1.95, eps in 0.01f64..0.5, t in -8.0f64..8.0) {
            let law = DualAlgebra::new(p, eps).unwrap();
            let lam = law.invert(10f64.powf(t)).unwrap();
            prop_assert!(lam > 0.0 && lam <= law.lambda_max());
        }
    }
}
