//! Participating-contract utility `u(x) = U(alpha (x - B)^+ + K)` with power
//! `U`, its concave envelope and the generalized inverse of the envelope's
//! subdifferential.
//!
//! `u` is flat on `[0, B]` and concave above `B`, so its concave envelope is
//! the chord from `(0, u(0))` tangent to `u` at `x_hat`, followed by `u`
//! itself. Optimal wealth at a decision date never lies in `(0, x_hat)`.

use crate::error::{invalid, Error, Result};
use crate::roots;

/// Real number extended by `-inf`. Ordering is total: `NegInfinity` sorts
/// below every finite value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedReal {
    NegInfinity,
    Finite(f64),
}

impl ExtendedReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(v) => Some(v),
            ExtendedReal::NegInfinity => None,
        }
    }

    pub fn is_neg_infinity(self) -> bool {
        matches!(self, ExtendedReal::NegInfinity)
    }
}

/// Power utility `U(x) = x^(1-gamma) / (1-gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerUtility {
    gamma: f64,
}

impl PowerUtility {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) || gamma == 1.0 {
            return Err(invalid(format!("risk aversion must be positive and != 1, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `(gamma - 1) / gamma`, the exponent that shows up in every pricing formula.
    pub fn price_exponent(&self) -> f64 {
        (self.gamma - 1.0) / self.gamma
    }

    pub fn value(&self, x: f64) -> f64 {
        x.powf(1.0 - self.gamma) / (1.0 - self.gamma)
    }

    pub fn marginal(&self, x: f64) -> f64 {
        x.powf(-self.gamma)
    }

    /// `I = (U')^{-1}`.
    pub fn inverse_marginal(&self, y: f64) -> f64 {
        y.powf(-1.0 / self.gamma)
    }

    /// `U^{-1}`; defined for values in the range of `U`.
    pub fn inverse_value(&self, v: f64) -> f64 {
        ((1.0 - self.gamma) * v).powf(1.0 / (1.0 - self.gamma))
    }
}

/// Closed subdifferential interval `[lower, upper]`; `upper` may be `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subgradient {
    pub lower: f64,
    pub upper: f64,
}

impl Subgradient {
    pub fn contains(&self, m: f64) -> bool {
        m >= self.lower && m <= self.upper
    }

    /// Containment with a relative slack for values computed in floating point.
    pub fn contains_approx(&self, m: f64, rel: f64) -> bool {
        m >= self.lower * (1.0 - rel) && m <= self.upper * (1.0 + rel)
    }

    pub fn is_singleton(&self) -> bool {
        self.lower == self.upper
    }
}

/// Contract utility with participation rate `alpha`, participation
/// threshold `b` and guarantee `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractUtility {
    base: PowerUtility,
    alpha: f64,
    b: f64,
    k: f64,
    x_hat: f64,
}

impl ContractUtility {
    pub fn new(gamma: f64, alpha: f64, b: f64, k: f64) -> Result<Self> {
        let base = PowerUtility::new(gamma)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("participation rate must lie in (0, 1], got {alpha}")));
        }
        if !(b > 0.0 && b.is_finite()) || !(k > 0.0 && k.is_finite()) {
            return Err(invalid(format!("threshold and guarantee must be positive, got B = {b}, K = {k}")));
        }
        let mut c = Self { base, alpha, b, k, x_hat: f64::NAN };
        c.x_hat = c.solve_tangency()?;
        Ok(c)
    }

    pub fn base(&self) -> &PowerUtility {
        &self.base
    }

    pub fn gamma(&self) -> f64 {
        self.base.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn threshold(&self) -> f64 {
        self.b
    }

    pub fn guarantee(&self) -> f64 {
        self.k
    }

    /// Tangency point `x_hat`: smallest positive wealth where `u` meets its envelope.
    pub fn x_hat(&self) -> f64 {
        self.x_hat
    }

    /// `K / alpha - B`, the constant shift in the optimal wealth formula.
    pub fn shift(&self) -> f64 {
        self.k / self.alpha - self.b
    }

    /// `u'(x_hat)`: the marginal level above which optimal wealth jumps to zero.
    pub fn critical_marginal(&self) -> f64 {
        self.marginal(self.x_hat)
    }

    fn raw_value(&self, x: f64) -> f64 {
        self.base.value(self.alpha * (x - self.b).max(0.0) + self.k)
    }

    /// Right-branch derivative `alpha U'(alpha (x - B) + K)` for `x >= B`.
    pub fn marginal(&self, x: f64) -> f64 {
        self.alpha * self.base.marginal(self.alpha * (x - self.b) + self.k)
    }

    /// `u(x) - u(0) - u'(x) x`; negative below `x_hat`, positive above.
    pub fn tangency_gap(&self, x: f64) -> f64 {
        self.raw_value(x) - self.raw_value(0.0) - self.marginal(x) * x
    }

    /// Relative tangency residual at `x`.
    pub fn tangency_residual(&self, x: f64) -> f64 {
        let scale = (self.raw_value(x) - self.raw_value(0.0)).abs().max((self.marginal(x) * x).abs());
        self.tangency_gap(x).abs() / scale
    }

    fn solve_tangency(&self) -> Result<f64> {
        let lo = self.b * (1.0 + 1e-9);
        if self.tangency_gap(lo) >= 0.0 {
            return Err(invalid("tangency function already nonnegative at the participation threshold"));
        }
        let mut hi = 2.0 * self.b.max(1.0);
        let mut doublings = 0;
        while self.tangency_gap(hi) <= 0.0 {
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 || !hi.is_finite() {
                return Err(Error::NotBracketed { lo, hi, f_lo: self.tangency_gap(lo), f_hi: self.tangency_gap(hi) });
            }
        }
        let root = roots::bisect(|x| self.tangency_gap(x), lo, hi, 0.0, 2000)?;
        Ok(root.x)
    }

    /// `u(x)`; `-inf` for negative wealth.
    pub fn value(&self, x: f64) -> ExtendedReal {
        if x < 0.0 {
            ExtendedReal::NegInfinity
        } else {
            ExtendedReal::Finite(self.raw_value(x))
        }
    }

    /// Concave envelope of `u`.
    pub fn envelope(&self, x: f64) -> ExtendedReal {
        if x < 0.0 {
            ExtendedReal::NegInfinity
        } else if x < self.x_hat {
            ExtendedReal::Finite(self.raw_value(0.0) + self.critical_marginal() * x)
        } else {
            ExtendedReal::Finite(self.raw_value(x))
        }
    }

    /// Subdifferential of the envelope; `None` outside the domain.
    pub fn subdifferential(&self, x: f64) -> Option<Subgradient> {
        let m_hat = self.critical_marginal();
        if x < 0.0 || x.is_nan() {
            None
        } else if x == 0.0 {
            Some(Subgradient { lower: m_hat, upper: f64::INFINITY })
        } else if x <= self.x_hat {
            Some(Subgradient { lower: m_hat, upper: m_hat })
        } else {
            let m = self.marginal(x);
            Some(Subgradient { lower: m, upper: m })
        }
    }

    /// Generalized inverse `i(y)` of the envelope's subdifferential:
    /// `(I(y/alpha) - K)/alpha + B` when `y <= u'(x_hat)`, zero otherwise.
    /// `y <= 0` maps to `+inf`.
    pub fn inverse_marginal(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::INFINITY;
        }
        if y > self.critical_marginal() {
            return 0.0;
        }
        (self.base.inverse_marginal(y / self.alpha) - self.k) / self.alpha + self.b
    }

    /// Smallest wealth with `u(x) = v`, for `v >= U(K)`.
    pub fn inverse_value(&self, v: f64) -> Option<f64> {
        let floor = self.raw_value(0.0);
        if v < floor || !v.is_finite() {
            return None;
        }
        if v == floor {
            return Some(self.b);
        }
        Some(self.b + (self.base.inverse_value(v) - self.k) / self.alpha)
    }
}

impl Default for ContractUtility {
    /// gamma = 3, alpha = 0.25, B = 50, K = 1.
    fn default() -> Self {
        Self::new(3.0, 0.25, 50.0, 1.0).expect("reference contract is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite(v: ExtendedReal) -> f64 {
        v.finite().expect("finite utility")
    }

    #[test]
    fn payoff_reference_values() {
        let c = ContractUtility::default();
        assert_eq!(finite(c.value(50.0)), -0.5);
        assert_eq!(finite(c.value(0.0)), -0.5);
        assert_eq!(finite(c.value(25.0)), -0.5);
        assert!(c.value(-1e-12).is_neg_infinity());
        assert!(c.value(-1.0) < c.value(0.0));
        assert!(c.value(60.0) > c.value(55.0));
    }

    #[test]
    fn rejects_invalid_contracts() {
        assert!(ContractUtility::new(1.0, 0.25, 50.0, 1.0).is_err());
        assert!(ContractUtility::new(3.0, 0.0, 50.0, 1.0).is_err());
        assert!(ContractUtility::new(3.0, 1.5, 50.0, 1.0).is_err());
        assert!(ContractUtility::new(3.0, 0.25, 0.0, 1.0).is_err());
        assert!(ContractUtility::new(3.0, 0.25, 50.0, -1.0).is_err());
    }

    #[test]
    fn reference_tangency_solves_cubic() {
        // With gamma = 3, alpha = 1/4, B = 50, K = 1 and z = alpha (x - B) + K
        // the tangency equation reduces to z^3 - 3 z - 23 = 0.
        let c = ContractUtility::default();
        let z = 0.25 * (c.x_hat() - 50.0) + 1.0;
        assert!((z.powi(3) - 3.0 * z - 23.0).abs() < 1e-11);
        assert!(c.x_hat() > 50.0);
        assert!(c.tangency_residual(c.x_hat()) <= 1e-10);
    }

    #[test]
    fn envelope_boundary_values() {
        let c = ContractUtility::default();
        assert_eq!(c.envelope(0.0), c.value(0.0));
        let xh = c.x_hat();
        let left = c.raw_value(0.0) + c.critical_marginal() * xh;
        assert!((left - finite(c.value(xh))).abs() < 1e-10);
        assert_eq!(c.envelope(2.0 * xh), c.value(2.0 * xh));
        assert!(c.envelope(-1.0).is_neg_infinity());
    }

    #[test]
    fn subdifferential_shape() {
        let c = ContractUtility::default();
        let m = c.critical_marginal();
        let at0 = c.subdifferential(0.0).unwrap();
        assert_eq!(at0.lower, m);
        assert_eq!(at0.upper, f64::INFINITY);
        let mid = c.subdifferential(0.5 * c.x_hat()).unwrap();
        assert!(mid.is_singleton() && mid.lower == m);
        assert_eq!(c.subdifferential(c.x_hat()).unwrap().lower, m);
        let above = c.subdifferential(80.0).unwrap();
        assert_eq!(above.lower, c.marginal(80.0));
        assert!(above.lower < m);
        assert!(c.subdifferential(-1.0).is_none());
    }

    #[test]
    fn inverse_marginal_jump() {
        let c = ContractUtility::default();
        let m = c.critical_marginal();
        let at = c.inverse_marginal(m);
        assert!((at - c.x_hat()).abs() <= 1e-10 * c.x_hat());
        assert_eq!(c.inverse_marginal(m * (1.0 + 1e-12)), 0.0);
        assert!(c.inverse_marginal(m * 0.5) > c.x_hat());
    }

    #[test]
    fn inverse_value_on_increasing_branch() {
        let c = ContractUtility::default();
        assert_eq!(c.inverse_value(-0.5), Some(50.0));
        assert_eq!(c.inverse_value(-0.6), None);
        let v = finite(c.value(123.0));
        assert!((c.inverse_value(v).unwrap() - 123.0).abs() < 1e-10);
    }
}
