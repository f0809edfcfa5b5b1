//! The global parameter tuple and its derived exponents.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `N * (1/p - 1)_+`, the smoothness threshold below which Besov "functions"
/// stop being regular distributions. Defined as 0 for `p = inf`.
pub fn sigma_p(p: f64, n: usize) -> Result<f64> {
    if !(p > 0.0) {
        return invalid(format!("sigma_p needs p > 0, got {p}"));
    }
    Ok(n as f64 * (1.0 / p - 1.0).max(0.0))
}

/// The exponent with `1/kappa = 1/p - 1/q`; `+inf` when `p == q`.
pub fn kappa(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0) || !(q > 0.0) {
        return invalid(format!("kappa needs p, q > 0, got p={p}, q={q}"));
    }
    if p > q {
        return invalid(format!(
            "kappa is undefined for p > q (p={p}, q={q}); the summability condition reduces to boundedness"
        ));
    }
    if p == q {
        return Ok(f64::INFINITY);
    }
    if q.is_infinite() {
        return Ok(p);
    }
    Ok(1.0 / (1.0 / p - 1.0 / q))
}

/// Admissible interval for the rearrangement exponent `L` is `(0, 1 - p/q)`;
/// the default sits at its midpoint.
pub fn default_rearrangement_exponent(p: f64, q: f64) -> f64 {
    if p < q {
        (1.0 - p / q) / 2.0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    DimensionTooSmall,
    RestrictionDimension,
    NonPositiveP,
    NonPositiveQ,
    SmoothnessBelowThreshold,
    OrderNotAboveSmoothness,
    RearrangementExponentNotPositive,
    RearrangementExponentTooLarge,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Violation::DimensionTooSmall => "N>=2 fails",
            Violation::RestrictionDimension => "1<=d<N fails",
            Violation::NonPositiveP => "p>0 fails",
            Violation::NonPositiveQ => "q>0 fails",
            Violation::SmoothnessBelowThreshold => "s>sigma_p fails",
            Violation::OrderNotAboveSmoothness => "M>s fails",
            Violation::RearrangementExponentNotPositive => "L>0 fails",
            Violation::RearrangementExponentTooLarge => "L<1-p/q fails",
        };
        f.write_str(msg)
    }
}

/// The experiment's global configuration `(N, d, p, q, s, M, L)` together
/// with the derived `kappa` and `sigma_p`.
///
/// Derived values are computed once at construction and never read from
/// input. For `p > q` the summability exponent is taken as `+inf` (the
/// condition on `Psi` degenerates to boundedness).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Params {
    n: usize,
    d: usize,
    p: f64,
    q: f64,
    s: f64,
    m: usize,
    l: f64,
    kappa: f64,
    sigma_p: f64,
}

impl Params {
    /// Builds the tuple without validating it; `l = None` picks the midpoint
    /// of the admissible interval.
    pub fn new(n: usize, d: usize, p: f64, q: f64, s: f64, m: usize, l: Option<f64>) -> Self {
        let kappa = if p > 0.0 && q > 0.0 && p < q {
            kappa(p, q).unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        };
        let sigma_p = if p > 0.0 {
            n as f64 * (1.0 / p - 1.0).max(0.0)
        } else {
            f64::NAN
        };
        Self {
            n,
            d,
            p,
            q,
            s,
            m,
            l: l.unwrap_or_else(|| default_rearrangement_exponent(p, q)),
            kappa,
            sigma_p,
        }
    }

    /// Like [`Params::new`] but fails with the full violation list.
    pub fn validated(
        n: usize,
        d: usize,
        p: f64,
        q: f64,
        s: f64,
        m: usize,
        l: Option<f64>,
    ) -> Result<Self> {
        let params = Self::new(n, d, p, q, s, m, l);
        let violations = params.validate();
        if violations.is_empty() {
            Ok(params)
        } else {
            Err(Error::Validation(violations))
        }
    }

    /// Lists every violated invariant; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n < 2 {
            out.push(Violation::DimensionTooSmall);
        }
        if self.d < 1 || self.d >= self.n {
            out.push(Violation::RestrictionDimension);
        }
        if !(self.p > 0.0) {
            out.push(Violation::NonPositiveP);
        }
        if !(self.q > 0.0) {
            out.push(Violation::NonPositiveQ);
        }
        if self.p > 0.0 && !(self.s > self.sigma_p) {
            out.push(Violation::SmoothnessBelowThreshold);
        }
        if !(self.m as f64 > self.s) {
            out.push(Violation::OrderNotAboveSmoothness);
        }
        if self.p > 0.0 && self.p < self.q {
            if !(self.l > 0.0) {
                out.push(Violation::RearrangementExponentNotPositive);
            }
            if !(self.l < 1.0 - self.p / self.q) {
                out.push(Violation::RearrangementExponentTooLarge);
            }
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn sigma_p(&self) -> f64 {
        self.sigma_p
    }

    /// Offset constant `C_M = 2(M + 2)` separating the levels of the atomic field.
    pub fn offset_constant(&self) -> f64 {
        2.0 * (self.m as f64 + 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigma_p_examples() {
        assert_eq!(sigma_p(1.0, 2).unwrap(), 0.0);
        assert_eq!(sigma_p(2.0, 3).unwrap(), 0.0);
        assert_eq!(sigma_p(0.5, 2).unwrap(), 2.0);
        assert_eq!(sigma_p(f64::INFINITY, 4).unwrap(), 0.0);
        assert!(sigma_p(0.0, 2).is_err());
        assert!(sigma_p(-1.0, 2).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(1.0, 2.0).unwrap(), 2.0);
        assert_eq!(kappa(1.5, 1.5).unwrap(), f64::INFINITY);
        assert_eq!(kappa(1.0, f64::INFINITY).unwrap(), 1.0);
        assert!(kappa(2.0, 1.0).is_err());
    }

    #[test]
    fn reference_config_is_valid() {
        let p = Params::new(2, 1, 1.0, 2.0, 1.5, 2, Some(0.25));
        assert!(p.validate().is_empty());
        assert_eq!(p.kappa(), 2.0);
        assert_eq!(p.sigma_p(), 0.0);
        assert_eq!(p.offset_constant(), 8.0);
    }

    #[test]
    fn single_violations_are_reported() {
        let p = Params::new(2, 1, 1.0, 2.0, 1.5, 1, Some(0.25));
        assert_eq!(p.validate(), vec![Violation::OrderNotAboveSmoothness]);
        assert_eq!(p.validate()[0].to_string(), "M>s fails");

        let p = Params::new(2, 1, 1.0, 2.0, 1.5, 2, Some(0.75));
        assert_eq!(p.validate(), vec![Violation::RearrangementExponentTooLarge]);

        let p = Params::new(2, 1, 0.5, 2.0, 1.5, 2, None);
        assert_eq!(p.validate(), vec![Violation::SmoothnessBelowThreshold]);

        let p = Params::new(2, 2, 1.0, 2.0, 1.5, 2, None);
        assert_eq!(p.validate(), vec![Violation::RestrictionDimension]);

        let p = Params::new(1, 1, 1.0, 2.0, 0.5, 2, None);
        assert!(p.validate().contains(&Violation::DimensionTooSmall));

        let p = Params::new(2, 1, 1.0, 2.0, 1.5, 2, Some(0.0));
        assert_eq!(
            p.validate(),
            vec![Violation::RearrangementExponentNotPositive]
        );
    }

    #[test]
    fn default_l_is_midpoint() {
        let p = Params::new(2, 1, 1.0, 2.0, 1.5, 2, None);
        assert_eq!(p.l(), 0.25);
        assert!(p.validate().is_empty());
    }

    #[test]
    fn equal_exponents_give_infinite_kappa() {
        let p = Params::new(2, 1, 2.0, 2.0, 1.5, 2, None);
        assert_eq!(p.kappa(), f64::INFINITY);
        assert!(p.validate().is_empty());
    }

    proptest! {
        #[test]
        fn sigma_p_vanishes_above_one(p in 1.0f64..100.0, n in 1usize..10) {
            prop_assert_eq!(sigma_p(p, n).unwrap(), 0.0);
        }

        #[test]
        fn sigma_p_nonincreasing_and_linear(p1 in 0.05f64..5.0, dp in 0.0f64..5.0, n in 1usize..10) {
            let a = sigma_p(p1, n).unwrap();
            let b = sigma_p(p1 + dp, n).unwrap();
            prop_assert!(b <= a);
            let unit = sigma_p(p1, 1).unwrap();
            prop_assert!((a - n as f64 * unit).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn kappa_positive_and_exact_at_q_inf(p in 0.05f64..10.0, dq in 0.0f64..10.0) {
            prop_assert!(kappa(p, p + dq).unwrap() > 0.0);
            prop_assert_eq!(kappa(p, f64::INFINITY).unwrap(), p);
        }

        #[test]
        fn validate_accepts_experiment_regime(p in 0.3f64..4.0, ratio in 1.1f64..5.0, extra in 0.01f64..0.9) {
            let q = p * ratio;
            let sp = sigma_p(p, 2).unwrap();
            let s = sp + extra;
            let m = s.floor() as usize + 1;
            let params = Params::new(2, 1, p, q, s, m, None);
            prop_assert!(params.validate().is_empty());
        }
    }
}
