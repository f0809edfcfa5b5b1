//! Catalog of modulating functions `Psi` on `(0, 1]`.
//!
//! All closed-form families are evaluated through `u = -ln t`, so the dyadic
//! points `t = 2^-j` are reached as `u = j ln 2` without ever forming `t`.
//! That keeps depth-4096 experiments free of underflow.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sum::NeumaierSum;

/// A positive function on `(0, 1]`, described symbolically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PsiDescriptor {
    /// `Psi(t) = c`.
    Constant {
        #[serde(default = "one")]
        c: f64,
    },
    /// `Psi(t) = (1 - ln t)^-b`.
    LogPower { b: f64 },
    /// `Psi(t) = (1 - ln t)^-b * (1 + ln(1 - ln t))^-c`.
    IteratedLogPower {
        b: f64,
        #[serde(default)]
        c: f64,
    },
    /// Values at dyadic points `2^-j`, extended as a step function: level `j`
    /// takes the value of the last entry with index `<= j` (the first entry
    /// for indices below the table).
    Tabulated { table: Vec<(u64, f64)> },
}

fn one() -> f64 {
    1.0
}

/// Outcome of testing `sum_j Psi(2^-j)^kappa < inf`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Satisfied,
    Violated,
    Inconclusive,
}

impl PsiDescriptor {
    pub fn constant(c: f64) -> Self {
        PsiDescriptor::Constant { c }
    }

    pub fn log_power(b: f64) -> Self {
        PsiDescriptor::LogPower { b }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PsiDescriptor::Constant { c } if !(*c > 0.0 && c.is_finite()) => {
                invalid(format!("constant Psi needs 0 < c < inf, got {c}"))
            }
            PsiDescriptor::LogPower { b } if !(*b >= 0.0 && b.is_finite()) => invalid(format!(
                "log-power exponent must be finite and >= 0, got {b}"
            )),
            PsiDescriptor::IteratedLogPower { b, c }
                if !(*b >= 0.0 && *c >= 0.0 && b.is_finite() && c.is_finite()) =>
            {
                invalid(format!(
                    "iterated-log exponents must be finite and >= 0, got b={b}, c={c}"
                ))
            }
            PsiDescriptor::Tabulated { table } => {
                if table.is_empty() {
                    return invalid("tabulated Psi needs at least one entry");
                }
                if table.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return invalid("tabulated Psi indices must be strictly increasing");
                }
                if let Some((j, v)) = table.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
                    return invalid(format!(
                        "tabulated Psi value at j={j} must be positive, got {v}"
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            PsiDescriptor::Constant { .. } => "constant",
            PsiDescriptor::LogPower { .. } => "log-power",
            PsiDescriptor::IteratedLogPower { .. } => "iterated-log-power",
            PsiDescriptor::Tabulated { .. } => "tabulated",
        }
    }

    fn is_tabulated(&self) -> bool {
        matches!(self, PsiDescriptor::Tabulated { .. })
    }

    /// `ln Psi(e^-u)` for the closed-form families, `u >= 0`.
    fn ln_closed_form(&self, u: f64) -> f64 {
        match self {
            PsiDescriptor::Constant { c } => c.ln(),
            PsiDescriptor::LogPower { b } => -b * u.ln_1p(),
            PsiDescriptor::IteratedLogPower { b, c } => -b * u.ln_1p() - c * u.ln_1p().ln_1p(),
            PsiDescriptor::Tabulated { .. } => unreachable!("tabulated Psi has no closed form"),
        }
    }

    fn closed_form(&self, u: f64) -> f64 {
        match self {
            PsiDescriptor::Constant { c } => *c,
            PsiDescriptor::LogPower { b } => (1.0 + u).powf(-b),
            PsiDescriptor::IteratedLogPower { b, c } => {
                (1.0 + u).powf(-b) * (1.0 + u.ln_1p()).powf(-c)
            }
            PsiDescriptor::Tabulated { .. } => unreachable!("tabulated Psi has no closed form"),
        }
    }

    fn table_lookup(table: &[(u64, f64)], j: u64) -> f64 {
        let idx = table.partition_point(|(k, _)| *k <= j);
        table[idx.saturating_sub(1)].1
    }

    /// `Psi(2^-j)`.
    pub fn dyadic(&self, j: u64) -> f64 {
        match self {
            PsiDescriptor::Tabulated { table } => Self::table_lookup(table, j),
            _ => self.closed_form(j as f64 * LN_2),
        }
    }

    /// `ln Psi(2^-j)`, for log-space power computations at large depth.
    pub fn ln_dyadic(&self, j: u64) -> f64 {
        match self {
            PsiDescriptor::Tabulated { table } => Self::table_lookup(table, j).ln(),
            _ => self.ln_closed_form(j as f64 * LN_2),
        }
    }

    /// `Psi(t)` for `t` in `(0, 1]`. Dyadic arguments are routed through
    /// [`PsiDescriptor::dyadic`], so both entry points agree bit for bit.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= 1.0) {
            return invalid(format!("Psi is defined on (0, 1], got t={t}"));
        }
        if let Some(j) = dyadic_exponent(t) {
            return Ok(self.dyadic(j));
        }
        if self.is_tabulated() {
            return invalid(format!(
                "tabulated Psi is only defined at t = 2^-j, got t={t}"
            ));
        }
        Ok(self.closed_form(-t.ln()))
    }

    /// `Psi(r * 2^-j)`; for tabulated descriptors `r` must itself be dyadic.
    pub fn scaled_dyadic(&self, r: f64, j: u64) -> Result<f64> {
        if !(r > 0.0 && r <= 1.0) {
            return invalid(format!("scale factor must lie in (0, 1], got r={r}"));
        }
        if let Some(i) = dyadic_exponent(r) {
            return Ok(self.dyadic(j + i));
        }
        if self.is_tabulated() {
            return invalid(format!(
                "tabulated Psi needs a dyadic scale factor, got r={r}"
            ));
        }
        Ok(self.closed_form(j as f64 * LN_2 - r.ln()))
    }
}

/// `Some(j)` iff `t == 2^-j` exactly, `j >= 0`.
pub fn dyadic_exponent(t: f64) -> Option<u64> {
    if !(t > 0.0 && t <= 1.0) {
        return None;
    }
    let bits = t.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        // subnormal: exactly one mantissa bit set
        if mant.count_ones() == 1 {
            let pos = 63 - mant.leading_zeros() as i64;
            return Some((1074 - pos) as u64);
        }
        return None;
    }
    if mant != 0 {
        return None;
    }
    Some((1023 - exp) as u64)
}

/// `sum_{j=0}^{depth} Psi(2^-j)^kappa`, not raised to `1/kappa`.
pub fn summability_partial(desc: &PsiDescriptor, kappa: f64, depth: u64) -> f64 {
    let mut acc = NeumaierSum::new();
    for j in 0..=depth {
        acc.add(desc.dyadic(j).powf(kappa));
    }
    acc.value()
}

const BOUNDARY_TOL: f64 = 1e-12;

/// Decides the summability condition symbolically.
///
/// For finite `kappa` the catalog families reduce to Bertrand series
/// `sum j^-a (ln j)^-c`: convergent iff `a > 1`, or `a == 1` and `c > 1`.
/// For `kappa = inf` the condition is boundedness, which every catalog
/// family has. Tabulated input is never decided.
pub fn classify_condition(desc: &PsiDescriptor, kappa: f64) -> Classification {
    if desc.is_tabulated() {
        return Classification::Inconclusive;
    }
    if kappa.is_infinite() {
        return Classification::Satisfied;
    }
    let verdict = |ok: bool| {
        if ok {
            Classification::Satisfied
        } else {
            Classification::Violated
        }
    };
    match desc {
        PsiDescriptor::Constant { .. } => Classification::Violated,
        PsiDescriptor::LogPower { b } => {
            let a = b * kappa;
            verdict(a > 1.0 + BOUNDARY_TOL)
        }
        PsiDescriptor::IteratedLogPower { b, c } => {
            let a = b * kappa;
            if (a - 1.0).abs() <= BOUNDARY_TOL {
                verdict(c * kappa > 1.0 + BOUNDARY_TOL)
            } else {
                verdict(a > 1.0)
            }
        }
        PsiDescriptor::Tabulated { .. } => Classification::Inconclusive,
    }
}

/// `max |Psi(r 2^-j) / Psi(2^-j) - 1|` over `j in [j_max/2, j_max]`.
pub fn slow_variation_deviation(desc: &PsiDescriptor, r: f64, j_max: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for j in j_max / 2..=j_max {
        let ratio = desc.scaled_dyadic(r, j)? / desc.dyadic(j);
        worst = worst.max((ratio - 1.0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert_eq!(PsiDescriptor::constant(1.0).eval(0.5).unwrap(), 1.0);
        assert_eq!(PsiDescriptor::log_power(1.0).eval(1.0).unwrap(), 1.0);
        let v = PsiDescriptor::log_power(1.0).eval(0.5).unwrap();
        assert_relative_eq!(v, 1.0 / (1.0 + LN_2), max_relative = 1e-15);
        assert_relative_eq!(v, 0.5906, epsilon = 1e-4);
    }

    #[test]
    fn eval_rejects_outside_domain() {
        let d = PsiDescriptor::log_power(1.0);
        assert!(d.eval(0.0).is_err());
        assert!(d.eval(1.5).is_err());
        assert!(d.eval(-0.25).is_err());
        assert!(d.eval(f64::NAN).is_err());
    }

    #[test]
    fn tabulated_rejects_non_dyadic() {
        let d = PsiDescriptor::Tabulated {
            table: vec![(0, 1.0), (3, 0.5)],
        };
        assert!(d.eval(0.3).is_err());
        assert_eq!(d.eval(0.125).unwrap(), 0.5);
        assert_eq!(d.eval(0.25).unwrap(), 1.0);
        assert_eq!(d.dyadic(100), 0.5);
    }

    #[test]
    fn dyadic_examples() {
        assert_eq!(PsiDescriptor::constant(1.0).dyadic(10), 1.0);
        assert_eq!(PsiDescriptor::log_power(1.0).dyadic(0), 1.0);
        let v = PsiDescriptor::log_power(2.0).dyadic(3);
        assert_relative_eq!(v, (1.0 + 3.0 * LN_2).powi(-2), max_relative = 1e-14);
        assert_relative_eq!(v, 0.105452, epsilon = 1e-6);
        // deep levels never underflow
        assert!(PsiDescriptor::log_power(1.0).dyadic(100_000) > 0.0);
    }

    #[test]
    fn dyadic_exponent_detects_powers() {
        assert_eq!(dyadic_exponent(1.0), Some(0));
        assert_eq!(dyadic_exponent(0.5), Some(1));
        assert_eq!(dyadic_exponent(crate::dyadic::pow2(-1074)), Some(1074));
        assert_eq!(dyadic_exponent(crate::dyadic::pow2(-1030)), Some(1030));
        assert_eq!(dyadic_exponent(0.75), None);
        assert_eq!(dyadic_exponent(2.0), None);
    }

    #[test]
    fn summability_examples() {
        assert_eq!(
            summability_partial(&PsiDescriptor::constant(1.0), 2.0, 4),
            5.0
        );
        let lp = PsiDescriptor::log_power(1.0);
        let expect = 1.0 + (1.0 + LN_2).powi(-2);
        assert_relative_eq!(
            summability_partial(&lp, 2.0, 1),
            expect,
            max_relative = 1e-14
        );
        assert_relative_eq!(expect, 1.3488, epsilon = 1e-4);
        let expect = 1.0 + 1.0 / (1.0 + LN_2) + 1.0 / (1.0 + 2.0 * LN_2);
        assert_relative_eq!(
            summability_partial(&lp, 1.0, 2),
            expect,
            max_relative = 1e-14
        );
        assert_relative_eq!(expect, 2.009676, epsilon = 1e-6);
    }

    #[test]
    fn classification_examples() {
        use Classification::*;
        assert_eq!(
            classify_condition(&PsiDescriptor::constant(1.0), 2.0),
            Violated
        );
        assert_eq!(
            classify_condition(&PsiDescriptor::log_power(1.0), 2.0),
            Satisfied
        );
        assert_eq!(
            classify_condition(&PsiDescriptor::log_power(0.5), 2.0),
            Violated
        );
        let tab = PsiDescriptor::Tabulated {
            table: vec![(0, 1.0)],
        };
        assert_eq!(classify_condition(&tab, 2.0), Inconclusive);
        // bounded catalog families satisfy the degenerate kappa = inf condition
        assert_eq!(
            classify_condition(&PsiDescriptor::constant(3.0), f64::INFINITY),
            Satisfied
        );
    }

    #[test]
    fn iterated_log_bertrand_boundary() {
        use Classification::*;
        let d = |b, c| PsiDescriptor::IteratedLogPower { b, c };
        assert_eq!(classify_condition(&d(0.5, 0.6), 2.0), Satisfied);
        assert_eq!(classify_condition(&d(0.5, 0.5), 2.0), Violated);
        assert_eq!(classify_condition(&d(0.5, 0.0), 2.0), Violated);
        assert_eq!(classify_condition(&d(0.6, 0.0), 2.0), Satisfied);
        assert_eq!(classify_condition(&d(0.4, 10.0), 2.0), Violated);
    }

    #[test]
    fn log_power_boundary_is_sharp() {
        for kappa in [1.0, 2.0, 0.5, 3.0] {
            for eps in [0.1, 0.01] {
                let above = PsiDescriptor::log_power((1.0 + eps) / kappa);
                let below = PsiDescriptor::log_power((1.0 - eps) / kappa);
                assert_eq!(classify_condition(&above, kappa), Classification::Satisfied);
                assert_eq!(classify_condition(&below, kappa), Classification::Violated);
            }
            let at = PsiDescriptor::log_power(1.0 / kappa);
            assert_eq!(classify_condition(&at, kappa), Classification::Violated);
        }
    }

    #[test]
    fn slow_variation_examples() {
        let c = PsiDescriptor::constant(1.0);
        assert_eq!(slow_variation_deviation(&c, 0.5, 17).unwrap(), 0.0);
        let lp = PsiDescriptor::log_power(1.0);
        assert!(slow_variation_deviation(&lp, 0.5, 40).unwrap() < 0.05);
        assert_eq!(slow_variation_deviation(&lp, 1.0, 10).unwrap(), 0.0);
        // non-dyadic scale goes through the closed form
        let dev = slow_variation_deviation(&lp, 0.3, 1000).unwrap();
        assert!(dev > 0.0 && dev < 0.01);
        let tab = PsiDescriptor::Tabulated {
            table: vec![(0, 1.0)],
        };
        assert!(slow_variation_deviation(&tab, 0.3, 10).is_err());
        assert!(slow_variation_deviation(&lp, 0.0, 10).is_err());
    }

    #[test]
    fn json_shape() {
        let d: PsiDescriptor = serde_json::from_str(r#"{"family":"log-power","b":1}"#).unwrap();
        assert_eq!(d, PsiDescriptor::log_power(1.0));
        let d: PsiDescriptor = serde_json::from_str(r#"{"family":"constant"}"#).unwrap();
        assert_eq!(d, PsiDescriptor::constant(1.0));
        let d: PsiDescriptor =
            serde_json::from_str(r#"{"family":"tabulated","table":[[0,1.0],[4,0.5]]}"#).unwrap();
        assert_eq!(
            d,
            PsiDescriptor::Tabulated {
                table: vec![(0, 1.0), (4, 0.5)]
            }
        );
        assert!(d.validate().is_ok());
        let bad = PsiDescriptor::Tabulated {
            table: vec![(2, 1.0), (1, 0.5)],
        };
        assert!(bad.validate().is_err());
        assert!(PsiDescriptor::constant(0.0).validate().is_err());
    }

    proptest! {
        #[test]
        fn partial_sums_nondecreasing(b in 0.0f64..3.0, kappa in 0.2f64..4.0, depth in 0u64..200) {
            let d = PsiDescriptor::log_power(b);
            prop_assert!(summability_partial(&d, kappa, depth + 1) >= summability_partial(&d, kappa, depth));
        }

        #[test]
        fn constant_always_violated(c in 1e-3f64..1e3, kappa in 0.01f64..100.0) {
            prop_assert_eq!(classify_condition(&PsiDescriptor::constant(c), kappa), Classification::Violated);
        }

        #[test]
        fn dyadic_agrees_with_eval(b in 0.0f64..3.0, c in 0.0f64..2.0, j in 0u64..1074) {
            let t = crate::dyadic::pow2(-(j as i64));
            for d in [PsiDescriptor::log_power(b), PsiDescriptor::IteratedLogPower { b, c }] {
                prop_assert_eq!(d.dyadic(j).to_bits(), d.eval(t).unwrap().to_bits());
                prop_assert!(d.dyadic(j) > 0.0);
            }
        }

        #[test]
        fn log_power_nonincreasing(b in 0.0f64..5.0, j in 0u64..10_000) {
            let d = PsiDescriptor::log_power(b);
            prop_assert!(d.dyadic(j + 1) <= d.dyadic(j));
        }
    }
}
