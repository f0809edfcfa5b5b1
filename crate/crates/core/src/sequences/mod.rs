//! Dyadic block sequences: the series test, the block construction and its
//! cyclic rearrangement, and the coefficients `lambda_{j,k}` built from them.

mod blocks;
mod json;

pub use blocks::{BlockSequence, CursorState, Level};
pub use json::{BlockSequenceJson, LevelJson};

use crate::dyadic::{floor_scaled, pow2_big};
use crate::error::{invalid, Result};
use crate::params::Params;
use crate::psi::PsiDescriptor;
use crate::sum::NeumaierSum;

/// Above this level every power is evaluated in log space.
pub(crate) const LOG_SPACE_LEVEL: u64 = 512;

/// Partial sums `P_n = sum_{j<=n} u_j / (u_1 + ... + u_j)^m` for `n = 1..=n_max`.
///
/// `u` is called with 1-based indices. Any `m` is accepted, including
/// `m <= 1` where the series diverges.
pub fn lemma_le_partials<F>(u: F, m: f64, n_max: u64) -> Result<Vec<f64>>
where
    F: Fn(u64) -> f64,
{
    let mut running = NeumaierSum::new();
    let mut series = NeumaierSum::new();
    let mut out = Vec::with_capacity(n_max as usize);
    for j in 1..=n_max {
        let uj = u(j);
        if !(uj > 0.0) {
            return invalid(format!("series terms must be positive, u_{j} = {uj}"));
        }
        running.add(uj);
        series.add(uj / running.value().powf(m));
        out.push(series.value());
    }
    Ok(out)
}

/// `sum_{j=1}^{n} u_j / U_j^m` with `U_j = u_1 + ... + u_j`.
pub fn lemma_le_partial<F>(u: F, m: f64, n: u64) -> Result<f64>
where
    F: Fn(u64) -> f64,
{
    if n == 0 {
        return Ok(0.0);
    }
    Ok(*lemma_le_partials(u, m, n)?.last().expect("n >= 1"))
}

/// `(S_1, ..., S_depth)` with `S_j = sum_{k=1}^{j} Psi(2^-k)^kappa`.
pub fn build_s(desc: &PsiDescriptor, kappa: f64, depth: u64) -> Vec<f64> {
    let mut acc = NeumaierSum::new();
    (1..=depth)
        .map(|k| {
            acc.add(desc.dyadic(k).powf(kappa));
            acc.value()
        })
        .collect()
}

/// `Gamma_{j,m} = Psi(2^-j)^kappa / S_j^m`, `j >= 1`.
pub fn gamma(desc: &PsiDescriptor, kappa: f64, j: u64, m: f64) -> Result<f64> {
    if j == 0 {
        return invalid("Gamma_{j,m} is defined for j >= 1");
    }
    let s = *build_s(desc, kappa, j).last().expect("j >= 1");
    Ok(desc.dyadic(j).powf(kappa) / s.powf(m))
}

/// The unrearranged sequence: on level `j >= 2` the first
/// `floor(2^j Gamma_{j,1})` cells of `T_j` carry `S_j^L / Psi(2^-j)^p`,
/// levels 0 and 1 are zero.
pub fn build_lambda_blocks(
    desc: &PsiDescriptor,
    params: &Params,
    depth: u64,
) -> Result<BlockSequence> {
    desc.validate()?;
    let (p, q, kappa, l) = (params.p(), params.q(), params.kappa(), params.l());
    if !(p < q) || !p.is_finite() {
        return invalid(format!(
            "block construction needs finite p < q, got p={p}, q={q}"
        ));
    }
    if depth < 1 {
        return invalid("block construction needs depth >= 1");
    }
    let mut levels = Vec::with_capacity(depth as usize + 1);
    levels.push(Level::zero());
    let mut s_acc = NeumaierSum::new();
    for j in 1..=depth {
        let psi_kappa = desc.dyadic(j).powf(kappa);
        s_acc.add(psi_kappa);
        if j == 1 {
            levels.push(Level::zero());
            continue;
        }
        let s = s_acc.value();
        let gamma = (psi_kappa / s).min(1.0);
        let on_count = floor_scaled(gamma, j).min(pow2_big(j));
        let theta = if j <= LOG_SPACE_LEVEL {
            s.powf(l) / desc.dyadic(j).powf(p)
        } else {
            (l * s.ln() - p * desc.ln_dyadic(j)).exp()
        };
        levels.push(Level::new(theta, on_count, Default::default()));
    }
    BlockSequence::from_levels(levels)
}

/// The two-stage construction: blocks, then the cyclic rearrangement.
pub fn build_rearranged(
    desc: &PsiDescriptor,
    params: &Params,
    depth: u64,
) -> Result<BlockSequence> {
    Ok(build_lambda_blocks(desc, params, depth)?.rearrange())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_bigint::BigUint;
    use std::f64::consts::LN_2;

    fn flagship() -> Params {
        Params::new(2, 1, 1.0, 2.0, 1.5, 2, Some(0.25))
    }

    #[test]
    fn lemma_le_examples() {
        let v = lemma_le_partial(|_| 1.0, 2.0, 3).unwrap();
        assert_relative_eq!(v, 49.0 / 36.0, max_relative = 1e-15);
        let v = lemma_le_partial(|_| 1.0, 1.0, 4).unwrap();
        assert_relative_eq!(v, 25.0 / 12.0, max_relative = 1e-15);
        for (u1, m) in [(3.0f64, 2.0), (0.5, 0.3), (7.0, -1.0)] {
            let v = lemma_le_partial(|_| u1, m, 1).unwrap();
            assert_relative_eq!(v, u1.powf(1.0 - m), max_relative = 1e-15);
        }
    }

    #[test]
    fn lemma_le_rejects_nonpositive_terms() {
        assert!(lemma_le_partial(|j| if j == 3 { 0.0 } else { 1.0 }, 2.0, 5).is_err());
        assert!(lemma_le_partial(|_| -1.0, 2.0, 1).is_err());
        // terms beyond n are never inspected
        assert!(lemma_le_partial(|j| if j == 9 { -1.0 } else { 1.0 }, 2.0, 5).is_ok());
    }

    #[test]
    fn build_s_examples() {
        assert_eq!(
            build_s(&PsiDescriptor::constant(1.0), 2.0, 3),
            vec![1.0, 2.0, 3.0]
        );
        let s = build_s(&PsiDescriptor::log_power(1.0), 1.0, 2);
        assert_relative_eq!(s[0], 1.0 / (1.0 + LN_2), max_relative = 1e-15);
        assert_relative_eq!(
            s[1],
            1.0 / (1.0 + LN_2) + 1.0 / (1.0 + 2.0 * LN_2),
            max_relative = 1e-15
        );
        assert_relative_eq!(s[0], 0.5906, epsilon = 1e-4);
        assert_relative_eq!(s[1], 1.0096, epsilon = 1e-4);
        assert_eq!(
            build_s(&PsiDescriptor::log_power(0.0), 2.0, 5),
            vec![1.0, 2.0, 3.0, 4.0, 5.0]
        );
    }

    #[test]
    fn gamma_examples() {
        let c = PsiDescriptor::constant(1.0);
        assert_eq!(gamma(&c, 2.0, 4, 1.0).unwrap(), 0.25);
        assert_eq!(gamma(&c, 2.0, 3, 2.0).unwrap(), 1.0 / 9.0);
        assert_eq!(
            gamma(&PsiDescriptor::log_power(1.0), 2.0, 1, 1.0).unwrap(),
            1.0
        );
        assert!(gamma(&c, 2.0, 0, 1.0).is_err());
    }

    #[test]
    fn block_construction_examples() {
        let b = build_lambda_blocks(&PsiDescriptor::constant(1.0), &flagship(), 4).unwrap();
        for j in [0, 1] {
            assert_eq!(b.level(j).on_count, BigUint::from(0u8));
            assert_eq!(b.block_average(j), 0.0);
        }
        assert_eq!(b.level(2).on_count, BigUint::from(2u8));
        assert_relative_eq!(b.level(2).theta, 2f64.powf(0.25), max_relative = 1e-15);
        assert_eq!(b.level(4).on_count, BigUint::from(4u8));
        assert_relative_eq!(b.level(4).theta, 2f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(
            b.block_average(2),
            2.0 * 2f64.powf(0.25) / 4.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(b.block_average(2), 0.5946, epsilon = 1e-4);
        for j in 0..=4 {
            assert_eq!(b.level(j).start, BigUint::from(0u8));
        }
    }

    #[test]
    fn construction_requires_p_below_q() {
        let p = Params::new(2, 1, 2.0, 2.0, 1.5, 2, None);
        assert!(build_lambda_blocks(&PsiDescriptor::constant(1.0), &p, 4).is_err());
        assert!(build_lambda_blocks(&PsiDescriptor::constant(1.0), &flagship(), 0).is_err());
    }

    #[test]
    fn log_space_levels_continue_smoothly() {
        let d = PsiDescriptor::log_power(1.0);
        let b = build_lambda_blocks(&d, &flagship(), 520).unwrap();
        let (a, c) = (b.level(512).theta, b.level(513).theta);
        assert!(
            (c / a - 1.0).abs() < 1e-2,
            "theta jumps across the log-space switch: {a} -> {c}"
        );
        let b = build_lambda_blocks(&PsiDescriptor::constant(1.0), &flagship(), 600).unwrap();
        assert_relative_eq!(b.level(600).theta, 600f64.powf(0.25), max_relative = 1e-12);
    }
}
