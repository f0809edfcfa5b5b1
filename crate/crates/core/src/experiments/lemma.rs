use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::LemmaSettings;
use crate::error::Result;
use crate::sequences::lemma_le_partials;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub m: f64,
    pub n: u64,
    pub partial_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub threshold: f64,
    /// First `n` with `P_n > threshold`, if any `n <= n_max`.
    pub n: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub m: f64,
    /// `(P_2n - P_n) / P_2n` at `n = tail_n`.
    pub tail: f64,
    pub convergent_at_scale: bool,
    pub first_n_exceeding: Vec<Exceedance>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
    pub verdicts: Vec<LemmaVerdict>,
}

/// `1, 2, 5, 10, 20, 50, ...` up to `n_max`.
fn one_two_five(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut decade = 1u64;
    'outer: loop {
        for f in [1, 2, 5] {
            match decade.checked_mul(f) {
                Some(n) if n <= n_max => out.push(n),
                _ => break 'outer,
            }
        }
        decade = match decade.checked_mul(10) {
            Some(d) => d,
            None => break,
        };
    }
    out
}

/// Partial sums of `sum u_j / (u_1 + ... + u_j)^m` for every configured `m`,
/// recorded on a 1-2-5 grid plus every `n` the verdicts depend on.
pub fn run_lemma_le<F>(settings: &LemmaSettings, u: F) -> Result<LemmaReport>
where
    F: Fn(u64) -> f64 + Sync,
{
    settings.validate()?;
    let per_m: Vec<Vec<LemmaRow>> = settings
        .m_values
        .par_iter()
        .map(|&m| {
            let partials = lemma_le_partials(&u, m, settings.n_max)?;
            let mut ns = one_two_five(settings.n_max);
            ns.extend([settings.n_max, settings.tail_n, 2 * settings.tail_n]);
            for &thr in &settings.thresholds {
                if let Some(i) = partials.iter().position(|&v| v > thr) {
                    ns.push(i as u64 + 1);
                    if i > 0 {
                        ns.push(i as u64);
                    }
                }
            }
            ns.sort_unstable();
            ns.dedup();
            Ok(ns
                .into_iter()
                .map(|n| LemmaRow {
                    m,
                    n,
                    partial_sum: partials[n as usize - 1],
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<LemmaRow> = per_m.into_iter().flatten().collect();
    let verdicts = lemma_verdicts(settings, &rows);
    Ok(LemmaReport { rows, verdicts })
}

/// Verdicts from recorded rows only.
pub(crate) fn lemma_verdicts(settings: &LemmaSettings, rows: &[LemmaRow]) -> Vec<LemmaVerdict> {
    settings
        .m_values
        .iter()
        .filter_map(|&m| {
            let mine: Vec<&LemmaRow> = rows.iter().filter(|r| r.m == m).collect();
            let at = |n: u64| mine.iter().find(|r| r.n == n).map(|r| r.partial_sum);
            let (p_n, p_2n) = (at(settings.tail_n)?, at(2 * settings.tail_n)?);
            let tail = (p_2n - p_n) / p_2n;
            let first_n_exceeding = settings
                .thresholds
                .iter()
                .map(|&threshold| Exceedance {
                    threshold,
                    n: mine
                        .iter()
                        .filter(|r| r.partial_sum > threshold)
                        .map(|r| r.n)
                        .min(),
                })
                .collect();
            Some(LemmaVerdict {
                m,
                tail,
                convergent_at_scale: tail < settings.tail_tol,
                first_n_exceeding,
            })
        })
        .collect()
}
