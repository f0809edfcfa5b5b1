//! Brute-force oracles shared by the integration tests. Nothing here reuses
//! the sparse window arithmetic of the library.

#![allow(dead_code)]

use besov_lab::atoms::psi_nd;
use besov_lab::sequences::BlockSequence;
use besov_lab::Params;
use num_bigint::BigUint;
use num_traits::ToPrimitive;

/// Level `j` of `blocks` as `2^j` cell values, built by laying `n_j` cells
/// of `theta_j` one after another from `start_j`, wrapping around.
pub fn dense_level(blocks: &BlockSequence, j: u64) -> Vec<f64> {
    let lvl = blocks.level(j);
    let size = 1usize << j;
    let mut cells = vec![0.0; size];
    let start = lvl.start.to_usize().unwrap();
    for i in 0..lvl.on_count.to_usize().unwrap() {
        cells[(start + i) % size] = lvl.theta;
    }
    cells
}

/// Window starts of the sliding rearrangement from the fractional part of
/// the running window mass: `start_j = 2^j frac(W_{j-1})`.
pub fn rearranged_starts(on_counts: &[u64]) -> Vec<u64> {
    let mut w = 0.0f64;
    on_counts
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let start = (w.fract() * (1u64 << j) as f64) as u64;
            w += n as f64 / (1u64 << j) as f64;
            start
        })
        .collect()
}

pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// `(sum_j (sum_{k in T_j} lambda_{j,k}^p)^{q/p})^{1/q}` over every cell.
pub fn dense_mixed_norm(blocks: &BlockSequence, p: f64, q: f64, depth: u64) -> f64 {
    let per_level: Vec<f64> = (0..=depth)
        .map(|j| {
            let lo = 1u64 << j;
            let terms: Vec<f64> = (lo..2 * lo)
                .map(|k| blocks.lambda_value(p, j, &BigUint::from(k)).powf(p))
                .collect();
            pairwise_sum(&terms).powf(q / p)
        })
        .collect();
    pairwise_sum(&per_level).powf(1.0 / q)
}

/// `sum_{j<=J} sum_{k in T_j} lambda_{j,k} 2^{-j(s-N/p)} psi(2^j x - m_{j,k})`
/// over every atom, no pruning.
pub fn dense_field(blocks: &BlockSequence, params: &Params, x: &[f64]) -> f64 {
    let n = params.n();
    let (p, s) = (params.p(), params.s());
    let c_m = 2.0 * (params.m() as f64 + 2.0);
    let mut total = 0.0;
    for j in 0..=blocks.depth() {
        let scale = (1u64 << j) as f64;
        let amplitude = 2f64.powf(-(j as f64) * (s - n as f64 / p));
        for k in (1u64 << j)..(2u64 << j) {
            let lambda = blocks.lambda_value(p, j, &BigUint::from(k));
            if lambda == 0.0 {
                continue;
            }
            let arg: Vec<f64> = (0..n)
                .map(|i| {
                    let m = if i + 1 == n {
                        k as f64
                    } else {
                        c_m * scale * j as f64
                    };
                    scale * x[i] - m
                })
                .collect();
            total += lambda * amplitude * psi_nd(&arg);
        }
    }
    total
}
