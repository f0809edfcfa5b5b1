//! Smooth bump atoms and the truncated counterexample field
//! `f_J(x) = sum_{j<=J, k} lambda_{j,k} 2^{-j(s-N/p)} psi(2^j x - m_{j,k})`.

use num_traits::ToPrimitive;

use crate::domain::{BoxDomain, GridBox};
use crate::dyadic::{ldexp, pow2};
use crate::error::{invalid, Result};
use crate::norms::Field;
use crate::params::Params;
use crate::psi::PsiDescriptor;
use crate::sequences::{build_rearranged, BlockSequence};

/// Deepest level an [`AtomicField`] accepts; beyond it the atoms are finer
/// than the f64 spacing of the coordinates they live on.
pub const MAX_FIELD_DEPTH: u64 = 48;

/// `e^{-1/t^2}` for `t > 0`, else 0. Clamps to exactly 0 where the result
/// would be subnormal.
pub fn bump_u(t: f64) -> f64 {
    if !(t > 0.0) {
        return 0.0;
    }
    let e = 1.0 / (t * t);
    if e > -f64::MIN_POSITIVE.ln() {
        0.0
    } else {
        (-e).exp()
    }
}

/// `u(1 + t) u(1 - t)`, supported in `(-1, 1)`.
pub fn bump_v(t: f64) -> f64 {
    bump_u(1.0 + t) * bump_u(1.0 - t)
}

/// `v(t) / (v(t-1) + v(t) + v(t+1))`; 0 wherever `v(t) = 0`.
pub fn psi0(t: f64) -> f64 {
    let v = bump_v(t);
    if v == 0.0 {
        return 0.0;
    }
    v / (bump_v(t - 1.0) + v + bump_v(t + 1.0))
}

/// One factor of the tensor bump: `psi0(t/2) / 2`, supported in `(-2, 2)`.
#[inline]
pub fn psi_factor(t: f64) -> f64 {
    0.5 * psi0(0.5 * t)
}

/// `psi(x) = prod_i psi0(x_i / 2) / 2`.
pub fn psi_nd(x: &[f64]) -> f64 {
    x.iter().map(|&t| psi_factor(t)).product()
}

/// `m_{j,k} = (C_M 2^j j, ..., C_M 2^j j, k)` in `R^N`.
pub fn atom_offset(params: &Params, j: u64, k: u64) -> Vec<f64> {
    let n = params.n();
    let lead = params.offset_constant() * pow2(j as i64) * j as f64;
    let mut m = vec![lead; n];
    m[n - 1] = k as f64;
    m
}

#[derive(Clone, Debug)]
struct LevelWindow {
    coefficient: f64,
    on: u64,
    start: u64,
}

/// The truncated field `f_J` built from a rearranged block sequence.
///
/// Level `j` factorizes as `c_j A(2^j (x' - C_M j)) B_j(x_N)` with
/// `B_j(y) = sum_{k on} psi_factor(2^j y - k)`, which both the pointwise
/// and the grid evaluators exploit.
#[derive(Clone, Debug)]
pub struct AtomicField {
    params: Params,
    blocks: BlockSequence,
    c_m: f64,
    scale: f64,
    windows: Vec<LevelWindow>,
}

impl AtomicField {
    pub fn new(params: Params, blocks: BlockSequence) -> Result<Self> {
        let p = params.p();
        if !(p > 0.0 && p.is_finite()) {
            return invalid(format!("atomic field needs 0 < p < inf, got {p}"));
        }
        if blocks.depth() > MAX_FIELD_DEPTH {
            return invalid(format!(
                "atomic field depth {} exceeds the supported {MAX_FIELD_DEPTH}",
                blocks.depth()
            ));
        }
        let n = params.n() as f64;
        let windows = blocks
            .levels()
            .iter()
            .enumerate()
            .map(|(j, lvl)| {
                let amplitude = ((n / p - params.s()) * j as f64).exp2();
                let lambda = pow2(-(j as i64)).powf(1.0 / p) * lvl.theta.powf(1.0 / p);
                LevelWindow {
                    coefficient: amplitude * lambda,
                    on: lvl.on_count.to_u64().expect("depth <= 48"),
                    start: lvl.start.to_u64().expect("depth <= 48"),
                }
            })
            .collect();
        Ok(Self {
            c_m: params.offset_constant(),
            params,
            blocks,
            scale: 1.0,
            windows,
        })
    }

    /// Builds and rearranges the blocks for `desc` up to `depth`.
    pub fn build(desc: &PsiDescriptor, params: &Params, depth: u64) -> Result<Self> {
        Self::new(params.clone(), build_rearranged(desc, params, depth)?)
    }

    /// The same field with every `lambda_{j,k}` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            scale: self.scale * c,
            ..self.clone()
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn blocks(&self) -> &BlockSequence {
        &self.blocks
    }

    pub fn depth(&self) -> u64 {
        self.blocks.depth()
    }

    pub fn offset_constant(&self) -> f64 {
        self.c_m
    }

    /// `a_j = 2^{-j(s - N/p)}`.
    pub fn amplitude(&self, j: u64) -> f64 {
        ((self.params.n() as f64 / self.params.p() - self.params.s()) * j as f64).exp2()
    }

    fn level_active(&self, j: u64) -> bool {
        let w = &self.windows[j as usize];
        w.on > 0 && w.coefficient != 0.0
    }

    /// Half-width `2^{1-j}` of level `j`'s support in every coordinate.
    fn half_width(j: u64) -> f64 {
        pow2(1 - j as i64)
    }

    /// The single level whose first-coordinate support may contain `x1`.
    fn candidate_level(&self, x1: f64) -> Option<u64> {
        let j = (x1 / self.c_m).round();
        if !(0.0..=self.depth() as f64).contains(&j) {
            return None;
        }
        let j = j as u64;
        ((x1 - self.c_m * j as f64).abs() < Self::half_width(j)).then_some(j)
    }

    /// `c_j prod_{i<N} psi_factor(2^j (x_i - C_M j))`.
    fn lead_factor(&self, j: u64, lead: &[f64]) -> f64 {
        let center = self.c_m * j as f64;
        let mut v = self.windows[j as usize].coefficient;
        for &x in lead {
            if v == 0.0 {
                break;
            }
            v *= psi_factor(ldexp(x - center, j as i64));
        }
        v
    }

    /// `sum_{k in T_j on, |2^j y - k| < 2} psi_factor(2^j y - k)`.
    fn last_factor(&self, j: u64, y: f64) -> f64 {
        let w = &self.windows[j as usize];
        let size = 1u64 << j;
        let t = ldexp(y, j as i64);
        let lo = (t - 2.0).ceil().max(size as f64);
        let hi = (t + 2.0).floor().min((2 * size - 1) as f64);
        if !(lo <= hi) {
            return 0.0;
        }
        let mut acc = 0.0;
        for k in lo as u64..=hi as u64 {
            let offset = k - size;
            if (offset + size - w.start) % size < w.on {
                acc += psi_factor(t - k as f64);
            }
        }
        acc
    }

    /// `f_J(x)` with level pruning on the first coordinate and cell pruning on
    /// the last.
    pub fn eval_f(&self, x: &[f64]) -> f64 {
        let n = self.params.n();
        debug_assert_eq!(x.len(), n);
        let Some(j) = self.candidate_level(x[0]) else {
            return 0.0;
        };
        if !self.level_active(j) {
            return 0.0;
        }
        let a = self.lead_factor(j, &x[..n - 1]);
        if a == 0.0 {
            return 0.0;
        }
        self.scale * (a * self.last_factor(j, x[n - 1]))
    }

    /// `x_N -> B_j(x_N)` is nonzero somewhere near `y` on level `j`.
    fn touches(&self, j: u64, y: f64) -> bool {
        self.level_active(j) && self.last_factor(j, y) != 0.0
    }

    /// Per-level boxes `[C_M j +- 2^{1-j}]^{N-1} x [1 - 2^{1-j}, 2 + 2^{1-j}]`
    /// for every nonzero level, gridded at `2^{-(j + 3 + refine)}`.
    pub fn support_boxes(&self, refine: u32) -> BoxDomain {
        let n = self.params.n();
        let boxes = (0..=self.depth())
            .filter(|&j| self.level_active(j))
            .map(|j| {
                let r = Self::half_width(j);
                let c = self.c_m * j as f64;
                let mut lo = vec![c - r; n];
                let mut hi = vec![c + r; n];
                lo[n - 1] = 1.0 - r;
                hi[n - 1] = 2.0 + r;
                GridBox::new(lo, hi, pow2(-(j as i64 + 3 + refine as i64))).expect("nonempty box")
            })
            .collect();
        BoxDomain::new(boxes).expect("uniform dimension")
    }

    /// `x' -> f_J(x', y)` for `N = 2`.
    pub fn partial_map(&self, y: f64) -> Result<PartialMap<'_>> {
        if self.params.n() != 2 {
            return invalid(format!(
                "partial maps are implemented for N = 2 only, got N = {}",
                self.params.n()
            ));
        }
        Ok(PartialMap { field: self, y })
    }
}

impl Field for AtomicField {
    fn dim(&self) -> usize {
        self.params.n()
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.eval_f(x)
    }

    fn eval_grid(&self, axes: &[Vec<f64>]) -> Vec<f64> {
        let n = self.params.n();
        debug_assert_eq!(axes.len(), n);
        let lead_axes = &axes[..n - 1];
        let last = &axes[n - 1];
        let rows: usize = lead_axes.iter().map(Vec::len).product();
        let mut out = vec![0.0; rows * last.len()];
        for j in 0..=self.depth() {
            if !self.level_active(j) {
                continue;
            }
            let (c, r) = (self.c_m * j as f64, Self::half_width(j));
            let reaches = lead_axes.iter().all(|ax| {
                let (lo, hi) = ax
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                        (a.min(v), b.max(v))
                    });
                lo < c + r && hi > c - r
            });
            if !reaches {
                continue;
            }
            let tail: Vec<f64> = last.iter().map(|&y| self.last_factor(j, y)).collect();
            if tail.iter().all(|&b| b == 0.0) {
                continue;
            }
            let mut point = vec![0.0; n - 1];
            for row in 0..rows {
                let mut rem = row;
                for a in (0..n - 1).rev() {
                    point[a] = lead_axes[a][rem % lead_axes[a].len()];
                    rem /= lead_axes[a].len();
                }
                if point.iter().any(|&x| (x - c).abs() >= r) {
                    continue;
                }
                let a = self.lead_factor(j, &point);
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out[row * last.len()..(row + 1) * last.len()];
                for (o, b) in dst.iter_mut().zip(&tail) {
                    *o += self.scale * (a * b);
                }
            }
        }
        out
    }
}

/// The one-variable restriction `x -> f_J(x, y)`.
#[derive(Clone, Copy, Debug)]
pub struct PartialMap<'a> {
    field: &'a AtomicField,
    y: f64,
}

impl PartialMap<'_> {
    pub fn y(&self) -> f64 {
        self.y
    }

    /// Boxes `[C_M j +- 2^{1-j}]` of the levels that are nonzero at `y`.
    pub fn support_boxes(&self, refine: u32) -> BoxDomain {
        let f = self.field;
        let boxes = (0..=f.depth())
            .filter(|&j| f.touches(j, self.y))
            .map(|j| {
                let (c, r) = (f.c_m * j as f64, AtomicField::half_width(j));
                GridBox::new(
                    vec![c - r],
                    vec![c + r],
                    pow2(-(j as i64 + 3 + refine as i64)),
                )
                .expect("nonempty box")
            })
            .collect();
        BoxDomain::new(boxes).expect("one-dimensional boxes")
    }
}

impl Field for PartialMap<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.field.eval_f(&[x[0], self.y])
    }

    fn eval_grid(&self, axes: &[Vec<f64>]) -> Vec<f64> {
        self.field.eval_grid(&[axes[0].clone(), vec![self.y]])
    }
}
