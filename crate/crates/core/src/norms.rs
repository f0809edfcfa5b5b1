//! Finite differences, grid `L^p` quasi-norms, moduli of smoothness and the
//! (generalized) Besov seminorms built from them.
//!
//! All integrals are midpoint rules on box-local uniform grids. The
//! difference `Delta_h^M f` is integrated over the stencil union
//! `supp f - i h`, `i = 0..=M`, so no inflated bounding box is ever gridded.
//! Every estimate of `sup_{|h| <= t}` is a max over finitely many `h` and
//! hence a lower bound.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{BoxDomain, GridBox};
use crate::error::{invalid, Result};
use crate::psi::PsiDescriptor;
use crate::sum::{chunked_sum, compensated_sum};

/// A function on `R^dim` that can be sampled pointwise and on tensor grids.
pub trait Field: Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    /// Values on `axes[0] x axes[1] x ...`, row-major (last axis fastest).
    /// Implementors with product structure should override this.
    fn eval_grid(&self, axes: &[Vec<f64>]) -> Vec<f64> {
        tensor_eval(axes, |x| self.eval(x))
    }
}

/// Pointwise evaluation over a tensor grid, parallel over rows.
pub fn tensor_eval<F>(axes: &[Vec<f64>], f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let total: usize = axes.iter().map(Vec::len).product();
    let inner = axes.last().map_or(1, Vec::len).max(1);
    let mut out = vec![0.0; total];
    out.par_chunks_mut(inner)
        .enumerate()
        .for_each(|(row, chunk)| {
            let mut x = vec![0.0; axes.len()];
            let mut rem = row;
            for a in (0..axes.len().saturating_sub(1)).rev() {
                x[a] = axes[a][rem % axes[a].len()];
                rem /= axes[a].len();
            }
            for (c, v) in chunk.iter_mut().enumerate() {
                x[axes.len() - 1] = axes[axes.len() - 1][c];
                *v = f(&x);
            }
        });
    out
}

/// Wraps a closure as a [`Field`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Field for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Built-in fixtures with closed-form norms.
pub mod fixtures {
    use super::Field;

    /// Indicator of the box `[lo, hi]`.
    #[derive(Clone, Debug)]
    pub struct Indicator {
        pub lo: Vec<f64>,
        pub hi: Vec<f64>,
    }

    impl Indicator {
        pub fn unit_interval() -> Self {
            Self {
                lo: vec![0.0],
                hi: vec![1.0],
            }
        }
    }

    impl Field for Indicator {
        fn dim(&self) -> usize {
            self.lo.len()
        }
        fn eval(&self, x: &[f64]) -> f64 {
            let inside = x
                .iter()
                .enumerate()
                .all(|(a, &v)| self.lo[a] <= v && v <= self.hi[a]);
            if inside {
                1.0
            } else {
                0.0
            }
        }
    }

    /// `a + b . x` on all of `R^dim`.
    #[derive(Clone, Debug)]
    pub struct Affine {
        pub a: f64,
        pub b: Vec<f64>,
    }

    impl Field for Affine {
        fn dim(&self) -> usize {
            self.b.len()
        }
        fn eval(&self, x: &[f64]) -> f64 {
            self.a + self.b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>()
        }
    }
}

fn binomial_row(m: usize) -> Vec<f64> {
    let mut row = vec![1.0f64];
    for k in 0..m {
        let next = row[k] * (m - k) as f64 / (k + 1) as f64;
        row.push(next.round());
    }
    row
}

/// Stencil weights `(-1)^{M-j} C(M, j)`, `j = 0..=M`.
pub fn difference_coefficients(m: usize) -> Vec<f64> {
    binomial_row(m)
        .into_iter()
        .enumerate()
        .map(|(j, c)| if (m - j).is_multiple_of(2) { c } else { -c })
        .collect()
}

/// `Delta_h^M f(x) = sum_j (-1)^{M-j} C(M,j) f(x + j h)`.
pub fn finite_diff(f: &dyn Field, m: usize, h: &[f64], x: &[f64]) -> f64 {
    let mut y = x.to_vec();
    let terms = difference_coefficients(m)
        .into_iter()
        .enumerate()
        .map(|(j, c)| {
            for (a, v) in y.iter_mut().enumerate() {
                *v = x[a] + j as f64 * h[a];
            }
            c * f.eval(&y)
        });
    compensated_sum(terms.collect::<Vec<_>>())
}

#[inline]
fn abs_pow(v: f64, p: f64) -> f64 {
    let a = v.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return invalid(format!(
            "integrability exponent must satisfy 0 < p < inf, got {p}"
        ));
    }
    Ok(())
}

fn cell_center(axes: &[Vec<f64>], mut idx: usize, shift: &[f64], out: &mut [f64]) {
    for a in (0..axes.len()).rev() {
        let n = axes[a].len();
        out[a] = axes[a][idx % n] - shift[a];
        idx /= n;
    }
}

/// `int |f|^p` over the ordered union of the domain's boxes.
fn lp_power(f: &dyn Field, p: f64, domain: &BoxDomain) -> f64 {
    let boxes = domain.boxes();
    let partials: Vec<f64> = boxes
        .iter()
        .enumerate()
        .map(|(b, bx)| {
            let earlier: Vec<&GridBox> = boxes[..b].iter().filter(|o| o.intersects(bx)).collect();
            let zero = vec![0.0; bx.dim()];
            let axes = bx.axes(&zero);
            let values = f.eval_grid(&axes);
            let sum = chunked_sum(values.len(), |c| {
                if !earlier.is_empty() {
                    let mut x = vec![0.0; axes.len()];
                    cell_center(&axes, c, &zero, &mut x);
                    if earlier.iter().any(|o| o.contains(&x)) {
                        return 0.0;
                    }
                }
                abs_pow(values[c], p)
            });
            sum * bx.cell_volume()
        })
        .collect();
    compensated_sum(partials)
}

/// Midpoint-rule `||f||_{L^p}` over the domain (0 for an empty domain).
pub fn lp_quasinorm(f: &dyn Field, p: f64, domain: &BoxDomain) -> Result<f64> {
    check_p(p)?;
    Ok(lp_power(f, p, domain).powf(1.0 / p))
}

/// `int |Delta_h^M f|^p` where `domain` covers `supp f`; the integration
/// region is the ordered union of the copies `box - i h`, `i = 0..=M`.
fn difference_lp_power(f: &dyn Field, m: usize, p: f64, domain: &BoxDomain, h: &[f64]) -> f64 {
    let coef = difference_coefficients(m);
    let copies: Vec<(usize, usize, GridBox)> = domain
        .boxes()
        .iter()
        .enumerate()
        .flat_map(|(b, bx)| {
            (0..=m).map(move |i| {
                let shift: Vec<f64> = h.iter().map(|v| -(i as f64) * v).collect();
                (b, i, bx.translated(&shift))
            })
        })
        .collect();

    let mut partials = Vec::with_capacity(copies.len());
    let mut grids: Vec<Vec<f64>> = Vec::new();
    let mut axes: Vec<Vec<f64>> = Vec::new();
    let mut current_box = usize::MAX;
    for (idx, (b, i, rect)) in copies.iter().enumerate() {
        let bx = &domain.boxes()[*b];
        if *b != current_box {
            current_box = *b;
            let zero = vec![0.0; bx.dim()];
            axes = bx.axes(&zero);
            // f on the base grid translated by r h, r = -M..=M
            grids = (-(m as i64)..=m as i64)
                .map(|r| {
                    let shifted: Vec<Vec<f64>> = axes
                        .iter()
                        .enumerate()
                        .map(|(a, ax)| ax.iter().map(|v| v + r as f64 * h[a]).collect())
                        .collect();
                    f.eval_grid(&shifted)
                })
                .collect();
        }
        let earlier: Vec<&GridBox> = copies[..idx]
            .iter()
            .map(|(_, _, r)| r)
            .filter(|o| o.intersects(rect))
            .collect();
        let shift: Vec<f64> = h.iter().map(|v| *i as f64 * v).collect();
        let len = grids[0].len();
        let sum = chunked_sum(len, |c| {
            if !earlier.is_empty() {
                let mut x = vec![0.0; axes.len()];
                cell_center(&axes, c, &shift, &mut x);
                if earlier.iter().any(|o| o.contains(&x)) {
                    return 0.0;
                }
            }
            let mut v = 0.0;
            for (j, cj) in coef.iter().enumerate() {
                // f(x + j h) with x = center - i h  ->  grid shifted by (j - i) h
                v += cj * grids[(j as i64 - *i as i64 + m as i64) as usize][c];
            }
            abs_pow(v, p)
        });
        partials.push(sum * bx.cell_volume());
    }
    compensated_sum(partials)
}

/// `||Delta_h^M f||_{L^p}` on the stencil union of `domain`.
pub fn difference_lp_norm(
    f: &dyn Field,
    m: usize,
    p: f64,
    domain: &BoxDomain,
    h: &[f64],
) -> Result<f64> {
    check_p(p)?;
    if m == 0 {
        return invalid("difference order must be >= 1");
    }
    Ok(difference_lp_power(f, m, p, domain, h).powf(1.0 / p))
}

/// Difference steps sampled per `t`: `directions` unit vectors scaled by
/// each entry of `radii` (fractions of `t`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HSampling {
    pub directions: usize,
    pub radii: Vec<f64>,
}

impl HSampling {
    /// 1-D: `{+-t, +-3t/4, +-t/2}`; 2-D: 8 directions at radii `{t, t/2}`;
    /// higher dimensions: the `+-e_i` axes at radii `{t, t/2}`.
    pub fn default_for(dim: usize) -> Self {
        match dim {
            1 => Self {
                directions: 2,
                radii: vec![1.0, 0.75, 0.5],
            },
            2 => Self {
                directions: 8,
                radii: vec![1.0, 0.5],
            },
            d => Self {
                directions: 2 * d,
                radii: vec![1.0, 0.5],
            },
        }
    }

    fn unit_directions(&self, dim: usize) -> Vec<Vec<f64>> {
        match dim {
            1 => vec![vec![1.0], vec![-1.0]],
            2 if self.directions == 8 => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                [
                    (1.0, 0.0),
                    (r, r),
                    (0.0, 1.0),
                    (-r, r),
                    (-1.0, 0.0),
                    (-r, -r),
                    (0.0, -1.0),
                    (r, -r),
                ]
                .iter()
                .map(|&(a, b)| vec![a, b])
                .collect()
            }
            2 => (0..self.directions)
                .map(|k| {
                    let ang = std::f64::consts::TAU * k as f64 / self.directions as f64;
                    vec![ang.cos(), ang.sin()]
                })
                .collect(),
            d => (0..d)
                .flat_map(|a| {
                    [1.0, -1.0].into_iter().map(move |sgn| {
                        let mut v = vec![0.0; d];
                        v[a] = sgn;
                        v
                    })
                })
                .collect(),
        }
    }

    /// All sampled `h` with `|h| <= t`.
    pub fn vectors(&self, dim: usize, t: f64) -> Vec<Vec<f64>> {
        let dirs = self.unit_directions(dim);
        self.radii
            .iter()
            .flat_map(|r| {
                dirs.iter()
                    .map(move |d| d.iter().map(|c| c * r * t).collect())
            })
            .collect()
    }

    pub fn count(&self, dim: usize) -> usize {
        self.unit_directions(dim).len() * self.radii.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return invalid("difference radii must be nonempty fractions in (0, 1]");
        }
        if self.directions == 0 {
            return invalid("at least one difference direction is required");
        }
        Ok(())
    }
}

/// `max_{h in h_set} ||Delta_h^M f||_p`, a lower bound for the modulus of
/// smoothness `omega_M(f, t)_p`. `domain` must cover `supp f`.
pub fn modulus(
    f: &dyn Field,
    m: usize,
    p: f64,
    t: f64,
    domain: &BoxDomain,
    h_set: &[Vec<f64>],
) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return invalid(format!("modulus step bound must lie in (0, 1], got t={t}"));
    }
    if h_set.is_empty() {
        return invalid("the set of difference steps is empty");
    }
    for h in h_set {
        let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > t * (1.0 + 1e-12) {
            return invalid(format!("difference step {h:?} is longer than t={t}"));
        }
    }
    let mut best = 0.0f64;
    for h in h_set {
        best = best.max(difference_lp_norm(f, m, p, domain, h)?);
    }
    Ok(best)
}

/// Moduli `omega_j` at `t_j = 2^-j`, `j = 0..=j_max`.
pub fn modulus_profile(
    f: &dyn Field,
    m: usize,
    p: f64,
    domain: &BoxDomain,
    j_max: u32,
    sampling: &HSampling,
) -> Result<Vec<f64>> {
    sampling.validate()?;
    (0..=j_max)
        .map(|j| {
            let t = crate::dyadic::pow2(-(j as i64));
            modulus(f, m, p, t, domain, &sampling.vectors(f.dim(), t))
        })
        .collect()
}

/// Reproducibility metadata travels with every estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub resolution: f64,
    pub t_levels: u32,
    pub h_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeminormSettings {
    pub s: f64,
    pub p: f64,
    pub q: f64,
    pub m: usize,
    pub j_max: u32,
    pub sampling: HSampling,
}

impl SeminormSettings {
    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        if !(self.q > 0.0) {
            return invalid(format!(
                "summability exponent must be positive, got q={}",
                self.q
            ));
        }
        if !(self.m as f64 > self.s) {
            return invalid(format!(
                "difference order M={} must exceed s={}",
                self.m, self.s
            ));
        }
        self.sampling.validate()
    }
}

/// Dyadic weights `2^{js} Psi(2^-j)`.
pub fn seminorm_weights(desc: &PsiDescriptor, s: f64, j_max: u32) -> Vec<f64> {
    (0..=j_max as u64)
        .map(|j| (j as f64 * s).exp2() * desc.dyadic(j))
        .collect()
}

/// Discrete seminorm from precomputed moduli: `(sum_j (w_j omega_j)^q ln 2)^{1/q}`,
/// or `max_j w_j omega_j` for `q = inf`.
pub fn seminorm_from_moduli(moduli: &[f64], desc: &PsiDescriptor, s: f64, q: f64) -> f64 {
    let weights = seminorm_weights(desc, s, moduli.len().saturating_sub(1) as u32);
    let terms = moduli.iter().zip(&weights).map(|(o, w)| w * o);
    if q.is_infinite() {
        terms.fold(0.0, f64::max)
    } else {
        (compensated_sum(terms.map(|v| v.powf(q)).collect::<Vec<_>>()) * LN_2).powf(1.0 / q)
    }
}

/// Generalized Besov seminorm `[f]_{B^{(s,Psi)}_{p,q}}`, discretized at
/// `t_j = 2^-j`; `Psi == 1` gives the classical seminorm.
pub fn seminorm(
    f: &dyn Field,
    desc: &PsiDescriptor,
    settings: &SeminormSettings,
    domain: &BoxDomain,
) -> Result<NormEstimate> {
    settings.validate()?;
    let moduli = modulus_profile(
        f,
        settings.m,
        settings.p,
        domain,
        settings.j_max,
        &settings.sampling,
    )?;
    Ok(NormEstimate {
        value: seminorm_from_moduli(&moduli, desc, settings.s, settings.q),
        resolution: domain.resolution(),
        t_levels: settings.j_max + 1,
        h_samples: settings.sampling.count(f.dim()),
    })
}

/// `[f]_{B^s_{p,q}}`, the `Psi == 1` case.
pub fn classical_seminorm(
    f: &dyn Field,
    settings: &SeminormSettings,
    domain: &BoxDomain,
) -> Result<NormEstimate> {
    seminorm(f, &PsiDescriptor::constant(1.0), settings, domain)
}

/// `||f||_{L^p} + [f]_{B^{(s,Psi)}_{p,q}}`.
pub fn besov_norm(
    f: &dyn Field,
    desc: &PsiDescriptor,
    settings: &SeminormSettings,
    domain: &BoxDomain,
) -> Result<NormEstimate> {
    let semi = seminorm(f, desc, settings, domain)?;
    let lp = lp_quasinorm(f, settings.p, domain)?;
    Ok(NormEstimate {
        value: lp + semi.value,
        ..semi
    })
}
