use num_bigint::BigUint;
use num_traits::Zero;

use super::LOG_SPACE_LEVEL;
use crate::dyadic::{floor_scaled, pow2, pow2_big, ratio};
use crate::error::{invalid, Error, Result};
use crate::psi::PsiDescriptor;
use crate::sum::NeumaierSum;

/// One dyadic block `T_j = {2^j, ..., 2^{j+1} - 1}`.
///
/// Cells with offset `(k - 2^j - start) mod 2^j < on_count` carry `theta`,
/// every other cell carries 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Level {
    pub theta: f64,
    pub on_count: BigUint,
    pub start: BigUint,
}

impl Level {
    pub fn new(theta: f64, on_count: BigUint, start: BigUint) -> Self {
        Self {
            theta,
            on_count,
            start,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, BigUint::zero(), BigUint::zero())
    }

    fn is_zero(&self) -> bool {
        self.on_count.is_zero() || self.theta == 0.0
    }
}

/// Exact dyadic cursor `numer / 2^level` in `[0, 1)` driving the
/// sliding-window rearrangement.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CursorState {
    numer: BigUint,
    level: u64,
}

impl CursorState {
    pub fn numerator(&self) -> &BigUint {
        &self.numer
    }

    /// Exponent of the power-of-two denominator.
    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn to_f64(&self) -> f64 {
        ratio(&self.numer, self.level)
    }

    /// `floor(c * 2^j)`.
    fn cell(&self, j: u64) -> BigUint {
        if j >= self.level {
            &self.numer << (j - self.level)
        } else {
            &self.numer >> (self.level - j)
        }
    }

    /// Places a run of `n` cells at level `j` starting at the cursor's cell
    /// and advances the cursor to the end of the run, modulo 1.
    fn place(&mut self, j: u64, n: &BigUint) -> BigUint {
        let start = self.cell(j);
        self.numer = (&start + n) % pow2_big(j);
        self.level = j;
        start
    }
}

/// Sparse representation of a block sequence up to depth `J`: O(J) levels,
/// never the `2^{J+1}` dense cells.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSequence {
    levels: Vec<Level>,
}

impl BlockSequence {
    /// Checks the structural invariants `0 <= n_j <= 2^j`, `start_j < 2^j`
    /// and `theta_j >= 0`.
    pub fn from_levels(levels: Vec<Level>) -> Result<Self> {
        if levels.is_empty() {
            return invalid("a block sequence needs at least level 0");
        }
        for (j, lvl) in levels.iter().enumerate() {
            let size = pow2_big(j as u64);
            if lvl.on_count > size {
                return Err(Error::MalformedBlocks(format!(
                    "level {j}: on-count exceeds 2^{j}"
                )));
            }
            if lvl.start >= size {
                return Err(Error::MalformedBlocks(format!(
                    "level {j}: window start outside the block"
                )));
            }
            if !(lvl.theta >= 0.0 && lvl.theta.is_finite()) {
                return Err(Error::MalformedBlocks(format!(
                    "level {j}: theta = {} is not a finite nonnegative value",
                    lvl.theta
                )));
            }
        }
        Ok(Self { levels })
    }

    /// Deepest level `J`.
    pub fn depth(&self) -> u64 {
        self.levels.len() as u64 - 1
    }

    pub fn level(&self, j: u64) -> &Level {
        &self.levels[j as usize]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// The prefix `0..=depth` (construction is level-local, so this equals
    /// building at the smaller depth).
    pub fn truncated(&self, depth: u64) -> Self {
        let n = (depth.min(self.depth()) + 1) as usize;
        Self {
            levels: self.levels[..n].to_vec(),
        }
    }

    /// Replaces every on-count with 0.
    pub fn zeroed(&self) -> Self {
        Self {
            levels: self
                .levels
                .iter()
                .map(|l| Level::new(l.theta, BigUint::zero(), BigUint::zero()))
                .collect(),
        }
    }

    /// Whether `offset` (in `0..2^j`) lies in level `j`'s on-window.
    pub fn is_on(&self, j: u64, offset: &BigUint) -> bool {
        let lvl = self.level(j);
        if lvl.on_count.is_zero() {
            return false;
        }
        let shifted = if offset >= &lvl.start {
            offset - &lvl.start
        } else {
            offset + pow2_big(j) - &lvl.start
        };
        shifted < lvl.on_count
    }

    /// Value at cell offset `offset` of block `T_j`.
    pub fn value_at(&self, j: u64, offset: &BigUint) -> f64 {
        if self.is_on(j, offset) {
            self.level(j).theta
        } else {
            0.0
        }
    }

    /// `n_j * theta_j / 2^j`.
    pub fn block_average(&self, j: u64) -> f64 {
        let lvl = self.level(j);
        ratio(&lvl.on_count, j) * lvl.theta
    }

    /// Exact `W_J = sum_{j<=J} n_j 2^-j` as a numerator over `2^J`.
    pub fn window_mass_numerator(&self) -> BigUint {
        let depth = self.depth();
        self.levels
            .iter()
            .enumerate()
            .fold(BigUint::zero(), |acc, (j, l)| {
                acc + (&l.on_count << (depth - j as u64))
            })
    }

    /// `floor(W_J)`, exact.
    pub fn window_mass_floor(&self) -> u64 {
        let w = self.window_mass_numerator() >> self.depth();
        w.try_into().unwrap_or(u64::MAX)
    }

    pub fn window_mass(&self) -> f64 {
        ratio(&self.window_mass_numerator(), self.depth())
    }

    /// Cyclic sliding-window rearrangement. Level `j`'s run starts at the
    /// cell holding the cursor and the cursor moves to the end of the run,
    /// so consecutive runs tile the circle `[0, 1)` without gaps.
    pub fn rearrange(&self) -> Self {
        self.rearrange_with_cursor().0
    }

    pub fn rearrange_with_cursor(&self) -> (Self, CursorState) {
        let mut cursor = CursorState::default();
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(j, l)| {
                let start = cursor.place(j as u64, &l.on_count);
                Level::new(l.theta, l.on_count.clone(), start)
            })
            .collect();
        (Self { levels }, cursor)
    }

    /// Number of levels `j <= depth` whose nonzero on-window contains the cell
    /// `floor(2^j x)`, `x` in `[1, 2)`.
    pub fn coverage_count(&self, x: f64, depth: u64) -> Result<usize> {
        let phi = probe_fraction(x)?;
        Ok((0..=depth.min(self.depth()))
            .filter(|&j| !self.level(j).is_zero() && self.is_on(j, &floor_scaled(phi, j)))
            .count())
    }

    /// Levels `j <= depth` covering `x`, in increasing order.
    pub fn covered_levels(&self, x: f64, depth: u64) -> Result<Vec<u64>> {
        let phi = probe_fraction(x)?;
        Ok((0..=depth.min(self.depth()))
            .filter(|&j| !self.level(j).is_zero() && self.is_on(j, &floor_scaled(phi, j)))
            .collect())
    }

    /// `lambda_{j,k} = 2^{-j/p} (Lambda*_k)^{1/p}` for `k in T_j`, else 0.
    pub fn lambda_value(&self, p: f64, j: u64, k: &BigUint) -> f64 {
        if j > self.depth() {
            return 0.0;
        }
        let lo = pow2_big(j);
        if k < &lo || k >= &(&lo << 1u8) {
            return 0.0;
        }
        let v = self.value_at(j, &(k - &lo));
        if v == 0.0 {
            return 0.0;
        }
        if j <= LOG_SPACE_LEVEL {
            pow2(-(j as i64)).powf(1.0 / p) * v.powf(1.0 / p)
        } else {
            ((v.ln() - j as f64 * std::f64::consts::LN_2) / p).exp()
        }
    }

    /// `(sum_j (sum_k lambda_{j,k}^p)^{q/p})^{1/q}` through the identity
    /// `sum_k lambda_{j,k}^p = block_average(j)`; `q = inf` takes the sup.
    pub fn mixed_norm(&self, p: f64, q: f64, depth: u64) -> f64 {
        let depth = depth.min(self.depth());
        if q.is_infinite() {
            return (0..=depth)
                .map(|j| self.block_average(j).powf(1.0 / p))
                .fold(0.0, f64::max);
        }
        let mut acc = NeumaierSum::new();
        for j in 0..=depth {
            acc.add(self.block_average(j).powf(q / p));
        }
        acc.value().powf(1.0 / q)
    }

    /// `mixed_norm` for every prefix depth `0..=J`.
    pub fn mixed_norm_partials(&self, p: f64, q: f64) -> Vec<f64> {
        let mut acc = NeumaierSum::new();
        let mut sup = 0.0f64;
        (0..=self.depth())
            .map(|j| {
                if q.is_infinite() {
                    sup = sup.max(self.block_average(j).powf(1.0 / p));
                    sup
                } else {
                    acc.add(self.block_average(j).powf(q / p));
                    acc.value().powf(1.0 / q)
                }
            })
            .collect()
    }

    /// `(Lambda*_{floor(2^j x)})^{1/p} Psi(2^-j)`, the level-`j` term of the
    /// divergence diagnostic. Equals `2^{j/p} lambda_{j, floor(2^j x)} Psi(2^-j)`.
    pub fn diagnostic_term(&self, desc: &PsiDescriptor, p: f64, phi: f64, j: u64) -> f64 {
        let v = self.value_at(j, &floor_scaled(phi, j));
        if v == 0.0 {
            0.0
        } else if j <= LOG_SPACE_LEVEL {
            v.powf(1.0 / p) * desc.dyadic(j)
        } else {
            (v.ln() / p + desc.ln_dyadic(j)).exp()
        }
    }

    /// `max_{j<=depth} 2^{j/p} lambda_{j, floor(2^j x)} Psi(2^-j)`.
    pub fn sup_diagnostic(&self, desc: &PsiDescriptor, p: f64, x: f64, depth: u64) -> Result<f64> {
        let phi = probe_fraction(x)?;
        Ok((0..=depth.min(self.depth()))
            .map(|j| self.diagnostic_term(desc, p, phi, j))
            .fold(0.0, f64::max))
    }

    /// Running maximum of the diagnostic at every depth `0..=J`.
    pub fn sup_diagnostic_profile(&self, desc: &PsiDescriptor, p: f64, x: f64) -> Result<Vec<f64>> {
        let phi = probe_fraction(x)?;
        let mut best = 0.0f64;
        Ok((0..=self.depth())
            .map(|j| {
                best = best.max(self.diagnostic_term(desc, p, phi, j));
                best
            })
            .collect())
    }

    /// Invariants of a `lambda` block sequence; empty when all hold.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for j in 0..=self.depth().min(1) {
            if !self.level(j).is_zero() {
                problems.push(format!("level {j} must be identically zero"));
            }
        }
        if let Err(e) = Self::from_levels(self.levels.clone()) {
            problems.push(e.to_string());
        }
        problems
    }
}

/// `x - 1` for a probe `x` in `[1, 2)` (exact by Sterbenz).
fn probe_fraction(x: f64) -> Result<f64> {
    if !(1.0..2.0).contains(&x) {
        return invalid(format!("probe points must lie in [1, 2), got {x}"));
    }
    Ok(x - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;
    use crate::sequences::build_lambda_blocks;
    use approx::assert_relative_eq;

    fn full_blocks(depth: u64, theta: f64) -> BlockSequence {
        let levels = (0..=depth)
            .map(|j| Level::new(theta, pow2_big(j), BigUint::zero()))
            .collect();
        BlockSequence::from_levels(levels).unwrap()
    }

    fn flagship_blocks(depth: u64) -> BlockSequence {
        let params = Params::new(2, 1, 1.0, 2.0, 1.5, 2, Some(0.25));
        build_lambda_blocks(&PsiDescriptor::constant(1.0), &params, depth).unwrap()
    }

    #[test]
    fn zero_blocks_keep_cursor_at_origin() {
        let zero = flagship_blocks(10).zeroed();
        let (r, cursor) = zero.rearrange_with_cursor();
        assert!(r.levels().iter().all(|l| l.start.is_zero()));
        assert!(cursor.numerator().is_zero());
        assert_eq!(r.coverage_count(1.3, 10).unwrap(), 0);
        assert_eq!(
            r.sup_diagnostic(&PsiDescriptor::constant(1.0), 1.0, 1.3, 10)
                .unwrap(),
            0.0
        );
        assert_eq!(r.mixed_norm(1.0, 2.0, 10), 0.0);
    }

    #[test]
    fn full_blocks_cover_everything() {
        let r = full_blocks(8, 1.0).rearrange();
        assert_eq!(r.coverage_count(1.5, 8).unwrap(), 9);
        for x in [1.0, 1.25, 1.999] {
            assert_eq!(r.coverage_count(x, 8).unwrap(), 9);
        }
        assert_eq!(r.block_average(5), 1.0);
    }

    #[test]
    fn full_blocks_with_zero_low_levels() {
        let mut levels = full_blocks(8, 1.0).levels().to_vec();
        levels[0] = Level::zero();
        levels[1] = Level::zero();
        let r = BlockSequence::from_levels(levels).unwrap().rearrange();
        assert_eq!(r.coverage_count(1.5, 8).unwrap(), 7);
    }

    #[test]
    fn flagship_coverage_at_origin() {
        let r = flagship_blocks(20).rearrange();
        let w = r.window_mass_floor();
        assert!(r.coverage_count(1.0, 20).unwrap() as u64 >= w.saturating_sub(1));
        assert!(r.coverage_count(1.0, 20).unwrap() >= 2);
    }

    #[test]
    fn cursor_equals_fractional_window_mass() {
        let b = flagship_blocks(40);
        let (_, cursor) = b.rearrange_with_cursor();
        let w = b.window_mass_numerator();
        assert_eq!(cursor.level(), 40);
        assert_eq!(cursor.numerator(), &(w % pow2_big(40)));
    }

    #[test]
    fn lambda_value_examples() {
        let r = flagship_blocks(4).rearrange();
        assert_eq!(r.lambda_value(1.0, 2, &BigUint::from(9u8)), 0.0);
        // level 2 window: two on-cells starting at the cursor
        let start = &r.level(2).start;
        let on = BigUint::from(4u8) + start;
        assert_relative_eq!(
            r.lambda_value(1.0, 2, &on),
            0.25 * 2f64.powf(0.25),
            max_relative = 1e-15
        );
        assert_relative_eq!(r.lambda_value(1.0, 2, &on), 0.2973, epsilon = 1e-4);
        let off = BigUint::from(4u8) + ((start + 2u8) % 4u8);
        assert_eq!(r.lambda_value(1.0, 2, &off), 0.0);
    }

    #[test]
    fn diagnostic_matches_literal_formula() {
        let desc = PsiDescriptor::log_power(0.3);
        let params = Params::new(2, 1, 0.7, 2.0, 1.5, 2, None);
        let r = build_lambda_blocks(&desc, &params, 30).unwrap().rearrange();
        let x = 1.0 + 1.0 / 128.0 + 5.0 / 64.0;
        for j in 0..=30u64 {
            let k = floor_scaled(x, j);
            let literal =
                pow2(j as i64).powf(1.0 / 0.7) * r.lambda_value(0.7, j, &k) * desc.dyadic(j);
            let term = r.diagnostic_term(&desc, 0.7, x - 1.0, j);
            assert_relative_eq!(literal, term, max_relative = 1e-12);
        }
    }

    #[test]
    fn covered_level_contributes_power_of_s() {
        let r = flagship_blocks(16).rearrange();
        let level = 16u64;
        let x = 1.0 + ratio(&r.level(level).start, level);
        assert!(r.covered_levels(x, 16).unwrap().contains(&level));
        let term = r.diagnostic_term(&PsiDescriptor::constant(1.0), 1.0, x - 1.0, level);
        assert_relative_eq!(term, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn probes_outside_unit_interval_rejected() {
        let r = flagship_blocks(4).rearrange();
        assert!(r.coverage_count(2.0, 4).is_err());
        assert!(r.coverage_count(0.5, 4).is_err());
    }

    #[test]
    fn malformed_levels_rejected() {
        let bad = vec![
            Level::zero(),
            Level::new(1.0, BigUint::from(3u8), BigUint::zero()),
        ];
        assert!(BlockSequence::from_levels(bad).is_err());
        let bad = vec![
            Level::zero(),
            Level::new(1.0, BigUint::from(1u8), BigUint::from(2u8)),
        ];
        assert!(BlockSequence::from_levels(bad).is_err());
        let bad = vec![Level::new(-1.0, BigUint::zero(), BigUint::zero())];
        assert!(BlockSequence::from_levels(bad).is_err());
        assert!(BlockSequence::from_levels(vec![]).is_err());
    }

    #[test]
    fn invariant_check_flags_low_levels() {
        assert!(flagship_blocks(6).check_invariants().is_empty());
        assert!(!full_blocks(3, 1.0).check_invariants().is_empty());
    }

    #[test]
    fn mixed_norm_partials_match_direct() {
        let r = flagship_blocks(30).rearrange();
        let partials = r.mixed_norm_partials(1.0, 2.0);
        for depth in [2u64, 7, 30] {
            assert_eq!(partials[depth as usize], r.mixed_norm(1.0, 2.0, depth));
        }
        let sup = r.mixed_norm(1.0, f64::INFINITY, 30);
        assert_eq!(sup, r.mixed_norm_partials(1.0, f64::INFINITY)[30]);
        assert_relative_eq!(sup, r.block_average(2), max_relative = 1e-15);
    }
}
