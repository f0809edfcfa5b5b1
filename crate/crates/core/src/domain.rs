//! Finite unions of axis-aligned boxes carrying box-local uniform grids.
//!
//! The union is ordered: a cell of box `i` belongs to the quadrature iff its
//! center lies in no earlier box (boxes are half-open, `[lo, hi)`). Overlapping
//! boxes are therefore allowed and counted once.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Target grid spacing; the realized spacing divides the box evenly and
    /// never exceeds it.
    pub resolution: f64,
}

impl GridBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, resolution: f64) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return invalid("box corners must have the same positive dimension");
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return invalid(format!(
                "box needs finite lo < hi per axis, got {lo:?} .. {hi:?}"
            ));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return invalid(format!(
                "grid resolution must be positive, got {resolution}"
            ));
        }
        Ok(Self { lo, hi, resolution })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn cells_per_axis(&self) -> Vec<usize> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (((b - a) / self.resolution) - 1e-9).ceil().max(1.0) as usize)
            .collect()
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_axis().iter().product()
    }

    pub fn cell_widths(&self) -> Vec<f64> {
        self.cells_per_axis()
            .iter()
            .enumerate()
            .map(|(a, &n)| (self.hi[a] - self.lo[a]) / n as f64)
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_widths().iter().product()
    }

    /// Cell centers per axis, translated by `shift`.
    pub fn axes(&self, shift: &[f64]) -> Vec<Vec<f64>> {
        let widths = self.cell_widths();
        self.cells_per_axis()
            .iter()
            .enumerate()
            .map(|(a, &n)| {
                (0..n)
                    .map(|i| self.lo[a] + (i as f64 + 0.5) * widths[a] + shift[a])
                    .collect()
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(a, &v)| self.lo[a] <= v && v < self.hi[a])
    }

    pub fn intersects(&self, other: &GridBox) -> bool {
        (0..self.dim()).all(|a| self.lo[a] < other.hi[a] && other.lo[a] < self.hi[a])
    }

    pub fn translated(&self, shift: &[f64]) -> GridBox {
        GridBox {
            lo: self.lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
            hi: self.hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
            resolution: self.resolution,
        }
    }

    pub fn inflated(&self, margin: f64) -> GridBox {
        GridBox {
            lo: self.lo.iter().map(|a| a - margin).collect(),
            hi: self.hi.iter().map(|a| a + margin).collect(),
            resolution: self.resolution,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    boxes: Vec<GridBox>,
}

impl BoxDomain {
    pub fn new(boxes: Vec<GridBox>) -> Result<Self> {
        if let Some(first) = boxes.first() {
            if boxes.iter().any(|b| b.dim() != first.dim()) {
                return invalid("all boxes of a domain must share one dimension");
            }
        }
        Ok(Self { boxes })
    }

    pub fn single(lo: Vec<f64>, hi: Vec<f64>, resolution: f64) -> Result<Self> {
        Self::new(vec![GridBox::new(lo, hi, resolution)?])
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn boxes(&self) -> &[GridBox] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.boxes.first().map(GridBox::dim)
    }

    /// Finest grid spacing over all boxes (`inf` for an empty domain).
    pub fn resolution(&self) -> f64 {
        self.boxes
            .iter()
            .map(|b| b.resolution)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            boxes: self.boxes.iter().map(|b| b.inflated(margin)).collect(),
        }
    }

    /// Same boxes with every resolution replaced.
    pub fn with_resolution(&self, resolution: f64) -> Self {
        Self {
            boxes: self
                .boxes
                .iter()
                .map(|b| GridBox {
                    resolution,
                    ..b.clone()
                })
                .collect(),
        }
    }

    /// Whether the boxes are pairwise disjoint.
    pub fn is_disjoint(&self) -> bool {
        self.boxes
            .iter()
            .enumerate()
            .all(|(i, a)| self.boxes[i + 1..].iter().all(|b| !a.intersects(b)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_tile_the_box_exactly() {
        let b = GridBox::new(vec![0.0, -1.0], vec![1.0, 2.0], 0.25).unwrap();
        assert_eq!(b.cells_per_axis(), vec![4, 12]);
        assert_eq!(b.cell_volume(), 0.0625);
        let ax = b.axes(&[0.0, 0.0]);
        assert_eq!(ax[0], vec![0.125, 0.375, 0.625, 0.875]);
        // uneven extents round the spacing down
        let b = GridBox::new(vec![0.0], vec![1.0], 0.3).unwrap();
        assert_eq!(b.cells_per_axis(), vec![4]);
        assert_eq!(b.cell_widths(), vec![0.25]);
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(GridBox::new(vec![0.0], vec![0.0], 0.1).is_err());
        assert!(GridBox::new(vec![0.0], vec![1.0], 0.0).is_err());
        assert!(GridBox::new(vec![0.0, 1.0], vec![1.0], 0.1).is_err());
        let a = GridBox::new(vec![0.0], vec![1.0], 0.1).unwrap();
        let b = GridBox::new(vec![0.0, 0.0], vec![1.0, 1.0], 0.1).unwrap();
        assert!(BoxDomain::new(vec![a, b]).is_err());
    }

    #[test]
    fn disjointness() {
        let a = GridBox::new(vec![0.0], vec![1.0], 0.1).unwrap();
        let b = GridBox::new(vec![1.0], vec![2.0], 0.1).unwrap();
        let c = GridBox::new(vec![0.5], vec![1.5], 0.1).unwrap();
        assert!(BoxDomain::new(vec![a.clone(), b]).unwrap().is_disjoint());
        assert!(!BoxDomain::new(vec![a, c]).unwrap().is_disjoint());
        assert!(BoxDomain::empty().is_disjoint());
    }
}
