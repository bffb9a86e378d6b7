//! Uniform virtual-angle lattice and the flat-index bijection over the
//! four angular axes (Tx azimuth, Tx elevation, Rx azimuth, Rx elevation).
//!
//! All indices in this module are 1-based, matching the external formats
//! (support lists, coherence CSV rows).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `n` points per axis at `-1 + (2k - 1) / n`, `k = 1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleGrid {
    n: usize,
}

impl AngleGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return invalid(format!("grid size must be >= 2, got {n}"));
        }
        // N^4 must fit comfortably in memory-indexable space.
        if n > 256 {
            return invalid(format!("grid size {n} is too large"));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of atoms in the 4-D dictionary, `N^4`.
    pub fn atoms(&self) -> usize {
        self.n.pow(4)
    }

    /// Distance between consecutive lattice points.
    pub fn spacing(&self) -> f64 {
        2.0 / self.n as f64
    }

    pub fn value(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.n {
            return invalid(format!("grid index {k} outside [1, {}]", self.n));
        }
        Ok(self.value_unchecked(k))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, k: usize) -> f64 {
        -1.0 + (2 * k - 1) as f64 / self.n as f64
    }

    /// All lattice values in increasing order.
    pub fn values(&self) -> Vec<f64> {
        (1..=self.n).map(|k| self.value_unchecked(k)).collect()
    }

    /// Nearest lattice index; exact midpoints resolve to the lower index.
    pub fn quantize(&self, v: f64) -> Result<usize> {
        if !v.is_finite() || v.abs() > 1.0 {
            return invalid(format!("virtual angle {v} outside [-1, 1]"));
        }
        let mut best = 1;
        let mut best_dist = f64::INFINITY;
        for k in 1..=self.n {
            let d = (v - self.value_unchecked(k)).abs();
            // Midpoints land within rounding of each other; keep the lower index.
            if d + 1e-12 < best_dist {
                best = k;
                best_dist = d;
            }
        }
        Ok(best)
    }
}

/// Free-function form of [`AngleGrid::value`].
pub fn grid_value(grid: &AngleGrid, k: usize) -> Result<f64> {
    grid.value(k)
}

/// Free-function form of [`AngleGrid::quantize`].
pub fn quantize(grid: &AngleGrid, v: f64) -> Result<usize> {
    grid.quantize(v)
}

/// Coordinates of one dictionary atom on the 4-D lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridIndex4 {
    pub ntx: usize,
    pub nty: usize,
    pub nrx: usize,
    pub nry: usize,
}

impl GridIndex4 {
    pub fn new(ntx: usize, nty: usize, nrx: usize, nry: usize) -> Self {
        Self { ntx, nty, nrx, nry }
    }

    fn check(&self, n: usize) -> Result<()> {
        for (name, v) in [("ntx", self.ntx), ("nty", self.nty), ("nrx", self.nrx), ("nry", self.nry)] {
            if v == 0 || v > n {
                return invalid(format!("{name} = {v} outside [1, {n}]"));
            }
        }
        Ok(())
    }

    /// Tx-side offset `N (nty - 1) + ntx - 1` in `[0, N^2)`.
    #[inline]
    pub(crate) fn tx_offset(&self, n: usize) -> usize {
        n * (self.nty - 1) + self.ntx - 1
    }

    /// Rx-side offset `N (nry - 1) + nrx - 1` in `[0, N^2)`.
    #[inline]
    pub(crate) fn rx_offset(&self, n: usize) -> usize {
        n * (self.nry - 1) + self.nrx - 1
    }
}

/// `n = N^2 [N (nty - 1) + ntx - 1] + N (nry - 1) + nrx`, in `[1, N^4]`.
pub fn flat_index(gi: GridIndex4, n: usize) -> Result<usize> {
    if n < 1 {
        return invalid("grid size must be positive");
    }
    gi.check(n)?;
    Ok(n * n * gi.tx_offset(n) + gi.rx_offset(n) + 1)
}

/// Inverse of [`flat_index`].
pub fn unflatten(flat: usize, n: usize) -> Result<GridIndex4> {
    let total = n.checked_pow(4).unwrap_or(usize::MAX);
    if n < 1 || flat == 0 || flat > total {
        return invalid(format!("flat index {flat} outside [1, {total}]"));
    }
    Ok(unflatten_unchecked(flat, n))
}

#[inline]
pub(crate) fn unflatten_unchecked(flat: usize, n: usize) -> GridIndex4 {
    let z = flat - 1;
    let n2 = n * n;
    let (tx, rx) = (z / n2, z % n2);
    GridIndex4 { ntx: tx % n + 1, nty: tx / n + 1, nrx: rx % n + 1, nry: rx / n + 1 }
}
