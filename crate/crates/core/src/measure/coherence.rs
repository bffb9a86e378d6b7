//! Mutual-coherence diagnostics of a measurement setup.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::grid::AngleGrid;
use crate::measure::operator::MeasurementOperator;

/// Column `n_ref` (1-based) of `C = Ψ^H Ψ / M`, evaluated matrix-free.
///
/// Every column of `Ψ` has unit-modulus entries, so `C[n_ref, n_ref]` is
/// identically 1 and is reported as such.
pub fn mutual_coherence_column(op: &MeasurementOperator, n_ref: usize) -> Result<Vec<Complex64>> {
    if n_ref == 0 || n_ref > op.cols() {
        return invalid(format!("reference column {n_ref} outside [1, {}]", op.cols()));
    }
    let col = op.column(n_ref - 1);
    let scale = 1.0 / op.rows() as f64;
    let mut out = op.adjoint_apply(&col)?;
    for z in out.iter_mut() {
        *z *= scale;
    }
    out[n_ref - 1] = Complex64::new(1.0, 0.0);
    Ok(out)
}

/// `(1/M) Σ_m exp(j 2π x_m δ)` for an angular offset `δ`.
pub fn coherence_at_offset(positions: &[f64], delta: f64) -> Complex64 {
    let sum: Complex64 = positions.iter().map(|&x| Complex64::cis(2.0 * PI * x * delta)).sum();
    sum / positions.len() as f64
}

/// Effective `N x N` coherence over a set of 1-D (Tx x-axis) positions:
/// `[C]_{k,k'} = (1/M) Σ_m exp(j 2π x_m (φ_{k'} - φ_k))`.
pub fn effective_coherence_1d(positions: &[f64], grid: &AngleGrid) -> Result<DMatrix<Complex64>> {
    if positions.is_empty() {
        return invalid("effective coherence needs at least one position");
    }
    let values = grid.values();
    let n = grid.n();
    Ok(DMatrix::from_fn(n, n, |k, kp| {
        if k == kp {
            Complex64::new(1.0, 0.0)
        } else {
            coherence_at_offset(positions, values[kp] - values[k])
        }
    }))
}

/// Unnormalized `sin(x) / x` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Coherence under continuous sampling of the whole region at grid offset
/// `p`: `sinc(2π R p / N)`.
pub fn ideal_sinc_coherence(region: f64, grid: &AngleGrid, p: usize) -> Result<f64> {
    if p == 0 || p >= grid.n() {
        return invalid(format!("offset {p} outside [1, {}]", grid.n() - 1));
    }
    Ok(sinc(2.0 * PI * region * p as f64 / grid.n() as f64))
}

/// Uniform 1-D positions with spacing `d` starting at `-span/2`.
pub fn uniform_positions(span: f64, spacing: f64) -> Vec<f64> {
    let count = (span / spacing + 1e-9).floor() as usize + 1;
    (0..count).map(|i| -span / 2.0 + i as f64 * spacing).collect()
}

/// Number of leading entries of `row` with power at least half the peak
/// (the one-sided half-power main-lobe width, in grid steps).
pub fn half_power_width(row: &[f64]) -> usize {
    let threshold = std::f64::consts::FRAC_1_SQRT_2;
    row.iter().take_while(|&&v| v >= threshold).count()
}

/// Largest magnitude past the first local minimum of a one-sided lobe
/// profile `row` (row 0 is the peak).
pub fn max_beyond_main_lobe(row: &[f64]) -> f64 {
    let mut i = 1;
    while i < row.len() && row[i] <= row[i - 1] {
        i += 1;
    }
    row[i.saturating_sub(1).max(1)..].iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Position;
    use crate::measure::plan::{gen_random, MeasurementPlan};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Closed-form magnitude of a uniform-array coherence.
    fn dirichlet(m: usize, d: f64, delta: f64) -> f64 {
        let den = (PI * d * delta).sin();
        if den.abs() < 1e-15 {
            return 1.0;
        }
        ((m as f64 * PI * d * delta).sin() / (m as f64 * den)).abs()
    }

    #[test]
    fn sinc_values() {
        let g = AngleGrid::new(24).unwrap();
        let v = ideal_sinc_coherence(2.0, &g, 1).unwrap();
        assert!((v - 0.954930).abs() < 1e-6);
        assert!(ideal_sinc_coherence(2.0, &g, 6).unwrap().abs() < 1e-15);
        assert_eq!(sinc(0.0), 1.0);
        assert!(ideal_sinc_coherence(2.0, &g, 0).is_err());
        assert!(ideal_sinc_coherence(2.0, &g, 24).is_err());
    }

    #[test]
    fn effective_matches_dirichlet() {
        let g = AngleGrid::new(24).unwrap();
        let xs = uniform_positions(2.0, 0.4);
        assert_eq!(xs.len(), 6);
        let c = effective_coherence_1d(&xs, &g).unwrap();
        let vals = g.values();
        for k in 0..24 {
            assert_eq!(c[(k, k)], Complex64::new(1.0, 0.0));
            for kp in 0..24 {
                if k != kp {
                    let want = dirichlet(6, 0.4, vals[kp] - vals[k]);
                    assert!((c[(k, kp)].norm() - want).abs() < 1e-10);
                }
            }
        }
        assert!(effective_coherence_1d(&[], &g).is_err());
    }

    #[test]
    fn aliasing_at_integer_spacing() {
        let g = AngleGrid::new(24).unwrap();
        let c = effective_coherence_1d(&uniform_positions(2.0, 1.0), &g).unwrap();
        // offset of 1.0 in virtual angle is 12 grid steps
        assert!(c[(0, 12)].norm() >= 0.99);
    }

    #[test]
    fn column_basics() {
        let g = AngleGrid::new(3).unwrap();
        let origin = MeasurementPlan::custom(vec![(Position::ORIGIN, Position::ORIGIN); 4], 2.0).unwrap();
        let op = MeasurementOperator::matrix_free(origin, g).unwrap();
        let col = mutual_coherence_column(&op, 5).unwrap();
        assert!(col.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        assert!(mutual_coherence_column(&op, 0).is_err());
        assert!(mutual_coherence_column(&op, 82).is_err());
    }

    #[test]
    fn column_matches_dense_gram() {
        let g = AngleGrid::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let plan = gen_random(2.0, 16, &mut rng).unwrap();
        let op = MeasurementOperator::matrix_free(plan, g).unwrap();
        for n_ref in [1usize, 17, 256] {
            let col = mutual_coherence_column(&op, n_ref).unwrap();
            for n in 1..=256 {
                let want: Complex64 =
                    (0..16).map(|m| op.entry(m, n - 1).conj() * op.entry(m, n_ref - 1)).sum::<Complex64>() / 16.0;
                assert!((col[n - 1] - want).norm() < 1e-10);
            }
            assert_eq!(col[n_ref - 1], Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn lobe_helpers() {
        assert_eq!(half_power_width(&[1.0, 0.9, 0.71, 0.5, 0.6]), 3);
        assert_eq!(max_beyond_main_lobe(&[1.0, 0.8, 0.3, 0.1, 0.4, 0.2]), 0.4);
        assert_eq!(max_beyond_main_lobe(&[1.0, 0.5, 0.2]), 0.2);
    }
}
