//! The measurement matrix `Ψ ∈ C^{M × N^4}`.
//!
//! Row `m` factors as `(g_y ⊗ g_x)(t_m) ⊗ (conj f_y ⊗ conj f_x)(r_m)`, so the
//! matrix-free path keeps one `N^2` Tx factor and one `N^2` Rx factor per row
//! and evaluates products as two dense GEMMs over those factors.
//!
//! Column indices in this module are 0-based vector positions; flat grid
//! index `n` lives at position `n - 1`.

use std::f64::consts::PI;

use matrixmultiply::CGemmOption;
use num_complex::Complex64;

use crate::channel::Position;
use crate::error::{invalid, Result};
use crate::grid::{unflatten_unchecked, AngleGrid};
use crate::measure::plan::MeasurementPlan;

/// Largest `M * N^4` for which the explicit matrix may be materialized.
pub const EXPLICIT_LIMIT: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorMode {
    Explicit,
    #[default]
    MatrixFree,
}

#[derive(Debug, Clone)]
pub struct MeasurementOperator {
    plan: MeasurementPlan,
    grid: AngleGrid,
    mode: OperatorMode,
    /// `M x N^2`, row-major: `g_y[nty] g_x[ntx]` at `N (nty-1) + ntx-1`.
    tx: Vec<Complex64>,
    tx_conj: Vec<Complex64>,
    /// `M x N^2`, row-major: `conj(f_y[nry] f_x[nrx])`.
    rx: Vec<Complex64>,
    rx_conj: Vec<Complex64>,
    dense: Option<Vec<Complex64>>,
}

/// `[exp(j 2π c v_k)]_k` over the grid values.
fn phase_row(coord: f64, values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::cis(2.0 * PI * coord * v)).collect()
}

/// `(row over y) ⊗ (row over x)`, y major.
fn kron_factor(pos: Position, values: &[f64], out: &mut Vec<Complex64>) {
    let gx = phase_row(pos.x, values);
    let gy = phase_row(pos.y, values);
    for a in &gy {
        for b in &gx {
            out.push(a * b);
        }
    }
}

/// Eq.-style direct entry: `exp(j2π(x_t φ_t + y_t ϑ_t)) exp(-j2π(x_r φ_r + y_r ϑ_r))`.
pub(crate) fn direct_entry(grid: &AngleGrid, t: Position, r: Position, col: usize) -> Complex64 {
    let gi = unflatten_unchecked(col + 1, grid.n());
    let (ptx, pty) = (grid.value_unchecked(gi.ntx), grid.value_unchecked(gi.nty));
    let (prx, pry) = (grid.value_unchecked(gi.nrx), grid.value_unchecked(gi.nry));
    Complex64::cis(2.0 * PI * (t.x * ptx + t.y * pty)) * Complex64::cis(-2.0 * PI * (r.x * prx + r.y * pry))
}

/// `c = a · b` for row-major `a: m x k`, `b: k x n` given by strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[Complex64],
    (rsa, csa): (isize, isize),
    b: &[Complex64],
    (rsb, csb): (isize, isize),
    c: &mut [Complex64],
) {
    debug_assert_eq!(c.len(), m * n);
    // SAFETY: Complex64 is repr(C) { re, im }, layout-identical to [f64; 2];
    // the strides describe in-bounds views of `a` (m x k) and `b` (k x n), and
    // `c` is an exclusively borrowed m x n row-major buffer.
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            rsa,
            csa,
            b.as_ptr() as *const [f64; 2],
            rsb,
            csb,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}

impl MeasurementOperator {
    pub fn new(plan: MeasurementPlan, grid: AngleGrid, mode: OperatorMode) -> Result<Self> {
        let m = plan.len();
        let n2 = grid.n() * grid.n();
        let values = grid.values();
        let mut tx = Vec::with_capacity(m * n2);
        let mut rx_conj = Vec::with_capacity(m * n2);
        for &(t, r) in plan.pairs() {
            kron_factor(t, &values, &mut tx);
            kron_factor(r, &values, &mut rx_conj);
        }
        let rx: Vec<Complex64> = rx_conj.iter().map(|z| z.conj()).collect();
        let tx_conj: Vec<Complex64> = tx.iter().map(|z| z.conj()).collect();

        let dense = match mode {
            OperatorMode::MatrixFree => None,
            OperatorMode::Explicit => {
                let cols = grid.atoms();
                if m.saturating_mul(cols) > EXPLICIT_LIMIT {
                    return invalid(format!(
                        "explicit measurement matrix with {m} x {cols} entries exceeds the {EXPLICIT_LIMIT} entry limit"
                    ));
                }
                let mut d = Vec::with_capacity(m * cols);
                for &(t, r) in plan.pairs() {
                    d.extend((0..cols).map(|c| direct_entry(&grid, t, r, c)));
                }
                Some(d)
            }
        };
        Ok(Self { plan, grid, mode, tx, tx_conj, rx, rx_conj, dense })
    }

    pub fn matrix_free(plan: MeasurementPlan, grid: AngleGrid) -> Result<Self> {
        Self::new(plan, grid, OperatorMode::MatrixFree)
    }

    pub fn plan(&self) -> &MeasurementPlan {
        &self.plan
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn mode(&self) -> OperatorMode {
        self.mode
    }

    pub fn rows(&self) -> usize {
        self.plan.len()
    }

    pub fn cols(&self) -> usize {
        self.grid.atoms()
    }

    fn n2(&self) -> usize {
        self.grid.n() * self.grid.n()
    }

    /// `Ψ[m, col]`.
    pub fn entry(&self, m: usize, col: usize) -> Complex64 {
        if let Some(d) = &self.dense {
            return d[m * self.cols() + col];
        }
        let n2 = self.n2();
        self.tx[m * n2 + col / n2] * self.rx[m * n2 + col % n2]
    }

    /// Column `col` of `Ψ` (length `M`).
    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.rows()).map(|m| self.entry(m, col)).collect()
    }

    /// `Ψ u`.
    pub fn apply(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        if u.len() != self.cols() {
            return invalid(format!("apply: vector length {} != {}", u.len(), self.cols()));
        }
        let m = self.rows();
        if let Some(d) = &self.dense {
            let cols = self.cols();
            return Ok((0..m).map(|i| d[i * cols..(i + 1) * cols].iter().zip(u).map(|(a, b)| a * b).sum()).collect());
        }
        let n2 = self.n2();
        // W[m, it] = Σ_ir rx[m, ir] U[it, ir]
        let mut w = vec![Complex64::default(); m * n2];
        gemm(m, n2, n2, &self.rx, (n2 as isize, 1), u, (1, n2 as isize), &mut w);
        Ok((0..m)
            .map(|i| self.tx[i * n2..(i + 1) * n2].iter().zip(&w[i * n2..(i + 1) * n2]).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `Ψ^H y`.
    pub fn adjoint_apply(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        if y.len() != self.rows() {
            return invalid(format!("adjoint_apply: vector length {} != {}", y.len(), self.rows()));
        }
        let m = self.rows();
        let cols = self.cols();
        if let Some(d) = &self.dense {
            let mut out = vec![Complex64::default(); cols];
            for (i, yi) in y.iter().enumerate() {
                for (o, a) in out.iter_mut().zip(&d[i * cols..(i + 1) * cols]) {
                    *o += a.conj() * yi;
                }
            }
            return Ok(out);
        }
        let n2 = self.n2();
        // Y[m, ir] = y_m conj(rx[m, ir]); out = conj(tx)^T Y
        let mut scaled = Vec::with_capacity(m * n2);
        for (i, yi) in y.iter().enumerate() {
            scaled.extend(self.rx_conj[i * n2..(i + 1) * n2].iter().map(|b| b * yi));
        }
        let mut out = vec![Complex64::default(); cols];
        gemm(n2, m, n2, &self.tx_conj, (1, n2 as isize), &scaled, (n2 as isize, 1), &mut out);
        Ok(out)
    }
}

/// Free-function form of [`MeasurementOperator::apply`].
pub fn apply(op: &MeasurementOperator, u: &[Complex64]) -> Result<Vec<Complex64>> {
    op.apply(u)
}

/// Free-function form of [`MeasurementOperator::adjoint_apply`].
pub fn adjoint_apply(op: &MeasurementOperator, y: &[Complex64]) -> Result<Vec<Complex64>> {
    op.adjoint_apply(y)
}
