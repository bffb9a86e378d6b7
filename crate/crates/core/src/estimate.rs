//! Orthogonal matching pursuit over the angular dictionary, and turning
//! the recovered atoms back into a channel that can be evaluated anywhere.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    measure, response_of_paths, ChannelEvaluator, ChannelRealization, NoiseModel, PathComponent, Position,
    VirtualAngles,
};
use crate::error::{invalid, Error, Result};
use crate::grid::{flat_index, unflatten, AngleGrid, GridIndex4};
use crate::measure::{gen_random, MeasurementOperator, MeasurementPlan, OperatorMode};

/// Relative singular-value floor below which an unregularized Gram
/// matrix is treated as singular.
const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmpConfig {
    /// Stop once `‖r‖ / ‖v‖` drops below this.
    pub epsilon0: f64,
    /// Iteration cap.
    pub k_max: usize,
    /// Tikhonov term added to the Gram diagonal.
    pub ridge: f64,
}

impl Default for OmpConfig {
    fn default() -> Self {
        Self { epsilon0: 0.1, k_max: 32, ridge: 0.0 }
    }
}

impl OmpConfig {
    pub fn new(epsilon0: f64, k_max: usize, ridge: f64) -> Result<Self> {
        if !(epsilon0 > 0.0 && epsilon0 <= 1.0) {
            return invalid(format!("epsilon0 must be in (0, 1], got {epsilon0}"));
        }
        if k_max < 1 {
            return invalid("k_max must be >= 1");
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return invalid(format!("ridge must be non-negative, got {ridge}"));
        }
        Ok(Self { epsilon0, k_max, ridge })
    }

    /// Iteration cap of four atoms per expected path.
    pub fn for_expected_paths(epsilon0: f64, paths: usize) -> Result<Self> {
        Self::new(epsilon0, 4 * paths.max(1), 0.0)
    }
}

/// OMP output: 1-based flat support indices with their LS coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseEstimate {
    pub support: Vec<usize>,
    #[serde(with = "complex_vec")]
    pub coeffs: Vec<Complex64>,
    #[serde(rename = "residuals")]
    pub residual_history: Vec<f64>,
    pub grid_n: usize,
}

mod complex_vec {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(raw.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl SparseEstimate {
    pub fn empty(grid_n: usize) -> Self {
        Self { support: Vec::new(), coeffs: Vec::new(), residual_history: Vec::new(), grid_n }
    }

    pub fn iterations(&self) -> usize {
        self.residual_history.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let est: Self = serde_json::from_str(s)?;
        if est.support.len() != est.coeffs.len() {
            return invalid("support and coeffs differ in length");
        }
        let total = est.grid_n.pow(4);
        let mut sorted = est.support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != est.support.len() || sorted.iter().any(|&n| n == 0 || n > total) {
            return invalid("support indices must be distinct and within [1, N^4]");
        }
        Ok(est)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `Σ conj(a_i) b_i`.
fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Solves `(G + ridge I) q = b` through an SVD so rank loss is detected.
fn solve_gram(gram: &DMatrix<Complex64>, rhs: &DVector<Complex64>, ridge: f64) -> Result<DVector<Complex64>> {
    let k = gram.nrows();
    let mut g = gram.clone();
    for i in 0..k {
        g[(i, i)] += Complex64::new(ridge, 0.0);
    }
    let svd = g.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin.is_nan() || smin <= smax * SINGULAR_RTOL {
        return Err(Error::SingularSystem { size: k });
    }
    svd.solve(rhs, 0.0).map_err(|_| Error::SingularSystem { size: k })
}

/// Greedy sparse recovery of `u` from `v ≈ √p_t Ψ u`.
///
/// Each iteration picks the unselected column with the largest
/// `|Ψ_n^H r|` (ties to the smallest index), refits all selected
/// coefficients by least squares, and stops once the relative residual
/// falls below `epsilon0` or `k_max` atoms are in use.
pub fn omp(op: &MeasurementOperator, v: &[Complex64], transmit_power: f64, cfg: &OmpConfig) -> Result<SparseEstimate> {
    let m = op.rows();
    if v.len() != m {
        return invalid(format!("measurement vector length {} != {m}", v.len()));
    }
    if !(transmit_power > 0.0 && transmit_power.is_finite()) {
        return invalid(format!("transmit power must be positive, got {transmit_power}"));
    }
    let grid_n = op.grid().n();
    let v_norm = norm(v);
    if v_norm == 0.0 {
        return Ok(SparseEstimate::empty(grid_n));
    }
    let cols = op.cols();
    let k_cap = cfg.k_max.min(cols);
    let mut selected = vec![false; cols];
    let mut support = Vec::with_capacity(k_cap);
    let mut atoms: Vec<Vec<Complex64>> = Vec::with_capacity(k_cap);
    let mut gram = DMatrix::<Complex64>::zeros(0, 0);
    let mut proj = DVector::<Complex64>::zeros(0);
    let mut residual = v.to_vec();
    let mut history = Vec::with_capacity(k_cap);
    let mut solution = DVector::<Complex64>::zeros(0);

    while support.len() < k_cap {
        let corr = op.adjoint_apply(&residual)?;
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in corr.iter().enumerate() {
            if selected[j] {
                continue;
            }
            let s = c.norm_sqr();
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        let Some((j, _)) = best else { break };
        selected[j] = true;
        support.push(j + 1);
        let col = op.column(j);

        // Grow the Gram matrix and Ψ_A^H v by one row/column.
        let k = atoms.len();
        let mut next = DMatrix::<Complex64>::zeros(k + 1, k + 1);
        next.view_mut((0, 0), (k, k)).copy_from(&gram);
        for (i, a) in atoms.iter().enumerate() {
            let g = dot_conj(a, &col);
            next[(i, k)] = g;
            next[(k, i)] = g.conj();
        }
        next[(k, k)] = Complex64::new(norm(&col).powi(2), 0.0);
        gram = next;
        proj = proj.push(dot_conj(&col, v));
        atoms.push(col);

        solution = solve_gram(&gram, &proj, cfg.ridge)?;

        residual.copy_from_slice(v);
        for (a, q) in atoms.iter().zip(solution.iter()) {
            for (r, x) in residual.iter_mut().zip(a) {
                *r -= x * q;
            }
        }
        let eps = norm(&residual) / v_norm;
        history.push(eps);
        if eps < cfg.epsilon0 {
            break;
        }
    }

    let scale = 1.0 / transmit_power.sqrt();
    Ok(SparseEstimate {
        support,
        coeffs: solution.iter().map(|q| q * scale).collect(),
        residual_history: history,
        grid_n,
    })
}

/// Stacks `√p_t h(t_m, r_m) + z_m` over all plan rows.
pub fn collect_measurements<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    plan: &MeasurementPlan,
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<Complex64> {
    plan.pairs().iter().map(|&(t, r)| measure(ch, t, r, noise, rng)).collect()
}

/// Paths on the angular lattice recovered from a sparse estimate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimatedChannel {
    pub paths: Vec<PathComponent>,
}

impl ChannelEvaluator for EstimatedChannel {
    fn paths(&self) -> &[PathComponent] {
        &self.paths
    }
}

fn atom_angles(gi: GridIndex4, grid: &AngleGrid) -> (VirtualAngles, VirtualAngles) {
    let v = |k| grid.value_unchecked(k);
    (VirtualAngles { phi: v(gi.ntx), theta: v(gi.nty) }, VirtualAngles { phi: v(gi.nrx), theta: v(gi.nry) })
}

pub fn extract_paths(est: &SparseEstimate, grid: &AngleGrid) -> Result<EstimatedChannel> {
    if est.grid_n != grid.n() {
        return invalid(format!("estimate grid {} does not match grid {}", est.grid_n, grid.n()));
    }
    let paths = est
        .support
        .iter()
        .zip(&est.coeffs)
        .map(|(&n, &coeff)| {
            let (aod, aoa) = atom_angles(unflatten(n, grid.n())?, grid);
            Ok(PathComponent { aod, aoa, coeff })
        })
        .collect::<Result<_>>()?;
    Ok(EstimatedChannel { paths })
}

pub fn reconstruct(ec: &EstimatedChannel, t: Position, r: Position) -> Complex64 {
    ec.response(t, r)
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(a).max(norm(b)).max(1e-300)
}

/// Checks one sparse `u` on one plan: `Ψ u` (explicit and matrix-free)
/// against direct per-path summation over the lattice angles of `u`'s
/// support.
pub fn vectorization_consistent(plan: &MeasurementPlan, grid: &AngleGrid, u: &[Complex64]) -> Result<bool> {
    let explicit = MeasurementOperator::new(plan.clone(), *grid, OperatorMode::Explicit)?;
    let free = MeasurementOperator::new(plan.clone(), *grid, OperatorMode::MatrixFree)?;
    let a = explicit.apply(u)?;
    let b = free.apply(u)?;
    let paths: Vec<PathComponent> = u
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != Complex64::default())
        .map(|(i, &coeff)| {
            let (aod, aoa) = atom_angles(unflatten(i + 1, grid.n())?, grid);
            Ok(PathComponent { aod, aoa, coeff })
        })
        .collect::<Result<_>>()?;
    let direct: Vec<Complex64> = plan.pairs().iter().map(|&(t, r)| response_of_paths(&paths, t, r)).collect();
    if norm(&direct) == 0.0 {
        return Ok(norm(&a) == 0.0 && norm(&b) == 0.0);
    }
    Ok(rel_diff(&a, &direct) < 1e-10 && rel_diff(&b, &direct) < 1e-10)
}

/// Diagnostic for small grids (`n <= 4`): random sparse `u` placed via
/// [`flat_index`] and checked with [`vectorization_consistent`].
pub fn vectorization_consistency_check<R: Rng + ?Sized>(n: usize, trials: usize, rng: &mut R) -> Result<bool> {
    if n > 4 {
        return invalid("vectorization check is limited to N <= 4");
    }
    let grid = AngleGrid::new(n)?;
    for _ in 0..trials {
        let plan = gen_random(2.0, 16, rng)?;
        let mut u = vec![Complex64::default(); grid.atoms()];
        let sparsity = rng.random_range(1..=3usize);
        for _ in 0..sparsity {
            let gi = GridIndex4::new(
                rng.random_range(1..=n),
                rng.random_range(1..=n),
                rng.random_range(1..=n),
                rng.random_range(1..=n),
            );
            let idx = flat_index(gi, n)?;
            u[idx - 1] = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        if !vectorization_consistent(&plan, &grid, &u)? {
            return Ok(false);
        }
    }
    Ok(true)
}
