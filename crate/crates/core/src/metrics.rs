//! Estimation-quality metrics and the sampled position-optimization study.
//!
//! Everything here evaluates channels on a uniform `D x D` lattice of
//! positions covering the region, for both antennas. Responses are built
//! row by row (one receive position at a time) from per-path phase tables,
//! so no `D² x D²` matrix is ever stored.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelEvaluator, ChannelRealization, NoiseModel, PathComponent, Position};
use crate::error::{invalid, Error, Result};

/// Squared-error charge per angle slot for a true path with no match.
pub const MISS_PENALTY: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    d: usize,
    region: f64,
}

impl SampleGrid {
    pub fn new(d: usize, region: f64) -> Result<Self> {
        if d < 2 {
            return invalid(format!("sample grid needs d >= 2, got {d}"));
        }
        if !(region > 0.0 && region.is_finite()) {
            return invalid(format!("region must be positive, got {region}"));
        }
        Ok(Self { d, region })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn region(&self) -> f64 {
        self.region
    }

    /// Number of lattice points per antenna (`D²`).
    pub fn len(&self) -> usize {
        self.d * self.d
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinates(&self) -> Vec<f64> {
        let step = self.region / (self.d - 1) as f64;
        (0..self.d).map(|i| -self.region / 2.0 + i as f64 * step).collect()
    }

    /// Lattice point `s`, with `x` varying fastest.
    pub fn position(&self, s: usize) -> Position {
        let step = self.region / (self.d - 1) as f64;
        let c = |i: usize| -self.region / 2.0 + i as f64 * step;
        Position::new(c(s % self.d), c(s / self.d))
    }

    pub fn positions(&self) -> Vec<Position> {
        (0..self.len()).map(|s| self.position(s)).collect()
    }
}

/// Per-path steering values over the lattice, with the path coefficient
/// folded into the receive side: `h(t_s, r_q) = Σ_l rx[l][q] · tx[l][s]`.
struct ResponseTable {
    tx: Vec<Vec<Complex64>>,
    rx: Vec<Vec<Complex64>>,
}

fn axis_phases(coords: &[f64], angle: f64) -> Vec<Complex64> {
    coords.iter().map(|&c| Complex64::cis(2.0 * PI * c * angle)).collect()
}

fn lattice_phases(coords: &[f64], phi: f64, theta: f64) -> Vec<Complex64> {
    let px = axis_phases(coords, phi);
    let py = axis_phases(coords, theta);
    py.iter().flat_map(|y| px.iter().map(move |x| x * y)).collect()
}

impl ResponseTable {
    fn new(paths: &[PathComponent], sg: &SampleGrid) -> Self {
        let coords = sg.coordinates();
        let tx = paths.iter().map(|p| lattice_phases(&coords, p.aod.phi, p.aod.theta)).collect();
        let rx = paths
            .iter()
            .map(|p| lattice_phases(&coords, p.aoa.phi, p.aoa.theta).into_iter().map(|z| z.conj() * p.coeff).collect())
            .collect();
        Self { tx, rx }
    }

    /// All transmit-side responses for receive lattice point `q`.
    fn row(&self, q: usize, out: &mut [Complex64]) {
        out.fill(Complex64::default());
        for (tx, rx) in self.tx.iter().zip(&self.rx) {
            let w = rx[q];
            for (o, g) in out.iter_mut().zip(tx) {
                *o += w * g;
            }
        }
    }
}

/// `‖H - Ĥ‖_F² / ‖H‖_F²` over all lattice position pairs.
pub fn nmse<A: ChannelEvaluator + ?Sized, B: ChannelEvaluator + ?Sized>(
    truth: &A,
    est: &B,
    sg: &SampleGrid,
) -> Result<f64> {
    let t_tab = ResponseTable::new(truth.paths(), sg);
    let e_tab = ResponseTable::new(est.paths(), sg);
    let n = sg.len();
    let mut h = vec![Complex64::default(); n];
    let mut hh = vec![Complex64::default(); n];
    let (mut num, mut den) = (0.0, 0.0);
    for q in 0..n {
        t_tab.row(q, &mut h);
        e_tab.row(q, &mut hh);
        let (mut rn, mut rd) = (0.0, 0.0);
        for (a, b) in h.iter().zip(&hh) {
            rn += (a - b).norm_sqr();
            rd += a.norm_sqr();
        }
        num += rn;
        den += rd;
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("true channel is zero on the sample grid".into()));
    }
    Ok(num / den)
}

fn angle_cost(a: &PathComponent, b: &PathComponent) -> f64 {
    (a.aod.phi - b.aod.phi).powi(2)
        + (a.aod.theta - b.aod.theta).powi(2)
        + (a.aoa.phi - b.aoa.phi).powi(2)
        + (a.aoa.theta - b.aoa.theta).powi(2)
}

/// Minimum-cost assignment for a `rows x cols` cost matrix with
/// `rows <= cols`. Returns the column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian needs rows <= cols");
    // potentials and matching are 1-based with slot 0 as the virtual start
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Optimal injective pairing of true and estimated paths by squared
/// four-angle distance, as `(true index, estimate index)` sorted by true
/// index.
pub fn match_paths(truth: &[PathComponent], est: &[PathComponent]) -> Vec<(usize, usize)> {
    if truth.is_empty() || est.is_empty() {
        return Vec::new();
    }
    let mut pairs: Vec<(usize, usize)> = if truth.len() <= est.len() {
        let cost: Vec<Vec<f64>> = truth.iter().map(|a| est.iter().map(|b| angle_cost(a, b)).collect()).collect();
        hungarian(&cost).into_iter().enumerate().collect()
    } else {
        let cost: Vec<Vec<f64>> = est.iter().map(|b| truth.iter().map(|a| angle_cost(a, b)).collect()).collect();
        hungarian(&cost).into_iter().enumerate().map(|(j, i)| (i, j)).collect()
    };
    pairs.sort_unstable();
    pairs
}

fn angle_error_with(truth: &[PathComponent], est: &[PathComponent], pairs: &[(usize, usize)]) -> f64 {
    let matched: f64 = pairs.iter().map(|&(i, j)| angle_cost(&truth[i], &est[j])).sum();
    let missed = (truth.len() - pairs.len()) as f64 * 4.0 * MISS_PENALTY;
    (matched + missed) / (4.0 * truth.len() as f64)
}

fn coeff_error_with(truth: &[PathComponent], est: &[PathComponent], pairs: &[(usize, usize)]) -> f64 {
    let den: f64 = truth.iter().map(|p| p.coeff.norm_sqr()).sum();
    let mut used_t = vec![false; truth.len()];
    let mut used_e = vec![false; est.len()];
    let mut num = 0.0;
    for &(i, j) in pairs {
        used_t[i] = true;
        used_e[j] = true;
        num += (truth[i].coeff - est[j].coeff).norm_sqr();
    }
    num += truth.iter().zip(&used_t).filter(|(_, u)| !**u).map(|(p, _)| p.coeff.norm_sqr()).sum::<f64>();
    num += est.iter().zip(&used_e).filter(|(_, u)| !**u).map(|(p, _)| p.coeff.norm_sqr()).sum::<f64>();
    num / den
}

/// Mean squared virtual-angle error over the true paths after matching.
/// A true path left unmatched is charged [`MISS_PENALTY`] per angle slot;
/// surplus estimated paths do not enter.
pub fn angle_error<B: ChannelEvaluator + ?Sized>(truth: &ChannelRealization, est: &B) -> Result<f64> {
    if truth.paths.is_empty() {
        return invalid("angle error needs at least one true path");
    }
    let pairs = match_paths(&truth.paths, est.paths());
    Ok(angle_error_with(&truth.paths, est.paths(), &pairs))
}

/// Relative squared coefficient error after matching. Missed true paths
/// count with an estimate of zero and surplus estimated paths add their
/// full energy.
pub fn coeff_error<B: ChannelEvaluator + ?Sized>(truth: &ChannelRealization, est: &B) -> Result<f64> {
    if truth.energy() == 0.0 {
        return Err(Error::UndefinedMetric("true channel has zero coefficient energy".into()));
    }
    let pairs = match_paths(&truth.paths, est.paths());
    Ok(coeff_error_with(&truth.paths, est.paths(), &pairs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub nmse: f64,
    pub angle_error: f64,
    pub coeff_error: f64,
    pub matched_pairs: Vec<(usize, usize)>,
}

pub fn error_report<B: ChannelEvaluator + ?Sized>(
    truth: &ChannelRealization,
    est: &B,
    sg: &SampleGrid,
) -> Result<ErrorReport> {
    if truth.paths.is_empty() {
        return invalid("error report needs at least one true path");
    }
    let nmse = nmse(truth, est, sg)?;
    if truth.energy() == 0.0 {
        return Err(Error::UndefinedMetric("true channel has zero coefficient energy".into()));
    }
    let pairs = match_paths(&truth.paths, est.paths());
    Ok(ErrorReport {
        nmse,
        angle_error: angle_error_with(&truth.paths, est.paths(), &pairs),
        coeff_error: coeff_error_with(&truth.paths, est.paths(), &pairs),
        matched_pairs: pairs,
    })
}

/// Outcome of an exhaustive lattice search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub snr: f64,
    pub tx: Position,
    pub rx: Position,
    /// Lattice indices (`x` fastest) of `tx` and `rx`.
    pub tx_index: usize,
    pub rx_index: usize,
}

/// Position pair maximizing `|h(t, r)|²` over the lattice. Ties go to the
/// lexicographically smallest `(tx_index, rx_index)`.
pub fn max_snr<C: ChannelEvaluator + ?Sized>(ch: &C, sg: &SampleGrid, noise: &NoiseModel) -> SnrPoint {
    let tab = ResponseTable::new(ch.paths(), sg);
    let n = sg.len();
    let mut row = vec![Complex64::default(); n];
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for q in 0..n {
        tab.row(q, &mut row);
        for (s, h) in row.iter().enumerate() {
            let g = h.norm_sqr();
            if g > best.0 || (g == best.0 && s < best.1) {
                best = (g, s, q);
            }
        }
    }
    let (gain, s, q) = best;
    SnrPoint {
        snr: noise.transmit_power * gain / noise.noise_power,
        tx: sg.position(s),
        rx: sg.position(q),
        tx_index: s,
        rx_index: q,
    }
}

/// SNR the true channel delivers at the position pair chosen from the
/// estimated channel.
pub fn achieved_snr<C: ChannelEvaluator + ?Sized>(
    truth: &ChannelRealization,
    est: &C,
    sg: &SampleGrid,
    noise: &NoiseModel,
) -> SnrPoint {
    let mut pick = max_snr(est, sg, noise);
    pick.snr = noise.receive_snr(truth.response(pick.tx, pick.rx));
    pick
}

/// Fixed-position baseline: both antennas at the region center.
pub fn fpa_snr<C: ChannelEvaluator + ?Sized>(truth: &C, noise: &NoiseModel) -> f64 {
    noise.receive_snr(truth.response(Position::ORIGIN, Position::ORIGIN))
}
