use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelEvaluator, Position};
use crate::error::{invalid, Result};
use crate::grid::AngleGrid;
use crate::harness::config::ExperimentConfig;
use crate::harness::trial::{derive_seed, plan_rng, simulate};
use crate::measure::{ideal_sinc_coherence, mutual_coherence_column, MeasurementOperator};
use crate::metrics::max_snr;

/// `|C[:, n_ref]|` for one setup, next to the continuous-sampling sinc
/// reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub setup: String,
    pub measurements: usize,
    pub n_ref: usize,
    /// Number of plans averaged (random setups only).
    pub plans: usize,
    /// `abs_coherence[n - 1]` is the entry for 1-based column `n`.
    pub abs_coherence: Vec<f64>,
    pub sinc: Vec<SincPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SincPoint {
    pub p: usize,
    /// Column index `p N³ + 1` the reference value is plotted against.
    pub n: usize,
    pub value: f64,
}

/// Mutual coherence column of the configured setup. Random setups
/// average magnitudes over `plans` independently drawn plans.
pub fn coherence_report(cfg: &ExperimentConfig, n_ref: usize, plans: usize) -> Result<CoherenceReport> {
    cfg.validate()?;
    if plans < 1 {
        return invalid("coherence needs at least one plan");
    }
    let grid = AngleGrid::new(cfg.grid_n)?;
    let draws = if cfg.setup.kind.is_random() { plans } else { 1 };
    let mut acc = vec![0.0; grid.atoms()];
    let mut measurements = 0;
    for i in 0..draws {
        let seed = derive_seed(cfg.master_seed, 0, i as u64);
        let plan = cfg.setup.build_plan(cfg.region, &mut plan_rng(seed))?;
        measurements = plan.len();
        let op = MeasurementOperator::matrix_free(plan, grid)?;
        for (a, c) in acc.iter_mut().zip(mutual_coherence_column(&op, n_ref)?) {
            *a += c.norm();
        }
    }
    let abs_coherence = acc.into_iter().map(|a| a / draws as f64).collect();
    let n = grid.n();
    let sinc = (1..n)
        .map(|p| Ok(SincPoint { p, n: p * n.pow(3) + 1, value: ideal_sinc_coherence(cfg.region, &grid, p)? }))
        .collect::<Result<_>>()?;
    Ok(CoherenceReport { setup: cfg.setup.kind.name().into(), measurements, n_ref, plans: draws, abs_coherence, sinc })
}

impl CoherenceReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,abs_coherence")?;
        for (i, v) in self.abs_coherence.iter().enumerate() {
            writeln!(w, "{},{:.16e}", i + 1, v)?;
        }
        Ok(())
    }

    pub fn write_sinc_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "p,n,sinc_coherence")?;
        for s in &self.sinc {
            writeln!(w, "{},{},{:.16e}", s.p, s.n, s.value)?;
        }
        Ok(())
    }
}

/// SNR over transmit positions with the receiver parked at the
/// perfect-CSI optimum, under the true and the estimated channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrMap {
    pub rx: Position,
    pub rows: Vec<SnrMapRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrMapRow {
    pub tx: Position,
    pub snr_true: f64,
    pub snr_est: f64,
}

pub fn snr_map(cfg: &ExperimentConfig, trial_idx: usize) -> Result<SnrMap> {
    let st = simulate(cfg, 0, trial_idx, None)?;
    let sg = cfg.sample_grid()?;
    let rx = max_snr(&st.channel, &sg, &st.noise).rx;
    let rows = sg
        .positions()
        .into_iter()
        .map(|tx| SnrMapRow {
            tx,
            snr_true: st.noise.receive_snr(st.channel.response(tx, rx)),
            snr_est: st.noise.receive_snr(st.estimated.response(tx, rx)),
        })
        .collect();
    Ok(SnrMap { rx, rows })
}

impl SnrMap {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "tx_x,tx_y,snr_true,snr_est")?;
        for r in &self.rows {
            writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", r.tx.x, r.tx.y, r.snr_true, r.snr_est)?;
        }
        Ok(())
    }
}
