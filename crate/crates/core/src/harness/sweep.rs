use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::trial::{plan_rng, run_trial_at, TrialRecord};

pub const SWEEP_HEADER: &str =
    "axis,value,trial,seed,nmse,angle_error,coeff_error,achieved_snr,max_snr,fpa_snr,omp_iters,wall_ms";
pub const AGGREGATE_HEADER: &str = "axis,value,trials,failed,empty,nmse_mean,nmse_se,nmse_nonempty_mean,angle_error_mean,angle_error_se,coeff_error_mean,coeff_error_se,achieved_snr_mean,max_snr_mean,fpa_snr_mean,omp_iters_mean";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "M")]
    Measurements,
    #[serde(rename = "N")]
    GridN,
    #[serde(rename = "SNR")]
    Snr,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Measurements => "M",
            Axis::GridN => "N",
            Axis::Snr => "SNR",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(&self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                invalid(format!("{} values must be positive integers, got {v}", self.name()))
            }
        };
        match self {
            Axis::Measurements => {
                cfg.setup.measurements = Some(as_count(value)?);
                cfg.setup.spacing = None;
            }
            Axis::GridN => cfg.grid_n = as_count(value)?,
            Axis::Snr => cfg.snr_db = value,
        }
        Ok(cfg)
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "M" => Ok(Axis::Measurements),
            "N" => Ok(Axis::GridN),
            "SNR" => Ok(Axis::Snr),
            _ => invalid(format!("unknown sweep axis '{s}' (expected M, N or SNR)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub value: f64,
    #[serde(flatten)]
    pub record: TrialRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub axis: Axis,
    pub value: f64,
    pub trials: usize,
    pub failed: usize,
    pub empty: usize,
    pub nmse_mean: f64,
    pub nmse_se: f64,
    /// Mean NMSE over trials whose estimate is non-empty.
    pub nmse_nonempty_mean: f64,
    pub angle_error_mean: f64,
    pub angle_error_se: f64,
    pub coeff_error_mean: f64,
    pub coeff_error_se: f64,
    pub achieved_snr_mean: f64,
    pub max_snr_mean: f64,
    pub fpa_snr_mean: f64,
    pub omp_iters_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.record.failed()).count()
    }
}

/// Mean and standard error of the mean; NaN when undefined.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn aggregate(axis: Axis, value: f64, records: &[TrialRecord]) -> AggregateRow {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| !r.failed()).collect();
    let col = |f: fn(&TrialRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
    let (nmse_mean, nmse_se) = mean_se(&col(|r| r.nmse));
    let (angle_error_mean, angle_error_se) = mean_se(&col(|r| r.angle_error));
    let (coeff_error_mean, coeff_error_se) = mean_se(&col(|r| r.coeff_error));
    let nonempty: Vec<f64> = ok.iter().filter(|r| r.omp_iters > 0).map(|r| r.nmse).collect();
    AggregateRow {
        axis,
        value,
        trials: records.len(),
        failed: records.len() - ok.len(),
        empty: ok.iter().filter(|r| r.omp_iters == 0).count(),
        nmse_mean,
        nmse_se,
        nmse_nonempty_mean: mean_se(&nonempty).0,
        angle_error_mean,
        angle_error_se,
        coeff_error_mean,
        coeff_error_se,
        achieved_snr_mean: mean_se(&col(|r| r.achieved_snr)).0,
        max_snr_mean: mean_se(&col(|r| r.max_snr)).0,
        fpa_snr_mean: mean_se(&col(|r| r.fpa_snr)).0,
        omp_iters_mean: mean_se(&col(|r| r.omp_iters as f64)).0,
    }
}

/// Runs `base.trials` trials for every value of `axis`, on up to
/// `workers` threads. Rows come back in `(value, trial)` order no matter
/// how the work was scheduled.
pub fn sweep(base: &ExperimentConfig, axis: Axis, values: &[f64], workers: usize) -> Result<SweepResult> {
    if values.is_empty() {
        return invalid("sweep needs at least one value");
    }
    let configs = values.iter().map(|&v| axis.apply(base, v)).collect::<Result<Vec<_>>>()?;
    for cfg in &configs {
        cfg.validate()?;
    }
    // deterministic setups measure at the same positions in every trial
    let plans = configs
        .iter()
        .map(|cfg| {
            if cfg.setup.kind.is_random() {
                Ok(None)
            } else {
                cfg.setup.build_plan(cfg.region, &mut plan_rng(0)).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..configs.len()).flat_map(|v| (0..configs[v].trials).map(move |t| (v, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let records: Vec<TrialRecord> =
        pool.install(|| jobs.par_iter().map(|&(v, t)| run_trial_at(&configs[v], v, t, plans[v].as_ref())).collect());

    let mut rows = Vec::with_capacity(records.len());
    let mut aggregates = Vec::with_capacity(values.len());
    let mut it = records.into_iter();
    for (cfg, &value) in configs.iter().zip(values) {
        let chunk: Vec<TrialRecord> = it.by_ref().take(cfg.trials).collect();
        aggregates.push(aggregate(axis, value, &chunk));
        rows.extend(chunk.into_iter().map(|record| SweepRow { axis, value, record }));
    }
    Ok(SweepResult { rows, aggregates })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for row in rows {
        let r = &row.record;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.axis,
            row.value,
            r.trial,
            r.seed,
            num(r.nmse),
            num(r.angle_error),
            num(r.coeff_error),
            num(r.achieved_snr),
            num(r.max_snr),
            num(r.fpa_snr),
            r.omp_iters,
            num(r.wall_ms)
        )?;
    }
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], mut w: W) -> Result<()> {
    writeln!(w, "{AGGREGATE_HEADER}")?;
    for a in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            a.axis,
            a.value,
            a.trials,
            a.failed,
            a.empty,
            num(a.nmse_mean),
            num(a.nmse_se),
            num(a.nmse_nonempty_mean),
            num(a.angle_error_mean),
            num(a.angle_error_se),
            num(a.coeff_error_mean),
            num(a.coeff_error_se),
            num(a.achieved_snr_mean),
            num(a.max_snr_mean),
            num(a.fpa_snr_mean),
            num(a.omp_iters_mean)
        )?;
    }
    Ok(())
}
