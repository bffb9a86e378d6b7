use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{random_channel, random_on_grid_channel, ChannelRealization, NoiseModel};
use crate::error::Result;
use crate::estimate::{collect_measurements, extract_paths, omp, EstimatedChannel, SparseEstimate};
use crate::grid::AngleGrid;
use crate::harness::config::ExperimentConfig;
use crate::measure::{MeasurementOperator, MeasurementPlan, SetupKind};
use crate::metrics::{achieved_snr, error_report, fpa_snr, max_snr, ErrorReport};

const STREAM_CHANNEL: u64 = 0;
const STREAM_PLAN: u64 = 1;
const STREAM_NOISE: u64 = 2;

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for one trial: `s(s(s(master) ^ value_idx) ^ trial_idx)`
/// with `s` the SplitMix64 finalizer. Each trial then draws its channel,
/// plan and noise from separate ChaCha8 streams of that seed.
pub fn derive_seed(master_seed: u64, value_idx: u64, trial_idx: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ value_idx) ^ trial_idx)
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Plan-stream generator for a trial, used for random setups.
pub fn plan_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, STREAM_PLAN)
}

/// One Monte Carlo trial. Metric fields are NaN when `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub measurements: usize,
    pub grid_n: usize,
    pub snr_db: f64,
    pub setup: SetupKind,
    pub nmse: f64,
    pub angle_error: f64,
    pub coeff_error: f64,
    /// Linear SNRs (`p_t |h|² / δ²`).
    pub achieved_snr: f64,
    pub max_snr: f64,
    pub fpa_snr: f64,
    pub omp_iters: usize,
    pub wall_ms: f64,
    pub error: Option<String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// OMP returned no atoms.
    pub fn empty_estimate(&self) -> bool {
        !self.failed() && self.omp_iters == 0
    }
}

/// Intermediate products of one trial.
#[derive(Debug, Clone)]
pub struct TrialState {
    pub seed: u64,
    pub channel: ChannelRealization,
    pub plan: MeasurementPlan,
    pub measurements: Vec<num_complex::Complex64>,
    pub estimate: SparseEstimate,
    pub estimated: EstimatedChannel,
    /// Noise model with the nominal SNR, used for scoring.
    pub noise: NoiseModel,
}

/// Draws the channel, plan and noise for `(value_idx, trial_idx)` and runs
/// the estimator. `fixed_plan` overrides plan generation.
pub fn simulate(
    cfg: &ExperimentConfig,
    value_idx: usize,
    trial_idx: usize,
    fixed_plan: Option<&MeasurementPlan>,
) -> Result<TrialState> {
    cfg.validate()?;
    let seed = derive_seed(cfg.master_seed, value_idx as u64, trial_idx as u64);
    let grid = AngleGrid::new(cfg.grid_n)?;
    let mut ch_rng = stream_rng(seed, STREAM_CHANNEL);
    let channel = if cfg.on_grid {
        random_on_grid_channel(cfg.paths, &grid, seed, &mut ch_rng)?
    } else {
        random_channel(cfg.paths, seed, &mut ch_rng)?
    };
    let plan = match fixed_plan {
        Some(p) => p.clone(),
        None => cfg.setup.build_plan(cfg.region, &mut plan_rng(seed))?.with_seed(seed),
    };
    let noise = NoiseModel::from_snr_db(cfg.snr_db)?;
    let measuring = if cfg.noiseless { NoiseModel::noiseless(noise.transmit_power)? } else { noise };
    let measurements = collect_measurements(&channel, &plan, &measuring, &mut stream_rng(seed, STREAM_NOISE));
    let op = MeasurementOperator::matrix_free(plan.clone(), grid)?;
    let estimate = omp(&op, &measurements, noise.transmit_power, &cfg.omp_config()?)?;
    let estimated = extract_paths(&estimate, &grid)?;
    Ok(TrialState { seed, channel, plan, measurements, estimate, estimated, noise })
}

struct Scores {
    report: ErrorReport,
    achieved: f64,
    perfect: f64,
    fpa: f64,
}

fn score(cfg: &ExperimentConfig, st: &TrialState) -> Result<Scores> {
    let sg = cfg.sample_grid()?;
    let report = error_report(&st.channel, &st.estimated, &sg)?;
    Ok(Scores {
        report,
        achieved: achieved_snr(&st.channel, &st.estimated, &sg, &st.noise).snr,
        perfect: max_snr(&st.channel, &sg, &st.noise).snr,
        fpa: fpa_snr(&st.channel, &st.noise),
    })
}

/// Runs and scores one trial; any error becomes a failed record.
pub fn run_trial_at(
    cfg: &ExperimentConfig,
    value_idx: usize,
    trial_idx: usize,
    fixed_plan: Option<&MeasurementPlan>,
) -> TrialRecord {
    let start = Instant::now();
    let seed = derive_seed(cfg.master_seed, value_idx as u64, trial_idx as u64);
    let outcome = simulate(cfg, value_idx, trial_idx, fixed_plan).and_then(|st| Ok((score(cfg, &st)?, st)));
    let wall_ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let mut rec = TrialRecord {
        trial: trial_idx,
        seed,
        measurements: fixed_plan.map(|p| p.len()).or(cfg.setup.measurements).unwrap_or(0),
        grid_n: cfg.grid_n,
        snr_db: cfg.snr_db,
        setup: cfg.setup.kind,
        nmse: f64::NAN,
        angle_error: f64::NAN,
        coeff_error: f64::NAN,
        achieved_snr: f64::NAN,
        max_snr: f64::NAN,
        fpa_snr: f64::NAN,
        omp_iters: 0,
        wall_ms,
        error: None,
    };
    match outcome {
        Ok((s, st)) => {
            rec.measurements = st.plan.len();
            rec.nmse = s.report.nmse;
            rec.angle_error = s.report.angle_error;
            rec.coeff_error = s.report.coeff_error;
            rec.achieved_snr = s.achieved;
            rec.max_snr = s.perfect;
            rec.fpa_snr = s.fpa;
            rec.omp_iters = st.estimate.iterations();
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

/// Trial `trial_idx` of a single-configuration run.
pub fn run_trial(cfg: &ExperimentConfig, trial_idx: usize) -> TrialRecord {
    run_trial_at(cfg, 0, trial_idx, None)
}
