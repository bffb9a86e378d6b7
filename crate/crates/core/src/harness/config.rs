use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimate::OmpConfig;
use crate::measure::{
    gen_cross, gen_edge, gen_random, gen_random_walk, gen_upa, spacing_for_measurements, MeasurementPlan, SetupKind,
};
use crate::metrics::SampleGrid;

/// Position spacing used by the deterministic setups when neither a
/// spacing nor a measurement count is given.
pub const DEFAULT_SPACING: f64 = 0.4;
pub const DEFAULT_STEP: f64 = 0.5;
pub const DEFAULT_RANDOM_MEASUREMENTS: usize = 144;

/// Which measurement setup to use and how to size it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetupSpec {
    pub kind: SetupKind,
    /// Spacing of the deterministic setups.
    pub spacing: Option<f64>,
    /// Step length of the random walk.
    pub step: f64,
    /// Number of measurements. For deterministic setups this fixes the
    /// spacing when no explicit spacing is given.
    pub measurements: Option<usize>,
}

impl SetupSpec {
    pub fn new(kind: SetupKind) -> Self {
        Self { kind, spacing: None, step: DEFAULT_STEP, measurements: None }
    }

    pub fn with_measurements(mut self, m: usize) -> Self {
        self.measurements = Some(m);
        self
    }

    pub fn with_spacing(mut self, d: f64) -> Self {
        self.spacing = Some(d);
        self
    }

    /// Spacing actually used by a deterministic setup.
    pub fn resolved_spacing(&self, region: f64) -> Result<f64> {
        match (self.spacing, self.measurements) {
            (Some(d), _) => Ok(d),
            (None, Some(m)) => spacing_for_measurements(self.kind, region, m),
            (None, None) => Ok(DEFAULT_SPACING),
        }
    }

    /// Builds a plan. Deterministic setups ignore `rng`.
    pub fn build_plan<R: Rng + ?Sized>(&self, region: f64, rng: &mut R) -> Result<MeasurementPlan> {
        let plan = match self.kind {
            SetupKind::UpaShape | SetupKind::EdgeOfRegion | SetupKind::CrossShape => {
                let d = self.resolved_spacing(region)?;
                match self.kind {
                    SetupKind::UpaShape => gen_upa(region, d)?,
                    SetupKind::EdgeOfRegion => gen_edge(region, d)?,
                    _ => gen_cross(region, d)?,
                }
            }
            SetupKind::RandomDistribution => {
                gen_random(region, self.measurements.unwrap_or(DEFAULT_RANDOM_MEASUREMENTS), rng)?
            }
            SetupKind::RandomWalk => {
                gen_random_walk(region, self.measurements.unwrap_or(DEFAULT_RANDOM_MEASUREMENTS), self.step, rng)?
            }
            SetupKind::Custom => return invalid("custom plans cannot be generated from a setup spec"),
        };
        if let Some(m) = self.measurements {
            if plan.len() != m {
                return invalid(format!("{} setup produced {} measurements, expected {m}", self.kind, plan.len()));
            }
        }
        Ok(plan)
    }
}

/// Everything a Monte Carlo run needs. [`Default`] gives the full-scale
/// simulation parameters; [`ExperimentConfig::desk`] a reduced variant
/// that runs in minutes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub region: f64,
    pub grid_n: usize,
    pub paths: usize,
    pub snr_db: f64,
    pub epsilon0: f64,
    pub k_max: usize,
    pub ridge: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub setup: SetupSpec,
    pub metric_d: usize,
    /// Draw path angles on the dictionary lattice.
    pub on_grid: bool,
    /// Measure without noise. SNR metrics still use the nominal SNR.
    pub noiseless: bool,
    /// Record wall-clock time per trial (otherwise reported as 0).
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            region: 2.0,
            grid_n: 24,
            paths: 3,
            snr_db: 20.0,
            epsilon0: 0.1,
            k_max: 32,
            ridge: 0.0,
            trials: 1000,
            master_seed: 0,
            setup: SetupSpec::new(SetupKind::RandomDistribution),
            metric_d: 51,
            on_grid: false,
            noiseless: false,
            timing: true,
        }
    }
}

impl ExperimentConfig {
    pub fn desk() -> Self {
        Self { grid_n: 12, metric_d: 11, trials: 50, ..Self::default() }
    }

    pub fn omp_config(&self) -> Result<OmpConfig> {
        OmpConfig::new(self.epsilon0, self.k_max, self.ridge)
    }

    pub fn sample_grid(&self) -> Result<SampleGrid> {
        SampleGrid::new(self.metric_d, self.region)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.region > 0.0 && self.region.is_finite()) {
            return invalid(format!("region must be positive, got {}", self.region));
        }
        if !(2..=256).contains(&self.grid_n) {
            return invalid(format!("grid N must be in [2, 256], got {}", self.grid_n));
        }
        if self.paths < 1 {
            return invalid("number of paths must be >= 1");
        }
        if self.on_grid && self.paths > self.grid_n.pow(4) {
            return invalid("more on-grid paths than dictionary atoms");
        }
        if !self.snr_db.is_finite() {
            return invalid("SNR must be finite");
        }
        if self.trials < 1 {
            return invalid("trials must be >= 1");
        }
        if !(self.setup.step > 0.0 && self.setup.step.is_finite()) {
            return invalid(format!("walk step must be positive, got {}", self.setup.step));
        }
        if let Some(d) = self.setup.spacing {
            if !(d > 0.0 && d.is_finite()) {
                return invalid(format!("spacing must be positive, got {d}"));
            }
        }
        if self.setup.measurements == Some(0) {
            return invalid("measurements must be >= 1");
        }
        if self.setup.kind == SetupKind::Custom {
            return invalid("custom setups are not supported by the experiment runner");
        }
        if !self.setup.kind.is_random() {
            self.setup.resolved_spacing(self.region)?;
        }
        self.omp_config()?;
        self.sample_grid()?;
        Ok(())
    }
}
