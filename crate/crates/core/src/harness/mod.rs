//! Seeded Monte Carlo experiments: single trials, parameter sweeps with
//! CSV/JSON output, coherence reports and SNR maps.

pub mod config;
pub mod report;
pub mod sweep;
pub mod trial;

pub use config::{ExperimentConfig, SetupSpec, DEFAULT_RANDOM_MEASUREMENTS, DEFAULT_SPACING, DEFAULT_STEP};
pub use report::{coherence_report, snr_map, CoherenceReport, SincPoint, SnrMap, SnrMapRow};
pub use sweep::{
    aggregate, mean_se, sweep, write_aggregate_csv, write_sweep_csv, AggregateRow, Axis, SweepResult, SweepRow,
    AGGREGATE_HEADER, SWEEP_HEADER,
};
pub use trial::{derive_seed, plan_rng, run_trial, run_trial_at, simulate, TrialRecord, TrialState};
