//! Compressed-sensing channel estimation for links where both the
//! transmit and receive antennas can be repositioned inside a square
//! region.
//!
//! The channel is modelled as a few far-field paths. Measuring it at a
//! sequence of antenna position pairs yields a linear system over a
//! discretised angular dictionary, which is solved with orthogonal
//! matching pursuit. The recovered paths reconstruct the channel at
//! arbitrary positions, so the best antenna placement can be chosen
//! without sweeping the whole region.

pub mod channel;
pub mod error;
pub mod estimate;
pub mod grid;
pub mod harness;
pub mod measure;
pub mod metrics;

pub use channel::{
    channel_response, ChannelEvaluator, ChannelRealization, NoiseModel, PathComponent, Position, VirtualAngles,
};
pub use error::{Error, Result};
pub use estimate::{extract_paths, omp, reconstruct, EstimatedChannel, OmpConfig, SparseEstimate};
pub use grid::{flat_index, unflatten, AngleGrid, GridIndex4};
pub use harness::{run_trial, sweep, Axis, ExperimentConfig, SetupSpec, TrialRecord};
pub use measure::{MeasurementOperator, MeasurementPlan, OperatorMode, SetupKind};
pub use metrics::{achieved_snr, error_report, fpa_snr, max_snr, nmse, ErrorReport, SampleGrid, SnrPoint};
