//! Measurement setups, the measurement operator, and coherence analysis.

pub mod coherence;
pub mod operator;
pub mod plan;

pub use coherence::{
    coherence_at_offset, effective_coherence_1d, half_power_width, ideal_sinc_coherence, max_beyond_main_lobe,
    mutual_coherence_column, sinc, uniform_positions,
};
pub use operator::{adjoint_apply, apply, MeasurementOperator, OperatorMode, EXPLICIT_LIMIT};
pub use plan::{
    cross_positions, edge_positions, gen_cross, gen_edge, gen_random, gen_random_walk, gen_upa,
    spacing_for_measurements, upa_positions, MeasurementPlan, PlanParams, SetupKind,
};
