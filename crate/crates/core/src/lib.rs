//! Output photon statistics and optimization of spatially and time-multiplexed
//! heralded single-photon sources read out by photon-number-resolving
//! detectors.
//!
//! The crate is organised bottom-up:
//!
//! * [`photon_statistics`]: pair-number distributions, detector click statistics
//!   and heralding strategies.
//! * [`loss_models`]: per-unit transmission of each multiplexer topology.
//! * [`output_engine`]: the exact output photon-number distribution and the
//!   closed forms for threshold and single-photon heralding.
//! * [`simulation`]: a seeded Monte-Carlo sampler of the same pipeline.
//! * [`optimizer`]: maximization over mean pair number, unit count and heralding
//!   strategy, plus detector/router comparison maps.
//! * [`report`]: configuration documents, presets and table output for the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod loss_models;
pub mod optimizer;
pub mod output_engine;
pub mod photon_statistics;
pub mod report;
pub mod simulation;

pub use error::{Error, Result};
pub use loss_models::{
    hamming_weight, transmit_conditional, unit_transmission, LoopCycleConvention, MultiplexerKind,
    MultiplexerModel, UnitTransmission,
};
pub use optimizer::{
    comparison_map, maximize_over_lambda, optimize_strategy, optimize_units, ComparisonMap,
    OptimizationResult, OptimizerSettings, StrategyScanResult,
};
pub use output_engine::{
    output_distribution, p1_spd_closed_form, p1_threshold_closed_form, single_photon_probability,
    OutputDistribution, SourceConfig,
};
pub use photon_statistics::{
    detect_conditional, detect_total, herald_probability, pair_pmf, DetectorModel,
    HeraldingStrategy, PairDistribution, PairStatistics,
};
pub use simulation::{simulate, SimulationEstimate};
