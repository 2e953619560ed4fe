//! Built-in run specifications for the reference scenarios.

use crate::loss_models::LoopCycleConvention;
use crate::photon_statistics::PairStatistics;

use super::config::{Axis, Command, MultiplexerName, MultiplexerSection, RunSpec, SweepSection};
use super::RunError;

pub const PRESET_NAMES: &[&str] = &[
    "ssm-spd",
    "ssm-threshold",
    "loop-latest",
    "btm",
    "fig3-curves",
    "fig4-7-maps",
];

const TABLE_DETECTORS: [f64; 5] = [0.3, 0.6, 0.8, 0.9, 0.98];
const TABLE_ROUTERS: [f64; 19] = [
    0.30, 0.40, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.88, 0.90, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98,
    0.99,
];
const TIME_DETECTORS: [f64; 8] = [0.6, 0.8, 0.85, 0.9, 0.95, 0.96, 0.97, 0.98];

fn ssm_table(strategy: &str) -> RunSpec {
    let mut spec = RunSpec::default();
    spec.run.command = Command::Table;
    spec.strategy.kind = strategy.to_owned();
    spec.sweep = SweepSection {
        detector_efficiency: Some(Axis::Values(TABLE_DETECTORS.to_vec())),
        element_transmission: Some(Axis::Values(TABLE_ROUTERS.to_vec())),
        ..SweepSection::default()
    };
    spec
}

pub fn preset(name: &str) -> Result<RunSpec, RunError> {
    let mut spec = match name {
        "ssm-spd" => ssm_table("spd"),
        "ssm-threshold" => ssm_table("threshold"),
        "loop-latest" => {
            let mut spec = RunSpec::default();
            spec.run.command = Command::Table;
            spec.multiplexer = MultiplexerSection {
                kind: MultiplexerName::TimeLoopLatest,
                generic_transmission: 0.88,
                router_transmission: None,
                cycle_transmission: Some(0.988),
                loop_convention: Some(LoopCycleConvention::PriorityIndex),
                units: 40,
                ..MultiplexerSection::default()
            };
            spec.sweep = SweepSection {
                strategies: Some(vec!["threshold".into(), "spd".into()]),
                distributions: Some(vec![PairStatistics::Poissonian, PairStatistics::Thermal]),
                loop_conventions: Some(vec![
                    LoopCycleConvention::PriorityIndex,
                    LoopCycleConvention::PriorityIndexMinusOne,
                ]),
                units: Some(vec![40, 100]),
                detector_efficiency: Some(Axis::Values(TIME_DETECTORS.to_vec())),
                ..SweepSection::default()
            };
            spec
        }
        "btm" => {
            let mut spec = RunSpec::default();
            spec.run.command = Command::Table;
            spec.multiplexer = MultiplexerSection {
                kind: MultiplexerName::BinaryBulkTime,
                generic_transmission: 0.996,
                router_transmission: None,
                pbs_transmission: Some(0.97),
                pbs_reflection: Some(0.996),
                propagation_transmission: Some(0.95),
                units: 1,
                ..MultiplexerSection::default()
            };
            spec.sweep = SweepSection {
                strategies: Some(vec!["threshold".into(), "spd".into()]),
                detector_efficiency: Some(Axis::Values(TIME_DETECTORS.to_vec())),
                ..SweepSection::default()
            };
            spec
        }
        "fig3-curves" => {
            let mut spec = RunSpec::default();
            spec.run.command = Command::Evaluate;
            spec.source.i_max = 3;
            spec.sweep = SweepSection {
                units: Some(vec![1, 2, 4, 8, 16, 32, 64]),
                lambda: Some(Axis::Range {
                    start: 0.01,
                    stop: 2.0,
                    step: 0.01,
                }),
                ..SweepSection::default()
            };
            spec
        }
        "fig4-7-maps" => {
            let mut spec = RunSpec::default();
            spec.run.command = Command::Map;
            let grid = Axis::Range {
                start: 0.3,
                stop: 1.0,
                step: 0.01,
            };
            spec.sweep = SweepSection {
                detector_efficiency: Some(grid.clone()),
                element_transmission: Some(grid),
                ..SweepSection::default()
            };
            spec
        }
        other => {
            return Err(RunError::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    spec.run.out = None;
    Ok(spec)
}
