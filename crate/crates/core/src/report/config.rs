//! The run configuration document and its expansion into concrete scenarios.

use serde::{Deserialize, Serialize};

use crate::loss_models::{LoopCycleConvention, MultiplexerKind, MultiplexerModel};
use crate::optimizer::OptimizerSettings;
use crate::output_engine::{SourceConfig, DEFAULT_I_MAX};
use crate::photon_statistics::{
    DetectorModel, HeraldingStrategy, PairDistribution, PairStatistics, DEFAULT_RESOLUTION_CAP,
    DEFAULT_TAIL_TOL,
};

use super::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evaluate,
    Optimize,
    StrategyScan,
    Map,
    Table,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Evaluate => "evaluate",
            Command::Optimize => "optimize",
            Command::StrategyScan => "strategy-scan",
            Command::Map => "map",
            Command::Table => "table",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub multiplexer: MultiplexerSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub command: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub seed: u64,
    /// Monte-Carlo samples per row for the oracle cross-check; 0 disables it.
    pub mc_samples: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            command: Command::Evaluate,
            out: None,
            seed: 1,
            mc_samples: 0,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    pub distribution: PairStatistics,
    pub mean: f64,
    pub tail_tol: f64,
    pub i_max: u32,
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            distribution: PairStatistics::Poissonian,
            mean: 0.45,
            tail_tol: DEFAULT_TAIL_TOL,
            i_max: DEFAULT_I_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub efficiency: f64,
    pub resolution_cap: u32,
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            efficiency: 0.95,
            resolution_cap: DEFAULT_RESOLUTION_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategySection {
    /// `threshold`, `spd`, `up-to-<J>` or `set`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepted: Option<Vec<u32>>,
}

impl Default for StrategySection {
    fn default() -> Self {
        Self {
            kind: "spd".to_owned(),
            accepted: None,
        }
    }
}

impl StrategySection {
    pub fn resolve(&self) -> Result<HeraldingStrategy, RunError> {
        if self.kind == "set" {
            let accepted = self
                .accepted
                .clone()
                .ok_or_else(|| RunError::config("strategy.accepted", "required when kind = \"set\""))?;
            return Ok(HeraldingStrategy::accepted(accepted)?);
        }
        if self.accepted.is_some() {
            return Err(RunError::config("strategy.accepted", "only allowed when kind = \"set\""));
        }
        parse_strategy_label("strategy.kind", &self.kind)
    }
}

/// Parses `threshold`, `spd` or `up-to-<J>`.
pub fn parse_strategy_label(field: &'static str, label: &str) -> Result<HeraldingStrategy, RunError> {
    match label {
        "threshold" => Ok(HeraldingStrategy::ThresholdAll),
        "spd" => Ok(HeraldingStrategy::single()),
        other => match other.strip_prefix("up-to-").map(str::parse::<u32>) {
            Some(Ok(j)) => Ok(HeraldingStrategy::up_to(j)?),
            _ => Err(RunError::config(
                field,
                format!("unknown strategy `{other}` (expected threshold, spd or up-to-<J>)"),
            )),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplexerName {
    SymmetricSpatial,
    TimeChain,
    TimeLoopLatest,
    BinaryBulkTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultiplexerSection {
    pub kind: MultiplexerName,
    pub generic_transmission: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub router_transmission: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_transmission: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loop_convention: Option<LoopCycleConvention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pbs_transmission: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pbs_reflection: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagation_transmission: Option<f64>,
    pub units: u32,
}

impl Default for MultiplexerSection {
    fn default() -> Self {
        Self {
            kind: MultiplexerName::SymmetricSpatial,
            generic_transmission: 1.0,
            router_transmission: Some(0.98),
            cycle_transmission: None,
            loop_convention: None,
            pbs_transmission: None,
            pbs_reflection: None,
            propagation_transmission: None,
            units: 16,
        }
    }
}

impl MultiplexerSection {
    pub fn resolve(&self) -> Result<MultiplexerModel, RunError> {
        let need = |value: Option<f64>, field: &'static str| {
            value.ok_or_else(|| RunError::config(field, "required for this multiplexer kind"))
        };
        let forbid = |present: bool, field: &'static str| {
            if present {
                Err(RunError::config(field, "not used by this multiplexer kind"))
            } else {
                Ok(())
            }
        };
        let kind = match self.kind {
            MultiplexerName::SymmetricSpatial => {
                forbid(self.cycle_transmission.is_some(), "multiplexer.cycle_transmission")?;
                forbid(self.loop_convention.is_some(), "multiplexer.loop_convention")?;
                forbid(self.pbs_transmission.is_some(), "multiplexer.pbs_transmission")?;
                forbid(self.pbs_reflection.is_some(), "multiplexer.pbs_reflection")?;
                forbid(self.propagation_transmission.is_some(), "multiplexer.propagation_transmission")?;
                MultiplexerKind::SymmetricSpatial {
                    router_transmission: need(self.router_transmission, "multiplexer.router_transmission")?,
                }
            }
            MultiplexerName::TimeChain | MultiplexerName::TimeLoopLatest => {
                forbid(self.router_transmission.is_some(), "multiplexer.router_transmission")?;
                forbid(self.pbs_transmission.is_some(), "multiplexer.pbs_transmission")?;
                forbid(self.pbs_reflection.is_some(), "multiplexer.pbs_reflection")?;
                forbid(self.propagation_transmission.is_some(), "multiplexer.propagation_transmission")?;
                let cycle_transmission = need(self.cycle_transmission, "multiplexer.cycle_transmission")?;
                if self.kind == MultiplexerName::TimeChain {
                    forbid(self.loop_convention.is_some(), "multiplexer.loop_convention")?;
                    MultiplexerKind::TimeChain { cycle_transmission }
                } else {
                    MultiplexerKind::TimeLoopLatest {
                        cycle_transmission,
                        convention: self.loop_convention.unwrap_or_default(),
                    }
                }
            }
            MultiplexerName::BinaryBulkTime => {
                forbid(self.router_transmission.is_some(), "multiplexer.router_transmission")?;
                forbid(self.cycle_transmission.is_some(), "multiplexer.cycle_transmission")?;
                forbid(self.loop_convention.is_some(), "multiplexer.loop_convention")?;
                MultiplexerKind::BinaryBulkTime {
                    pbs_transmission: need(self.pbs_transmission, "multiplexer.pbs_transmission")?,
                    pbs_reflection: need(self.pbs_reflection, "multiplexer.pbs_reflection")?,
                    propagation_transmission: need(
                        self.propagation_transmission,
                        "multiplexer.propagation_transmission",
                    )?,
                }
            }
        };
        Ok(MultiplexerModel::new(self.generic_transmission, kind)?)
    }

    /// Column header for the characteristic element transmission.
    pub fn element_column(&self) -> &'static str {
        match self.kind {
            MultiplexerName::SymmetricSpatial => "V_r",
            MultiplexerName::TimeChain | MultiplexerName::TimeLoopLatest => "V_c",
            MultiplexerName::BinaryBulkTime => "V_t",
        }
    }

    fn element_value(&self) -> Option<f64> {
        match self.kind {
            MultiplexerName::SymmetricSpatial => self.router_transmission,
            MultiplexerName::TimeChain | MultiplexerName::TimeLoopLatest => self.cycle_transmission,
            MultiplexerName::BinaryBulkTime => self.pbs_transmission,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub grid_points: usize,
    pub lambda_tol: f64,
    pub max_log2_units: u32,
    pub chain_units_cap: u32,
    /// Explicit unit-count candidates; defaults depend on the multiplexer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<Vec<u32>>,
    pub j_max: u32,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let s = OptimizerSettings::default();
        Self {
            lambda_min: s.lambda_min,
            lambda_max: s.lambda_max,
            grid_points: s.grid_points,
            lambda_tol: s.lambda_tol,
            max_log2_units: s.max_log2_units,
            chain_units_cap: s.chain_units_cap,
            units: None,
            j_max: 4,
        }
    }
}

impl OptimizerSection {
    pub fn settings(&self) -> Result<OptimizerSettings, RunError> {
        let s = OptimizerSettings {
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            grid_points: self.grid_points,
            lambda_tol: self.lambda_tol,
            max_log2_units: self.max_log2_units,
            chain_units_cap: self.chain_units_cap,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn candidates(&self) -> Vec<u32> {
        self.units.clone().unwrap_or_default()
    }
}

/// A sweep axis: explicit values or an inclusive arithmetic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Axis {
    pub fn values(&self, field: &'static str) -> Result<Vec<f64>, RunError> {
        let values = match self {
            Axis::Values(v) => v.clone(),
            Axis::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Err(RunError::config(field, "range needs step > 0 and stop >= start"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                // snap to 12 decimals so 0.3 + k * 0.01 prints as written
                (0..count)
                    .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
        };
        if values.is_empty() {
            return Err(RunError::config(field, "must not be empty"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RunError::config(field, "grid must be strictly increasing"));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategies: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distributions: Option<Vec<PairStatistics>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loop_conventions: Option<Vec<LoopCycleConvention>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector_efficiency: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element_transmission: Option<Axis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Axis>,
}

/// One fully resolved point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub strategy_label: String,
    pub convention: Option<LoopCycleConvention>,
    pub detector_efficiency: f64,
    pub element_transmission: f64,
    pub cfg: SourceConfig,
}

impl RunSpec {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let spec: RunSpec = toml::from_str(text).map_err(|e| RunError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run spec serializes to TOML")
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("run spec serializes to JSON")
    }

    /// Checks everything that can be checked without running a computation.
    pub fn validate(&self) -> Result<(), RunError> {
        self.optimizer.settings()?;
        self.scenarios()?;
        self.lambda_axis()?;
        if let Some(units) = &self.optimizer.units {
            if units.is_empty() {
                return Err(RunError::config("optimizer.units", "must not be empty"));
            }
        }
        if self.optimizer.j_max == 0 || self.optimizer.j_max > self.detector.resolution_cap {
            return Err(RunError::config("optimizer.j_max", "must lie in 1..=detector.resolution_cap"));
        }
        Ok(())
    }

    pub fn base_config(&self) -> Result<SourceConfig, RunError> {
        let cfg = SourceConfig {
            dist: PairDistribution::new(self.source.distribution, self.source.mean)?,
            detector: DetectorModel::new(self.detector.efficiency, self.detector.resolution_cap)?,
            strategy: self.strategy.resolve()?,
            mux: self.multiplexer.resolve()?,
            units: self.multiplexer.units,
            tail_tol: self.source.tail_tol,
            i_max: self.source.i_max,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn detector_axis(&self) -> Result<Vec<f64>, RunError> {
        match &self.sweep.detector_efficiency {
            Some(axis) => axis.values("sweep.detector_efficiency"),
            None => Ok(vec![self.detector.efficiency]),
        }
    }

    pub fn element_axis(&self) -> Result<Vec<f64>, RunError> {
        match &self.sweep.element_transmission {
            Some(axis) => axis.values("sweep.element_transmission"),
            None => self
                .multiplexer
                .element_value()
                .map(|v| vec![v])
                .ok_or_else(|| RunError::config("multiplexer", "element transmission missing")),
        }
    }

    pub fn lambda_axis(&self) -> Result<Vec<f64>, RunError> {
        match &self.sweep.lambda {
            Some(axis) => axis.values("sweep.lambda"),
            None => Ok(vec![self.source.mean]),
        }
    }

    /// Cartesian product of the sweep axes, in a fixed nesting order:
    /// strategy, distribution, loop convention, detector efficiency,
    /// element transmission, unit count.
    pub fn scenarios(&self) -> Result<Vec<Scenario>, RunError> {
        let base = self.base_config()?;
        let strategies: Vec<(String, HeraldingStrategy)> = match &self.sweep.strategies {
            Some(labels) if labels.is_empty() => {
                return Err(RunError::config("sweep.strategies", "must not be empty"))
            }
            Some(labels) => labels
                .iter()
                .map(|l| Ok((l.clone(), parse_strategy_label("sweep.strategies", l)?)))
                .collect::<Result<_, RunError>>()?,
            None => vec![(base.strategy.label(), base.strategy.clone())],
        };
        let distributions = self
            .sweep
            .distributions
            .clone()
            .unwrap_or_else(|| vec![self.source.distribution]);
        let conventions: Vec<Option<LoopCycleConvention>> = match (&self.sweep.loop_conventions, base.mux.kind()) {
            (Some(list), MultiplexerKind::TimeLoopLatest { .. }) => list.iter().copied().map(Some).collect(),
            (Some(_), _) => {
                return Err(RunError::config(
                    "sweep.loop_conventions",
                    "only valid for the time-loop-latest multiplexer",
                ))
            }
            (None, MultiplexerKind::TimeLoopLatest { convention, .. }) => vec![Some(*convention)],
            (None, _) => vec![None],
        };
        let units = self.sweep.units.clone().unwrap_or_else(|| vec![self.multiplexer.units]);
        if distributions.is_empty() || conventions.is_empty() || units.is_empty() {
            return Err(RunError::config("sweep", "axes must not be empty"));
        }
        let vds = self.detector_axis()?;
        let elements = self.element_axis()?;

        let mut out = Vec::new();
        for (label, strategy) in &strategies {
            for &dist in &distributions {
                for &convention in &conventions {
                    for &vd in &vds {
                        for &element in &elements {
                            for &n in &units {
                                let mut mux = base.mux.with_element_transmission(element)?;
                                if let (Some(conv), MultiplexerKind::TimeLoopLatest { cycle_transmission, .. }) =
                                    (convention, mux.kind())
                                {
                                    mux = MultiplexerModel::new(
                                        mux.generic_transmission(),
                                        MultiplexerKind::TimeLoopLatest {
                                            cycle_transmission: *cycle_transmission,
                                            convention: conv,
                                        },
                                    )?;
                                }
                                let cfg = SourceConfig {
                                    dist: PairDistribution::new(dist, self.source.mean)?,
                                    detector: DetectorModel::new(vd, self.detector.resolution_cap)?,
                                    strategy: strategy.clone(),
                                    mux,
                                    units: n,
                                    ..base.clone()
                                };
                                cfg.validate()?;
                                out.push(Scenario {
                                    strategy_label: label.clone(),
                                    convention,
                                    detector_efficiency: vd,
                                    element_transmission: element,
                                    cfg,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid_and_round_trips() {
        let spec = RunSpec::default();
        spec.validate().unwrap();
        let text = spec.to_toml();
        assert_eq!(RunSpec::from_toml(&text).unwrap(), spec);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = RunSpec::from_toml("[detector]\nefficency = 0.9\n").unwrap_err();
        assert!(err.to_string().contains("efficency"), "{err}");
        let err = RunSpec::from_toml("[bogus]\nx = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn out_of_range_values_name_the_field() {
        let err = RunSpec::from_toml("[detector]\nefficiency = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("detector.efficiency"), "{err}");
        let err = RunSpec::from_toml("[multiplexer]\nrouter_transmission = 0.9\nunits = 12\n").unwrap_err();
        assert!(err.to_string().contains("power-of-two"), "{err}");
        let err = RunSpec::from_toml(
            "[multiplexer]\nkind = \"binary-bulk-time\"\npbs_transmission = 0.9\nrouter_transmission = 0.9\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("multiplexer.router_transmission"), "{err}");
    }

    #[test]
    fn ranges_expand_cleanly() {
        let axis = Axis::Range {
            start: 0.3,
            stop: 1.0,
            step: 0.01,
        };
        let v = axis.values("x").unwrap();
        assert_eq!(v.len(), 71);
        assert_eq!(v[1], 0.31);
        assert_eq!(v[70], 1.0);
        assert!(Axis::Values(vec![0.5, 0.5]).values("x").is_err());
        assert!(Axis::Values(vec![]).values("x").is_err());
    }

    #[test]
    fn strategy_labels() {
        assert_eq!(parse_strategy_label("f", "spd").unwrap(), HeraldingStrategy::single());
        assert_eq!(parse_strategy_label("f", "up-to-3").unwrap(), HeraldingStrategy::up_to(3).unwrap());
        assert!(parse_strategy_label("f", "up-to-x").is_err());
        assert!(parse_strategy_label("f", "sometimes").is_err());
        let s = StrategySection {
            kind: "set".into(),
            accepted: Some(vec![2, 3]),
        };
        assert_eq!(s.resolve().unwrap(), HeraldingStrategy::accepted([2, 3]).unwrap());
    }

    #[test]
    fn sweep_product_order() {
        let text = r#"
[detector]
efficiency = 0.9
[sweep]
strategies = ["threshold", "spd"]
detector_efficiency = [0.6, 0.9]
element_transmission = { start = 0.9, stop = 0.95, step = 0.05 }
"#;
        let spec = RunSpec::from_toml(text).unwrap();
        let s = spec.scenarios().unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s[0].strategy_label, "threshold");
        assert_eq!(s[1].element_transmission, 0.95);
        assert_eq!(s[2].detector_efficiency, 0.9);
        assert_eq!(s[4].cfg.strategy, HeraldingStrategy::single());
    }

    #[test]
    fn loop_conventions_only_for_loop() {
        let err = RunSpec::from_toml("[sweep]\nloop_conventions = [\"priority-index\"]\n").unwrap_err();
        assert!(err.to_string().contains("sweep.loop_conventions"));
    }
}
