//! Exact output photon-number distribution of a multiplexed heralded source.
//!
//! Units are scanned in priority order; the first unit whose detector reports
//! an accepted photon number routes its signal photons to the output:
//!
//! ```text
//! P_i = q^N δ_i0 + Σ_n q^(n-1) Σ_l Σ_{j∈S, j≤l} P(j|l) P(l) V_n(i|l),   q = 1 - Σ_{j∈S} P(j)
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_models::{all_unit_transmissions, MultiplexerModel};
use crate::photon_statistics::{
    binomial_pmf, DetectorModel, HeraldingStrategy, PairDistribution, PairStatistics, DEFAULT_TAIL_TOL,
};

/// Default highest reported output photon number.
pub const DEFAULT_I_MAX: u32 = 8;

/// Above this unit count the priority prefix is evaluated in log space.
const LOG_PREFIX_THRESHOLD: u32 = 256;

/// Largest admissible series tolerance.
const MAX_TAIL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub dist: PairDistribution,
    pub detector: DetectorModel,
    pub strategy: HeraldingStrategy,
    pub mux: MultiplexerModel,
    pub units: u32,
    pub tail_tol: f64,
    pub i_max: u32,
}

impl SourceConfig {
    /// Configuration with default `tail_tol` and `i_max`, validated.
    pub fn new(
        dist: PairDistribution,
        detector: DetectorModel,
        strategy: HeraldingStrategy,
        mux: MultiplexerModel,
        units: u32,
    ) -> Result<Self> {
        let cfg = Self {
            dist,
            detector,
            strategy,
            mux,
            units,
            tail_tol: DEFAULT_TAIL_TOL,
            i_max: DEFAULT_I_MAX,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.mux.check_units(self.units)?;
        if self.i_max < 1 {
            return Err(Error::invalid("i_max", self.i_max, "must be at least 1"));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol <= MAX_TAIL_TOL) {
            return Err(Error::invalid("tail_tol", self.tail_tol, "must lie in (0, 1e-6]"));
        }
        self.strategy.validate_for(&self.detector)
    }

    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        Ok(Self {
            dist: self.dist.with_mean(mean)?,
            ..self.clone()
        })
    }

    pub fn with_units(&self, units: u32) -> Result<Self> {
        let cfg = Self {
            units,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_strategy(&self, strategy: HeraldingStrategy) -> Result<Self> {
        let cfg = Self {
            strategy,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Output photon-number probabilities `P_0..=P_{i_max}` and the mass left
/// above `i_max` (or lost to series truncation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDistribution {
    pub probabilities: Vec<f64>,
    pub truncation_deficit: f64,
}

impl OutputDistribution {
    pub fn get(&self, i: usize) -> f64 {
        self.probabilities.get(i).copied().unwrap_or(0.0)
    }

    pub fn p1(&self) -> f64 {
        self.get(1)
    }
}

/// Per-(distribution, detector, strategy) precomputation shared by all units.
pub(crate) struct HeraldTable {
    /// `P(l) Σ_{j∈S, j≤l} P(j|l)`: joint probability of `l` pairs and a herald.
    pub(crate) gated: Vec<f64>,
    /// Single-unit herald probability.
    pub(crate) herald: f64,
}

impl HeraldTable {
    pub(crate) fn new(
        dist: &PairDistribution,
        detector: &DetectorModel,
        strategy: &HeraldingStrategy,
        tail_tol: f64,
    ) -> Self {
        let pairs = dist.pmf_table(tail_tol);
        let v = detector.efficiency();
        let gated: Vec<f64> = pairs
            .iter()
            .enumerate()
            .map(|(l, &p)| {
                let l = l as u32;
                let accept = match strategy {
                    HeraldingStrategy::ThresholdAll => 1.0 - binomial_pmf(0, l, v),
                    HeraldingStrategy::Accepted(set) => {
                        set.range(..=l).map(|&j| binomial_pmf(j, l, v)).sum()
                    }
                };
                p * accept
            })
            .collect();
        let herald = gated.iter().sum();
        Self { gated, herald }
    }

    /// `Σ_l gated(l) V(i|l)` for `i = 0..=i_max`.
    fn routed(&self, transmission: f64, i_max: u32) -> Vec<f64> {
        (0..=i_max)
            .map(|i| {
                self.gated
                    .iter()
                    .enumerate()
                    .skip(i as usize)
                    .map(|(l, g)| g * binomial_pmf(i, l as u32, transmission))
                    .sum()
            })
            .collect()
    }
}

/// Sum of priority prefixes `q^(n-1)` grouped by distinct unit transmission.
fn prefix_weights(transmissions: &[f64], miss: f64) -> BTreeMap<u64, f64> {
    let units = transmissions.len() as u32;
    let mut weights: BTreeMap<u64, f64> = BTreeMap::new();
    let log_miss = if miss > 0.0 { Some(miss.ln()) } else { None };
    let mut running = 1.0;
    for (idx, &v) in transmissions.iter().enumerate() {
        let prefix = if units > LOG_PREFIX_THRESHOLD {
            match log_miss {
                Some(lq) => (idx as f64 * lq).exp(),
                None if idx == 0 => 1.0,
                None => 0.0,
            }
        } else {
            let p = running;
            running *= miss;
            p
        };
        *weights.entry(v.to_bits()).or_insert(0.0) += prefix;
    }
    weights
}

fn no_herald_probability(miss: f64, units: u32) -> f64 {
    if units > LOG_PREFIX_THRESHOLD && miss > 0.0 {
        (f64::from(units) * miss.ln()).exp()
    } else {
        miss.powi(units as i32)
    }
}

pub(crate) fn evaluate(cfg: &SourceConfig, i_max: u32) -> Result<Vec<f64>> {
    cfg.validate()?;
    let table = HeraldTable::new(&cfg.dist, &cfg.detector, &cfg.strategy, cfg.tail_tol);
    let transmissions = all_unit_transmissions(&cfg.mux, cfg.units)?;
    let miss = (1.0 - table.herald).max(0.0);

    let mut probs = vec![0.0; i_max as usize + 1];
    probs[0] = no_herald_probability(miss, cfg.units);
    for (bits, weight) in prefix_weights(&transmissions, miss) {
        if weight == 0.0 {
            continue;
        }
        for (p, r) in probs.iter_mut().zip(table.routed(f64::from_bits(bits), i_max)) {
            *p += weight * r;
        }
    }
    Ok(probs)
}

/// Output photon-number distribution for `cfg`.
pub fn output_distribution(cfg: &SourceConfig) -> Result<OutputDistribution> {
    let probabilities = evaluate(cfg, cfg.i_max)?;
    let truncation_deficit = 1.0 - probabilities.iter().sum::<f64>();
    Ok(OutputDistribution {
        probabilities,
        truncation_deficit,
    })
}

/// `P_1` alone; the quantity every optimizer step evaluates.
pub fn single_photon_probability(cfg: &SourceConfig) -> Result<f64> {
    Ok(evaluate(cfg, 1)?[1])
}

fn require_poissonian(cfg: &SourceConfig) -> Result<()> {
    if cfg.dist.kind() != PairStatistics::Poissonian {
        return Err(Error::Precondition("closed form requires Poissonian pair statistics"));
    }
    Ok(())
}

/// Closed-form `P_1` for Poissonian pairs and threshold heralding.
pub fn p1_threshold_closed_form(cfg: &SourceConfig) -> Result<f64> {
    require_poissonian(cfg)?;
    if cfg.strategy != HeraldingStrategy::ThresholdAll {
        return Err(Error::Precondition("closed form requires threshold heralding"));
    }
    let lam = cfg.dist.mean();
    let vd = cfg.detector.efficiency();
    let transmissions = all_unit_transmissions(&cfg.mux, cfg.units)?;
    Ok(transmissions
        .iter()
        .enumerate()
        .map(|(idx, &vn)| {
            (-lam * vd * idx as f64).exp()
                * lam
                * vn
                * (-lam).exp()
                * ((lam * (1.0 - vn)).exp() - (1.0 - vd) * (lam * (1.0 - vn) * (1.0 - vd)).exp())
        })
        .sum())
}

/// Closed-form `P_1` for Poissonian pairs and exactly-one-photon heralding.
pub fn p1_spd_closed_form(cfg: &SourceConfig) -> Result<f64> {
    require_poissonian(cfg)?;
    if cfg.strategy != HeraldingStrategy::single() {
        return Err(Error::Precondition("closed form requires single-photon heralding"));
    }
    let lam = cfg.dist.mean();
    let vd = cfg.detector.efficiency();
    let miss = 1.0 - vd * lam * (-vd * lam).exp();
    let transmissions = all_unit_transmissions(&cfg.mux, cfg.units)?;
    Ok(transmissions
        .iter()
        .enumerate()
        .map(|(idx, &vn)| {
            let lost = (1.0 - vd) * (1.0 - vn);
            miss.powi(idx as i32) * (1.0 + lost * lam) * lam * vd * vn * ((lost - 1.0) * lam).exp()
        })
        .sum())
}
