//! Per-unit transmission of the multiplexer topologies and the binomial
//! loss channel applied to heralded signal photons.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit_interval, Error, Result};
use crate::photon_statistics::binomial_pmf;

/// How many storage-loop cycles the highest-priority slot incurs when the
/// latest heralded photon is released.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoopCycleConvention {
    /// Slot with priority `n` incurs `n` cycles.
    #[default]
    PriorityIndex,
    /// Slot with priority `n` incurs `n - 1` cycles.
    PriorityIndexMinusOne,
}

/// Loss topology of the multiplexer, with its kind-specific parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MultiplexerKind {
    /// Log-tree of symmetric 2-to-1 routers.
    SymmetricSpatial { router_transmission: f64 },
    /// Storage loop with fixed release time; also the asymmetric spatial chain.
    TimeChain { cycle_transmission: f64 },
    /// Storage loop that releases the latest heralded photon.
    TimeLoopLatest {
        cycle_transmission: f64,
        #[serde(default)]
        convention: LoopCycleConvention,
    },
    /// Binary-division bulk delay network.
    BinaryBulkTime {
        pbs_transmission: f64,
        pbs_reflection: f64,
        propagation_transmission: f64,
    },
}

impl MultiplexerKind {
    pub fn name(&self) -> &'static str {
        match self {
            MultiplexerKind::SymmetricSpatial { .. } => "symmetric-spatial",
            MultiplexerKind::TimeChain { .. } => "time-chain",
            MultiplexerKind::TimeLoopLatest { .. } => "time-loop-latest",
            MultiplexerKind::BinaryBulkTime { .. } => "binary-bulk-time",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplexerModel {
    generic_transmission: f64,
    kind: MultiplexerKind,
}

impl MultiplexerModel {
    pub fn new(generic_transmission: f64, kind: MultiplexerKind) -> Result<Self> {
        check_unit_interval("multiplexer.generic_transmission", generic_transmission)?;
        match kind {
            MultiplexerKind::SymmetricSpatial { router_transmission } => {
                check_unit_interval("multiplexer.router_transmission", router_transmission)?;
            }
            MultiplexerKind::TimeChain { cycle_transmission }
            | MultiplexerKind::TimeLoopLatest {
                cycle_transmission, ..
            } => {
                check_unit_interval("multiplexer.cycle_transmission", cycle_transmission)?;
            }
            MultiplexerKind::BinaryBulkTime {
                pbs_transmission,
                pbs_reflection,
                propagation_transmission,
            } => {
                check_unit_interval("multiplexer.pbs_transmission", pbs_transmission)?;
                check_unit_interval("multiplexer.pbs_reflection", pbs_reflection)?;
                check_unit_interval("multiplexer.propagation_transmission", propagation_transmission)?;
            }
        }
        Ok(Self {
            generic_transmission,
            kind,
        })
    }

    pub fn symmetric_spatial(generic_transmission: f64, router_transmission: f64) -> Result<Self> {
        Self::new(
            generic_transmission,
            MultiplexerKind::SymmetricSpatial { router_transmission },
        )
    }

    pub fn time_chain(generic_transmission: f64, cycle_transmission: f64) -> Result<Self> {
        Self::new(generic_transmission, MultiplexerKind::TimeChain { cycle_transmission })
    }

    pub fn time_loop_latest(generic_transmission: f64, cycle_transmission: f64) -> Result<Self> {
        Self::new(
            generic_transmission,
            MultiplexerKind::TimeLoopLatest {
                cycle_transmission,
                convention: LoopCycleConvention::PriorityIndex,
            },
        )
    }

    pub fn binary_bulk_time(
        generic_transmission: f64,
        pbs_transmission: f64,
        pbs_reflection: f64,
        propagation_transmission: f64,
    ) -> Result<Self> {
        Self::new(
            generic_transmission,
            MultiplexerKind::BinaryBulkTime {
                pbs_transmission,
                pbs_reflection,
                propagation_transmission,
            },
        )
    }

    pub fn generic_transmission(&self) -> f64 {
        self.generic_transmission
    }

    pub fn kind(&self) -> &MultiplexerKind {
        &self.kind
    }

    /// Whether the topology only exists for power-of-two unit counts.
    pub fn requires_power_of_two(&self) -> bool {
        matches!(
            self.kind,
            MultiplexerKind::SymmetricSpatial { .. } | MultiplexerKind::BinaryBulkTime { .. }
        )
    }

    /// Rejects unit counts the topology cannot be built with.
    pub fn check_units(&self, units: u32) -> Result<()> {
        if units == 0 {
            return Err(Error::invalid("units", 0, "must be at least 1"));
        }
        if self.requires_power_of_two() && !units.is_power_of_two() {
            return Err(Error::NotPowerOfTwo {
                kind: self.kind.name(),
                units,
            });
        }
        Ok(())
    }

    /// The same topology with its characteristic lossy element replaced:
    /// router transmission for spatial, cycle transmission for loops and
    /// PBS transmission for the bulk delay network.
    pub fn with_element_transmission(&self, value: f64) -> Result<Self> {
        let kind = match self.kind {
            MultiplexerKind::SymmetricSpatial { .. } => MultiplexerKind::SymmetricSpatial {
                router_transmission: value,
            },
            MultiplexerKind::TimeChain { .. } => MultiplexerKind::TimeChain {
                cycle_transmission: value,
            },
            MultiplexerKind::TimeLoopLatest { convention, .. } => MultiplexerKind::TimeLoopLatest {
                cycle_transmission: value,
                convention,
            },
            MultiplexerKind::BinaryBulkTime {
                pbs_reflection,
                propagation_transmission,
                ..
            } => MultiplexerKind::BinaryBulkTime {
                pbs_transmission: value,
                pbs_reflection,
                propagation_transmission,
            },
        };
        Self::new(self.generic_transmission, kind)
    }
}

/// Probability that a signal photon entering at a given unit reaches the output.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct UnitTransmission(f64);

impl UnitTransmission {
    pub fn new(value: f64) -> Result<Self> {
        check_unit_interval("unit_transmission", value).map(Self)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Number of ones in the binary representation of `x`.
pub fn hamming_weight(x: u64) -> u32 {
    x.count_ones()
}

/// Total transmission `V_n` of unit `n` (1-based priority index) in a
/// multiplexer of `units` units.
pub fn unit_transmission(model: &MultiplexerModel, n: u32, units: u32) -> Result<UnitTransmission> {
    model.check_units(units)?;
    if n == 0 || n > units {
        return Err(Error::Domain(format!("unit index {n} outside 1..={units}")));
    }
    Ok(UnitTransmission(raw_transmission(model, n, units)))
}

/// `V_n` for every unit in priority order.
pub fn all_unit_transmissions(model: &MultiplexerModel, units: u32) -> Result<Vec<f64>> {
    model.check_units(units)?;
    Ok((1..=units).map(|n| raw_transmission(model, n, units)).collect())
}

fn raw_transmission(model: &MultiplexerModel, n: u32, units: u32) -> f64 {
    let vb = model.generic_transmission;
    match model.kind {
        MultiplexerKind::SymmetricSpatial { router_transmission } => {
            vb * router_transmission.powi(units.trailing_zeros() as i32)
        }
        MultiplexerKind::TimeChain { cycle_transmission } => {
            vb * cycle_transmission.powi((units - n) as i32)
        }
        MultiplexerKind::TimeLoopLatest {
            cycle_transmission,
            convention,
        } => {
            let cycles = match convention {
                LoopCycleConvention::PriorityIndex => n,
                LoopCycleConvention::PriorityIndexMinusOne => n - 1,
            };
            vb * cycle_transmission.powi(cycles as i32)
        }
        MultiplexerKind::BinaryBulkTime {
            pbs_transmission,
            pbs_reflection,
            propagation_transmission,
        } => {
            let stages = units.trailing_zeros();
            let delay = units - n;
            let reflections = hamming_weight(u64::from(delay));
            vb * pbs_reflection.powi(reflections as i32)
                * pbs_transmission.powi((stages - reflections) as i32)
                * propagation_transmission.powf(f64::from(delay) / f64::from(units))
        }
    }
}

/// Probability that `i` of `l` entering signal photons survive a channel of
/// transmission `v`.
pub fn transmit_conditional(i: u32, l: u32, v: UnitTransmission) -> Result<f64> {
    if i > l {
        return Err(Error::Domain(format!("cannot transmit {i} of {l} photons")));
    }
    Ok(binomial_pmf(i, l, v.0))
}
