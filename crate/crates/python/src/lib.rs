use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use muxsps_core::loss_models::LoopCycleConvention;
use muxsps_core::optimizer::{OptimizationResult, Optimizer, OptimizerSettings};
use muxsps_core::report::config::{MultiplexerName, MultiplexerSection, StrategySection};
use muxsps_core::{
    output_engine, DetectorModel, HeraldingStrategy, PairDistribution, PairStatistics,
};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_distribution(name: &str) -> PyResult<PairStatistics> {
    match name {
        "poissonian" => Ok(PairStatistics::Poissonian),
        "thermal" => Ok(PairStatistics::Thermal),
        other => Err(value_error(format!("unknown distribution `{other}`"))),
    }
}

fn parse_multiplexer(name: &str) -> PyResult<MultiplexerName> {
    match name {
        "symmetric-spatial" => Ok(MultiplexerName::SymmetricSpatial),
        "time-chain" => Ok(MultiplexerName::TimeChain),
        "time-loop-latest" => Ok(MultiplexerName::TimeLoopLatest),
        "binary-bulk-time" => Ok(MultiplexerName::BinaryBulkTime),
        other => Err(value_error(format!("unknown multiplexer `{other}`"))),
    }
}

fn parse_convention(name: &str) -> PyResult<LoopCycleConvention> {
    match name {
        "priority-index" => Ok(LoopCycleConvention::PriorityIndex),
        "priority-index-minus-one" => Ok(LoopCycleConvention::PriorityIndexMinusOne),
        other => Err(value_error(format!("unknown loop convention `{other}`"))),
    }
}

/// Strategy from `"threshold"`, `"spd"`, `"up-to-J"` or a list of accepted counts.
fn parse_strategy(obj: &Bound<'_, PyAny>) -> PyResult<HeraldingStrategy> {
    let section = if let Ok(label) = obj.extract::<String>() {
        StrategySection {
            kind: label,
            accepted: None,
        }
    } else {
        StrategySection {
            kind: "set".to_owned(),
            accepted: Some(obj.extract::<Vec<u32>>()?),
        }
    };
    section.resolve().map_err(value_error)
}

/// A fully specified multiplexed source. The router transmission of the
/// spatial multiplexer defaults to 0.98.
#[pyclass(frozen, skip_from_py_object, name = "SourceConfig")]
#[derive(Clone)]
struct PySourceConfig {
    inner: output_engine::SourceConfig,
}

#[pymethods]
impl PySourceConfig {
    #[new]
    #[pyo3(signature = (
        mean = 0.45,
        distribution = "poissonian",
        detector_efficiency = 0.95,
        strategy = None,
        multiplexer = "symmetric-spatial",
        units = 16,
        generic_transmission = 1.0,
        router_transmission = None,
        cycle_transmission = None,
        loop_convention = None,
        pbs_transmission = None,
        pbs_reflection = None,
        propagation_transmission = None,
        resolution_cap = 10,
        tail_tol = 1e-12,
        i_max = 8,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        mean: f64,
        distribution: &str,
        detector_efficiency: f64,
        strategy: Option<&Bound<'_, PyAny>>,
        multiplexer: &str,
        units: u32,
        generic_transmission: f64,
        router_transmission: Option<f64>,
        cycle_transmission: Option<f64>,
        loop_convention: Option<&str>,
        pbs_transmission: Option<f64>,
        pbs_reflection: Option<f64>,
        propagation_transmission: Option<f64>,
        resolution_cap: u32,
        tail_tol: f64,
        i_max: u32,
    ) -> PyResult<Self> {
        let strategy = match strategy {
            Some(s) => parse_strategy(s)?,
            None => HeraldingStrategy::single(),
        };
        let kind = parse_multiplexer(multiplexer)?;
        let defaults = MultiplexerSection::default();
        let router_transmission = match kind {
            MultiplexerName::SymmetricSpatial => router_transmission.or(defaults.router_transmission),
            _ => router_transmission,
        };
        let mux = MultiplexerSection {
            kind,
            generic_transmission,
            router_transmission,
            cycle_transmission,
            loop_convention: loop_convention.map(parse_convention).transpose()?,
            pbs_transmission,
            pbs_reflection,
            propagation_transmission,
            units,
        }
        .resolve()
        .map_err(value_error)?;
        let mut inner = output_engine::SourceConfig::new(
            PairDistribution::new(parse_distribution(distribution)?, mean).map_err(value_error)?,
            DetectorModel::new(detector_efficiency, resolution_cap).map_err(value_error)?,
            strategy,
            mux,
            units,
        )
        .map_err(value_error)?;
        inner.tail_tol = tail_tol;
        inner.i_max = i_max;
        inner.validate().map_err(value_error)?;
        Ok(Self { inner })
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.inner.dist.mean()
    }

    #[getter]
    fn units(&self) -> u32 {
        self.inner.units
    }

    #[getter]
    fn strategy(&self) -> String {
        self.inner.strategy.label()
    }

    fn with_mean(&self, mean: f64) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_mean(mean).map_err(value_error)?,
        })
    }

    fn with_units(&self, units: u32) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.with_units(units).map_err(value_error)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "SourceConfig(mean={}, distribution='{}', detector_efficiency={}, strategy='{}', multiplexer='{}', units={})",
            self.inner.dist.mean(),
            self.inner.dist.kind(),
            self.inner.detector.efficiency(),
            self.inner.strategy.label(),
            self.inner.mux.kind().name(),
            self.inner.units
        )
    }
}

/// Output photon-number probabilities `[P_0, ..., P_imax]`.
#[pyfunction]
fn output_distribution(cfg: &PySourceConfig) -> PyResult<Vec<f64>> {
    Ok(output_engine::output_distribution(&cfg.inner)
        .map_err(value_error)?
        .probabilities)
}

#[pyfunction]
fn single_photon_probability(cfg: &PySourceConfig) -> PyResult<f64> {
    output_engine::single_photon_probability(&cfg.inner).map_err(value_error)
}

#[pyfunction]
fn p1_threshold_closed_form(cfg: &PySourceConfig) -> PyResult<f64> {
    output_engine::p1_threshold_closed_form(&cfg.inner).map_err(value_error)
}

#[pyfunction]
fn p1_spd_closed_form(cfg: &PySourceConfig) -> PyResult<f64> {
    output_engine::p1_spd_closed_form(&cfg.inner).map_err(value_error)
}

/// Monte-Carlo histogram; returns `{"counts", "p_hat", "std_err", "samples"}`.
#[pyfunction]
#[pyo3(signature = (cfg, samples, seed = 1))]
fn simulate<'py>(py: Python<'py>, cfg: &PySourceConfig, samples: u64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let est = py
        .detach(|| muxsps_core::simulate(&cfg.inner, samples, seed))
        .map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("counts", est.counts)?;
    d.set_item("p_hat", est.p_hat)?;
    d.set_item("std_err", est.std_err)?;
    d.set_item("samples", est.samples)?;
    Ok(d)
}

/// `(lambda_opt, P_1)` for a fixed unit count.
#[pyfunction]
fn maximize_over_lambda(py: Python<'_>, cfg: &PySourceConfig, units: u32) -> PyResult<(f64, f64)> {
    py.detach(|| Optimizer::default().maximize_over_lambda(&cfg.inner, units))
        .map_err(value_error)
}

fn result_dict<'py>(py: Python<'py>, r: &OptimizationResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("n_opt", r.n_opt)?;
    d.set_item("lambda_opt", r.lambda_opt)?;
    d.set_item("p1_max", r.p1_max)?;
    d.set_item("strategy", r.strategy_used.label())?;
    d.set_item("output_at_optimum", r.output_at_optimum.probabilities.clone())?;
    let curve: Vec<(u32, f64, f64)> = r.per_n_curve.iter().map(|u| (u.units, u.lambda_opt, u.p1)).collect();
    d.set_item("per_n_curve", curve)?;
    Ok(d)
}

fn optimizer(lambda_tol: Option<f64>) -> PyResult<Optimizer> {
    let mut settings = OptimizerSettings::default();
    if let Some(tol) = lambda_tol {
        settings.lambda_tol = tol;
    }
    Optimizer::new(settings).map_err(value_error)
}

/// Best unit count and mean pair number; an empty candidate list scans the defaults.
#[pyfunction]
#[pyo3(signature = (cfg, candidates = None, lambda_tol = None))]
fn optimize_units<'py>(
    py: Python<'py>,
    cfg: &PySourceConfig,
    candidates: Option<Vec<u32>>,
    lambda_tol: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let opt = optimizer(lambda_tol)?;
    let candidates = candidates.unwrap_or_default();
    let r = py
        .detach(|| opt.optimize_units(&cfg.inner, &candidates))
        .map_err(value_error)?;
    result_dict(py, &r)
}

/// Scans `S = {1..J}` for `J = 1..=j_max`.
#[pyfunction]
#[pyo3(signature = (cfg, j_max = 4, candidates = None))]
fn optimize_strategy<'py>(
    py: Python<'py>,
    cfg: &PySourceConfig,
    j_max: u32,
    candidates: Option<Vec<u32>>,
) -> PyResult<Bound<'py, PyDict>> {
    let candidates = candidates.unwrap_or_default();
    let scan = py
        .detach(|| Optimizer::default().optimize_strategy(&cfg.inner, j_max, &candidates))
        .map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("j_opt", scan.j_opt)?;
    let by_j = PyDict::new(py);
    for (j, r) in &scan.results_by_j {
        by_j.set_item(j, result_dict(py, r)?)?;
    }
    d.set_item("results_by_j", by_j)?;
    Ok(d)
}

#[pymodule]
fn muxsps(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PySourceConfig>()?;
    m.add_function(wrap_pyfunction!(output_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(single_photon_probability, m)?)?;
    m.add_function(wrap_pyfunction!(p1_threshold_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(p1_spd_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(maximize_over_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_units, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_strategy, m)?)?;
    Ok(())
}
