//! Configuration-driven evaluation, optimization and sweeps, emitting
//! comma-separated tables with `#`-prefixed provenance lines.

pub mod config;
pub mod presets;

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::loss_models::{LoopCycleConvention, MultiplexerKind};
use crate::optimizer::{OptimizationResult, Optimizer};
use crate::output_engine::{output_distribution, SourceConfig};
use crate::simulation::simulate;

pub use config::{Axis, Command, RunSpec, Scenario};
pub use presets::{preset, PRESET_NAMES};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest Monte-Carlo deviation, in standard errors, accepted by `--mc-check`.
pub const MC_SIGMA_LIMIT: f64 = 5.0;

/// Output photon numbers compared by the Monte-Carlo check.
const MC_CHECK_I_MAX: usize = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical consistency failure: {0}")]
    Consistency(String),
}

impl RunError {
    pub fn config(field: &str, msg: impl std::fmt::Display) -> Self {
        RunError::Config(format!("`{field}`: {msg}"))
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io { .. } => 3,
            RunError::Consistency(_) => 4,
        }
    }
}

impl From<crate::Error> for RunError {
    fn from(e: crate::Error) -> Self {
        RunError::Config(e.to_string())
    }
}

/// Result of a run: the table text plus a short human summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: String,
    pub summary: String,
    /// Largest Monte-Carlo deviation seen, when the check ran.
    pub mc_max_sigma: Option<f64>,
}

impl Report {
    pub fn check_consistency(&self) -> Result<(), RunError> {
        match self.mc_max_sigma {
            Some(s) if !(s <= MC_SIGMA_LIMIT) => Err(RunError::Consistency(format!(
                "Monte-Carlo estimate deviates by {s:.2} standard errors (limit {MC_SIGMA_LIMIT})"
            ))),
            _ => Ok(()),
        }
    }
}

fn p(x: f64) -> String {
    format!("{x:.6}")
}

struct Table {
    text: String,
}

impl Table {
    fn new(spec: &RunSpec, columns: &[String]) -> Self {
        let mut text = String::new();
        let _ = writeln!(
            text,
            "# muxsps {VERSION} command={} config={}",
            spec.run.command.name(),
            spec.to_json_line()
        );
        let _ = writeln!(text, "{}", columns.join(","));
        Self { text }
    }

    fn row(&mut self, cells: Vec<String>) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
}

fn is_loop(spec: &RunSpec) -> bool {
    spec.multiplexer.kind == config::MultiplexerName::TimeLoopLatest
}

fn scenario_header(spec: &RunSpec, with_strategy: bool) -> Vec<String> {
    let mut h = Vec::new();
    if with_strategy {
        h.push("strategy".to_owned());
    }
    h.push("distribution".to_owned());
    if is_loop(spec) {
        h.push("loop_convention".to_owned());
    }
    h.push("V_D".to_owned());
    h.push(spec.multiplexer.element_column().to_owned());
    h
}

fn convention_name(c: LoopCycleConvention) -> &'static str {
    match c {
        LoopCycleConvention::PriorityIndex => "priority-index",
        LoopCycleConvention::PriorityIndexMinusOne => "priority-index-minus-one",
    }
}

fn scenario_cells(spec: &RunSpec, sc: &Scenario, with_strategy: bool) -> Vec<String> {
    let mut c = Vec::new();
    if with_strategy {
        c.push(sc.strategy_label.clone());
    }
    c.push(sc.cfg.dist.kind().to_string());
    if is_loop(spec) {
        c.push(sc.convention.map(convention_name).unwrap_or("").to_owned());
    }
    c.push(sc.detector_efficiency.to_string());
    c.push(sc.element_transmission.to_string());
    c
}

fn mc_sigma(spec: &RunSpec, cfg: &SourceConfig) -> Result<Option<f64>, RunError> {
    if spec.run.mc_samples == 0 {
        return Ok(None);
    }
    let exact = output_distribution(cfg)?;
    let est = simulate(cfg, spec.run.mc_samples, spec.run.seed)?;
    let i_limit = MC_CHECK_I_MAX.min(cfg.i_max as usize);
    Ok(Some(est.max_sigma_deviation(&exact, i_limit)))
}

fn fold_sigma(acc: Option<f64>, s: Option<f64>) -> Option<f64> {
    match (acc, s) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    }
}

struct Progress {
    done: AtomicUsize,
    total: usize,
    label: &'static str,
}

impl Progress {
    fn new(label: &'static str, total: usize) -> Self {
        Self {
            done: AtomicUsize::new(0),
            total,
            label,
        }
    }

    fn tick(&self) {
        let done = self.done.fetch_add(1, Ordering::Relaxed) + 1;
        let step = (self.total / 20).max(1);
        if self.total > 1 && (done.is_multiple_of(step) || done == self.total) {
            eprintln!("{}: {done}/{}", self.label, self.total);
        }
    }
}

/// Executes `spec` and renders its table.
pub fn run(spec: &RunSpec) -> Result<Report, RunError> {
    spec.validate()?;
    let optimizer = Optimizer::new(spec.optimizer.settings()?)?;
    match spec.run.command {
        Command::Evaluate => evaluate(spec),
        Command::Optimize => optimize(spec, &optimizer, true),
        Command::Table => optimize(spec, &optimizer, false),
        Command::StrategyScan => strategy_scan(spec, &optimizer),
        Command::Map => map(spec, &optimizer),
    }
}

fn evaluate(spec: &RunSpec) -> Result<Report, RunError> {
    let lambdas = spec.lambda_axis()?;
    let i_max = spec.source.i_max;
    let mut header = scenario_header(spec, true);
    header.extend(["N".to_owned(), "lambda".to_owned()]);
    header.extend((0..=i_max).map(|i| format!("P_{i}")));
    header.push("truncation_deficit".to_owned());
    if spec.run.mc_samples > 0 {
        header.push("mc_max_sigma".to_owned());
    }
    let mut table = Table::new(spec, &header);

    let jobs: Vec<(Scenario, f64)> = spec
        .scenarios()?
        .into_iter()
        .flat_map(|sc| lambdas.iter().map(move |&lam| (sc.clone(), lam)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|(sc, lam)| {
            let cfg = sc.cfg.with_mean(*lam)?;
            let out = output_distribution(&cfg)?;
            let sigma = mc_sigma(spec, &cfg)?;
            Ok((out, sigma))
        })
        .collect::<Result<Vec<_>, RunError>>()?;

    let mut summary = String::new();
    let mut worst = None;
    for ((sc, lam), (out, sigma)) in jobs.iter().zip(&rows) {
        let mut cells = scenario_cells(spec, sc, true);
        cells.push(sc.cfg.units.to_string());
        cells.push(lam.to_string());
        cells.extend(out.probabilities.iter().map(|&x| p(x)));
        cells.push(format!("{:.3e}", out.truncation_deficit));
        if let Some(s) = sigma {
            cells.push(format!("{s:.3}"));
        }
        table.row(cells);
        worst = fold_sigma(worst, *sigma);
    }
    if let [(out, _)] = rows.as_slice() {
        for (i, x) in out.probabilities.iter().enumerate() {
            let _ = writeln!(summary, "i={i} → {x:?}");
        }
    } else {
        let _ = writeln!(summary, "evaluated {} configurations", rows.len());
    }
    if let Some(s) = worst {
        let _ = writeln!(summary, "Monte-Carlo max deviation: {s:.3} sigma");
    }
    Ok(Report {
        table: table.text,
        summary,
        mc_max_sigma: worst,
    })
}

fn optimize(spec: &RunSpec, optimizer: &Optimizer, per_n: bool) -> Result<Report, RunError> {
    let scenarios = spec.scenarios()?;
    let candidates = spec.optimizer.candidates();
    let progress = Progress::new("optimize", scenarios.len());
    let results = scenarios
        .par_iter()
        .map(|sc| {
            let candidates = match sc.cfg.mux.kind() {
                MultiplexerKind::TimeLoopLatest { .. } => vec![sc.cfg.units],
                _ => candidates.clone(),
            };
            let r = optimizer.optimize_units(&sc.cfg, &candidates)?;
            let at_opt = sc.cfg.with_units(r.n_opt)?.with_mean(r.lambda_opt)?;
            let sigma = mc_sigma(spec, &at_opt)?;
            progress.tick();
            Ok((r, sigma))
        })
        .collect::<Result<Vec<(OptimizationResult, Option<f64>)>, RunError>>()?;

    let mut header = scenario_header(spec, true);
    if per_n {
        header.extend(["N", "lambda_opt_at_N", "P_1_at_N"].map(str::to_owned));
    }
    header.extend(["N_opt", "P_1_max", "lambda_opt", "P_0", "P_2"].map(str::to_owned));
    if spec.run.mc_samples > 0 {
        header.push("mc_max_sigma".to_owned());
    }
    let mut table = Table::new(spec, &header);
    let mut summary = String::new();
    let mut worst = None;
    for (sc, (r, sigma)) in scenarios.iter().zip(&results) {
        let tail = |cells: &mut Vec<String>| {
            cells.push(r.n_opt.to_string());
            cells.push(p(r.p1_max));
            cells.push(p(r.lambda_opt));
            cells.push(p(r.output_at_optimum.get(0)));
            cells.push(p(r.output_at_optimum.get(2)));
            if let Some(s) = sigma {
                cells.push(format!("{s:.3}"));
            }
        };
        if per_n {
            for point in &r.per_n_curve {
                let mut cells = scenario_cells(spec, sc, true);
                cells.push(point.units.to_string());
                cells.push(p(point.lambda_opt));
                cells.push(p(point.p1));
                tail(&mut cells);
                table.row(cells);
            }
        } else {
            let mut cells = scenario_cells(spec, sc, true);
            tail(&mut cells);
            table.row(cells);
        }
        worst = fold_sigma(worst, *sigma);
        if scenarios.len() == 1 {
            let _ = writeln!(
                summary,
                "N_opt = {}, P_1,max = {:.6}, lambda_opt = {:.6}",
                r.n_opt, r.p1_max, r.lambda_opt
            );
        }
    }
    if scenarios.len() > 1 {
        let _ = writeln!(summary, "optimized {} scenarios", scenarios.len());
    }
    if let Some(s) = worst {
        let _ = writeln!(summary, "Monte-Carlo max deviation: {s:.3} sigma");
    }
    Ok(Report {
        table: table.text,
        summary,
        mc_max_sigma: worst,
    })
}

fn strategy_scan(spec: &RunSpec, optimizer: &Optimizer) -> Result<Report, RunError> {
    // the scan supplies its own strategies, so collapse the strategy axis
    let mut scenarios = spec.scenarios()?;
    scenarios.dedup_by(|a, b| {
        a.cfg.dist == b.cfg.dist
            && a.convention == b.convention
            && a.detector_efficiency == b.detector_efficiency
            && a.element_transmission == b.element_transmission
            && a.cfg.units == b.cfg.units
    });
    let candidates = spec.optimizer.candidates();
    let j_max = spec.optimizer.j_max;
    let progress = Progress::new("strategy-scan", scenarios.len());
    let scans = scenarios
        .par_iter()
        .map(|sc| {
            let candidates = match sc.cfg.mux.kind() {
                MultiplexerKind::TimeLoopLatest { .. } => vec![sc.cfg.units],
                _ => candidates.clone(),
            };
            let r = optimizer.optimize_strategy(&sc.cfg, j_max, &candidates)?;
            progress.tick();
            Ok(r)
        })
        .collect::<Result<Vec<_>, RunError>>()?;

    let mut header = scenario_header(spec, false);
    header.extend(["J", "N_opt", "P_1_max", "lambda_opt", "J_opt"].map(str::to_owned));
    let mut table = Table::new(spec, &header);
    for (sc, scan) in scenarios.iter().zip(&scans) {
        for (j, r) in &scan.results_by_j {
            let mut cells = scenario_cells(spec, sc, false);
            cells.push(j.to_string());
            cells.push(r.n_opt.to_string());
            cells.push(p(r.p1_max));
            cells.push(p(r.lambda_opt));
            cells.push(scan.j_opt.to_string());
            table.row(cells);
        }
    }
    let summary = match scans.as_slice() {
        [scan] => format!("J_opt = {}, P_1,max = {:.6}\n", scan.j_opt, scan.best().p1_max),
        _ => format!("scanned {} scenarios\n", scans.len()),
    };
    Ok(Report {
        table: table.text,
        summary,
        mc_max_sigma: None,
    })
}

fn map(spec: &RunSpec, optimizer: &Optimizer) -> Result<Report, RunError> {
    if spec.run.mc_samples > 0 {
        return Err(RunError::config("run.mc_samples", "the Monte-Carlo check is not available for maps"));
    }
    let template = spec.base_config()?;
    let vds = spec.detector_axis()?;
    let elements = spec.element_axis()?;
    let progress = Progress::new("map", vds.len() * elements.len());
    let m = optimizer.comparison_map_with_progress(
        &template,
        &vds,
        &elements,
        spec.optimizer.j_max,
        &spec.optimizer.candidates(),
        &|| progress.tick(),
    )?;

    let element = spec.multiplexer.element_column();
    let header: Vec<String> = [
        "V_D",
        element,
        "N_opt_spd",
        "P_1_max_spd",
        "N_opt_th",
        "P_1_max_th",
        "delta_P",
        "delta_m",
        "J_opt",
        "P_1_max_Jopt",
        "delta_P_Jopt",
    ]
    .map(str::to_owned)
    .to_vec();
    let mut table = Table::new(spec, &header);
    for (a, vd) in m.axis_vd.iter().enumerate() {
        for (b, vr) in m.axis_vr.iter().enumerate() {
            table.row(vec![
                vd.to_string(),
                vr.to_string(),
                m.n_opt_spd[a][b].to_string(),
                p(m.p1_spd[a][b]),
                m.n_opt_threshold[a][b].to_string(),
                p(m.p1_threshold[a][b]),
                p(m.delta_p[a][b]),
                m.delta_m[a][b].to_string(),
                m.j_opt[a][b].to_string(),
                p(m.p1_jopt[a][b]),
                p(m.delta_p_jopt[a][b]),
            ]);
        }
    }
    let summary = format!("mapped {} cells\n", vds.len() * elements.len());
    Ok(Report {
        table: table.text,
        summary,
        mc_max_sigma: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_zero_mean_reports_vacuum() {
        let mut spec = RunSpec::default();
        spec.source.mean = 0.0;
        let r = run(&spec).unwrap();
        assert!(r.summary.starts_with("i=0 → 1.0\n"), "{}", r.summary);
        let lines: Vec<&str> = r.table.lines().collect();
        assert!(lines[0].starts_with("# muxsps "));
        assert!(lines[1].starts_with("strategy,distribution,V_D,V_r,N,lambda,P_0,P_1"));
        assert!(lines[2].contains(",1.000000,0.000000,"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::Config(String::new()).exit_code(), 2);
        let io = RunError::Io {
            path: "x".into(),
            source: std::io::Error::other("boom"),
        };
        assert_eq!(io.exit_code(), 3);
        assert_eq!(RunError::Consistency(String::new()).exit_code(), 4);
    }

    #[test]
    fn consistency_gate() {
        let mut r = Report {
            table: String::new(),
            summary: String::new(),
            mc_max_sigma: Some(1.0),
        };
        assert!(r.check_consistency().is_ok());
        r.mc_max_sigma = Some(9.0);
        assert_eq!(r.check_consistency().unwrap_err().exit_code(), 4);
        r.mc_max_sigma = Some(f64::NAN);
        assert!(r.check_consistency().is_err());
    }

    #[test]
    fn map_refuses_mc_check() {
        let mut spec = preset("fig4-7-maps").unwrap();
        spec.sweep.detector_efficiency = Some(Axis::Values(vec![0.9]));
        spec.sweep.element_transmission = Some(Axis::Values(vec![0.9]));
        spec.run.mc_samples = 10;
        assert_eq!(run(&spec).unwrap_err().exit_code(), 2);
    }
}
