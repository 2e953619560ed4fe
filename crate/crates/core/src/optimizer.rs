//! Maximization of the single-photon probability over the mean pair number,
//! the number of multiplexed units and the heralding strategy.
//!
//! For each candidate unit count the mean pair number is located by a coarse
//! log-plus-linear grid and refined by golden-section search. The unit count
//! is chosen by exhaustive comparison of the per-count maxima, ties going to
//! the smaller count. Every evaluation is independent, so candidate counts and
//! map cells run in parallel without affecting the result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_models::MultiplexerKind;
use crate::output_engine::{output_distribution, single_photon_probability, OutputDistribution, SourceConfig};
use crate::photon_statistics::{DetectorModel, HeraldingStrategy};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub grid_points: usize,
    pub lambda_tol: f64,
    /// Largest power-of-two exponent scanned for power-of-two topologies.
    pub max_log2_units: u32,
    /// Largest unit count scanned for the time chain.
    pub chain_units_cap: u32,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            lambda_min: 1e-4,
            lambda_max: 20.0,
            grid_points: 200,
            lambda_tol: 1e-4,
            max_log2_units: 10,
            chain_units_cap: 128,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min > 0.0 && self.lambda_min < self.lambda_max && self.lambda_max.is_finite()) {
            return Err(Error::invalid(
                "optimizer.lambda_min",
                self.lambda_min,
                "need 0 < lambda_min < lambda_max < inf",
            ));
        }
        if self.grid_points < 4 {
            return Err(Error::invalid("optimizer.grid_points", self.grid_points, "must be at least 4"));
        }
        if !(self.lambda_tol > 0.0) {
            return Err(Error::invalid("optimizer.lambda_tol", self.lambda_tol, "must be positive"));
        }
        if self.max_log2_units > 20 {
            return Err(Error::invalid("optimizer.max_log2_units", self.max_log2_units, "must be at most 20"));
        }
        if self.chain_units_cap == 0 {
            return Err(Error::invalid("optimizer.chain_units_cap", 0, "must be at least 1"));
        }
        Ok(())
    }

    /// Half logarithmically, half linearly spaced mean pair numbers.
    pub fn lambda_grid(&self) -> Vec<f64> {
        let half = self.grid_points / 2;
        let (lo, hi) = (self.lambda_min, self.lambda_max);
        let ratio = (hi / lo).ln();
        let mut grid: Vec<f64> = (0..half)
            .map(|k| lo * (ratio * k as f64 / (half - 1) as f64).exp())
            .chain((0..self.grid_points - half).map(|k| {
                lo + (hi - lo) * k as f64 / (self.grid_points - half - 1) as f64
            }))
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }

    /// Unit counts scanned when the caller does not supply any.
    pub fn default_candidates(&self, cfg: &SourceConfig) -> Vec<u32> {
        match cfg.mux.kind() {
            MultiplexerKind::SymmetricSpatial { .. } | MultiplexerKind::BinaryBulkTime { .. } => {
                (0..=self.max_log2_units).map(|k| 1u32 << k).collect()
            }
            MultiplexerKind::TimeChain { .. } => (1..=self.chain_units_cap).collect(),
            // P_1 saturates in N, so the unit count is an input here.
            MultiplexerKind::TimeLoopLatest { .. } => vec![cfg.units],
        }
    }
}

/// Optimum of one unit count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitsOptimum {
    pub units: u32,
    pub lambda_opt: f64,
    pub p1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub n_opt: u32,
    pub lambda_opt: f64,
    pub p1_max: f64,
    pub strategy_used: HeraldingStrategy,
    pub output_at_optimum: OutputDistribution,
    pub per_n_curve: Vec<UnitsOptimum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyScanResult {
    pub j_opt: u32,
    pub results_by_j: Vec<(u32, OptimizationResult)>,
}

impl StrategyScanResult {
    pub fn best(&self) -> &OptimizationResult {
        &self
            .results_by_j
            .iter()
            .find(|(j, _)| *j == self.j_opt)
            .expect("j_opt is one of the scanned values")
            .1
    }
}

/// Detector-efficiency by element-transmission comparison of threshold,
/// single-photon and optimized-strategy operation. Matrices are indexed
/// `[vd_index][vr_index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonMap {
    pub axis_vd: Vec<f64>,
    pub axis_vr: Vec<f64>,
    pub p1_spd: Vec<Vec<f64>>,
    pub p1_threshold: Vec<Vec<f64>>,
    pub n_opt_spd: Vec<Vec<u32>>,
    pub n_opt_threshold: Vec<Vec<u32>>,
    pub delta_p: Vec<Vec<f64>>,
    pub delta_m: Vec<Vec<i32>>,
    pub j_opt: Vec<Vec<u32>>,
    pub p1_jopt: Vec<Vec<f64>>,
    pub delta_p_jopt: Vec<Vec<f64>>,
}

/// Quantities of one map cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellComparison {
    pub spd: OptimizationResult,
    pub threshold: OptimizationResult,
    pub scan: StrategyScanResult,
}

impl CellComparison {
    pub fn delta_p(&self) -> f64 {
        self.spd.p1_max - self.threshold.p1_max
    }

    /// Difference in router levels, `log2 N_th - log2 N_spd`.
    pub fn delta_m(&self) -> i32 {
        self.threshold.n_opt.ilog2() as i32 - self.spd.n_opt.ilog2() as i32
    }

    pub fn delta_p_jopt(&self) -> f64 {
        self.scan.best().p1_max - self.spd.p1_max.max(self.threshold.p1_max)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Optimizer {
    settings: OptimizerSettings,
}

impl Optimizer {
    pub fn new(settings: OptimizerSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self { settings })
    }

    pub fn settings(&self) -> &OptimizerSettings {
        &self.settings
    }

    /// `(lambda_opt, P_1)` at a fixed unit count.
    pub fn maximize_over_lambda(&self, template: &SourceConfig, units: u32) -> Result<(f64, f64)> {
        let base = template.with_units(units)?;
        let p1 = |lam: f64| -> Result<f64> { single_photon_probability(&base.with_mean(lam)?) };

        let grid = self.settings.lambda_grid();
        let mut values = Vec::with_capacity(grid.len());
        for &lam in &grid {
            values.push(p1(lam)?);
        }
        // first maximum wins so that flat regions resolve to the smaller mean
        let best = values
            .iter()
            .enumerate()
            .fold(0, |best, (k, &v)| if v > values[best] { k } else { best });
        let mut lo = grid[best.saturating_sub(1)];
        let mut hi = grid[(best + 1).min(grid.len() - 1)];

        let mut x1 = hi - INV_PHI * (hi - lo);
        let mut x2 = lo + INV_PHI * (hi - lo);
        let mut f1 = p1(x1)?;
        let mut f2 = p1(x2)?;
        while hi - lo > self.settings.lambda_tol {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - INV_PHI * (hi - lo);
                f1 = p1(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + INV_PHI * (hi - lo);
                f2 = p1(x2)?;
            }
        }
        let mid = 0.5 * (lo + hi);
        let refined = p1(mid)?;
        Ok([(grid[best], values[best]), (x1, f1), (x2, f2), (mid, refined)]
            .into_iter()
            .fold((grid[best], values[best]), |acc, c| if c.1 > acc.1 { c } else { acc }))
    }

    /// Optimum over the given unit counts (the defaults when empty).
    pub fn optimize_units(&self, template: &SourceConfig, candidates: &[u32]) -> Result<OptimizationResult> {
        let mut candidates = if candidates.is_empty() {
            self.settings.default_candidates(template)
        } else {
            candidates.to_vec()
        };
        candidates.sort_unstable();
        candidates.dedup();
        for &n in &candidates {
            template.mux.check_units(n)?;
        }

        let curve: Vec<UnitsOptimum> = candidates
            .par_iter()
            .map(|&units| {
                self.maximize_over_lambda(template, units)
                    .map(|(lambda_opt, p1)| UnitsOptimum { units, lambda_opt, p1 })
            })
            .collect::<Result<_>>()?;

        let best = curve
            .iter()
            .fold(curve[0], |best, c| if c.p1 > best.p1 { *c } else { best });
        let at_opt = template.with_units(best.units)?.with_mean(best.lambda_opt)?;
        Ok(OptimizationResult {
            n_opt: best.units,
            lambda_opt: best.lambda_opt,
            p1_max: best.p1,
            strategy_used: template.strategy.clone(),
            output_at_optimum: output_distribution(&at_opt)?,
            per_n_curve: curve,
        })
    }

    /// Scans `S = {1..J}` for `J = 1..=j_max`.
    pub fn optimize_strategy(
        &self,
        template: &SourceConfig,
        j_max: u32,
        candidates: &[u32],
    ) -> Result<StrategyScanResult> {
        if j_max == 0 || j_max > template.detector.resolution_cap() {
            return Err(Error::invalid(
                "optimizer.j_max",
                j_max,
                "must lie in 1..=detector.resolution_cap",
            ));
        }
        let results_by_j: Vec<(u32, OptimizationResult)> = (1..=j_max)
            .into_par_iter()
            .map(|j| {
                let cfg = template.with_strategy(HeraldingStrategy::up_to(j)?)?;
                Ok((j, self.optimize_units(&cfg, candidates)?))
            })
            .collect::<Result<_>>()?;
        let mut j_opt = 1;
        let mut best = f64::NEG_INFINITY;
        for (j, r) in &results_by_j {
            if r.p1_max > best {
                best = r.p1_max;
                j_opt = *j;
            }
        }
        Ok(StrategyScanResult { j_opt, results_by_j })
    }

    /// Threshold, single-photon and strategy-scan optima of one cell.
    pub fn compare_cell(
        &self,
        template: &SourceConfig,
        vd: f64,
        element_transmission: f64,
        j_max: u32,
        candidates: &[u32],
    ) -> Result<CellComparison> {
        let cfg = SourceConfig {
            detector: DetectorModel::new(vd, template.detector.resolution_cap())?,
            mux: template.mux.with_element_transmission(element_transmission)?,
            ..template.clone()
        };
        let threshold = self.optimize_units(&cfg.with_strategy(HeraldingStrategy::ThresholdAll)?, candidates)?;
        let scan = self.optimize_strategy(&cfg, j_max, candidates)?;
        let spd = scan.results_by_j[0].1.clone();
        Ok(CellComparison { spd, threshold, scan })
    }

    pub fn comparison_map(
        &self,
        template: &SourceConfig,
        grid_vd: &[f64],
        grid_vr: &[f64],
        j_max: u32,
        candidates: &[u32],
    ) -> Result<ComparisonMap> {
        self.comparison_map_with_progress(template, grid_vd, grid_vr, j_max, candidates, &|| {})
    }

    /// [`Self::comparison_map`] calling `on_cell` after each finished cell.
    pub fn comparison_map_with_progress(
        &self,
        template: &SourceConfig,
        grid_vd: &[f64],
        grid_vr: &[f64],
        j_max: u32,
        candidates: &[u32],
        on_cell: &(dyn Fn() + Sync),
    ) -> Result<ComparisonMap> {
        check_axis("sweep.detector_efficiency", grid_vd)?;
        check_axis("sweep.element_transmission", grid_vr)?;
        let cells: Vec<CellComparison> = (0..grid_vd.len() * grid_vr.len())
            .into_par_iter()
            .map(|idx| {
                let (a, b) = (idx / grid_vr.len(), idx % grid_vr.len());
                let cell = self.compare_cell(template, grid_vd[a], grid_vr[b], j_max, candidates);
                on_cell();
                cell
            })
            .collect::<Result<_>>()?;

        let width = grid_vr.len();
        Ok(ComparisonMap {
            axis_vd: grid_vd.to_vec(),
            axis_vr: grid_vr.to_vec(),
            p1_spd: matrix(&cells, width, |c| c.spd.p1_max),
            p1_threshold: matrix(&cells, width, |c| c.threshold.p1_max),
            n_opt_spd: matrix(&cells, width, |c| c.spd.n_opt),
            n_opt_threshold: matrix(&cells, width, |c| c.threshold.n_opt),
            delta_p: matrix(&cells, width, CellComparison::delta_p),
            delta_m: matrix(&cells, width, CellComparison::delta_m),
            j_opt: matrix(&cells, width, |c| c.scan.j_opt),
            p1_jopt: matrix(&cells, width, |c| c.scan.best().p1_max),
            delta_p_jopt: matrix(&cells, width, CellComparison::delta_p_jopt),
        })
    }
}

fn matrix<T>(cells: &[CellComparison], width: usize, f: impl Fn(&CellComparison) -> T) -> Vec<Vec<T>> {
    cells.chunks(width).map(|row| row.iter().map(&f).collect()).collect()
}

fn check_axis(field: &'static str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::invalid(field, "[]", "must not be empty"));
    }
    if axis.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid(field, format!("{axis:?}"), "values must lie in [0, 1]"));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(field, format!("{axis:?}"), "must be strictly increasing"));
    }
    Ok(())
}

pub fn maximize_over_lambda(template: &SourceConfig, units: u32) -> Result<(f64, f64)> {
    Optimizer::default().maximize_over_lambda(template, units)
}

pub fn optimize_units(template: &SourceConfig, candidates: &[u32]) -> Result<OptimizationResult> {
    Optimizer::default().optimize_units(template, candidates)
}

pub fn optimize_strategy(template: &SourceConfig, j_max: u32, candidates: &[u32]) -> Result<StrategyScanResult> {
    Optimizer::default().optimize_strategy(template, j_max, candidates)
}

pub fn comparison_map(
    template: &SourceConfig,
    grid_vd: &[f64],
    grid_vr: &[f64],
    j_max: u32,
    candidates: &[u32],
) -> Result<ComparisonMap> {
    Optimizer::default().comparison_map(template, grid_vd, grid_vr, j_max, candidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss_models::MultiplexerModel;
    use crate::photon_statistics::PairDistribution;

    fn ssm(vd: f64, vr: f64, strategy: HeraldingStrategy) -> SourceConfig {
        SourceConfig::new(
            PairDistribution::poissonian(0.1).unwrap(),
            DetectorModel::with_efficiency(vd).unwrap(),
            strategy,
            MultiplexerModel::symmetric_spatial(1.0, vr).unwrap(),
            1,
        )
        .unwrap()
    }

    #[test]
    fn lossless_single_source_peaks_at_one() {
        let (lam, p1) = maximize_over_lambda(&ssm(1.0, 1.0, HeraldingStrategy::single()), 1).unwrap();
        assert!((lam - 1.0).abs() < 1e-4, "{lam}");
        assert!((p1 - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn lambda_grid_shape() {
        let s = OptimizerSettings::default();
        let g = s.lambda_grid();
        assert!(g.len() >= 190 && g.len() <= 200);
        assert_eq!(g[0], 1e-4);
        assert!((g[g.len() - 1] - 20.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn refined_lambda_is_a_local_maximum() {
        let cfg = ssm(0.9, 0.9, HeraldingStrategy::single());
        let (lam, p1) = maximize_over_lambda(&cfg, 8).unwrap();
        for d in [-1e-3, 1e-3] {
            let q = single_photon_probability(&cfg.with_units(8).unwrap().with_mean(lam + d).unwrap()).unwrap();
            assert!(p1 - q >= -1e-9);
        }
    }

    #[test]
    fn candidates_follow_topology() {
        let s = OptimizerSettings::default();
        let c = ssm(0.9, 0.9, HeraldingStrategy::single());
        assert_eq!(s.default_candidates(&c).len(), 11);
        let mut loop_cfg = c.clone();
        loop_cfg.mux = MultiplexerModel::time_loop_latest(0.88, 0.988).unwrap();
        loop_cfg.units = 40;
        assert_eq!(s.default_candidates(&loop_cfg), vec![40]);
        let mut chain = c;
        chain.mux = MultiplexerModel::time_chain(1.0, 0.99).unwrap();
        assert_eq!(s.default_candidates(&chain).len(), 128);
    }

    #[test]
    fn optimize_units_picks_best_and_smallest_on_ties() {
        // lossless routers and detector: every N gains, so the top candidate wins
        let r = optimize_units(&ssm(1.0, 1.0, HeraldingStrategy::single()), &[1, 2, 4]).unwrap();
        assert_eq!(r.n_opt, 4);
        assert_eq!(r.per_n_curve.len(), 3);
        let max = r.per_n_curve.iter().map(|c| c.p1).fold(f64::MIN, f64::max);
        assert_eq!(r.p1_max, max);
        assert!((r.output_at_optimum.p1() - r.p1_max).abs() < 1e-12);

        // fully lossy routers: N >= 2 delivers nothing, N = 1 wins
        let r = optimize_units(&ssm(0.9, 0.0, HeraldingStrategy::single()), &[4, 1, 2]).unwrap();
        assert_eq!(r.n_opt, 1);
    }

    #[test]
    fn strategy_scan_validates_j_max() {
        let c = ssm(0.9, 0.9, HeraldingStrategy::single());
        assert!(optimize_strategy(&c, 0, &[1]).is_err());
        assert!(optimize_strategy(&c, 11, &[1]).is_err());
    }

    #[test]
    fn lossless_routers_prefer_single_photon_heralding() {
        let c = ssm(0.98, 1.0, HeraldingStrategy::single());
        let scan = optimize_strategy(&c, 3, &[1, 2, 4, 8, 16]).unwrap();
        assert_eq!(scan.j_opt, 1);
    }

    #[test]
    fn map_rejects_bad_axes() {
        let c = ssm(0.9, 0.9, HeraldingStrategy::single());
        assert!(comparison_map(&c, &[], &[0.5], 2, &[1]).is_err());
        assert!(comparison_map(&c, &[0.5, 0.4], &[0.5], 2, &[1]).is_err());
        assert!(comparison_map(&c, &[0.5], &[1.5], 2, &[1]).is_err());
    }

    #[test]
    fn map_shapes_and_self_consistency() {
        let c = ssm(0.9, 0.9, HeraldingStrategy::single());
        let m = comparison_map(&c, &[0.5, 0.9], &[0.6, 0.8, 0.95], 2, &[1, 2, 4, 8]).unwrap();
        assert_eq!(m.delta_p.len(), 2);
        assert!(m.delta_p.iter().all(|r| r.len() == 3));
        for a in 0..2 {
            for b in 0..3 {
                let d = m.p1_spd[a][b] - m.p1_threshold[a][b];
                assert_eq!(m.delta_p[a][b], d);
                assert!(m.p1_jopt[a][b] >= m.p1_spd[a][b]);
                assert!(m.delta_p_jopt[a][b] >= -1e-9 || m.p1_threshold[a][b] > m.p1_jopt[a][b]);
            }
        }
    }
}
