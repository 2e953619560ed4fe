//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::Instant;

use muxsps::loss_models::{LoopCycleConvention, MultiplexerKind};
use muxsps::optimizer::Optimizer;
use muxsps::report::{preset, Scenario};
use muxsps::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CLOSED_FORM_TOL: f64 = 1e-10;
const P_TOL: f64 = 0.001;
const LAMBDA_TOL: f64 = 0.01;
const FIG3_P_TOL: f64 = 0.005;
const DELTA_P_TOL: f64 = 0.002;
const THERMAL_P_TOL: f64 = 0.002;
const SATURATION_MAX: f64 = 0.004;
const MC_SAMPLES: u64 = 10_000_000;
const MC_SIGMA: f64 = 4.0;
const MC_I_MAX: usize = 3;
const PROPERTY_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(ok: bool, detail: String, failures: &mut Vec<String>) -> bool {
    if !ok {
        failures.push(detail.clone());
    }
    ok
}

fn near(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn find(name: &str, pred: impl Fn(&Scenario) -> bool) -> Scenario {
    preset(name)
        .unwrap()
        .scenarios()
        .unwrap()
        .into_iter()
        .find(pred)
        .unwrap_or_else(|| panic!("preset {name} lacks the requested scenario"))
}

fn at(sc: &Scenario, vd: f64, element: f64) -> bool {
    sc.detector_efficiency == vd && sc.element_transmission == element
}

fn summarize(failures: Vec<String>, ok: String) -> Outcome {
    if failures.is_empty() {
        Outcome { pass: true, detail: ok }
    } else {
        Outcome {
            pass: false,
            detail: failures.join("; "),
        }
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for k in 0..100 {
        let lam = rng.random_range(0.01..=5.0);
        let vd = rng.random_range(0.3..=1.0);
        let units = 1u32 << rng.random_range(0..=4);
        let mux = match k % 4 {
            0 => MultiplexerModel::symmetric_spatial(rng.random_range(0.3..=1.0), rng.random_range(0.3..=1.0)),
            1 => MultiplexerModel::time_chain(rng.random_range(0.3..=1.0), rng.random_range(0.9..=1.0)),
            2 => MultiplexerModel::time_loop_latest(rng.random_range(0.3..=1.0), rng.random_range(0.9..=1.0)),
            _ => MultiplexerModel::binary_bulk_time(
                rng.random_range(0.3..=1.0),
                rng.random_range(0.8..=1.0),
                rng.random_range(0.8..=1.0),
                rng.random_range(0.5..=1.0),
            ),
        }
        .unwrap();
        for strategy in [HeraldingStrategy::ThresholdAll, HeraldingStrategy::single()] {
            let cfg = SourceConfig::new(
                PairDistribution::poissonian(lam).unwrap(),
                DetectorModel::with_efficiency(vd).unwrap(),
                strategy.clone(),
                mux,
                units,
            )
            .unwrap();
            let engine = output_distribution(&cfg).unwrap().p1();
            let closed = match strategy {
                HeraldingStrategy::ThresholdAll => p1_threshold_closed_form(&cfg),
                _ => p1_spd_closed_form(&cfg),
            }
            .unwrap();
            let diff = (engine - closed).abs();
            worst = worst.max(diff);
            check(
                diff <= CLOSED_FORM_TOL,
                format!("config {k} {}: |diff| = {diff:e}", strategy.label()),
                &mut failures,
            );
        }
    }
    summarize(failures, format!("200 comparisons, max |diff| = {worst:.2e} (tol {CLOSED_FORM_TOL:e})"))
}

fn optimum_check(
    label: &str,
    r: &OptimizationResult,
    n: Option<u32>,
    p: f64,
    p_tol: f64,
    lam: Option<f64>,
    failures: &mut Vec<String>,
) -> String {
    let mut ok = near(r.p1_max, p, p_tol);
    if let Some(n) = n {
        ok &= r.n_opt == n;
    }
    if let Some(lam) = lam {
        ok &= near(r.lambda_opt, lam, LAMBDA_TOL);
    }
    let s = format!(
        "{label}: N_opt={} P_1={:.4} lambda={:.4}",
        r.n_opt, r.p1_max, r.lambda_opt
    );
    check(ok, s.clone(), failures);
    s
}

/// (strategy, V_D, element transmission, N_opt, P_1, lambda_opt)
type Case<'a> = (&'a str, f64, f64, Option<u32>, f64, Option<f64>);

fn spot_checks(preset_name: &str, cases: &[Case]) -> Outcome {
    let opt = Optimizer::default();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for &(strategy, vd, element, n, p, lam) in cases {
        let sc = find(preset_name, |s| s.strategy_label == strategy && at(s, vd, element));
        let r = opt.optimize_units(&sc.cfg, &[]).unwrap();
        lines.push(optimum_check(
            &format!("{strategy} V_D={vd} elem={element}"),
            &r,
            n,
            p,
            P_TOL,
            lam,
            &mut failures,
        ));
    }
    summarize(failures, lines.join(", "))
}

fn criterion_2() -> Outcome {
    spot_checks(
        "ssm-spd",
        &[
            ("spd", 0.98, 0.98, Some(16), 0.912, Some(0.534)),
            ("spd", 0.90, 0.90, Some(8), 0.680, Some(0.812)),
            ("spd", 0.98, 0.30, Some(1), 0.361, Some(1.000)),
        ],
    )
}

fn criterion_3() -> Outcome {
    spot_checks(
        "ssm-threshold",
        &[
            ("threshold", 0.98, 0.95, Some(16), 0.735, Some(0.246)),
            ("threshold", 0.30, 0.99, Some(1024), 0.890, None),
        ],
    )
}

fn criterion_4() -> Outcome {
    let template = preset("fig3-curves").unwrap().base_config().unwrap();
    let r = Optimizer::default().optimize_units(&template, &[]).unwrap();
    let mut failures = Vec::new();
    let mut ok = r.n_opt == 16 && near(r.p1_max, 0.90, FIG3_P_TOL) && near(r.lambda_opt, 0.45, LAMBDA_TOL);
    ok &= template.detector.efficiency() == 0.95;
    let s = format!("N_opt={} P_1={:.4} lambda={:.4}", r.n_opt, r.p1_max, r.lambda_opt);
    check(ok, s.clone(), &mut failures);
    summarize(failures, s)
}

fn criterion_5() -> Outcome {
    let template = preset("fig4-7-maps").unwrap().base_config().unwrap();
    let opt = Optimizer::default();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for (vd, vr, target) in [(0.98, 0.95, 0.089), (0.59, 0.30, -0.158)] {
        let cell = opt.compare_cell(&template, vd, vr, 1, &[]).unwrap();
        let d = cell.delta_p();
        let s = format!("delta_P(V_D={vd}, V_r={vr}) = {d:.4}");
        check(near(d, target, DELTA_P_TOL), s.clone(), &mut failures);
        lines.push(s);
    }
    summarize(failures, lines.join(", "))
}

fn criterion_6() -> Outcome {
    let template = preset("fig4-7-maps").unwrap().base_config().unwrap();
    let opt = Optimizer::default();
    let mut failures = Vec::new();
    let a = opt.compare_cell(&template, 0.90, 0.75, 4, &[]).unwrap();
    let b = opt.compare_cell(&template, 0.98, 0.98, 4, &[]).unwrap();
    let s = format!(
        "(V_r=0.75, V_D=0.90): J_opt={} delta_P_Jopt={:.4}; (V_r=0.98, V_D=0.98): J_opt={}",
        a.scan.j_opt,
        a.delta_p_jopt(),
        b.scan.j_opt
    );
    check(
        a.scan.j_opt == 2 && a.delta_p_jopt() > 0.0 && b.scan.j_opt == 1,
        s.clone(),
        &mut failures,
    );
    summarize(failures, s)
}

fn loop_scenario(strategy: &str, dist: PairStatistics, conv: LoopCycleConvention, vd: f64, units: u32) -> Scenario {
    find("loop-latest", |s| {
        s.strategy_label == strategy
            && s.cfg.dist.kind() == dist
            && s.convention == Some(conv)
            && s.detector_efficiency == vd
            && s.cfg.units == units
    })
}

fn criterion_7() -> Outcome {
    let conv = LoopCycleConvention::PriorityIndexMinusOne;
    let opt = Optimizer::default();
    let mut failures = Vec::new();
    let mut lines = vec!["convention priority-index-minus-one".to_owned()];
    for (strategy, vd, p, lam) in [
        ("spd", 0.98, 0.852, Some(0.706)),
        ("threshold", 0.98, 0.778, None),
        ("spd", 0.60, 0.762, None),
    ] {
        let r40 = opt
            .optimize_units(&loop_scenario(strategy, PairStatistics::Poissonian, conv, vd, 40).cfg, &[])
            .unwrap();
        let r100 = opt
            .optimize_units(&loop_scenario(strategy, PairStatistics::Poissonian, conv, vd, 100).cfg, &[])
            .unwrap();
        let label = format!("{strategy} V_D={vd}");
        lines.push(optimum_check(&label, &r40, Some(40), p, P_TOL, lam, &mut failures));
        let gain = r100.p1_max - r40.p1_max;
        let s = format!("{label} N=100 gain {gain:.4}");
        check((-PROPERTY_TOL..=SATURATION_MAX).contains(&gain), s.clone(), &mut failures);
        lines.push(s);
    }
    summarize(failures, lines.join(", "))
}

fn criterion_8() -> Outcome {
    let conv = LoopCycleConvention::PriorityIndex;
    let opt = Optimizer::default();
    let mut failures = Vec::new();
    let mut lines = vec!["convention priority-index".to_owned()];
    for (vd, units, p) in [(0.60, 40, 0.713), (0.98, 100, 0.829)] {
        let sc = loop_scenario("spd", PairStatistics::Thermal, conv, vd, units);
        let r = opt.optimize_units(&sc.cfg, &[]).unwrap();
        lines.push(optimum_check(
            &format!("thermal V_D={vd} N={units}"),
            &r,
            Some(units),
            p,
            THERMAL_P_TOL,
            None,
            &mut failures,
        ));
    }
    summarize(failures, lines.join(", "))
}

fn criterion_9() -> Outcome {
    let opt = Optimizer::default();
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for (strategy, vd, n, p, lam) in [
        ("spd", 0.98, 16, 0.907, Some(0.600)),
        ("threshold", 0.98, 128, 0.854, None),
        ("spd", 0.60, 128, 0.849, None),
    ] {
        let sc = find("btm", |s| s.strategy_label == strategy && s.detector_efficiency == vd);
        assert!(matches!(sc.cfg.mux.kind(), MultiplexerKind::BinaryBulkTime { .. }));
        let r = opt.optimize_units(&sc.cfg, &[]).unwrap();
        lines.push(optimum_check(
            &format!("{strategy} V_D={vd}"),
            &r,
            Some(n),
            p,
            P_TOL,
            lam,
            &mut failures,
        ));
    }
    summarize(failures, lines.join(", "))
}

fn random_config(rng: &mut ChaCha8Rng, k: usize) -> SourceConfig {
    let dist = if rng.random_bool(0.5) {
        PairDistribution::poissonian(rng.random_range(0.05..=2.0))
    } else {
        PairDistribution::thermal(rng.random_range(0.05..=1.5))
    }
    .unwrap();
    let strategy = match rng.random_range(0..3) {
        0 => HeraldingStrategy::ThresholdAll,
        1 => HeraldingStrategy::single(),
        _ => HeraldingStrategy::up_to(2).unwrap(),
    };
    let vb = rng.random_range(0.5..=1.0);
    let (mux, units) = match k % 4 {
        0 => (
            MultiplexerModel::symmetric_spatial(vb, rng.random_range(0.3..=1.0)),
            1 << rng.random_range(0..=5),
        ),
        1 => (
            MultiplexerModel::time_chain(vb, rng.random_range(0.8..=1.0)),
            rng.random_range(1..=40),
        ),
        2 => (
            MultiplexerModel::time_loop_latest(vb, rng.random_range(0.8..=1.0)),
            rng.random_range(1..=40),
        ),
        _ => (
            MultiplexerModel::binary_bulk_time(
                vb,
                rng.random_range(0.8..=1.0),
                rng.random_range(0.8..=1.0),
                rng.random_range(0.5..=1.0),
            ),
            1 << rng.random_range(0..=5),
        ),
    };
    SourceConfig::new(
        dist,
        DetectorModel::with_efficiency(rng.random_range(0.3..=1.0)).unwrap(),
        strategy,
        mux.unwrap(),
        units,
    )
    .unwrap()
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let cfg = random_config(&mut rng, k);
        let exact = output_distribution(&cfg).unwrap();
        let est = simulate(&cfg, MC_SAMPLES, 1000 + k as u64).unwrap();
        let s = est.max_sigma_deviation(&exact, MC_I_MAX);
        worst = worst.max(s);
        check(
            s <= MC_SIGMA,
            format!("config {k} ({} N={}): {s:.2} sigma", cfg.mux.kind().name(), cfg.units),
            &mut failures,
        );
    }
    summarize(
        failures,
        format!("20 configs x {MC_SAMPLES} samples, worst {worst:.2} sigma (limit {MC_SIGMA})"),
    )
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    let trials = 200;
    for t in 0..trials {
        let lam = rng.random_range(0.01..=3.0);
        let vd = rng.random_range(0.0..=1.0);
        let v = rng.random_range(0.0..=1.0);
        let l = rng.random_range(0..=40u32);
        let det = DetectorModel::with_efficiency(vd).unwrap();

        let sum: f64 = (0..=l).map(|j| detect_conditional(j, l, &det).unwrap()).sum();
        check(near(sum, 1.0, PROPERTY_TOL), format!("binomial completeness trial {t}: {sum}"), &mut failures);
        let sum: f64 = (0..=l)
            .map(|i| transmit_conditional(i, l, UnitTransmission::new(v).unwrap()).unwrap())
            .sum();
        check(near(sum, 1.0, PROPERTY_TOL), format!("transmission completeness trial {t}: {sum}"), &mut failures);

        for dist in [PairDistribution::poissonian(lam).unwrap(), PairDistribution::thermal(lam).unwrap()] {
            let table = dist.pmf_table(1e-14);
            let total: f64 = table.iter().sum();
            check(near(total, 1.0, 1e-12), format!("{} normalization trial {t}: {total}", dist.kind()), &mut failures);

            // thinning a pair distribution by V_D stays in the family with mean V_D * lambda
            let thinned = dist.with_mean(vd * lam).unwrap();
            for j in 0..4 {
                let direct = detect_total(j, &dist, &det, 1e-15).unwrap();
                let closed = pair_pmf(&thinned, j);
                check(
                    near(direct, closed, 1e-11),
                    format!("{} thinning trial {t} j={j}: {direct} vs {closed}", dist.kind()),
                    &mut failures,
                );
            }

            let small = herald_probability(&HeraldingStrategy::single(), &dist, &det, 1e-12).unwrap();
            let mid = herald_probability(&HeraldingStrategy::up_to(2).unwrap(), &dist, &det, 1e-12).unwrap();
            let all = herald_probability(&HeraldingStrategy::ThresholdAll, &dist, &det, 1e-12).unwrap();
            check(
                small <= mid + PROPERTY_TOL && mid <= all + PROPERTY_TOL,
                format!("strategy monotonicity trial {t}: {small} {mid} {all}"),
                &mut failures,
            );
        }

        let units = 1u32 << rng.random_range(0..=6);
        let cfg = SourceConfig::new(
            PairDistribution::poissonian(lam).unwrap(),
            DetectorModel::with_efficiency(1.0).unwrap(),
            HeraldingStrategy::single(),
            MultiplexerModel::symmetric_spatial(1.0, 1.0).unwrap(),
            units,
        )
        .unwrap();
        let p1 = output_distribution(&cfg).unwrap().p1();
        let expected = 1.0 - (1.0 - lam * (-lam).exp()).powi(units as i32);
        check(
            near(p1, expected, 1e-10),
            format!("lossless limit trial {t} N={units}: {p1} vs {expected}"),
            &mut failures,
        );
    }
    summarize(
        failures,
        format!("{trials} randomized trials of completeness, normalization, thinning, monotonicity, lossless limit"),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "closed-form equivalence", criterion_1),
        (2, "spatial single-photon table", criterion_2),
        (3, "spatial threshold table", criterion_3),
        (4, "single-photon checkpoint", criterion_4),
        (5, "delta_P extrema", criterion_5),
        (6, "strategy optimization", criterion_6),
        (7, "storage loop table", criterion_7),
        (8, "thermal storage loop", criterion_8),
        (9, "binary bulk time table", criterion_9),
        (10, "Monte-Carlo agreement", criterion_10),
        (11, "property suites", criterion_11),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let start = Instant::now();
        let out = f();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        if !out.pass {
            failed += 1;
        }
        println!(
            "{tag} criterion {n} ({name}): {} [{:.1}s]",
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
