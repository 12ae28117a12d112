//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fail.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use remaug_core::completion::{complete_svt, SvtConfig};
use remaug_core::evaluation::{
    check_assertions, run_benchmark, Assertion, BenchmarkConfig, BenchmarkReport, KrigingSpec,
    MethodSpec, Metric, NoParams, Scope, StmSpec, TruthModel,
};
use remaug_core::interpolation::{
    Estimator, Idw, IdwConfig, Msm, MsmConfig, NaturalNeighbor, Nearest, Target, ThinPlateSpline,
    TpsConfig,
};
use remaug_core::kriging::{Kriging, KrigingConfig, Variogram, VariogramKind};
use remaug_core::model::AntennaPattern;
use remaug_core::model_based::{
    localize_aoa, localize_rss, localize_rssd, steering, stm_calibrate, stm_predict, AoaConfig,
    ReceiverObservation, StmParams,
};
use remaug_core::scenario::shadowing_field;
use remaug_core::selector::{replay, select, Dimensionality, Label, ScenarioFeatures};
use remaug_core::{
    GridSpec, MaskSpec, PropagationParams, RadioMap, Sample, SampleSet, Scenario, Transmitter,
};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn c1_exact_interpolators() -> Outcome {
    let start = Instant::now();
    let mut worst: Vec<(&str, f64)> = ["kriging", "idw", "nearest", "natural_neighbor", "msm", "tps"]
        .into_iter()
        .map(|n| (n, 0.0))
        .collect();
    let mut errors = Vec::new();
    for set in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + set);
        let n = rng.random_range(10..=100);
        let samples = SampleSet::new(
            (0..n)
                .map(|_| {
                    Sample::new(
                        rng.random_range(0.0..1000.0),
                        rng.random_range(0.0..1000.0),
                        rng.random_range(-110.0..-40.0),
                    )
                })
                .collect(),
        )
        .unwrap();
        let var = {
            let m = samples.mean_value();
            samples.iter().map(|s| (s.value - m).powi(2)).sum::<f64>() / samples.len() as f64
        };
        let vg = Variogram::new(VariogramKind::Exponential, 0.0, var.max(1.0), 200.0).unwrap();
        let kcfg = KrigingConfig {
            neighborhood: remaug_core::interpolation::Neighborhood::All,
            ..Default::default()
        };
        let built: Vec<Result<Box<dyn Estimator>, String>> = vec![
            Kriging::new(&samples, vg, &kcfg)
                .map(|k| Box::new(k) as Box<dyn Estimator>)
                .map_err(|e| e.to_string()),
            Idw::new(&samples, IdwConfig::default())
                .map(|k| Box::new(k) as Box<dyn Estimator>)
                .map_err(|e| e.to_string()),
            Nearest::new(&samples)
                .map(|k| Box::new(k) as Box<dyn Estimator>)
                .map_err(|e| e.to_string()),
            NaturalNeighbor::new(&samples)
                .map(|k| Box::new(k) as Box<dyn Estimator>)
                .map_err(|e| e.to_string()),
            Msm::new(&samples, MsmConfig::scaled_to(&samples, 2.5))
                .map(|k| Box::new(k) as Box<dyn Estimator>)
                .map_err(|e| e.to_string()),
            ThinPlateSpline::new(&samples, TpsConfig { regularization: 0.0 })
                .map(|k| Box::new(k) as Box<dyn Estimator>)
                .map_err(|e| e.to_string()),
        ];
        for (k, est) in built.iter().enumerate() {
            let name = worst[k].0;
            let est = match est {
                Ok(e) => e,
                Err(e) => {
                    errors.push(format!("set {set} {name}: {e}"));
                    continue;
                }
            };
            for s in &samples {
                match est.value(Target::new(s.x, s.y)) {
                    Ok(v) => worst[k].1 = f64::max(worst[k].1, (v - s.value).abs()),
                    Err(e) => errors.push(format!("set {set} {name}: {e}")),
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let per: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    outcome(
        errors.is_empty() && max <= 1e-6 && secs < 10.0,
        format!(
            "max site error {max:.1e} dB (limit 1e-6; {}), {} errors, {secs:.2} s (limit 10 s){}",
            per.join(", "),
            errors.len(),
            errors.first().map(|e| format!("; first: {e}")).unwrap_or_default()
        ),
    )
}

fn low_rank(n1: usize, n2: usize, r: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let u = g(n1 * r);
    let v = g(n2 * r);
    (0..n1 * n2)
        .map(|k| {
            let (i, j) = (k / n2, k % n2);
            (0..r).map(|l| u[i * r + l] * v[j * r + l]).sum()
        })
        .collect()
}

fn svt_case(n1: usize, n2: usize, r: usize, frac: f64, seed: u64) -> (f64, bool, usize) {
    let truth = low_rank(n1, n2, r, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let grid = GridSpec::new(0.0, 0.0, 1.0, n1, n2).unwrap();
    let observed = truth
        .iter()
        .map(|&v| (frac >= 1.0 || rng.random::<f64>() < frac).then_some(v))
        .collect();
    let map = RadioMap::from_values(grid, observed).unwrap();
    let res = complete_svt(&map, &SvtConfig::new()).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for (c, t) in res.completed.values().iter().zip(&truth) {
        num += (c.unwrap() - t).powi(2);
        den += t * t;
    }
    ((num / den).sqrt(), res.converged, res.iterations)
}

// the run instances use seed 1; the sweep over 1..=10 is reported for context
fn c2_svt() -> Outcome {
    let start = Instant::now();
    let cases = [
        ("rank-1 10x10 @60%", 10, 10, 1, 0.6, 1e-3),
        ("rank-2 50x50 @40%", 50, 50, 2, 0.4, 1e-3),
        ("rank-2 50x50 full", 50, 50, 2, 1.0, 1e-4),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, n1, n2, r, frac, tol) in cases {
        let (err, conv, it) = svt_case(n1, n2, r, frac, 1);
        let pass = err < tol && it <= 500;
        ok &= pass;
        parts.push(format!(
            "{name}: rel err {err:.1e} (limit {tol:.0e}), {it} it, converged {conv}"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 10.0;
    let mut sweep = Vec::new();
    for (name, n1, n2, r, frac) in [("10x10", 10, 10, 1, 0.6), ("50x50", 50, 50, 2, 0.4)] {
        let good = (1..=10)
            .filter(|&s| svt_case(n1, n2, r, frac, s).0 < 1e-3)
            .count();
        sweep.push(format!("{name} {good}/10"));
    }
    outcome(
        ok,
        format!(
            "{}; {secs:.2} s (limit 10 s); seed sweep 1..=10 below 1e-3: {}",
            parts.join("; "),
            sweep.join(", ")
        ),
    )
}

fn c3_localization() -> Outcome {
    let prop = PropagationParams::new(40.0, 3.0);
    let mut worst_pos: f64 = 0.0;
    let mut worst_pt: f64 = 0.0;
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (xt, yt): (f64, f64) = (rng.random_range(100.0..900.0), rng.random_range(100.0..900.0));
        let p_t = rng.random_range(30.0..46.0);
        let obs: Vec<ReceiverObservation> = (0..10)
            .map(|_| {
                let (x, y): (f64, f64) =
                    (rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
                ReceiverObservation::new(x, y, prop.received_power(p_t, (x - xt).hypot(y - yt)))
            })
            .collect();
        match localize_rss(&obs, &prop) {
            Ok(e) => {
                worst_pos = worst_pos.max((e.x_t - xt).hypot(e.y_t - yt));
                worst_pt = worst_pt.max((e.p_t_hat.unwrap() - p_t).abs());
            }
            Err(e) => failures.push(format!("seed {seed} rss: {e}")),
        }
        match localize_rssd(&obs, &prop) {
            Ok(e) => worst_pos = worst_pos.max((e.x_t - xt).hypot(e.y_t - yt)),
            Err(e) => failures.push(format!("seed {seed} rssd: {e}")),
        }
    }
    // two receivers with perpendicular bearings onto (300, 200)
    let cfg = AoaConfig::new(900.0);
    let tx = (300.0, 200.0);
    let aoa_rx = |x: f64, y: f64, orient: f64| {
        let bearing = (tx.1 - y).atan2(tx.0 - x).to_degrees();
        let d = (tx.0 - x).hypot(tx.1 - y);
        let h = steering(bearing - orient);
        let mut o = ReceiverObservation::new(x, y, cfg.power_at(30.0, d, 3.0));
        o.array_orientation_deg = orient;
        o.snapshots = Some(
            (0..8)
                .map(|k| {
                    let s = num_complex_polar(1.0 + 0.1 * k as f64, 0.7 * k as f64);
                    [h[0] * s, h[1] * s]
                })
                .collect(),
        );
        o
    };
    let aoa = localize_aoa(
        &[aoa_rx(0.0, 200.0, 0.0), aoa_rx(300.0, -50.0, 90.0)],
        &prop,
        30.0,
        &cfg,
    );
    let aoa_err = match &aoa {
        Ok(e) => (e.x_t - tx.0).hypot(e.y_t - tx.1),
        Err(e) => {
            failures.push(format!("aoa: {e}"));
            f64::INFINITY
        }
    };
    outcome(
        failures.is_empty() && worst_pos <= 1e-6 && worst_pt <= 1e-6 && aoa_err <= 1e-6,
        format!(
            "20 seeds x 10 receivers: max position error {worst_pos:.1e} m, max P_t error {worst_pt:.1e} dB; \
             AOA perpendicular fusion error {aoa_err:.1e} m (limits 1e-6){}",
            failures.first().map(|f| format!("; {f}")).unwrap_or_default()
        ),
    )
}

fn num_complex_polar(r: f64, theta: f64) -> num_complex::Complex64 {
    num_complex::Complex64::from_polar(r, theta)
}

fn ordering_scenario(sigma: f64) -> Scenario {
    let grid = GridSpec::new(0.0, 0.0, 10.0, 100, 100).unwrap();
    let tx = Transmitter {
        x: 500.0,
        y: 500.0,
        height: 30.0,
        p_t: 43.0,
        freq_mhz: 900.0,
        antenna: None,
    };
    Scenario::new(
        grid,
        vec![tx],
        PropagationParams::new(40.0, 3.0).with_shadowing(sigma, 200.0),
        2024,
    )
}

fn ordering_config(
    scenario: Scenario,
    methods: Vec<MethodSpec>,
    ordering: &[&str],
    truth_model: TruthModel,
) -> BenchmarkConfig {
    BenchmarkConfig {
        scenario,
        mask: MaskSpec::uniform(0.1, 7),
        methods,
        seeds: (1..=20).collect(),
        scope: Scope::MissingOnly,
        truth_model,
        assertions: vec![Assertion {
            ordering: ordering.iter().map(|s| s.to_string()).collect(),
            metric: Metric::Rmse,
            min_success_fraction: 0.9,
        }],
    }
}

fn summary(report: &BenchmarkReport) -> String {
    report
        .aggregates
        .iter()
        .map(|a| match a.rmse {
            Some(s) => format!(
                "{} {:.3}±{:.3} ({}/{})",
                a.method,
                s.mean,
                s.std,
                a.n_success,
                a.n_success + a.n_failed
            ),
            None => format!("{} all failed", a.method),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn c4_ordering() -> Outcome {
    let start = Instant::now();
    let cfg = ordering_config(
        ordering_scenario(6.0),
        vec![
            MethodSpec::Kriging(KrigingSpec::default()),
            MethodSpec::Idw(IdwConfig::default()),
            MethodSpec::Nearest(NoParams {}),
        ],
        &["kriging", "idw", "nearest"],
        TruthModel::LogDistance,
    );
    let report = match run_benchmark(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("config error: {e}")),
    };
    let checks = check_assertions(&report);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        checks.iter().all(|c| c.passed) && secs < 300.0,
        format!(
            "mean MissingOnly RMSE dB: {}; {secs:.1} s (limit 300 s){}",
            summary(&report),
            checks
                .iter()
                .flat_map(|c| c.diagnostics.iter())
                .map(|d| format!("; {d}"))
                .collect::<String>()
        ),
    )
}

fn perturbed(tx: &Transmitter) -> StmParams {
    let mut p = StmParams::hata(tx);
    p.a0 = 72.0;
    p.a1 = 41.5;
    p.a2 = -12.0;
    p.a3 = -7.2;
    p.l_c = 2.5;
    p.p_t = tx.p_t + 1.5;
    p
}

fn c5_stm() -> Outcome {
    // calibration on 1000 samples from an antenna-equipped transmitter
    let tx = Transmitter {
        x: 500.0,
        y: 500.0,
        height: 30.0,
        p_t: 43.0,
        freq_mhz: 900.0,
        antenna: Some(AntennaPattern::three_gpp(15.0, 65.0, 10.0, 25.0, 60.0, 5.0)),
    };
    let mut truth = perturbed(&tx);
    if let Some(AntennaPattern::ThreeGpp {
        g_max, theta_azi, ..
    }) = truth.antenna.as_mut()
    {
        *g_max = 16.5;
        *theta_azi = 48.0;
    }
    let init = StmParams::hata(&tx).with_relative_bounds(0.25, 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples = SampleSet::new(
        (0..1000)
            .map(|_| {
                let (x, y) = (rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0));
                Sample::new(x, y, stm_predict(&truth, &tx, x, y))
            })
            .collect(),
    )
    .unwrap();
    let calib = stm_calibrate(&samples, &tx, &init).map(|(_, rmse)| rmse);

    let bench = |sigma: f64| {
        let scenario = ordering_scenario(sigma);
        let model = TruthModel::Stm(perturbed(&scenario.transmitters[0]));
        let cfg = ordering_config(
            scenario,
            vec![
                MethodSpec::Stm(StmSpec::default()),
                MethodSpec::Kriging(KrigingSpec::default()),
            ],
            &["stm", "kriging"],
            model,
        );
        run_benchmark(&cfg).map(|r| {
            let c = check_assertions(&r);
            (r, c)
        })
    };
    let matched = bench(0.0);
    let shadowed = bench(6.0);

    let calib_ok = matches!(calib, Ok(r) if r < 0.5);
    let (bench_ok, bench_text) = match &matched {
        Ok((r, c)) => (
            c.iter().all(|o| o.passed) && stm_strictly_better(r),
            summary(r),
        ),
        Err(e) => (false, format!("config error: {e}")),
    };
    let info = match &shadowed {
        Ok((r, _)) => summary(r),
        Err(e) => format!("config error: {e}"),
    };
    outcome(
        calib_ok && bench_ok,
        format!(
            "calibration RMSE {} dB (limit 0.5); model-matched phi=0 RMSE dB: {bench_text} (need stm < kriging); \
             phi=6 variant (informational): {info}",
            match calib {
                Ok(r) => format!("{r:.2e}"),
                Err(e) => format!("error: {e}"),
            }
        ),
    )
}

fn stm_strictly_better(r: &BenchmarkReport) -> bool {
    match (r.aggregate("stm"), r.aggregate("kriging")) {
        (Some(s), Some(k)) => match (s.rmse, k.rmse) {
            (Some(s), Some(k)) => s.mean < k.mean,
            _ => false,
        },
        _ => false,
    }
}

fn c6_shadowing() -> Outcome {
    let grid = GridSpec::new(0.0, 0.0, 10.0, 100, 100).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for decorr in [50.0, 200.0] {
        let lags = [1usize, 5, 10];
        let mut sums = [0.0f64; 3];
        let mut counts = [0usize; 3];
        for seed in 0..50u64 {
            let s = shadowing_field(&grid, 1.0, decorr, seed);
            let at = |i: usize, j: usize| s[i * grid.n_cols + j];
            for (k, &h) in lags.iter().enumerate() {
                for i in 0..grid.n_rows {
                    for j in 0..grid.n_cols {
                        if j + h < grid.n_cols {
                            sums[k] += at(i, j) * at(i, j + h);
                            counts[k] += 1;
                        }
                        if i + h < grid.n_rows {
                            sums[k] += at(i, j) * at(i + h, j);
                            counts[k] += 1;
                        }
                    }
                }
            }
        }
        for (k, &h) in lags.iter().enumerate() {
            let emp = sums[k] / counts[k] as f64;
            let want = (-(h as f64) * grid.cell_size / decorr).exp();
            ok &= (emp - want).abs() <= 0.1;
            parts.push(format!("decorr {decorr} m lag {h}: {emp:.3} vs {want:.3}"));
        }
    }
    outcome(ok, format!("50 seeds, 100x100 cells (tol 0.1): {}", parts.join(", ")))
}

fn features(bits: u32) -> ScenarioFeatures {
    let b = |k: u32| bits & (1 << k) != 0;
    ScenarioFeatures {
        new_unseen_scenario: b(0),
        representative: b(1),
        dimensionality: if b(2) {
            Dimensionality::High
        } else {
            Dimensionality::Low
        },
        correlated: b(3),
        env_params_known: b(4),
        tx_power_known: b(5),
        snr_known: b(6),
        antenna_info_known: b(7),
        network_geometry_known: b(8),
        tx_locations_known: b(9),
        low_rank_matrix: b(10),
        smooth_surface: b(11),
        extrapolation_needed: b(12),
        targets_inside_hull: b(13),
        many_latent_features: b(14),
        latent_prior_known: b(15),
        data_prior_known: b(16),
        similar_domain_data_available: b(17),
    }
}

fn c7_selector() -> Outcome {
    let mut leaves: BTreeSet<Vec<Label>> = BTreeSet::new();
    let mut violations = Vec::new();
    let total = 1u32 << 18;
    for bits in 0..total {
        let f = features(bits);
        let r = select(&f);
        if r.methods.is_empty() {
            violations.push(format!("empty for {bits:#x}"));
        }
        if replay(&r.path).ok() != Some(r.methods.clone()) {
            violations.push(format!("path does not replay for {bits:#x}"));
        }
        let nn_ok = !r.methods.contains(&Label::NaturalNeighbor)
            || (f.targets_inside_hull && !f.extrapolation_needed);
        let spl_ok = !r.methods.contains(&Label::Splines) || f.smooth_surface;
        if !(nn_ok && spl_ok) {
            violations.push(format!("exclusion rule broken for {bits:#x}"));
        }
        leaves.insert(r.methods);
    }
    let narrative = [
        (
            ScenarioFeatures {
                new_unseen_scenario: true,
                ..Default::default()
            },
            vec![Label::Simulator, Label::Testbed],
        ),
        (
            ScenarioFeatures {
                representative: true,
                correlated: true,
                env_params_known: true,
                tx_power_known: true,
                antenna_info_known: true,
                ..Default::default()
            },
            vec![Label::Stm],
        ),
        (
            ScenarioFeatures {
                representative: true,
                correlated: true,
                low_rank_matrix: true,
                ..Default::default()
            },
            vec![Label::MatrixCompletion],
        ),
    ];
    for (f, want) in narrative {
        let got = select(&f).methods;
        if got != want {
            violations.push(format!("narrative case gave {got:?}, expected {want:?}"));
        }
    }
    outcome(
        violations.is_empty() && leaves.len() >= 14,
        format!(
            "all {total} feature combinations: {} distinct leaves (need >= 14), {} violations{}",
            leaves.len(),
            violations.len(),
            violations.first().map(|v| format!("; first: {v}")).unwrap_or_default()
        ),
    )
}

const DET_SCENARIO: &str = r#"{
  "grid": {"origin_x": 0, "origin_y": 0, "cell_size": 10, "n_rows": 30, "n_cols": 30},
  "transmitters": [{"x": 150, "y": 150, "height": 30, "p_t": 43, "freq_mhz": 900}],
  "prop": {"intercept_db": 40, "exponent": 3, "shadow_sigma_db": 6, "decorr_dist_m": 100},
  "seed": 9
}"#;

const DET_BENCH: &str = r#"{
  "scenario": {
    "grid": {"origin_x": 0, "origin_y": 0, "cell_size": 10, "n_rows": 30, "n_cols": 30},
    "transmitters": [{"x": 150, "y": 150, "height": 30, "p_t": 43, "freq_mhz": 900}],
    "prop": {"intercept_db": 40, "exponent": 3, "shadow_sigma_db": 6, "decorr_dist_m": 100},
    "seed": 9
  },
  "mask": {"kind": "UniformRandom", "fraction": 0.15, "seed": 3},
  "methods": [{"method": "kriging"}, {"method": "idw"}, {"method": "svt"}, {"method": "stm"}],
  "seeds": [1, 2, 3]
}"#;

fn pipeline(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    fs::write(dir.join("scenario.json"), DET_SCENARIO).map_err(|e| e.to_string())?;
    fs::write(dir.join("bench.json"), DET_BENCH).map_err(|e| e.to_string())?;
    let steps: [&[&str]; 5] = [
        &["generate", "scenario.json", "-o", "truth.csv"],
        &["mask", "truth.csv", "--fraction", "0.2", "-o", "obs.csv", "--samples-out", "obs_samples.csv"],
        &["reconstruct", "--input", "obs.csv", "--method", "kriging", "-o", "kriging.csv"],
        &["reconstruct", "--input", "obs.csv", "--method", "svt", "-o", "svt.csv"],
        &["benchmark", "bench.json", "-o", "report.json", "--csv", "report.csv"],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_remaug"))
            .current_dir(dir)
            .env_remove("REMAUG_SEED")
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        // svt may exit 1 on non-convergence but still writes its output
        if !matches!(out.status.code(), Some(0) | Some(1)) {
            return Err(format!(
                "{args:?}: {}",
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
    }
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    Ok(files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect())
}

fn c8_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    match (pipeline(a.path()), pipeline(b.path())) {
        (Ok(x), Ok(y)) => {
            let names: Vec<&str> = x.iter().map(|f| f.0.as_str()).collect();
            let differing: Vec<&str> = x
                .iter()
                .zip(&y)
                .filter(|(p, q)| p != q)
                .map(|(p, _)| p.0.as_str())
                .collect();
            let expected = [
                "truth.csv",
                "truth.meta.json",
                "obs.csv",
                "obs_samples.csv",
                "kriging.csv",
                "svt.csv",
                "report.json",
                "report.csv",
            ];
            let complete = expected.iter().all(|e| names.contains(e));
            outcome(
                x.len() == y.len() && differing.is_empty() && complete,
                format!(
                    "{} files compared ({}); differing: {:?}",
                    x.len(),
                    names.join(" "),
                    differing
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("exact-interpolator suite", c1_exact_interpolators),
        ("SVT oracle", c2_svt),
        ("noiseless localization exactness", c3_localization),
        ("method-ordering benchmark", c4_ordering),
        ("STM self-consistency", c5_stm),
        ("shadowing-field statistics", c6_shadowing),
        ("selector totality and paths", c7_selector),
        ("determinism", c8_determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            k + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
