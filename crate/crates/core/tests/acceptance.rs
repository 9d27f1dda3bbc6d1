//! Acceptance suite. Every criterion prints one `PASS` / `FAIL` line to the
//! process stderr (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::sync::OnceLock;

use abstain_core::anytime_tests::{
    ever_fires_fraction, first_firing, SequentialTests, TestConfig, TestKind,
};
use abstain_core::boundary_learner::{
    build_grid, l1_distance, lagrange_basis, interpolate_cell_raw, GridSpec, NodeValues, PiecewiseBoundary,
    SmoothBoundary,
};
use abstain_core::harness::{
    parse_config, run_experiment, to_json_string, ExperimentKind, ExperimentReport, FLAT_SERIES,
    MONOTONE_SERIES,
};
use abstain_core::labelers::{verify_condition1, verify_condition3, LowerBoundLabeler};
use abstain_core::rng::{derive_seed, stream_rng};
use rand::Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "ACCEPTANCE {id:>2} {:<4} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn run(kind: ExperimentKind, config: &str) -> ExperimentReport {
    let spec = parse_config(config).unwrap().to_spec(kind).unwrap();
    run_experiment(&spec).unwrap()
}

#[test]
fn criterion_01_false_positive_rate() {
    let cfg = TestConfig::default();
    let (trials, delta) = (5000u64, 0.1);
    let bound = 0.1 + 3.0 * (0.1f64 * 0.9 / trials as f64).sqrt();
    let seed = 0x5EED_0001;
    let lil = ever_fires_fraction(TestKind::Lil, cfg, delta, 10_000, trials, seed).unwrap();
    let var = ever_fires_fraction(TestKind::EmpiricalVariance, cfg, delta, 10_000, trials, seed).unwrap();
    verdict(
        1,
        "false-positive rate of calibrated tests",
        lil <= bound && var <= bound,
        &format!("lil {lil:.4}, variance {var:.4}, bound {bound:.4} (d0 {}, d1 {})", cfg.d0, cfg.d1),
    );
}

#[test]
fn criterion_02_test_power() {
    let tests = SequentialTests::new(0.1, TestConfig::default()).unwrap();
    let n_max = 10_000usize;
    let streams = 1000u64;
    let lil_fired = (0..streams)
        .filter(|&i| {
            let mut rng = stream_rng(derive_seed(0x5EED_0002, &[i]));
            let xs = (0..n_max).map(move |_| if rng.gen_bool(0.6) { 1.0 } else { -1.0 });
            first_firing(TestKind::Lil, &tests, xs).is_some()
        })
        .count();
    // Mean 0.1 and variance 0.2 on {-1, 0, 1}.
    let (p_plus, p_minus) = (0.155, 0.055);
    let var_fired = (0..streams)
        .filter(|&i| {
            let mut rng = stream_rng(derive_seed(0x5EED_0003, &[i]));
            let xs = (0..n_max).map(move |_| {
                let u: f64 = rng.gen();
                if u < p_plus {
                    1.0
                } else if u < p_plus + p_minus {
                    -1.0
                } else {
                    0.0
                }
            });
            first_firing(TestKind::EmpiricalVariance, &tests, xs).is_some()
        })
        .count();
    let lil_rate = lil_fired as f64 / streams as f64;
    let var_rate = var_fired as f64 / streams as f64;
    verdict(
        2,
        "power of the sequential tests",
        lil_rate >= 0.99 && var_rate >= 0.95,
        &format!("lil {lil_rate:.3} (>= 0.99), variance {var_rate:.3} (>= 0.95)"),
    );
}

const FAMILIES: [(&str, &str); 3] = [
    (
        "power",
        "labeler = power\nlabeler.c_prime = 1\nlabeler.alpha = 1\nlabeler.noise_c = 1\nlabeler.beta = 1",
    ),
    (
        "flat_band",
        "labeler = flat_band\nlabeler.level = 0.68\nlabeler.width = 0.1\nlabeler.c_prime = 1\n\
         labeler.alpha = 1\nlabeler.noise_c = 1\nlabeler.beta = 1",
    ),
    (
        "noiseless",
        "labeler = constant\nlabeler.level = 0\nlabeler.noise_c = 1\nlabeler.beta = 0",
    ),
];

#[test]
fn criterion_03_threshold_consistency() {
    let trials = 200u64;
    let bound = 0.10 + 3.0 * (0.1f64 * 0.9 / trials as f64).sqrt();
    let mut worst = 0.0f64;
    let mut cells = Vec::new();
    for (f, (family, labeler)) in FAMILIES.iter().enumerate() {
        for (t, theta) in [0.137, 0.5, 0.91].into_iter().enumerate() {
            let cfg = format!(
                "epsilons = 0.01\ndelta = 0.2\ntrials = {trials}\nmax_queries = 10000000\n\
                 seed = {}\nlabeler.theta_star = {theta}\n{labeler}",
                300 + 10 * f + t
            );
            let report = run(ExperimentKind::Consistency, &cfg);
            let s = &report.per_epsilon[0];
            let failure = 1.0 - s.success_rate;
            worst = worst.max(failure);
            cells.push(format!("{family}@{theta}={failure:.3}"));
        }
    }
    verdict(
        3,
        "threshold consistency",
        worst <= bound,
        &format!("worst failure rate {worst:.3} <= {bound:.3}; {}", cells.join(" ")),
    );
}

const ADAPTIVITY_CONFIG: &str = "\
epsilons = 0.04, 0.02, 0.01, 0.005
delta = 0.1
trials = 50
seed = 13
max_queries = 100000000
labeler = power
labeler.theta_star = uniform(0.1, 0.9)
labeler.c_prime = 1
labeler.alpha = 1
labeler.noise_c = 0
labeler.beta = 1
compare = constant
compare.theta_star = uniform(0.1, 0.9)
compare.level = 0.5
compare.noise_c = 1
compare.beta = 1
";

/// The criterion-4 and criterion-5 labelers run once, side by side.
fn adaptivity() -> &'static ExperimentReport {
    static REPORT: OnceLock<ExperimentReport> = OnceLock::new();
    REPORT.get_or_init(|| run(ExperimentKind::Adaptivity, ADAPTIVITY_CONFIG))
}

fn means(report: &ExperimentReport, series: &str) -> String {
    report
        .per_epsilon
        .iter()
        .filter(|s| s.series == series)
        .map(|s| format!("{}:{:.0}", s.epsilon, s.mean_queries))
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn criterion_04_informative_abstention_scaling() {
    let r = adaptivity();
    let slope = r.comparison.as_ref().unwrap().monotone.fit.slope;
    verdict(
        4,
        "scaling with informative abstention",
        (0.6..=1.7).contains(&slope),
        &format!("slope {slope:.3} in [0.6, 1.7]; means {}", means(r, MONOTONE_SERIES)),
    );
}

#[test]
fn criterion_05_flat_abstention_scaling() {
    let r = adaptivity();
    let slope = r.comparison.as_ref().unwrap().flat.fit.slope;
    let exhausted: u64 = r
        .per_epsilon
        .iter()
        .filter(|s| s.series == FLAT_SERIES)
        .map(|s| s.budget_exhausted_count)
        .sum();
    verdict(
        5,
        "scaling with flat abstention",
        (1.5..=2.7).contains(&slope),
        &format!(
            "slope {slope:.3} in [1.5, 2.7]; means {}; budget exhausted {exhausted}",
            means(r, FLAT_SERIES)
        ),
    );
}

#[test]
fn criterion_06_adaptivity_gap() {
    let c = adaptivity().comparison.clone().unwrap();
    verdict(
        6,
        "adaptivity gap",
        c.monotone.fit.slope < c.flat.fit.slope - 0.5,
        &format!(
            "monotone {:.3} < flat {:.3} - 0.5 (difference {:.3})",
            c.monotone.fit.slope, c.flat.fit.slope, c.difference
        ),
    );
}

#[test]
fn criterion_07_trigger_provenance() {
    let r = adaptivity();
    let (mut total, mut abst) = (0u32, 0u32);
    for t in r.trials.iter().filter(|t| t.series == MONOTONE_SERIES) {
        total += t.triggers.abstention() + t.triggers.label() + t.triggers.budget;
        abst += t.triggers.abstention();
    }
    let (mut finals, mut label_finals) = (0u32, 0u32);
    for t in r.trials.iter().filter(|t| t.series == FLAT_SERIES) {
        if let Some(last) = t.final_trigger {
            finals += 1;
            label_finals += u32::from(last.is_label_test());
        }
    }
    let label_share = label_finals as f64 / finals as f64;
    verdict(
        7,
        "trigger provenance",
        abst == total && label_share >= 0.9,
        &format!(
            "informative: {abst}/{total} abstention triggers; flat: {label_finals}/{finals} label final triggers ({label_share:.3})"
        ),
    );
}

#[test]
fn criterion_08_lower_bound_instances() {
    let alpha = 1.0;
    let c = 1.0 - (2.0f64 / 3.0).powf(alpha);
    let mut ok = true;
    let mut detail = Vec::new();
    for k in 0..4u8 {
        let l = LowerBoundLabeler::new(k, 0.01, alpha, 1.0).unwrap();
        let c1 = verify_condition1(&l, 2000).unwrap();
        let c3 = verify_condition3(&l.abstention_profile(), c, 2000);
        ok &= c1 && c3;
        detail.push(format!("k={k}:{c1}/{c3}"));
    }
    verdict(8, "lower-bound instances satisfy the conditions", ok, &detail.join(" "));
}

fn random_poly(rng: &mut impl Rng, degree: usize) -> Vec<f64> {
    (0..=degree).map(|_| rng.gen_range(-2.0..2.0)).collect()
}

fn eval_poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ci| acc * x + ci)
}

#[test]
fn criterion_09_interpolation_exactness() {
    let mut rng = stream_rng(0x5EED_0009);
    let mut worst_rel = 0.0f64;
    let mut worst_pou = 0.0f64;
    for gamma in 1..=3usize {
        for m in [gamma, 2 * gamma, 4 * gamma] {
            let grid = GridSpec::new(m, gamma, 2).unwrap();
            let coeffs = random_poly(&mut rng, gamma);
            let mut values = NodeValues::new();
            for node in grid.nodes() {
                let x = grid.node_point(&node);
                values.insert(node, eval_poly(&coeffs, x[0]));
            }
            for _ in 0..1000 {
                let x = [rng.gen::<f64>()];
                let cell = grid.cell_of(&x);
                let got = interpolate_cell_raw(&values, &grid, &cell, &x).unwrap();
                let want = eval_poly(&coeffs, x[0]);
                worst_rel = worst_rel.max((got - want).abs() / want.abs().max(1.0));
                let pou: f64 = grid
                    .cell_nodes(&cell)
                    .iter()
                    .map(|n| lagrange_basis(&grid, &cell, n, &x).unwrap())
                    .sum();
                worst_pou = worst_pou.max((pou - 1.0).abs());
            }
        }
    }
    verdict(
        9,
        "interpolation exactness",
        worst_rel <= 1e-9 && worst_pou <= 1e-9,
        &format!("max relative error {worst_rel:.2e}, max partition-of-unity error {worst_pou:.2e}"),
    );
}

#[test]
fn criterion_10_reconstruction_decay() {
    let g = SmoothBoundary::reference_quadratic();
    let ms = [4usize, 8, 16];
    let errs: Vec<f64> = ms
        .iter()
        .map(|&m| {
            let grid = GridSpec::new(m, 2, 2).unwrap();
            let pw = PiecewiseBoundary::from_function(grid, |x| g.eval(x)).unwrap();
            l1_distance(|x| pw.eval(x), |x| g.eval(x), 2, 256).unwrap()
        })
        .collect();
    let fit = abstain_core::harness::fit_loglog(
        &ms.iter().map(|&m| 1.0 / m as f64).collect::<Vec<_>>(),
        &errs,
    );
    // fit_loglog regresses against 1/M, so the decay slope in M is -slope.
    let (pass, slope) = match &fit {
        Ok(f) => (-f.slope <= -1.7, format!("{:.3}", -f.slope)),
        Err(e) => (false, format!("undefined ({e})")),
    };
    verdict(
        10,
        "reconstruction error decay in M",
        pass,
        &format!("L1 errors {errs:?} at M = {ms:?}; slope {slope} (<= -1.7)"),
    );
}

#[test]
fn criterion_11_boundary_end_to_end() {
    let cfg = "epsilons = 0.05\ndelta = 0.2\ntrials = 50\nseed = 17\ngamma = 2\nboundary = quadratic\n\
               labeler = constant\nlabeler.level = 0\nlabeler.noise_c = 1\nlabeler.beta = 0";
    let report = run(ExperimentKind::Boundary, cfg);
    let s = &report.per_epsilon[0];
    let grid = build_grid(0.05, 2, 2).unwrap();
    let worst = report.trials.iter().map(|t| t.error).fold(0.0, f64::max);
    verdict(
        11,
        "d = 2 boundary learning",
        s.success_rate >= 0.7,
        &format!(
            "{}/{} within L1 0.05 (>= 70%), M = {}, worst L1 {worst:.4}",
            s.successes, s.trials, grid.m
        ),
    );
}

#[test]
fn criterion_12_determinism() {
    let configs = [
        (ExperimentKind::Consistency, "trials = 20\nseed = 5\nlabeler = power\nlabeler.theta_star = uniform"),
        (
            ExperimentKind::Scaling,
            "epsilons = 0.1, 0.05, 0.02\ntrials = 5\nseed = 6\nlabeler = power\nlabeler.noise_c = 0\n\
             labeler.theta_star = uniform",
        ),
        (ExperimentKind::Boundary, "trials = 3\nseed = 7\nepsilons = 0.1"),
        (ExperimentKind::Calibration, "seed = 8\ncalibration.trials = 200\ncalibration.n_max = 500"),
    ];
    let mut identical = true;
    for (kind, cfg) in configs {
        let a = to_json_string(&run(kind, cfg).without_timestamp()).unwrap();
        let b = to_json_string(&run(kind, cfg).without_timestamp()).unwrap();
        identical &= a == b;
    }
    verdict(
        12,
        "determinism under a fixed root seed",
        identical,
        &format!("{} experiment kinds re-run byte-identically: {identical}", configs.len()),
    );
}
