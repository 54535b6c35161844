//! End-to-end acceptance run: one line per criterion, exercising the library
//! oracles directly and the experiment drivers at their documented scales.
//!
//! Three sub-checks are known to be out of reach at desk scale and are
//! asserted to fail (see the README's "known expected failures" section):
//! the LIL running-min band floor at the a.s. limit, the empirical-measure
//! comparison for the binary fragmentation example, and the infinite-mean
//! ergodic average threshold at log t = 40.

use pssmp::lamperti::{lamperti_inverse, PssmpPath};
use pssmp::limit_laws::{ml_moment, ml_sampler};
use pssmp::mc_stats::{EmpiricalDistribution, SeedPlan};
use pssmp::path_engine::{simulate_past_level, simulate_path, SubordinatorPath};
use pssmp::{JumpLaw, SubordinatorKind, SubordinatorSpec};
use pssmp_cli::config::{compound_poisson_config, stable_config, ExperimentConfig, Params};
use pssmp_cli::drivers;
use pssmp_cli::report::CommandOutcome;

struct Criterion {
    id: usize,
    name: &'static str,
    pass: bool,
    expected_fail: bool,
    detail: String,
}

struct Ledger {
    rows: Vec<Criterion>,
}

impl Ledger {
    fn record(&mut self, id: usize, name: &'static str, pass: bool, detail: String) {
        self.entry(id, name, pass, false, detail);
    }

    fn record_expected_fail(
        &mut self,
        id: usize,
        name: &'static str,
        pass: bool,
        detail: String,
    ) {
        self.entry(id, name, pass, true, detail);
    }

    fn entry(&mut self, id: usize, name: &'static str, pass: bool, expected: bool, detail: String) {
        let label = match (pass, expected) {
            (true, false) => "PASS",
            (false, true) => "FAIL (documented, expected)",
            (true, true) => "PASS (unexpected; was documented as unattainable)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:>2} {name:<38} {label}  [{detail}]");
        self.rows.push(Criterion { id, name, pass, expected_fail: expected, detail });
    }
}

fn check(outcome: &CommandOutcome, name: &str) -> (bool, String) {
    let item = outcome
        .checks
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("missing check {name}"));
    (item.pass, item.detail.clone())
}

fn checks_all(outcome: &CommandOutcome, names: &[&str]) -> (bool, String) {
    let picked: Vec<(bool, String)> = names.iter().map(|n| check(outcome, n)).collect();
    let pass = picked.iter().all(|(p, _)| *p);
    let detail =
        picked.iter().map(|(_, d)| d.as_str()).collect::<Vec<_>>().join("; ");
    (pass, detail)
}

fn gamma_config(shape: f64, rate: f64, alpha: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        spec: Some(
            SubordinatorSpec::new(SubordinatorKind::Gamma { shape, rate }).expect("valid spec"),
        ),
        alpha: Some(alpha),
        params: Params::default(),
        seed: Some(seed),
        out: None,
        format: None,
    }
}

/// Criterion 1: for xi = c t the transformed process is (1 + alpha c t)^{1/alpha}.
fn closed_form_drift(ledger: &mut Ledger) {
    let mut max_err: f64 = 0.0;
    for &c in &[0.5, 1.0, 2.0] {
        for &alpha in &[0.5, 1.0, 2.0] {
            let base = SubordinatorPath::new_jump_drift(c, vec![], vec![], 50.0).unwrap();
            let path = PssmpPath::new(base, alpha, 1.0).unwrap();
            for k in 1..=1000 {
                let t = 5.0 * k as f64 / 1000.0;
                let x = path.value_at(t).unwrap();
                let exact = (1.0 + alpha * c * t).powf(1.0 / alpha);
                max_err = max_err.max((x - exact).abs());
            }
        }
    }
    ledger.record(1, "closed_form_drift_oracle", max_err < 1e-9, format!("max |err| = {max_err:.2e}"));
}

/// Criterion 2: forward + event-level inversion round-trips 100 seeded paths.
fn round_trip_inversion(ledger: &mut Ledger) {
    let plan = SeedPlan::new(1001);
    let mut max_err: f64 = 0.0;
    for i in 0..100u64 {
        let mut rng = plan.rng(i);
        let drift = 0.05 + 0.01 * (i % 7) as f64;
        let spec = SubordinatorSpec::compound_poisson(1.0, JumpLaw::Exponential { rate: 1.0 })
            .unwrap()
            .with_drift(drift)
            .unwrap();
        let base = simulate_path(&spec, 10.0, None, &mut rng).unwrap();
        let alpha = 0.5 + (i % 4) as f64 * 0.5;
        let path = PssmpPath::new(base.clone(), alpha, 1.0).unwrap();
        let recovered = lamperti_inverse(&path.to_jump_samples().unwrap()).unwrap();
        let (
            SubordinatorPath::JumpDrift { drift: d1, jump_times: t1, jump_sizes: s1, .. },
            SubordinatorPath::JumpDrift { drift: d2, jump_times: t2, jump_sizes: s2, .. },
        ) = (&base, &recovered)
        else {
            panic!("expected jump-drift paths");
        };
        assert_eq!(t1.len(), t2.len());
        max_err = max_err.max((d1 - d2).abs());
        for (a, b) in t1.iter().zip(t2).chain(s1.iter().zip(s2)) {
            max_err = max_err.max((a - b).abs());
        }
    }
    ledger.record(2, "round_trip_inversion", max_err < 1e-9, format!("max |err| = {max_err:.2e}"));
}

/// Criterion 3: weak limit of the normalized log-position against the V law.
fn weak_limit_v(ledger: &mut Ledger) {
    let cfg = stable_config(0.5, 1.0, 1.0, 1);
    let outcome = drivers::cmd_limit_v(&cfg).unwrap();
    let (pass, detail) = checks_all(&outcome, &["ks_final", "pilot_ks_monotone"]);
    ledger.record(3, "weak_limit_v", pass, detail);
}

/// Criterion 4: age fraction at a fixed level is exactly Beta(1-beta, beta).
fn dynkin_lamperti_age(ledger: &mut Ledger) {
    let spec = SubordinatorSpec::stable(0.5, 1.0).unwrap();
    let plan = SeedPlan::new(1004);
    let mut rng = plan.rng(0);
    let mut ages = Vec::with_capacity(10_000);
    while ages.len() < 10_000 {
        let path = simulate_past_level(&spec, 1.0, Some(1e-3), &mut rng).unwrap();
        let rec = path.first_passage(1.0).unwrap();
        if rec.passed() {
            ages.push(rec.age);
        }
    }
    let emp = EmpiricalDistribution::from_samples(ages).unwrap();
    let ks = emp.ks_distance(|u| {
        (2.0 / std::f64::consts::PI) * u.clamp(0.0, 1.0).sqrt().asin()
    });
    ledger.record(4, "dynkin_lamperti_age", ks <= 0.02, format!("KS = {ks:.4}"));
}

/// Criterion 5: Darling-Kac clock moments against alpha^{-bn} n!/Gamma(1+nb).
fn darling_kac_moments(ledger: &mut Ledger) {
    let cfg = stable_config(0.5, 1.0, 1.0, 2);
    let outcome = drivers::cmd_darling_kac(&cfg).unwrap();
    let (pass, detail) = checks_all(&outcome, &["moment_1", "moment_2"]);
    ledger.record(5, "darling_kac_moments", pass, detail);
}

/// Criterion 6: Mittag-Leffler sampler moments at N = 1e6 within 4 sigma.
fn mittag_leffler_moments(ledger: &mut Ledger) {
    let plan = SeedPlan::new(1006);
    let n = 1_000_000usize;
    let mut worst: f64 = 0.0;
    for (bi, &beta) in [0.3, 0.5, 0.8].iter().enumerate() {
        let mut rng = plan.rng(bi as u64);
        let samples: Vec<f64> = (0..n).map(|_| ml_sampler(beta, &mut rng).unwrap()).collect();
        for k in 1..=3u32 {
            let est = pssmp::mc_stats::moment_estimate(&samples, k).unwrap();
            let target = ml_moment(beta, k).unwrap();
            worst = worst.max((est.value - target).abs() / est.stderr);
        }
    }
    ledger.record(6, "mittag_leffler_moments", worst <= 4.0, format!("worst z-score = {worst:.2}"));
}

/// Criterion 7: exponential-functional moments and the moment factorization
/// for the three reference subordinators.
fn exp_functional_moments(ledger: &mut Ledger, stable_outcome: &CommandOutcome) {
    let mut pass = true;
    let mut details = Vec::new();
    let gamma_outcome = drivers::cmd_expfun(&gamma_config(1.0, 1.0, 1.0, 7)).unwrap();
    let cp_outcome = drivers::cmd_expfun(&compound_poisson_config(
        1.0,
        JumpLaw::PointMass { location: std::f64::consts::LN_2 },
        1.0,
        7,
    ))
    .unwrap();
    for (label, outcome) in
        [("stable", stable_outcome), ("gamma", &gamma_outcome), ("cp", &cp_outcome)]
    {
        let (p, d) =
            checks_all(outcome, &["i_moment_1", "i_moment_2", "i_moment_3", "factorization"]);
        pass &= p;
        details.push(format!("{label}: {d}"));
    }
    ledger.record(7, "exp_functional_moments", pass, details.join(" | "));
}

/// Criterion 8: LIL running-min trend. The band floor sits at the a.s. limit,
/// which finite-horizon paths undershoot by a few percent, so the band
/// sub-check is a documented expected failure; the nonincreasing-tail
/// sub-check is asserted to pass.
fn lil_trend(ledger: &mut Ledger) {
    let cfg = stable_config(0.5, 1.0, 1.0, 3);
    let outcome = drivers::cmd_lil(&cfg).unwrap();
    let (band, band_detail) = check(&outcome, "final_running_min_in_band");
    let (tail, tail_detail) = check(&outcome, "running_min_nonincreasing_tail");
    ledger.record_expected_fail(8, "lil_running_min_band", band, band_detail);
    ledger.record(8, "lil_nonincreasing_tail", tail, tail_detail);
}

/// Criterion 9: upper-function integral test classifies t^2 / t^{1/2}.
fn integral_test_classifier(ledger: &mut Ledger) {
    let mut pass = true;
    let mut details = Vec::new();
    for power in [2.0, 0.5] {
        let mut cfg = stable_config(0.5, 1.0, 1.0, 9);
        cfg.params.power = Some(power);
        let outcome = drivers::cmd_integral_test(&cfg).unwrap();
        let (p, d) = checks_all(&outcome, &["matches_theory", "schedule_stable"]);
        pass &= p;
        details.push(format!("p={power}: {d}"));
    }
    ledger.record(9, "integral_test_classifier", pass, details.join(" | "));
}

/// Criterion 10: short-time law h(t) log X(t) ~ h(t) xi_t.
fn short_time_law(ledger: &mut Ledger) {
    let cfg = stable_config(0.5, 1.0, 1.0, 10);
    let outcome = drivers::cmd_short_time(&cfg).unwrap();
    let (pass, detail) = check(&outcome, "short_time_ks");
    ledger.record(10, "short_time_law", pass, detail);
}

/// Criterion 11: fragmentation tagged line matches the Lamperti build, and
/// mass is conserved, for both reference split laws.
fn fragmentation_correspondence(ledger: &mut Ledger) {
    let mut pass = true;
    let mut details = Vec::new();
    for (label, params) in [
        ("U=1/2", Params { split_u: Some(0.5), ..Params::default() }),
        (
            "pareto(0.4)",
            Params {
                split_neg_log: Some(JumpLaw::ParetoLogTail { beta: 0.4 }),
                ..Params::default()
            },
        ),
    ] {
        let cfg = ExperimentConfig {
            spec: None,
            alpha: Some(1.0),
            params,
            seed: Some(11),
            out: None,
            format: None,
        };
        let outcome = drivers::cmd_frag(&cfg).unwrap();
        let (p, d) = checks_all(&outcome, &["tagged_vs_lamperti_ks", "mass_conservation"]);
        pass &= p;
        details.push(format!("{label}: {d}"));
    }
    ledger.record(11, "fragmentation_correspondence", pass, details.join(" | "));
}

/// Criterion 12: empirical measure of the binary example against the shifted
/// V law. For any binary split law with finite dislocation rate the
/// size-biased tag has an exponentially decaying tail, so rho_t collapses to
/// a point mass and this comparison cannot succeed; documented expected fail.
fn fragmentation_empirical_measure(ledger: &mut Ledger) {
    let cfg = ExperimentConfig {
        spec: None,
        alpha: Some(1.0),
        params: Params {
            split_neg_log: Some(JumpLaw::ParetoLogTail { beta: 0.4 }),
            rho_log_t: Some(40.0),
            ..Params::default()
        },
        seed: Some(12),
        out: None,
        format: None,
    };
    let outcome = drivers::cmd_frag(&cfg).unwrap();
    let (pass, detail) = check(&outcome, "rho_vs_shifted_v_ks");
    ledger.record_expected_fail(12, "fragmentation_empirical_measure", pass, detail);
}

/// Criterion 13: log-scale ergodic averages. The finite-mean limit is
/// attainable; the infinite-mean < 0.05 threshold decays like
/// 1/sqrt(log t) and only crosses 0.05 near log t ~ 500, so it is a
/// documented expected failure at the stated horizon; the decreasing trend
/// is asserted instead.
fn ergodic_averages(ledger: &mut Ledger) {
    let finite = drivers::cmd_ergodic(&compound_poisson_config(
        1.0,
        JumpLaw::PointMass { location: std::f64::consts::LN_2 },
        1.0,
        13,
    ))
    .unwrap();
    let (p_fin, d_fin) = check(&finite, "ergodic_limit");
    ledger.record(13, "ergodic_finite_mean", p_fin, d_fin);

    let infinite = drivers::cmd_ergodic(&stable_config(0.5, 1.0, 1.0, 13)).unwrap();
    let (p_small, d_small) = check(&infinite, "null_recurrent_small");
    let (p_dec, d_dec) = check(&infinite, "null_recurrent_decreasing");
    ledger.record_expected_fail(13, "ergodic_infinite_mean_small", p_small, d_small);
    ledger.record(13, "ergodic_infinite_mean_decreasing", p_dec, d_dec);
}

/// Criterion 14: harmonic-mean left-tail diagnostic moves toward the
/// asymptotic over the reachable s range (noise-aware monotonicity).
fn left_tail_diagnostic(ledger: &mut Ledger, stable_outcome: &CommandOutcome) {
    let (pass, detail) = check(stable_outcome, "left_tail_toward_asymptotic");
    ledger.record(14, "left_tail_diagnostic", pass, detail);
}

#[test]
fn acceptance_criteria() {
    let mut ledger = Ledger { rows: Vec::new() };

    closed_form_drift(&mut ledger);
    round_trip_inversion(&mut ledger);
    weak_limit_v(&mut ledger);
    dynkin_lamperti_age(&mut ledger);
    darling_kac_moments(&mut ledger);
    mittag_leffler_moments(&mut ledger);
    let stable_expfun = drivers::cmd_expfun(&stable_config(0.5, 1.0, 1.0, 7)).unwrap();
    exp_functional_moments(&mut ledger, &stable_expfun);
    lil_trend(&mut ledger);
    integral_test_classifier(&mut ledger);
    short_time_law(&mut ledger);
    fragmentation_correspondence(&mut ledger);
    fragmentation_empirical_measure(&mut ledger);
    ergodic_averages(&mut ledger);
    left_tail_diagnostic(&mut ledger, &stable_expfun);

    let unexpected: Vec<String> = ledger
        .rows
        .iter()
        .filter(|c| !c.pass && !c.expected_fail)
        .map(|c| format!("criterion {} {}: {}", c.id, c.name, c.detail))
        .collect();
    assert!(unexpected.is_empty(), "unexpected failures:\n{}", unexpected.join("\n"));

    // The documented failures must actually fail: if one starts passing the
    // documentation (or an upward-biased estimator) needs a second look.
    let surprises: Vec<String> = ledger
        .rows
        .iter()
        .filter(|c| c.pass && c.expected_fail)
        .map(|c| format!("criterion {} {}: {}", c.id, c.name, c.detail))
        .collect();
    assert!(
        surprises.is_empty(),
        "documented-unattainable checks passed, revisit the notes:\n{}",
        surprises.join("\n")
    );
}
