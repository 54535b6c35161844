//! One experiment driver per limit theorem. Each driver resolves defaults
//! from the config, runs replicates in parallel over a SeedPlan, and packs a
//! uniform report plus a sample-level CSV table and itemized checks.

use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};
use statrs::function::gamma::gamma;

use pssmp::exp_functional::{
    i_moment, left_tail_asymptotic, r_phi_moment, sample_i, LeftTailTarget,
};
use pssmp::fragmentation::{
    sample_rho_atoms, simulate, tagged_fragment, BinarySplitLaw, FragmentationTree,
    SimulateConfig, TagMode,
};
use pssmp::lamperti::PssmpPath;
use pssmp::limit_laws::{integral_test, v_cdf, IntegralTestSchedule, IntegralVerdict};
use pssmp::mc_stats::{ks_two_sample, moment_estimate, EmpiricalDistribution, SeedPlan};
use pssmp::path_engine::simulate_past_level;
use pssmp::subordinator_models::SubordinatorSpec;

use crate::config::ExperimentConfig;
use crate::report::{verdict, CheckItem, CommandOutcome, Report};
use crate::{CliError, CommandName};

/// Extra xi-level margin past log t / alpha, so that clock queries at t never
/// run off the simulated horizon.
const LEVEL_MARGIN: f64 = 10.0;

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// X path started at 1 whose clock certifiably covers [0, e^{log_t}].
fn pssmp_path<R: rand::Rng + ?Sized>(
    spec: &SubordinatorSpec,
    alpha: f64,
    log_t: f64,
    step: Option<f64>,
    rng: &mut R,
) -> pssmp::Result<PssmpPath> {
    let base = simulate_past_level(spec, (log_t + LEVEL_MARGIN) / alpha, step, rng)?;
    PssmpPath::new(base, alpha, 1.0)
}

/// Like `pssmp_path`, but with grid paths read as piecewise constant. Used
/// for statistics built on the value of xi at a clock crossing (the V limit
/// and the occupation clock): a crossing that rides a linearly interpolated
/// cell reads xi near b + log(slope) instead of the post-jump overshoot.
fn pssmp_step_path<R: rand::Rng + ?Sized>(
    spec: &SubordinatorSpec,
    alpha: f64,
    log_t: f64,
    step: Option<f64>,
    rng: &mut R,
) -> pssmp::Result<PssmpPath> {
    let base = simulate_past_level(spec, (log_t + LEVEL_MARGIN) / alpha, step, rng)?
        .piecewise_constant()?;
    PssmpPath::new(base, alpha, 1.0)
}

fn finish(
    command: CommandName,
    cfg: &ExperimentConfig,
    theoretical: Value,
    empirical: Value,
    stderr_or_ks: Value,
    checks: Vec<CheckItem>,
    csv: String,
    started: Instant,
) -> CommandOutcome {
    let report = Report {
        command: command.to_string(),
        config_echo: cfg.echo(),
        theoretical,
        empirical,
        stderr_or_ks,
        verdict: verdict(&checks),
        runtime_s: started.elapsed().as_secs_f64(),
    };
    CommandOutcome { report, csv, checks }
}

pub fn run_command(
    command: CommandName,
    cfg: &ExperimentConfig,
) -> Result<CommandOutcome, CliError> {
    match command {
        CommandName::LimitV => cmd_limit_v(cfg),
        CommandName::DarlingKac => cmd_darling_kac(cfg),
        CommandName::Lil => cmd_lil(cfg),
        CommandName::Expfun => cmd_expfun(cfg),
        CommandName::Frag => cmd_frag(cfg),
        CommandName::IntegralTest => cmd_integral_test(cfg),
        CommandName::ShortTime => cmd_short_time(cfg),
        CommandName::Ergodic => cmd_ergodic(cfg),
    }
}

/// Weak limit of log(X(T)/T^{1/alpha})/log T (the V law), with a pilot over
/// increasing horizons so the O(1/log T) bias trend is part of the report.
pub fn cmd_limit_v(cfg: &ExperimentConfig) -> Result<CommandOutcome, CliError> {
    let started = Instant::now();
    let spec = cfg.spec()?.clone();
    let alpha = cfg.alpha()?;
    let beta = spec.rv_index();
    let n = cfg.params.n.unwrap_or(5000);
    let final_log_t = cfg.params.log_t.unwrap_or(50.0);
    let tol = cfg.params.tolerance.unwrap_or(0.06);
    let step = cfg.params.grid_step;
    let plan = SeedPlan::new(cfg.seed());

    let mut levels = cfg.params.log_t_pilot.clone().unwrap_or_else(|| vec![20.0, 35.0]);
    levels.push(final_log_t);
    levels.sort_by(|a, b| a.total_cmp(b));
    levels.dedup();
    if levels.iter().any(|&l| !(l > 1.0)) {
        return Err(CliError::Config("horizons must satisfy log t > 1".into()));
    }

    let degenerate = (beta - 1.0).abs() < 1e-12;
    let mut level_rows = Vec::new();
    let mut ks_by_level = Vec::new();
    let mut final_stats = Vec::new();
    for (li, &log_t) in levels.iter().enumerate() {
        let stats: Vec<f64> = (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = plan.rng(((li as u64) << 32) | i);
                let path = pssmp_step_path(&spec, alpha, log_t, step, &mut rng)?;
                // The entrance-law statistic log(x X(t x^{-a})) / log(1/x)
                // realized on a path started at 1: by self-similarity with
                // x = exp(-log T / (2a)), the normalizer is log T / (2a).
                Ok(2.0 * alpha * (path.log_value_at(log_t.exp())? - log_t / alpha) / log_t)
            })
            .collect::<pssmp::Result<Vec<f64>>>()?;
        if degenerate {
            let near = stats.iter().filter(|s| s.abs() <= 0.1).count() as f64 / n as f64;
            level_rows.push(json!({"log_t": log_t, "near_zero_fraction": near}));
        } else {
            let cdf = |v: f64| if v <= 0.0 { 0.0 } else { v_cdf(alpha, beta, v).unwrap_or(1.0) };
            let ks = EmpiricalDistribution::from_samples(stats.clone())
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .ks_distance(cdf);
            ks_by_level.push(ks);
            level_rows.push(json!({"log_t": log_t, "ks": ks}));
        }
        if li + 1 == levels.len() {
            final_stats = stats;
        }
    }

    let mut checks = Vec::new();
    let mut csv = String::from("v,empirical_cdf,analytic_cdf\n");
    let mut table = Vec::new();
    if degenerate {
        let near = final_stats.iter().filter(|s| s.abs() <= 0.1).count() as f64 / n as f64;
        checks.push(CheckItem::new(
            "degenerate_concentration",
            near >= 0.9,
            format!("V = 0 case: fraction of |statistic| <= 0.1 is {near:.3}"),
        ));
        let mut sorted = final_stats.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        for q in [0.01, 0.25, 0.5, 0.75, 0.99] {
            let v = sorted[((q * (n - 1) as f64).round()) as usize];
            table.push(json!({"quantile": q, "value": v}));
            csv.push_str(&format!("{v},{q},\n"));
        }
    } else {
        let ks_final = *ks_by_level.last().expect("at least one level");
        checks.push(CheckItem::new(
            "ks_final",
            ks_final <= tol,
            format!("KS {ks_final:.4} vs tolerance {tol} at log T = {final_log_t}"),
        ));
        let monotone = ks_by_level.windows(2).all(|w| w[1] < w[0]);
        checks.push(CheckItem::new(
            "pilot_ks_monotone",
            monotone,
            format!(
                "KS across log T {:?}: {:?}",
                levels,
                ks_by_level.iter().map(|k| (k * 1e4).round() / 1e4).collect::<Vec<_>>()
            ),
        ));
        let mut sorted = final_stats.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        for k in 1..100 {
            let p = k as f64 / 100.0;
            let v = sorted[((p * (n - 1) as f64).round()) as usize];
            let a = if v <= 0.0 { 0.0 } else { v_cdf(alpha, beta, v).unwrap_or(1.0) };
            table.push(json!({"v": v, "empirical": p, "analytic": a}));
            csv.push_str(&format!("{v},{p},{a}\n"));
        }
    }

    Ok(finish(
        CommandName::LimitV,
        cfg,
        json!({"law": "V", "alpha": alpha, "beta": beta, "degenerate": degenerate}),
        json!({"levels": level_rows, "cdf_table": table, "n": n}),
        json!({"ks": ks_by_level.last()}),
        checks,
        csv,
        started,
    ))
}

/// Darling-Kac moments of the normalized occupation clock
/// phi(1/log T) * int_0^T X_s^{-alpha} ds.
pub fn cmd_darling_kac(cfg: &ExperimentConfig) -> Result<CommandOutcome, CliError> {
    let started = Instant::now();
    let spec = cfg.spec()?.clone();
    let alpha = cfg.alpha()?;
    let beta = spec.rv_index();
    let n = cfg.params.n.unwrap_or(5000);
    let log_t = cfg.params.log_t.unwrap_or(50.0);
    let n_max = cfg.params.n_max.unwrap_or(2);
    let tol = cfg.params.tolerance.unwrap_or(0.15);
    let step = cfg.params.grid_step;
    let plan = SeedPlan::new(cfg.seed());

    let norm = spec.phi(1.0 / log_t).map_err(|e| CliError::Numeric(e.to_string()))?;
    let stats: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = plan.rng(i);
            let path = pssmp_step_path(&spec, alpha, log_t, step, &mut rng)?;
            Ok(norm * path.clock_integral(log_t.exp())?)
        })
        .collect::<pssmp::Result<Vec<f64>>>()?;

    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut csv = String::from("n,theoretical,empirical,stderr,rel_err\n");
    for k in 1..=n_max {
        let theory = alpha.powf(-(beta * k as f64)) * factorial(k) / gamma(1.0 + k as f64 * beta);
        let est = moment_estimate(&stats, k).map_err(|e| CliError::Numeric(e.to_string()))?;
        let rel = (est.value / theory - 1.0).abs();
        checks.push(CheckItem::new(
            &format!("moment_{k}"),
            rel <= tol,
            format!("n={k}: empirical {:.4} vs {theory:.4} (rel err {rel:.3})", est.value),
        ));
        csv.push_str(&format!("{k},{theory},{},{},{rel}\n", est.value, est.stderr));
        rows.push(json!({
            "n": k, "theoretical": theory, "empirical": est.value,
            "stderr": est.stderr, "rel_err": rel,
        }));
    }

    Ok(finish(
        CommandName::DarlingKac,
        cfg,
        json!({"law": "Mittag-Leffler", "beta": beta, "alpha": alpha}),
        json!({"moments": rows, "n_paths": n, "log_t": log_t}),
        json!({"rel_errs": rows.iter().map(|r| r["rel_err"].clone()).collect::<Vec<_>>()}),
        checks,
        csv,
        started,
    ))
}

/// Iterated-logarithm trend: running min of log X(t)/log t over doubling
/// times, plus the power-scaling diagnostic that X(t) is not of order t^a
/// for any single a.
pub fn cmd_lil(cfg: &ExperimentConfig) -> Result<CommandOutcome, CliError> {
    let started = Instant::now();
    let spec = cfg.spec()?.clone();
    let alpha = cfg.alpha()?;
    let beta = spec.rv_index();
    let seeds = cfg.params.seeds.unwrap_or(20);
    let log_t_max = cfg.params.log_t.unwrap_or(60.0);
    let step = cfg.params.grid_step;
    let plan = SeedPlan::new(cfg.seed());

    let t0 = std::f64::consts::E.powi(2);
    let mut times = Vec::new();
    let mut t = t0;
    while t.ln() <= log_t_max {
        times.push(t);
        t *= 2.0;
    }
    if times.len() < 10 {
        return Err(CliError::Config("log_t must allow at least 10 doubling times".into()));
    }

    // Degeneracy diagnostic: x^{1+c} X(x^{-a}) splits to {0, inf} with
    // P(inf) = P(V > c). On a path started at 1 and read at clock time T
    // with x = exp(-log T / (2a)), the log of that quantity is
    // log X(T) - (c+2) log T / (2a), so its sign frequency across seeds
    // follows the V law and its magnitude escapes every compact set.
    let c_low = -0.5;
    let c_mid = 1.0;

    struct SeedTrace {
        ratios: Vec<f64>,
        running_min: Vec<f64>,
        final_log_x: f64,
    }
    let traces: Vec<SeedTrace> = (0..seeds as u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = plan.rng(s);
            let path = pssmp_step_path(&spec, alpha, log_t_max, step, &mut rng)?;
            let mut ratios = Vec::with_capacity(times.len());
            let mut running_min = Vec::with_capacity(times.len());
            let mut min = f64::INFINITY;
            let mut final_log_x = 0.0;
            for &tk in &times {
                let lx = path.log_value_at(tk)?;
                let r = lx / tk.ln();
                min = min.min(r);
                ratios.push(r);
                running_min.push(min);
                final_log_x = lx;
            }
            Ok(SeedTrace { ratios, running_min, final_log_x })
        })
        .collect::<pssmp::Result<Vec<_>>>()?;

    let band = (1.0 / alpha, 1.5 / alpha);
    let finals: Vec<f64> = traces.iter().map(|t| *t.running_min.last().unwrap()).collect();
    let in_band = finals.iter().filter(|&&m| m >= band.0 && m <= band.1).count();
    let nonincreasing = traces
        .iter()
        .filter(|t| {
            let m = &t.running_min;
            m[m.len() - 5..].windows(2).all(|w| w[1] <= w[0])
        })
        .count();
    let t_last = times.last().expect("nonempty").ln();
    let margin = 0.05 * t_last;
    let degeneracy = |c: f64| -> Result<(usize, usize, f64), CliError> {
        let vals: Vec<f64> =
            traces.iter().map(|t| t.final_log_x - (c + 2.0) * t_last / (2.0 * alpha)).collect();
        let escaped = vals.iter().filter(|v| v.abs() > margin).count();
        let positive = vals.iter().filter(|v| **v > 0.0).count();
        let p_plus = if c <= 0.0 {
            1.0
        } else if (beta - 1.0).abs() < 1e-12 {
            0.0
        } else {
            1.0 - v_cdf(alpha, beta, c)?
        };
        Ok((escaped, positive, p_plus))
    };
    let (esc_low, pos_low, p_low) = degeneracy(c_low)?;
    let (esc_mid, pos_mid, p_mid) = degeneracy(c_mid)?;

    let mut checks = Vec::new();
    checks.push(CheckItem::new(
        "final_running_min_in_band",
        in_band as f64 >= 0.9 * seeds as f64,
        format!("{in_band}/{seeds} seeds end in [{:.2}, {:.2}]", band.0, band.1),
    ));
    checks.push(CheckItem::new(
        "running_min_nonincreasing_tail",
        nonincreasing as f64 >= 0.75 * seeds as f64,
        format!("{nonincreasing}/{seeds} seeds nonincreasing over last 5 observations"),
    ));
    let n = seeds as f64;
    let split_ok = |pos: usize, p: f64| -> bool {
        // Binomial 3-sigma band around the predicted sign frequency,
        // padded by half a count for discreteness.
        (pos as f64 - n * p).abs() <= 3.0 * (n * p * (1.0 - p)).sqrt() + 0.5
    };
    checks.push(CheckItem::new(
        "power_scaling_escapes",
        esc_low.min(esc_mid) as f64 >= 0.9 * n,
        format!(
            "|log(x^(1+c) X)| > {margin:.1} at the horizon for {esc_low}/{seeds} (c={c_low}) \
             and {esc_mid}/{seeds} (c={c_mid}) seeds"
        ),
    ));
    checks.push(CheckItem::new(
        "power_scaling_splits",
        split_ok(pos_low, p_low) && split_ok(pos_mid, p_mid),
        format!(
            "sign frequencies {pos_low}/{seeds} (c={c_low}, P={p_low:.3}) and \
             {pos_mid}/{seeds} (c={c_mid}, P={p_mid:.3})"
        ),
    ));

    let mut csv = String::from("seed,log_t,ratio,running_min\n");
    for (s, tr) in traces.iter().enumerate() {
        for (k, &tk) in times.iter().enumerate() {
            csv.push_str(&format!("{s},{},{},{}\n", tk.ln(), tr.ratios[k], tr.running_min[k]));
        }
    }

    Ok(finish(
        CommandName::Lil,
        cfg,
        json!({"liminf": 1.0 / alpha, "band": [band.0, band.1],
               "split_p_plus": {"c_low": p_low, "c_mid": p_mid}}),
        json!({
            "final_running_min": finals,
            "in_band": in_band,
            "nonincreasing_tail": nonincreasing,
            "power_split": {
                "c_low": c_low, "escaped_low": esc_low, "positive_low": pos_low,
                "c_mid": c_mid, "escaped_mid": esc_mid, "positive_mid": pos_mid,
            },
            "seeds": seeds,
        }),
        json!({"band_fraction": in_band as f64 / seeds as f64}),
        checks,
        csv,
        started,
    ))
}

/// Exponential-functional moments, the Bertoin-Yor factorization, and the
/// small-s harmonic-mean left-tail diagnostic.
pub fn cmd_expfun(cfg: &ExperimentConfig) -> Result<CommandOutcome, CliError> {
    let started = Instant::now();
    let spec = cfg.spec()?.clone();
    let alpha = cfg.alpha()?;
    let n = cfg.params.n.unwrap_or(100_000);
    let n_max = cfg.params.n_max.unwrap_or(3);
    let tol = cfg.params.tolerance.unwrap_or(0.05);
    let plan = SeedPlan::new(cfg.seed());

    let draws: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = plan.rng(i);
            Ok(sample_i(&spec, alpha, 1e-10, &mut rng)?.value)
        })
        .collect::<pssmp::Result<Vec<f64>>>()?;

    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut csv = String::from("section,x,theoretical,empirical,stderr\n");
    for k in 1..=n_max {
        let theory = i_moment(&spec, alpha, k).map_err(|e| CliError::Numeric(e.to_string()))?;
        let est = moment_estimate(&draws, k).map_err(|e| CliError::Numeric(e.to_string()))?;
        let rel = (est.value / theory - 1.0).abs();
        checks.push(CheckItem::new(
            &format!("i_moment_{k}"),
            rel <= tol,
            format!("E(I^{k}): empirical {:.5} vs {theory:.5} (rel err {rel:.4})", est.value),
        ));
        csv.push_str(&format!("moment,{k},{theory},{},{}\n", est.value, est.stderr));
        rows.push(json!({
            "n": k, "theoretical": theory, "empirical": est.value,
            "stderr": est.stderr, "rel_err": rel,
        }));
    }

    // Factorization E(R^n) E(I^n) = n! is an algebraic identity of the two
    // closed forms; checked to rounding error.
    let mut max_dev: f64 = 0.0;
    for k in 1..=10u32 {
        let r = r_phi_moment(&spec, alpha, k).map_err(|e| CliError::Numeric(e.to_string()))?;
        let i = i_moment(&spec, alpha, k).map_err(|e| CliError::Numeric(e.to_string()))?;
        max_dev = max_dev.max((r * i / factorial(k) - 1.0).abs());
    }
    checks.push(CheckItem::new(
        "factorization",
        max_dev <= 1e-10,
        format!("max |E(R^n)E(I^n)/n! - 1| = {max_dev:.2e} over n <= 10"),
    ));

    // Left-tail diagnostic: E(1_{I>s}/I) against its slowly diverging
    // asymptotic. The default grid stops at e^{-6}: below ~1e-4 the sampled
    // left tail of I is dominated by within-cell interpolation of a single
    // huge path rise and no longer follows the true law. The convergence is
    // O(1/log(1/s)), the same size as Monte Carlo noise at desk scale, so
    // monotonicity of the log-ratio is asserted up to three standard errors;
    // a decisive move away from the asymptotic still fails.
    let mut tail_rows = Vec::new();
    if spec.theta_is_laplace_exponent() {
        let s_grid =
            cfg.params.s_grid.clone().unwrap_or_else(|| vec![(-3.0f64).exp(),
                (-4.5f64).exp(), (-6.0f64).exp()]);
        let mut log_ratios = Vec::new();
        let mut log_ratio_ses = Vec::new();
        for &s in &s_grid {
            let terms: Vec<f64> =
                draws.iter().map(|&v| if v > s { 1.0 / v } else { 0.0 }).collect();
            let est = moment_estimate(&terms, 1).map_err(|e| CliError::Numeric(e.to_string()))?;
            let emp = est.value;
            let asym = left_tail_asymptotic(&spec, alpha, s, LeftTailTarget::IPhi)
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .harmonic_estimate;
            let lr = (emp / asym).ln();
            let lr_se = est.stderr / emp;
            log_ratios.push(lr);
            log_ratio_ses.push(lr_se);
            csv.push_str(&format!("left_tail,{s},{asym},{emp},{}\n", est.stderr));
            tail_rows.push(json!({
                "s": s, "asymptotic": asym, "empirical": emp,
                "log_ratio": lr, "log_ratio_se": lr_se,
            }));
        }
        let toward = log_ratios
            .windows(2)
            .zip(log_ratio_ses.windows(2))
            .all(|(lr, se)| lr[1] >= lr[0] - 3.0 * (se[0] * se[0] + se[1] * se[1]).sqrt());
        checks.push(CheckItem::new(
            "left_tail_toward_asymptotic",
            toward,
            format!(
                "log(empirical/asymptotic) over decreasing s: {:?} (se {:?})",
                log_ratios.iter().map(|r| (r * 1e3).round() / 1e3).collect::<Vec<_>>(),
                log_ratio_ses.iter().map(|r| (r * 1e3).round() / 1e3).collect::<Vec<_>>()
            ),
        ));
    }

    Ok(finish(
        CommandName::Expfun,
        cfg,
        json!({"moments": "n!/prod phi(alpha k)", "factorization": "E(R^n)E(I^n) = n!"}),
        json!({"moments": rows, "left_tail": tail_rows, "n_samples": n}),
        json!({"factorization_max_dev": max_dev}),
        checks,
        csv,
        started,
    ))
}

fn split_law_from(cfg: &ExperimentConfig) -> Result<BinarySplitLaw, CliError> {
    match (&cfg.params.split_u, &cfg.params.split_neg_log) {
        (Some(_), Some(_)) => {
            Err(CliError::Config("give split_u or split_neg_log, not both".into()))
        }
        (Some(u), None) => {
            BinarySplitLaw::deterministic(*u).map_err(|e| CliError::Config(e.to_string()))
        }
        (None, Some(law)) => BinarySplitLaw::from_neg_log(law.clone())
            .map_err(|e| CliError::Config(e.to_string())),
        (None, None) => Err(CliError::Config("frag needs split_u or split_neg_log".into())),
    }
}

/// Fragmentation correspondence: the tagged line against the directly built
/// Lamperti process, mass conservation, and (optionally) the empirical
/// measure rho_t against the shifted V law.
pub fn cmd_frag(cfg: &ExperimentConfig) -> Result<CommandOutcome, CliError> {
    let started = Instant::now();
    let alpha = cfg.alpha()?;
    let law = split_law_from(cfg)?;
    let log_t = cfg.params.log_t.unwrap_or(10.0);
    let t = log_t.exp();
    let n = cfg.params.n.unwrap_or(10_000);
    let tol = cfg.params.tolerance.unwrap_or(0.03);
    let plan = SeedPlan::new(cfg.seed());

    // -log l_t for the left-most line has the law of log X(t) when X is the
    // Lamperti transform of the compound Poisson process with unit rate and
    // jump law -log U.
    let tagged: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = plan.rng(i);
            let trace = tagged_fragment(alpha, &law, t, TagMode::LeftMost, &mut rng)?;
            Ok(-trace.log_size_at(t)?)
        })
        .collect::<pssmp::Result<Vec<f64>>>()?;
    let spec = SubordinatorSpec::compound_poisson(1.0, law.neg_log_law().clone())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let lamperti: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = plan.rng((1 << 40) | i);
            let path = pssmp_path(&spec, alpha, log_t, None, &mut rng)?;
            path.log_value_at(t)
        })
        .collect::<pssmp::Result<Vec<f64>>>()?;
    let ks = ks_two_sample(&tagged, &lamperti).map_err(|e| CliError::Numeric(e.to_string()))?;

    let sim_config = SimulateConfig {
        snapshot_times: vec![0.25 * t, 0.5 * t, 0.75 * t, t],
        ..SimulateConfig::new(t)
    };
    let mut rng = plan.rng(1 << 41);
    let snaps = simulate(alpha, &law, &sim_config, &mut rng)
        .map_err(|e| CliError::Numeric(e.to_string()))?;
    let mass_dev = snaps
        .iter()
        .map(|s| (s.total_mass() - 1.0).abs())
        .fold(0.0f64, f64::max);

    let mut checks = vec![
        CheckItem::new(
            "tagged_vs_lamperti_ks",
            ks <= tol,
            format!("two-sample KS {ks:.4} vs tolerance {tol} at t = e^{log_t}"),
        ),
        CheckItem::new(
            "mass_conservation",
            mass_dev <= 1e-12,
            format!("max |total mass - 1| = {mass_dev:.2e} over {} snapshots", snaps.len()),
        ),
    ];

    // Optional rho_t section: seed-averaged weighted KS against the law of
    // -1/alpha - V. Size-biased draws are equal-weight atoms of rho_t, so
    // the weighted KS is the plain KS of the walk sample.
    let mut rho_section = json!(null);
    if let Some(rho_log_t) = cfg.params.rho_log_t {
        let rho_beta = cfg.params.rho_beta.unwrap_or(0.4);
        let seeds = cfg.params.seeds.unwrap_or(50);
        let walks = cfg.params.rho_walks.unwrap_or(2000);
        let t_rho = rho_log_t.exp();
        let target = move |w: f64| {
            let v = -1.0 / alpha - w;
            if v <= 0.0 {
                1.0
            } else {
                1.0 - v_cdf(alpha, rho_beta, v).unwrap_or(0.0)
            }
        };
        let ks_per_seed: Vec<f64> = (0..seeds as u64)
            .into_par_iter()
            .map(|s| {
                let tree_seed =
                    cfg.seed().wrapping_mul(6364136223846793005).wrapping_add(7000 + s);
                let tree = FragmentationTree::new(alpha, law.clone(), tree_seed)?;
                let mut rng = plan.rng((1 << 42) | s);
                let atoms = sample_rho_atoms(&tree, t_rho, walks, &mut rng)?;
                Ok(EmpiricalDistribution::from_samples(atoms)?.ks_distance(target))
            })
            .collect::<pssmp::Result<Vec<f64>>>()?;
        let mean_ks = ks_per_seed.iter().sum::<f64>() / seeds as f64;
        let rho_tol = cfg.params.tolerance.unwrap_or(0.1);
        checks.push(CheckItem::new(
            "rho_vs_shifted_v_ks",
            mean_ks <= rho_tol,
            format!(
                "seed-averaged KS {mean_ks:.4} vs tolerance {rho_tol} \
                 against -1/alpha - V(beta={rho_beta}) at log t = {rho_log_t}"
            ),
        ));
        rho_section = json!({
            "log_t": rho_log_t, "beta": rho_beta, "seeds": seeds, "walks": walks,
            "mean_ks": mean_ks, "ks_per_seed": ks_per_seed,
        });
    }

    let mut csv = String::from("source,value\n");
    for v in &tagged {
        csv.push_str(&format!("tagged,{v}\n"));
    }
    for v in &lamperti {
        csv.push_str(&format!("lamperti,{v}\n"));
    }

    Ok(finish(
        CommandName::Frag,
        cfg,
        json!({"correspondence": "-log l_t =law log X(t)", "mass": 1.0}),
        json!({"n": n, "log_t": log_t, "mass_dev": mass_dev, "rho": rho_section}),
        json!({"ks": ks}),
        checks,
        csv,
        started,
    ))
}

/// Upper-function classifier for f(t) = t^p, re-run on a doubled schedule to
/// confirm the verdict is schedule-stable.
pub fn cmd_integral_test(cfg: &ExperimentConfig) -> Result<CommandOutcome, CliError> {
    let started = Instant::now();
    let spec = cfg.spec()?.clone();
    let beta = spec.rv_index();
    let p = cfg.params.power.unwrap_or(2.0);
    if !(p > 0.0) {
        return Err(CliError::Config("power must be positive".into()));
    }

    let sched = IntegralTestSchedule::default();
    let doubled = IntegralTestSchedule {
        t0: sched.t0,
        doublings: sched.doublings * 2,
        nodes_per_doubling: sched.nodes_per_doubling * 2,
    };
    let f = |t: f64| t.powf(p);
    let r1 = integral_test(&spec, f, sched).map_err(|e| CliError::Numeric(e.to_string()))?;
    let r2 = integral_test(&spec, f, doubled).map_err(|e| CliError::Numeric(e.to_string()))?;

    // g(t) grows like t^{1/beta} up to slowly varying factors, so the
    // integrand phi(g^{-p}) ~ g^{-p beta} ~ t^{-p}: the boundary is p = 1,
    // where only the slowly varying factors decide.
    let expected = if p > 1.0 {
        Some(IntegralVerdict::Converges)
    } else if p < 1.0 {
        Some(IntegralVerdict::Diverges)
    } else {
        None
    };

    let mut checks = vec![CheckItem::new(
        "schedule_stable",
        r1.verdict == r2.verdict,
        format!("default {:?}, doubled schedule {:?}", r1.verdict, r2.verdict),
    )];
    if let Some(exp) = expected {
        checks.push(CheckItem::new(
            "matches_theory",
            r1.verdict == exp,
            format!("verdict {:?}, theory {:?} (p = {p})", r1.verdict, exp),
        ));
    }

    let mut csv = String::from("doubling,partial_integral,fitted_exponent\n");
    for (k, (pi, fe)) in r1.partial_integrals.iter().zip(&r1.fitted_exponents).enumerate() {
        csv.push_str(&format!("{k},{pi},{fe}\n"));
    }

    Ok(finish(
        CommandName::IntegralTest,
        cfg,
        json!({"expected": expected, "power": p, "beta": beta}),
        json!({"verdict": r1.verdict, "doubled_verdict": r2.verdict,
               "fitted_exponents_tail": r1.fitted_exponents.iter().rev().take(5).collect::<Vec<_>>()}),
        json!({"verdict": r1.verdict}),
        checks,
        csv,
        started,
    ))
}

/// Short-time law: h(t) log X(t) against the directly simulated h(t) xi_t.
pub fn cmd_short_time(cfg: &ExperimentConfig) -> Result<CommandOutcome, CliError> {
    let started = Instant::now();
    let spec = cfg.spec()?.clone();
    let alpha = cfg.alpha()?;
    let t_small = cfg.params.t_small.unwrap_or(1e-6);
    let n = cfg.params.n.unwrap_or(10_000);
    let tol = cfg.params.tolerance.unwrap_or(0.03);
    let plan = SeedPlan::new(cfg.seed());

    let transformed: Vec<f64> = {
        let mut rng = plan.rng(0);
        pssmp::lamperti::short_time_samples(&spec, alpha, t_small, n, &mut rng)
            .map_err(|e| CliError::Numeric(e.to_string()))?
    };
    let h = spec.phi_inverse(1.0 / t_small).map_err(|e| CliError::Numeric(e.to_string()))?;
    let direct: Vec<f64> = {
        let mut rng = plan.rng(1);
        (0..n).map(|_| h * spec.sample_increment(t_small, &mut rng)).collect()
    };
    let ks = ks_two_sample(&transformed, &direct).map_err(|e| CliError::Numeric(e.to_string()))?;

    let checks = vec![CheckItem::new(
        "short_time_ks",
        ks <= tol,
        format!("two-sample KS {ks:.4} vs tolerance {tol} at t = {t_small:.1e}"),
    )];

    let mut csv = String::from("source,value\n");
    for v in &transformed {
        csv.push_str(&format!("transformed,{v}\n"));
    }
    for v in &direct {
        csv.push_str(&format!("direct,{v}\n"));
    }

    Ok(finish(
        CommandName::ShortTime,
        cfg,
        json!({"law": "h(t) xi_t with h = phi_inverse(1/t)", "h": h}),
        json!({"n": n, "t_small": t_small}),
        json!({"ks": ks}),
        checks,
        csv,
        started,
    ))
}

/// Log-scale ergodic average of f(x) = x^{-alpha} along the path: converges
/// to 1/(alpha m) for finite-mean subordinators and to 0 otherwise.
pub fn cmd_ergodic(cfg: &ExperimentConfig) -> Result<CommandOutcome, CliError> {
    let started = Instant::now();
    let spec = cfg.spec()?.clone();
    let alpha = cfg.alpha()?;
    let log_t = cfg.params.log_t.unwrap_or(40.0);
    let n_paths = cfg.params.n.unwrap_or(10);
    let step = cfg.params.grid_step;
    let plan = SeedPlan::new(cfg.seed());

    let ln10 = std::f64::consts::LN_10;
    let points = [log_t - 2.0 * ln10, log_t - ln10, log_t];
    let f = |x: f64| x.powf(-alpha);
    let per_path: Vec<[f64; 3]> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = plan.rng(i);
            let path = pssmp_path(&spec, alpha, log_t, step, &mut rng)?;
            let mut out = [0.0; 3];
            for (j, &lt) in points.iter().enumerate() {
                out[j] = path.ergodic_average(f, lt.exp(), 1.0)?;
            }
            Ok(out)
        })
        .collect::<pssmp::Result<Vec<_>>>()?;
    let means: Vec<f64> = (0..3)
        .map(|j| per_path.iter().map(|p| p[j]).sum::<f64>() / n_paths as f64)
        .collect();

    let m = spec.mean();
    let finite = m.is_finite();
    let mut checks = Vec::new();
    let theory = if finite { 1.0 / (alpha * m) } else { 0.0 };
    if finite {
        let tol = cfg.params.tolerance.unwrap_or(0.10);
        let rel = (means[2] / theory - 1.0).abs();
        checks.push(CheckItem::new(
            "ergodic_limit",
            rel <= tol,
            format!(
                "ensemble average {:.4} vs 1/(alpha m) = {theory:.4} (rel err {rel:.3}, {n_paths} paths)",
                means[2]
            ),
        ));
    } else {
        let cap = cfg.params.tolerance.unwrap_or(0.05);
        checks.push(CheckItem::new(
            "null_recurrent_small",
            means[2] < cap,
            format!("average {:.4} vs cap {cap} at log t = {log_t}", means[2]),
        ));
        // The limit is an a.s. statement, so the trend is checked per path:
        // the average decreases over the two-decade span unless the path's
        // position rides a near-zero overshoot there (probability ~ 0.15),
        // making a large majority of decreasing paths the expected signal.
        let decreasing = per_path.iter().filter(|p| p[2] < p[0]).count();
        checks.push(CheckItem::new(
            "null_recurrent_decreasing",
            decreasing as f64 >= 0.6 * n_paths as f64,
            format!(
                "{decreasing}/{n_paths} paths decrease over the last two decades \
                 (ensemble means {:.4}, {:.4}, {:.4})",
                means[0], means[1], means[2]
            ),
        ));
    }

    let mut csv = String::from("path,log_t,average\n");
    for (i, p) in per_path.iter().enumerate() {
        for (j, &lt) in points.iter().enumerate() {
            csv.push_str(&format!("{i},{lt},{}\n", p[j]));
        }
    }

    Ok(finish(
        CommandName::Ergodic,
        cfg,
        json!({"limit": theory, "finite_mean": finite}),
        json!({"averages_by_log_t": points.iter().zip(&means)
                   .map(|(lt, m)| json!({"log_t": lt, "mean": m})).collect::<Vec<_>>(),
               "per_path_final": per_path.iter().map(|p| p[2]).collect::<Vec<_>>()}),
        json!({"final_mean": means[2]}),
        checks,
        csv,
        started,
    ))
}
