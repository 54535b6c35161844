//! The exponential functional I = ∫₀^∞ e^{−αξ_s} ds of a subordinator ξ:
//! truncated-horizon sampling with a certified tail bound, the Bertoin–Yor
//! moment products for the factorization partner R_φ, the entrance-law
//! functional μ(f), and closed-form left-tail asymptotics.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::mc_stats::{moment_estimate, MomentEstimate};
use crate::path_engine::simulate_path;
use crate::subordinator_models::{SubordinatorKind, SubordinatorSpec};

/// One truncated draw of I = ∫₀^∞ e^{−αξ_s} ds. The integral is accumulated
/// exactly over the simulated piecewise-linear path on [0, truncation_horizon]
/// and `tail_bound` certifies the residual ∫_H^∞ via the strong Markov
/// continuation bound e^{−αξ_H}·E(I).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFunctionalSample {
    pub value: f64,
    pub truncation_horizon: f64,
    pub tail_bound: f64,
}

/// Which factorization partner a left-tail asymptotic refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftTailTarget {
    RPhi,
    IPhi,
}

/// Closed-form left-tail estimates at a fixed small s: the harmonic-mean
/// asymptotic E(1_{Y>s}/Y) and the little-o envelope for P(Y < s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeftTailAsymptotic {
    pub harmonic_estimate: f64,
    pub tail_bound_form: f64,
}

/// JSON record tying a theoretical quantity from this module to its Monte
/// Carlo counterpart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalRecord {
    pub spec: SubordinatorSpec,
    pub alpha: f64,
    pub n_or_s: f64,
    pub theoretical: f64,
    pub empirical: f64,
    pub stderr: f64,
}

const MAX_BLOCKS: usize = 1_000_000;
const BLOCK_CELLS: f64 = 512.0;

/// Exact integral of e^{−α·ξ} over one linear piece ξ(u) = a + slope·u,
/// u ∈ [0, delta].
fn segment_exp_integral(alpha: f64, a: f64, slope: f64, delta: f64) -> f64 {
    let base = (-alpha * a).exp();
    let x = alpha * slope * delta;
    if x == 0.0 {
        base * delta
    } else {
        base * delta * (-(-x).exp_m1()) / x
    }
}

/// Draw one truncated sample of I = ∫₀^∞ e^{−αξ_s} ds.
///
/// The path is simulated in blocks of physical length 4/φ(α); after each
/// block the continuation ∫_H^∞ has the law of e^{−αξ_H}·I′ with I′ an
/// independent copy, so e^{−αξ_H}/φ(α) bounds its mean and sampling stops
/// once that bound falls below `eps_target`.
pub fn sample_i<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    alpha: f64,
    eps_target: f64,
    rng: &mut R,
) -> Result<ExpFunctionalSample> {
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    if !(eps_target > 0.0) {
        return Err(Error::Usage("eps_target must be positive".into()));
    }
    let phi_alpha = spec.phi(alpha)?;
    if !(phi_alpha > 0.0) {
        return Err(Error::Degenerate(
            "phi(alpha) = 0: I is almost surely infinite".into(),
        ));
    }
    let mean_i = 1.0 / phi_alpha;
    let block = 4.0 / phi_alpha;
    let step = match spec.kind {
        SubordinatorKind::CompoundPoisson { .. } | SubordinatorKind::DriftOnly { .. } => None,
        _ => Some(block / BLOCK_CELLS),
    };
    let mut level = 0.0;
    let mut horizon = 0.0;
    let mut value = 0.0;
    for _ in 0..MAX_BLOCKS {
        let path = simulate_path(spec, block, step, rng)?;
        for seg in path.segments() {
            value += segment_exp_integral(alpha, level + seg.a, seg.slope, seg.t1 - seg.t0);
        }
        level += path.terminal_value();
        horizon += path.horizon();
        let tail_bound = (-alpha * level).exp() * mean_i;
        if tail_bound <= eps_target {
            return Ok(ExpFunctionalSample {
                value,
                truncation_horizon: horizon,
                tail_bound,
            });
        }
    }
    Err(Error::Numeric(format!(
        "sample_i did not certify the tail bound within {MAX_BLOCKS} blocks"
    )))
}

/// n-th entire moment of the factorization partner: E(R_φⁿ) = ∏_{k=1}^n φ(αk).
pub fn r_phi_moment(spec: &SubordinatorSpec, alpha: f64, n: u32) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    let mut prod = 1.0;
    for k in 1..=n {
        prod *= spec.phi(alpha * k as f64)?;
    }
    Ok(prod)
}

/// n-th moment of I via the factorization R_φ·I =law Exp(1):
/// E(Iⁿ) = n!/∏_{k=1}^n φ(αk).
pub fn i_moment(spec: &SubordinatorSpec, alpha: f64, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::Usage("i_moment requires n >= 1".into()));
    }
    let denom = r_phi_moment(spec, alpha, n)?;
    if denom == 0.0 {
        return Err(Error::Degenerate(
            "phi vanishes on the moment grid: E(I^n) is infinite".into(),
        ));
    }
    Ok(factorial(n) / denom)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Monte Carlo estimate of the entrance-law functional
/// μ(f) = (1/αm)·E(f((1/I)^{1/α})/I), defined only for finite-mean ξ.
pub fn mu_functional<F, R>(
    spec: &SubordinatorSpec,
    alpha: f64,
    f: F,
    n_samples: usize,
    rng: &mut R,
) -> Result<MomentEstimate>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    let m = spec.mean();
    if !m.is_finite() {
        return Err(Error::Domain(
            "mu is undefined: the subordinator has infinite mean".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::Usage("n_samples must be positive".into()));
    }
    let norm = 1.0 / (alpha * m);
    let mut values = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let i = sample_i(spec, alpha, 1e-10, rng)?.value;
        values.push(norm * f(i.recip().powf(1.0 / alpha)) / i);
    }
    moment_estimate(&values, 1)
}

/// Closed-form left-tail estimates at s for R_φ or I_φ. The I_φ form needs
/// λ/φ(λ) to be a Laplace exponent, a property only asserted for the specs
/// where it is known to hold.
pub fn left_tail_asymptotic(
    spec: &SubordinatorSpec,
    alpha: f64,
    s: f64,
    target: LeftTailTarget,
) -> Result<LeftTailAsymptotic> {
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    if !(s > 0.0 && s < (-std::f64::consts::E).exp()) {
        return Err(Error::Usage(
            "s must lie in (0, e^{-e}) for the log-scale asymptotics".into(),
        ));
    }
    let beta = spec.rv_index();
    if !beta.is_finite() {
        return Err(Error::Domain("spec has no finite regular-variation index".into()));
    }
    let log_inv = -s.ln();
    let phi_small = spec.phi(1.0 / log_inv)?;
    let harmonic_estimate = match target {
        LeftTailTarget::RPhi => 1.0 / (alpha.powf(beta) * gamma(1.0 + beta) * phi_small),
        LeftTailTarget::IPhi => {
            if !spec.theta_is_laplace_exponent() {
                return Err(Error::Domain(
                    "lambda/phi(lambda) is not a known Laplace exponent for this spec"
                        .into(),
                ));
            }
            alpha.powf(beta) * log_inv * phi_small / gamma(2.0 - beta)
        }
    };
    Ok(LeftTailAsymptotic {
        harmonic_estimate,
        tail_bound_form: s * harmonic_estimate,
    })
}
