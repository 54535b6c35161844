//! Closed-form limit objects: the weak-limit law V, the Mittag-Leffler law
//! (moments + sampler), the age/rest-of-life density p_beta, the lower
//! growth function g with its constant c_beta, and the integral-test
//! classifier for upper functions.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::subordinator_models::{sample_positive_stable, SubordinatorSpec};

fn check_beta_open(beta: f64) -> Result<()> {
    if beta <= 0.0 || beta >= 1.0 {
        return Err(Error::Degenerate(format!(
            "law degenerates at beta = {beta}: V = 0 a.s. for beta = 1, V = +inf a.s. for beta = 0"
        )));
    }
    Ok(())
}

/// Parameters of the weak-limit law V.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLawVSpec {
    pub alpha: f64,
    pub beta: f64,
}

/// Degenerate endpoints of the V family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VDegeneracy {
    /// beta = 1: V = 0 almost surely.
    Zero,
    /// beta = 0: V = +inf almost surely.
    Infinite,
}

impl LimitLawVSpec {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Domain("alpha must be positive".into()));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain("beta must lie in [0,1]".into()));
        }
        Ok(Self { alpha, beta })
    }

    pub fn degeneracy(&self) -> Option<VDegeneracy> {
        if self.beta == 1.0 {
            Some(VDegeneracy::Zero)
        } else if self.beta == 0.0 {
            Some(VDegeneracy::Infinite)
        } else {
            None
        }
    }
}

/// Density of V:
/// alpha^(1-beta) 2^beta sin(beta pi)/pi * v^(-beta) (2+alpha v)^(-1),
/// the pushforward of U ~ Beta(1-beta, beta) under v = 2u/(alpha(1-u)).
/// (The exponent -1 is forced by normalization: -2 would integrate to
/// beta/2, and only -1 differentiates the incomplete-beta CDF below.)
pub fn v_density(alpha: f64, beta: f64, v: f64) -> Result<f64> {
    check_beta_open(beta)?;
    if !(alpha > 0.0 && v > 0.0) {
        return Err(Error::Domain("need alpha > 0 and v > 0".into()));
    }
    Ok(alpha.powf(1.0 - beta) * 2f64.powf(beta) * (beta * PI).sin() / PI
        * v.powf(-beta)
        / (2.0 + alpha * v))
}

/// P(V <= v) through the representation V = 2U/(alpha(1-U)) with
/// U ~ Beta(1-beta, beta): the regularized incomplete beta at
/// x = alpha v / (2 + alpha v).
pub fn v_cdf(alpha: f64, beta: f64, v: f64) -> Result<f64> {
    check_beta_open(beta)?;
    if !(alpha > 0.0) || v < 0.0 {
        return Err(Error::Domain("need alpha > 0 and v >= 0".into()));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    let x = alpha * v / (2.0 + alpha * v);
    Ok(beta_reg(1.0 - beta, beta, x))
}

/// The transform behind the sampler: V = 2u/(alpha(1-u)).
pub fn v_from_u(alpha: f64, u: f64) -> f64 {
    2.0 * u / (alpha * (1.0 - u))
}

/// Draw V by sampling U ~ Beta(1-beta, beta) and transforming.
pub fn v_sampler<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> Result<f64> {
    check_beta_open(beta)?;
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    let dist = BetaDist::new(1.0 - beta, beta).expect("valid beta parameters");
    // Clamp away from 1 so the transform stays finite.
    let u = dist.sample(rng).min(1.0 - 1e-16);
    Ok(v_from_u(alpha, u))
}

/// n-th Mittag-Leffler moment factor n!/Gamma(1+n beta).
pub fn ml_moment(beta: f64, n: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain("beta must lie in [0,1]".into()));
    }
    Ok(gamma(n as f64 + 1.0) / gamma(1.0 + n as f64 * beta))
}

/// Mittag-Leffler variate of parameter beta: S^(-beta) with S unit positive
/// stable of index beta. beta = 1 gives the constant 1; beta = 0 degenerates
/// to the exponential law and is refused.
pub fn ml_sampler<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> Result<f64> {
    if beta == 1.0 {
        return Ok(1.0);
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Degenerate(
            "beta = 0 degenerates to Exponential(1); sample that directly".into(),
        ));
    }
    Ok(sample_positive_stable(beta, rng).powf(-beta))
}

/// Age/rest-of-life limit density
/// p_beta(u,w) = (beta sin(beta pi)/pi) (1-u)^(beta-1) (u+w)^(-1-beta).
pub fn dynkin_lamperti_density(beta: f64, u: f64, w: f64) -> Result<f64> {
    if beta <= 0.0 || beta >= 1.0 {
        return Err(Error::Degenerate(format!(
            "p_beta degenerates at beta = {beta}: Dirac mass at (1, inf) for beta = 0, at (0, 0) for beta = 1"
        )));
    }
    if !(u > 0.0 && u < 1.0 && w > 0.0) {
        return Err(Error::Domain("need 0 < u < 1 and w > 0".into()));
    }
    Ok(beta * (beta * PI).sin() / PI * (1.0 - u).powf(beta - 1.0) * (u + w).powf(-1.0 - beta))
}

/// Lower-envelope constant c_beta = beta (1-beta)^((1-beta)/beta).
pub fn lil_constant(beta: f64) -> Result<f64> {
    check_beta_open(beta)?;
    Ok(beta * (1.0 - beta).powf((1.0 - beta) / beta))
}

/// The growth function g(t) = loglog t / phi^{-1}(loglog t / t), defined for
/// t > e^e.
#[derive(Debug, Clone)]
pub struct GrowthFunction {
    spec: SubordinatorSpec,
}

impl GrowthFunction {
    pub fn new(spec: SubordinatorSpec) -> Self {
        Self { spec }
    }

    pub fn g(&self, t: f64) -> Result<f64> {
        let e_e = std::f64::consts::E.exp();
        if !(t > e_e) {
            return Err(Error::Domain(format!("g(t) requires t > e^e, got {t}")));
        }
        let ll = t.ln().ln();
        Ok(ll / self.spec.phi_inverse(ll / t)?)
    }
}

/// Classifier verdict for the upper-function integral test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegralVerdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralTestSchedule {
    pub t0: f64,
    pub doublings: usize,
    pub nodes_per_doubling: usize,
}

impl Default for IntegralTestSchedule {
    fn default() -> Self {
        Self { t0: 1e4, doublings: 40, nodes_per_doubling: 64 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegralTestReport {
    pub verdict: IntegralVerdict,
    /// P_k = int_{t0}^{2^k t0} phi(1/f(g(t))) dt.
    pub partial_integrals: Vec<f64>,
    /// Fitted local power-law exponents of the integrand per doubling.
    pub fitted_exponents: Vec<f64>,
}

/// Decide whether int^inf phi(1/f(g(t))) dt converges, by fitting the local
/// decay exponent of the integrand over a doubling schedule. An integrand
/// decaying like t^rho gives successive increments in ratio 2^(rho+1);
/// rho < -1.05 over the last five doublings reads Converges, rho > -0.95
/// Diverges, anything else Inconclusive.
pub fn integral_test<F: Fn(f64) -> f64>(
    spec: &SubordinatorSpec,
    f: F,
    schedule: IntegralTestSchedule,
) -> Result<IntegralTestReport> {
    let e_e = std::f64::consts::E.exp();
    if !(schedule.t0 > e_e) {
        return Err(Error::Usage("schedule must start above e^e".into()));
    }
    if schedule.doublings < 7 {
        return Err(Error::Usage("schedule needs at least 7 doublings".into()));
    }
    // f must be increasing with positive increase on the schedule.
    let mut t = schedule.t0;
    for _ in 0..schedule.doublings {
        let (f1, f2) = (f(t), f(2.0 * t));
        if !(f2 > f1 * (1.0 + 1e-9)) {
            return Err(Error::Usage(
                "f must be increasing with positive increase on the schedule".into(),
            ));
        }
        t *= 2.0;
    }

    let growth = GrowthFunction::new(spec.clone());
    let integrand = |t: f64| -> Result<f64> { spec.phi(1.0 / f(growth.g(t)?)) };

    // Increment of the integral over one doubling, by Simpson in log t.
    let mut increments = Vec::with_capacity(schedule.doublings);
    let mut partials = Vec::with_capacity(schedule.doublings);
    let mut acc = 0.0;
    let n = schedule.nodes_per_doubling.max(4);
    let mut lo = schedule.t0;
    for _ in 0..schedule.doublings {
        let (la, lb) = (lo.ln(), (2.0 * lo).ln());
        let h = (lb - la) / n as f64;
        let mut sum = 0.0;
        for i in 0..=n {
            let u = la + i as f64 * h;
            let t = u.exp();
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            sum += w * integrand(t)? * t;
        }
        let inc = sum * h / 3.0;
        increments.push(inc);
        acc += inc;
        partials.push(acc);
        lo *= 2.0;
    }

    let exponents: Vec<f64> = increments
        .windows(2)
        .map(|p| (p[1] / p[0]).log2() - 1.0)
        .collect();
    let tail = &exponents[exponents.len().saturating_sub(5)..];
    let verdict = if tail.iter().all(|&r| r < -1.05) {
        IntegralVerdict::Converges
    } else if tail.iter().all(|&r| r > -0.95) {
        IntegralVerdict::Diverges
    } else {
        IntegralVerdict::Inconclusive
    };
    Ok(IntegralTestReport {
        verdict,
        partial_integrals: partials,
        fitted_exponents: exponents,
    })
}
