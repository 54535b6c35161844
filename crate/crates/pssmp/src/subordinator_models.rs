//! Parametric subordinator models: Laplace exponent, its right-continuous
//! inverse, increment/jump sampling and regular-variation diagnostics.
//!
//! A subordinator is characterized by a drift d >= 0 and a Levy measure Pi
//! through phi(lambda) = d*lambda + int (1 - e^{-lambda x}) Pi(dx).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma as GammaDist, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::simpson;

/// Law of a single positive jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    PointMass { location: f64 },
    /// P(J > x) = (1 + x)^(-beta); regularly varying tail of index -beta.
    ParetoLogTail { beta: f64 },
    Exponential { rate: f64 },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpLaw::PointMass { location } => location > 0.0,
            JumpLaw::ParetoLogTail { beta } => beta > 0.0 && beta < 1.0,
            JumpLaw::Exponential { rate } => rate > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid jump law parameters: {self:?}")))
        }
    }

    /// P(J > x).
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match *self {
            JumpLaw::PointMass { location } => {
                if x < location {
                    1.0
                } else {
                    0.0
                }
            }
            JumpLaw::ParetoLogTail { beta } => (1.0 + x).powf(-beta),
            JumpLaw::Exponential { rate } => (-rate * x).exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpLaw::PointMass { location } => location,
            JumpLaw::ParetoLogTail { beta } => {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                u.powf(-1.0 / beta) - 1.0
            }
            JumpLaw::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpLaw::PointMass { location } => location,
            // int (1+x)^(-beta) dx diverges for beta <= 1.
            JumpLaw::ParetoLogTail { .. } => f64::INFINITY,
            JumpLaw::Exponential { rate } => 1.0 / rate,
        }
    }

    /// E(e^{-lambda J}); closed form where available, quadrature otherwise.
    pub fn laplace(&self, lambda: f64) -> f64 {
        match *self {
            JumpLaw::PointMass { location } => (-lambda * location).exp(),
            JumpLaw::Exponential { rate } => rate / (rate + lambda),
            JumpLaw::ParetoLogTail { beta } => {
                if lambda == 0.0 {
                    return 1.0;
                }
                // x = e^u - 1 turns the integral into
                //   beta * int_0^inf exp(-lambda(e^u - 1)) e^{-beta u} du.
                // Panel A resolves the exp(-lambda x) decay, panel B the
                // e^{-beta u} tail; truncation error < e^{-60}.
                let upper = 60.0 / beta;
                let split = (1.0 + 50.0 / lambda).ln().min(upper);
                let f = |u: f64| (-lambda * u.exp_m1()).exp() * (-beta * u).exp();
                let mut v = simpson(f, 0.0, split, 4000);
                if split < upper {
                    v += simpson(f, split, upper, 4000);
                }
                beta * v
            }
        }
    }

    /// E(f(J)) for bounded measurable f; exact for point masses.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        match *self {
            JumpLaw::PointMass { location } => f(location),
            JumpLaw::Exponential { rate } => {
                simpson(|v: f64| f(v / rate) * (-v).exp(), 0.0, 60.0, 8000)
            }
            JumpLaw::ParetoLogTail { beta } => {
                let upper = 60.0 / beta;
                beta * simpson(
                    |u: f64| f(u.exp_m1()) * (-beta * u).exp(),
                    0.0,
                    upper,
                    20_000,
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubordinatorKind {
    /// phi(lambda) = scale * lambda^beta.
    Stable { beta: f64, scale: f64 },
    /// phi(lambda) = shape * log(1 + lambda/rate).
    Gamma { shape: f64, rate: f64 },
    /// phi(lambda) = scale * ((lambda + theta)^delta - theta^delta).
    TemperedStable { delta: f64, theta: f64, scale: f64 },
    /// phi(lambda) = rate * E(1 - e^{-lambda J}).
    CompoundPoisson { rate: f64, jump_law: JumpLaw },
    /// phi(lambda) = d * lambda.
    DriftOnly { d: f64 },
}

/// A subordinator model: a kind, an additive drift and the regular-variation
/// index of phi at 0 that the model claims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorSpec {
    #[serde(flatten)]
    pub kind: SubordinatorKind,
    #[serde(default)]
    pub drift: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_rv_index: Option<f64>,
}

impl SubordinatorSpec {
    pub fn new(kind: SubordinatorKind) -> Result<Self> {
        let spec = Self { kind, drift: 0.0, declared_rv_index: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn stable(beta: f64, scale: f64) -> Result<Self> {
        Self::new(SubordinatorKind::Stable { beta, scale })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::new(SubordinatorKind::Gamma { shape, rate })
    }

    pub fn tempered_stable(delta: f64, theta: f64, scale: f64) -> Result<Self> {
        Self::new(SubordinatorKind::TemperedStable { delta, theta, scale })
    }

    pub fn compound_poisson(rate: f64, jump_law: JumpLaw) -> Result<Self> {
        Self::new(SubordinatorKind::CompoundPoisson { rate, jump_law })
    }

    pub fn drift_only(d: f64) -> Result<Self> {
        Self::new(SubordinatorKind::DriftOnly { d })
    }

    pub fn with_drift(mut self, drift: f64) -> Result<Self> {
        self.drift = drift;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.drift >= 0.0) {
            return Err(Error::Domain("drift must be nonnegative".into()));
        }
        match &self.kind {
            SubordinatorKind::Stable { beta, scale } => {
                if !(*beta > 0.0 && *beta < 1.0 && *scale > 0.0) {
                    return Err(Error::Domain("Stable requires beta in (0,1), scale > 0".into()));
                }
            }
            SubordinatorKind::Gamma { shape, rate } => {
                if !(*shape > 0.0 && *rate > 0.0) {
                    return Err(Error::Domain("Gamma requires shape > 0, rate > 0".into()));
                }
            }
            SubordinatorKind::TemperedStable { delta, theta, scale } => {
                if !(*delta > 0.0 && *delta < 1.0 && *theta >= 0.0 && *scale > 0.0) {
                    return Err(Error::Domain(
                        "TemperedStable requires delta in (0,1), theta >= 0, scale > 0".into(),
                    ));
                }
            }
            SubordinatorKind::CompoundPoisson { rate, jump_law } => {
                if !(*rate > 0.0) {
                    return Err(Error::Domain("CompoundPoisson requires rate > 0".into()));
                }
                jump_law.validate()?;
            }
            SubordinatorKind::DriftOnly { d } => {
                if !(*d > 0.0) {
                    return Err(Error::Domain("DriftOnly requires d > 0".into()));
                }
            }
        }
        if let Some(idx) = self.declared_rv_index {
            if !(0.0..=1.0).contains(&idx) {
                return Err(Error::Domain("declared_rv_index must lie in [0,1]".into()));
            }
        }
        Ok(())
    }

    /// Total drift: the DriftOnly parameter plus the additive drift field.
    pub fn total_drift(&self) -> f64 {
        let base = match self.kind {
            SubordinatorKind::DriftOnly { d } => d,
            _ => 0.0,
        };
        base + self.drift
    }

    /// Laplace exponent phi(lambda).
    pub fn phi(&self, lambda: f64) -> Result<f64> {
        if lambda < 0.0 {
            return Err(Error::Domain(format!("phi requires lambda >= 0, got {lambda}")));
        }
        let jump_part = match &self.kind {
            SubordinatorKind::Stable { beta, scale } => scale * lambda.powf(*beta),
            SubordinatorKind::Gamma { shape, rate } => shape * (lambda / rate).ln_1p(),
            SubordinatorKind::TemperedStable { delta, theta, scale } => {
                scale * ((lambda + theta).powf(*delta) - theta.powf(*delta))
            }
            SubordinatorKind::CompoundPoisson { rate, jump_law } => {
                rate * (1.0 - jump_law.laplace(lambda))
            }
            SubordinatorKind::DriftOnly { d } => d * lambda,
        };
        let v = jump_part + self.drift * lambda;
        if v.is_nan() {
            return Err(Error::Numeric(format!("phi({lambda}) evaluated to NaN")));
        }
        Ok(v)
    }

    /// sup phi, finite only for driftless compound Poisson.
    pub fn phi_sup(&self) -> f64 {
        match &self.kind {
            SubordinatorKind::CompoundPoisson { rate, .. } if self.drift == 0.0 => *rate,
            _ => f64::INFINITY,
        }
    }

    /// Right-continuous inverse: phi_inverse(y) = inf{lambda : phi(lambda) > y},
    /// by monotone bisection to relative tolerance 1e-12.
    pub fn phi_inverse(&self, y: f64) -> Result<f64> {
        if y < 0.0 {
            return Err(Error::Domain(format!("phi_inverse requires y >= 0, got {y}")));
        }
        if y == 0.0 {
            return Ok(0.0);
        }
        let sup = self.phi_sup();
        if y >= sup {
            return Err(Error::Range {
                msg: format!("y = {y} is at or above sup phi"),
                limit: sup,
            });
        }
        let mut hi = 1.0f64;
        while self.phi(hi)? <= y {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Numeric("phi_inverse bracket expansion failed".into()));
            }
        }
        let mut lo = 0.0f64;
        // 1e-12 relative tolerance; ~100 halvings from any bracket.
        while hi - lo > 1e-12 * hi && hi - lo > f64::MIN_POSITIVE {
            let mid = 0.5 * (lo + hi);
            if self.phi(mid)? > y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// One increment xi_{t+dt} - xi_t.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        assert!(dt > 0.0, "dt must be positive");
        let jump_part = match &self.kind {
            SubordinatorKind::Stable { beta, scale } => {
                (scale * dt).powf(1.0 / beta) * sample_positive_stable(*beta, rng)
            }
            SubordinatorKind::Gamma { shape, rate } => {
                let g = GammaDist::new(shape * dt, 1.0 / rate).expect("validated parameters");
                g.sample(rng)
            }
            SubordinatorKind::TemperedStable { delta, theta, scale } => {
                // Exact rejection from the stable increment with acceptance
                // probability e^{-theta x}.
                loop {
                    let x = (scale * dt).powf(1.0 / delta) * sample_positive_stable(*delta, rng);
                    if *theta == 0.0 || rng.gen::<f64>() < (-theta * x).exp() {
                        break x;
                    }
                }
            }
            SubordinatorKind::CompoundPoisson { rate, jump_law } => {
                let count = Poisson::new(rate * dt).expect("validated parameters").sample(rng);
                let mut acc = 0.0;
                for _ in 0..count as u64 {
                    acc += jump_law.sample(rng);
                }
                acc
            }
            SubordinatorKind::DriftOnly { d } => d * dt,
        };
        jump_part + self.drift * dt
    }

    /// m = E(xi_1) = phi'(0+); +inf in the infinite-mean regime.
    pub fn mean(&self) -> f64 {
        let jump_part = match &self.kind {
            SubordinatorKind::Stable { .. } => f64::INFINITY,
            SubordinatorKind::Gamma { shape, rate } => shape / rate,
            SubordinatorKind::TemperedStable { delta, theta, scale } => {
                if *theta > 0.0 {
                    scale * delta * theta.powf(delta - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            SubordinatorKind::CompoundPoisson { rate, jump_law } => rate * jump_law.mean(),
            SubordinatorKind::DriftOnly { d } => *d,
        };
        jump_part + self.drift
    }

    /// Regular-variation index of phi at 0: the declared override if set,
    /// otherwise the index implied by the kind.
    pub fn rv_index(&self) -> f64 {
        if let Some(idx) = self.declared_rv_index {
            return idx;
        }
        match &self.kind {
            SubordinatorKind::Stable { beta, .. } => {
                if self.drift > 0.0 {
                    1.0
                } else {
                    *beta
                }
            }
            SubordinatorKind::Gamma { .. } | SubordinatorKind::DriftOnly { .. } => 1.0,
            SubordinatorKind::TemperedStable { delta, theta, .. } => {
                if *theta > 0.0 || self.drift > 0.0 {
                    1.0
                } else {
                    *delta
                }
            }
            SubordinatorKind::CompoundPoisson { jump_law, .. } => {
                if self.drift > 0.0 {
                    return 1.0;
                }
                match jump_law {
                    JumpLaw::ParetoLogTail { beta } => *beta,
                    _ => 1.0,
                }
            }
        }
    }

    /// Least-squares slope of log phi against log lambda over the grid.
    pub fn estimate_rv_index(&self, lambda_grid: &[f64]) -> Result<f64> {
        if lambda_grid.len() < 4 {
            return Err(Error::Usage("rv index grid needs at least 4 points".into()));
        }
        let mut xs = Vec::with_capacity(lambda_grid.len());
        let mut ys = Vec::with_capacity(lambda_grid.len());
        for &l in lambda_grid {
            if l <= 0.0 {
                return Err(Error::Usage("rv index grid must be positive".into()));
            }
            xs.push(l.ln());
            ys.push(self.phi(l)?.ln());
        }
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        Ok(sxy / sxx)
    }

    /// Whether lambda/phi(lambda) is itself the Laplace exponent of a
    /// subordinator (known for stable: lambda^{1-beta}).
    pub fn theta_is_laplace_exponent(&self) -> bool {
        matches!(self.kind, SubordinatorKind::Stable { .. }) && self.drift == 0.0
    }
}

/// Standard positive stable variate of index beta in (0,1), with
/// E(e^{-lambda S}) = e^{-lambda^beta} (Kanter's exact transform:
/// uniform angle plus an independent exponential).
pub fn sample_positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    debug_assert!(beta > 0.0 && beta < 1.0);
    let u = rng.gen_range(f64::MIN_POSITIVE..1.0) * PI;
    let w: f64 = Exp1.sample(rng);
    let s1 = (beta * u).sin() / u.sin().powf(1.0 / beta);
    let s2 = (((1.0 - beta) * u).sin() / w).powf((1.0 - beta) / beta);
    s1 * s2
}
