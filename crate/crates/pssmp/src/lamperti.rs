//! Lamperti's transformation on piecewise paths: the exponential clock
//! C_t = int_0^t e^{alpha xi_s} ds, its right-continuous inverse tau, the
//! transformed process X(t) = x0 exp(xi_{tau(t/x0^alpha)}), the inverse
//! transformation recovering xi from X, the additive functional
//! int_0^t X_s^{-alpha} ds, log-scale ergodic averages and short-time
//! scaling samples.
//!
//! All clock arithmetic is done per linear segment in closed form and
//! accumulated in log space, so paths with xi in the hundreds stay exact.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{log_add_exp, ln1p_exp, ln_expm1, log_spaced};
use crate::path_engine::{simulate_path, SubordinatorPath};
use crate::subordinator_models::SubordinatorSpec;

/// log of int_0^delta e^{alpha (a + slope u)} du.
fn seg_log_integral(alpha: f64, a: f64, slope: f64, delta: f64) -> f64 {
    if delta <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let abd = alpha * slope * delta;
    if abd == 0.0 {
        alpha * a + delta.ln()
    } else {
        alpha * a + ln_expm1(abd) - (alpha * slope).ln()
    }
}

#[derive(Debug, Clone, Copy)]
struct ClockSeg {
    t0: f64,
    t1: f64,
    a: f64,
    slope: f64,
    /// log C at the segment start.
    log_c0: f64,
}

/// A self-similar Markov path: Lamperti transform of a subordinator path,
/// with per-segment closed-form clock coefficients. Immutable; queries are
/// safe to evaluate concurrently.
#[derive(Debug, Clone)]
pub struct PssmpPath {
    alpha: f64,
    x0: f64,
    base: SubordinatorPath,
    segs: Vec<ClockSeg>,
    log_c_horizon: f64,
}

impl PssmpPath {
    pub fn new(base: SubordinatorPath, alpha: f64, x0: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Domain("alpha must be positive".into()));
        }
        if !(x0 > 0.0) {
            return Err(Error::Domain("x0 must be positive".into()));
        }
        let mut segs = Vec::new();
        let mut log_c = f64::NEG_INFINITY;
        for seg in base.segments() {
            segs.push(ClockSeg {
                t0: seg.t0,
                t1: seg.t1,
                a: seg.a,
                slope: seg.slope,
                log_c0: log_c,
            });
            log_c = log_add_exp(
                log_c,
                seg_log_integral(alpha, seg.a, seg.slope, seg.t1 - seg.t0),
            );
        }
        if segs.is_empty() {
            return Err(Error::Usage("path has no segments".into()));
        }
        Ok(Self { alpha, x0, base, segs, log_c_horizon: log_c })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn base(&self) -> &SubordinatorPath {
        &self.base
    }

    /// C at the base horizon (may overflow to +inf for very tall paths;
    /// use `log_c_horizon` in that regime).
    pub fn c_horizon(&self) -> f64 {
        self.log_c_horizon.exp()
    }

    pub fn log_c_horizon(&self) -> f64 {
        self.log_c_horizon
    }

    /// Largest X-time query this path supports: x0^alpha * C_horizon.
    pub fn t_max(&self) -> f64 {
        (self.log_c_horizon + self.alpha * self.x0.ln()).exp()
    }

    /// log C_s for base time s.
    pub fn clock_log_c(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Domain("time must be nonnegative".into()));
        }
        let horizon = self.base.horizon();
        if s > horizon * (1.0 + 1e-12) {
            return Err(Error::Range {
                msg: format!("s = {s} beyond base horizon"),
                limit: horizon,
            });
        }
        let i = self
            .segs
            .partition_point(|seg| seg.t0 <= s)
            .saturating_sub(1);
        let seg = &self.segs[i];
        let delta = (s - seg.t0).min(seg.t1 - seg.t0);
        Ok(log_add_exp(
            seg.log_c0,
            seg_log_integral(self.alpha, seg.a, seg.slope, delta),
        ))
    }

    /// C_s = int_0^s e^{alpha xi_u} du.
    pub fn clock_c(&self, s: f64) -> Result<f64> {
        Ok(self.clock_log_c(s)?.exp())
    }

    /// Locate tau(t) as (segment index, offset within segment).
    fn tau_locate(&self, log_t: f64) -> Result<(usize, f64)> {
        if log_t == f64::NEG_INFINITY {
            return Ok((0, 0.0));
        }
        if log_t > self.log_c_horizon + 1e-12 {
            return Err(Error::Range {
                msg: "clock time beyond simulated horizon".into(),
                limit: self.c_horizon(),
            });
        }
        let i = self
            .segs
            .partition_point(|seg| seg.log_c0 <= log_t)
            .saturating_sub(1);
        let seg = &self.segs[i];
        let len = seg.t1 - seg.t0;
        // log(t - C_i), via log t + log(1 - e^{log C_i - log t}).
        let d = seg.log_c0 - log_t;
        if d >= 0.0 {
            return Ok((i, 0.0));
        }
        let log_diff = log_t + (-d.exp()).ln_1p();
        if log_diff == f64::NEG_INFINITY {
            return Ok((i, 0.0));
        }
        let ab = self.alpha * seg.slope;
        let delta = if ab * len == 0.0 {
            (log_diff - self.alpha * seg.a).exp()
        } else {
            ln1p_exp(log_diff - self.alpha * seg.a + ab.ln()) / ab
        };
        Ok((i, delta.min(len)))
    }

    /// tau(t) = inf{s : C_s > t}, solved exactly per segment.
    pub fn tau(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain("clock time must be nonnegative".into()));
        }
        let (i, delta) = self.tau_locate(t.ln())?;
        Ok(self.segs[i].t0 + delta)
    }

    /// xi evaluated at tau(t).
    pub fn xi_at_tau(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain("clock time must be nonnegative".into()));
        }
        let (i, delta) = self.tau_locate(t.ln())?;
        let seg = &self.segs[i];
        Ok(seg.a + seg.slope * delta)
    }

    /// log X(t) = log x0 + xi_{tau(t / x0^alpha)}.
    pub fn log_value_at(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain("time must be nonnegative".into()));
        }
        let lx0 = self.x0.ln();
        let (i, delta) = self.tau_locate(t.ln() - self.alpha * lx0)?;
        let seg = &self.segs[i];
        Ok(lx0 + seg.a + seg.slope * delta)
    }

    /// X(t).
    pub fn value_at(&self, t: f64) -> Result<f64> {
        Ok(self.log_value_at(t)?.exp())
    }

    /// A(t) = int_0^t X_s^{-alpha} ds via the identity A(t) = tau(t/x0^alpha)
    /// (substituting s = x0^alpha C_u shows the identity for every x0).
    pub fn clock_integral(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain("time must be nonnegative".into()));
        }
        let (i, delta) = self.tau_locate(t.ln() - self.alpha * self.x0.ln())?;
        Ok(self.segs[i].t0 + delta)
    }

    /// A(t) by direct integration in X-time: X^alpha is linear between
    /// xi-jumps, so each piece integrates to a logarithm. Agrees with
    /// `clock_integral` to 1e-9; kept as an independent route.
    pub fn clock_integral_direct(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain("time must be nonnegative".into()));
        }
        if t.ln() > self.log_c_horizon + self.alpha * self.x0.ln() + 1e-12 {
            return Err(Error::Range {
                msg: "time beyond simulated horizon".into(),
                limit: self.t_max(),
            });
        }
        let xa0 = self.x0.powf(self.alpha);
        let mut acc = 0.0;
        let mut t_cursor = 0.0;
        for seg in &self.segs {
            let len = seg.t1 - seg.t0;
            let dt_seg = xa0 * seg_log_integral(self.alpha, seg.a, seg.slope, len).exp();
            let xa_start = xa0 * (self.alpha * seg.a).exp();
            let q = self.alpha * seg.slope;
            let remaining = t - t_cursor;
            if remaining <= dt_seg || !dt_seg.is_finite() {
                if remaining > 0.0 {
                    acc += if q == 0.0 {
                        remaining / xa_start
                    } else {
                        (q * remaining / xa_start).ln_1p() / q
                    };
                }
                return Ok(acc);
            }
            let xa_end = xa0 * (self.alpha * (seg.a + seg.slope * len)).exp();
            acc += if q == 0.0 { dt_seg / xa_start } else { (xa_end / xa_start).ln() / q };
            t_cursor += dt_seg;
        }
        Ok(acc)
    }

    /// (1/log t) int_{t_start}^t f(s^{-1/alpha} X(s)) ds/s by trapezoid in
    /// log s, 400 nodes per decade.
    pub fn ergodic_average<F: Fn(f64) -> f64>(&self, f: F, t: f64, t_start: f64) -> Result<f64> {
        if !(t_start > 0.0 && t > t_start) {
            return Err(Error::Usage("need 0 < t_start < t".into()));
        }
        let decades = (t / t_start).log10();
        let count = ((400.0 * decades).ceil() as usize).max(2);
        let nodes = log_spaced(t_start, t, count);
        let mut acc = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for s in nodes {
            let ls = s.ln();
            let log_x = self.log_value_at(s)?;
            let y = f((log_x - ls / self.alpha).exp());
            if let Some((pl, py)) = prev {
                acc += 0.5 * (y + py) * (ls - pl);
            }
            prev = Some((ls, y));
        }
        Ok(acc / t.ln())
    }

    /// Event-level view of the X path: (X-time, X just before, X just after)
    /// for every xi-jump, plus the endpoint. Jump-drift bases only.
    pub fn to_jump_samples(&self) -> Result<PssmpJumpSamples> {
        if !self.base.is_jump_drift() {
            return Err(Error::Unsupported(
                "event-level samples require a jump-drift base".into(),
            ));
        }
        let xa0 = self.x0.powf(self.alpha);
        let mut events = Vec::new();
        let mut t_acc = 0.0;
        let mut last_x = self.x0;
        for seg in self.base.segments() {
            let len = seg.t1 - seg.t0;
            let dt = xa0 * seg_log_integral(self.alpha, seg.a, seg.slope, len).exp();
            t_acc += dt;
            if !t_acc.is_finite() {
                return Err(Error::Numeric(
                    "clock overflow while exporting event samples".into(),
                ));
            }
            let x_before = self.x0 * seg.end_value().exp();
            last_x = x_before;
            if let Some(j) = seg.jump_after {
                let x_after = self.x0 * (seg.end_value() + j).exp();
                events.push((t_acc, x_before, x_after));
                last_x = x_after;
            }
        }
        Ok(PssmpJumpSamples {
            alpha: self.alpha,
            x0: self.x0,
            events,
            t_end: t_acc,
            x_end: last_x,
        })
    }
}

/// Sampled event-level form of a transformed path.
#[derive(Debug, Clone)]
pub struct PssmpJumpSamples {
    pub alpha: f64,
    pub x0: f64,
    /// (X-time of the jump, X just before, X just after).
    pub events: Vec<(f64, f64, f64)>,
    pub t_end: f64,
    pub x_end: f64,
}

/// Apply the transformation: X(t) = x0 exp(xi_{tau(t/x0^alpha)}) evaluated
/// at each query time; the transformed path is returned for further queries.
pub fn lamperti_forward(
    base: SubordinatorPath,
    alpha: f64,
    x0: f64,
    t_queries: &[f64],
) -> Result<(PssmpPath, Vec<f64>)> {
    let path = PssmpPath::new(base, alpha, x0)?;
    let values = t_queries
        .iter()
        .map(|&t| path.value_at(t))
        .collect::<Result<Vec<f64>>>()?;
    Ok((path, values))
}

/// Invert the transformation from event-level X samples: xi_t =
/// log(X(gamma_t)/X(0)) with gamma the inverse of int_0^. X_s^{-alpha} ds.
/// Between jumps X^alpha is linear in t, so each piece yields its xi-length
/// and drift in closed form.
pub fn lamperti_inverse(samples: &PssmpJumpSamples) -> Result<SubordinatorPath> {
    let alpha = samples.alpha;
    let xa = |x: f64| x.powf(alpha);
    let mut jump_times = Vec::with_capacity(samples.events.len());
    let mut jump_sizes = Vec::with_capacity(samples.events.len());
    let mut u = 0.0; // xi-time cursor
    let mut drift_weighted = 0.0;
    let mut t_prev = 0.0;
    let mut x_prev = samples.x0;

    let mut advance = |t_next: f64, x_next: f64, x_prev: f64, t_prev: f64| -> Result<f64> {
        let dt = t_next - t_prev;
        if dt < 0.0 {
            return Err(Error::Usage("event times must be nondecreasing".into()));
        }
        if dt == 0.0 {
            return Ok(0.0);
        }
        let (p, q) = (xa(x_prev), xa(x_next));
        let slope = (q - p) / dt; // alpha * drift
        let rel = (q - p) / p;
        if rel.abs() < 1e-13 {
            Ok(dt / p)
        } else {
            let d = slope / alpha;
            drift_weighted += (q / p).ln() / alpha; // d * delta_u
            Ok((q / p).ln() / (alpha * d))
        }
    };

    for &(t, x_before, x_after) in &samples.events {
        let du = advance(t, x_before, x_prev, t_prev)?;
        u += du;
        jump_times.push(u);
        jump_sizes.push((x_after / x_before).ln());
        t_prev = t;
        x_prev = x_after;
    }
    let du = advance(samples.t_end, samples.x_end, x_prev, t_prev)?;
    u += du;
    let horizon = if u > *jump_times.last().unwrap_or(&0.0) {
        u
    } else {
        u * (1.0 + 1e-12) + f64::MIN_POSITIVE
    };
    let drift = if u > 0.0 { drift_weighted / u } else { 0.0 };
    // Below ~1e-12 the recovered slope is pure rounding noise.
    let drift = if drift.abs() < 1e-12 { 0.0 } else { drift };
    SubordinatorPath::new_jump_drift(drift, jump_times, jump_sizes, horizon)
}

/// n samples of h(t) log X(t) with h(t) = phi^{-1}(1/t) and X started at 1,
/// for specs whose Laplace exponent is regularly varying with index in
/// (0,1) at infinity.
pub fn short_time_samples<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    alpha: f64,
    t_small: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let beta = spec.rv_index();
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(
            "short-time scaling requires a regular-variation index in (0,1)".into(),
        ));
    }
    if !(t_small > 0.0 && t_small <= 1e-3) {
        return Err(Error::Usage("t_small must lie in (0, 1e-3]".into()));
    }
    let h = spec.phi_inverse(1.0 / t_small)?;
    let step = t_small / 128.0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let base = simulate_path(spec, t_small, Some(step), rng)?;
        let path = PssmpPath::new(base, alpha, 1.0)?;
        out.push(h * path.log_value_at(t_small)?);
    }
    Ok(out)
}
