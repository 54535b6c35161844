//! Subordinator path simulation in exact piecewise form, plus first-passage
//! functionals (passage time, age, overshoot) and geometric-time ratio
//! diagnostics.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::subordinator_models::{SubordinatorKind, SubordinatorSpec};

/// A nondecreasing path, either exact (piecewise-linear plus jumps) or
/// sampled on a regular grid. Grid paths are interpreted as linear between
/// nodes by every downstream integrator.
#[derive(Debug, Clone, PartialEq)]
pub enum SubordinatorPath {
    JumpDrift {
        drift: f64,
        jump_times: Vec<f64>,
        jump_sizes: Vec<f64>,
        horizon: f64,
    },
    Grid {
        step: f64,
        values: Vec<f64>,
    },
}

/// One linear piece of a path: xi(u) = a + slope * (u - t0) on [t0, t1),
/// followed by an optional jump at t1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub a: f64,
    pub slope: f64,
    pub jump_after: Option<f64>,
}

impl Segment {
    /// Path value just before the end of the segment.
    pub fn end_value(&self) -> f64 {
        self.a + self.slope * (self.t1 - self.t0)
    }
}

/// First-passage functionals over a level b: L = inf{s : xi_s > b},
/// age A = b - xi_{L-}, overshoot R = xi_L - b. If the path never passes
/// b within its horizon, `overshoot` is None and `passage_time` is +inf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageRecord {
    pub level: f64,
    pub passage_time: f64,
    pub age: f64,
    pub overshoot: Option<f64>,
}

impl PassageRecord {
    pub fn passed(&self) -> bool {
        self.overshoot.is_some()
    }
}

impl SubordinatorPath {
    pub fn new_jump_drift(
        drift: f64,
        jump_times: Vec<f64>,
        jump_sizes: Vec<f64>,
        horizon: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::Usage("horizon must be positive".into()));
        }
        if drift < 0.0 {
            return Err(Error::Domain("drift must be nonnegative".into()));
        }
        if jump_times.len() != jump_sizes.len() {
            return Err(Error::Usage("jump times/sizes length mismatch".into()));
        }
        let mut prev = 0.0;
        for &t in &jump_times {
            if !(t > prev && t <= horizon) {
                return Err(Error::Usage(
                    "jump times must be strictly increasing within (0, horizon]".into(),
                ));
            }
            prev = t;
        }
        if jump_sizes.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Usage("jump sizes must be positive".into()));
        }
        Ok(Self::JumpDrift { drift, jump_times, jump_sizes, horizon })
    }

    pub fn new_grid(step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::Usage("step must be positive".into()));
        }
        if values.len() < 2 || values[0] != 0.0 {
            return Err(Error::Usage("grid must start at 0 with at least 2 nodes".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Usage("grid values must be nondecreasing".into()));
        }
        Ok(Self::Grid { step, values })
    }

    pub fn horizon(&self) -> f64 {
        match self {
            Self::JumpDrift { horizon, .. } => *horizon,
            Self::Grid { step, values } => step * (values.len() - 1) as f64,
        }
    }

    pub fn is_jump_drift(&self) -> bool {
        matches!(self, Self::JumpDrift { .. })
    }

    /// Reinterpret a grid path as piecewise constant: each cell's increment
    /// becomes a jump at the cell's right endpoint. Grid sampling is exact
    /// in law at the nodes, and a large cell increment is in truth almost
    /// entirely one jump, so this view preserves level-crossing overshoots
    /// that linear interpolation smears into a steep ramp (a clock crossing
    /// mid-ramp reads xi near b + log(slope) instead of the post-jump value).
    /// Jump-drift paths are returned unchanged.
    pub fn piecewise_constant(&self) -> Result<SubordinatorPath> {
        match self {
            Self::JumpDrift { .. } => Ok(self.clone()),
            Self::Grid { step, values } => {
                let mut jump_times = Vec::with_capacity(values.len() - 1);
                let mut jump_sizes = Vec::with_capacity(values.len() - 1);
                for (k, w) in values.windows(2).enumerate() {
                    let inc = w[1] - w[0];
                    if inc > 0.0 {
                        jump_times.push(step * (k + 1) as f64);
                        jump_sizes.push(inc);
                    }
                }
                Self::new_jump_drift(0.0, jump_times, jump_sizes, self.horizon())
            }
        }
    }

    /// Right-continuous value xi_s.
    pub fn value_at(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::Domain("time must be nonnegative".into()));
        }
        if s > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::Range {
                msg: format!("t = {s} beyond simulated horizon"),
                limit: self.horizon(),
            });
        }
        match self {
            Self::JumpDrift { drift, jump_times, jump_sizes, .. } => {
                let k = jump_times.partition_point(|&t| t <= s);
                Ok(drift * s + jump_sizes[..k].iter().sum::<f64>())
            }
            Self::Grid { step, values } => {
                let pos = s / step;
                let i = (pos.floor() as usize).min(values.len() - 2);
                let frac = pos - i as f64;
                Ok(values[i] + frac.min(1.0) * (values[i + 1] - values[i]))
            }
        }
    }

    /// Left limit xi_{s-}.
    pub fn value_before(&self, s: f64) -> Result<f64> {
        match self {
            Self::JumpDrift { drift, jump_times, jump_sizes, .. } => {
                if s > self.horizon() * (1.0 + 1e-12) {
                    return Err(Error::Range {
                        msg: format!("t = {s} beyond simulated horizon"),
                        limit: self.horizon(),
                    });
                }
                let k = jump_times.partition_point(|&t| t < s);
                Ok(drift * s + jump_sizes[..k].iter().sum::<f64>())
            }
            Self::Grid { .. } => self.value_at(s),
        }
    }

    pub fn terminal_value(&self) -> f64 {
        match self {
            Self::JumpDrift { drift, jump_sizes, horizon, .. } => {
                drift * horizon + jump_sizes.iter().sum::<f64>()
            }
            Self::Grid { values, .. } => *values.last().expect("non-empty grid"),
        }
    }

    /// Iterate the linear pieces in time order.
    pub fn segments(&self) -> SegmentIter<'_> {
        SegmentIter { path: self, index: 0, acc: 0.0 }
    }

    /// First passage over level b. Exact on jump-drift paths; on grids the
    /// passage time is located to within one step and the age/overshoot are
    /// read from the bracketing nodes.
    pub fn first_passage(&self, b: f64) -> Result<PassageRecord> {
        if !(b > 0.0) {
            return Err(Error::Domain("level must be positive".into()));
        }
        match self {
            Self::JumpDrift { .. } => {
                for seg in self.segments() {
                    let len = seg.t1 - seg.t0;
                    if seg.slope > 0.0 && seg.a <= b && seg.a + seg.slope * len > b {
                        // Continuous crossing inside the segment.
                        return Ok(PassageRecord {
                            level: b,
                            passage_time: seg.t0 + (b - seg.a) / seg.slope,
                            age: 0.0,
                            overshoot: Some(0.0),
                        });
                    }
                    let v_end = seg.end_value();
                    if let Some(j) = seg.jump_after {
                        if v_end <= b && v_end + j > b {
                            return Ok(PassageRecord {
                                level: b,
                                passage_time: seg.t1,
                                age: b - v_end,
                                overshoot: Some(v_end + j - b),
                            });
                        }
                    }
                }
            }
            Self::Grid { step, values } => {
                if let Some(i) = values.iter().position(|&v| v > b) {
                    // values[0] = 0 <= b, so i >= 1.
                    return Ok(PassageRecord {
                        level: b,
                        passage_time: i as f64 * step,
                        age: b - values[i - 1],
                        overshoot: Some(values[i] - b),
                    });
                }
            }
        }
        Ok(PassageRecord {
            level: b,
            passage_time: f64::INFINITY,
            age: b - self.terminal_value(),
            overshoot: None,
        })
    }

    /// CSV dump: grids as `t,xi` rows; jump-drift as
    /// `jump_time,jump_size,drift` rows (drift repeated per row).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            Self::JumpDrift { drift, jump_times, jump_sizes, .. } => {
                out.push_str("jump_time,jump_size,drift\n");
                for (t, s) in jump_times.iter().zip(jump_sizes) {
                    out.push_str(&format!("{t},{s},{drift}\n"));
                }
            }
            Self::Grid { step, values } => {
                out.push_str("t,xi\n");
                for (i, v) in values.iter().enumerate() {
                    out.push_str(&format!("{},{v}\n", i as f64 * step));
                }
            }
        }
        out
    }
}

pub struct SegmentIter<'a> {
    path: &'a SubordinatorPath,
    index: usize,
    acc: f64,
}

impl Iterator for SegmentIter<'_> {
    type Item = Segment;

    fn next(&mut self) -> Option<Segment> {
        match self.path {
            SubordinatorPath::JumpDrift { drift, jump_times, jump_sizes, horizon } => {
                if self.index > jump_times.len() {
                    return None;
                }
                let t0 = if self.index == 0 { 0.0 } else { jump_times[self.index - 1] };
                let a = drift * t0 + self.acc;
                let (t1, jump_after) = if self.index < jump_times.len() {
                    (jump_times[self.index], Some(jump_sizes[self.index]))
                } else {
                    (*horizon, None)
                };
                if let Some(j) = jump_after {
                    self.acc += j;
                }
                self.index += 1;
                if t1 <= t0 && jump_after.is_none() {
                    // Zero-length tail when the last jump sits at the horizon.
                    return None;
                }
                Some(Segment { t0, t1, a, slope: *drift, jump_after })
            }
            SubordinatorPath::Grid { step, values } => {
                let i = self.index;
                if i + 1 >= values.len() {
                    return None;
                }
                self.index += 1;
                let t0 = i as f64 * step;
                Some(Segment {
                    t0,
                    t1: t0 + step,
                    a: values[i],
                    slope: (values[i + 1] - values[i]) / step,
                    jump_after: None,
                })
            }
        }
    }
}

/// Simulate a path of `spec` up to `horizon`. Compound-Poisson and
/// drift-only kinds produce exact jump-drift paths; infinite-activity kinds
/// produce grid paths with independent stationary increments per cell
/// (`step` defaults to horizon/10^4).
pub fn simulate_path<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    horizon: f64,
    step: Option<f64>,
    rng: &mut R,
) -> Result<SubordinatorPath> {
    if !(horizon > 0.0) {
        return Err(Error::Usage("horizon must be positive".into()));
    }
    match &spec.kind {
        SubordinatorKind::DriftOnly { .. } => {
            SubordinatorPath::new_jump_drift(spec.total_drift(), vec![], vec![], horizon)
        }
        SubordinatorKind::CompoundPoisson { rate, jump_law } => {
            let mut times = Vec::new();
            let mut sizes = Vec::new();
            let mut t = 0.0;
            loop {
                let e: f64 = Exp1.sample(rng);
                t += e / rate;
                if t > horizon {
                    break;
                }
                times.push(t);
                sizes.push(jump_law.sample(rng));
            }
            SubordinatorPath::new_jump_drift(spec.total_drift(), times, sizes, horizon)
        }
        _ => {
            let step = step.unwrap_or(horizon / 1e4);
            if !(step > 0.0) {
                return Err(Error::Usage("step must be positive".into()));
            }
            let n = (horizon / step).floor() as usize + 1;
            let mut values = Vec::with_capacity(n);
            values.push(0.0);
            let mut acc = 0.0;
            for _ in 1..n {
                acc += spec.sample_increment(step, rng);
                values.push(acc);
            }
            SubordinatorPath::new_grid(step, values)
        }
    }
}

/// Simulate until the path strictly exceeds `target` (plus a short margin so
/// first-passage records at that level are interior). Errors with
/// `Truncated` if the step cap is hit first.
pub fn simulate_past_level<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    target: f64,
    step: Option<f64>,
    rng: &mut R,
) -> Result<SubordinatorPath> {
    if !(target > 0.0) {
        return Err(Error::Usage("target level must be positive".into()));
    }
    match &spec.kind {
        SubordinatorKind::DriftOnly { .. } => {
            let horizon = target / spec.total_drift() * 1.01;
            simulate_path(spec, horizon, None, rng)
        }
        SubordinatorKind::CompoundPoisson { rate, jump_law } => {
            let mut times = Vec::new();
            let mut sizes = Vec::new();
            let drift = spec.total_drift();
            let mut t = 0.0;
            let mut value = 0.0;
            const CAP: usize = 100_000_000;
            for i in 0..=CAP {
                if i == CAP {
                    return Err(Error::Truncated {
                        msg: "event cap reached before target level".into(),
                        achieved_t: t,
                    });
                }
                let e: f64 = Exp1.sample(rng);
                t += e / rate;
                if drift > 0.0 && drift * t + value > target {
                    break;
                }
                times.push(t);
                let j = jump_law.sample(rng);
                sizes.push(j);
                value += j;
                if drift * t + value > target {
                    break;
                }
            }
            // Keep simulating for a fixed stretch past the crossing so that
            // functionals of the path (e.g. the exponential clock) can be
            // evaluated at times slightly beyond the passage event.
            let t_cross = t;
            let horizon = t_cross + 8.0 / rate;
            loop {
                let e: f64 = Exp1.sample(rng);
                t += e / rate;
                if t >= horizon {
                    break;
                }
                times.push(t);
                sizes.push(jump_law.sample(rng));
            }
            SubordinatorPath::new_jump_drift(drift, times, sizes, horizon)
        }
        _ => {
            let step = step.unwrap_or(1e-3);
            if !(step > 0.0) {
                return Err(Error::Usage("step must be positive".into()));
            }
            let mut values = vec![0.0];
            let mut acc = 0.0;
            const CAP: usize = 100_000_000;
            while acc <= target {
                if values.len() > CAP {
                    return Err(Error::Truncated {
                        msg: "step cap reached before target level".into(),
                        achieved_t: step * (values.len() - 1) as f64,
                    });
                }
                acc += spec.sample_increment(step, rng);
                values.push(acc);
            }
            // A few extra cells past the crossing, so exponential integrals
            // of the path accumulate time at the top level as well.
            for _ in 0..8 {
                acc += spec.sample_increment(step, rng);
                values.push(acc);
            }
            SubordinatorPath::new_grid(step, values)
        }
    }
}

/// Exact-in-law samples of xi at the geometric times t_k = t0 * 2^k,
/// k = 0..=doublings, built from independent stationary increments.
pub fn sample_at_geometric_times<R: Rng + ?Sized>(
    spec: &SubordinatorSpec,
    t0: f64,
    doublings: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    if !(t0 > 0.0) {
        return Err(Error::Usage("t0 must be positive".into()));
    }
    let mut out = Vec::with_capacity(doublings + 1);
    let mut t = t0;
    let mut xi = spec.sample_increment(t0, rng);
    out.push((t, xi));
    for _ in 0..doublings {
        xi += spec.sample_increment(t, rng);
        t *= 2.0;
        out.push((t, xi));
    }
    Ok(out)
}

/// Geometric-time samples read off a stored path.
pub fn geometric_samples(
    path: &SubordinatorPath,
    t0: f64,
    doublings: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(doublings + 1);
    let mut t = t0;
    for _ in 0..=doublings {
        out.push((t, path.value_at(t)?));
        t *= 2.0;
    }
    Ok(out)
}

/// One point of a running-extremum trace of numerator/denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioPoint {
    pub t: f64,
    pub ratio: f64,
    pub running_min: f64,
    pub running_max: f64,
}

/// Running infimum and supremum of numerator(t, xi_t) / denominator(t) over
/// geometrically spaced sample points.
pub fn running_ratio_stats<N, D>(
    points: &[(f64, f64)],
    numerator: N,
    denominator: D,
) -> Result<Vec<RatioPoint>>
where
    N: Fn(f64, f64) -> f64,
    D: Fn(f64) -> f64,
{
    if points.is_empty() {
        return Err(Error::Usage("empty point list".into()));
    }
    let mut out = Vec::with_capacity(points.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(t, xi) in points {
        let den = denominator(t);
        if !(den > 0.0) {
            return Err(Error::Domain(format!("denominator not positive at t = {t}")));
        }
        let r = numerator(t, xi) / den;
        lo = lo.min(r);
        hi = hi.max(r);
        out.push(RatioPoint { t, ratio: r, running_min: lo, running_max: hi });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc_stats::{chi2_quantile, ks_two_sample, ks_two_sample_critical_01, SeedPlan};
    use crate::numeric::simpson;
    use crate::subordinator_models::JumpLaw;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn drift_only_path_is_linear() {
        let spec = SubordinatorSpec::drift_only(1.0).unwrap();
        let mut rng = SeedPlan::new(1).rng(0);
        let path = simulate_path(&spec, 5.0, None, &mut rng).unwrap();
        for t in [0.0, 1.0, 2.5, 5.0] {
            assert_eq!(path.value_at(t).unwrap(), t);
        }
        assert!(matches!(path.value_at(5.1), Err(Error::Range { .. })));
    }

    #[test]
    fn compound_poisson_jump_count() {
        let spec = SubordinatorSpec::compound_poisson(
            1.0,
            JumpLaw::PointMass { location: 1.0 },
        )
        .unwrap();
        let plan = SeedPlan::new(2);
        let reps = 400;
        let mut total = 0.0;
        for i in 0..reps {
            let mut rng = plan.rng(i);
            if let SubordinatorPath::JumpDrift { jump_times, .. } =
                simulate_path(&spec, 10.0, None, &mut rng).unwrap()
            {
                total += jump_times.len() as f64;
            }
        }
        let mean = total / reps as f64;
        // Mean 10, sd sqrt(10); replicate average tightens by sqrt(reps).
        assert!((mean - 10.0).abs() < 4.0 * (10.0f64 / reps as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn grid_terminal_matches_single_increment() {
        let spec = SubordinatorSpec::stable(0.5, 1.0).unwrap();
        let plan = SeedPlan::new(3);
        let n = 10_000;
        let mut gridded = Vec::with_capacity(n);
        let mut rng = plan.rng(0);
        for _ in 0..n {
            let path = simulate_path(&spec, 1.0, Some(1e-3), &mut rng).unwrap();
            gridded.push(path.terminal_value());
        }
        let mut rng = plan.rng(1);
        let direct: Vec<f64> = (0..n).map(|_| spec.sample_increment(1.0, &mut rng)).collect();
        let d = ks_two_sample(&gridded, &direct).unwrap();
        // Both draws are exact in law, so only two-sample noise remains;
        // the 0.01 target sits below the N=10^4 noise floor.
        assert!(d <= 0.01f64.max(ks_two_sample_critical_01(n, n)), "ks = {d}");
    }

    #[test]
    fn first_passage_continuous_crossing() {
        let path = SubordinatorPath::new_jump_drift(1.0, vec![], vec![], 5.0).unwrap();
        let rec = path.first_passage(3.0).unwrap();
        assert_eq!(rec.passage_time, 3.0);
        assert_eq!(rec.age, 0.0);
        assert_eq!(rec.overshoot, Some(0.0));
    }

    #[test]
    fn first_passage_jump_crossing() {
        let path = SubordinatorPath::new_jump_drift(0.0, vec![2.0], vec![5.0], 10.0).unwrap();
        let rec = path.first_passage(3.0).unwrap();
        assert_eq!(rec.passage_time, 2.0);
        assert_eq!(rec.age, 3.0);
        assert_eq!(rec.overshoot, Some(2.0));
    }

    #[test]
    fn first_passage_never_passed() {
        let path = SubordinatorPath::new_jump_drift(0.0, vec![1.0], vec![0.5], 10.0).unwrap();
        let rec = path.first_passage(3.0).unwrap();
        assert!(!rec.passed());
        assert!(rec.passage_time.is_infinite());
        assert!((rec.age - 2.5).abs() < 1e-15);
    }

    #[test]
    fn passage_record_reconstructs_path_values() {
        let spec = SubordinatorSpec::compound_poisson(
            2.0,
            JumpLaw::Exponential { rate: 1.0 },
        )
        .unwrap()
        .with_drift(0.3)
        .unwrap();
        let plan = SeedPlan::new(4);
        for i in 0..50 {
            let mut rng = plan.rng(i);
            let path = simulate_path(&spec, 20.0, None, &mut rng).unwrap();
            for b in [0.5, 1.5, 4.0, 9.0] {
                let rec = path.first_passage(b).unwrap();
                if !rec.passed() {
                    continue;
                }
                let before = path.value_before(rec.passage_time).unwrap();
                let after = path.value_at(rec.passage_time).unwrap();
                assert!((before - (b - rec.age)).abs() < 1e-12 * (1.0 + b));
                assert!((after - (b + rec.overshoot.unwrap())).abs() < 1e-12 * (1.0 + b));
            }
        }
    }

    #[test]
    fn grid_refinement_passage_stability() {
        // Render one exact path onto grids at two resolutions and compare.
        let spec = SubordinatorSpec::compound_poisson(
            1.0,
            JumpLaw::Exponential { rate: 0.5 },
        )
        .unwrap()
        .with_drift(0.2)
        .unwrap();
        let plan = SeedPlan::new(5);
        for i in 0..20 {
            let mut rng = plan.rng(i);
            let exact = simulate_path(&spec, 30.0, None, &mut rng).unwrap();
            let render = |h: f64| {
                let n = (30.0 / h).floor() as usize + 1;
                let values: Vec<f64> =
                    (0..n).map(|k| exact.value_at(k as f64 * h).unwrap()).collect();
                SubordinatorPath::new_grid(h, values).unwrap()
            };
            let coarse = render(0.01);
            let fine = render(0.005);
            for b in [1.0, 3.0, 6.0] {
                let rc = coarse.first_passage(b).unwrap();
                let rf = fine.first_passage(b).unwrap();
                if !rc.passed() || !rf.passed() {
                    continue;
                }
                assert!((rc.passage_time - rf.passage_time).abs() <= 0.01 + 1e-12);
                let local_inc = exact
                    .value_at(rc.passage_time)
                    .unwrap()
                    - exact.value_before(rc.passage_time - 0.01).unwrap();
                assert!((rc.age - rf.age).abs() <= local_inc + 1e-12);
                assert!(
                    (rc.overshoot.unwrap() - rf.overshoot.unwrap()).abs() <= local_inc + 1e-12
                );
            }
        }
    }

    #[test]
    fn stable_age_marginal_is_arcsine() {
        // For the stable(1/2) subordinator the age fraction A_b/b follows
        // the arcsine law Beta(1/2, 1/2) exactly at every level.
        let spec = SubordinatorSpec::stable(0.5, 1.0).unwrap();
        let plan = SeedPlan::new(6);
        let n = 10_000;
        let mut rng = plan.rng(0);
        let mut fractions = Vec::with_capacity(n);
        while fractions.len() < n {
            let path = simulate_past_level(&spec, 1.0, Some(1e-3), &mut rng).unwrap();
            let rec = path.first_passage(1.0).unwrap();
            if rec.passed() {
                fractions.push(rec.age);
            }
        }
        let emp = crate::mc_stats::EmpiricalDistribution::from_samples(fractions).unwrap();
        let d = emp.ks_distance(|x| (2.0 / PI) * x.clamp(0.0, 1.0).sqrt().asin());
        assert!(d <= 0.02, "ks = {d}");
    }

    /// Joint law of (A_b/b, R_b/b) for stable(1/2) against the
    /// age/rest-of-life density (beta sin(beta pi)/pi) (1-u)^(beta-1)
    /// (u+w)^(-1-beta), via a binned chi-square with exact cell masses.
    #[test]
    fn stable_age_overshoot_joint_law() {
        let beta = 0.5;
        let spec = SubordinatorSpec::stable(beta, 1.0).unwrap();
        let plan = SeedPlan::new(7);
        let n = 10_000;
        let mut rng = plan.rng(0);
        let mut samples = Vec::with_capacity(n);
        while samples.len() < n {
            let path = simulate_past_level(&spec, 1.0, Some(1e-3), &mut rng).unwrap();
            let rec = path.first_passage(1.0).unwrap();
            if let Some(r) = rec.overshoot {
                samples.push((rec.age, r));
            }
        }

        let u_edges = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let w_edges = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, f64::INFINITY];
        // cum(u0,u1,w) = P(U in [u0,u1], W >= w). Integrating the density
        // over w' >= w gives (sin(beta pi)/pi) (1-u)^(beta-1) (u+w)^(-beta);
        // at w = 0 the remaining u-integral is the regularized incomplete
        // beta of the arcsine marginal, and for w > 0 the substitution
        // v = sqrt(1-u) leaves a smooth integrand.
        let cum = |u0: f64, u1: f64, w: f64| -> f64 {
            if w.is_infinite() {
                return 0.0;
            }
            if w == 0.0 {
                return statrs::function::beta::beta_reg(1.0 - beta, beta, u1)
                    - statrs::function::beta::beta_reg(1.0 - beta, beta, u0);
            }
            let c = (beta * PI).sin() / PI;
            let (v0, v1) = ((1.0 - u1).sqrt(), (1.0 - u0).sqrt());
            c * simpson(
                |v: f64| 2.0 * v.powf(2.0 * beta - 1.0) * (1.0 - v * v + w).powf(-beta),
                v0,
                v1,
                400,
            )
        };
        let cell_mass =
            |u0: f64, u1: f64, w0: f64, w1: f64| cum(u0, u1, w0) - cum(u0, u1, w1);

        let mut stat = 0.0;
        let mut cells = 0;
        for iu in 0..u_edges.len() - 1 {
            for iw in 0..w_edges.len() - 1 {
                let (u0, u1) = (u_edges[iu], u_edges[iu + 1]);
                let (w0, w1) = (w_edges[iw], w_edges[iw + 1]);
                let expected = cell_mass(u0, u1, w0, w1) * n as f64;
                assert!(expected >= 5.0, "undersized cell ({iu},{iw}): {expected}");
                let observed = samples
                    .iter()
                    .filter(|&&(u, w)| u >= u0 && u < u1 && w >= w0 && w < w1)
                    .count() as f64;
                let d = observed - expected;
                stat += d * d / expected;
                cells += 1;
            }
        }
        let crit = chi2_quantile(cells - 1, 0.99);
        assert!(stat < crit, "chi2 = {stat}, crit = {crit} at {} dof", cells - 1);
    }

    #[test]
    fn running_ratio_drift_identity() {
        let spec = SubordinatorSpec::drift_only(1.0).unwrap();
        let mut rng = SeedPlan::new(8).rng(0);
        let pts = sample_at_geometric_times(&spec, 1.0, 10, &mut rng).unwrap();
        let trace = running_ratio_stats(&pts, |_, xi| xi, |t| t).unwrap();
        for p in &trace {
            assert!((p.ratio - 1.0).abs() < 1e-12);
            assert!((p.running_min - 1.0).abs() < 1e-12);
            assert!((p.running_max - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn running_ratio_own_terminal_is_one() {
        let spec = SubordinatorSpec::compound_poisson(
            1.0,
            JumpLaw::PointMass { location: 1.0 },
        )
        .unwrap();
        let mut rng = SeedPlan::new(9).rng(0);
        let path = simulate_path(&spec, 64.0, None, &mut rng).unwrap();
        let pts = geometric_samples(&path, 1.0, 6).unwrap();
        let trace =
            running_ratio_stats(&pts, |_, xi| xi + 1.0, |t| path.value_at(t).unwrap() + 1.0)
                .unwrap();
        assert!((trace.last().unwrap().ratio - 1.0).abs() < 1e-12);
    }

    /// Lower envelope of the stable(1/2) subordinator: the running infimum
    /// of xi_t * loglog t / t^2 approaches 1/4 from above on the doubling
    /// grid out to t = 2^40.
    #[test]
    fn stable_lower_envelope_constant() {
        let spec = SubordinatorSpec::stable(0.5, 1.0).unwrap();
        let mut rng = SeedPlan::new(10).rng(0);
        let t0 = (2.0f64).powi(10);
        let pts = sample_at_geometric_times(&spec, t0, 30, &mut rng).unwrap();
        let trace =
            running_ratio_stats(&pts, |_, xi| xi, |t: f64| t * t / t.ln().ln()).unwrap();
        let last = trace.last().unwrap();
        assert!(
            last.running_min >= 0.125 && last.running_min <= 0.5,
            "running min = {}",
            last.running_min
        );
    }

    #[test]
    fn csv_formats() {
        let jd = SubordinatorPath::new_jump_drift(0.5, vec![1.0], vec![2.0], 3.0).unwrap();
        let csv = jd.to_csv();
        assert!(csv.starts_with("jump_time,jump_size,drift\n"));
        assert!(csv.contains("1,2,0.5"));
        let grid = SubordinatorPath::new_grid(0.5, vec![0.0, 1.0, 1.5]).unwrap();
        assert!(grid.to_csv().starts_with("t,xi\n"));
    }

    #[test]
    fn invalid_constructions_rejected() {
        assert!(SubordinatorPath::new_jump_drift(0.0, vec![2.0, 1.0], vec![1.0, 1.0], 5.0)
            .is_err());
        assert!(SubordinatorPath::new_grid(0.0, vec![0.0, 1.0]).is_err());
        assert!(SubordinatorPath::new_grid(1.0, vec![0.0, 1.0, 0.5]).is_err());
        let spec = SubordinatorSpec::stable(0.5, 1.0).unwrap();
        let mut rng = SeedPlan::new(11).rng(0);
        assert!(simulate_path(&spec, 1.0, Some(-1.0), &mut rng).is_err());
    }

    #[test]
    fn piecewise_constant_preserves_nodes() {
        let spec = SubordinatorSpec::stable(0.5, 1.0).unwrap();
        let mut rng = SeedPlan::new(21).rng(0);
        let grid = simulate_path(&spec, 2.0, Some(0.01), &mut rng).unwrap();
        let steps = grid.piecewise_constant().unwrap();
        assert!(steps.is_jump_drift());
        assert_eq!(steps.horizon(), grid.horizon());
        for k in 0..=200 {
            let t = 0.01 * k as f64;
            // Right-continuous at the cell boundary, so the jump placed
            // there is already included: node values agree up to the
            // rounding of re-summing the increments.
            let (a, b) = (steps.value_at(t).unwrap(), grid.value_at(t).unwrap());
            assert!((a - b).abs() <= 1e-12 * b.abs() + 1e-300, "{a} vs {b}");
        }
        // Between nodes the step path holds the previous node's value.
        let mid = steps.value_at(0.015).unwrap();
        let node = grid.value_at(0.01).unwrap();
        assert!((mid - node).abs() <= 1e-12 * node.abs());
        // Jump-drift input passes through unchanged.
        let cp = SubordinatorSpec::compound_poisson(
            1.0,
            JumpLaw::PointMass { location: 1.0 },
        )
        .unwrap();
        let jd = simulate_path(&cp, 5.0, None, &mut rng).unwrap();
        assert_eq!(jd.piecewise_constant().unwrap(), jd);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn monotone_values_property(seed in 0u64..1000, drift in 0.0f64..2.0) {
            let spec = SubordinatorSpec::compound_poisson(
                1.0,
                JumpLaw::Exponential { rate: 1.0 },
            )
            .unwrap()
            .with_drift(drift)
            .unwrap();
            let mut rng = SeedPlan::new(seed).rng(0);
            let path = simulate_path(&spec, 10.0, None, &mut rng).unwrap();
            let mut prev = -1.0;
            for k in 0..=100 {
                let v = path.value_at(k as f64 * 0.1).unwrap();
                prop_assert!(v >= prev);
                prev = v;
            }
        }

        #[test]
        fn segments_tile_the_horizon(seed in 0u64..1000) {
            let spec = SubordinatorSpec::compound_poisson(
                2.0,
                JumpLaw::PointMass { location: 1.0 },
            )
            .unwrap();
            let mut rng = SeedPlan::new(seed).rng(1);
            let path = simulate_path(&spec, 5.0, None, &mut rng).unwrap();
            let mut t = 0.0;
            let mut value = 0.0;
            for seg in path.segments() {
                prop_assert_eq!(seg.t0, t);
                prop_assert!((seg.a - value).abs() < 1e-12);
                t = seg.t1;
                value = seg.end_value() + seg.jump_after.unwrap_or(0.0);
            }
            prop_assert_eq!(t, 5.0);
        }
    }
}
