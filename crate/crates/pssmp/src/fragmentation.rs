//! Event-driven binary conservative self-similar fragmentation (index
//! alpha > 0): population simulation, tagged-fragment lines, the empirical
//! measure rho_t, the exponent Phi of the tagged subordinator, and the
//! splitting-measure-to-Levy-measure formula.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc_stats::SeedPlan;
use crate::numeric::simpson;
use crate::subordinator_models::JumpLaw;

/// Binary dislocation law at unit rate: a particle of size x splits into
/// (Ux, (1-U)x) with U = e^{-J} and J drawn from `neg_log_law`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySplitLaw {
    neg_log_law: JumpLaw,
}

impl BinarySplitLaw {
    /// Law with U almost surely equal to `u`.
    pub fn deterministic(u: f64) -> Result<Self> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain("U must lie in (0, 1)".into()));
        }
        Ok(Self { neg_log_law: JumpLaw::PointMass { location: -u.ln() } })
    }

    /// Law of U specified through the law of J = -log U.
    pub fn from_neg_log(law: JumpLaw) -> Result<Self> {
        law.validate()?;
        Ok(Self { neg_log_law: law })
    }

    pub fn neg_log_law(&self) -> &JumpLaw {
        &self.neg_log_law
    }

    /// Draw J = -log U.
    pub fn sample_neg_log<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.neg_log_law.sample(rng)
    }

    /// P(-log U > x).
    pub fn neg_log_survival(&self, x: f64) -> f64 {
        self.neg_log_law.survival(x)
    }

    /// True when both children always have equal size.
    pub fn is_symmetric(&self) -> bool {
        matches!(self.neg_log_law, JumpLaw::PointMass { location } if location == 2f64.ln())
    }
}

/// 1 - e^{-j}, the size fraction of the right child, computed without
/// cancellation for small j.
fn right_fraction(j: f64) -> f64 {
    -(-j).exp_m1()
}

/// log(1 - e^{-j}), the log-size step when following the right child; for
/// large j this is about -e^{-j}, which 1 - e^{-j} cannot resolve.
fn log_right_fraction(j: f64) -> f64 {
    (-(-j).exp()).ln_1p()
}

/// Particle sizes of a fragmentation at one snapshot time, sorted in
/// decreasing order (frozen below-floor particles included).
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentationState {
    pub time: f64,
    pub sizes: Vec<f64>,
}

impl FragmentationState {
    pub fn total_mass(&self) -> f64 {
        // Sizes are sorted decreasing; sum small-to-large.
        self.sizes.iter().rev().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,size\n");
        for s in &self.sizes {
            out.push_str(&format!("{},{}\n", self.time, s));
        }
        out
    }
}

fn default_size_floor() -> f64 {
    (-80f64).exp()
}

fn default_particle_cap() -> usize {
    10_000_000
}

/// Run parameters for a population simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub t_max: f64,
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_size_floor")]
    pub size_floor: f64,
    #[serde(default = "default_particle_cap")]
    pub particle_cap: usize,
}

impl SimulateConfig {
    pub fn new(t_max: f64) -> Self {
        Self {
            t_max,
            snapshot_times: vec![t_max],
            size_floor: default_size_floor(),
            particle_cap: default_particle_cap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) {
            return Err(Error::Usage("t_max must be positive".into()));
        }
        if self.snapshot_times.iter().any(|&t| !(t > 0.0 && t <= self.t_max)) {
            return Err(Error::Usage("snapshot times must lie in (0, t_max]".into()));
        }
        if !(self.size_floor >= 0.0) {
            return Err(Error::Usage("size_floor must be nonnegative".into()));
        }
        if self.particle_cap < 2 {
            return Err(Error::Usage("particle_cap must allow at least one split".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    size: f64,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.size.total_cmp(&other.size))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Simulate the population started from a single unit-mass particle: each
/// particle of size x waits Exp(x^alpha) and splits into (Ux, (1-U)x).
/// Particles below `size_floor` are frozen (never split again) but stay in
/// every snapshot, so mass is conserved exactly.
pub fn simulate<R: Rng + ?Sized>(
    alpha: f64,
    split_law: &BinarySplitLaw,
    config: &SimulateConfig,
    rng: &mut R,
) -> Result<Vec<FragmentationState>> {
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    config.validate()?;
    let mut snap_times = config.snapshot_times.clone();
    snap_times.sort_by(|a, b| a.total_cmp(b));

    let mut heap: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
    let mut frozen: Vec<f64> = Vec::new();
    let first: f64 = Exp1.sample(rng);
    heap.push(Reverse(Event { time: first, size: 1.0 }));

    let mut snapshots = Vec::with_capacity(snap_times.len());
    let mut snap_idx = 0;
    let take_snaps = |upto: f64,
                          heap: &BinaryHeap<Reverse<Event>>,
                          frozen: &[f64],
                          snap_idx: &mut usize,
                          snapshots: &mut Vec<FragmentationState>| {
        while *snap_idx < snap_times.len() && snap_times[*snap_idx] < upto {
            let mut sizes: Vec<f64> =
                heap.iter().map(|Reverse(e)| e.size).chain(frozen.iter().copied()).collect();
            sizes.sort_by(|a, b| b.total_cmp(a));
            snapshots.push(FragmentationState { time: snap_times[*snap_idx], sizes });
            *snap_idx += 1;
        }
    };

    loop {
        let Some(&Reverse(next)) = heap.peek() else {
            // Everything frozen: the state no longer changes.
            take_snaps(f64::INFINITY, &heap, &frozen, &mut snap_idx, &mut snapshots);
            break;
        };
        let cutoff = next.time.min(config.t_max);
        take_snaps(cutoff, &heap, &frozen, &mut snap_idx, &mut snapshots);
        if next.time > config.t_max {
            take_snaps(f64::INFINITY, &heap, &frozen, &mut snap_idx, &mut snapshots);
            break;
        }
        heap.pop();
        let j = split_law.sample_neg_log(rng);
        let left = next.size * (-j).exp();
        let right = next.size - left;
        for child in [left, right] {
            if child == 0.0 {
                // A child below ~e^{-745} underflows to zero; it carries no
                // representable mass, so dropping it keeps the sum exact.
                continue;
            }
            if child < config.size_floor {
                frozen.push(child);
            } else {
                let e: f64 = Exp1.sample(rng);
                let rate = (alpha * child.ln()).exp();
                heap.push(Reverse(Event { time: next.time + e / rate, size: child }));
            }
        }
        if heap.len() + frozen.len() > config.particle_cap {
            return Err(Error::Truncated {
                msg: "particle cap exceeded".into(),
                achieved_t: next.time,
            });
        }
    }
    Ok(snapshots)
}

/// Which child the tagged line follows at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagMode {
    /// Always the U-child (the paper's left-most particle).
    LeftMost,
    /// The Ux child with probability U, else the (1-U)x child.
    SizeBiased,
}

/// Piecewise-constant trace of the tagged fragment size l_t, stored in log
/// scale (l_0 = 1, nonincreasing).
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedTrace {
    pub times: Vec<f64>,
    pub log_sizes: Vec<f64>,
    pub t_max: f64,
}

impl TaggedTrace {
    /// log l_t at physical time t <= t_max.
    pub fn log_size_at(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t > self.t_max {
            return Err(Error::Range {
                msg: format!("t = {t} outside the simulated window"),
                limit: self.t_max,
            });
        }
        let i = self.times.partition_point(|&s| s <= t);
        Ok(self.log_sizes[i - 1])
    }

    pub fn size_at(&self, t: f64) -> Result<f64> {
        Ok(self.log_size_at(t)?.exp())
    }

    /// The i.i.d. jump sizes of -log l.
    pub fn neg_log_jumps(&self) -> Vec<f64> {
        self.log_sizes.windows(2).map(|w| w[0] - w[1]).collect()
    }
}

/// Simulate a single tagged line of descent: a particle of size l waits
/// Exp(l^alpha) and keeps one child according to `mode`. No population is
/// needed; the tagged law matches size-biased (or left-most) extraction.
pub fn tagged_fragment<R: Rng + ?Sized>(
    alpha: f64,
    split_law: &BinarySplitLaw,
    t_max: f64,
    mode: TagMode,
    rng: &mut R,
) -> Result<TaggedTrace> {
    if !(alpha > 0.0) {
        return Err(Error::Domain("alpha must be positive".into()));
    }
    if !(t_max > 0.0) {
        return Err(Error::Usage("t_max must be positive".into()));
    }
    let mut times = vec![0.0];
    let mut log_sizes = vec![0.0];
    let mut t = 0.0;
    let mut lx = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        t += e / (alpha * lx).exp();
        if t > t_max {
            break;
        }
        let j = split_law.sample_neg_log(rng);
        let step = match mode {
            TagMode::LeftMost => -j,
            TagMode::SizeBiased => {
                if rng.gen::<f64>() < (-j).exp() {
                    -j
                } else {
                    log_right_fraction(j)
                }
            }
        };
        lx += step;
        times.push(t);
        log_sizes.push(lx);
    }
    Ok(TaggedTrace { times, log_sizes, t_max })
}

/// Laplace exponent of the tagged-fragment subordinator at unit dislocation
/// rate: Phi(q) = E(1 - U^{q+1} - (1-U)^{q+1}).
pub fn phi_fragmentation(split_law: &BinarySplitLaw, q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::Usage("q must be positive".into()));
    }
    let law = split_law.neg_log_law();
    let left = law.laplace(q + 1.0);
    let right = law.expectation(|j| right_fraction(j).powf(q + 1.0));
    Ok(1.0 - left - right)
}

/// Tail of the Levy measure of -log l under size-biased tagging:
/// Pi]x, inf[ = E(U 1{U < e^{-x}} + (1-U) 1{1-U < e^{-x}}).
pub fn levy_tail_from_nu(split_law: &BinarySplitLaw, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Usage("x must be positive".into()));
    }
    let law = split_law.neg_log_law();
    match *law {
        JumpLaw::PointMass { location: m } => {
            let u = (-m).exp();
            let threshold = (-x).exp();
            let mut tail = 0.0;
            if u < threshold {
                tail += u;
            }
            let w = right_fraction(m);
            if w < threshold {
                tail += w;
            }
            Ok(tail)
        }
        _ => {
            // With J = -log U: E(U 1{U < e^{-x}}) = E(e^{-J} 1{J > x}) and
            // E((1-U) 1{1-U < e^{-x}}) = E((1-e^{-J}) 1{J < j0}), where
            // j0 = -log(1 - e^{-x}); both are integrated by parts against
            // the survival S of J, truncating where e^{-v} is negligible.
            let s = |v: f64| law.survival(v);
            let term1 = (-x).exp() * s(x)
                - (-x).exp() * simpson(&|w: f64| (-w).exp() * s(x + w), 0.0, 40.0, 10_000);
            // j0 = -log(1 - e^{-x}) through expm1, so that tiny x (where
            // j0 ~ log(1/x) is large but finite) keeps the S(j0) term.
            let j0 = -(-(-x).exp_m1()).ln();
            let a = j0.min(40.0);
            let term2 =
                -(-x).exp() * s(j0) + simpson(&|v: f64| (-v).exp() * s(v), 0.0, a, 10_000);
            Ok((term1 + term2).max(0.0))
        }
    }
}

/// Weighted atoms of the empirical measure rho_t: one atom at
/// log Y_i(t)/log t with weight Y_i(t) per particle.
pub fn empirical_rho(state: &FragmentationState, t: f64) -> Result<Vec<(f64, f64)>> {
    if !(t > 1.0) {
        return Err(Error::Usage("rho_t needs t > 1".into()));
    }
    let lt = t.ln();
    Ok(state.sizes.iter().map(|&s| (s.ln() / lt, s)).collect())
}

/// CSV dump of rho_t atoms.
pub fn rho_csv(atoms: &[(f64, f64)]) -> String {
    let mut out = String::from("atom,weight\n");
    for (a, w) in atoms {
        out.push_str(&format!("{a},{w}\n"));
    }
    out
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// One fragmentation realization addressed lazily through its genealogy: the
/// split variables of a tree node are a deterministic function of (tree
/// seed, node path), so independent tagged walks through the *same*
/// realization stay consistent without storing the population. This is what
/// makes rho_t reachable at horizons like t = e^40, where the population
/// itself would hold ~e^40 particles.
#[derive(Debug, Clone)]
pub struct FragmentationTree {
    alpha: f64,
    split_law: BinarySplitLaw,
    plan: SeedPlan,
}

const ROOT_KEY: u64 = 0x243f_6a88_85a3_08d3;

impl FragmentationTree {
    pub fn new(alpha: f64, split_law: BinarySplitLaw, seed: u64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Domain("alpha must be positive".into()));
        }
        Ok(Self { alpha, split_law, plan: SeedPlan::new(seed) })
    }

    /// Split variables (J, exponential clock) of one tree node.
    fn node_draw(&self, key: u64) -> (f64, f64) {
        let mut rng = self.plan.rng(key);
        let j = self.split_law.sample_neg_log(&mut rng);
        let e: f64 = Exp1.sample(&mut rng);
        (j, e)
    }

    fn child_key(key: u64, branch: u64) -> u64 {
        let mut state = key ^ branch.wrapping_mul(0xd6e8_feb8_6659_fd93);
        splitmix64(&mut state)
    }

    /// One size-biased draw from rho_t of this realization: follows a
    /// size-biased line (child Ux with probability U) and returns
    /// log Y(t)/log t for the particle alive at time t. The walk's child
    /// choices come from `rng`; the tree variables are shared across walks.
    pub fn size_biased_position<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<f64> {
        if !(t > 1.0) {
            return Err(Error::Usage("rho_t needs t > 1".into()));
        }
        let mut key = ROOT_KEY;
        let mut lx = 0.0;
        let mut time = 0.0;
        for _ in 0..1_000_000 {
            let (j, e) = self.node_draw(key);
            let dt = e / (self.alpha * lx).exp();
            if time + dt > t {
                return Ok(lx / t.ln());
            }
            time += dt;
            let (branch, step) = if rng.gen::<f64>() < (-j).exp() {
                (1, -j)
            } else {
                (2, log_right_fraction(j))
            };
            lx += step;
            key = Self::child_key(key, branch);
        }
        Err(Error::Numeric("tagged walk did not reach t within 10^6 splits".into()))
    }
}

/// m size-biased draws from rho_t of one shared realization (equal-weight
/// atoms; the size bias already carries the Y_i weights).
pub fn sample_rho_atoms<R: Rng + ?Sized>(
    tree: &FragmentationTree,
    t: f64,
    m: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    (0..m).map(|_| tree.size_biased_position(t, rng)).collect()
}
