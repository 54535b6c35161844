//! Statistical harness: empirical distributions (plain and weighted),
//! Kolmogorov-Smirnov distances, moment estimators and a deterministic
//! seeding scheme for parallel replicates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Sorted sample atoms with optional normalized weights.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    atoms: Vec<f64>,
    weights: Option<Vec<f64>>,
    n: usize,
}

impl EmpiricalDistribution {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Usage("empty sample".into()));
        }
        samples.sort_by(|a, b| a.total_cmp(b));
        let n = samples.len();
        Ok(Self { atoms: samples, weights: None, n })
    }

    pub fn from_weighted(mut pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Usage("empty sample".into()));
        }
        if pairs.iter().any(|&(_, w)| w < 0.0 || !w.is_finite()) {
            return Err(Error::Usage("weights must be finite and nonnegative".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|&(_, w)| w).sum();
        if total <= 0.0 {
            return Err(Error::Usage("weights sum to zero".into()));
        }
        let n = pairs.len();
        let atoms = pairs.iter().map(|&(x, _)| x).collect();
        let weights = pairs.iter().map(|&(_, w)| w / total).collect();
        Ok(Self { atoms, weights: Some(weights), n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// sup_x |F_emp(x) - cdf(x)| evaluated at the atoms, using both the
    /// left and right empirical limits. The weighted variant uses
    /// cumulative weights.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let mut sup: f64 = 0.0;
        let mut cum = 0.0;
        for (i, &x) in self.atoms.iter().enumerate() {
            let left = cum;
            cum += match &self.weights {
                Some(w) => w[i],
                None => 1.0 / self.n as f64,
            };
            let fx = cdf(x);
            sup = sup.max((left - fx).abs()).max((cum - fx).abs());
        }
        sup
    }
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Usage("empty sample".into()));
    }
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (mut i, mut j) = (0usize, 0usize);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let mut sup: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        sup = sup.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(sup)
}

/// Asymptotic one-sample KS critical value at significance 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// Asymptotic two-sample KS critical value at significance 0.01.
pub fn ks_two_sample_critical_01(n: usize, m: usize) -> f64 {
    1.6276 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Set when the sample variance is exactly zero.
    pub degenerate: bool,
}

/// Empirical mean and standard error of x^n.
pub fn moment_estimate(samples: &[f64], n: u32) -> Result<MomentEstimate> {
    if samples.is_empty() {
        return Err(Error::Usage("empty sample".into()));
    }
    let count = samples.len() as f64;
    let mean = samples.iter().map(|&x| x.powi(n as i32)).sum::<f64>() / count;
    let var = samples
        .iter()
        .map(|&x| {
            let d = x.powi(n as i32) - mean;
            d * d
        })
        .sum::<f64>()
        / count;
    Ok(MomentEstimate {
        value: mean,
        stderr: (var / count).sqrt(),
        degenerate: var == 0.0,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct Chi2Result {
    pub statistic: f64,
    pub dof: usize,
}

/// Rectangular binning over [u0,u1)x[w0,w1). Cells are merged greedily
/// (row-major sweep) until every group has expected count >= 5; mass
/// outside the window goes to one overflow group.
pub fn binned_chi2<F: Fn(f64, f64) -> f64>(
    samples: &[(f64, f64)],
    density: F,
    u_range: (f64, f64, usize),
    w_range: (f64, f64, usize),
) -> Result<Chi2Result> {
    if samples.is_empty() {
        return Err(Error::Usage("empty sample".into()));
    }
    let (u0, u1, nu) = u_range;
    let (w0, w1, nw) = w_range;
    if nu == 0 || nw == 0 || u1 <= u0 || w1 <= w0 {
        return Err(Error::Usage("invalid bin layout".into()));
    }
    let du = (u1 - u0) / nu as f64;
    let dw = (w1 - w0) / nw as f64;
    let n = samples.len() as f64;

    let mut observed = vec![0.0f64; nu * nw];
    let mut outside = 0.0f64;
    for &(u, w) in samples {
        if u < u0 || u >= u1 || w < w0 || w >= w1 {
            outside += 1.0;
            continue;
        }
        let iu = ((u - u0) / du) as usize;
        let iw = ((w - w0) / dw) as usize;
        observed[iu.min(nu - 1) * nw + iw.min(nw - 1)] += 1.0;
    }

    // Expected counts by midpoint quadrature (3x3 per cell).
    let mut expected = vec![0.0f64; nu * nw];
    let mut mass_in = 0.0;
    for iu in 0..nu {
        for iw in 0..nw {
            let mut cell = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    let u = u0 + (iu as f64 + (a as f64 + 0.5) / 3.0) * du;
                    let w = w0 + (iw as f64 + (b as f64 + 0.5) / 3.0) * dw;
                    cell += density(u, w);
                }
            }
            let e = cell / 9.0 * du * dw * n;
            expected[iu * nw + iw] = e;
            mass_in += e;
        }
    }
    let expected_outside = (n - mass_in).max(0.0);

    // Greedy merge pass.
    let mut stat = 0.0;
    let mut groups = 0usize;
    let mut obs_acc = 0.0;
    let mut exp_acc = 0.0;
    for idx in 0..nu * nw {
        obs_acc += observed[idx];
        exp_acc += expected[idx];
        if exp_acc >= 5.0 {
            let d = obs_acc - exp_acc;
            stat += d * d / exp_acc;
            groups += 1;
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    // Leftover cells and out-of-window mass form the final group.
    obs_acc += outside;
    exp_acc += expected_outside;
    if exp_acc >= 5.0 {
        let d = obs_acc - exp_acc;
        stat += d * d / exp_acc;
        groups += 1;
    }
    if groups < 2 {
        return Err(Error::Usage("too few bins after merging".into()));
    }
    Ok(Chi2Result { statistic: stat, dof: groups - 1 })
}

/// Upper quantile of the chi-squared distribution.
pub fn chi2_quantile(dof: usize, p: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("dof > 0")
        .inverse_cdf(p)
}

/// Master seed plus a counter-based stream derivation: replicate `index`
/// gets an independent ChaCha stream, reproducible across runs and
/// thread counts.
#[derive(Debug, Clone, Copy)]
pub struct SeedPlan {
    master: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl SeedPlan {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut state = self.master ^ index.wrapping_mul(0xa076_1d64_78bd_642f);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn ks_exact_quantiles_small() {
        // Atoms at the k/(n+1) quantiles of U(0,1).
        let n = 99;
        let atoms: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
        let emp = EmpiricalDistribution::from_samples(atoms).unwrap();
        let d = emp.ks_distance(|x| x.clamp(0.0, 1.0));
        assert!(d <= 1.0 / (n + 1) as f64 + 1e-12, "d = {d}");
    }

    #[test]
    fn ks_constant_sample_vs_continuous() {
        let emp = EmpiricalDistribution::from_samples(vec![0.5; 100]).unwrap();
        let d = emp.ks_distance(|x| x.clamp(0.0, 1.0));
        assert!(d >= 0.5 - 1e-12);
    }

    #[test]
    fn ks_own_sampler_within_critical() {
        let mut rng = SeedPlan::new(7).rng(0);
        let n = 10_000;
        let samples: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let emp = EmpiricalDistribution::from_samples(samples).unwrap();
        let d = emp.ks_distance(|x| x.clamp(0.0, 1.0));
        assert!(d < ks_critical_01(n), "d = {d}");
    }

    #[test]
    fn weighted_ks_reduces_to_plain() {
        let mut rng = SeedPlan::new(8).rng(0);
        let samples: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let plain = EmpiricalDistribution::from_samples(samples.clone()).unwrap();
        let weighted =
            EmpiricalDistribution::from_weighted(samples.iter().map(|&x| (x, 2.0)).collect())
                .unwrap();
        let cdf = |x: f64| x.clamp(0.0, 1.0);
        assert!((plain.ks_distance(cdf) - weighted.ks_distance(cdf)).abs() < 1e-12);
    }

    #[test]
    fn moment_constant_sample() {
        let est = moment_estimate(&[3.0; 50], 2).unwrap();
        assert_eq!(est.value, 9.0);
        assert_eq!(est.stderr, 0.0);
        assert!(est.degenerate);
    }

    #[test]
    fn moment_exponential_second() {
        let mut rng = SeedPlan::new(9).rng(0);
        let exp = Exp::new(1.0).unwrap();
        let samples: Vec<f64> = (0..100_000).map(|_| exp.sample(&mut rng)).collect();
        let est = moment_estimate(&samples, 2).unwrap();
        assert!((est.value - 2.0).abs() < 4.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn seed_plan_reproducible_and_distinct() {
        let plan = SeedPlan::new(42);
        let a: Vec<u64> = {
            let mut r = plan.rng(3);
            (0..8).map(|_| r.gen()).collect()
        };
        let b: Vec<u64> = {
            let mut r = plan.rng(3);
            (0..8).map(|_| r.gen()).collect()
        };
        let c: Vec<u64> = {
            let mut r = plan.rng(4);
            (0..8).map(|_| r.gen()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_sample_is_usage_error() {
        assert!(EmpiricalDistribution::from_samples(vec![]).is_err());
        assert!(moment_estimate(&[], 1).is_err());
    }
}
