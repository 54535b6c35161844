//! Small numeric helpers: stable log-space arithmetic and composite
//! Simpson quadrature. Everything here is deterministic and pure.

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log(exp(x) - 1) for x > 0.
pub fn ln_expm1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x > 33.0 {
        // exp(-x) underflows the correction well below f64 epsilon.
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// log(1 + exp(x)) for any x.
pub fn ln1p_exp(x: f64) -> f64 {
    if x > 33.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Composite Simpson rule on [a, b] with `n` subintervals (rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let n = if n % 2 == 0 { n.max(2) } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

/// Trapezoid rule on the given sorted nodes.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, nodes: &[f64]) -> f64 {
    let mut acc = 0.0;
    let mut prev_x = nodes[0];
    let mut prev_y = f(prev_x);
    for &x in &nodes[1..] {
        let y = f(x);
        acc += 0.5 * (y + prev_y) * (x - prev_x);
        prev_x = x;
        prev_y = y;
    }
    acc
}

/// `count` log-spaced nodes covering [a, b], a > 0.
pub fn log_spaced(a: f64, b: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let (la, lb) = (a.ln(), b.ln());
    (0..count)
        .map(|i| (la + (lb - la) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct() {
        let v = log_add_exp(1.0, 2.0);
        assert!((v - (1f64.exp() + 2f64.exp()).ln()).abs() < 1e-14);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }

    #[test]
    fn ln_expm1_branches_agree() {
        for &x in &[1e-9f64, 0.5, 10.0, 32.9, 33.1, 100.0] {
            let direct = if x < 700.0 { x.exp_m1().ln() } else { x };
            assert!((ln_expm1(x) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn simpson_integrates_cubic_exactly() {
        let v = simpson(|x| x * x * x, 0.0, 2.0, 8);
        assert!((v - 4.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_linear_exact() {
        let nodes = log_spaced(1.0, 10.0, 200);
        let v = trapezoid(|x| 2.0 * x + 1.0, &nodes);
        assert!((v - (100.0 - 1.0 + 9.0)).abs() < 1e-3);
    }
}
