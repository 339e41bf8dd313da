//! Numerical building blocks: compensated sums, certified values with
//! explicit truncation bounds, zeta partial sums and a safeguarded
//! Newton/bisection solver for increasing functions.

use serde::Serialize;

use crate::error::{Error, Result};

/// Kahan–Babuška (Neumaier) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// A real number known to lie in `[value - tail_bound, value + tail_bound]`.
///
/// An infinite `value` encodes a certified divergence (the quantity is `+inf`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedValue {
    pub value: f64,
    pub tail_bound: f64,
}

impl CertifiedValue {
    pub fn new(value: f64, tail_bound: f64) -> Self {
        debug_assert!(tail_bound >= 0.0);
        Self { value, tail_bound }
    }

    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0)
    }

    pub fn infinite() -> Self {
        Self::new(f64::INFINITY, 0.0)
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }

    pub fn lo(&self) -> f64 {
        self.value - self.tail_bound
    }

    pub fn hi(&self) -> f64 {
        self.value + self.tail_bound
    }

    pub fn contains(&self, x: f64) -> bool {
        if self.is_infinite() {
            return x.is_infinite();
        }
        self.lo() <= x && x <= self.hi()
    }

    /// Product with an exactly known positive factor.
    pub fn scale(&self, factor: f64) -> Self {
        if self.is_infinite() {
            return *self;
        }
        let value = self.value * factor;
        Self::new(
            value,
            self.tail_bound * factor + 2.0 * f64::EPSILON * value.abs(),
        )
    }
}

/// Bracket for `sum_{n > N} n^{-p}`, `p > 1`, from the convexity of `x^{-p}`:
/// the midpoint rule bounds it above by the integral from `N + 1/2`, and the
/// trapezoid rule bounds it below by the integral from `N` minus `N^{-p}/2`.
pub fn power_tail_bounds(p: f64, n: usize) -> (f64, f64) {
    assert!(p > 1.0 && n >= 1);
    let nf = n as f64;
    let upper = (nf + 0.5).powf(1.0 - p) / (p - 1.0);
    let lower = (nf.powf(1.0 - p) / (p - 1.0) - 0.5 * nf.powf(-p)).max(0.0);
    (lower, upper)
}

/// Upper bound on `sum_{n > N} n^{-p} x^n` for `0 <= x <= 1`, `p > 0`.
pub fn weighted_power_tail(p: f64, x: f64, n: usize) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x));
    let nf = n as f64;
    let mut best = f64::INFINITY;
    if p > 1.0 {
        best = power_tail_bounds(p, n).1;
    }
    if x < 1.0 {
        // n^{-p} is decreasing, so the tail is dominated by a geometric series.
        let geometric = (nf + 1.0).powf(-p) * x.powf(nf + 1.0) / (1.0 - x);
        best = best.min(geometric);
    }
    best
}

/// Partial sum `sum_{n=1}^{N} n^{-p}` accumulated from the small end.
pub fn power_partial_sum(p: f64, n: usize) -> f64 {
    (1..=n)
        .rev()
        .map(|k| (k as f64).powf(-p))
        .collect::<KahanSum>()
        .value()
}

/// Riemann zeta at `s > 1`, certified: direct summation plus the convexity
/// bracket on the tail. Terms are added until the bracket width falls below
/// `1e-15` relative, with at most `10^6` terms.
pub fn zeta(s: f64) -> Result<CertifiedValue> {
    if !(s > 1.0) || !s.is_finite() {
        return Err(Error::ParameterOutOfRange(format!(
            "zeta needs s > 1, got {s}"
        )));
    }
    let mut n = 1024usize;
    loop {
        let partial = power_partial_sum(s, n);
        let (lo, hi) = power_tail_bounds(s, n);
        let width = 0.5 * (hi - lo);
        let value = partial + 0.5 * (lo + hi);
        if width <= 1e-15 * value || n >= 1_000_000 {
            let rounding = 4.0 * f64::EPSILON * value;
            return Ok(CertifiedValue::new(value, width + rounding));
        }
        n = (n * 4).min(1_000_000);
    }
}

/// Options for [`solve_increasing`].
#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Solve `f(x) = target` for an increasing `f` on `[0, inf)` with `f(0) < target`.
///
/// `eval` returns `(f(x), f'(x))`; a non-finite value marks `x` as lying past
/// a pole or outside the domain, and is treated as "above the target".
/// The upper end of the bracket is found by doubling from `start`.
pub fn solve_increasing<F>(eval: F, target: f64, start: f64, opts: RootOptions) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (f0, _) = eval(0.0);
    if !(f0 < target) {
        return Err(Error::BracketFailed(format!(
            "f(0) = {f0} is not below the target {target}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = start.max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    loop {
        let (fh, _) = eval(hi);
        if !fh.is_finite() || fh >= target {
            break;
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return Err(Error::BracketFailed(
                "no upper bracket found".to_string(),
            ));
        }
    }
    let (flo, _) = eval(lo);
    assert!(flo < target, "bracket lower end must lie below the target");

    let mut x = 0.5 * (lo + hi);
    let mut width = hi - lo;
    for _ in 0..opts.max_iter {
        let (fx, dfx) = eval(x);
        if fx.is_finite() && fx < target {
            lo = x;
        } else {
            hi = x;
        }
        if fx.is_finite() && fx == target {
            return Ok(x);
        }
        // Newton crawls on steep high-degree polynomials far from the root;
        // bisect whenever a step failed to halve the bracket.
        let stalled = hi - lo > 0.5 * width;
        width = hi - lo;
        let newton = if !stalled && fx.is_finite() && dfx.is_finite() && dfx > 0.0 {
            Some(x - (fx - target) / dfx)
        } else {
            None
        };
        let next = match newton {
            Some(cand) if cand > lo && cand < hi => cand,
            _ => 0.5 * (lo + hi),
        };
        let step = (next - x).abs();
        x = next;
        if step <= opts.rel_tol * x.abs() || hi - lo <= f64::EPSILON * hi {
            // One more Newton step when available; it is quadratic here.
            let (fx, dfx) = eval(x);
            if fx.is_finite() && dfx.is_finite() && dfx > 0.0 {
                let cand = x - (fx - target) / dfx;
                if cand >= lo && cand <= hi {
                    x = cand;
                }
            }
            return Ok(x);
        }
    }
    if hi - lo <= opts.rel_tol * hi {
        Ok(x)
    } else {
        Err(Error::NoConvergence {
            iterations: opts.max_iter,
        })
    }
}

/// Format with 17 significant digits (round-trips every binary64).
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut acc = KahanSum::new();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn zeta_known_values() {
        let z2 = zeta(2.0).unwrap();
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!(z2.contains(pi2_6) || (z2.value - pi2_6).abs() < 4e-16);
        assert!(z2.tail_bound <= 1e-12);
        let z3 = zeta(3.0).unwrap();
        assert!((z3.value - 1.2020569031595942).abs() < 1e-15);
        assert!(z3.tail_bound <= 1e-12);
        let z4 = zeta(4.0).unwrap();
        assert!((z4.value - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-15);
    }

    #[test]
    fn zeta_rejects_pole() {
        assert!(zeta(1.0).is_err());
        assert!(zeta(0.5).is_err());
    }

    #[test]
    fn tail_bracket_contains_brute_force() {
        // sum_{n>10} n^-3 computed to n = 2e6 plus a negligible remainder.
        let brute: f64 = (11..2_000_000u64)
            .rev()
            .map(|k| (k as f64).powi(-3))
            .collect::<KahanSum>()
            .value();
        let (lo, hi) = power_tail_bounds(3.0, 10);
        assert!(lo <= brute && brute <= hi + 1.3e-13);
    }

    #[test]
    fn solver_finds_golden_ratio_conjugate() {
        let root = solve_increasing(|z| (z + z * z, 1.0 + 2.0 * z), 1.0, 1.0, RootOptions::default())
            .unwrap();
        assert!((root - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn solver_converges_on_steep_polynomial() {
        // A lone high-degree term puts the bracket far above the root.
        let f = |z: f64| (0.4 * z + 2e-142 * z.powi(444), 0.4 + 444.0 * 2e-142 * z.powi(443));
        let root = solve_increasing(f, 1.0, 1.0, RootOptions::default()).unwrap();
        assert!((f(root).0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn solver_handles_pole() {
        // z / (1 - z) = 1 at z = 1/2; infinite past z = 1.
        let f = |z: f64| {
            if z >= 1.0 {
                (f64::INFINITY, f64::INFINITY)
            } else {
                (z / (1.0 - z), 1.0 / ((1.0 - z) * (1.0 - z)))
            }
        };
        let root = solve_increasing(f, 1.0, 4.0, RootOptions::default()).unwrap();
        assert!((root - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fmt17_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, -2.5] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
