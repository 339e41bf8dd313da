//! The infinite loaded-graph families: chain and jumpy linear graphs and
//! petal graphs, with certified closed-form evaluation of their first-return
//! series.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::cycle_series::{EvalOrder, RecurrenceClass, ReturnSeries};
use crate::error::{Error, Result};
use crate::graph::{LoadedGraph, VertexId, WeightSource};
use crate::numeric::{weighted_power_tail, zeta, CertifiedValue, KahanSum};

/// Largest number of terms used by any direct summation.
pub const MAX_TERMS: usize = 1_000_000;

/// Relative width the jumpy calibration must reach.
const CALIBRATION_REL_TOL: f64 = 1e-9;

/// Binomial mass allowed outside the summation window.
const WINDOW_MASS: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainParams {
    pub rho: f64,
    pub s: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpyParams {
    pub gamma: f64,
    pub s: f64,
    pub beta: f64,
    pub a: f64,
    /// `E[(n+K)^{-s}] / (1+γ)` for `n = 1..=len`, `K ~ Bin(n−1, γ/(1+γ))`;
    /// `q(n) = β · unit[n−1] · (1+γ)^n`.
    unit: Vec<f64>,
}

/// Rule giving the petal weights `q(n)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PetalRule {
    /// `q(n) = c ρ^n n^{-s}`.
    ZetaPower { rho: f64, s: f64, c: f64 },
    /// `q(n) = q[n−1]`, finitely many petals.
    Finite(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyVariant {
    Chain(ChainParams),
    Jumpy(JumpyParams),
    Petal(PetalRule),
}

/// An immutable family together with certified `R`, `Φ(R)` and `Φ'(R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyDescriptor {
    variant: FamilyVariant,
    radius: f64,
    phi_at_radius: CertifiedValue,
    dphi_at_radius: CertifiedValue,
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("{name} = {x} must be positive")))
    }
}

fn check_exponent(s: f64) -> Result<()> {
    if s > 1.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("s = {s} must exceed 1")))
    }
}

/// Certified `Σ_{n≥1} n^{-p} x^n` for `0 ≤ x ≤ 1`.
fn power_series(p: f64, x: f64) -> CertifiedValue {
    if x == 0.0 {
        return CertifiedValue::exact(0.0);
    }
    if x == 1.0 {
        return if p > 1.0 {
            zeta(p).expect("p > 1")
        } else {
            CertifiedValue::infinite()
        };
    }
    let lx = x.ln();
    let mut acc = KahanSum::new();
    let mut n = 0usize;
    let mut block = 64usize;
    loop {
        let end = (n + block).min(MAX_TERMS);
        for k in (n + 1)..=end {
            let kf = k as f64;
            acc.add((kf * lx - p * kf.ln()).exp());
        }
        n = end;
        let tail = weighted_power_tail(p, x, n);
        let value = acc.value();
        if tail <= f64::EPSILON * value || n >= MAX_TERMS {
            let value = value + 0.5 * tail;
            return CertifiedValue::new(value, 0.5 * tail + 8.0 * f64::EPSILON * value);
        }
        block *= 2;
    }
}

/// Certified `Φ` or `Φ'` of `q(n) = c ρ^n n^{-s}` at `0 ≤ z ≤ 1/ρ`.
fn zeta_power_eval(rho: f64, s: f64, c: f64, z: f64, order: EvalOrder) -> CertifiedValue {
    let x = (rho * z).min(1.0);
    match order {
        EvalOrder::Value => power_series(s, x).scale(c),
        EvalOrder::Derivative => {
            if x == 0.0 {
                CertifiedValue::exact(c * rho)
            } else {
                power_series(s - 1.0, x).scale(c * rho / x)
            }
        }
    }
}

/// `(E[(n+K)^{-s}], mass bound)` with `K ~ Bin(n−1, p)`, summing the pmf
/// ratio outward from the mode over a window that leaves at most
/// [`WINDOW_MASS`] of probability outside (Hoeffding). The returned bound is
/// on the absolute error.
fn binomial_expectation(n: usize, p: f64, s: f64) -> (f64, f64) {
    let trials = n - 1;
    let f = |k: usize| ((n + k) as f64).powf(-s);
    if trials == 0 || p == 0.0 {
        return (f(0), 0.0);
    }
    let odds = p / (1.0 - p);
    let mode = (((trials + 1) as f64 * p).floor() as usize).min(trials);
    let half = ((trials as f64 * (2.0 / WINDOW_MASS).ln() / 2.0).sqrt()).ceil() as usize + 2;
    let lo = mode.saturating_sub(half);
    let hi = (mode + half).min(trials);
    let mut mass = KahanSum::new();
    let mut moment = KahanSum::new();
    mass.add(1.0);
    moment.add(f(mode));
    let mut w = 1.0f64;
    for k in mode..hi {
        w *= (trials - k) as f64 / (k + 1) as f64 * odds;
        mass.add(w);
        moment.add(w * f(k + 1));
    }
    w = 1.0;
    for k in (lo + 1..=mode).rev() {
        w *= k as f64 / ((trials - k + 1) as f64 * odds);
        mass.add(w);
        moment.add(w * f(k - 1));
    }
    let window_covers_all = lo == 0 && hi == trials;
    let outside = if window_covers_all {
        0.0
    } else {
        let t = (half - 1) as f64;
        2.0 * (-2.0 * t * t / trials as f64).exp()
    };
    (moment.value() / mass.value(), outside * f(0))
}

fn jumpy_unit_terms(gamma: f64, s: f64, from: usize, to: usize) -> Vec<f64> {
    let p = gamma / (1.0 + gamma);
    (from..=to)
        .into_par_iter()
        .map(|n| binomial_expectation(n, p, s).0 / (1.0 + gamma))
        .collect()
}

impl FamilyDescriptor {
    /// Chain linear graph: `w(i,i+1) = ρ`, `w(i,1) = c ρ i^{-s}`, so
    /// `q(n) = c ρ^n n^{-s}` and `R = 1/ρ`.
    pub fn chain(rho: f64, s: f64, c: f64) -> Result<Self> {
        check_positive("rho", rho)?;
        if rho > 1.0 {
            return Err(Error::ParameterOutOfRange(format!("rho = {rho} exceeds 1")));
        }
        check_exponent(s)?;
        check_positive("c", c)?;
        let (phi, dphi) = zeta_power_at_radius(rho, s, c)?;
        Ok(Self {
            variant: FamilyVariant::Chain(ChainParams { rho, s, c }),
            radius: 1.0 / rho,
            phi_at_radius: phi,
            dphi_at_radius: dphi,
        })
    }

    /// Jumpy linear graph with forward jumps `(i, i+2)`.
    ///
    /// Weights `w(i,i+1) = a`, `w(i,i+2) = γa²`, `w(t,1) = β a^{-(t−1)} t^{-s}`
    /// with `a = 1/(1+γ)`. The coefficients do not depend on `a`:
    /// `q(n) = β Σ_k C(n−1,k) γ^k (n+k)^{-s}`, so `R = 1/(1+γ)`. `β` is
    /// calibrated so that `Φ(R)` is 1 for the recurrent targets, 2 for
    /// [`RecurrenceClass::StablePositive`] and 1/2 for transience.
    pub fn jumpy(gamma: f64, s: f64, target: RecurrenceClass) -> Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("gamma = {gamma} must be >= 0")));
        }
        check_exponent(s)?;
        let level = match target {
            RecurrenceClass::UnstablePositive => {
                if s <= 2.0 {
                    return Err(Error::ParameterOutOfRange(format!(
                        "unstable positivity needs s > 2, got {s}"
                    )));
                }
                1.0
            }
            RecurrenceClass::NullRecurrent => {
                if s > 2.0 {
                    return Err(Error::ParameterOutOfRange(format!(
                        "null recurrence needs s <= 2, got {s}"
                    )));
                }
                1.0
            }
            RecurrenceClass::StablePositive => 2.0,
            RecurrenceClass::Transient => 0.5,
        };
        let g1 = 1.0 + gamma;
        let mut unit: Vec<f64> = Vec::new();
        let mut n_terms = 1024usize;
        let (partial, tail) = loop {
            let extra = jumpy_unit_terms(gamma, s, unit.len() + 1, n_terms);
            unit.extend(extra);
            let partial: f64 = unit.iter().copied().collect::<KahanSum>().value();
            let tail = (n_terms as f64 + 0.5).powf(1.0 - s) / ((s - 1.0) * g1);
            if tail <= CALIBRATION_REL_TOL * partial {
                break (partial, tail);
            }
            if n_terms >= MAX_TERMS {
                return Err(Error::CalibrationFailed(format!(
                    "tail bound {tail:e} after {n_terms} terms"
                )));
            }
            n_terms = (n_terms * 2).min(MAX_TERMS);
        };
        let centre = partial + 0.5 * tail;
        let beta = level / centre;
        let window = 2.0 * WINDOW_MASS * zeta(s)?.hi() / g1;
        let slack = 8.0 * f64::EPSILON * level;
        let phi = CertifiedValue::new(beta * centre, beta * (0.5 * tail + window) + slack);
        let dphi = if s > 2.0 {
            let moment: f64 = unit
                .iter()
                .enumerate()
                .map(|(i, &u)| (i + 1) as f64 * u)
                .collect::<KahanSum>()
                .value();
            let dtail = (n_terms as f64 + 0.5).powf(2.0 - s) / (s - 2.0);
            let value = beta * (g1 * moment + 0.5 * dtail);
            CertifiedValue::new(value, beta * 0.5 * dtail + 8.0 * f64::EPSILON * value)
        } else {
            CertifiedValue::infinite()
        };
        Ok(Self {
            variant: FamilyVariant::Jumpy(JumpyParams {
                gamma,
                s,
                beta,
                a: 1.0 / g1,
                unit,
            }),
            radius: 1.0 / g1,
            phi_at_radius: phi,
            dphi_at_radius: dphi,
        })
    }

    /// Petal graph: one disjoint cycle of length `n` through vertex 1 for
    /// every `n` with `q(n) > 0`, each edge weighted `q(n)^{1/n}`.
    pub fn petal(rule: PetalRule) -> Result<Self> {
        let (radius, phi, dphi) = match &rule {
            PetalRule::ZetaPower { rho, s, c } => {
                check_positive("rho", *rho)?;
                check_exponent(*s)?;
                check_positive("c", *c)?;
                let (phi, dphi) = zeta_power_at_radius(*rho, *s, *c)?;
                (1.0 / rho, phi, dphi)
            }
            PetalRule::Finite(q) => {
                if q.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                    return Err(Error::ParameterOutOfRange(
                        "petal weights must be finite and nonnegative".to_string(),
                    ));
                }
                if q.iter().all(|&x| x == 0.0) {
                    return Err(Error::AllZeroCoefficients);
                }
                (
                    f64::INFINITY,
                    CertifiedValue::infinite(),
                    CertifiedValue::infinite(),
                )
            }
        };
        Ok(Self {
            variant: FamilyVariant::Petal(rule),
            radius,
            phi_at_radius: phi,
            dphi_at_radius: dphi,
        })
    }

    pub fn variant(&self) -> &FamilyVariant {
        &self.variant
    }

    /// The base vertex; always 1.
    pub fn base(&self) -> VertexId {
        VertexId::of(1)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn phi_at_radius(&self) -> CertifiedValue {
        self.phi_at_radius
    }

    pub fn dphi_at_radius(&self) -> CertifiedValue {
        self.dphi_at_radius
    }

    /// `q(n) = a_n · scale^n` split, which stays representable for large `n`.
    pub fn scaled_coefficient(&self, n: usize) -> (f64, f64) {
        if n == 0 {
            return (0.0, 1.0);
        }
        match &self.variant {
            FamilyVariant::Chain(p) => (p.c * (n as f64).powf(-p.s), p.rho),
            FamilyVariant::Jumpy(p) => {
                let unit = match p.unit.get(n - 1) {
                    Some(&u) => u,
                    None => {
                        binomial_expectation(n, p.gamma / (1.0 + p.gamma), p.s).0 / (1.0 + p.gamma)
                    }
                };
                (p.beta * unit, 1.0 + p.gamma)
            }
            FamilyVariant::Petal(PetalRule::ZetaPower { rho, s, c }) => {
                (c * (n as f64).powf(-s), *rho)
            }
            FamilyVariant::Petal(PetalRule::Finite(q)) => (q.get(n - 1).copied().unwrap_or(0.0), 1.0),
        }
    }

    /// Closed-form `q(n)`.
    pub fn coefficient(&self, n: usize) -> f64 {
        let (a, scale) = self.scaled_coefficient(n);
        if a == 0.0 {
            return 0.0;
        }
        let direct = a * scale.powi(n.min(i32::MAX as usize) as i32);
        if direct.is_normal() {
            direct
        } else {
            (a.ln() + n as f64 * scale.ln()).exp()
        }
    }

    /// Scale of the stored series `q(n) = a_n scale^n`.
    pub fn series_scale(&self) -> f64 {
        self.scaled_coefficient(1).1
    }

    /// First `n_max` closed-form coefficients as a scaled series.
    pub fn return_series(&self, n_max: usize) -> Result<ReturnSeries> {
        let terms: Vec<(usize, f64)> = (1..=n_max).map(|n| (n, self.scaled_coefficient(n).0)).collect();
        let exact = match &self.variant {
            FamilyVariant::Petal(PetalRule::Finite(q)) => n_max >= q.len(),
            _ => false,
        };
        let series = ReturnSeries::from_scaled_terms(self.base(), self.series_scale(), terms, n_max, exact)?;
        Ok(if self.radius.is_finite() {
            series.with_closed_form_radius(self.radius)
        } else {
            series
        })
    }

    /// Uniform bound `K` on forward jump spans, if the family is linear.
    pub fn bounded_jumps(&self) -> Option<usize> {
        match &self.variant {
            FamilyVariant::Chain(_) => Some(2),
            FamilyVariant::Jumpy(_) => Some(3),
            FamilyVariant::Petal(_) => None,
        }
    }

    /// Weight of `(from, to)` in the infinite graph.
    pub fn edge_weight(&self, from: VertexId, to: VertexId) -> Option<f64> {
        self.out_edges(from)
            .into_iter()
            .find(|&(w, _)| w == to)
            .map(|(_, wt)| wt)
    }

    /// Out-edges of `u` in the infinite graph. For a petal family's base
    /// vertex this lists every petal, so it is only finite for finite rules;
    /// use [`FamilyDescriptor::out_edges_within`] for truncations.
    pub fn out_edges(&self, u: VertexId) -> Vec<(VertexId, f64)> {
        self.out_edges_within(u, u64::MAX)
    }

    /// Out-edges of `u` whose head is at most `limit`.
    pub fn out_edges_within(&self, u: VertexId, limit: u64) -> Vec<(VertexId, f64)> {
        let i = u.get();
        let mut out = Vec::new();
        let mut push = |to: u64, w: f64| {
            if to <= limit && w > 0.0 {
                out.push((VertexId::of(to), w));
            }
        };
        match &self.variant {
            FamilyVariant::Chain(p) => {
                push(1, p.c * p.rho * (i as f64).powf(-p.s));
                push(i + 1, p.rho);
            }
            FamilyVariant::Jumpy(p) => {
                let back = (p.beta.ln() - (i - 1) as f64 * p.a.ln() - p.s * (i as f64).ln()).exp();
                push(1, back);
                push(i + 1, p.a);
                push(i + 2, p.gamma * p.a * p.a);
            }
            FamilyVariant::Petal(rule) => {
                if i == 1 {
                    let mut len = 1usize;
                    loop {
                        let head = if len == 1 { 1 } else { petal_base(len) + 1 };
                        if head > limit && len > 1 {
                            break;
                        }
                        if let PetalRule::Finite(q) = rule {
                            if len > q.len() {
                                break;
                            }
                        }
                        push(head, self.petal_edge_weight(len));
                        len += 1;
                    }
                } else {
                    let len = petal_length_of(i);
                    let last = petal_base(len) + len as u64 - 1;
                    let next = if i == last { 1 } else { i + 1 };
                    push(next, self.petal_edge_weight(len));
                }
            }
        }
        out.sort_by_key(|&(w, _)| w);
        out
    }

    fn petal_edge_weight(&self, len: usize) -> f64 {
        let q = self.coefficient(len);
        if q == 0.0 {
            0.0
        } else {
            (q.ln() / len as f64).exp()
        }
    }

    /// `k_n`: the largest vertex on a simple 1-cycle of length `n`.
    pub fn max_vertex_profile(&self, n: usize) -> VertexId {
        let k = match &self.variant {
            FamilyVariant::Chain(_) => n as u64,
            FamilyVariant::Jumpy(_) => 2 * n as u64 - 1,
            FamilyVariant::Petal(_) => 1 + (n as u64 * (n as u64 - 1)) / 2,
        };
        VertexId::of(k.max(1))
    }

    /// Principal subgraph of the infinite graph on `{1..=depth}`.
    pub fn realize_finite(&self, depth: u64) -> Result<LoadedGraph> {
        if depth == 0 {
            return Err(Error::ParameterOutOfRange("depth must be at least 1".to_string()));
        }
        let mut edges = BTreeMap::new();
        for i in 1..=depth {
            let u = VertexId::of(i);
            for (w, wt) in self.out_edges_within(u, depth) {
                if !wt.is_finite() {
                    return Err(Error::NonPositiveWeight {
                        from: i,
                        to: w.get(),
                        weight: wt,
                    });
                }
                edges.insert((u, w), wt);
            }
        }
        let vertices: BTreeSet<VertexId> = (1..=depth).map(VertexId::of).collect();
        LoadedGraph::from_map(edges, vertices)
    }

    /// Certified `Φ` or `Φ'` at `0 ≤ z ≤ R`.
    pub fn eval(&self, z: f64, order: EvalOrder) -> Result<CertifiedValue> {
        if !(z >= 0.0) {
            return Err(Error::ParameterOutOfRange(format!("z = {z} must be >= 0")));
        }
        if z > self.radius {
            return Err(Error::BeyondRadius {
                z,
                radius: self.radius,
            });
        }
        if z == self.radius {
            return Ok(match order {
                EvalOrder::Value => self.phi_at_radius,
                EvalOrder::Derivative => self.dphi_at_radius,
            });
        }
        Ok(match &self.variant {
            FamilyVariant::Chain(p) => zeta_power_eval(p.rho, p.s, p.c, z, order),
            FamilyVariant::Petal(PetalRule::ZetaPower { rho, s, c }) => {
                zeta_power_eval(*rho, *s, *c, z, order)
            }
            FamilyVariant::Petal(PetalRule::Finite(q)) => {
                let series = ReturnSeries::from_coefficients(self.base(), q, true)?;
                CertifiedValue::exact(series.eval(z, order))
            }
            FamilyVariant::Jumpy(p) => jumpy_eval(p, z, order),
        })
    }
}

fn zeta_power_at_radius(rho: f64, s: f64, c: f64) -> Result<(CertifiedValue, CertifiedValue)> {
    let phi = zeta(s)?.scale(c);
    let dphi = if s > 2.0 {
        zeta(s - 1.0)?.scale(c * rho)
    } else {
        CertifiedValue::infinite()
    };
    Ok((phi, dphi))
}

fn jumpy_eval(p: &JumpyParams, z: f64, order: EvalOrder) -> CertifiedValue {
    let g1 = 1.0 + p.gamma;
    let u = (g1 * z).min(1.0);
    let n_terms = p.unit.len();
    if u == 0.0 {
        return match order {
            EvalOrder::Value => CertifiedValue::exact(0.0),
            EvalOrder::Derivative => CertifiedValue::exact(p.beta * g1 * p.unit[0]),
        };
    }
    let lu = u.ln();
    let mut acc = KahanSum::new();
    for (i, &w) in p.unit.iter().enumerate() {
        let n = (i + 1) as f64;
        match order {
            EvalOrder::Value => acc.add(w * (n * lu).exp()),
            EvalOrder::Derivative => acc.add(n * w * ((n - 1.0) * lu).exp()),
        }
    }
    let window = 2.0 * WINDOW_MASS * zeta(p.s).map_or(f64::INFINITY, |z| z.hi());
    let (value, tail) = match order {
        EvalOrder::Value => (
            p.beta * acc.value(),
            p.beta / g1 * (weighted_power_tail(p.s, u, n_terms) + window),
        ),
        EvalOrder::Derivative => (
            p.beta * g1 * acc.value(),
            p.beta / u * weighted_power_tail(p.s - 1.0, u, n_terms) + p.beta * window,
        ),
    };
    if !tail.is_finite() {
        return CertifiedValue::new(value, f64::INFINITY);
    }
    let value = value + 0.5 * tail;
    CertifiedValue::new(value, 0.5 * tail + 8.0 * f64::EPSILON * value)
}

impl WeightSource for FamilyDescriptor {
    fn weight(&self, from: VertexId, to: VertexId) -> Option<f64> {
        self.edge_weight(from, to)
    }
}

/// `base(ℓ)`: the petal of length `ℓ ≥ 2` uses vertices `base+1 ..= base+ℓ−1`.
fn petal_base(len: usize) -> u64 {
    1 + ((len as u64 - 1) * (len as u64 - 2)) / 2
}

/// Length of the petal containing vertex `u ≥ 2`.
fn petal_length_of(u: u64) -> usize {
    let mut len = 2usize;
    while petal_base(len) + len as u64 - 1 < u {
        len += 1;
    }
    len
}

/// Free-function constructors and evaluators.
pub fn chain_family(rho: f64, s: f64, c: f64) -> Result<FamilyDescriptor> {
    FamilyDescriptor::chain(rho, s, c)
}

pub fn jumpy_family(gamma: f64, s: f64, target: RecurrenceClass) -> Result<FamilyDescriptor> {
    FamilyDescriptor::jumpy(gamma, s, target)
}

pub fn petal_family(rule: PetalRule) -> Result<FamilyDescriptor> {
    FamilyDescriptor::petal(rule)
}

pub fn family_eval(family: &FamilyDescriptor, z: f64, order: EvalOrder) -> Result<CertifiedValue> {
    family.eval(z, order)
}

pub fn realize_finite(family: &FamilyDescriptor, depth: u64) -> Result<LoadedGraph> {
    family.realize_finite(depth)
}

pub fn max_vertex_profile(family: &FamilyDescriptor, n: usize) -> VertexId {
    family.max_vertex_profile(n)
}

/// Parse a coefficient such as `"0.5"`, `"1/zeta(3)"` or `"2.5/zeta(2)"`.
pub fn parse_coefficient(text: &str) -> Result<f64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Parse(format!("cannot read coefficient {text:?}"));
    if let Some((num, rest)) = t.split_once('/') {
        let num: f64 = num.parse().map_err(|_| bad())?;
        let arg = rest
            .strip_prefix("zeta(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let s: f64 = arg.parse().map_err(|_| bad())?;
        Ok(num / zeta(s)?.value)
    } else {
        t.parse().map_err(|_| bad())
    }
}
