//! First-return series `Φ_{v,v|v}(z) = Σ q_v(n) z^n` and the recurrence
//! classification built on it.
//!
//! `q_v(n)` is the total weight of the length-`n` paths from `v` back to `v`
//! that do not visit `v` in between. It is computed with taboo-matrix powers
//! (delete row and column `v`); depth-first enumeration is kept as an
//! independent oracle.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::families::FamilyDescriptor;
use crate::graph::{CyclePath, LoadedGraph, VertexId};
use crate::numeric::{solve_increasing, KahanSum, RootOptions};

/// Default bound on the number of DFS nodes an enumeration may expand.
pub const DEFAULT_ENUMERATION_CAP: usize = 5_000_000;

/// Width below which a certified interval around 1 is accepted as `Φ(R) = 1`.
pub const EQUALITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalOrder {
    Value,
    Derivative,
}

/// Coefficients of a first-return series.
///
/// Stored as `q(n) = a_n · scale^n` so that long cycles of a family with
/// radius `1/scale` stay representable; finite graphs use `scale = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    base: VertexId,
    scale: f64,
    terms: Vec<(usize, f64)>,
    order: usize,
    exact: bool,
    closed_form_radius: Option<f64>,
}

impl ReturnSeries {
    /// `coeffs[i]` is `q(i + 1)`.
    pub fn from_coefficients(base: VertexId, coeffs: &[f64], exact: bool) -> Result<Self> {
        let terms = coeffs
            .iter()
            .enumerate()
            .map(|(i, &q)| (i + 1, q))
            .collect();
        Self::from_scaled_terms(base, 1.0, terms, coeffs.len(), exact)
    }

    /// Sparse constructor: `terms` are `(n, a_n)` with `q(n) = a_n · scale^n`.
    pub fn from_scaled_terms(
        base: VertexId,
        scale: f64,
        mut terms: Vec<(usize, f64)>,
        order: usize,
        exact: bool,
    ) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::ParameterOutOfRange(format!("series scale {scale}")));
        }
        if let Some(&(n, a)) = terms.iter().find(|(n, a)| *n == 0 || !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!(
                "coefficient {a} at n = {n}"
            )));
        }
        terms.retain(|&(_, a)| a > 0.0);
        terms.sort_by_key(|&(n, _)| n);
        terms.dedup_by(|b, a| {
            if a.0 == b.0 {
                a.1 += b.1;
                true
            } else {
                false
            }
        });
        let order = order.max(terms.last().map_or(0, |t| t.0));
        Ok(Self {
            base,
            scale,
            terms,
            order,
            exact,
            closed_form_radius: None,
        })
    }

    pub(crate) fn with_closed_form_radius(mut self, radius: f64) -> Self {
        self.closed_form_radius = Some(radius);
        self
    }

    pub fn base(&self) -> VertexId {
        self.base
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Number of coefficients known (`q(1..=order)`).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Nonzero terms `(n, a_n)` with `q(n) = a_n · scale^n`.
    pub fn scaled_terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn coefficient(&self, n: usize) -> f64 {
        match self.terms.binary_search_by_key(&n, |t| t.0) {
            Ok(i) => scaled_power(self.terms[i].1, self.scale, n),
            Err(_) => 0.0,
        }
    }

    /// `q(1..=order)` densely.
    pub fn coefficients(&self) -> Vec<f64> {
        (1..=self.order).map(|n| self.coefficient(n)).collect()
    }

    /// Largest `n` with `q(n) > 0`.
    pub fn degree(&self) -> Option<usize> {
        self.terms.last().map(|t| t.0)
    }

    /// `Σ q(n) z^n` or `Σ n q(n) z^{n-1}` with compensated summation.
    pub fn eval(&self, z: f64, order: EvalOrder) -> f64 {
        let (v, d) = self.eval_scaled(self.scale * z);
        match order {
            EvalOrder::Value => v,
            EvalOrder::Derivative => self.scale * d,
        }
    }

    /// Value and derivative in the scaled variable `u = scale · z`.
    fn eval_scaled(&self, u: f64) -> (f64, f64) {
        let mut value = KahanSum::new();
        let mut deriv = KahanSum::new();
        for &(n, a) in &self.terms {
            let p = pow_usize(u, n - 1);
            value.add(a * p * u);
            deriv.add(n as f64 * a * p);
        }
        (value.value(), deriv.value())
    }

    /// The unique `z* > 0` with `Φ(z*) = 1`; the series must be a polynomial.
    pub fn unit_root(&self) -> Result<f64> {
        if !self.exact {
            return Err(Error::TruncatedSeries);
        }
        self.unit_root_of_truncation()
    }

    /// Unit root of the known coefficients regardless of exactness.
    pub fn unit_root_of_truncation(&self) -> Result<f64> {
        if self.terms.is_empty() {
            return Err(Error::AllZeroCoefficients);
        }
        let u = solve_increasing(|u| self.eval_scaled(u), 1.0, 1.0, RootOptions::default())?;
        Ok(u / self.scale)
    }

    /// Cauchy–Hadamard estimate `1 / limsup q(n)^{1/n}`.
    pub fn radius_estimate(&self) -> RadiusEstimate {
        if self.exact {
            return RadiusEstimate::certified(f64::INFINITY);
        }
        if let Some(r) = self.closed_form_radius {
            return RadiusEstimate::certified(r);
        }
        let from = self.order / 2;
        let root = self
            .terms
            .iter()
            .filter(|t| t.0 >= from.max(1))
            .map(|&(n, a)| self.scale * a.powf(1.0 / n as f64))
            .fold(0.0f64, f64::max);
        RadiusEstimate {
            value: if root > 0.0 { 1.0 / root } else { f64::INFINITY },
            certified: false,
            lower: None,
            upper: None,
        }
    }
}

fn pow_usize(x: f64, n: usize) -> f64 {
    if n <= i32::MAX as usize {
        x.powi(n as i32)
    } else {
        x.powf(n as f64)
    }
}

fn scaled_power(a: f64, scale: f64, n: usize) -> f64 {
    let direct = a * pow_usize(scale, n);
    if scale == 1.0 || direct.is_normal() {
        direct
    } else {
        (a.ln() + n as f64 * scale.ln()).exp()
    }
}

/// Free-function form of [`ReturnSeries::eval`].
pub fn eval_series(series: &ReturnSeries, z: f64, order: EvalOrder) -> f64 {
    series.eval(z, order)
}

/// Free-function form of [`ReturnSeries::unit_root`].
pub fn solve_unit_root(series: &ReturnSeries) -> Result<f64> {
    series.unit_root()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusEstimate {
    pub value: f64,
    pub certified: bool,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl RadiusEstimate {
    pub fn certified(value: f64) -> Self {
        Self {
            value,
            certified: true,
            lower: Some(value),
            upper: Some(value),
        }
    }
}

pub fn radius_estimate(series: &ReturnSeries) -> RadiusEstimate {
    series.radius_estimate()
}

fn base_index(g: &LoadedGraph, v: VertexId) -> Result<usize> {
    g.index_of(v).ok_or(Error::VertexNotInGraph(v))
}

/// `q_v(n)` by taboo-matrix powers.
pub fn simple_cycle_sum(g: &LoadedGraph, v: VertexId, n: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    Ok(taboo_coefficients(g, base_index(g, v)?, n)[n - 1])
}

/// `q_v(1..=n)`: row `v` times powers of the taboo matrix times column `v`.
fn taboo_coefficients(g: &LoadedGraph, vi: usize, n: usize) -> Vec<f64> {
    let size = g.vertex_count();
    let mut out = Vec::with_capacity(n);
    let mut self_loop = 0.0;
    // x[u] = weight of length-j paths v -> u avoiding v after the start.
    let mut x = vec![0.0; size];
    for &(w, wt) in g.out_edges(vi) {
        if w == vi {
            self_loop = wt;
        } else {
            x[w] = wt;
        }
    }
    if n >= 1 {
        out.push(self_loop);
    }
    let mut next = vec![0.0; size];
    for _ in 2..=n {
        let mut closing = KahanSum::new();
        next.iter_mut().for_each(|e| *e = 0.0);
        for u in 0..size {
            let xu = x[u];
            if xu == 0.0 {
                continue;
            }
            for &(w, wt) in g.out_edges(u) {
                if w == vi {
                    closing.add(xu * wt);
                } else {
                    next[w] += xu * wt;
                }
            }
        }
        out.push(closing.value());
        std::mem::swap(&mut x, &mut next);
    }
    out
}

/// Is the graph with vertex `v` deleted acyclic? If so, returns the length of
/// the longest simple `v`-cycle (0 when there is none).
fn taboo_longest_cycle(g: &LoadedGraph, vi: usize) -> Option<usize> {
    let size = g.vertex_count();
    let mut indeg = vec![0usize; size];
    for u in (0..size).filter(|&u| u != vi) {
        for &(w, _) in g.out_edges(u) {
            if w != vi {
                indeg[w] += 1;
            }
        }
    }
    let mut order = Vec::with_capacity(size);
    let mut stack: Vec<usize> = (0..size).filter(|&u| u != vi && indeg[u] == 0).collect();
    while let Some(u) = stack.pop() {
        order.push(u);
        for &(w, _) in g.out_edges(u) {
            if w != vi {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    stack.push(w);
                }
            }
        }
    }
    if order.len() != size - 1 {
        return None;
    }
    // longest[u] = most edges on a v-avoiding path from an out-neighbour of v to u.
    let mut longest = vec![None::<usize>; size];
    let mut best = 0usize;
    for &(w, _) in g.out_edges(vi) {
        if w == vi {
            best = best.max(1);
        } else {
            longest[w] = Some(0);
        }
    }
    for &u in &order {
        if let Some(d) = longest[u] {
            for &(w, _) in g.out_edges(u) {
                if w == vi {
                    best = best.max(d + 2);
                } else {
                    longest[w] = Some(longest[w].map_or(d + 1, |e| e.max(d + 1)));
                }
            }
        }
    }
    Some(best)
}

/// First `n_max` coefficients of the first-return series of a finite graph.
/// The result is exact when the series is a polynomial of degree ≤ `n_max`.
pub fn return_series(g: &LoadedGraph, v: VertexId, n_max: usize) -> Result<ReturnSeries> {
    let vi = base_index(g, v)?;
    let coeffs = taboo_coefficients(g, vi, n_max);
    let exact = taboo_longest_cycle(g, vi).is_some_and(|len| len <= n_max);
    ReturnSeries::from_coefficients(v, &coeffs, exact)
}

/// Depth-first walk over all first-return paths from `base` of length at
/// most `max_len`. `neighbours` yields out-edges; `visit` receives each
/// closed path (vertex sequence including the final return) and its weight.
/// Returns the number of DFS nodes expanded.
pub(crate) fn visit_first_returns<N, V>(
    base: VertexId,
    max_len: usize,
    mut neighbours: N,
    cap: usize,
    mut visit: V,
) -> Result<usize>
where
    N: FnMut(VertexId) -> Vec<(VertexId, f64)>,
    V: FnMut(&[VertexId], f64),
{
    if max_len == 0 {
        return Ok(0);
    }
    let mut path = vec![base];
    let mut weights = vec![1.0f64];
    let mut stack: Vec<(Vec<(VertexId, f64)>, usize)> = vec![(neighbours(base), 0)];
    let mut expanded = 1usize;
    loop {
        let Some((nbrs, idx)) = stack.last_mut() else {
            break;
        };
        if *idx >= nbrs.len() {
            stack.pop();
            path.pop();
            weights.pop();
            continue;
        }
        let (w, wt) = nbrs[*idx];
        *idx += 1;
        let edges_after_step = path.len();
        let weight = weights[weights.len() - 1] * wt;
        if w == base {
            path.push(base);
            visit(&path, weight);
            path.pop();
        } else if edges_after_step < max_len {
            expanded += 1;
            if expanded > cap {
                return Err(Error::CapExceeded { cap });
            }
            path.push(w);
            weights.push(weight);
            stack.push((neighbours(w), 0));
        }
    }
    Ok(expanded)
}

pub(crate) fn graph_neighbours(g: &LoadedGraph) -> impl FnMut(VertexId) -> Vec<(VertexId, f64)> + '_ {
    move |u| {
        let i = g.index_of(u).expect("vertex from the graph");
        g.out_edges(i)
            .iter()
            .map(|&(w, wt)| (g.vertices()[w], wt))
            .collect()
    }
}

/// Every simple `v`-cycle of length exactly `n`, by exhaustive DFS.
pub fn enumerate_simple_cycles(
    g: &LoadedGraph,
    v: VertexId,
    n: usize,
    cap: usize,
) -> Result<Vec<CyclePath>> {
    base_index(g, v)?;
    let mut found = Vec::new();
    visit_first_returns(v, n, graph_neighbours(g), cap, |path, _| {
        if path.len() == n + 1 {
            found.push(CyclePath::new(path.to_vec()).expect("closed path"));
        }
    })?;
    Ok(found)
}

/// First-return function of a finite graph at `v`, valid on `[0, R_v)`.
///
/// When the graph minus `v` is acyclic the series is a polynomial; otherwise
/// it is evaluated in resolvent form `z W_vv + z² r (I − zB)⁻¹ c`.
#[derive(Debug, Clone)]
pub enum FirstReturn {
    Polynomial(ReturnSeries),
    Resolvent(Resolvent),
}

#[derive(Debug, Clone)]
pub struct Resolvent {
    self_loop: f64,
    row: DMatrix<f64>,
    col: DMatrix<f64>,
    taboo: DMatrix<f64>,
}

impl Resolvent {
    fn new(g: &LoadedGraph, vi: usize) -> Self {
        let size = g.vertex_count();
        let others: Vec<usize> = (0..size).filter(|&u| u != vi).collect();
        let pos = |u: usize| if u < vi { u } else { u - 1 };
        let k = others.len();
        let mut row = DMatrix::zeros(1, k);
        let mut col = DMatrix::zeros(k, 1);
        let mut taboo = DMatrix::zeros(k, k);
        let mut self_loop = 0.0;
        for u in 0..size {
            for &(w, wt) in g.out_edges(u) {
                match (u == vi, w == vi) {
                    (true, true) => self_loop = wt,
                    (true, false) => row[(0, pos(w))] = wt,
                    (false, true) => col[(pos(u), 0)] = wt,
                    (false, false) => taboo[(pos(u), pos(w))] = wt,
                }
            }
        }
        Self {
            self_loop,
            row,
            col,
            taboo,
        }
    }

    /// `(I − zB)⁻¹` when it exists and is entrywise nonnegative, which holds
    /// exactly when `z ρ(B) < 1`.
    fn neumann_inverse(&self, z: f64) -> Option<DMatrix<f64>> {
        let k = self.taboo.nrows();
        let m = DMatrix::<f64>::identity(k, k) - &self.taboo * z;
        let inv = m.try_inverse()?;
        let scale = inv.amax().max(1.0);
        if inv.iter().all(|&e| e.is_finite() && e >= -1e-12 * scale) {
            Some(inv)
        } else {
            None
        }
    }

    fn eval(&self, z: f64) -> (f64, f64) {
        let Some(inv) = self.neumann_inverse(z) else {
            return (f64::INFINITY, f64::INFINITY);
        };
        let mc = &inv * &self.col;
        let rm = &self.row * &inv;
        let rmc = (&self.row * &mc)[(0, 0)];
        let rmbmc = (&rm * &self.taboo * &mc)[(0, 0)];
        let value = z * self.self_loop + z * z * rmc;
        let deriv = self.self_loop + 2.0 * z * rmc + z * z * rmbmc;
        (value, deriv)
    }

    /// `1/ρ(B)` by bisection on the Neumann-inverse criterion.
    fn radius(&self) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut steps = 0;
        while self.neumann_inverse(hi).is_some() {
            lo = hi;
            hi *= 2.0;
            steps += 1;
            if steps > 2000 {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.neumann_inverse(mid).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

impl FirstReturn {
    pub fn new(g: &LoadedGraph, v: VertexId) -> Result<Self> {
        let vi = base_index(g, v)?;
        match taboo_longest_cycle(g, vi) {
            Some(len) => {
                let coeffs = taboo_coefficients(g, vi, len.max(1));
                Ok(FirstReturn::Polynomial(ReturnSeries::from_coefficients(
                    v, &coeffs, true,
                )?))
            }
            None => Ok(FirstReturn::Resolvent(Resolvent::new(g, vi))),
        }
    }

    pub fn eval(&self, z: f64, order: EvalOrder) -> f64 {
        let (v, d) = match self {
            FirstReturn::Polynomial(s) => (s.eval(z, EvalOrder::Value), s.eval(z, EvalOrder::Derivative)),
            FirstReturn::Resolvent(r) => r.eval(z),
        };
        match order {
            EvalOrder::Value => v,
            EvalOrder::Derivative => d,
        }
    }

    pub fn unit_root(&self) -> Result<f64> {
        match self {
            FirstReturn::Polynomial(s) => s.unit_root(),
            FirstReturn::Resolvent(r) => {
                let start = 1.0 / (r.taboo.row_sum().amax() + r.self_loop + r.row.amax()).max(1.0);
                solve_increasing(|z| r.eval(z), 1.0, start, RootOptions::default())
            }
        }
    }

    /// Radius of convergence `R_v`.
    pub fn radius(&self) -> f64 {
        match self {
            FirstReturn::Polynomial(_) => f64::INFINITY,
            FirstReturn::Resolvent(r) => r.radius(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RecurrenceClass {
    Transient,
    NullRecurrent,
    UnstablePositive,
    StablePositive,
}

impl std::fmt::Display for RecurrenceClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RecurrenceClass::Transient => "Transient",
            RecurrenceClass::NullRecurrent => "NullRecurrent",
            RecurrenceClass::UnstablePositive => "UnstablePositive",
            RecurrenceClass::StablePositive => "StablePositive",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Classification with the witness data that justifies it.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: RecurrenceClass,
    /// `R_v`, possibly infinite.
    pub radius: f64,
    pub phi_at_radius: Interval,
    pub dphi_at_radius: Interval,
    /// For finite graphs: the root of `Φ = 1` and `Φ'` there.
    pub unit_root: Option<f64>,
    pub dphi_at_unit_root: Option<f64>,
}

/// A finite connected loaded graph is always stable positive: `Φ` grows
/// without bound towards `R_v`, so it crosses 1 strictly inside the disk.
pub fn classify_finite(g: &LoadedGraph, v: VertexId) -> Result<Classification> {
    if !g.contains_vertex(v) {
        return Err(Error::VertexNotInGraph(v));
    }
    if !g.is_connected() {
        return Err(Error::NotConnected);
    }
    let fr = FirstReturn::new(g, v)?;
    let z = fr.unit_root()?;
    let dphi = fr.eval(z, EvalOrder::Derivative);
    Ok(Classification {
        class: RecurrenceClass::StablePositive,
        radius: fr.radius(),
        phi_at_radius: Interval::point(f64::INFINITY),
        dphi_at_radius: Interval::point(f64::INFINITY),
        unit_root: Some(z),
        dphi_at_unit_root: Some(dphi),
    })
}

/// Classify an infinite family from its certified closed-form values of
/// `Φ(R)` and `Φ'(R)`.
pub fn classify_family(family: &FamilyDescriptor) -> Result<Classification> {
    let phi = family.phi_at_radius();
    let dphi = family.dphi_at_radius();
    let phi_iv = Interval {
        lo: phi.lo(),
        hi: phi.hi(),
    };
    let dphi_iv = if dphi.is_infinite() {
        Interval::point(f64::INFINITY)
    } else {
        Interval {
            lo: dphi.lo(),
            hi: dphi.hi(),
        }
    };
    let class = if phi.is_infinite() || phi_iv.lo > 1.0 {
        RecurrenceClass::StablePositive
    } else if phi_iv.hi < 1.0 {
        RecurrenceClass::Transient
    } else if phi_iv.hi - phi_iv.lo <= EQUALITY_TOLERANCE {
        if dphi.is_infinite() {
            RecurrenceClass::NullRecurrent
        } else {
            RecurrenceClass::UnstablePositive
        }
    } else {
        return Err(Error::Inconclusive(format!(
            "Φ(R) ∈ [{}, {}] straddles 1",
            phi_iv.lo, phi_iv.hi
        )));
    };
    Ok(Classification {
        class,
        radius: family.radius(),
        phi_at_radius: phi_iv,
        dphi_at_radius: dphi_iv,
        unit_root: None,
        dphi_at_unit_root: None,
    })
}
