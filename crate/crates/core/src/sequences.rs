//! Nested finite subgraph sequences of a linear or petal family: the graphs
//! `G_n` and `G_{n,m}`, the regular scan over `G_n`, the greedy search for an
//! irregular sequence `G_{n_k, n_{k+1}}`, mixed sequences and verdicts.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cycle_series::{
    classify_family, return_series, visit_first_returns, EvalOrder, RecurrenceClass, ReturnSeries,
    DEFAULT_ENUMERATION_CAP,
};
use crate::equilibrium::parry_measure;
use crate::error::{Error, Result};
use crate::families::{FamilyDescriptor, FamilyVariant, PetalRule};
use crate::graph::{LoadedGraph, VertexId};
use crate::numeric::CertifiedValue;

/// Candidates tried per step of the irregular search (`m ≤ n_k + cap`).
pub const DEFAULT_SEARCH_CAP: usize = 5000;

/// Window of trailing records a verdict looks at.
pub const VERDICT_WINDOW: usize = 5;

/// Floor of the regular-verdict tolerance.
pub const REGULAR_TOLERANCE_FLOOR: f64 = 5e-3;

/// Irregular verdicts need the trajectory to exceed the reference by this factor.
pub const GROWTH_FACTOR: f64 = 10.0;

/// Oscillation amplitude, relative to the reference, for a no-limit verdict.
pub const OSCILLATION_FRACTION: f64 = 0.5;

/// Which finite subgraph of the family's infinite graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SubgraphSpec {
    /// Generated by all simple 1-cycles of length at most `n`.
    Gn(usize),
    /// `G_n` together with every simple 1-cycle of length exactly `m > n`.
    Gnm(usize, usize),
    /// Induced on `{1..=depth}`.
    Principal(u64),
    /// Union of the listed subgraphs.
    Mixed(Vec<SubgraphSpec>),
}

impl SubgraphSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SubgraphSpec::Gn(0) => Err(Error::InvalidSubgraphSpec { n: 0, m: 0 }),
            SubgraphSpec::Gn(_) => Ok(()),
            SubgraphSpec::Gnm(n, m) if *n == 0 || m <= n => {
                Err(Error::InvalidSubgraphSpec { n: *n, m: *m })
            }
            SubgraphSpec::Gnm(..) => Ok(()),
            SubgraphSpec::Principal(0) => {
                Err(Error::ParameterOutOfRange("principal depth must be at least 1".into()))
            }
            SubgraphSpec::Principal(_) => Ok(()),
            SubgraphSpec::Mixed(parts) if parts.is_empty() => Err(Error::EmptyFamily),
            SubgraphSpec::Mixed(parts) => parts.iter().try_for_each(|p| p.validate()),
        }
    }

    /// `(n, m)` labels for reports.
    pub fn labels(&self) -> (Option<usize>, Option<usize>) {
        match self {
            SubgraphSpec::Gn(n) => (Some(*n), None),
            SubgraphSpec::Gnm(n, m) => (Some(*n), Some(*m)),
            _ => (None, None),
        }
    }
}

fn is_zeta_family(f: &FamilyDescriptor) -> bool {
    !matches!(f.variant(), FamilyVariant::Jumpy(_))
}

/// Cycle lengths of the subgraph when the family's simple cycles cannot
/// combine into new ones (chain and petal families); `None` otherwise.
fn cycle_lengths(f: &FamilyDescriptor, spec: &SubgraphSpec) -> Option<BTreeSet<usize>> {
    if !is_zeta_family(f) {
        return None;
    }
    let present = |l: usize| f.coefficient(l) > 0.0 || f.scaled_coefficient(l).0 > 0.0;
    let set = match spec {
        SubgraphSpec::Gn(n) => (1..=*n).filter(|&l| present(l)).collect(),
        SubgraphSpec::Gnm(n, m) => (1..=*n).chain([*m]).filter(|&l| present(l)).collect(),
        SubgraphSpec::Principal(d) => {
            let limit = match f.variant() {
                FamilyVariant::Chain(_) => *d as usize,
                FamilyVariant::Petal(PetalRule::Finite(q)) => q.len(),
                _ => (1..).take_while(|&l| f.max_vertex_profile(l).get() <= *d).last().unwrap_or(0),
            };
            (1..=limit)
                .filter(|&l| f.max_vertex_profile(l).get() <= *d && present(l))
                .collect()
        }
        SubgraphSpec::Mixed(parts) => {
            let mut all = BTreeSet::new();
            for p in parts {
                all.extend(cycle_lengths(f, p)?);
            }
            all
        }
    };
    Some(set)
}

/// Rewrite a union whose cycle lengths are `{1..n}` or `{1..n} ∪ {m}` as
/// `Gn(n)` or `Gnm(n, m)`.
fn normalize(f: &FamilyDescriptor, spec: SubgraphSpec) -> SubgraphSpec {
    if !matches!(spec, SubgraphSpec::Mixed(_)) || !matches!(f.variant(), FamilyVariant::Chain(_)) {
        return spec;
    }
    let Some(lengths) = cycle_lengths(f, &spec) else {
        return spec;
    };
    let prefix = lengths.iter().enumerate().take_while(|(i, &l)| l == i + 1).count();
    match lengths.len() - prefix {
        0 if prefix > 0 => SubgraphSpec::Gn(prefix),
        1 if prefix > 0 => SubgraphSpec::Gnm(prefix, *lengths.iter().last().unwrap()),
        _ => spec,
    }
}

/// Subgraph generated by the simple 1-cycles whose length satisfies `keep`,
/// enumerated up to `max_len`.
fn generated_graph<K>(f: &FamilyDescriptor, max_len: usize, keep: K, cap: usize) -> Result<LoadedGraph>
where
    K: Fn(usize) -> bool,
{
    let limit = f.max_vertex_profile(max_len).get();
    let mut edges = BTreeMap::new();
    visit_first_returns(
        f.base(),
        max_len,
        |u| f.out_edges_within(u, limit),
        cap,
        |path, _| {
            if keep(path.len() - 1) {
                for pair in path.windows(2) {
                    let w = f.edge_weight(pair[0], pair[1]).expect("family edge");
                    edges.insert((pair[0], pair[1]), w);
                }
            }
        },
    )?;
    if edges.is_empty() {
        return Err(Error::EmptyFamily);
    }
    LoadedGraph::from_map(edges, BTreeSet::new())
}

/// `G_n`: the subgraph generated by all simple 1-cycles of length `≤ n`.
pub fn build_gn(f: &FamilyDescriptor, n: usize, cap: usize) -> Result<LoadedGraph> {
    SubgraphSpec::Gn(n).validate()?;
    generated_graph(f, n, |_| true, cap)
}

/// `G_{n,m}`: `G_n` together with all simple 1-cycles of length `m > n`.
pub fn build_gnm(f: &FamilyDescriptor, n: usize, m: usize, cap: usize) -> Result<LoadedGraph> {
    SubgraphSpec::Gnm(n, m).validate()?;
    generated_graph(f, m, |l| l <= n || l == m, cap)
}

/// Materialize a spec as a loaded graph.
pub fn resolve_graph(f: &FamilyDescriptor, spec: &SubgraphSpec, cap: usize) -> Result<LoadedGraph> {
    spec.validate()?;
    match spec {
        SubgraphSpec::Gn(n) => build_gn(f, *n, cap),
        SubgraphSpec::Gnm(n, m) => build_gnm(f, *n, *m, cap),
        SubgraphSpec::Principal(d) => f.realize_finite(*d),
        SubgraphSpec::Mixed(parts) => {
            let mut acc = resolve_graph(f, &parts[0], cap)?;
            for p in &parts[1..] {
                acc = acc.union(&resolve_graph(f, p, cap)?)?;
            }
            Ok(acc)
        }
    }
}

/// First-return polynomial at vertex 1 of the subgraph. Chain and petal
/// subgraphs are read off their cycle lengths; other families go through the
/// materialized graph.
pub fn resolve_series(f: &FamilyDescriptor, spec: &SubgraphSpec, cap: usize) -> Result<ReturnSeries> {
    spec.validate()?;
    if let Some(lengths) = cycle_lengths(f, spec) {
        if lengths.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let order = *lengths.iter().last().unwrap();
        let terms = lengths.iter().map(|&l| (l, f.scaled_coefficient(l).0)).collect();
        return ReturnSeries::from_scaled_terms(f.base(), f.series_scale(), terms, order, true);
    }
    let g = resolve_graph(f, spec, cap)?;
    return_series(&g, f.base(), g.vertex_count())
}

/// Is `outer ⊇ inner` as subgraphs of the family's graph?
pub fn spec_contains(f: &FamilyDescriptor, outer: &SubgraphSpec, inner: &SubgraphSpec, cap: usize) -> Result<bool> {
    if matches!(f.variant(), FamilyVariant::Chain(_)) {
        if let (Some(a), Some(b)) = (cycle_lengths(f, outer), cycle_lengths(f, inner)) {
            return Ok(a.is_superset(&b));
        }
    }
    let a = resolve_graph(f, outer, cap)?;
    let b = resolve_graph(f, inner, cap)?;
    Ok(b.is_subgraph_of(&a))
}

/// `a(n)`: 1 for `n ≤ k_2`, otherwise the `i` with `k_i < n ≤ k_{i+1}`.
pub fn a_of_n(f: &FamilyDescriptor, n: usize) -> usize {
    let k = |i: usize| f.max_vertex_profile(i).get() as usize;
    if n <= k(2) {
        return 1;
    }
    let mut i = 2;
    while k(i + 1) < n {
        i += 1;
    }
    i
}

/// Lengths `≤ max_len` of the simple cycles at `v` in a finite graph.
fn simple_cycle_lengths(g: &LoadedGraph, v: VertexId, max_len: usize, cap: usize) -> Result<BTreeSet<usize>> {
    let mut lengths = BTreeSet::new();
    let neighbours = |u: VertexId| {
        let i = g.index_of(u).expect("vertex");
        g.out_edges(i)
            .iter()
            .map(|&(w, wt)| (g.vertices()[w], wt))
            .collect::<Vec<_>>()
    };
    visit_first_returns(v, max_len.min(g.vertex_count()), neighbours, cap, |path, _| {
        lengths.insert(path.len() - 1);
    })?;
    Ok(lengths)
}

/// No simple 1-cycle in `G_{n,m}` has length strictly between `k_n` and `a(m)`.
pub fn structural_gap_check(f: &FamilyDescriptor, n: usize, m: usize, cap: usize) -> Result<bool> {
    let g = build_gnm(f, n, m, cap)?;
    let kn = f.max_vertex_profile(n).get() as usize;
    let am = a_of_n(f, m);
    if kn + 1 >= am {
        return Ok(true);
    }
    let lengths = simple_cycle_lengths(&g, f.base(), am - 1, cap)?;
    Ok(lengths.range(kn + 1..am).next().is_none())
}

/// Coefficients of `φ_n` and `φ_{n,m}` against the ambient `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub n: usize,
    pub m: usize,
    /// Ambient `q(i)`, `i = 1..=len`.
    pub ambient: Vec<f64>,
    /// `[z^i] φ_n`.
    pub phi_n: Vec<f64>,
    /// `[z^i] φ_{n,m}`.
    pub phi_nm: Vec<f64>,
}

/// Relative slack allowed when comparing coefficients computed two ways.
const COEFF_TOL: f64 = 1e-12;

impl Decomposition {
    fn at(v: &[f64], i: usize) -> f64 {
        v.get(i - 1).copied().unwrap_or(0.0)
    }

    /// `q^{(1)}(n, i) = [z^i] φ_n` for `i > n`.
    pub fn q1(&self, i: usize) -> f64 {
        Self::at(&self.phi_n, i)
    }

    /// `q^{(2)}(m, i) = [z^i] (φ_{n,m} − φ_n)`.
    pub fn q2(&self, i: usize) -> f64 {
        Self::at(&self.phi_nm, i) - Self::at(&self.phi_n, i)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= COEFF_TOL * a.abs().max(b.abs()) + 1e-300
    }

    /// `[z^i] φ_n = q(i)` for every `i ≤ n`.
    pub fn prefix_matches(&self) -> bool {
        (1..=self.n).all(|i| Self::close(self.q1(i), Self::at(&self.ambient, i)))
    }

    /// `0 ≤ q^{(1)}(n,i), q^{(2)}(m,i) ≤ q(i)` for every `i`.
    pub fn coefficients_bounded(&self) -> bool {
        let len = self.ambient.len().max(self.phi_nm.len());
        (1..=len).all(|i| {
            let q = Self::at(&self.ambient, i);
            let slack = COEFF_TOL * q;
            let q1 = self.q1(i);
            let q2 = self.q2(i);
            q1 >= -slack && q1 <= q + slack && q2 >= -slack && q2 <= q + slack
        })
    }

    /// The new terms sit in degrees `a(m)..=k_m`.
    pub fn support_in(&self, lo: usize, hi: usize) -> bool {
        let len = self.phi_nm.len().max(self.phi_n.len());
        (1..=len)
            .filter(|&i| i < lo || i > hi)
            .all(|i| Self::close(Self::at(&self.phi_nm, i), Self::at(&self.phi_n, i)))
    }

    /// `[z^m] φ_{n,m} = q(m)`: every simple cycle of length `m` is present.
    pub fn top_coefficient_matches(&self) -> bool {
        Self::close(Self::at(&self.phi_nm, self.m), Self::at(&self.ambient, self.m))
    }

    /// `q^{(2)}(m, m) = q(m)` with `q^{(2)}` the difference of the two
    /// polynomials. Holds when `m > k_n`, so that `φ_n` has no `z^m` term.
    pub fn q2_top_matches(&self) -> bool {
        Self::close(self.q2(self.m), Self::at(&self.ambient, self.m))
    }
}

/// Split `φ_{n,m}` into `φ_n` plus the terms added by the length-`m` cycles.
pub fn polynomial_decomposition(f: &FamilyDescriptor, n: usize, m: usize, cap: usize) -> Result<Decomposition> {
    let gnm = build_gnm(f, n, m, cap)?;
    let gn = build_gn(f, n, cap)?;
    let len = gnm.vertex_count();
    let phi_nm = return_series(&gnm, f.base(), len)?.coefficients();
    let phi_n = return_series(&gn, f.base(), len)?.coefficients();
    let ambient = (1..=len).map(|i| f.coefficient(i)).collect();
    Ok(Decomposition {
        n,
        m,
        ambient,
        phi_n,
        phi_nm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    RegularConsistent,
    IrregularNullConsistent,
    NoLimitConsistent,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::RegularConsistent => "RegularConsistent",
            Verdict::IrregularNullConsistent => "IrregularNullConsistent",
            Verdict::NoLimitConsistent => "NoLimitConsistent",
            Verdict::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub window: usize,
    pub tol_reg: f64,
    pub growth_factor: f64,
    pub tol_osc: f64,
}

impl Thresholds {
    pub fn for_reference(reference: CertifiedValue) -> Self {
        Self {
            window: VERDICT_WINDOW,
            tol_reg: (10.0 * reference.tail_bound).max(REGULAR_TOLERANCE_FLOOR),
            growth_factor: GROWTH_FACTOR,
            tol_osc: OSCILLATION_FRACTION * reference.value,
        }
    }
}

/// One subgraph of a sequence and its derivative data at its own unit root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceRecord {
    pub k: usize,
    pub spec: SubgraphSpec,
    /// `R(k)`: root of `φ_k = 1`.
    pub root: f64,
    pub dphi_at_root: f64,
    /// Equilibrium mass at vertex 1; from the Parry measure when the graph
    /// was materialized, otherwise `1/(R(k) φ'_k(R(k)))`.
    pub pi_v: f64,
    /// `|π_1 − 1/(R(k) φ'_k(R(k)))|` when the graph was materialized.
    pub kac_residual: Option<f64>,
    /// `R(k) − R`.
    pub delta: f64,
    /// `φ_k(R)` and `φ'_k(R)` at the ambient radius.
    pub phi_at_radius: f64,
    pub dphi_at_radius: f64,
    pub vertex_count: Option<usize>,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceReport {
    pub radius: f64,
    pub phi_at_radius: CertifiedValue,
    pub reference: CertifiedValue,
    pub thresholds: Thresholds,
    pub records: Vec<SequenceRecord>,
    pub verdict: Verdict,
}

impl SequenceReport {
    fn assemble(f: &FamilyDescriptor, records: Vec<SequenceRecord>) -> Self {
        let reference = f.dphi_at_radius();
        let verdict = verdict(&records, reference).unwrap_or(Verdict::Inconclusive);
        Self {
            radius: f.radius(),
            phi_at_radius: f.phi_at_radius(),
            reference,
            thresholds: Thresholds::for_reference(reference),
            records,
            verdict,
        }
    }

    /// Verdict over the first `i + 1` records, for each `i`.
    pub fn running_verdicts(&self) -> Vec<Verdict> {
        (0..self.records.len())
            .map(|i| verdict(&self.records[..=i], self.reference).unwrap_or(Verdict::Inconclusive))
            .collect()
    }
}

/// Classify a derivative trajectory against the ambient `φ'(R)`.
pub fn verdict(records: &[SequenceRecord], reference: CertifiedValue) -> Result<Verdict> {
    let th = Thresholds::for_reference(reference);
    if records.len() < th.window {
        return Err(Error::TooFewRecords {
            got: records.len(),
            need: th.window,
        });
    }
    let tail: Vec<f64> = records[records.len() - th.window..]
        .iter()
        .map(|r| r.dphi_at_root)
        .collect();
    let r = reference.value;
    if tail.iter().all(|d| (d - r).abs() <= th.tol_reg) {
        return Ok(Verdict::RegularConsistent);
    }
    let increasing = tail.windows(2).all(|w| w[1] > w[0]);
    if increasing && *tail.last().unwrap() >= th.growth_factor * r {
        return Ok(Verdict::IrregularNullConsistent);
    }
    let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min >= th.tol_osc {
        return Ok(Verdict::NoLimitConsistent);
    }
    Ok(Verdict::Inconclusive)
}

fn require_uplg(f: &FamilyDescriptor) -> Result<()> {
    let class = classify_family(f)?.class;
    if class == RecurrenceClass::UnstablePositive {
        Ok(())
    } else {
        Err(Error::NotUplg(class.to_string()))
    }
}

/// Root, derivatives and (optionally) the Parry mass of one subgraph.
fn evaluate_spec(
    f: &FamilyDescriptor,
    k: usize,
    spec: SubgraphSpec,
    materialize: bool,
    cap: usize,
) -> Result<SequenceRecord> {
    let start = Instant::now();
    let series = resolve_series(f, &spec, cap)?;
    let root = series.unit_root()?;
    let dphi = series.eval(root, EvalOrder::Derivative);
    let kac = 1.0 / (root * dphi);
    let (pi_v, kac_residual, vertex_count) = if materialize {
        let g = resolve_graph(f, &spec, cap)?;
        let mu = parry_measure(&g)?;
        let pi = mu.pi(f.base());
        (pi, Some((pi - kac).abs()), Some(g.vertex_count()))
    } else {
        (kac, None, None)
    };
    let r = f.radius();
    Ok(SequenceRecord {
        k,
        spec,
        root,
        dphi_at_root: dphi,
        pi_v,
        kac_residual,
        delta: root - r,
        phi_at_radius: series.eval(r, EvalOrder::Value),
        dphi_at_radius: series.eval(r, EvalOrder::Derivative),
        vertex_count,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}

/// Evaluate an explicit list of subgraphs as a sequence.
pub fn evaluate_sequence(
    f: &FamilyDescriptor,
    specs: &[SubgraphSpec],
    materialize: bool,
    cap: usize,
) -> Result<SequenceReport> {
    let records = specs
        .par_iter()
        .enumerate()
        .map(|(i, s)| evaluate_spec(f, i + 1, s.clone(), materialize, cap))
        .collect::<Result<Vec<_>>>()?;
    Ok(SequenceReport::assemble(f, records))
}

/// Per-`n` diagnostics of the regular scan beyond the common record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularDiagnostics {
    pub n: usize,
    /// `n (φ(R) − φ_n(R))`.
    pub tail_times_n: f64,
    /// `φ'_n(R_n) / φ'_n(R)` and its bound `(1 + δ_n/R)^{K n}`.
    pub ratio: f64,
    pub ratio_bound: f64,
    /// `2 (φ(R) − φ_n(R)) / φ'(R)`, the proof's bound on `δ_n` for large `n`.
    pub delta_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularScan {
    pub report: SequenceReport,
    pub diagnostics: Vec<RegularDiagnostics>,
    pub jump_bound: usize,
}

impl RegularScan {
    /// `R_n ≥ R` at every `n`.
    pub fn roots_above_radius(&self) -> bool {
        self.report.records.iter().all(|r| r.root >= self.report.radius)
    }

    /// `φ'_n(R_n) ≥ φ'_n(R)` at every `n`.
    pub fn derivative_at_root_dominates(&self) -> bool {
        self.report.records.iter().all(|r| r.dphi_at_root >= r.dphi_at_radius)
    }

    /// `φ'_n(R) ≤ φ'_{n+1}(R)` at every `n`.
    pub fn derivative_at_radius_monotone(&self) -> bool {
        self.report
            .records
            .windows(2)
            .all(|w| w[0].dphi_at_radius <= w[1].dphi_at_radius)
    }

    /// `R_n` strictly decreasing.
    pub fn roots_decreasing(&self) -> bool {
        self.report.records.windows(2).all(|w| w[1].root < w[0].root)
    }

    /// The degree-scaling bound on `φ'_n(R_n)/φ'_n(R)` at every `n`.
    pub fn ratio_bound_holds(&self) -> bool {
        self.diagnostics.iter().all(|d| d.ratio <= d.ratio_bound)
    }
}

/// Records for `G_1, …, G_{n_max}` with the monotonicity and tail
/// diagnostics used to argue that `φ'_n(R_n) → φ'(R)`.
pub fn regular_scan(f: &FamilyDescriptor, n_max: usize) -> Result<RegularScan> {
    require_uplg(f)?;
    let jump_bound = f.bounded_jumps().ok_or(Error::NoBoundedJumps)?;
    if n_max == 0 {
        return Err(Error::ParameterOutOfRange("n_max must be at least 1".into()));
    }
    let specs: Vec<SubgraphSpec> = (1..=n_max).map(SubgraphSpec::Gn).collect();
    let report = evaluate_sequence(f, &specs, true, DEFAULT_ENUMERATION_CAP)?;
    let r = f.radius();
    let phi_r = f.phi_at_radius().value;
    let dphi_r = f.dphi_at_radius().value;
    let diagnostics = report
        .records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let n = i + 1;
            let gap = phi_r - rec.phi_at_radius;
            RegularDiagnostics {
                n,
                tail_times_n: n as f64 * gap,
                ratio: rec.dphi_at_root / rec.dphi_at_radius,
                ratio_bound: (1.0 + rec.delta / r).powf((jump_bound * n) as f64),
                delta_bound: 2.0 * gap / dphi_r,
            }
        })
        .collect();
    Ok(RegularScan {
        report,
        diagnostics,
        jump_bound,
    })
}

/// One candidate `(n, m)` examined by the irregular search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    /// `R_{n,m}`.
    pub root: f64,
    /// `R_n`.
    pub root_n: f64,
    pub dphi: f64,
    /// `a(m) R_{n,m}^{-1} (1 − φ_n(R_{n,m}))`.
    pub lower_bound: f64,
}

impl Probe {
    pub fn lower_bound_holds(&self) -> bool {
        self.dphi >= self.lower_bound * (1.0 - 1e-12)
    }

    pub fn root_ordered(&self, radius: f64) -> bool {
        radius < self.root && self.root < self.root_n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exhaustion {
    pub k: usize,
    pub n: usize,
    pub best_m: usize,
    pub best_dphi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrregularOutcome {
    /// `n_1, n_2, …` as far as the search got.
    pub indices: Vec<usize>,
    pub report: SequenceReport,
    pub probes: Vec<Probe>,
    pub exhausted: Option<Exhaustion>,
}

fn probe(f: &FamilyDescriptor, k: usize, n: usize, m: usize, phi_n: &ReturnSeries, root_n: f64, cap: usize) -> Result<Probe> {
    let series = if is_zeta_family(f) {
        let mut terms = phi_n.scaled_terms().to_vec();
        terms.push((m, f.scaled_coefficient(m).0));
        ReturnSeries::from_scaled_terms(f.base(), phi_n.scale(), terms, m, true)?
    } else {
        resolve_series(f, &SubgraphSpec::Gnm(n, m), cap)?
    };
    let root = series.unit_root()?;
    let dphi = series.eval(root, EvalOrder::Derivative);
    let lower_bound = a_of_n(f, m) as f64 / root * (1.0 - phi_n.eval(root, EvalOrder::Value));
    Ok(Probe {
        k,
        n,
        m,
        root,
        root_n,
        dphi,
        lower_bound,
    })
}

/// Chunk of candidates scanned in parallel by the irregular search.
const SCAN_CHUNK: usize = 256;

/// Greedy construction of `n_1 < n_2 < …` with
/// `φ'_{n_k, n_{k+1}}(R_{n_k, n_{k+1}}) > k`, taking the smallest such
/// `n_{k+1} ≤ n_k + cap` at each step. Stops early when a step exhausts its
/// candidates.
pub fn run_irregular_search(f: &FamilyDescriptor, k_max: usize, n1: usize, cap: usize) -> Result<IrregularOutcome> {
    require_uplg(f)?;
    if n1 == 0 {
        return Err(Error::ParameterOutOfRange("n_1 must be at least 1".into()));
    }
    let enum_cap = DEFAULT_ENUMERATION_CAP;
    let mut indices = vec![n1];
    let mut probes = Vec::new();
    let mut specs = Vec::new();
    let mut exhausted = None;
    let mut n = n1;
    for k in 1..=k_max {
        let phi_n = resolve_series(f, &SubgraphSpec::Gn(n), enum_cap)?;
        let root_n = phi_n.unit_root()?;
        let threshold = k as f64;
        let mut found = None;
        let mut best: Option<Probe> = None;
        let mut next = n + 1;
        while found.is_none() && next <= n + cap {
            let end = (next + SCAN_CHUNK - 1).min(n + cap);
            let chunk = (next..=end)
                .into_par_iter()
                .map(|m| probe(f, k, n, m, &phi_n, root_n, enum_cap))
                .collect::<Result<Vec<_>>>()?;
            for p in chunk {
                probes.push(p);
                if best.is_none_or(|b| p.dphi > b.dphi) {
                    best = Some(p);
                }
                if p.dphi > threshold {
                    found = Some(p.m);
                    break;
                }
            }
            next = end + 1;
        }
        match found {
            Some(m) => {
                indices.push(m);
                specs.push(SubgraphSpec::Gnm(n, m));
                n = m;
            }
            None => {
                let b = best.expect("at least one candidate");
                exhausted = Some(Exhaustion {
                    k,
                    n,
                    best_m: b.m,
                    best_dphi: b.dphi,
                });
                break;
            }
        }
    }
    let report = evaluate_sequence(f, &specs, true, enum_cap)?;
    Ok(IrregularOutcome {
        indices,
        report,
        probes,
        exhausted,
    })
}

/// Like [`run_irregular_search`], but exhausting a step is an error.
pub fn irregular_search(f: &FamilyDescriptor, k_max: usize, n1: usize, cap: usize) -> Result<(Vec<usize>, SequenceReport)> {
    let out = run_irregular_search(f, k_max, n1, cap)?;
    match out.exhausted {
        Some(e) => Err(Error::SearchExhausted {
            k: e.k,
            n: e.n,
            best_m: e.best_m,
            best_dphi: e.best_dphi,
        }),
        None => Ok((out.indices, out.report)),
    }
}

/// Interleaving rule for [`mix_sequences`]: take `from_a` subgraphs from the
/// first input, then `from_b` from the second, and repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub from_a: usize,
    pub from_b: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { from_a: 1, from_b: 1 }
    }
}

fn check_nested(f: &FamilyDescriptor, seq: &[SubgraphSpec], cap: usize) -> Result<()> {
    for (i, w) in seq.windows(2).enumerate() {
        if !spec_contains(f, &w[1], &w[0], cap)? {
            return Err(Error::NotNested(i + 1));
        }
    }
    Ok(())
}

/// Interleave two nested sequences into one nested sequence.
///
/// At each turn the chosen input is advanced past subgraphs already covered
/// by the sequence so far. The first remaining subgraph that contains
/// everything chosen so far is taken if there is one; otherwise the next
/// subgraph is unioned with the current one. When an input runs out the
/// other one continues alone.
pub fn mix_sequences(
    f: &FamilyDescriptor,
    a: &[SubgraphSpec],
    b: &[SubgraphSpec],
    schedule: Schedule,
    cap: usize,
) -> Result<Vec<SubgraphSpec>> {
    check_nested(f, a, cap)?;
    check_nested(f, b, cap)?;
    if b.is_empty() {
        return Ok(a.to_vec());
    }
    if a.is_empty() {
        return Ok(b.to_vec());
    }
    let inputs = [a, b];
    let quota = [schedule.from_a.max(1), schedule.from_b.max(1)];
    let mut pos = [0usize, 0usize];
    let mut out: Vec<SubgraphSpec> = Vec::new();
    let mut turn = 0usize;
    let mut taken = 0usize;
    loop {
        let src = inputs[turn];
        let cur = out.last().cloned();
        // Skip what the sequence already covers.
        while pos[turn] < src.len() {
            match &cur {
                Some(c) if spec_contains(f, c, &src[pos[turn]], cap)? => pos[turn] += 1,
                _ => break,
            }
        }
        let other = 1 - turn;
        if pos[turn] >= src.len() {
            if pos[other] >= inputs[other].len() {
                break;
            }
            turn = other;
            taken = 0;
            continue;
        }
        let choice = match &cur {
            None => src[pos[turn]].clone(),
            Some(c) => {
                let mut superset = None;
                for (j, s) in src.iter().enumerate().skip(pos[turn]) {
                    if spec_contains(f, s, c, cap)? {
                        superset = Some(j);
                        break;
                    }
                }
                match superset {
                    Some(j) => {
                        pos[turn] = j;
                        src[j].clone()
                    }
                    None => normalize(f, SubgraphSpec::Mixed(vec![c.clone(), src[pos[turn]].clone()])),
                }
            }
        };
        pos[turn] += 1;
        out.push(choice);
        taken += 1;
        if taken >= quota[turn] && pos[other] < inputs[other].len() {
            turn = other;
            taken = 0;
        }
    }
    Ok(out)
}

/// Both sides of the degree-scaling inequality `a^d P(b) ≤ b^d P(a)` for a
/// polynomial with nonnegative coefficients `coeffs[i]` of `x^i`,
/// `deg P ≤ d`, `0 < a ≤ b`.
pub fn degree_scaling_sides(coeffs: &[f64], d: usize, a: f64, b: f64) -> (f64, f64) {
    let eval = |x: f64| coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
    let d = d as i32;
    (a.powi(d) * eval(b), b.powi(d) * eval(a))
}
