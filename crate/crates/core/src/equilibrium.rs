//! Perron eigendata and the equilibrium (Parry) Markov measure of a finite
//! connected loaded graph.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::cycle_series::{EvalOrder, FirstReturn, ReturnSeries};
use crate::error::{Error, Result};
use crate::graph::{LoadedGraph, VertexId};

/// Power iteration budget.
pub const MAX_ITERATIONS: usize = 100_000;

/// Eigen-equation residual accepted, relative to `λ · max r`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Largest graph refined with a dense LU factorisation.
const DENSE_LIMIT: usize = 1500;

#[derive(Debug, Clone, PartialEq)]
pub struct PerronData {
    pub vertices: Vec<VertexId>,
    pub lambda: f64,
    /// Right eigenvector, `r[0] = 1` (smallest vertex id).
    pub right: Vec<f64>,
    /// Left eigenvector with `l · r = 1`.
    pub left: Vec<f64>,
}

impl PerronData {
    pub fn right_residual(&self, g: &LoadedGraph) -> f64 {
        residual(g, &self.right, self.lambda, false)
    }

    pub fn left_residual(&self, g: &LoadedGraph) -> f64 {
        residual(g, &self.left, self.lambda, true)
    }
}

fn multiply(g: &LoadedGraph, x: &[f64], transpose: bool) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for u in 0..x.len() {
        for &(w, wt) in g.out_edges(u) {
            if transpose {
                y[w] += x[u] * wt;
            } else {
                y[u] += wt * x[w];
            }
        }
    }
    y
}

/// `max |(Ax − λx)_i| / (λ max x)`.
fn residual(g: &LoadedGraph, x: &[f64], lambda: f64, transpose: bool) -> f64 {
    let y = multiply(g, x, transpose);
    let scale = lambda * x.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    y.iter()
        .zip(x)
        .map(|(yi, xi)| (yi - lambda * xi).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Index of a vertex whose removal leaves an acyclic graph, if any is found.
fn renewal_vertex(g: &LoadedGraph) -> Option<usize> {
    let candidates = if g.vertex_count() <= 64 { g.vertex_count() } else { 1 };
    (0..candidates).find(|&v| topological_order_without(g, v).is_some())
}

fn topological_order_without(g: &LoadedGraph, v: usize) -> Option<Vec<usize>> {
    let n = g.vertex_count();
    let mut indeg = vec![0usize; n];
    for u in (0..n).filter(|&u| u != v) {
        for &(w, _) in g.out_edges(u) {
            if w != v {
                indeg[w] += 1;
            }
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&u| u != v && indeg[u] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = stack.pop() {
        order.push(u);
        for &(w, _) in g.out_edges(u) {
            if w != v {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    stack.push(w);
                }
            }
        }
    }
    (order.len() + 1 == n).then_some(order)
}

/// Renewal route: with `G − v` acyclic, `λ = 1/z*` for the unit root of the
/// first-return polynomial at `v`, and both eigenvectors follow from
/// `r_u = z* Σ_w A(u,w) r_w` and `l_u = z* Σ_w l_w A(w,u)`, `r_v = l_v = 1`,
/// solved along a topological order of `G − v`.
fn renewal_perron(g: &LoadedGraph, v: usize, order: &[usize]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let fr = FirstReturn::new(g, g.vertices()[v])?;
    let z = fr.unit_root()?;
    let n = g.vertex_count();
    let mut r = vec![0.0; n];
    r[v] = 1.0;
    for &u in order.iter().rev() {
        r[u] = z * g.out_edges(u).iter().map(|&(w, wt)| wt * r[w]).sum::<f64>();
    }
    let mut l = vec![0.0; n];
    l[v] = 1.0;
    let mut inflow = vec![0.0; n];
    for &(w, wt) in g.out_edges(v) {
        inflow[w] += wt;
    }
    for &u in order {
        l[u] = z * inflow[u];
        for &(w, wt) in g.out_edges(u) {
            if w != v {
                inflow[w] += l[u] * wt;
            }
        }
    }
    Ok((1.0 / z, r, l))
}

fn power_iteration(g: &LoadedGraph, shift: f64, transpose: bool, rel_tol: f64) -> Result<(f64, Vec<f64>)> {
    let n = g.vertex_count();
    let mut x = vec![1.0; n];
    for _ in 0..MAX_ITERATIONS {
        let mut y = multiply(g, &x, transpose);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += shift * xi;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (yi, xi) in y.iter().zip(&x) {
            let ratio = yi / xi;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        let top = y.iter().fold(0.0f64, |m, &e| m.max(e));
        x = y.into_iter().map(|e| e / top).collect();
        if hi - lo <= rel_tol * hi {
            return Ok((0.5 * (lo + hi) - shift, x));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// A few steps of inverse iteration at `mu` with a dense LU factorisation.
fn inverse_refine(g: &LoadedGraph, mu: f64, start: Vec<f64>, transpose: bool) -> Vec<f64> {
    let n = g.vertex_count();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for u in 0..n {
        for &(w, wt) in g.out_edges(u) {
            if transpose {
                m[(w, u)] = wt;
            } else {
                m[(u, w)] = wt;
            }
        }
        m[(u, u)] -= mu;
    }
    let lu = m.lu();
    let mut x = DVector::from_vec(start.clone());
    for _ in 0..3 {
        let Some(y) = lu.solve(&x) else {
            break;
        };
        let top = y.amax();
        if !top.is_finite() || top == 0.0 {
            break;
        }
        let sign = if y.sum() < 0.0 { -1.0 } else { 1.0 };
        x = y * (sign / top);
    }
    if x.iter().all(|&e| e > 0.0 && e.is_finite()) {
        x.iter().copied().collect()
    } else {
        start
    }
}

fn rayleigh(g: &LoadedGraph, x: &[f64], transpose: bool) -> f64 {
    let y = multiply(g, x, transpose);
    let num: f64 = y.iter().zip(x).map(|(a, b)| a * b).sum();
    let den: f64 = x.iter().map(|b| b * b).sum();
    num / den
}

fn dense_perron(g: &LoadedGraph) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let shift = if g.period() == 1 {
        0.0
    } else {
        g.edges().map(|e| e.weight).fold(0.0, f64::max)
    };
    let small = g.vertex_count() <= DENSE_LIMIT;
    let tol = if small { 1e-9 } else { 1e-14 };
    let (mu, r) = power_iteration(g, shift, false, tol)?;
    let (_, l) = power_iteration(g, shift, true, tol)?;
    let (r, l) = if small {
        (inverse_refine(g, mu, r, false), inverse_refine(g, mu, l, true))
    } else {
        (r, l)
    };
    let lambda = rayleigh(g, &r, false);
    Ok((lambda, r, l))
}

/// Spectral radius and positive eigenvectors of a connected graph.
pub fn perron_data(g: &LoadedGraph) -> Result<PerronData> {
    if !g.is_connected() {
        return Err(Error::NotConnected);
    }
    let (lambda, mut r, mut l) = match renewal_vertex(g) {
        Some(v) => {
            let order = topological_order_without(g, v).expect("acyclic");
            renewal_perron(g, v, &order)?
        }
        None => dense_perron(g)?,
    };
    let r0 = r[0];
    r.iter_mut().for_each(|e| *e /= r0);
    let dot: f64 = l.iter().zip(&r).map(|(a, b)| a * b).sum();
    l.iter_mut().for_each(|e| *e /= dot);
    let data = PerronData {
        vertices: g.vertices().to_vec(),
        lambda,
        right: r,
        left: l,
    };
    let worst = data.right_residual(g).max(data.left_residual(g));
    if !(worst <= RESIDUAL_TOLERANCE) || data.right.iter().chain(&data.left).any(|&e| !(e > 0.0)) {
        return Err(Error::NoConvergence {
            iterations: MAX_ITERATIONS,
        });
    }
    Ok(data)
}

/// The Parry measure: `P(u→w) = W(u,w) r_w / (λ r_u)`, `π_u = l_u r_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumMeasure {
    pub lambda: f64,
    pub pi: BTreeMap<VertexId, f64>,
    pub transitions: BTreeMap<(VertexId, VertexId), f64>,
}

impl EquilibriumMeasure {
    pub fn pi(&self, v: VertexId) -> f64 {
        self.pi.get(&v).copied().unwrap_or(0.0)
    }

    pub fn transition(&self, from: VertexId, to: VertexId) -> f64 {
        self.transitions.get(&(from, to)).copied().unwrap_or(0.0)
    }

    /// Largest deviation of a row sum of `P` from 1.
    pub fn row_sum_error(&self) -> f64 {
        let mut rows: BTreeMap<VertexId, f64> = self.pi.keys().map(|&v| (v, 0.0)).collect();
        for (&(u, _), &p) in &self.transitions {
            *rows.get_mut(&u).expect("vertex") += p;
        }
        rows.values().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `max_w |(πP)_w − π_w|`.
    pub fn stationarity_error(&self) -> f64 {
        let mut flow: BTreeMap<VertexId, f64> = self.pi.keys().map(|&v| (v, 0.0)).collect();
        for (&(u, w), &p) in &self.transitions {
            *flow.get_mut(&w).expect("vertex") += self.pi(u) * p;
        }
        flow.iter()
            .map(|(v, f)| (f - self.pi(*v)).abs())
            .fold(0.0, f64::max)
    }
}

pub fn parry_measure(g: &LoadedGraph) -> Result<EquilibriumMeasure> {
    let data = perron_data(g)?;
    let vs = g.vertices();
    let pi = vs
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, data.left[i] * data.right[i]))
        .collect();
    let mut transitions = BTreeMap::new();
    for u in 0..vs.len() {
        for &(w, wt) in g.out_edges(u) {
            let p = wt * data.right[w] / (data.lambda * data.right[u]);
            transitions.insert((vs[u], vs[w]), p);
        }
    }
    Ok(EquilibriumMeasure {
        lambda: data.lambda,
        pi,
        transitions,
    })
}

/// `π_{w_1} Π P(w_i → w_{i+1})`; zero for words that are not paths. The empty
/// word has measure 1.
pub fn cylinder_measure(mu: &EquilibriumMeasure, word: &[VertexId]) -> f64 {
    let Some(&first) = word.first() else {
        return 1.0;
    };
    word.windows(2)
        .fold(mu.pi(first), |acc, pair| acc * mu.transition(pair[0], pair[1]))
}

/// `|π_v − 1/(z* Φ'(z*))|`, the Kac return-time identity at `v`.
pub fn kac_residual(g: &LoadedGraph, v: VertexId) -> Result<f64> {
    let mu = parry_measure(g)?;
    if !g.contains_vertex(v) {
        return Err(Error::VertexNotInGraph(v));
    }
    let fr = FirstReturn::new(g, v)?;
    let z = fr.unit_root()?;
    let mean = z * fr.eval(z, EvalOrder::Derivative);
    Ok((mu.pi(v) - 1.0 / mean).abs())
}

/// Kac residual when the first-return polynomial is already known.
pub fn kac_residual_with_series(mu: &EquilibriumMeasure, series: &ReturnSeries) -> Result<f64> {
    let z = series.unit_root()?;
    let mean = z * series.eval(z, EvalOrder::Derivative);
    Ok((mu.pi(series.base()) - 1.0 / mean).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: u64) -> VertexId {
        VertexId::of(i)
    }

    fn golden() -> LoadedGraph {
        LoadedGraph::from_edges([(1, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)]).unwrap()
    }

    #[test]
    fn golden_mean_perron() {
        let d = perron_data(&golden()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((d.lambda - phi).abs() < 1e-12);
        assert_eq!(d.right[0], 1.0);
        let dot: f64 = d.left.iter().zip(&d.right).map(|(a, b)| a * b).sum();
        assert!((dot - 1.0).abs() < 1e-14);
    }

    #[test]
    fn golden_mean_parry() {
        let mu = parry_measure(&golden()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((mu.transition(v(1), v(1)) - 1.0 / phi).abs() < 1e-12);
        assert!((mu.transition(v(1), v(2)) - 1.0 / (phi * phi)).abs() < 1e-12);
        assert!((mu.transition(v(2), v(1)) - 1.0).abs() < 1e-12);
        assert!((mu.pi(v(1)) - 0.7236067977499790).abs() < 1e-12);
        assert!((mu.pi(v(2)) - 0.2763932022500210).abs() < 1e-12);
        assert!(mu.row_sum_error() < 1e-12 && mu.stationarity_error() < 1e-12);
        assert!((cylinder_measure(&mu, &[v(1)]) - 0.723607).abs() < 1e-6);
        assert_eq!(cylinder_measure(&mu, &[v(2), v(2)]), 0.0);
        assert!((cylinder_measure(&mu, &[v(1), v(2), v(1)]) - 0.276393).abs() < 1e-6);
    }

    #[test]
    fn trivial_graphs() {
        let lp = LoadedGraph::from_edges([(1, 1, 3.0)]).unwrap();
        let d = perron_data(&lp).unwrap();
        assert!((d.lambda - 3.0).abs() < 1e-15);
        assert_eq!((d.right[0], d.left[0]), (1.0, 1.0));
        assert_eq!(kac_residual(&lp, v(1)).unwrap(), 0.0);
        let two = LoadedGraph::from_edges([(1, 2, 1.0), (2, 1, 1.0)]).unwrap();
        let mu = parry_measure(&two).unwrap();
        assert!((mu.pi(v(1)) - 0.5).abs() < 1e-15);
        let split = LoadedGraph::from_edges([(1, 1, 1.0), (2, 2, 1.0)]).unwrap();
        assert_eq!(perron_data(&split), Err(Error::NotConnected));
    }

    #[test]
    fn dense_route_handles_periodic_graphs() {
        // Two 2-cycles sharing no vertex with 1, plus a 2-cycle through 1: every
        // vertex has a cyclic taboo graph only when the cycles avoid it.
        let g = LoadedGraph::from_edges([
            (1, 2, 1.0),
            (2, 1, 2.0),
            (2, 3, 1.0),
            (3, 2, 0.5),
            (3, 4, 1.5),
            (4, 3, 1.0),
        ])
        .unwrap();
        assert_eq!(g.period(), 2);
        let d = dense_perron(&g).unwrap();
        assert!(residual(&g, &d.1, d.0, false) < 1e-12);
        assert!(residual(&g, &d.2, d.0, true) < 1e-12);
        let r = perron_data(&g).unwrap();
        assert!((r.lambda - d.0).abs() < 1e-12);
        for u in 1..=4 {
            assert!(kac_residual(&g, v(u)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn kac_on_golden_mean() {
        assert!(kac_residual(&golden(), v(1)).unwrap() < 1e-12);
        assert!(kac_residual(&golden(), v(2)).unwrap() < 1e-12);
    }
}
