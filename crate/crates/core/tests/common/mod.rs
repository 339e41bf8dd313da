#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;

use thermograph::LoadedGraph;

/// A connected random loaded graph: a random Hamiltonian cycle plus each
/// other ordered pair (self-loops included) with probability `p`.
pub fn random_connected_graph(rng: &mut StdRng, max_vertices: u64) -> LoadedGraph {
    let n = rng.random_range(1..=max_vertices);
    let p: f64 = rng.random_range(0.1..0.35);
    let mut order: Vec<u64> = (1..=n).collect();
    order.shuffle(rng);
    let mut edges = std::collections::BTreeMap::new();
    for i in 0..n as usize {
        let from = order[i];
        let to = order[(i + 1) % n as usize];
        edges.insert((from, to), rng.random_range(0.1..2.0));
    }
    for from in 1..=n {
        for to in 1..=n {
            if !edges.contains_key(&(from, to)) && rng.random_bool(p) {
                edges.insert((from, to), rng.random_range(0.1..2.0));
            }
        }
    }
    LoadedGraph::from_edges(edges.into_iter().map(|((u, w), x)| (u, w, x))).unwrap()
}

pub fn corpus(seed: u64, count: usize) -> Vec<LoadedGraph> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..count).map(|_| random_connected_graph(&mut rng, 8)).collect()
}

/// Brute-force first-return weights `q_v(1..=n_max)` by recursive DFS over
/// the dense weight matrix.
pub fn brute_force_returns(g: &LoadedGraph, v: usize, n_max: usize) -> Vec<f64> {
    let w = g.dense_matrix();
    let mut out = vec![0.0; n_max];
    fn walk(w: &[Vec<f64>], v: usize, u: usize, len: usize, weight: f64, n_max: usize, out: &mut [f64]) {
        for (x, &wt) in w[u].iter().enumerate() {
            if wt == 0.0 {
                continue;
            }
            if x == v {
                out[len] += weight * wt;
            } else if len + 1 < n_max {
                walk(w, v, x, len + 1, weight * wt, n_max, out);
            }
        }
    }
    walk(&w, v, v, 0, 1.0, n_max, &mut out);
    out
}

/// `Σ_k C(n−1,k) γ^k (n+k)^{-s}`.
pub fn jumpy_formula(n: usize, gamma: f64, s: f64) -> f64 {
    let mut binom = 1.0;
    let mut total = 0.0;
    for k in 0..n {
        total += binom * gamma.powi(k as i32) * ((n + k) as f64).powf(-s);
        binom = binom * (n - 1 - k) as f64 / (k + 1) as f64;
    }
    total
}

/// Riemann zeta for real `s > 1` by Euler–Maclaurin with `N = 64` and three
/// Bernoulli corrections (error far below 1e-15 for `s ≤ 4`).
pub fn zeta(s: f64) -> f64 {
    let n = 64.0f64;
    let head: f64 = (1..64).map(|k| (k as f64).powf(-s)).sum();
    let b2 = s * n.powf(-s - 1.0) / 12.0;
    let b4 = s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    let b6 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * n.powf(-s - 5.0) / 30240.0;
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + b2 - b4 + b6
}
