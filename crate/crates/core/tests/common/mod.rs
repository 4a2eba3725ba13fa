#![allow(dead_code)]

use rand::Rng;
use spectrum_bandit_core::model::enumerate_configurations;
use spectrum_bandit_core::{ConflictGraph, Configuration, Instance, Table};

/// Random graph on `n` links with edge probability `p`.
pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> ConflictGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    ConflictGraph::new(n, &edges).unwrap()
}

pub fn random_table<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Table {
    let data = (0..rows * cols).map(|_| rng.gen::<f64>()).collect();
    Table::from_vec(rows, cols, data).unwrap()
}

/// Every channel vector in `0..width`, filtered by the conflict graph.
pub fn brute_force_configurations(instance: &Instance) -> Vec<Configuration> {
    let (n, w) = (instance.links(), instance.width());
    let mut out = Vec::new();
    let mut digits = vec![0usize; n];
    loop {
        let ok = (0..n).all(|a| (a + 1..n).all(|b| !(instance.graph().adjacent(a, b) && digits[a] == digits[b])));
        if ok {
            out.push(Configuration::from_channels(&digits));
        }
        let mut k = n;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < w {
                break;
            }
            digits[k] = 0;
        }
    }
}

/// Random point of the scaled hull: a Dirichlet-like mixture of all configurations.
pub fn random_hull_point<R: Rng>(instance: &Instance, rng: &mut R) -> Table {
    let configs = enumerate_configurations(instance).unwrap();
    let weights: Vec<f64> = configs.iter().map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    let total: f64 = weights.iter().sum();
    let mut t = Table::zeros(instance.links(), instance.width());
    for (m, w) in configs.iter().zip(&weights) {
        t = t.add(&m.to_table(instance.width()).scaled(w / total));
    }
    t
}
