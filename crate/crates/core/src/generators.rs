//! Seeded synthetic networks. Every generator returns the largest connected
//! component of what it built.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{largest_connected_component, Graph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSpec {
    Cycle { n: usize },
    Complete { n: usize },
    Path { n: usize },
    /// Starts from a complete graph on `m + 1` nodes; each new node attaches
    /// to `m` distinct existing nodes chosen proportionally to degree.
    PreferentialAttachment { n: usize, m: usize },
    /// Uniform points in the unit square joined when closer than `radius`.
    RandomGeometric { n: usize, radius: f64 },
    /// Each pair joined independently with probability `p`.
    ErdosRenyi { n: usize, p: f64 },
}

pub fn cycle(n: usize) -> Result<Graph> {
    if n < 3 {
        return Err(Error::invalid(format!("cycle needs n >= 3, got {n}")));
    }
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::from_edges(n, &edges)
}

pub fn complete(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::invalid(format!("complete graph needs n >= 2, got {n}")));
    }
    let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    Graph::from_edges(n, &edges)
}

pub fn path(n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::invalid(format!("path needs n >= 2, got {n}")));
    }
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    Graph::from_edges(n, &edges)
}

pub fn preferential_attachment(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m == 0 || n <= m {
        return Err(Error::invalid(format!(
            "preferential attachment needs 1 <= m < n, got n={n}, m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n * m);
    // every edge endpoint once: sampling from it is degree-proportional
    let mut endpoints = Vec::with_capacity(2 * n * m);
    for i in 0..=m {
        for j in i + 1..=m {
            edges.push((i, j));
            endpoints.extend([i, j]);
        }
    }
    let mut chosen = Vec::with_capacity(m);
    for v in m + 1..n {
        chosen.clear();
        while chosen.len() < m {
            let &u = endpoints.choose(&mut rng).expect("seed graph has edges");
            if !chosen.contains(&u) {
                chosen.push(u);
            }
        }
        for &u in &chosen {
            edges.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    Graph::from_edges(n, &edges)
}

pub fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<Graph> {
    if n == 0 || !(radius > 0.0) {
        return Err(Error::invalid("random geometric graph needs n >= 1 and radius > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    let r2 = radius * radius;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
            if dx * dx + dy * dy < r2 {
                edges.push((i, j));
            }
        }
    }
    with_isolated_dropped(n, &edges)
}

pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 || !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("Erdos-Renyi graph needs n >= 1 and p in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    with_isolated_dropped(n, &edges)
}

fn with_isolated_dropped(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
    let mut touched = vec![false; n];
    for &(a, b) in edges {
        touched[a] = true;
        touched[b] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| touched[i]).collect();
    if keep.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut pos = vec![usize::MAX; n];
    for (p, &i) in keep.iter().enumerate() {
        pos[i] = p;
    }
    let relabeled: Vec<_> = edges.iter().map(|&(a, b)| (pos[a], pos[b])).collect();
    Graph::from_edges(keep.len(), &relabeled)
}

/// Builds the network described by `spec` and keeps its largest component.
pub fn generate_network(spec: &NetworkSpec, seed: u64) -> Result<Graph> {
    let g = match *spec {
        NetworkSpec::Cycle { n } => cycle(n)?,
        NetworkSpec::Complete { n } => complete(n)?,
        NetworkSpec::Path { n } => path(n)?,
        NetworkSpec::PreferentialAttachment { n, m } => preferential_attachment(n, m, seed)?,
        NetworkSpec::RandomGeometric { n, radius } => random_geometric(n, radius, seed)?,
        NetworkSpec::ErdosRenyi { n, p } => erdos_renyi(n, p, seed)?,
    };
    let lcc = largest_connected_component(&g);
    if lcc.n() < 2 {
        return Err(Error::EmptyGraph);
    }
    Ok(lcc)
}
