//! Undirected simple graphs and the row-normalized influence matrix `W = D^{-1} A`.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Largest node count for which matrices are materialized densely.
pub const DENSE_LIMIT: usize = 5000;

/// What to do with nodes that end up with no incident edge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsolatedPolicy {
    #[default]
    Reject,
    Drop,
}

/// Undirected simple graph with dense `0..n` indexing.
///
/// Neighbor lists are sorted and every node has at least one neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    neighbors: Vec<Vec<usize>>,
    labels: Vec<String>,
    dropped: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphProperties {
    pub connected: bool,
    pub regular: bool,
    pub bipartite: bool,
    pub aperiodic: bool,
}

impl Graph {
    /// Builds a graph on nodes `0..n`; labels are the decimal indices.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges_with(n, edges, IsolatedPolicy::Reject)
    }

    pub fn from_edges_with(
        n: usize,
        edges: &[(usize, usize)],
        policy: IsolatedPolicy,
    ) -> Result<Self> {
        let labels = (0..n).map(|i| i.to_string()).collect();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) outside 0..{n}")));
            }
            if i == j {
                return Err(Error::SelfLoop {
                    line: 0,
                    label: i.to_string(),
                });
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        Self::finish(neighbors, labels, policy)
    }

    fn finish(
        mut neighbors: Vec<Vec<usize>>,
        labels: Vec<String>,
        policy: IsolatedPolicy,
    ) -> Result<Self> {
        for nb in &mut neighbors {
            nb.sort_unstable();
            nb.dedup();
        }
        if neighbors.iter().all(Vec::is_empty) {
            return Err(Error::EmptyGraph);
        }
        if let Some(i) = neighbors.iter().position(Vec::is_empty) {
            if policy == IsolatedPolicy::Reject {
                return Err(Error::IsolatedNode(i));
            }
            let keep: Vec<usize> = (0..neighbors.len())
                .filter(|&v| !neighbors[v].is_empty())
                .collect();
            let dropped = (0..neighbors.len())
                .filter(|&v| neighbors[v].is_empty())
                .map(|v| labels[v].clone())
                .collect();
            let mut g = Self::raw(neighbors, labels).induced(&keep);
            g.dropped = dropped;
            return Ok(g);
        }
        Ok(Self::raw(neighbors, labels))
    }

    /// No isolation check; used for intermediate graphs inside this module.
    fn raw(neighbors: Vec<Vec<usize>>, labels: Vec<String>) -> Self {
        Self {
            neighbors,
            labels,
            dropped: Vec::new(),
        }
    }

    /// Induced subgraph on `nodes` (kept in the given order), labels carried over.
    fn induced(&self, nodes: &[usize]) -> Self {
        let mut index = vec![usize::MAX; self.n()];
        for (new, &old) in nodes.iter().enumerate() {
            index[old] = new;
        }
        let neighbors = nodes
            .iter()
            .map(|&old| {
                let mut nb: Vec<usize> = self.neighbors[old]
                    .iter()
                    .filter_map(|&v| (index[v] != usize::MAX).then_some(index[v]))
                    .collect();
                nb.sort_unstable();
                nb
            })
            .collect();
        let labels = nodes.iter().map(|&v| self.labels[v].clone()).collect();
        Self::raw(neighbors, labels)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Labels of nodes removed by [`IsolatedPolicy::Drop`].
    pub fn dropped(&self) -> &[String] {
        &self.dropped
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn adjacency(&self) -> Result<DMatrix<f64>> {
        if self.n() > DENSE_LIMIT {
            return Err(Error::TooLargeForDense(self.n()));
        }
        let mut a = DMatrix::zeros(self.n(), self.n());
        for (i, j) in self.edges() {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        Ok(a)
    }

    /// Same graph with node `i` renamed to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_len(self.n(), perm.len())?;
        let mut seen = vec![false; self.n()];
        for &p in perm {
            if p >= self.n() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        let mut neighbors = vec![Vec::new(); self.n()];
        let mut labels = vec![String::new(); self.n()];
        for i in 0..self.n() {
            let mut nb: Vec<usize> = self.neighbors[i].iter().map(|&j| perm[j]).collect();
            nb.sort_unstable();
            neighbors[perm[i]] = nb;
            labels[perm[i]] = self.labels[i].clone();
        }
        Ok(Self::raw(neighbors, labels))
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (i, j) in self.edges() {
            out.push_str(&format!("{} {}\n", self.labels[i], self.labels[j]));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// CSV with header `external_label,index`.
    pub fn write_label_map(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["external_label", "index"])?;
        for (i, l) in self.labels.iter().enumerate() {
            w.write_record([l.as_str(), &i.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Parses a whitespace-separated edge list; `#` starts a comment line.
///
/// Labels are assigned dense indices in order of first appearance.
pub fn parse_edge_list(text: &str, policy: IsolatedPolicy) -> Result<Graph> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut neighbors: Vec<Vec<usize>> = Vec::new();
    let mut intern = |label: &str, neighbors: &mut Vec<Vec<usize>>| -> usize {
        *index.entry(label.to_string()).or_insert_with(|| {
            labels.push(label.to_string());
            neighbors.push(Vec::new());
            labels.len() - 1
        })
    };
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("expected two node labels, found {}", tokens.len()),
            });
        }
        if tokens[0] == tokens[1] {
            return Err(Error::SelfLoop {
                line: lineno + 1,
                label: tokens[0].to_string(),
            });
        }
        let a = intern(tokens[0], &mut neighbors);
        let b = intern(tokens[1], &mut neighbors);
        neighbors[a].push(b);
        neighbors[b].push(a);
    }
    if neighbors.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Graph::finish(neighbors, labels, policy)
}

pub fn load_edge_list(path: &Path, policy: IsolatedPolicy) -> Result<Graph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, policy)
}

/// Connected components, each sorted, ordered by their smallest node.
fn components(neighbors: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = neighbors.len();
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for root in 0..n {
        if comp[root] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![root];
        comp[root] = id;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &neighbors[u] {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Largest component; ties go to the component containing the lowest index.
pub fn largest_connected_component(g: &Graph) -> Graph {
    let comps = components(&g.neighbors);
    let best = comps
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if comps.len() == 1 {
        return g.clone();
    }
    let mut sub = g.induced(&comps[best]);
    sub.dropped = g.dropped.clone();
    sub
}

/// Returns the BFS 2-coloring if one exists.
fn two_coloring(neighbors: &[Vec<usize>]) -> Option<Vec<u8>> {
    let n = neighbors.len();
    let mut color = vec![u8::MAX; n];
    for root in 0..n {
        if color[root] != u8::MAX {
            continue;
        }
        color[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &v in &neighbors[u] {
                if color[v] == u8::MAX {
                    color[v] = 1 - color[u];
                    queue.push_back(v);
                } else if color[v] == color[u] {
                    return None;
                }
            }
        }
    }
    Some(color)
}

fn properties_of(neighbors: &[Vec<usize>]) -> GraphProperties {
    let connected = components(neighbors).len() <= 1;
    let regular = neighbors.windows(2).all(|w| w[0].len() == w[1].len());
    let bipartite = two_coloring(neighbors).is_some();
    GraphProperties {
        connected,
        regular,
        bipartite,
        aperiodic: connected && !bipartite,
    }
}

pub fn check_properties(g: &Graph) -> GraphProperties {
    properties_of(&g.neighbors)
}

/// Seeded BFS sample: a uniformly random root, neighbors visited in shuffled
/// order, the first `size` reached nodes kept, then the largest component of
/// the induced subgraph. Node order follows the original indexing.
pub fn sample_connected_subgraph(g: &Graph, size: usize, seed: u64) -> Result<Graph> {
    if size < 1 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if size > g.n() {
        return Err(Error::invalid(format!(
            "sample size {size} exceeds node count {}",
            g.n()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = rng.random_range(0..g.n());
    let mut seen = vec![false; g.n()];
    seen[root] = true;
    let mut kept = vec![root];
    let mut queue = VecDeque::from([root]);
    'bfs: while let Some(u) = queue.pop_front() {
        let mut nb = g.neighbors[u].clone();
        nb.shuffle(&mut rng);
        for v in nb {
            if kept.len() == size {
                break 'bfs;
            }
            if !seen[v] {
                seen[v] = true;
                kept.push(v);
                queue.push_back(v);
            }
        }
    }
    kept.sort_unstable();
    let sub = g.induced(&kept);
    let lcc = largest_connected_component(&sub);
    if lcc.neighbors.iter().any(Vec::is_empty) {
        // single-node sample
        return Err(Error::EmptyGraph);
    }
    Ok(lcc)
}

/// Row-stochastic `W = D^{-1} A`, stored by rows of neighbor indices.
#[derive(Debug, Clone)]
pub struct InfluenceMatrix {
    neighbors: Vec<Vec<usize>>,
    inv_degree: Vec<f64>,
}

pub fn influence_matrix(g: &Graph) -> Result<InfluenceMatrix> {
    if let Some(i) = g.neighbors.iter().position(Vec::is_empty) {
        return Err(Error::IsolatedNode(i));
    }
    Ok(InfluenceMatrix {
        inv_degree: g.neighbors.iter().map(|nb| 1.0 / nb.len() as f64).collect(),
        neighbors: g.neighbors.clone(),
    })
}

impl InfluenceMatrix {
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], f64) {
        (&self.neighbors[i], self.inv_degree[i])
    }

    /// `W x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n(),
            self.neighbors
                .iter()
                .zip(&self.inv_degree)
                .map(|(nb, w)| w * nb.iter().map(|&j| x[j]).sum::<f64>()),
        )
    }

    /// `W B` for a dense `B` with `n` rows.
    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n(), b.ncols());
        for i in 0..self.n() {
            for &j in &self.neighbors[i] {
                for c in 0..b.ncols() {
                    out[(i, c)] += b[(j, c)];
                }
            }
            for c in 0..b.ncols() {
                out[(i, c)] *= self.inv_degree[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.n() > DENSE_LIMIT {
            return Err(Error::TooLargeForDense(self.n()));
        }
        let mut w = DMatrix::zeros(self.n(), self.n());
        for i in 0..self.n() {
            for &j in &self.neighbors[i] {
                w[(i, j)] = self.inv_degree[i];
            }
        }
        Ok(w)
    }

    /// Stationary distribution of the random walk, `d / sum(d)`.
    pub fn degree_distribution(&self) -> DVector<f64> {
        let total: f64 = self.neighbors.iter().map(|nb| nb.len() as f64).sum();
        DVector::from_iterator(
            self.n(),
            self.neighbors.iter().map(|nb| nb.len() as f64 / total),
        )
    }

    pub fn properties(&self) -> GraphProperties {
        properties_of(&self.neighbors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn parse_simple_path() {
        let g = parse_edge_list("0 1\n1 2", IsolatedPolicy::Reject).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn parse_dedups_and_skips_comments() {
        let g = parse_edge_list("a b\nb a\n# comment\nb c", IsolatedPolicy::Reject).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 1]);
        assert_eq!(g.labels(), ["a", "b", "c"]);
        assert_eq!(g.index_of("c"), Some(2));
    }

    #[test]
    fn parse_rejects_self_loop() {
        let err = parse_edge_list("0 0", IsolatedPolicy::Reject).unwrap_err();
        assert!(matches!(err, Error::SelfLoop { line: 1, .. }));
    }

    #[test]
    fn parse_reports_malformed_line() {
        let err = parse_edge_list("0 1\n1 2 3\n", IsolatedPolicy::Reject).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(
            parse_edge_list("# nothing\n", IsolatedPolicy::Reject),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn isolated_nodes_rejected_or_dropped() {
        assert!(matches!(
            Graph::from_edges(4, &[(0, 1), (1, 2)]),
            Err(Error::IsolatedNode(3))
        ));
        let g = Graph::from_edges_with(4, &[(0, 1), (2, 3), (1, 3)], IsolatedPolicy::Drop).unwrap();
        assert_eq!(g.n(), 4);
        let g = Graph::from_edges_with(5, &[(0, 1), (3, 4)], IsolatedPolicy::Drop).unwrap();
        assert_eq!(g.n(), 4);
        assert_eq!(g.dropped(), ["2"]);
        assert_eq!(g.labels(), ["0", "1", "3", "4"]);
    }

    #[test]
    fn largest_component_tie_break() {
        // triangles {0,1,2} and {3,4,5}, plus pair {6,7}
        let g = Graph::from_edges(
            8,
            &[(3, 4), (4, 5), (3, 5), (0, 1), (1, 2), (0, 2), (6, 7)],
        )
        .unwrap();
        let lcc = largest_connected_component(&g);
        assert_eq!(lcc.labels(), ["0", "1", "2"]);
        assert_eq!(lcc.edge_count(), 3);

        let t3 = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(largest_connected_component(&t3), t3);

        let g = Graph::from_edges(5, &[(3, 4), (0, 1), (1, 2)]).unwrap();
        assert_eq!(largest_connected_component(&g).labels(), ["0", "1", "2"]);
    }

    #[test]
    fn influence_rows() {
        let p2 = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let w = influence_matrix(&p2).unwrap().to_dense().unwrap();
        assert_eq!(w, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        let t3 = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let w = influence_matrix(&t3).unwrap().to_dense().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(w[(i, j)], if i == j { 0.0 } else { 0.5 });
            }
        }

        let w = influence_matrix(&p3()).unwrap().to_dense().unwrap();
        assert_eq!(w.row(1).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn properties_of_small_graphs() {
        let p2 = check_properties(&Graph::from_edges(2, &[(0, 1)]).unwrap());
        assert_eq!(
            p2,
            GraphProperties {
                connected: true,
                regular: true,
                bipartite: true,
                aperiodic: false
            }
        );
        let t3 = check_properties(&Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap());
        assert!(t3.connected && t3.regular && t3.aperiodic);
        assert!(!check_properties(&p3()).regular);
    }

    #[test]
    fn sampler_contract() {
        let t3 = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(sample_connected_subgraph(&t3, 3, 9).unwrap(), t3);
        for seed in 0..10 {
            let s = sample_connected_subgraph(&t3, 2, seed).unwrap();
            assert_eq!((s.n(), s.edge_count()), (2, 1));
        }
        assert!(sample_connected_subgraph(&t3, 0, 1).is_err());
        let a = sample_connected_subgraph(&p3(), 2, 5).unwrap();
        let b = sample_connected_subgraph(&p3(), 2, 5).unwrap();
        assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn label_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = parse_edge_list("x y\ny z\n", IsolatedPolicy::Reject).unwrap();
        let path = dir.path().join("labels.csv");
        g.write_label_map(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "external_label,index\nx,0\ny,1\nz,2\n");
        let edges = dir.path().join("edges.txt");
        g.write_edge_list(&edges).unwrap();
        assert_eq!(load_edge_list(&edges, IsolatedPolicy::Reject).unwrap(), g);
    }
}
