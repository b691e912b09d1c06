//! Network topologies and doubly stochastic consensus matrices.
//!
//! Graphs are connected and undirected. The consensus matrix uses
//! Metropolis-Hastings weights, which are symmetric and doubly stochastic by
//! construction, and carries its spectral mixing metadata (`lambda2`, `slem`).
//!
//! The total-variation mixing lemma is checked numerically: every row of P^t
//! must approach the uniform distribution at least geometrically in the
//! second-largest eigenvalue magnitude.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{deflated_extreme_eigenvalues, SquareMatrix};
use crate::rng::{derive_rng, purpose};

/// Threshold between the dense eigendecomposition and power iteration.
const DENSE_EIG_LIMIT: usize = 512;

/// Attempts before giving up on a connected random placement.
const CONNECTIVITY_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Complete,
    Cycle,
    RandomGeometric,
    KRegularExpander,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GraphKind::Complete => "complete",
            GraphKind::Cycle => "cycle",
            GraphKind::RandomGeometric => "random_geometric",
            GraphKind::KRegularExpander => "k_regular_expander",
        };
        f.write_str(s)
    }
}

/// Optional parameters for the random graph kinds.
#[derive(Debug, Clone, Copy, Default)]
pub struct GraphParams {
    /// Connection radius for random geometric graphs. Defaults to the
    /// connectivity threshold sqrt(2 ln(n) / n).
    pub radius: Option<f64>,
    /// Even degree for the expander construction.
    pub degree: Option<usize>,
}

/// Connected undirected graph. Self-loops are never stored; self-weights live
/// in the consensus matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub n: usize,
    pub kind: GraphKind,
    /// Unordered pairs (i, j) with i < j, sorted.
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges
            .iter()
            .filter(|(a, b)| *a == i || *b == i)
            .count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        is_connected(self.n, &self.edges)
    }

    /// Edge list as CSV (`i,j` per line) for inspection.
    pub fn write_edge_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j")?;
        for &(a, b) in &self.edges {
            writeln!(out, "{a},{b}")?;
        }
        Ok(())
    }
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    if n == 0 {
        return false;
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &u in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                count += 1;
                stack.push(u);
            }
        }
    }
    count == n
}

fn normalize_edges(n: usize, mut edges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    for e in &mut edges {
        if e.0 > e.1 {
            *e = (e.1, e.0);
        }
        debug_assert!(e.0 != e.1 && e.1 < n);
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// Build a connected graph of the requested kind. Random kinds are
/// deterministic functions of `seed`; placement retries draw fresh
/// tag-derived streams so results do not depend on call order.
pub fn build_graph(kind: GraphKind, n: usize, params: GraphParams, seed: u64) -> Result<Graph> {
    let min_n = if kind == GraphKind::Complete { 1 } else { 2 };
    if n < min_n {
        return Err(Error::InvalidParameter {
            name: "n".into(),
            reason: format!("{kind} graph needs at least {min_n} nodes, got {n}"),
        });
    }
    let edges = match kind {
        GraphKind::Complete => {
            let mut edges = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in (i + 1)..n {
                    edges.push((i, j));
                }
            }
            edges
        }
        GraphKind::Cycle => {
            if n == 2 {
                vec![(0, 1)]
            } else {
                (0..n).map(|i| (i, (i + 1) % n)).collect()
            }
        }
        GraphKind::RandomGeometric => {
            let radius = params
                .radius
                .unwrap_or_else(|| (2.0 * (n as f64).ln() / n as f64).sqrt());
            if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
                return Err(Error::InvalidParameter {
                    name: "radius".into(),
                    reason: format!("must lie in (0, sqrt(2)], got {radius}"),
                });
            }
            random_geometric_edges(n, radius, seed)?
        }
        GraphKind::KRegularExpander => {
            let degree = params.degree.unwrap_or(4);
            if degree == 0 || degree % 2 != 0 || degree >= n {
                return Err(Error::InvalidParameter {
                    name: "degree".into(),
                    reason: format!("must be even, positive and < n = {n}, got {degree}"),
                });
            }
            expander_edges(n, degree, seed)?
        }
    };
    let edges = normalize_edges(n, edges);
    let g = Graph { n, kind, edges };
    debug_assert!(g.is_connected());
    Ok(g)
}

fn random_geometric_edges(n: usize, radius: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    let r2 = radius * radius;
    for attempt in 0..CONNECTIVITY_RETRIES {
        let mut rng = derive_rng(seed, &[purpose::GRAPH, attempt as u64]);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = points[i].0 - points[j].0;
                let dy = points[i].1 - points[j].1;
                if dx * dx + dy * dy <= r2 {
                    edges.push((i, j));
                }
            }
        }
        if is_connected(n, &edges) {
            return Ok(edges);
        }
    }
    Err(Error::Unconnectable {
        kind: "random_geometric".into(),
        parameter: "radius".into(),
        attempts: CONNECTIVITY_RETRIES,
    })
}

/// Union of degree/2 random Hamiltonian cycles: k-regular, connected by
/// construction, and an expander with high probability. An attempt is
/// rejected if two cycles share an edge (regularity would drop).
fn expander_edges(n: usize, degree: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if degree == 2 {
        // Single Hamiltonian cycle: just a relabeled ring.
        return Ok((0..n).map(|i| (i, (i + 1) % n)).collect());
    }
    for attempt in 0..CONNECTIVITY_RETRIES {
        let mut rng = derive_rng(seed, &[purpose::GRAPH, attempt as u64]);
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(n * degree / 2);
        let mut ok = true;
        for _cycle in 0..degree / 2 {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for w in 0..n {
                let a = order[w];
                let b = order[(w + 1) % n];
                let e = if a < b { (a, b) } else { (b, a) };
                if edges.contains(&e) {
                    ok = false;
                    break;
                }
                edges.push(e);
            }
            if !ok {
                break;
            }
        }
        if ok {
            return Ok(edges);
        }
    }
    Err(Error::Unconnectable {
        kind: "k_regular_expander".into(),
        parameter: "degree".into(),
        attempts: CONNECTIVITY_RETRIES,
    })
}

/// Doubly stochastic consensus matrix over a graph, with spectral metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMatrix {
    p: SquareMatrix,
    /// Second-largest (signed) eigenvalue.
    pub lambda2: f64,
    /// Second-largest eigenvalue magnitude.
    pub slem: f64,
}

impl ConsensusMatrix {
    pub fn n(&self) -> usize {
        self.p.n()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p.get(i, j)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.p.row(i)
    }

    /// Mixing rate used by every bound in this crate. The analysis is stated
    /// for the second-largest eigenvalue, but Metropolis chains can have
    /// negative eigenvalues, so the magnitude is what makes the geometric
    /// decay literally true.
    pub fn lambda2_used(&self) -> f64 {
        self.slem
    }

    /// Dense rows as CSV for inspection.
    pub fn write_matrix_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            let row: Vec<String> = self.p.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Metropolis-Hastings weights on a connected graph:
/// `p_ij = 1 / (1 + max(deg_i, deg_j))` on edges, diagonal takes the slack.
pub fn metropolis_weights(g: &Graph) -> Result<ConsensusMatrix> {
    if !g.is_connected() {
        return Err(Error::InvalidParameter {
            name: "graph".into(),
            reason: "consensus weights need a connected graph".into(),
        });
    }
    let n = g.n;
    let deg = g.degrees();
    let mut p = SquareMatrix::zeros(n);
    for &(i, j) in g.edges() {
        let w = 1.0 / (1.0 + deg[i].max(deg[j]) as f64);
        p.set(i, j, w);
        p.set(j, i, w);
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| p.get(i, j)).sum();
        p.set(i, i, 1.0 - off);
    }
    let (lambda2, slem) = spectral_lambda2(&p)?;
    let cm = ConsensusMatrix { p, lambda2, slem };
    debug_assert!(stochasticity_defect(&cm.p) <= 1e-12);
    Ok(cm)
}

/// Worst row/column sum deviation from 1.
pub fn stochasticity_defect(p: &SquareMatrix) -> f64 {
    let n = p.n();
    let mut worst = 0.0f64;
    for i in 0..n {
        let rs: f64 = p.row(i).iter().sum();
        let cs: f64 = (0..n).map(|j| p.get(j, i)).sum();
        worst = worst.max((rs - 1.0).abs()).max((cs - 1.0).abs());
    }
    worst
}

/// `lambda2` (second-largest eigenvalue) and `slem` (second-largest
/// eigenvalue magnitude) of a symmetric doubly stochastic matrix.
///
/// Full symmetric eigendecomposition up to n = 512, power iteration on the
/// deflated matrix beyond that.
pub fn spectral_lambda2(p: &SquareMatrix) -> Result<(f64, f64)> {
    let asym = p.max_asymmetry();
    if asym > 1e-9 {
        return Err(Error::AsymmetricMatrix { max_abs: asym });
    }
    let n = p.n();
    if n == 1 {
        return Ok((0.0, 0.0));
    }
    if n <= DENSE_EIG_LIMIT {
        let eig = p.symmetric_eigenvalues()?;
        let lambda2 = eig[1];
        let slem = eig[1].abs().max(eig[n - 1].abs());
        Ok((lambda2, slem))
    } else {
        let (lambda2, lambda_min) =
            deflated_extreme_eigenvalues(p, 100_000).expect("n > 1 checked above");
        Ok((lambda2, lambda2.abs().max(lambda_min.abs())))
    }
}

/// One row-deviation entry of a mixing report.
#[derive(Debug, Clone, Copy)]
pub struct MixingEntry {
    pub node: usize,
    pub t: usize,
    /// l1 distance between row i of P^t and the uniform distribution.
    pub l1_deviation: f64,
    /// Lemma bound sqrt(n) * sqrt(lambda2_used)^t.
    pub bound: f64,
    pub pass: bool,
}

/// Numeric check of the total-variation mixing lemma on all rows of P^t.
#[derive(Debug, Clone)]
pub struct MixingReport {
    pub n: usize,
    pub t_max: usize,
    /// Mixing rate the bounds were evaluated with (= slem).
    pub lambda2_used: f64,
    pub entries: Vec<MixingEntry>,
    /// max_i of sum_{t=2..t_max} l1_deviation(i, t), the lemma's summed form.
    pub cumulative_l1_max: f64,
    /// 1 + log(t_max sqrt(n)) / (1 - sqrt(lambda2_used)).
    pub cumulative_bound: f64,
}

impl MixingReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn max_l1(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.l1_deviation)
            .fold(0.0, f64::max)
    }
}

const MIXING_TOL: f64 = 1e-10;

/// Evaluate row deviations of P^t for t = 1..t_max against the geometric
/// bound, plus the cumulative-sum form.
pub fn mixing_report(cm: &ConsensusMatrix, t_max: usize) -> Result<MixingReport> {
    if t_max < 1 {
        return Err(Error::InvalidParameter {
            name: "t_max".into(),
            reason: "need t_max >= 1".into(),
        });
    }
    let rate = cm.lambda2_used();
    if rate >= 1.0 {
        return Err(Error::PeriodicChain { slem: rate });
    }
    let n = cm.n();
    let uniform = 1.0 / n as f64;
    let sqrt_n = (n as f64).sqrt();
    let sqrt_rate = rate.sqrt();
    let mut entries = Vec::with_capacity(n * t_max);
    let mut cumulative = vec![0.0f64; n];
    let mut power = cm.matrix().clone();
    for t in 1..=t_max {
        let bound = sqrt_n * sqrt_rate.powi(t as i32);
        for i in 0..n {
            let l1: f64 = power.row(i).iter().map(|v| (v - uniform).abs()).sum();
            entries.push(MixingEntry {
                node: i,
                t,
                l1_deviation: l1,
                bound,
                pass: l1 <= bound + MIXING_TOL,
            });
            if t >= 2 {
                cumulative[i] += l1;
            }
        }
        if t < t_max {
            power = power.matmul(cm.matrix());
        }
    }
    let cumulative_l1_max = cumulative.iter().cloned().fold(0.0, f64::max);
    let cumulative_bound = 1.0 + (t_max as f64 * sqrt_n).ln() / (1.0 - sqrt_rate);
    Ok(MixingReport {
        n,
        t_max,
        lambda2_used: rate,
        entries,
        cumulative_l1_max,
        cumulative_bound,
    })
}
