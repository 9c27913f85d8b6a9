//! Weighted and binarized graph metrics over a connectivity matrix.

use crate::dsp::eigen::symmetric_eigen;
use crate::dsp::stats;

pub const NODAL_METRICS: [&str; 6] = ["strength", "degree", "clustering", "betweenness", "eigenvector", "local_efficiency"];
pub const GLOBAL_METRICS: [&str; 6] = [
    "path_length",
    "global_efficiency",
    "transitivity",
    "assortativity",
    "neighbourhood_overlap",
    "matching_index",
];

/// Relative tolerance when comparing path lengths.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphMetrics {
    pub strength: Vec<f64>,
    pub degree: Vec<f64>,
    pub clustering: Vec<f64>,
    pub betweenness: Vec<f64>,
    pub eigenvector: Vec<f64>,
    pub local_efficiency: Vec<f64>,
    pub path_length: f64,
    pub global_efficiency: f64,
    pub transitivity: f64,
    pub assortativity: f64,
    pub neighbourhood_overlap: f64,
    pub matching_index: f64,
    /// some node pair has no connecting path
    pub disconnected: bool,
}

impl GraphMetrics {
    /// Nodal metrics (metric-major) followed by the global ones.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(6 * self.strength.len() + 6);
        for m in [&self.strength, &self.degree, &self.clustering, &self.betweenness, &self.eigenvector, &self.local_efficiency] {
            v.extend_from_slice(m);
        }
        v.extend([
            self.path_length,
            self.global_efficiency,
            self.transitivity,
            self.assortativity,
            self.neighbourhood_overlap,
            self.matching_index,
        ]);
        v
    }

    pub fn names(node_names: &[String]) -> Vec<String> {
        let mut v: Vec<String> = NODAL_METRICS
            .iter()
            .flat_map(|m| node_names.iter().map(move |n| format!("{m}_{n}")))
            .collect();
        v.extend(GLOBAL_METRICS.iter().map(|s| s.to_string()));
        v
    }
}

/// Median of the upper-triangle weights.
pub fn binarization_threshold(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    let upper: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| w[i][j]).collect();
    if upper.is_empty() {
        0.0
    } else {
        stats::median(&upper)
    }
}

/// Edges kept after binarization: positive and at least the median weight.
pub fn binary_adjacency(w: &[Vec<f64>]) -> Vec<Vec<bool>> {
    let tau = binarization_threshold(w);
    let n = w.len();
    (0..n).map(|i| (0..n).map(|j| i != j && w[i][j] > 0.0 && w[i][j] >= tau).collect()).collect()
}

/// All-pairs shortest path lengths with edge length 1/w.
pub fn distance_matrix(w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = w.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        d[i][i] = 0.0;
        for j in 0..n {
            if i != j && w[i][j] > 0.0 {
                d[i][j] = 1.0 / w[i][j];
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Normalized betweenness: fraction of shortest paths between other node
/// pairs passing through each node, divided by (n-1)(n-2)/2.
pub fn betweenness(w: &[Vec<f64>], d: &[Vec<f64>]) -> Vec<f64> {
    let n = w.len();
    let mut bc = vec![0.0; n];
    for s in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&v| d[s][v].is_finite()).collect();
        order.sort_by(|&a, &b| d[s][a].total_cmp(&d[s][b]));
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0; n];
        sigma[s] = 1.0;
        for &v in &order {
            if v == s {
                continue;
            }
            for u in 0..n {
                if u != v && w[u][v] > 0.0 && d[s][u].is_finite() && ties(d[s][u] + 1.0 / w[u][v], d[s][v]) && d[s][u] < d[s][v] {
                    preds[v].push(u);
                    sigma[v] += sigma[u];
                }
            }
        }
        let mut delta = vec![0.0; n];
        for &v in order.iter().rev() {
            for &u in &preds[v] {
                delta[u] += sigma[u] / sigma[v] * (1.0 + delta[v]);
            }
            if v != s {
                bc[v] += delta[v];
            }
        }
    }
    let norm = if n > 2 { ((n - 1) * (n - 2)) as f64 } else { 1.0 };
    // each unordered pair was counted from both ends
    bc.iter().map(|b| b / norm).collect()
}

/// Leading eigenvector (unit length, non-negative). A repeated top
/// eigenvalue is resolved by projecting the uniform vector onto its
/// eigenspace.
pub fn eigenvector_centrality(w: &[Vec<f64>]) -> Vec<f64> {
    let n = w.len();
    if n == 0 {
        return Vec::new();
    }
    let eig = symmetric_eigen(w);
    let top = eig.values[n - 1];
    let scale = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let u = 1.0 / (n as f64).sqrt();
    let mut v = vec![0.0; n];
    for k in (0..n).filter(|&k| top - eig.values[k] <= 1e-9 * scale) {
        let dot: f64 = (0..n).map(|i| eig.vectors[i][k] * u).sum();
        for i in 0..n {
            v[i] += dot * eig.vectors[i][k];
        }
    }
    let mut norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-12 {
        v = (0..n).map(|i| eig.vectors[i][n - 1]).collect();
        norm = 1.0;
    }
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    v.iter().map(|x| (sign * x / norm).max(0.0)).collect()
}

fn efficiency_of(d: &[Vec<f64>]) -> f64 {
    let n = d.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j && d[i][j].is_finite() {
                s += 1.0 / d[i][j];
            }
        }
    }
    s / (n * (n - 1)) as f64
}

/// Efficiency of the subgraph induced by each node's neighbours.
pub fn local_efficiency(w: &[Vec<f64>]) -> Vec<f64> {
    let n = w.len();
    (0..n)
        .map(|i| {
            let nb: Vec<usize> = (0..n).filter(|&j| j != i && w[i][j] > 0.0).collect();
            if nb.len() < 2 {
                return 0.0;
            }
            let sub: Vec<Vec<f64>> = nb.iter().map(|&a| nb.iter().map(|&b| w[a][b]).collect()).collect();
            efficiency_of(&distance_matrix(&sub))
        })
        .collect()
}

/// Per-node geometric-mean triangle intensity sums and ordered neighbour
/// pair counts for the weighted clustering coefficient.
fn triangle_terms(w: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = w.len();
    let wmax = w.iter().flatten().fold(0.0f64, |a, &v| a.max(v));
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    if wmax <= 0.0 {
        return (num, den);
    }
    for i in 0..n {
        let k = (0..n).filter(|&j| j != i && w[i][j] > 0.0).count() as f64;
        den[i] = k * (k - 1.0);
        for j in 0..n {
            for h in 0..n {
                if j != h && j != i && h != i {
                    num[i] += (w[i][j] / wmax * w[i][h] / wmax * w[j][h] / wmax).cbrt();
                }
            }
        }
    }
    (num, den)
}

/// Strength assortativity over weighted edges; NaN when the endpoint
/// strengths do not vary.
pub fn assortativity(w: &[Vec<f64>], strength: &[f64]) -> f64 {
    let n = w.len();
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| w[i][j] > 0.0).collect();
    if edges.is_empty() {
        return f64::NAN;
    }
    let k = edges.len() as f64;
    let (mut prod, mut sum, mut sq) = (0.0, 0.0, 0.0);
    for &(i, j) in &edges {
        let (a, b) = (strength[i], strength[j]);
        prod += a * b;
        sum += 0.5 * (a + b);
        sq += 0.5 * (a * a + b * b);
    }
    let (prod, mean, sq) = (prod / k, sum / k, sq / k);
    let denom = sq - mean * mean;
    if denom <= 1e-12 * sq {
        return f64::NAN;
    }
    (prod - mean * mean) / denom
}

/// Mean neighbourhood overlap over binarized edges.
pub fn neighbourhood_overlap(a: &[Vec<bool>]) -> f64 {
    let n = a.len();
    let deg: Vec<usize> = a.iter().map(|r| r.iter().filter(|&&x| x).count()).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if !a[i][j] {
                continue;
            }
            let common = (0..n).filter(|&h| a[i][h] && a[j][h]).count();
            let denom = (deg[i] - 1) + (deg[j] - 1) - common;
            total += if denom > 0 { common as f64 / denom as f64 } else { 0.0 };
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Mean matching index over all unordered node pairs.
pub fn matching_index(a: &[Vec<bool>]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let (mut inter, mut union) = (0usize, 0usize);
            for h in (0..n).filter(|&h| h != i && h != j) {
                inter += (a[i][h] && a[j][h]) as usize;
                union += (a[i][h] || a[j][h]) as usize;
            }
            total += if union > 0 { inter as f64 / union as f64 } else { 0.0 };
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// All metrics for a symmetric non-negative matrix with zero diagonal.
pub fn graph_metrics(w: &[Vec<f64>]) -> GraphMetrics {
    let n = w.len();
    let strength: Vec<f64> = w.iter().enumerate().map(|(i, r)| r.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum()).collect();
    let adj = binary_adjacency(w);
    let degree: Vec<f64> = adj.iter().map(|r| r.iter().filter(|&&x| x).count() as f64).collect();
    let (num, den) = triangle_terms(w);
    let clustering: Vec<f64> = num.iter().zip(&den).map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 }).collect();
    let den_sum: f64 = den.iter().sum();
    let transitivity = if den_sum > 0.0 { num.iter().sum::<f64>() / den_sum } else { 0.0 };
    let d = distance_matrix(w);
    let mut reach = (0.0, 0usize);
    let mut disconnected = false;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                if d[i][j].is_finite() {
                    reach.0 += d[i][j];
                    reach.1 += 1;
                } else {
                    disconnected = true;
                }
            }
        }
    }
    GraphMetrics {
        betweenness: betweenness(w, &d),
        eigenvector: eigenvector_centrality(w),
        local_efficiency: local_efficiency(w),
        path_length: if reach.1 > 0 { reach.0 / reach.1 as f64 } else { f64::NAN },
        global_efficiency: efficiency_of(&d),
        transitivity,
        assortativity: assortativity(w, &strength),
        neighbourhood_overlap: neighbourhood_overlap(&adj),
        matching_index: matching_index(&adj),
        strength,
        degree,
        clustering,
        disconnected,
    }
}
