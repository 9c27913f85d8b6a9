//! Definition-level graph metrics: every shortest path is found by
//! enumerating simple paths, so nothing is shared with the library's
//! Floyd/Brandes implementation.

use nalgebra::DMatrix;

pub struct Oracle {
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
    pub overlap: f64,
    pub matching: f64,
}

fn simple_paths(w: &[Vec<f64>], s: usize, t: usize) -> Vec<Vec<usize>> {
    fn go(w: &[Vec<f64>], cur: usize, t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur == t {
            out.push(path.clone());
            return;
        }
        for next in 0..w.len() {
            if w[cur][next] > 0.0 && !path.contains(&next) {
                path.push(next);
                go(w, next, t, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(w, s, t, &mut vec![s], &mut out);
    out
}

fn path_len(w: &[Vec<f64>], p: &[usize]) -> f64 {
    p.windows(2).map(|e| 1.0 / w[e[0]][e[1]]).sum()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Shortest distance and the list of shortest paths.
fn shortest(w: &[Vec<f64>], s: usize, t: usize) -> Option<(f64, Vec<Vec<usize>>)> {
    let paths = simple_paths(w, s, t);
    let best = paths.iter().map(|p| path_len(w, p)).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let tied = paths.into_iter().filter(|p| close(path_len(w, p), best)).collect();
    Some((best, tied))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn efficiency(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                if let Some((d, _)) = shortest(w, i, j) {
                    s += 1.0 / d;
                }
            }
        }
    }
    s / (n * (n - 1)) as f64
}

pub fn oracle(w: &[Vec<f64>]) -> Oracle {
    let n = w.len();
    let strength: Vec<f64> = (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| w[i][j]).sum()).collect();

    let upper: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| w[i][j]).collect();
    let tau = if upper.is_empty() { 0.0 } else { median(upper) };
    let adj: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i != j && w[i][j] > 0.0 && w[i][j] >= tau).collect()).collect();
    let degree: Vec<f64> = adj.iter().map(|r| r.iter().filter(|&&b| b).count() as f64).collect();

    let wmax = w.iter().flatten().cloned().fold(0.0, f64::max);
    let mut tri = vec![0.0; n];
    let mut pairs = vec![0.0; n];
    for i in 0..n {
        let nb: Vec<usize> = (0..n).filter(|&j| j != i && w[i][j] > 0.0).collect();
        pairs[i] = (nb.len() * nb.len().saturating_sub(1)) as f64;
        for &j in &nb {
            for &h in &nb {
                if j != h && wmax > 0.0 {
                    tri[i] += ((w[i][j] / wmax) * (w[i][h] / wmax) * (w[j][h] / wmax)).cbrt();
                }
            }
        }
    }
    let clustering = (0..n).map(|i| if pairs[i] > 0.0 { tri[i] / pairs[i] } else { 0.0 }).collect();
    let transitivity = if pairs.iter().sum::<f64>() > 0.0 { tri.iter().sum::<f64>() / pairs.iter().sum::<f64>() } else { 0.0 };

    let mut betweenness = vec![0.0; n];
    let (mut dsum, mut dcount) = (0.0, 0usize);
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            if let Some((d, paths)) = shortest(w, s, t) {
                dsum += d;
                dcount += 1;
                if s < t {
                    for (v, b) in betweenness.iter_mut().enumerate() {
                        if v != s && v != t {
                            let through = paths.iter().filter(|p| p.contains(&v)).count();
                            *b += through as f64 / paths.len() as f64;
                        }
                    }
                }
            }
        }
    }
    if n > 2 {
        let norm = ((n - 1) * (n - 2) / 2) as f64;
        for b in &mut betweenness {
            *b /= norm;
        }
    }

    let m = DMatrix::from_fn(n, n, |i, j| w[i][j]);
    let eig = m.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let u = 1.0 / (n as f64).sqrt();
    let mut ev = vec![0.0; n];
    for k in 0..n {
        if top - eig.eigenvalues[k] <= 1e-9 * scale {
            let col = eig.eigenvectors.column(k);
            let dot: f64 = col.iter().map(|c| c * u).sum();
            for i in 0..n {
                ev[i] += dot * col[i];
            }
        }
    }
    let norm = ev.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sign = if ev.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let eigenvector = ev.iter().map(|x| (sign * x / norm).max(0.0)).collect();

    let local_efficiency = (0..n)
        .map(|i| {
            let nb: Vec<usize> = (0..n).filter(|&j| j != i && w[i][j] > 0.0).collect();
            if nb.len() < 2 {
                return 0.0;
            }
            let sub: Vec<Vec<f64>> = nb.iter().map(|&a| nb.iter().map(|&b| w[a][b]).collect()).collect();
            efficiency(&sub)
        })
        .collect();

    // Pearson correlation of endpoint strengths with every edge listed both ways
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && w[i][j] > 0.0 {
                xs.push(strength[i]);
                ys.push(strength[j]);
            }
        }
    }
    let assortativity = if xs.is_empty() {
        f64::NAN
    } else {
        let k = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / k;
        let my = ys.iter().sum::<f64>() / k;
        let cov: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / k;
        let vx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / k;
        let sq: f64 = xs.iter().map(|a| a * a).sum::<f64>() / k;
        if vx <= 1e-12 * sq {
            f64::NAN
        } else {
            cov / vx
        }
    };

    let nbrs = |i: usize| -> Vec<usize> { (0..n).filter(|&j| adj[i][j]).collect() };
    let (mut osum, mut ocount) = (0.0, 0);
    for i in 0..n {
        for j in i + 1..n {
            if adj[i][j] {
                let (ni, nj) = (nbrs(i), nbrs(j));
                let common = ni.iter().filter(|h| nj.contains(h)).count();
                let denom = (ni.len() - 1 + nj.len() - 1) as isize - common as isize;
                osum += if denom > 0 { common as f64 / denom as f64 } else { 0.0 };
                ocount += 1;
            }
        }
    }
    let overlap = if ocount > 0 { osum / ocount as f64 } else { 0.0 };

    let mut msum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let ni: Vec<usize> = nbrs(i).into_iter().filter(|&h| h != j).collect();
            let nj: Vec<usize> = nbrs(j).into_iter().filter(|&h| h != i).collect();
            let inter = ni.iter().filter(|h| nj.contains(h)).count();
            let union = ni.len() + nj.len() - inter;
            msum += if union > 0 { inter as f64 / union as f64 } else { 0.0 };
        }
    }
    let matching = if n > 1 { msum / (n * (n - 1) / 2) as f64 } else { 0.0 };

    Oracle {
        strength,
        degree,
        clustering,
        betweenness,
        eigenvector,
        local_efficiency,
        path_length: if dcount > 0 { dsum / dcount as f64 } else { f64::NAN },
        global_efficiency: efficiency(w),
        transitivity,
        assortativity,
        overlap,
        matching,
    }
}

/// Every simple graph on `n` nodes, as edge subsets of the upper triangle.
pub fn all_topologies(n: usize) -> impl Iterator<Item = Vec<(usize, usize)>> {
    let slots: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    (0u32..(1u32 << slots.len())).map(move |mask| slots.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &e)| e).collect())
}

pub fn weighted(n: usize, edges: &[(usize, usize)], weight: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
    let mut w = vec![vec![0.0; n]; n];
    for (k, &(i, j)) in edges.iter().enumerate() {
        let v = weight(k);
        w[i][j] = v;
        w[j][i] = v;
    }
    w
}

fn same(a: f64, b: f64, tol: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// First disagreement between the library and the oracle, if any.
pub fn compare(w: &[Vec<f64>]) -> Option<String> {
    let g = stimeeg::features::graph_metrics(w);
    let o = oracle(w);
    let nodal = [
        ("strength", &g.strength, &o.strength, 1e-12),
        ("degree", &g.degree, &o.degree, 0.0),
        ("clustering", &g.clustering, &o.clustering, 1e-12),
        ("betweenness", &g.betweenness, &o.betweenness, 1e-12),
        ("eigenvector", &g.eigenvector, &o.eigenvector, 1e-8),
        ("local_efficiency", &g.local_efficiency, &o.local_efficiency, 1e-12),
    ];
    for (name, a, b, tol) in nodal {
        for (i, (x, y)) in a.iter().zip(b.iter()).enumerate() {
            if !same(*x, *y, tol) {
                return Some(format!("{name}[{i}]: {x} vs {y} for {w:?}"));
            }
        }
    }
    let global = [
        ("path_length", g.path_length, o.path_length),
        ("global_efficiency", g.global_efficiency, o.global_efficiency),
        ("transitivity", g.transitivity, o.transitivity),
        ("assortativity", g.assortativity, o.assortativity),
        ("overlap", g.neighbourhood_overlap, o.overlap),
        ("matching", g.matching_index, o.matching),
    ];
    for (name, x, y) in global {
        if !same(x, y, 1e-12) {
            return Some(format!("{name}: {x} vs {y} for {w:?}"));
        }
    }
    None
}

/// Runs the library against the oracle on every topology with up to five
/// nodes under unit, dyadic and random weights. Returns (graphs checked,
/// first failure).
pub fn sweep(seed: u64) -> (usize, Option<String>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for n in 1..=5 {
        for edges in all_topologies(n) {
            let random: Vec<f64> = (0..edges.len()).map(|_| rng.gen_range(0.05..1.0)).collect();
            let dyadic: Vec<f64> = (0..edges.len()).map(|_| [0.5, 1.0, 2.0][rng.gen_range(0..3)]).collect();
            for w in [
                weighted(n, &edges, |_| 1.0),
                weighted(n, &edges, |k| dyadic[k]),
                weighted(n, &edges, |k| random[k]),
            ] {
                checked += 1;
                if let Some(msg) = compare(&w) {
                    return (checked, Some(msg));
                }
            }
        }
    }
    (checked, None)
}
