//! Cyclic Jacobi eigen-decomposition for small dense symmetric matrices.

/// Eigenvalues (ascending) and matching unit eigenvectors (as columns,
/// `vectors[i][k]` is component `i` of eigenvector `k`).
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

pub fn symmetric_eigen(m: &[Vec<f64>]) -> SymmetricEigen {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let norm: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    SymmetricEigen {
        values: order.iter().map(|&k| a[k][k]).collect(),
        vectors: (0..n).map(|i| order.iter().map(|&k| v[i][k]).collect()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let e = symmetric_eigen(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[1] - 3.0).abs() < 1e-12);
        let (x, y) = (e.vectors[0][1], e.vectors[1][1]);
        assert!((x.abs() - y.abs()).abs() < 1e-12);
        assert!((x * x + y * y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reconstructs_matrix() {
        let m = vec![
            vec![4.0, 1.0, 0.5, 0.0],
            vec![1.0, 3.0, 0.2, 0.1],
            vec![0.5, 0.2, 1.0, 0.7],
            vec![0.0, 0.1, 0.7, 2.0],
        ];
        let e = symmetric_eigen(&m);
        for i in 0..4 {
            for j in 0..4 {
                let r: f64 = (0..4).map(|k| e.vectors[i][k] * e.values[k] * e.vectors[j][k]).sum();
                assert!((r - m[i][j]).abs() < 1e-12);
            }
        }
    }
}
