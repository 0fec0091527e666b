//! Cyclic Jacobi eigen-decomposition of symmetric 3x3 matrices.

pub type Mat3 = [[f64; 3]; 3];

/// Eigenvalues in descending order with matching unit eigenvectors
/// (`vectors[i]` belongs to `values[i]`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricEigen3 {
    pub values: [f64; 3],
    pub vectors: [[f64; 3]; 3],
}

pub fn symmetric_eigen3(m: &Mat3) -> SymmetricEigen3 {
    let mut a = *m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale = a.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
    if scale > 0.0 {
        for _sweep in 0..50 {
            let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
            if off <= (1e-30 * scale).powi(2) {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                if a[p][q].abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A <- J^T A J with the rotation in the (p, q) plane.
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    SymmetricEigen3 {
        values: order.map(|i| a[i][i]),
        vectors: order.map(|i| [v[0][i], v[1][i], v[2][i]]),
    }
}
