//! Quadrature rules and nodal differentiation on the unit interval [0, 1].

use faer::Mat;

/// Gauss–Legendre rule with `n` points on [0, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial `P_n` at `x ∈ (−1, 1)`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Composite Gauss–Legendre rule on [0, 1] with geometrically graded panels.
///
/// `grading` is the ratio between adjacent panel widths toward each endpoint;
/// a value of 1 gives uniform panels.
pub fn composite_gauss(panels: usize, points: usize, grading: f64) -> (Vec<f64>, Vec<f64>) {
    let half = panels.div_ceil(2);
    let right: Vec<f64> = (0..half).map(|k| grading.powi(k as i32)).collect();
    let mut widths: Vec<f64> = right.iter().rev().copied().collect();
    widths.extend(right.iter().skip(panels % 2).copied());
    let total: f64 = widths.iter().sum();
    let (gx, gw) = gauss_legendre(points);
    let mut nodes = Vec::with_capacity(panels * points);
    let mut weights = Vec::with_capacity(panels * points);
    let mut a = 0.0;
    for w in widths {
        let h = w / total;
        for (x, wt) in gx.iter().zip(&gw) {
            nodes.push(a + h * x);
            weights.push(h * wt);
        }
        a += h;
    }
    (nodes, weights)
}

/// Legendre–Gauss–Lobatto nodes and weights on [0, 1] for polynomial degree `n`.
///
/// Node `j` sits near `(1 − cos(jπ/n))/2`; the endpoints are exact.
pub fn legendre_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Lobatto rule needs degree at least one");
    let m = n + 1;
    let mut x: Vec<f64> = (0..m).map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
    let mut pn = vec![0.0; m];
    for j in 0..m {
        let mut xj = x[j];
        for _ in 0..200 {
            let (p_n, p_nm1) = legendre_pair(n, xj);
            let step = (xj * p_n - p_nm1) / (m as f64 * p_n);
            xj -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[j] = xj;
        pn[j] = legendre_pair(n, xj).0;
    }
    x[0] = 1.0;
    x[n] = -1.0;
    pn[0] = 1.0;
    pn[n] = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let nodes: Vec<f64> = x.iter().map(|&xi| 0.5 * (1.0 - xi)).collect();
    let weights: Vec<f64> = pn.iter().map(|&p| 1.0 / ((n * m) as f64 * p * p)).collect();
    (nodes, weights)
}

/// `(P_n(x), P_{n−1}(x))` by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Chebyshev–Gauss–Lobatto nodes `(1 − cos(jπ/n))/2` with Clenshaw–Curtis weights on [0, 1].
pub fn chebyshev_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Chebyshev rule needs degree at least one");
    let pi = std::f64::consts::PI;
    let theta: Vec<f64> = (0..=n).map(|j| pi * j as f64 / n as f64).collect();
    let nodes: Vec<f64> = theta.iter().map(|t| 0.5 * (1.0 - t.cos())).collect();
    let mut w = vec![0.0; n + 1];
    let nf = n as f64;
    if n == 1 {
        return (nodes, vec![0.5, 0.5]);
    }
    let mut v = vec![1.0; n - 1];
    if n.is_multiple_of(2) {
        w[0] = 1.0 / (nf * nf - 1.0);
        w[n] = w[0];
        for k in 1..n / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta[i + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (nf * theta[i + 1]).cos() / (nf * nf - 1.0);
        }
    } else {
        w[0] = 1.0 / (nf * nf);
        w[n] = w[0];
        for k in 1..=(n - 1) / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta[i + 1]).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for i in 1..n {
        w[i] = 2.0 * v[i - 1] / nf;
    }
    (nodes, w.iter().map(|x| 0.5 * x).collect())
}

/// Nodal differentiation matrix for distinct nodes in [0, 1] from barycentric weights.
///
/// Diagonal entries use the negative row sum so that constants are annihilated exactly.
pub fn differentiation_matrix(nodes: &[f64]) -> Mat<f64> {
    let m = nodes.len();
    // Work on the stretched interval [0, 4], whose logarithmic capacity is one,
    // so the barycentric products stay representable for large degrees.
    let t: Vec<f64> = nodes.iter().map(|z| 4.0 * z).collect();
    let lam: Vec<f64> = (0..m)
        .map(|j| {
            let mut p = 1.0;
            for k in 0..m {
                if k != j {
                    p *= t[j] - t[k];
                }
            }
            1.0 / p
        })
        .collect();
    let mut d = Mat::<f64>::zeros(m, m);
    for i in 0..m {
        let mut s = 0.0;
        for j in 0..m {
            if i != j {
                let v = 4.0 * (lam[j] / lam[i]) / (t[i] - t[j]);
                d[(i, j)] = v;
                s += v;
            }
        }
        d[(i, i)] = -s;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_high_degree_monomials() {
        let (x, w) = gauss_legendre(6);
        for p in 0..12 {
            let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p)).sum();
            assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn composite_rule_sums_to_one() {
        let (x, w) = composite_gauss(9, 10, 0.5);
        let s: f64 = w.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        let m: f64 = x.iter().zip(&w).map(|(a, b)| b * a.powi(7)).sum();
        assert!((m - 0.125).abs() < 1e-14);
    }

    #[test]
    fn lobatto_rule_exactness() {
        let n = 12;
        let (x, w) = legendre_lobatto(n);
        assert_eq!(x[0], 0.0);
        assert_eq!(x[n], 1.0);
        for p in 0..(2 * n) {
            let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(p as i32)).sum();
            assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-13, "degree {p}");
        }
    }

    #[test]
    fn clenshaw_curtis_positive_and_normalized() {
        for n in [2usize, 5, 16, 33] {
            let (_, w) = chebyshev_lobatto(n);
            assert!(w.iter().all(|&v| v > 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        let (_, w) = chebyshev_lobatto(2);
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-15 && (w[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn three_point_differentiation_matrix() {
        let d = differentiation_matrix(&[0.0, 0.5, 1.0]);
        let expect = [[-3.0, 4.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -4.0, 3.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((d[(i, j)] - expect[i][j]).abs() < 1e-13);
            }
        }
    }
}
