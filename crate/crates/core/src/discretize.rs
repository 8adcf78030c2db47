//! Spectral collocation of the constrained generator with null-space projection
//! of the boundary conditions.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{PhsError, Result};
use crate::linalg::{self, re, ZERO};
use crate::model::{self, BoundaryCondition, PhsDefinition, RANK_TOL};
use crate::quadrature;

/// Default polynomial degree of the collocation grid.
pub const DEFAULT_GRID_N: usize = 64;

/// Node family of a collocation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridFamily {
    /// Chebyshev–Gauss–Lobatto nodes with Clenshaw–Curtis weights.
    ChebyshevLobatto,
    /// Legendre–Gauss–Lobatto nodes with their own quadrature weights.
    LegendreLobatto,
}

/// Collocation nodes on [0, 1] with differentiation matrix and quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CollocationGrid {
    /// Node family.
    pub family: GridFamily,
    /// Polynomial degree (one less than the node count).
    pub n: usize,
    /// Ascending nodes including both endpoints.
    pub nodes: Vec<f64>,
    /// Positive quadrature weights summing to one.
    pub weights: Vec<f64>,
    /// Differentiation matrix acting on node values.
    pub diff: Mat<f64>,
}

impl CollocationGrid {
    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Whether the grid has no nodes.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `k`-th power of the differentiation matrix.
    pub fn diff_power(&self, k: usize) -> Mat<f64> {
        let m = self.len();
        let mut out = Mat::<f64>::identity(m, m);
        for _ in 0..k {
            out = &out * &self.diff;
        }
        out
    }
}

/// Chebyshev–Gauss–Lobatto grid `(1 − cos(jπ/n))/2` with Clenshaw–Curtis weights.
pub fn chebyshev_operator(n: usize) -> CollocationGrid {
    assert!(n >= 2, "collocation grids need n >= 2");
    let (nodes, weights) = quadrature::chebyshev_lobatto(n);
    let diff = quadrature::differentiation_matrix(&nodes);
    CollocationGrid { family: GridFamily::ChebyshevLobatto, n, nodes, weights, diff }
}

/// Legendre–Gauss–Lobatto grid; its quadrature is exact to degree `2n − 1`.
pub fn legendre_operator(n: usize) -> CollocationGrid {
    assert!(n >= 2, "collocation grids need n >= 2");
    let (nodes, weights) = quadrature::legendre_lobatto(n);
    let diff = quadrature::differentiation_matrix(&nodes);
    CollocationGrid { family: GridFamily::LegendreLobatto, n, nodes, weights, diff }
}

/// Grid of the given family.
pub fn grid(family: GridFamily, n: usize) -> CollocationGrid {
    match family {
        GridFamily::ChebyshevLobatto => chebyshev_operator(n),
        GridFamily::LegendreLobatto => legendre_operator(n),
    }
}

/// Finite-dimensional generator in reduced coordinates with its energy matrix.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    /// Reduced generator.
    pub a_h: Mat<c64>,
    /// Hermitian positive energy matrix of the reduced coordinates.
    pub m_h: Mat<c64>,
    /// Lift from reduced coordinates to grid unknowns.
    pub v: Mat<c64>,
    /// Full weighted mass matrix on grid unknowns.
    pub m_bar: Mat<c64>,
    /// Grid, when the operator comes from collocation.
    pub grid: Option<CollocationGrid>,
    /// Free-form label.
    pub label: String,
}

impl DiscreteOperator {
    /// Wraps plain matrices (reduced coordinates equal grid unknowns).
    pub fn from_matrices(a_h: Mat<c64>, m_h: Mat<c64>) -> Self {
        let n = a_h.nrows();
        DiscreteOperator {
            m_bar: m_h.clone(),
            a_h,
            m_h,
            v: Mat::identity(n, n),
            grid: None,
            label: "matrix".into(),
        }
    }

    /// Dimension of the reduced state.
    pub fn dim(&self) -> usize {
        self.a_h.nrows()
    }

    /// Grid values `V y` of a reduced vector.
    pub fn lift(&self, y: &[c64]) -> Vec<c64> {
        linalg::matvec(&self.v, y)
    }

    /// Weighted projection of grid values onto the reduced space.
    pub fn project(&self, values: &[c64]) -> Vec<c64> {
        let rhs = linalg::matvec(&linalg::adjoint(&self.v), &linalg::matvec(&self.m_bar, values));
        linalg::column(&linalg::solve(&self.m_h, &linalg::col(&rhs)), 0)
    }

    /// Discrete energy `½ y* M_h y`.
    pub fn energy(&self, y: &[c64]) -> f64 {
        0.5 * linalg::quad_form(&self.m_h, y).re
    }
}

/// Block-diagonal matrix `diag(H(ζ_j))` on node-major unknowns.
pub fn h_block(def: &PhsDefinition, g: &CollocationGrid) -> Mat<c64> {
    let d = def.d;
    let m = g.len();
    let mut out = Mat::<c64>::zeros(m * d, m * d);
    for (j, &z) in g.nodes.iter().enumerate() {
        linalg::set_block(&mut out, j * d, j * d, &def.h.eval(z));
    }
    out
}

/// Quadrature-weighted mass matrix `diag(w_j H(ζ_j))`.
pub fn mass_matrix(def: &PhsDefinition, g: &CollocationGrid) -> Mat<c64> {
    let d = def.d;
    let m = g.len();
    let mut out = Mat::<c64>::zeros(m * d, m * d);
    for (j, &z) in g.nodes.iter().enumerate() {
        linalg::set_block(&mut out, j * d, j * d, &linalg::scale(&def.h.eval(z), re(g.weights[j])));
    }
    out
}

/// Raw collocation operator `L = Σ_k (D^k ⊗ P_k)·diag(H(ζ_j))` on grid values of `x`.
pub fn raw_operator(def: &PhsDefinition, g: &CollocationGrid) -> Mat<c64> {
    let hb = h_block(def, g);
    let md = g.len() * def.d;
    let mut l = Mat::<c64>::zeros(md, md);
    let mut dk = Mat::<f64>::identity(g.len(), g.len());
    for k in 0..=def.n {
        if k > 0 {
            dk = &dk * &g.diff;
        }
        l = &l + &linalg::kron_real(&dk, &def.p[k]);
    }
    &l * &hb
}

/// Discrete trace map Φ_h: grid values of `x` to the `2Nd` endpoint traces of `Hx`.
pub fn trace_operator(def: &PhsDefinition, g: &CollocationGrid) -> Mat<c64> {
    let (n, d) = (def.n, def.d);
    let m = g.len();
    let mut phi = Mat::<c64>::zeros(2 * n * d, m * d);
    let mut dk = Mat::<f64>::identity(m, m);
    for k in 0..n {
        if k > 0 {
            dk = &dk * &g.diff;
        }
        for c in 0..d {
            for j in 0..m {
                phi[(model::trace_index(n, d, 1, k, c), j * d + c)] = re(dk[(m - 1, j)]);
                phi[(model::trace_index(n, d, 0, k, c), j * d + c)] = re(dk[(0, j)]);
            }
        }
    }
    &phi * &h_block(def, g)
}

/// Null-space projection of `(L, M̄)` onto `ker C`, returning `(V, M_h, A_h)`.
pub fn project_constrained(l: &Mat<c64>, m_bar: &Mat<c64>, c: &Mat<c64>) -> Result<(Mat<c64>, Mat<c64>, Mat<c64>)> {
    let (v, r) = linalg::null_space(c, RANK_TOL)?;
    if r < c.nrows() {
        return Err(PhsError::ConstraintRankLoss { rank: r, rows: c.nrows() });
    }
    let vh = linalg::adjoint(&v);
    let mv = m_bar * &v;
    let m_h = linalg::hermitian_part(&(&vh * &mv));
    let rhs = &vh * &(m_bar * &(l * &v));
    let a_h = linalg::solve(&m_h, &rhs);
    Ok((v, m_h, a_h))
}

/// Discrete generator of the boundary-constrained model on the given grid.
pub fn assemble_discrete_generator(def: &PhsDefinition, bc: &BoundaryCondition, g: &CollocationGrid) -> Result<DiscreteOperator> {
    let pm = model::build_port_map(def)?;
    bc.validate(def)?;
    let l = raw_operator(def, g);
    let m_bar = mass_matrix(def, g);
    let c = &bc.trace_matrix(&pm) * &trace_operator(def, g);
    let (v, m_h, a_h) = project_constrained(&l, &m_bar, &c)?;
    Ok(DiscreteOperator { a_h, m_h, v, m_bar, grid: Some(g.clone()), label: format!("collocation n={}", g.n) })
}

/// Largest eigenvalue of the `M_h`-symmetrized part `½(M_h A_h + A_h* M_h)` relative to `M_h`.
pub fn discrete_dissipativity(op: &DiscreteOperator) -> Result<f64> {
    let s = linalg::hermitian_part(&(&op.m_h * &op.a_h));
    let mis = linalg::herm_fn(&op.m_h, |x| 1.0 / x.max(f64::MIN_POSITIVE).sqrt())?;
    let t = &mis * &s * &mis;
    let vals = linalg::herm_eigvals(&t)?;
    Ok(vals.last().copied().unwrap_or(f64::NEG_INFINITY))
}

/// Grid values of the constant function with every component equal to `value`.
pub fn constant_values(g: &CollocationGrid, d: usize, value: c64) -> Vec<c64> {
    vec![value; g.len() * d]
}

/// Zero vector of the reduced dimension.
pub fn zeros(op: &DiscreteOperator) -> Vec<c64> {
    vec![ZERO; op.dim()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real_rows;
    use crate::model::HamiltonianDensity;

    #[test]
    fn chebyshev_three_points() {
        let g = chebyshev_operator(2);
        assert_eq!(g.nodes.len(), 3);
        assert!(g.nodes[0].abs() < 1e-16 && (g.nodes[1] - 0.5).abs() < 1e-15 && (g.nodes[2] - 1.0).abs() < 1e-16);
        let expect = [[-3.0, 4.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -4.0, 3.0]];
        for (i, row) in expect.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((g.diff[(i, j)] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn differentiation_annihilates_constants_and_is_exact() {
        for g in [chebyshev_operator(24), legendre_operator(24)] {
            let m = g.len();
            for i in 0..m {
                let s: f64 = (0..m).map(|j| g.diff[(i, j)]).sum();
                assert!(s.abs() < 1e-12);
            }
            for p in 1..=g.n {
                let mut worst = 0.0f64;
                for i in 0..m {
                    let s: f64 = (0..m).map(|j| g.diff[(i, j)] * g.nodes[j].powi(p as i32)).sum();
                    let exact = p as f64 * g.nodes[i].powi(p as i32 - 1);
                    worst = worst.max((s - exact).abs());
                }
                assert!(worst < 1e-10, "degree {p}: {worst}");
            }
            assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(g.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn matrix_dissipativity_examples() {
        let id = Mat::<c64>::identity(2, 2);
        let op = DiscreteOperator::from_matrices(linalg::scale(&id, re(-1.0)), id.clone());
        assert!((discrete_dissipativity(&op).unwrap() + 1.0).abs() < 1e-14);
        let skew = DiscreteOperator::from_matrices(from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]]), id);
        assert!(discrete_dissipativity(&skew).unwrap().abs() < 1e-14);
    }

    #[test]
    fn transport_generator_is_dissipative() {
        let def = PhsDefinition::new(1, vec![from_real_rows(&[&[0.0]]), from_real_rows(&[&[1.0]])], HamiltonianDensity::constant(&[&[1.0]]).unwrap())
            .unwrap();
        let good = BoundaryCondition::port(from_real_rows(&[&[1.0, 1.0]]));
        let op = assemble_discrete_generator(&def, &good, &legendre_operator(16)).unwrap();
        assert!(discrete_dissipativity(&op).unwrap() <= 1e-8);
        let zero = zeros(&op);
        assert!(linalg::vec_norm(&linalg::matvec(&op.a_h, &zero)) == 0.0);
        let bad = BoundaryCondition::port(from_real_rows(&[&[1.0, -1.0]]));
        let op = assemble_discrete_generator(&def, &bad, &legendre_operator(16)).unwrap();
        assert!(discrete_dissipativity(&op).unwrap() > 0.0);
    }
}
