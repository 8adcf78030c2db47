//! Port-Hamiltonian models `∂t x = Σ P_k ∂ζ^k (H x)` on (0, 1): data types,
//! structural validation, boundary traces, port variables and the formal operator.

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::discretize::CollocationGrid;
use crate::error::{PhsError, Result};
use crate::linalg::{self, re, ZERO};
use crate::poly::{CPoly, Poly};
use crate::quadrature;

/// Number of sample points used to estimate the bounds of `H`.
pub const H_BOUND_SAMPLES: usize = 256;
/// Entrywise tolerance for the symmetry conditions on `P_k` and `H`.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative singular value tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Hamiltonian density: a pointwise Hermitian matrix of real polynomials in ζ.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianDensity {
    d: usize,
    entries: Vec<Vec<Poly>>,
    m: f64,
    big_m: f64,
    symmetry_residual: f64,
}

impl HamiltonianDensity {
    /// Builds a density from `d × d` polynomial entries and estimates its bounds.
    pub fn new(entries: Vec<Vec<Poly>>) -> Result<Self> {
        let d = entries.len();
        if d == 0 {
            return Err(PhsError::InvalidModel("Hamiltonian density has no rows".into()));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != d {
                return Err(PhsError::DimensionMismatch {
                    what: format!("H row {i}"),
                    expected: d,
                    got: row.len(),
                });
            }
        }
        let mut h = HamiltonianDensity { d, entries, m: 0.0, big_m: 0.0, symmetry_residual: 0.0 };
        let (mut lo, mut hi, mut sym) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for s in 0..H_BOUND_SAMPLES {
            let z = s as f64 / (H_BOUND_SAMPLES - 1) as f64;
            let hz = h.eval(z);
            for i in 0..d {
                for j in 0..d {
                    sym = sym.max((hz[(i, j)] - hz[(j, i)].conj()).norm());
                }
            }
            let ev = linalg::herm_eigvals(&hz)?;
            lo = lo.min(ev[0]);
            hi = hi.max(ev[d - 1]);
        }
        h.m = lo;
        h.big_m = hi;
        h.symmetry_residual = sym;
        Ok(h)
    }

    /// Constant density from a real symmetric matrix given by rows.
    pub fn constant(rows: &[&[f64]]) -> Result<Self> {
        Self::new(rows.iter().map(|r| r.iter().map(|&v| Poly::constant(v)).collect()).collect())
    }

    /// Constant diagonal density.
    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        Self::new(
            (0..d)
                .map(|i| (0..d).map(|j| Poly::constant(if i == j { diag[i] } else { 0.0 })).collect())
                .collect(),
        )
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Polynomial entries.
    pub fn entries(&self) -> &[Vec<Poly>] {
        &self.entries
    }

    /// Estimated lower bound `m` of the smallest eigenvalue.
    pub fn lower_bound(&self) -> f64 {
        self.m
    }

    /// Estimated upper bound `M` of the largest eigenvalue.
    pub fn upper_bound(&self) -> f64 {
        self.big_m
    }

    /// Largest deviation from pointwise symmetry over the sample grid.
    pub fn symmetry_residual(&self) -> f64 {
        self.symmetry_residual
    }

    /// Largest polynomial degree among the entries.
    pub fn max_degree(&self) -> usize {
        self.entries.iter().flatten().map(Poly::degree).max().unwrap_or(0)
    }

    /// Whether every entry is constant.
    pub fn is_constant(&self) -> bool {
        self.max_degree() == 0
    }

    /// `H(ζ)` as a complex matrix.
    pub fn eval(&self, z: f64) -> Mat<c64> {
        Mat::from_fn(self.d, self.d, |i, j| re(self.entries[i][j].eval(z)))
    }

    /// `H'(ζ)` as a complex matrix.
    pub fn eval_derivative(&self, z: f64) -> Mat<c64> {
        Mat::from_fn(self.d, self.d, |i, j| re(self.entries[i][j].derivative().eval(z)))
    }

    /// Product `H x` for a vector of complex polynomials.
    pub fn mul_poly(&self, x: &[CPoly]) -> Vec<CPoly> {
        (0..self.d)
            .map(|i| {
                (0..self.d).fold(CPoly::zero(), |acc, j| acc.add(&x[j].mul_real(&self.entries[i][j])))
            })
            .collect()
    }
}

/// Continuous port-Hamiltonian model of order `N` and dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhsDefinition {
    /// Differential order `N ≥ 1`.
    pub n: usize,
    /// State dimension `d ≥ 1`.
    pub d: usize,
    /// Coefficient matrices `P_0, …, P_N`, each `d × d`.
    pub p: Vec<Mat<c64>>,
    /// Hamiltonian density.
    pub h: HamiltonianDensity,
}

impl PhsDefinition {
    /// Assembles a model after checking array sizes.
    pub fn new(n: usize, p: Vec<Mat<c64>>, h: HamiltonianDensity) -> Result<Self> {
        if n == 0 {
            return Err(PhsError::InvalidModel("order N must be at least 1".into()));
        }
        let d = h.dim();
        if p.len() != n + 1 {
            return Err(PhsError::DimensionMismatch {
                what: "number of P matrices".into(),
                expected: n + 1,
                got: p.len(),
            });
        }
        for (k, pk) in p.iter().enumerate() {
            if pk.nrows() != d || pk.ncols() != d {
                return Err(PhsError::DimensionMismatch {
                    what: format!("P{k} size"),
                    expected: d,
                    got: pk.nrows().max(pk.ncols()),
                });
            }
        }
        Ok(PhsDefinition { n, d, p, h })
    }

    /// Number of boundary traces per endpoint, `N·d`.
    pub fn nd(&self) -> usize {
        self.n * self.d
    }

    /// Hermitian part `½(P0 + P0*)`.
    pub fn re_p0(&self) -> Mat<c64> {
        linalg::hermitian_part(&self.p[0])
    }
}

/// Position of `(H x)^{(order)}_comp(end)` inside the trace vector Φ.
pub fn trace_index(n: usize, d: usize, end: usize, order: usize, comp: usize) -> usize {
    let offset = if end == 1 { 0 } else { n * d };
    offset + order * d + comp
}

/// A single pass/fail item of a validation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Short identifier.
    pub name: String,
    /// Outcome.
    pub passed: bool,
    /// Measured quantity.
    pub value: f64,
    /// Threshold the measurement was compared against.
    pub tolerance: f64,
}

/// Structural validation report for a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Individual checks.
    pub checks: Vec<Check>,
    /// Symmetry residual of `P_k` for `k = 1..N`.
    pub symmetry_residuals: Vec<f64>,
    /// Smallest singular value of `P_N`.
    pub sigma_min_pn: f64,
    /// Estimated lower bound of `H`.
    pub m: f64,
    /// Estimated upper bound of `H`.
    pub big_m: f64,
    /// Whether every check passed.
    pub passed: bool,
}

/// Checks the structural hypotheses on `P_k` and `H`.
pub fn validate_phs(def: &PhsDefinition) -> ValidationReport {
    let mut checks = Vec::new();
    let mut symmetry_residuals = Vec::new();
    for k in 1..=def.n {
        let pk = &def.p[k];
        let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let mut r = 0.0f64;
        for i in 0..def.d {
            for j in 0..def.d {
                r = r.max((pk[(j, i)].conj() - pk[(i, j)] * sign).norm());
            }
        }
        symmetry_residuals.push(r);
        checks.push(Check {
            name: format!("P{k} symmetry"),
            passed: r <= SYMMETRY_TOL,
            value: r,
            tolerance: SYMMETRY_TOL,
        });
    }
    let pn = &def.p[def.n];
    let sv = linalg::singular_values(pn).unwrap_or_default();
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    let tol = RANK_TOL * smax;
    checks.push(Check {
        name: "P_N invertible".into(),
        passed: smax > 0.0 && smin > tol,
        value: smin,
        tolerance: tol,
    });
    checks.push(Check {
        name: "H symmetric".into(),
        passed: def.h.symmetry_residual() <= SYMMETRY_TOL,
        value: def.h.symmetry_residual(),
        tolerance: SYMMETRY_TOL,
    });
    checks.push(Check {
        name: "H uniformly positive".into(),
        passed: def.h.lower_bound() > 0.0,
        value: def.h.lower_bound(),
        tolerance: 0.0,
    });
    let passed = checks.iter().all(|c| c.passed);
    ValidationReport {
        checks,
        symmetry_residuals,
        sigma_min_pn: smin,
        m: def.h.lower_bound(),
        big_m: def.h.upper_bound(),
        passed,
    }
}

/// Maps boundary traces Φ(Hx) to port variables `(f∂, e∂) = R_ext Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PortMap {
    /// Block matrix `Q` of size `Nd × Nd`.
    pub q: Mat<c64>,
    /// Scaled boundary map `(1/√2)[[Q, −Q], [I, I]]`.
    pub r_ext: Mat<c64>,
    /// Inverse of `r_ext`.
    pub r_inv: Mat<c64>,
    /// `‖R_ext R_inv − I‖_max`.
    pub residual: f64,
}

/// Assembles `Q`, `R_ext` and its inverse.
///
/// Block `(i, j)` of `Q` is `(−1)^{j−1} P*_{i+j−1}` for `i + j ≤ N + 1`. The adjoint makes
/// `Re(f∂* e∂)` equal to the boundary part of `Re⟨A0 x, x⟩_H` for every order; for
/// `N = 1` it coincides with `P1` itself.
pub fn build_port_map(def: &PhsDefinition) -> Result<PortMap> {
    let (n, d) = (def.n, def.d);
    let nd = n * d;
    let mut q = Mat::<c64>::zeros(nd, nd);
    for bi in 1..=n {
        for bj in 1..=n {
            if bi + bj <= n + 1 {
                let sign = if (bj - 1) % 2 == 0 { 1.0 } else { -1.0 };
                let blk = linalg::scale(&linalg::adjoint(&def.p[bi + bj - 1]), re(sign));
                linalg::set_block(&mut q, (bi - 1) * d, (bj - 1) * d, &blk);
            }
        }
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let id = Mat::<c64>::identity(nd, nd);
    let qs = linalg::scale(&q, re(s));
    let ids = linalg::scale(&id, re(s));
    let r_ext = linalg::vstack(&[
        &linalg::hstack(&[&qs, &linalg::scale(&qs, re(-1.0))]),
        &linalg::hstack(&[&ids, &ids]),
    ]);
    let qrank = linalg::rank(&q, RANK_TOL)?;
    if qrank < nd {
        return Err(PhsError::SingularPortMap { residual: f64::INFINITY });
    }
    let qinv_s = linalg::scale(&linalg::inverse(&q), re(s));
    let r_inv = linalg::vstack(&[
        &linalg::hstack(&[&qinv_s, &ids]),
        &linalg::hstack(&[&linalg::scale(&qinv_s, re(-1.0)), &ids]),
    ]);
    let prod = &r_ext * &r_inv;
    let residual = linalg::norm_max(&(&prod - &Mat::<c64>::identity(2 * nd, 2 * nd)));
    if !(residual <= 1e-8) {
        return Err(PhsError::SingularPortMap { residual });
    }
    Ok(PortMap { q, r_ext, r_inv, residual })
}

/// Whether a boundary matrix acts on traces or on port variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcForm {
    /// Constraint `Ŵ Φ(Hx) = 0`.
    Trace,
    /// Constraint `W (f∂; e∂) = 0`.
    Port,
}

/// Linear boundary condition on a port-Hamiltonian model.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    /// Interpretation of `matrix`.
    pub form: BcForm,
    /// Constraint matrix with `2Nd` columns.
    pub matrix: Mat<c64>,
}

impl BoundaryCondition {
    /// Port-form condition `W (f∂; e∂) = 0`.
    pub fn port(matrix: Mat<c64>) -> Self {
        BoundaryCondition { form: BcForm::Port, matrix }
    }

    /// Trace-form condition `Ŵ Φ(Hx) = 0`.
    pub fn trace(matrix: Mat<c64>) -> Self {
        BoundaryCondition { form: BcForm::Trace, matrix }
    }

    /// Condition without constraints (the maximal domain of `A0`).
    pub fn unconstrained(def: &PhsDefinition) -> Self {
        BoundaryCondition { form: BcForm::Port, matrix: Mat::zeros(0, 2 * def.nd()) }
    }

    /// Number of constraint rows.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Port-form matrix `W`.
    pub fn port_matrix(&self, pm: &PortMap) -> Mat<c64> {
        match self.form {
            BcForm::Port => self.matrix.clone(),
            BcForm::Trace => &self.matrix * &pm.r_inv,
        }
    }

    /// Trace-form matrix `Ŵ`.
    pub fn trace_matrix(&self, pm: &PortMap) -> Mat<c64> {
        match self.form {
            BcForm::Trace => self.matrix.clone(),
            BcForm::Port => &self.matrix * &pm.r_ext,
        }
    }

    /// Equivalent condition in port form.
    pub fn to_port(&self, pm: &PortMap) -> Self {
        BoundaryCondition::port(self.port_matrix(pm))
    }

    /// Equivalent condition in trace form.
    pub fn to_trace(&self, pm: &PortMap) -> Self {
        BoundaryCondition::trace(self.trace_matrix(pm))
    }

    /// Checks column count, row bound `≤ Nd` and full row rank.
    pub fn validate(&self, def: &PhsDefinition) -> Result<()> {
        let nd = def.nd();
        if self.matrix.ncols() != 2 * nd {
            return Err(PhsError::DimensionMismatch {
                what: "boundary matrix columns".into(),
                expected: 2 * nd,
                got: self.matrix.ncols(),
            });
        }
        if self.rows() > nd {
            return Err(PhsError::DimensionMismatch {
                what: "boundary matrix rows (at most Nd)".into(),
                expected: nd,
                got: self.rows(),
            });
        }
        let r = linalg::rank(&self.matrix, RANK_TOL)?;
        if r < self.rows() {
            return Err(PhsError::RankDeficientW { rank: r, rows: self.rows() });
        }
        Ok(())
    }
}

/// Whether a state function stores `x` itself or the effort `H x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    /// Values of the state `x`.
    State,
    /// Values of the effort `H x`.
    Effort,
}

/// Storage of a state function.
#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    /// One complex polynomial per component.
    Poly(Vec<CPoly>),
    /// Node values in node-major order `j·d + c` on a set of nodes.
    Grid(GridValues),
}

/// Node values together with the quadrature and differentiation data of their nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridValues {
    /// Ascending nodes in [0, 1] including both endpoints.
    pub nodes: Vec<f64>,
    /// Quadrature weights belonging to `nodes`.
    pub weights: Vec<f64>,
    /// Differentiation matrix, if available.
    pub diff: Option<Mat<f64>>,
    /// Values in node-major order.
    pub values: Vec<c64>,
}

/// A vector-valued function on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct StateFunction {
    /// Number of components.
    pub d: usize,
    /// Whether values are `x` or `H x`.
    pub kind: FunctionKind,
    /// Storage.
    pub repr: Representation,
}

impl StateFunction {
    /// Polynomial function.
    pub fn polynomial(kind: FunctionKind, comps: Vec<CPoly>) -> Self {
        StateFunction { d: comps.len(), kind, repr: Representation::Poly(comps) }
    }

    /// Polynomial state `x` from real ascending coefficients per component.
    pub fn real_state(comps: &[&[f64]]) -> Self {
        Self::polynomial(
            FunctionKind::State,
            comps.iter().map(|c| CPoly::from_real(&Poly::new(c.to_vec()))).collect(),
        )
    }

    /// Function sampled on a collocation grid (differentiable through the grid matrix).
    pub fn on_grid(grid: &CollocationGrid, d: usize, kind: FunctionKind, values: Vec<c64>) -> Self {
        StateFunction {
            d,
            kind,
            repr: Representation::Grid(GridValues {
                nodes: grid.nodes.clone(),
                weights: grid.weights.clone(),
                diff: Some(grid.diff.clone()),
                values,
            }),
        }
    }

    /// Function known only by samples with quadrature weights (not differentiable).
    pub fn from_samples(nodes: Vec<f64>, weights: Vec<f64>, d: usize, kind: FunctionKind, values: Vec<c64>) -> Self {
        StateFunction {
            d,
            kind,
            repr: Representation::Grid(GridValues { nodes, weights, diff: None, values }),
        }
    }

    /// Effort `H x` as polynomials (polynomial representation only).
    pub fn effort_poly(&self, def: &PhsDefinition) -> Option<Vec<CPoly>> {
        match (&self.repr, self.kind) {
            (Representation::Poly(p), FunctionKind::Effort) => Some(p.clone()),
            (Representation::Poly(p), FunctionKind::State) => Some(def.h.mul_poly(p)),
            _ => None,
        }
    }

    /// Ascending coefficient vectors when polynomial.
    pub fn coefficients(&self) -> Option<&[CPoly]> {
        match &self.repr {
            Representation::Poly(p) => Some(p),
            Representation::Grid(_) => None,
        }
    }

    /// Largest component degree (polynomial representation), or node count minus one.
    pub fn degree(&self) -> usize {
        match &self.repr {
            Representation::Poly(p) => p.iter().map(CPoly::degree).max().unwrap_or(0),
            Representation::Grid(g) => g.nodes.len().saturating_sub(1),
        }
    }

    /// Effort values at the grid nodes (grid representation only).
    fn effort_grid(&self, def: &PhsDefinition, g: &GridValues) -> Vec<c64> {
        match self.kind {
            FunctionKind::Effort => g.values.clone(),
            FunctionKind::State => {
                let d = self.d;
                let mut out = vec![ZERO; g.values.len()];
                for (j, &z) in g.nodes.iter().enumerate() {
                    let hz = def.h.eval(z);
                    let v = linalg::matvec(&hz, &g.values[j * d..(j + 1) * d]);
                    out[j * d..(j + 1) * d].copy_from_slice(&v);
                }
                out
            }
        }
    }

    /// State value `x(ζ)` (polynomial representation).
    fn state_at(&self, def: &PhsDefinition, z: f64) -> Vec<c64> {
        let p = self.coefficients().expect("polynomial representation");
        let v: Vec<c64> = p.iter().map(|c| c.eval(z)).collect();
        match self.kind {
            FunctionKind::State => v,
            FunctionKind::Effort => linalg::column(&linalg::solve(&def.h.eval(z), &linalg::col(&v)), 0),
        }
    }

    /// Effort value `(Hx)(ζ)` (polynomial representation).
    fn effort_at(&self, def: &PhsDefinition, z: f64) -> Vec<c64> {
        let p = self.coefficients().expect("polynomial representation");
        let v: Vec<c64> = p.iter().map(|c| c.eval(z)).collect();
        match self.kind {
            FunctionKind::Effort => v,
            FunctionKind::State => linalg::matvec(&def.h.eval(z), &v),
        }
    }

    /// Multiplies every value by `s`.
    pub fn scaled(&self, s: c64) -> Self {
        let repr = match &self.repr {
            Representation::Poly(p) => Representation::Poly(p.iter().map(|c| c.scale(s)).collect()),
            Representation::Grid(g) => Representation::Grid(GridValues {
                values: g.values.iter().map(|v| v * s).collect(),
                ..g.clone()
            }),
        };
        StateFunction { d: self.d, kind: self.kind, repr }
    }
}

/// Power of a real matrix applied repeatedly to node values in node-major layout.
fn diff_nodes(diff: &Mat<f64>, values: &[c64], d: usize, times: usize) -> Vec<c64> {
    let m = diff.nrows();
    let mut cur = values.to_vec();
    for _ in 0..times {
        let mut next = vec![ZERO; cur.len()];
        for i in 0..m {
            for j in 0..m {
                let w = diff[(i, j)];
                if w != 0.0 {
                    for c in 0..d {
                        next[i * d + c] += cur[j * d + c] * w;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Boundary trace vector Φ(Hx) of length `2Nd`: derivatives of `Hx` at ζ=1, then at ζ=0.
pub fn boundary_trace(x: &StateFunction, def: &PhsDefinition) -> Result<Vec<c64>> {
    check_components(x, def)?;
    let (n, d) = (def.n, def.d);
    let mut phi = vec![ZERO; 2 * n * d];
    match &x.repr {
        Representation::Poly(_) => {
            let g = x.effort_poly(def).expect("polynomial");
            for k in 0..n {
                for (c, gc) in g.iter().enumerate() {
                    let dk = gc.nth_derivative(k);
                    phi[trace_index(n, d, 1, k, c)] = dk.eval(1.0);
                    phi[trace_index(n, d, 0, k, c)] = dk.eval(0.0);
                }
            }
        }
        Representation::Grid(gv) => {
            let diff = gv.diff.as_ref().ok_or_else(|| {
                PhsError::InsufficientSmoothness(format!(
                    "grid function has no differentiation matrix for order {}",
                    n - 1
                ))
            })?;
            let g = x.effort_grid(def, gv);
            let last = gv.nodes.len() - 1;
            for k in 0..n {
                let dk = diff_nodes(diff, &g, d, k);
                for c in 0..d {
                    phi[trace_index(n, d, 1, k, c)] = dk[last * d + c];
                    phi[trace_index(n, d, 0, k, c)] = dk[c];
                }
            }
        }
    }
    Ok(phi)
}

fn check_components(x: &StateFunction, def: &PhsDefinition) -> Result<()> {
    if x.d != def.d {
        return Err(PhsError::DimensionMismatch { what: "state components".into(), expected: def.d, got: x.d });
    }
    Ok(())
}

/// Port variables `(f∂, e∂) = R_ext Φ`.
pub fn port_variables(phi: &[c64], pm: &PortMap) -> Result<(Vec<c64>, Vec<c64>)> {
    let two_nd = pm.r_ext.nrows();
    if phi.len() != two_nd {
        return Err(PhsError::DimensionMismatch { what: "trace vector".into(), expected: two_nd, got: phi.len() });
    }
    let z = linalg::matvec(&pm.r_ext, phi);
    let nd = two_nd / 2;
    Ok((z[..nd].to_vec(), z[nd..].to_vec()))
}

/// Formal operator `A0 x = Σ_k P_k (Hx)^{(k)}`, returned as a state-kind function.
pub fn apply_a0(x: &StateFunction, def: &PhsDefinition) -> Result<StateFunction> {
    check_components(x, def)?;
    let (n, d) = (def.n, def.d);
    match &x.repr {
        Representation::Poly(_) => {
            let g = x.effort_poly(def).expect("polynomial");
            let mut out = vec![CPoly::zero(); d];
            for k in 0..=n {
                let gk: Vec<CPoly> = g.iter().map(|c| c.nth_derivative(k)).collect();
                for (i, oi) in out.iter_mut().enumerate() {
                    for (j, gj) in gk.iter().enumerate() {
                        let pij = def.p[k][(i, j)];
                        if pij != ZERO {
                            *oi = oi.add(&gj.scale(pij));
                        }
                    }
                }
            }
            Ok(StateFunction::polynomial(FunctionKind::State, out))
        }
        Representation::Grid(gv) => {
            let diff = gv.diff.as_ref().ok_or_else(|| {
                PhsError::InsufficientSmoothness(format!("grid function has no differentiation matrix for order {n}"))
            })?;
            let g = x.effort_grid(def, gv);
            let m = gv.nodes.len();
            let mut out = vec![ZERO; m * d];
            let mut gk = g;
            for k in 0..=n {
                if k > 0 {
                    gk = diff_nodes(diff, &gk, d, 1);
                }
                for j in 0..m {
                    let v = linalg::matvec(&def.p[k], &gk[j * d..(j + 1) * d]);
                    for i in 0..d {
                        out[j * d + i] += v[i];
                    }
                }
            }
            Ok(StateFunction {
                d,
                kind: FunctionKind::State,
                repr: Representation::Grid(GridValues { values: out, ..gv.clone() }),
            })
        }
    }
}

/// Weighted inner product `⟨x, y⟩_H = ∫ x* H y dζ`, conjugate-linear in `x`.
pub fn h_inner_product(x: &StateFunction, y: &StateFunction, def: &PhsDefinition) -> c64 {
    let d = def.d;
    if let Some((nodes, weights)) = common_grid(x, y) {
        let xs = grid_or_poly_values(x, def, &nodes, FunctionKind::State);
        let hy = grid_or_poly_values(y, def, &nodes, FunctionKind::Effort);
        return weighted_sum(&xs, &hy, &weights, d);
    }
    let both_effort = x.kind == FunctionKind::Effort && y.kind == FunctionKind::Effort;
    let (nodes, weights) = if both_effort && !def.h.is_constant() {
        quadrature::composite_gauss(8, 24, 1.0)
    } else {
        let deg = x.degree() + y.degree() + def.h.max_degree();
        quadrature::gauss_legendre(deg / 2 + 2)
    };
    // Use the symmetric form (Hx)* y when that keeps the integrand polynomial.
    let (left, right) = if x.kind == FunctionKind::Effort && y.kind == FunctionKind::State {
        (
            grid_or_poly_values(x, def, &nodes, FunctionKind::Effort),
            grid_or_poly_values(y, def, &nodes, FunctionKind::State),
        )
    } else {
        (
            grid_or_poly_values(x, def, &nodes, FunctionKind::State),
            grid_or_poly_values(y, def, &nodes, FunctionKind::Effort),
        )
    };
    weighted_sum(&left, &right, &weights, d)
}

fn weighted_sum(a: &[c64], b: &[c64], w: &[f64], d: usize) -> c64 {
    let mut s = ZERO;
    for (j, wj) in w.iter().enumerate() {
        for c in 0..d {
            s += a[j * d + c].conj() * b[j * d + c] * *wj;
        }
    }
    s
}

fn common_grid(x: &StateFunction, y: &StateFunction) -> Option<(Vec<f64>, Vec<f64>)> {
    match (&x.repr, &y.repr) {
        (Representation::Grid(g), _) | (_, Representation::Grid(g)) => Some((g.nodes.clone(), g.weights.clone())),
        _ => None,
    }
}

/// Values of `x` (`want = State`) or `Hx` (`want = Effort`) at the given nodes.
fn grid_or_poly_values(f: &StateFunction, def: &PhsDefinition, nodes: &[f64], want: FunctionKind) -> Vec<c64> {
    let d = f.d;
    match &f.repr {
        Representation::Poly(_) => nodes
            .iter()
            .flat_map(|&z| match want {
                FunctionKind::State => f.state_at(def, z),
                FunctionKind::Effort => f.effort_at(def, z),
            })
            .collect(),
        Representation::Grid(g) => {
            assert_eq!(g.nodes.len(), nodes.len(), "grid functions must share nodes");
            if f.kind == want {
                return g.values.clone();
            }
            let mut out = vec![ZERO; g.values.len()];
            for (j, &z) in g.nodes.iter().enumerate() {
                let hz = def.h.eval(z);
                let v = &g.values[j * d..(j + 1) * d];
                let w = match want {
                    FunctionKind::Effort => linalg::matvec(&hz, v),
                    FunctionKind::State => linalg::column(&linalg::solve(&hz, &linalg::col(v)), 0),
                };
                out[j * d..(j + 1) * d].copy_from_slice(&w);
            }
            out
        }
    }
}

/// `‖x‖_H`.
pub fn h_norm(x: &StateFunction, def: &PhsDefinition) -> f64 {
    h_inner_product(x, x, def).re.max(0.0).sqrt()
}

/// Volume term `∫ (Hx)* (Re P0) (Hx) dζ` of the energy balance.
pub fn volume_term(x: &StateFunction, def: &PhsDefinition) -> f64 {
    let rp0 = def.re_p0();
    if linalg::norm_max(&rp0) == 0.0 {
        return 0.0;
    }
    let d = def.d;
    let (nodes, weights) = match &x.repr {
        Representation::Grid(g) => (g.nodes.clone(), g.weights.clone()),
        Representation::Poly(_) => {
            let deg = 2 * (x.degree() + if x.kind == FunctionKind::State { def.h.max_degree() } else { 0 });
            quadrature::gauss_legendre(deg / 2 + 2)
        }
    };
    let g = grid_or_poly_values(x, def, &nodes, FunctionKind::Effort);
    let mut s = 0.0;
    for (j, w) in weights.iter().enumerate() {
        let gj = &g[j * d..(j + 1) * d];
        s += linalg::quad_form(&rp0, gj).re * w;
    }
    s
}

/// Linear map from effort coefficients (component-major, `deg + 1` per component) to Φ(Hx).
pub fn trace_functional(def: &PhsDefinition, deg: usize) -> Mat<c64> {
    let (n, d) = (def.n, def.d);
    let cols = d * (deg + 1);
    let mut t = Mat::<c64>::zeros(2 * n * d, cols);
    for c in 0..d {
        for p in 0..=deg {
            for k in 0..n.min(p + 1) {
                let falling: f64 = ((p - k + 1)..=p).map(|v| v as f64).product();
                // Value of d^k ζ^p at ζ = 1 is p!/(p−k)!; at ζ = 0 it is k! when p = k.
                t[(trace_index(n, d, 1, k, c), c * (deg + 1) + p)] = re(falling);
                if p == k {
                    t[(trace_index(n, d, 0, k, c), c * (deg + 1) + p)] = re(falling);
                }
            }
        }
    }
    t
}

/// Seeded random element of the domain: `Hx` is a polynomial of degree `2N + 6`
/// satisfying the boundary constraints, scaled so that `‖x‖_H ∈ [0.1, 10]`.
pub fn sample_domain_function(def: &PhsDefinition, bc: &BoundaryCondition, seed: u64) -> Result<StateFunction> {
    let pm = build_port_map(def)?;
    bc.validate(def)?;
    let what = bc.trace_matrix(&pm);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = def.d;
    let start = 2 * def.n + 6;
    let max_degree = 2 * def.n + 16;
    let mut deg = start;
    loop {
        let c = &what * &trace_functional(def, deg);
        let (k, _) = linalg::null_space(&c, RANK_TOL)?;
        if k.ncols() > 0 {
            let y: Vec<c64> = (0..k.ncols())
                .map(|_| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    c64::new(a, b)
                })
                .collect();
            let coeffs = linalg::matvec(&k, &y);
            let comps: Vec<CPoly> =
                (0..d).map(|i| CPoly::new(coeffs[i * (deg + 1)..(i + 1) * (deg + 1)].to_vec())).collect();
            let f = StateFunction::polynomial(FunctionKind::Effort, comps);
            let norm = h_norm(&f, def);
            if norm == 0.0 {
                return Err(PhsError::DegenerateConstraints { max_degree });
            }
            let exponent: f64 = rand::Rng::gen_range(&mut rng, -0.5..0.5);
            let target = 10f64.powf(exponent);
            return Ok(f.scaled(re(target / norm)));
        }
        deg += 2;
        if deg > max_degree {
            return Err(PhsError::DegenerateConstraints { max_degree });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, I, ONE};

    fn transport() -> PhsDefinition {
        PhsDefinition::new(1, vec![from_real_rows(&[&[0.0]]), from_real_rows(&[&[1.0]])], HamiltonianDensity::constant(&[&[1.0]]).unwrap())
            .unwrap()
    }

    #[test]
    fn transport_validates_with_unit_bounds() {
        let r = validate_phs(&transport());
        assert!(r.passed);
        assert_eq!(r.m, 1.0);
        assert_eq!(r.big_m, 1.0);
    }

    #[test]
    fn schrodinger_symmetry_passes() {
        let def = PhsDefinition::new(
            2,
            vec![Mat::zeros(1, 1), Mat::zeros(1, 1), linalg::col(&[I])],
            HamiltonianDensity::constant(&[&[1.0]]).unwrap(),
        )
        .unwrap();
        assert!(validate_phs(&def).passed);
    }

    #[test]
    fn singular_leading_coefficient_fails() {
        let def = PhsDefinition::new(1, vec![Mat::zeros(1, 1), Mat::zeros(1, 1)], HamiltonianDensity::constant(&[&[1.0]]).unwrap())
            .unwrap();
        let r = validate_phs(&def);
        assert!(!r.passed);
        assert!(!r.checks.iter().find(|c| c.name == "P_N invertible").unwrap().passed);
    }

    #[test]
    fn transport_port_map() {
        let pm = build_port_map(&transport()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(pm.q[(0, 0)], ONE);
        let expect = [[s, -s], [s, s]];
        for (i, row) in expect.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((pm.r_ext[(i, j)].re - v).abs() < 1e-15);
            }
        }
        assert!(pm.residual <= 1e-10);
    }

    #[test]
    fn second_order_q_blocks() {
        let (p1, p2) = (0.3, 2.0);
        let def = PhsDefinition::new(
            2,
            vec![Mat::zeros(1, 1), from_real_rows(&[&[p1]]), linalg::col(&[c64::new(0.0, p2)])],
            HamiltonianDensity::constant(&[&[1.0]]).unwrap(),
        )
        .unwrap();
        let pm = build_port_map(&def).unwrap();
        assert_eq!(pm.q[(0, 0)], re(p1));
        assert_eq!(pm.q[(0, 1)], c64::new(0.0, p2));
        assert_eq!(pm.q[(1, 0)], c64::new(0.0, -p2));
        assert_eq!(pm.q[(1, 1)], ZERO);
    }

    #[test]
    fn traces_of_simple_polynomials() {
        let def = transport();
        let phi = boundary_trace(&StateFunction::real_state(&[&[0.0, 1.0]]), &def).unwrap();
        assert_eq!(phi, vec![ONE, ZERO]);
        let def2 = PhsDefinition::new(
            2,
            vec![Mat::zeros(1, 1), Mat::zeros(1, 1), linalg::col(&[I])],
            HamiltonianDensity::constant(&[&[1.0]]).unwrap(),
        )
        .unwrap();
        let phi2 = boundary_trace(&StateFunction::real_state(&[&[0.0, 0.0, 1.0]]), &def2).unwrap();
        assert_eq!(phi2, vec![ONE, re(2.0), ZERO, ZERO]);
        let def3 = PhsDefinition::new(
            1,
            vec![Mat::zeros(1, 1), from_real_rows(&[&[1.0]])],
            HamiltonianDensity::new(vec![vec![Poly::new(vec![1.0, 1.0])]]).unwrap(),
        )
        .unwrap();
        let phi3 = boundary_trace(&StateFunction::real_state(&[&[1.0]]), &def3).unwrap();
        assert_eq!(phi3, vec![re(2.0), ONE]);
    }

    #[test]
    fn transport_port_variables() {
        let pm = build_port_map(&transport()).unwrap();
        let (f, e) = port_variables(&[re(2.0), ONE], &pm).unwrap();
        assert!((f[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((e[0].re - 2.1213203435596424).abs() < 1e-12);
        let (f, e) = port_variables(&[ONE, ONE], &pm).unwrap();
        assert!(f[0].norm() < 1e-15);
        assert!((e[0].re - 2f64.sqrt()).abs() < 1e-15);
        assert!(port_variables(&[ONE], &pm).is_err());
    }

    #[test]
    fn formal_operator_examples() {
        let x = StateFunction::real_state(&[&[0.0, 1.0]]);
        let a = apply_a0(&x, &transport()).unwrap();
        assert_eq!(a.coefficients().unwrap()[0].eval(0.37), ONE);
        let damped = PhsDefinition::new(
            1,
            vec![from_real_rows(&[&[-1.0]]), from_real_rows(&[&[1.0]])],
            HamiltonianDensity::constant(&[&[1.0]]).unwrap(),
        )
        .unwrap();
        let a = apply_a0(&x, &damped).unwrap();
        assert!((a.coefficients().unwrap()[0].eval(0.25) - re(0.75)).norm() < 1e-15);
    }

    #[test]
    fn inner_products() {
        let def = transport();
        let one = StateFunction::real_state(&[&[1.0]]);
        let z = StateFunction::real_state(&[&[0.0, 1.0]]);
        assert!((h_inner_product(&one, &one, &def) - ONE).norm() < 1e-15);
        assert!((h_inner_product(&one, &z, &def) - re(0.5)).norm() < 1e-15);
        let def2 = PhsDefinition::new(
            1,
            vec![Mat::zeros(1, 1), from_real_rows(&[&[1.0]])],
            HamiltonianDensity::new(vec![vec![Poly::new(vec![1.0, 1.0])]]).unwrap(),
        )
        .unwrap();
        assert!((h_inner_product(&one, &one, &def2) - re(1.5)).norm() < 1e-14);
    }

    #[test]
    fn sampled_transport_function_vanishes_at_right_end() {
        let def = transport();
        let bc = BoundaryCondition::port(from_real_rows(&[&[1.0, 1.0]]));
        let x = sample_domain_function(&def, &bc, 11).unwrap();
        let phi = boundary_trace(&x, &def).unwrap();
        let scale = x.coefficients().unwrap()[0].coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(phi[0].norm() <= 1e-10 * scale);
        let nrm = h_norm(&x, &def);
        assert!((0.1..=10.0).contains(&nrm));
        let again = sample_domain_function(&def, &bc, 11).unwrap();
        assert_eq!(x, again);
    }
}
