//! Interconnection of a boundary-controlled model with a finite-dimensional controller
//! through `u_c = y1`, `u1 = −y_c`.

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::discretize::{self, CollocationGrid, DiscreteOperator};
use crate::error::{PhsError, Result};
use crate::linalg::{self, re, DefinitenessCheck, ZERO};
use crate::model::{self, BoundaryCondition, PhsDefinition, PortMap, RANK_TOL};
use crate::wellposed::{self, AsymptoticEvidence, StabilityCertificate, TraceSelector, DISSIPATIVITY_TOL, PSD_TOL};

/// Number of sampled domain functions in the passivity check.
pub const PASSIVITY_SAMPLES: usize = 50;
/// Scaled tolerance of the sampled passivity inequality.
pub const PASSIVITY_TOL: f64 = 1e-8;

/// Splitting of the boundary port vector `z = (f∂; e∂)` into inputs `u = W z` and outputs `y = W̃ z`.
#[derive(Debug, Clone, PartialEq)]
pub struct IoSplit {
    /// Controlled inputs `u1 = W1 z` (`m × 2Nd`).
    pub w1: Mat<c64>,
    /// Static inputs `u2 = W2 z`, held at zero (`(Nd − m) × 2Nd`).
    pub w2: Mat<c64>,
    /// Measured outputs `y1 = W̃1 z` (`m̃ × 2Nd`).
    pub wt1: Mat<c64>,
    /// Remaining outputs `y2 = W̃2 z` (`(Nd − m̃) × 2Nd`).
    pub wt2: Mat<c64>,
}

impl IoSplit {
    /// Builds the split from port-form blocks.
    pub fn new(w1: Mat<c64>, w2: Mat<c64>, wt1: Mat<c64>, wt2: Mat<c64>) -> Self {
        IoSplit { w1, w2, wt1, wt2 }
    }

    /// Builds the split from trace-form blocks (acting on Φ(Hx)).
    pub fn from_trace(pm: &PortMap, w1: &Mat<c64>, w2: &Mat<c64>, wt1: &Mat<c64>, wt2: &Mat<c64>) -> Self {
        let t = |m: &Mat<c64>| m * &pm.r_inv;
        IoSplit { w1: t(w1), w2: t(w2), wt1: t(wt1), wt2: t(wt2) }
    }

    /// Input dimension `m`.
    pub fn m(&self) -> usize {
        self.w1.nrows()
    }

    /// Output dimension `m̃`.
    pub fn m_tilde(&self) -> usize {
        self.wt1.nrows()
    }

    /// Stacked input matrix `W = [W1; W2]`.
    pub fn w(&self) -> Mat<c64> {
        linalg::vstack(&[&self.w1, &self.w2])
    }

    /// Stacked output matrix `W̃ = [W̃1; W̃2]`.
    pub fn wt(&self) -> Mat<c64> {
        linalg::vstack(&[&self.wt1, &self.wt2])
    }
}

/// Rank and invertibility properties of an I/O split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoSplitReport {
    /// Whether `W` has full row rank.
    pub w_full_rank: bool,
    /// Whether `W̃` has full row rank.
    pub wt_full_rank: bool,
    /// Whether `[W; W̃]` is square and invertible.
    pub stack_invertible: bool,
    /// Condition number of `[W; W̃]` (`+∞` if singular or not square).
    pub stack_condition: f64,
    /// Conjunction of the flags.
    pub passed: bool,
}

fn condition_number(a: &Mat<c64>) -> Result<f64> {
    let s = linalg::singular_values(a)?;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > RANK_TOL * hi => Ok(hi / lo),
        _ => Ok(f64::INFINITY),
    }
}

/// Checks the rank hypotheses of a split for a model with `nd = N·d`.
pub fn validate_io_split(io: &IoSplit, nd: usize) -> Result<IoSplitReport> {
    if io.m() == 0 {
        return Err(PhsError::EmptyInput);
    }
    for (what, mat, rows) in [
        ("W2 rows", &io.w2, nd.saturating_sub(io.m())),
        ("W~2 rows", &io.wt2, nd.saturating_sub(io.m_tilde())),
    ] {
        if mat.nrows() != rows {
            return Err(PhsError::DimensionMismatch { what: what.into(), expected: rows, got: mat.nrows() });
        }
    }
    for (what, mat) in [("W1 columns", &io.w1), ("W2 columns", &io.w2), ("W~1 columns", &io.wt1), ("W~2 columns", &io.wt2)] {
        if mat.ncols() != 2 * nd {
            return Err(PhsError::DimensionMismatch { what: what.into(), expected: 2 * nd, got: mat.ncols() });
        }
    }
    let w = io.w();
    let wt = io.wt();
    let w_full_rank = linalg::rank(&w, RANK_TOL)? == w.nrows();
    let wt_full_rank = linalg::rank(&wt, RANK_TOL)? == wt.nrows();
    let stack = linalg::vstack(&[&w, &wt]);
    let stack_condition = if stack.nrows() == stack.ncols() { condition_number(&stack)? } else { f64::INFINITY };
    let stack_invertible = stack_condition.is_finite();
    Ok(IoSplitReport {
        w_full_rank,
        wt_full_rank,
        stack_invertible,
        stack_condition,
        passed: w_full_rank && wt_full_rank && stack_invertible,
    })
}

/// Skew, dissipation and energy matrices of a strictly input passive controller.
#[derive(Debug, Clone, PartialEq)]
pub struct SipParts {
    /// Skew-adjoint interconnection `J_c`.
    pub j_c: Mat<c64>,
    /// Dissipation `R_c ⪰ 0`.
    pub r_c: Mat<c64>,
}

/// Finite-dimensional controller `ξ' = A_c ξ + B_c u_c`, `y_c = C_c ξ + D_c u_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    /// State matrix `A_c`.
    pub a_c: Mat<c64>,
    /// Input matrix `B_c`.
    pub b_c: Mat<c64>,
    /// Output matrix `C_c`.
    pub c_c: Mat<c64>,
    /// Feedthrough `D_c`.
    pub d_c: Mat<c64>,
    /// Energy matrix defining `½ ξ*Q_c ξ` (identity for the general form).
    pub q_c: Mat<c64>,
    /// Structured parts when built in port-Hamiltonian form.
    pub sip: Option<SipParts>,
    /// Declared passivity margin `σ`.
    pub sigma: f64,
}

impl Controller {
    /// General state-space controller with the Euclidean energy.
    pub fn general(a_c: Mat<c64>, b_c: Mat<c64>, c_c: Mat<c64>, d_c: Mat<c64>) -> Result<Self> {
        let nc = a_c.nrows();
        check_shape("A_c", &a_c, nc, nc)?;
        check_shape("B_c", &b_c, nc, b_c.ncols())?;
        check_shape("C_c", &c_c, c_c.nrows(), nc)?;
        check_shape("D_c", &d_c, c_c.nrows(), b_c.ncols())?;
        Ok(Controller { a_c, b_c, c_c, d_c, q_c: Mat::identity(nc, nc), sip: None, sigma: 0.0 })
    }

    /// Port-Hamiltonian controller with `A_c = (J_c − R_c) Q_c` and `C_c = B_c* Q_c`.
    pub fn sip(j_c: Mat<c64>, r_c: Mat<c64>, q_c: Mat<c64>, b_c: Mat<c64>, d_c: Mat<c64>, sigma: f64) -> Result<Self> {
        let nc = q_c.nrows();
        check_shape("Q_c", &q_c, nc, nc)?;
        check_shape("J_c", &j_c, nc, nc)?;
        check_shape("R_c", &r_c, nc, nc)?;
        check_shape("B_c", &b_c, nc, b_c.ncols())?;
        check_shape("D_c", &d_c, b_c.ncols(), b_c.ncols())?;
        let a_c = &(&j_c - &r_c) * &q_c;
        let c_c = &linalg::adjoint(&b_c) * &q_c;
        Ok(Controller { a_c, b_c, c_c, d_c, q_c, sip: Some(SipParts { j_c, r_c }), sigma })
    }

    /// Controller without state and zero feedthrough for `m` inputs.
    pub fn zero(m: usize, m_tilde: usize) -> Self {
        Controller {
            a_c: Mat::zeros(0, 0),
            b_c: Mat::zeros(0, m_tilde),
            c_c: Mat::zeros(m, 0),
            d_c: Mat::zeros(m, m_tilde),
            q_c: Mat::zeros(0, 0),
            sip: None,
            sigma: 0.0,
        }
    }

    /// State dimension `n_c`.
    pub fn n_c(&self) -> usize {
        self.a_c.nrows()
    }
}

fn check_shape(what: &str, m: &Mat<c64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows {
        return Err(PhsError::DimensionMismatch { what: format!("{what} rows"), expected: rows, got: m.nrows() });
    }
    if m.ncols() != cols {
        return Err(PhsError::DimensionMismatch { what: format!("{what} columns"), expected: cols, got: m.ncols() });
    }
    Ok(())
}

/// Checks of the strict input passivity hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SipReport {
    /// Whether the controller is given in port-Hamiltonian form.
    pub structured: bool,
    /// `‖J_c + J_c*‖_max`.
    pub j_skew_residual: f64,
    /// `R_c ⪰ 0`.
    pub r_psd: DefinitenessCheck,
    /// `Q_c ≻ 0` (smallest eigenvalue must exceed the tolerance).
    pub q_pd: DefinitenessCheck,
    /// `D_c* = D_c` residual.
    pub d_symmetry_residual: f64,
    /// `D_c − σI ⪰ 0`.
    pub d_margin: DefinitenessCheck,
    /// Declared margin.
    pub sigma: f64,
    /// Largest real part of the eigenvalues of `A_c`.
    pub max_re_eig_a_c: f64,
    /// Whether all hypotheses hold.
    pub passed: bool,
}

/// Verifies `J_c* = −J_c`, `R_c ⪰ 0`, `Q_c ≻ 0`, `D_c* = D_c ⪰ σI` with `σ > 0` and a Hurwitz `A_c`.
pub fn sip_check(ctrl: &Controller) -> Result<SipReport> {
    let nc = ctrl.n_c();
    let (j, r) = match &ctrl.sip {
        Some(p) => (p.j_c.clone(), p.r_c.clone()),
        None => (Mat::zeros(nc, nc), Mat::zeros(nc, nc)),
    };
    let j_skew_residual = linalg::norm_max(&(&j + &linalg::adjoint(&j)));
    let r_psd = linalg::psd_check(&linalg::hermitian_part(&r), PSD_TOL)?;
    let q_min = linalg::herm_eigvals(&linalg::hermitian_part(&ctrl.q_c))?.first().copied().unwrap_or(f64::INFINITY);
    let q_pd = DefinitenessCheck { passed: q_min > PSD_TOL, eigenvalue: q_min, tolerance: PSD_TOL };
    let d_symmetry_residual = if ctrl.d_c.nrows() == ctrl.d_c.ncols() {
        linalg::norm_max(&(&ctrl.d_c - &linalg::adjoint(&ctrl.d_c)))
    } else {
        f64::INFINITY
    };
    let d_margin = if d_symmetry_residual.is_finite() {
        let shifted = &linalg::hermitian_part(&ctrl.d_c) - &linalg::scale(&Mat::identity(ctrl.d_c.nrows(), ctrl.d_c.nrows()), re(ctrl.sigma));
        linalg::psd_check(&shifted, PSD_TOL)?
    } else {
        DefinitenessCheck { passed: false, eigenvalue: f64::NEG_INFINITY, tolerance: PSD_TOL }
    };
    let max_re_eig_a_c = linalg::eigvals(&ctrl.a_c)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let structured = ctrl.sip.is_some();
    let passed = structured
        && j_skew_residual <= model::SYMMETRY_TOL
        && r_psd.passed
        && q_pd.passed
        && d_symmetry_residual <= model::SYMMETRY_TOL
        && d_margin.passed
        && ctrl.sigma > 0.0
        && max_re_eig_a_c < 0.0;
    Ok(SipReport {
        structured,
        j_skew_residual,
        r_psd,
        q_pd,
        d_symmetry_residual,
        d_margin,
        sigma: ctrl.sigma,
        max_re_eig_a_c,
        passed,
    })
}

/// Model, split and controller coupled by `u_c = y1`, `u1 = −y_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopSystem {
    /// Distributed part.
    pub def: PhsDefinition,
    /// Port map of `def`.
    pub pm: PortMap,
    /// Input/output split.
    pub io: IoSplit,
    /// Controller.
    pub ctrl: Controller,
    /// Coupled constraint `[[W1 + D_c W̃1, C_c], [W2, 0]]` acting on `(z; ξ)`.
    pub w_cl: Mat<c64>,
}

/// Assembles the closed-loop constraint matrix.
pub fn build_closed_loop(def: &PhsDefinition, io: &IoSplit, ctrl: &Controller) -> Result<ClosedLoopSystem> {
    let nd = def.nd();
    validate_io_split(io, nd)?;
    let (m, mt, nc) = (io.m(), io.m_tilde(), ctrl.n_c());
    check_shape("D_c", &ctrl.d_c, m, mt)?;
    check_shape("C_c", &ctrl.c_c, m, nc)?;
    check_shape("B_c", &ctrl.b_c, nc, mt)?;
    let pm = model::build_port_map(def)?;
    let top_left = &io.w1 + &(&ctrl.d_c * &io.wt1);
    let top = linalg::hstack(&[&top_left, &ctrl.c_c]);
    let bottom = linalg::hstack(&[&io.w2, &Mat::zeros(io.w2.nrows(), nc)]);
    let w_cl = linalg::vstack(&[&top, &bottom]);
    Ok(ClosedLoopSystem { def: def.clone(), pm, io: io.clone(), ctrl: ctrl.clone(), w_cl })
}

impl ClosedLoopSystem {
    /// Dimension `2Nd + n_c` of the finite-dimensional boundary/controller space.
    pub fn space_dim(&self) -> usize {
        2 * self.def.nd() + self.ctrl.n_c()
    }

    /// Hermitian matrix of `F(z, ξ) = ½ z*Σz + Re(ξ* Q_c (A_c ξ + B_c W̃1 z))`.
    pub fn power_form(&self) -> Mat<c64> {
        let nd2 = 2 * self.def.nd();
        let nc = self.ctrl.n_c();
        let mut f = Mat::<c64>::zeros(nd2 + nc, nd2 + nc);
        linalg::set_block(&mut f, 0, 0, &linalg::scale(&wellposed::sigma_matrix(self.def.nd()), re(0.5)));
        if nc > 0 {
            let g = &(&self.ctrl.q_c * &self.ctrl.b_c) * &self.io.wt1;
            linalg::set_block(&mut f, nd2, 0, &linalg::scale(&g, re(0.5)));
            linalg::set_block(&mut f, 0, nd2, &linalg::scale(&linalg::adjoint(&g), re(0.5)));
            let qa = &self.ctrl.q_c * &self.ctrl.a_c;
            linalg::set_block(&mut f, nd2, nd2, &linalg::hermitian_part(&qa));
        }
        f
    }

    /// Map `(z; ξ) ↦ u_c = W̃1 z`.
    pub fn input_map(&self) -> Mat<c64> {
        linalg::hstack(&[&self.io.wt1, &Mat::zeros(self.io.m_tilde(), self.ctrl.n_c())])
    }
}

/// Largest values of the closed-loop power forms on `ker W_cl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopMargin {
    /// `λ_max` of `F` on `ker W_cl`; dissipative when at most the tolerance.
    pub margin: f64,
    /// `λ_max` of `F + σ|u_c|²` on `ker W_cl` (present for structured controllers).
    pub sip_margin: Option<f64>,
    /// Tolerance applied to both margins.
    pub tolerance: f64,
    /// Whether the closed loop is dissipative.
    pub dissipative: bool,
    /// Whether the strict passivity surplus is confirmed.
    pub sip_confirmed: bool,
}

/// Checks dissipativity of the coupled boundary form on the constraint set.
pub fn closed_loop_dissipativity(cl: &ClosedLoopSystem) -> Result<ClosedLoopMargin> {
    let rp0 = linalg::nsd_check(&cl.def.re_p0(), PSD_TOL)?;
    let (k, _) = linalg::null_space(&cl.w_cl, RANK_TOL)?;
    let kh = linalg::adjoint(&k);
    let f = cl.power_form();
    let top = |m: &Mat<c64>| -> Result<f64> {
        Ok(linalg::herm_eigvals(&linalg::hermitian_part(&(&kh * m * &k)))?.last().copied().unwrap_or(f64::NEG_INFINITY))
    };
    let margin = top(&f)?;
    let sip_margin = if cl.ctrl.sip.is_some() {
        let e = cl.input_map();
        let surplus = linalg::scale(&(&linalg::adjoint(&e) * &e), re(cl.ctrl.sigma));
        Some(top(&(&f + &surplus))?)
    } else {
        None
    };
    let tol = DISSIPATIVITY_TOL;
    Ok(ClosedLoopMargin {
        margin,
        sip_margin,
        tolerance: tol,
        dissipative: margin <= tol && rp0.passed,
        sip_confirmed: sip_margin.is_some_and(|s| s <= tol),
    })
}

/// Discrete closed-loop generator; the last `n_c` unknowns are the controller state.
#[derive(Debug, Clone)]
pub struct HybridDiscreteOperator {
    /// Reduced operator on `ker` of the discrete coupled constraint.
    pub op: DiscreteOperator,
    /// Number of grid unknowns of the distributed part.
    pub pde_unknowns: usize,
    /// Controller dimension.
    pub n_c: usize,
}

/// Collocation of `(x; ξ)' = [[A0, 0], [B_c 𝒞1, A_c]](x; ξ)` under `W_cl (z; ξ) = 0`.
pub fn assemble_hybrid_generator(cl: &ClosedLoopSystem, g: &CollocationGrid) -> Result<HybridDiscreteOperator> {
    let def = &cl.def;
    let nd2 = 2 * def.nd();
    let nc = cl.ctrl.n_c();
    let l = discretize::raw_operator(def, g);
    let md = l.nrows();
    let m_bar = discretize::mass_matrix(def, g);
    let z_of_x = &cl.pm.r_ext * &discretize::trace_operator(def, g);
    let c1_h = &cl.io.wt1 * &z_of_x;
    let mut l_cl = Mat::<c64>::zeros(md + nc, md + nc);
    linalg::set_block(&mut l_cl, 0, 0, &l);
    let mut m_cl = Mat::<c64>::zeros(md + nc, md + nc);
    linalg::set_block(&mut m_cl, 0, 0, &m_bar);
    if nc > 0 {
        linalg::set_block(&mut l_cl, md, 0, &(&cl.ctrl.b_c * &c1_h));
        linalg::set_block(&mut l_cl, md, md, &cl.ctrl.a_c);
        linalg::set_block(&mut m_cl, md, md, &linalg::hermitian_part(&cl.ctrl.q_c));
    }
    let wz = linalg::block(&cl.w_cl, 0, cl.w_cl.nrows(), 0, nd2);
    let wxi = linalg::block(&cl.w_cl, 0, cl.w_cl.nrows(), nd2, nc);
    let c = linalg::hstack(&[&(&wz * &z_of_x), &wxi]);
    let (v, m_h, a_h) = discretize::project_constrained(&l_cl, &m_cl, &c)?;
    let op = DiscreteOperator { a_h, m_h, v, m_bar: m_cl, grid: Some(g.clone()), label: format!("hybrid collocation n={}", g.n) };
    Ok(HybridDiscreteOperator { op, pde_unknowns: md, n_c: nc })
}

/// Outcome of the passivity test `Re⟨A0x, x⟩_H ≤ Re⟨W z, W̃ z⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassivityReport {
    /// `λ_max` of `½Σ − ½(W*W̃ + W̃*W)` (nonpositive for passivity).
    pub form_max: f64,
    /// Largest scaled violation over the sampled functions.
    pub sampled_excess: f64,
    /// Number of sampled functions.
    pub samples: usize,
}

/// Tests the passivity inequality as a matrix form and on sampled elements of the maximal domain.
pub fn passivity_check(def: &PhsDefinition, io: &IoSplit, seed: u64) -> Result<PassivityReport> {
    let pm = model::build_port_map(def)?;
    let nd = def.nd();
    let w = io.w();
    let wt = io.wt();
    let cross = linalg::hermitian_part(&(&linalg::adjoint(&w) * &wt));
    let form = &linalg::scale(&wellposed::sigma_matrix(nd), re(0.5)) - &cross;
    let form_max = linalg::herm_eigvals(&form)?.last().copied().unwrap_or(0.0);
    let free = BoundaryCondition::unconstrained(def);
    let mut excess = f64::NEG_INFINITY;
    for s in 0..PASSIVITY_SAMPLES as u64 {
        let x = model::sample_domain_function(def, &free, seed.wrapping_add(s))?;
        let bal = wellposed::energy_balance(def, &pm, &x)?;
        let phi = model::boundary_trace(&x, def)?;
        let z = linalg::matvec(&pm.r_ext, &phi);
        let supplied = linalg::dot(&linalg::matvec(&w, &z), &linalg::matvec(&wt, &z)).re;
        excess = excess.max((bal.power - supplied) / (1.0 + bal.norm_sq));
    }
    if excess > PASSIVITY_TOL || form_max > PSD_TOL {
        return Err(PhsError::NotPassive { excess: excess.max(form_max) });
    }
    Ok(PassivityReport { form_max, sampled_excess: excess, samples: PASSIVITY_SAMPLES })
}

/// Coefficient `min (|W z|² + |W̃1 z|²) / |T z|²` over all port vectors.
pub fn sip_kappa(cl: &ClosedLoopSystem, sel: &TraceSelector) -> Result<f64> {
    let w = cl.io.w();
    let a = linalg::hermitian_part(&(&(&linalg::adjoint(&w) * &w) + &(&linalg::adjoint(&cl.io.wt1) * &cl.io.wt1)));
    let t = &sel.matrix() * &cl.pm.r_inv;
    let b = linalg::hermitian_part(&(&linalg::adjoint(&t) * &t));
    Ok(wellposed::pencil_minimum(&a, &b)?.value)
}

/// Stability classification of a closed loop with a strictly input passive controller.
pub fn sip_stability_classify(cl: &ClosedLoopSystem, external_asymptotic_evidence: bool, seed: u64) -> Result<StabilityCertificate> {
    let report = sip_check(&cl.ctrl)?;
    if !report.passed {
        return Err(PhsError::BadParameter("controller is not strictly input passive".into()));
    }
    passivity_check(&cl.def, &cl.io, seed)?;
    let structure = wellposed::detect_antidiagonal_structure(&cl.def);
    let evidence = if external_asymptotic_evidence { AsymptoticEvidence::External } else { AsymptoticEvidence::None };
    let mut cert = wellposed::classify_with(cl.def.n, cl.def.d, structure.as_ref(), evidence, |sel| sip_kappa(cl, sel))?;
    cert.notes.push("coefficients bound traces by |Bx|^2 + |C1 x|^2 over the maximal domain".into());
    Ok(cert)
}

/// Classification of a closed loop with a general Hurwitz controller using the
/// coupled boundary form restricted to `ker W_cl`.
pub fn general_stability_classify(cl: &ClosedLoopSystem, external_asymptotic_evidence: bool) -> Result<StabilityCertificate> {
    let max_re = linalg::eigvals(&cl.ctrl.a_c)?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if cl.ctrl.n_c() > 0 && !(max_re < 0.0) {
        return Err(PhsError::BadParameter(format!("controller state matrix is not Hurwitz (max Re = {max_re})")));
    }
    let margin = closed_loop_dissipativity(cl)?;
    if !margin.dissipative {
        return Err(PhsError::NotDissipative { min_eig: -margin.margin });
    }
    let (k, _) = linalg::null_space(&cl.w_cl, RANK_TOL)?;
    let kh = linalg::adjoint(&k);
    let a = linalg::hermitian_part(&linalg::scale(&(&kh * &cl.power_form() * &k), re(-1.0)));
    let nd2 = 2 * cl.def.nd();
    let structure = wellposed::detect_antidiagonal_structure(&cl.def);
    let evidence = if external_asymptotic_evidence { AsymptoticEvidence::External } else { AsymptoticEvidence::None };
    let mut cert = wellposed::classify_with(cl.def.n, cl.def.d, structure.as_ref(), evidence, |sel| {
        let t = &sel.matrix() * &cl.pm.r_inv;
        let t_ext = linalg::hstack(&[&t, &Mat::zeros(t.nrows(), cl.space_dim() - nd2)]);
        let tk = &t_ext * &k;
        let b = linalg::hermitian_part(&(&linalg::adjoint(&tk) * &tk));
        Ok(wellposed::pencil_minimum(&a, &b)?.value)
    })?;
    cert.notes.push("general controller: coefficients from the coupled boundary form on the closed-loop constraint set".into());
    Ok(cert)
}

/// Random constrained pairs `(z, ξ)` for checking `F(z, ξ) ≤ −σ|u_c|²`; returns the largest scaled excess.
pub fn sampled_sip_excess(cl: &ClosedLoopSystem, samples: usize, seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let (k, _) = linalg::null_space(&cl.w_cl, RANK_TOL)?;
    let f = cl.power_form();
    let e = cl.input_map();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let y: Vec<c64> = (0..k.ncols())
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                c64::new(a, b)
            })
            .collect();
        let v = linalg::matvec(&k, &y);
        let n2 = linalg::dot(&v, &v).re;
        let uc = linalg::matvec(&e, &v);
        let val = linalg::quad_form(&f, &v).re + cl.ctrl.sigma * linalg::dot(&uc, &uc).re;
        worst = worst.max(val / n2.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Zero state of a hybrid operator.
pub fn hybrid_zero(op: &HybridDiscreteOperator) -> Vec<c64> {
    vec![ZERO; op.op.dim()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real_rows;
    use crate::model::HamiltonianDensity;

    fn transport() -> PhsDefinition {
        PhsDefinition::new(1, vec![from_real_rows(&[&[0.0]]), from_real_rows(&[&[1.0]])], HamiltonianDensity::constant(&[&[1.0]]).unwrap())
            .unwrap()
    }

    fn transport_split() -> IoSplit {
        IoSplit::new(from_real_rows(&[&[1.0, 1.0]]), Mat::zeros(0, 2), from_real_rows(&[&[1.0, -1.0]]), Mat::zeros(0, 2))
    }

    #[test]
    fn split_validation() {
        let r = validate_io_split(&transport_split(), 1).unwrap();
        assert!(r.passed && r.stack_invertible);
        let dup = IoSplit::new(from_real_rows(&[&[1.0, 1.0]]), Mat::zeros(0, 2), from_real_rows(&[&[1.0, 1.0]]), Mat::zeros(0, 2));
        assert!(!validate_io_split(&dup, 1).unwrap().stack_invertible);
        let empty = IoSplit::new(Mat::zeros(0, 2), from_real_rows(&[&[1.0, 1.0]]), Mat::zeros(0, 2), from_real_rows(&[&[1.0, -1.0]]));
        assert_eq!(validate_io_split(&empty, 1), Err(PhsError::EmptyInput));
    }

    #[test]
    fn closed_loop_block_substitution() {
        let ctrl = Controller::general(from_real_rows(&[&[-1.0]]), from_real_rows(&[&[1.0]]), from_real_rows(&[&[3.0]]), from_real_rows(&[&[2.0]]))
            .unwrap();
        let cl = build_closed_loop(&transport(), &transport_split(), &ctrl).unwrap();
        assert_eq!(cl.w_cl, from_real_rows(&[&[3.0, -1.0, 3.0]]));
        let stat = build_closed_loop(&transport(), &transport_split(), &Controller::zero(1, 1)).unwrap();
        assert_eq!(stat.w_cl, from_real_rows(&[&[1.0, 1.0]]));
    }

    #[test]
    fn sip_examples() {
        let one = || from_real_rows(&[&[1.0]]);
        let c = Controller::sip(Mat::zeros(1, 1), one(), one(), one(), one(), 1.0).unwrap();
        let r = sip_check(&c).unwrap();
        assert!(r.passed);
        assert!((r.max_re_eig_a_c + 1.0).abs() < 1e-14);
        let weak = Controller::sip(Mat::zeros(1, 1), one(), one(), one(), from_real_rows(&[&[0.5]]), 1.0).unwrap();
        let r = sip_check(&weak).unwrap();
        assert!(!r.passed && !r.d_margin.passed);
    }

    #[test]
    fn static_case_matches_generation_certificate() {
        let cl = build_closed_loop(&transport(), &transport_split(), &Controller::zero(1, 1)).unwrap();
        let m = closed_loop_dissipativity(&cl).unwrap();
        assert!(m.dissipative);
        assert!(m.margin <= 1e-12);
    }

    #[test]
    fn sip_transport_is_exponential() {
        let one = || from_real_rows(&[&[1.0]]);
        let ctrl = Controller::sip(Mat::zeros(1, 1), one(), one(), one(), one(), 1.0).unwrap();
        let colocated = IoSplit::new(from_real_rows(&[&[1.0, 0.0]]), Mat::zeros(0, 2), from_real_rows(&[&[0.0, 1.0]]), Mat::zeros(0, 2));
        assert!(passivity_check(&transport(), &colocated, 3).is_ok());
        assert!(matches!(passivity_check(&transport(), &transport_split(), 3), Err(PhsError::NotPassive { .. })));
        let cl = build_closed_loop(&transport(), &colocated, &ctrl).unwrap();
        let sel = TraceSelector::full(1, 1, &[(0, 0)]).unwrap();
        assert!(sip_kappa(&cl, &sel).unwrap() > 0.1);
        let cert = sip_stability_classify(&cl, false, 1).unwrap();
        assert_eq!(cert.classification, wellposed::Classification::CertifiedExponential);
        assert!(closed_loop_dissipativity(&cl).unwrap().sip_confirmed);
    }

    #[test]
    fn degenerate_controller_reproduces_static_operator() {
        let def = transport();
        let g = discretize::legendre_operator(12);
        let cl = build_closed_loop(&def, &transport_split(), &Controller::zero(1, 1)).unwrap();
        let h = assemble_hybrid_generator(&cl, &g).unwrap();
        let s = discretize::assemble_discrete_generator(&def, &BoundaryCondition::port(from_real_rows(&[&[1.0, 1.0]])), &g).unwrap();
        let mut a: Vec<c64> = linalg::eigvals(&h.op.a_h).unwrap();
        let mut b: Vec<c64> = linalg::eigvals(&s.a_h).unwrap();
        let key = |z: &c64| (z.re * 1e6).round() as i64 * 1_000_000_000 + (z.im * 1e6).round() as i64;
        a.sort_by_key(key);
        b.sort_by_key(key);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-10 * (1.0 + y.norm()));
        }
    }
}
