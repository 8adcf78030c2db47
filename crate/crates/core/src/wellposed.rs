//! Generation certificate, boundary dissipation coefficients and stability
//! classification by finite-dimensional reduction of the boundary forms.

use std::collections::BTreeMap;
use std::fmt;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{PhsError, Result};
use crate::linalg::{self, re, DefinitenessCheck, ZERO};
use crate::model::{self, BoundaryCondition, PhsDefinition, PortMap, StateFunction, RANK_TOL};
use crate::poly::Poly;

/// Default tolerance of the semidefiniteness tests.
pub const PSD_TOL: f64 = 1e-10;
/// Threshold below which the boundary form counts as indefinite.
pub const DISSIPATIVITY_TOL: f64 = 1e-10;
/// Relative cut separating the range of the trace form from its null space.
pub const PENCIL_RANGE_TOL: f64 = 1e-10;

/// Swap matrix `Σ = [[0, I], [I, 0]]` of size `2·nd`.
pub fn sigma_matrix(nd: usize) -> Mat<c64> {
    Mat::from_fn(2 * nd, 2 * nd, |i, j| if i + nd == j || j + nd == i { re(1.0) } else { ZERO })
}

/// Contraction verdict of the generation test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// `A` generates a contraction semigroup.
    Contraction,
    /// At least one hypothesis failed.
    NotContraction,
}

/// Outcome of the matrix test `W Σ W* ⪰ 0`, `Re P0 ⪯ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationCertificate {
    /// `W` has full row rank `Nd`.
    pub rank_ok: bool,
    /// Test of `W Σ W* ⪰ 0` with its smallest eigenvalue.
    pub wsigma_psd: DefinitenessCheck,
    /// Test of `Re P0 ⪯ 0` with its largest eigenvalue.
    pub rep0_nsd: DefinitenessCheck,
    /// Overall verdict.
    pub verdict: Verdict,
    /// The swap matrix used.
    pub sigma_matrix: Mat<c64>,
}

/// Generation test with the default tolerance.
pub fn check_generation(def: &PhsDefinition, bc: &BoundaryCondition) -> Result<GenerationCertificate> {
    check_generation_with_tol(def, bc, PSD_TOL)
}

/// Generation test: `W` must be port-form equivalent with exactly `Nd` rows of full rank.
pub fn check_generation_with_tol(def: &PhsDefinition, bc: &BoundaryCondition, tol: f64) -> Result<GenerationCertificate> {
    let pm = model::build_port_map(def)?;
    let nd = def.nd();
    let w = bc.port_matrix(&pm);
    if w.ncols() != 2 * nd {
        return Err(PhsError::DimensionMismatch { what: "boundary matrix columns".into(), expected: 2 * nd, got: w.ncols() });
    }
    if w.nrows() != nd {
        return Err(PhsError::DimensionMismatch { what: "boundary matrix rows".into(), expected: nd, got: w.nrows() });
    }
    let r = linalg::rank(&w, RANK_TOL)?;
    if r < nd {
        return Err(PhsError::RankDeficientW { rank: r, rows: nd });
    }
    let sigma = sigma_matrix(nd);
    let wsw = &w * &sigma * w.adjoint();
    let wsigma_psd = linalg::psd_check(&wsw, tol)?;
    let rep0_nsd = linalg::nsd_check(&def.re_p0(), tol)?;
    let verdict = if wsigma_psd.passed && rep0_nsd.passed { Verdict::Contraction } else { Verdict::NotContraction };
    Ok(GenerationCertificate { rank_ok: true, wsigma_psd, rep0_nsd, verdict, sigma_matrix: sigma })
}

/// Terms of the energy identity for one function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance {
    /// `Re⟨A0 x, x⟩_H`.
    pub power: f64,
    /// `Re(f∂* e∂)`.
    pub boundary: f64,
    /// `∫ (Hx)* (Re P0) (Hx)`.
    pub volume: f64,
    /// `‖x‖_H²`.
    pub norm_sq: f64,
}

impl EnergyBalance {
    /// `|power − boundary − volume| / (1 + ‖x‖²)`.
    pub fn scaled_residual(&self) -> f64 {
        (self.power - self.boundary - self.volume).abs() / (1.0 + self.norm_sq)
    }
}

/// Evaluates both sides of `Re⟨A0x,x⟩_H = Re⟨f∂,e∂⟩ + ∫(Hx)*(Re P0)(Hx)`.
pub fn energy_balance(def: &PhsDefinition, pm: &PortMap, x: &StateFunction) -> Result<EnergyBalance> {
    let ax = model::apply_a0(x, def)?;
    let power = model::h_inner_product(&ax, x, def).re;
    let phi = model::boundary_trace(x, def)?;
    let (f, e) = model::port_variables(&phi, pm)?;
    let boundary = linalg::dot(&f, &e).re;
    let volume = model::volume_term(x, def);
    let norm_sq = model::h_inner_product(x, x, def).re;
    Ok(EnergyBalance { power, boundary, volume, norm_sq })
}

/// Largest scaled energy-balance residual over `n_samples` seeded domain functions.
pub fn verify_energy_balance(def: &PhsDefinition, bc: &BoundaryCondition, n_samples: usize, seed: u64) -> Result<f64> {
    let pm = model::build_port_map(def)?;
    let mut worst = 0.0f64;
    for s in 0..n_samples {
        let x = model::sample_domain_function(def, bc, seed.wrapping_add(s as u64))?;
        worst = worst.max(energy_balance(def, &pm, &x)?.scaled_residual());
    }
    Ok(worst)
}

/// One selected trace `(Hx)_comp^{(order)}(end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TraceTerm {
    /// Endpoint, 0 or 1.
    pub end: usize,
    /// Derivative order, below `N`.
    pub order: usize,
    /// Component index, below `d`.
    pub comp: usize,
}

/// Set of boundary traces whose squared moduli enter a dissipation estimate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceSelector {
    n: usize,
    d: usize,
    terms: Vec<TraceTerm>,
}

impl TraceSelector {
    /// Builds a selector, sorting terms and rejecting duplicates or out-of-range entries.
    pub fn new(n: usize, d: usize, mut terms: Vec<TraceTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(PhsError::EmptySelector);
        }
        for t in &terms {
            if t.end > 1 || t.order >= n || t.comp >= d {
                return Err(PhsError::InvalidModel(format!(
                    "trace ({}, {}, {}) is outside ends {{0,1}}, orders < {n}, components < {d}",
                    t.end, t.order, t.comp
                )));
            }
        }
        terms.sort();
        let len = terms.len();
        terms.dedup();
        if terms.len() != len {
            return Err(PhsError::InvalidModel("duplicate trace in selector".into()));
        }
        Ok(TraceSelector { n, d, terms })
    }

    /// All components of the listed `(end, order)` pairs.
    pub fn full(n: usize, d: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let terms = pairs.iter().flat_map(|&(end, order)| (0..d).map(move |comp| TraceTerm { end, order, comp })).collect();
        Self::new(n, d, terms)
    }

    /// Parses `"e:k,e:k:c,…"`; a pair without component selects every component.
    pub fn parse(text: &str, n: usize, d: usize) -> Result<Self> {
        let mut terms = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let parts: Vec<&str> = item.split(':').collect();
            let num = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| PhsError::InvalidModel(format!("bad trace entry '{item}'")))
            };
            match parts.len() {
                2 => {
                    let (end, order) = (num(parts[0])?, num(parts[1])?);
                    terms.extend((0..d).map(|comp| TraceTerm { end, order, comp }));
                }
                3 => terms.push(TraceTerm { end: num(parts[0])?, order: num(parts[1])?, comp: num(parts[2])? }),
                _ => return Err(PhsError::InvalidModel(format!("bad trace entry '{item}'"))),
            }
        }
        Self::new(n, d, terms)
    }

    /// Selected terms in sorted order.
    pub fn terms(&self) -> &[TraceTerm] {
        &self.terms
    }

    /// Selector matrix picking the chosen rows of Φ.
    pub fn matrix(&self) -> Mat<c64> {
        let cols = 2 * self.n * self.d;
        let mut m = Mat::<c64>::zeros(self.terms.len(), cols);
        for (r, t) in self.terms.iter().enumerate() {
            m[(r, model::trace_index(self.n, self.d, t.end, t.order, t.comp))] = re(1.0);
        }
        m
    }
}

impl fmt::Display for TraceSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for t in &self.terms {
            groups.entry((t.end, t.order)).or_default().push(t.comp);
        }
        let mut items = Vec::new();
        for ((end, order), comps) in groups {
            if comps.len() == self.d {
                items.push(format!("{end}:{order}"));
            } else {
                items.extend(comps.iter().map(|c| format!("{end}:{order}:{c}")));
            }
        }
        write!(f, "{}", items.join(","))
    }
}

/// Smallest value of a Hermitian pencil ratio together with an optimal vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilMinimum {
    /// `inf y*Ay / y*By` over `By ≠ 0`; `+∞` when `B = 0`.
    pub value: f64,
    /// Coordinates attaining the infimum.
    pub witness: Option<Vec<c64>>,
}

/// Minimises `y*Ay / y*By` for Hermitian `A ⪰ 0` and `B ⪰ 0`, deflating the null space of `B`.
///
/// Fails with `NotDissipative` if `A` has an eigenvalue below `−DISSIPATIVITY_TOL`.
pub fn pencil_minimum(a: &Mat<c64>, b: &Mat<c64>) -> Result<PencilMinimum> {
    let n = a.nrows();
    if n == 0 {
        return Ok(PencilMinimum { value: f64::INFINITY, witness: None });
    }
    let amin = linalg::herm_eigvals(a)?[0];
    if amin < -DISSIPATIVITY_TOL {
        return Err(PhsError::NotDissipative { min_eig: amin });
    }
    let (bv, u) = linalg::herm_eig(b)?;
    let bmax = bv.last().copied().unwrap_or(0.0);
    let cut = PENCIL_RANGE_TOL * bmax.max(1.0);
    let range: Vec<usize> = (0..n).filter(|&i| bv[i] > cut).collect();
    let null: Vec<usize> = (0..n).filter(|&i| bv[i] <= cut).collect();
    if range.is_empty() {
        return Ok(PencilMinimum { value: f64::INFINITY, witness: None });
    }
    let pick = |idx: &[usize]| Mat::from_fn(n, idx.len(), |i, j| u[(i, idx[j])]);
    let ur = pick(&range);
    let un = pick(&null);
    let arr = &linalg::adjoint(&ur) * a * &ur;
    let (schur, arn_term) = if null.is_empty() {
        (arr, None)
    } else {
        let arn = &linalg::adjoint(&ur) * a * &un;
        let ann = &linalg::adjoint(&un) * a * &un;
        let annmax = linalg::herm_eigvals(&ann)?.last().copied().unwrap_or(0.0);
        let acut = 1e-12 * annmax.max(1.0);
        let pinv = linalg::herm_fn(&ann, |x| if x > acut { 1.0 / x } else { 0.0 })?;
        let corr = &arn * &pinv * linalg::adjoint(&arn);
        (&arr - &corr, Some((arn, pinv)))
    };
    let br_inv_sqrt = Mat::from_fn(range.len(), range.len(), |i, j| if i == j { re(1.0 / bv[range[i]].sqrt()) } else { ZERO });
    let g = &br_inv_sqrt * &schur * &br_inv_sqrt;
    let (gv, gu) = linalg::herm_eig(&g)?;
    let value = gv[0].max(0.0);
    let v0 = linalg::column(&gu, 0);
    let yr = linalg::matvec(&br_inv_sqrt, &v0);
    let mut y = linalg::matvec(&ur, &yr);
    if let Some((arn, pinv)) = arn_term {
        let yn = linalg::matvec(&pinv, &linalg::matvec(&linalg::adjoint(&arn), &yr));
        let yn_full = linalg::matvec(&un, &yn);
        for (yi, ni) in y.iter_mut().zip(yn_full) {
            *yi -= ni;
        }
    }
    Ok(PencilMinimum { value, witness: Some(y) })
}

/// Boundary dissipation coefficient and an extremal admissible port vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaResult {
    /// Largest `κ` with `−½ z*Σz ≥ κ |T z|²` on `ker W`.
    pub kappa: f64,
    /// Port vector in `ker W` attaining the ratio.
    pub witness: Option<Vec<c64>>,
}

/// Computes `κ_max = min_{z ∈ ker W, Tz ≠ 0} (−½ z*Σz) / |Tz|²` with `T = M_sel R_inv`.
pub fn boundary_dissipation_coefficient(def: &PhsDefinition, bc: &BoundaryCondition, sel: &TraceSelector) -> Result<KappaResult> {
    let pm = model::build_port_map(def)?;
    static_kappa(def, &pm, &bc.port_matrix(&pm), sel)
}

fn static_kappa(def: &PhsDefinition, pm: &PortMap, w: &Mat<c64>, sel: &TraceSelector) -> Result<KappaResult> {
    let nd = def.nd();
    let (k, _) = linalg::null_space(w, RANK_TOL)?;
    let sigma = sigma_matrix(nd);
    let a = linalg::hermitian_part(&linalg::scale(&(&linalg::adjoint(&k) * &sigma * &k), re(-0.5)));
    let tk = &sel.matrix() * &pm.r_inv * &k;
    let b = linalg::hermitian_part(&(&linalg::adjoint(&tk) * &tk));
    let pmin = pencil_minimum(&a, &b)?;
    Ok(KappaResult { kappa: pmin.value, witness: pmin.witness.map(|y| linalg::matvec(&k, &y)) })
}

/// Anti-diagonal block structure of a second-order model.
#[derive(Debug, Clone, PartialEq)]
pub struct AntiDiagonalStructure {
    /// Half dimension `d/2`.
    pub half: usize,
    /// Upper-right block of `P2`.
    pub p2_bar: Mat<c64>,
    /// Upper-right block of `P1`.
    pub p1_bar: Mat<c64>,
    /// Upper-left block of `H`.
    pub h1: Vec<Vec<Poly>>,
    /// Lower-right block of `H`.
    pub h2: Vec<Vec<Poly>>,
}

/// Detects `P2 = [[0, P̄2], [−P̄2*, 0]]`, `P1 = [[0, P̄1], [P̄1*, 0]]`, `H = diag(H1, H2)`.
pub fn detect_antidiagonal_structure(def: &PhsDefinition) -> Option<AntiDiagonalStructure> {
    if def.n != 2 || !def.d.is_multiple_of(2) {
        return None;
    }
    let h = def.d / 2;
    let tol = model::SYMMETRY_TOL;
    let diag_blocks_vanish = |m: &Mat<c64>| {
        (0..h).all(|i| (0..h).all(|j| m[(i, j)].norm() <= tol && m[(h + i, h + j)].norm() <= tol))
    };
    let (p2, p1) = (&def.p[2], &def.p[1]);
    if !diag_blocks_vanish(p2) || !diag_blocks_vanish(p1) {
        return None;
    }
    let p2_bar = linalg::block(p2, 0, h, h, h);
    let lower = linalg::block(p2, h, h, 0, h);
    if linalg::norm_max(&(&lower + p2_bar.adjoint())) > tol {
        return None;
    }
    let sv = linalg::singular_values(&p2_bar).ok()?;
    if sv.last().copied().unwrap_or(0.0) <= RANK_TOL * sv[0] {
        return None;
    }
    let p1_bar = linalg::block(p1, 0, h, h, h);
    let e = def.h.entries();
    let off_zero = (0..h).all(|i| {
        (0..h).all(|j| e[i][h + j].coeffs.iter().chain(&e[h + i][j].coeffs).all(|c| c.abs() <= tol))
    });
    if !off_zero {
        return None;
    }
    let h1 = (0..h).map(|i| e[i][..h].to_vec()).collect();
    let h2 = (h..2 * h).map(|i| e[i][h..].to_vec()).collect();
    Some(AntiDiagonalStructure { half: h, p2_bar, p1_bar, h1, h2 })
}

/// Stability class certified by the boundary estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// No rule applies.
    Inconclusive,
    /// Asymptotic (strong) stability.
    CertifiedAsymptotic,
    /// Exponential stability.
    CertifiedExponential,
}

/// Name of the rule certifying asymptotic stability from all traces at one end.
pub const RULE_ASYMPTOTIC: &str = "asymptotic: all traces at one endpoint";
/// Name of the first-order exponential rule.
pub const RULE_FIRST_ORDER: &str = "exponential: first order, value at one endpoint";
/// Name of the second-order exponential rule.
pub const RULE_SECOND_ORDER: &str = "exponential: second order, both traces at one endpoint plus one at the other";
/// Name of the even-order weighted-trace rule.
pub const RULE_EVEN_ORDER: &str = "exponential: even order weighted trace pattern with asymptotic stability";
/// Name of the anti-diagonal structured rule.
pub const RULE_STRUCTURED: &str = "exponential: anti-diagonal structure with asymptotic stability";

/// Coefficient computed for one trace set.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaEntry {
    /// Selector in `e:k[:c]` notation.
    pub selector: String,
    /// Rule that demanded the set.
    pub rule: String,
    /// Optimal coefficient (`+∞` when the traces vanish identically).
    pub kappa: f64,
}

/// Result of the rule-based stability classification.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    /// Coefficients for every trace set examined.
    pub kappa: Vec<KappaEntry>,
    /// Strongest certified class.
    pub classification: Classification,
    /// Rule behind `classification`.
    pub certifying_rule: Option<String>,
    /// Rule that established asymptotic stability, if any.
    pub asymptotic_rule: Option<String>,
    /// Whether the structured rule would certify exponential stability given asymptotic evidence.
    pub requires_external_asymptotic_evidence: bool,
    /// Human-readable remarks.
    pub notes: Vec<String>,
}

/// Source of asymptotic stability used by the rules that presuppose it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticEvidence {
    /// Nothing beyond the boundary estimates.
    None,
    /// Evidence supplied by the caller (for example an empty discrete axis spectrum).
    External,
}

/// Applies every stability rule using `kappa_of` to evaluate trace sets.
pub fn classify_with(
    n: usize,
    d: usize,
    structure: Option<&AntiDiagonalStructure>,
    evidence: AsymptoticEvidence,
    mut kappa_of: impl FnMut(&TraceSelector) -> Result<f64>,
) -> Result<StabilityCertificate> {
    let mut entries: Vec<KappaEntry> = Vec::new();
    let mut cache: BTreeMap<String, f64> = BTreeMap::new();
    let mut eval = |sel: TraceSelector, rule: &str, entries: &mut Vec<KappaEntry>| -> Result<f64> {
        let key = sel.to_string();
        let k = match cache.get(&key) {
            Some(&k) => k,
            None => {
                let k = kappa_of(&sel)?;
                cache.insert(key.clone(), k);
                k
            }
        };
        if !entries.iter().any(|e| e.selector == key && e.rule == rule) {
            entries.push(KappaEntry { selector: key, rule: rule.to_string(), kappa: k });
        }
        Ok(k)
    };
    let positive = |k: f64| k > DISSIPATIVITY_TOL;
    let mut notes = Vec::new();

    let mut asymptotic_rule = None;
    for end in [0usize, 1] {
        let pairs: Vec<(usize, usize)> = (0..n).map(|k| (end, k)).collect();
        let k = eval(TraceSelector::full(n, d, &pairs)?, RULE_ASYMPTOTIC, &mut entries)?;
        if positive(k) && asymptotic_rule.is_none() {
            asymptotic_rule = Some(format!("{RULE_ASYMPTOTIC} (endpoint {end})"));
        }
    }
    let have_asymptotic = asymptotic_rule.is_some() || evidence == AsymptoticEvidence::External;

    let mut exponential_rule: Option<String> = None;
    if n == 1 {
        for end in [0usize, 1] {
            let k = eval(TraceSelector::full(n, d, &[(end, 0)])?, RULE_FIRST_ORDER, &mut entries)?;
            if positive(k) && exponential_rule.is_none() {
                exponential_rule = Some(format!("{RULE_FIRST_ORDER} (endpoint {end})"));
            }
        }
    }
    if n == 2 {
        for end in [0usize, 1] {
            for other in [0usize, 1] {
                let sel = TraceSelector::full(n, d, &[(end, 0), (end, 1), (1 - end, other)])?;
                let k = eval(sel, RULE_SECOND_ORDER, &mut entries)?;
                if positive(k) && exponential_rule.is_none() {
                    exponential_rule = Some(format!("{RULE_SECOND_ORDER} (endpoint {end}, far trace order {other})"));
                }
            }
        }
    }
    if n.is_multiple_of(2) && n <= 10 {
        for pattern in minimal_even_order_patterns(n) {
            let sel = TraceSelector::full(n, d, &pattern)?;
            let k = eval(sel, RULE_EVEN_ORDER, &mut entries)?;
            if positive(k) && exponential_rule.is_none() && have_asymptotic {
                exponential_rule = Some(RULE_EVEN_ORDER.to_string());
            }
        }
    }
    let mut requires_external = false;
    if let Some(s) = structure {
        let h = s.half;
        for e0 in [0usize, 1] {
            let e1 = 1 - e0;
            for swap in [false, true] {
                let (b1, b2): (Vec<usize>, Vec<usize>) =
                    if swap { ((h..2 * h).collect(), (0..h).collect()) } else { ((0..h).collect(), (h..2 * h).collect()) };
                for near_block in [&b1, &b2] {
                    for far_order in [0usize, 1] {
                        let mut terms: Vec<TraceTerm> = (0..d).map(|comp| TraceTerm { end: e0, order: 0, comp }).collect();
                        terms.extend(near_block.iter().map(|&comp| TraceTerm { end: e0, order: 1, comp }));
                        terms.extend(b1.iter().map(|&comp| TraceTerm { end: e1, order: far_order, comp }));
                        let sel = TraceSelector::new(n, d, terms)?;
                        let k = eval(sel, RULE_STRUCTURED, &mut entries)?;
                        if positive(k) && exponential_rule.is_none() {
                            if have_asymptotic {
                                exponential_rule = Some(format!("{RULE_STRUCTURED} (endpoint {e0}{})", if swap { ", blocks swapped" } else { "" }));
                            } else {
                                requires_external = true;
                            }
                        }
                    }
                }
            }
        }
        if requires_external && exponential_rule.is_none() {
            notes.push("structured estimate holds; exponential stability follows once asymptotic stability is established".into());
        }
    }
    if evidence == AsymptoticEvidence::External {
        notes.push("asymptotic stability taken from external (surrogate) evidence".into());
    }

    let (classification, certifying_rule) = if let Some(r) = exponential_rule {
        (Classification::CertifiedExponential, Some(r))
    } else if let Some(r) = asymptotic_rule.clone() {
        (Classification::CertifiedAsymptotic, Some(r))
    } else {
        (Classification::Inconclusive, None)
    };
    Ok(StabilityCertificate {
        kappa: entries,
        classification,
        certifying_rule,
        asymptotic_rule,
        requires_external_asymptotic_evidence: requires_external && classification != Classification::CertifiedExponential,
        notes,
    })
}

/// Minimal `(end, order)` sets satisfying the even-order weighted-trace pattern.
pub fn minimal_even_order_patterns(n: usize) -> Vec<Vec<(usize, usize)>> {
    let kk = n / 2;
    let slots: Vec<(usize, usize)> = (0..2).flat_map(|e| (0..n).map(move |k| (e, k))).collect();
    let holds = |mask: u32| {
        let a = |e: usize, k: usize| mask & (1 << (e * n + k)) != 0;
        (0..2).any(|z0| {
            a(z0, 0)
                && a(z0, kk)
                && (0..kk).all(|k| a(z0, k + 1) || a(z0, n - k - 1))
                && (0..2).all(|z| (0..kk).all(|k| a(z, k) || a(z, n - k - 1)))
        })
    };
    let total = 1u32 << (2 * n);
    let satisfying: Vec<u32> = (0..total).filter(|&m| holds(m)).collect();
    satisfying
        .iter()
        .filter(|&&m| !satisfying.iter().any(|&s| s != m && s & m == s))
        .map(|&m| slots.iter().enumerate().filter(|(i, _)| m & (1 << i) != 0).map(|(_, &p)| p).collect())
        .collect()
}

/// Classifies stability of the static boundary-controlled model.
pub fn classify_stability(def: &PhsDefinition, bc: &BoundaryCondition, external_asymptotic_evidence: bool) -> Result<StabilityCertificate> {
    let cert = check_generation(def, bc)?;
    if cert.verdict != Verdict::Contraction {
        return Err(PhsError::NotDissipative { min_eig: cert.wsigma_psd.eigenvalue.min(-cert.rep0_nsd.eigenvalue) });
    }
    let pm = model::build_port_map(def)?;
    let w = bc.port_matrix(&pm);
    let structure = detect_antidiagonal_structure(def);
    let evidence = if external_asymptotic_evidence { AsymptoticEvidence::External } else { AsymptoticEvidence::None };
    classify_with(def.n, def.d, structure.as_ref(), evidence, |sel| Ok(static_kappa(def, &pm, &w, sel)?.kappa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, from_rows, I};
    use crate::model::HamiltonianDensity;

    fn transport() -> PhsDefinition {
        PhsDefinition::new(1, vec![from_real_rows(&[&[0.0]]), from_real_rows(&[&[1.0]])], HamiltonianDensity::constant(&[&[1.0]]).unwrap())
            .unwrap()
    }

    fn schrodinger(k: f64, alpha: f64) -> (PhsDefinition, BoundaryCondition) {
        let def = PhsDefinition::new(
            2,
            vec![Mat::zeros(1, 1), Mat::zeros(1, 1), linalg::col(&[I])],
            HamiltonianDensity::constant(&[&[1.0]]).unwrap(),
        )
        .unwrap();
        let bc = BoundaryCondition::trace(from_rows(&[
            vec![ZERO, ZERO, c64::new(0.0, k), re(1.0)],
            vec![re(-alpha), re(1.0), ZERO, ZERO],
        ]));
        (def, bc)
    }

    #[test]
    fn transport_generation_pair() {
        let def = transport();
        let good = check_generation(&def, &BoundaryCondition::port(from_real_rows(&[&[1.0, 1.0]]))).unwrap();
        assert_eq!(good.verdict, Verdict::Contraction);
        assert!((good.wsigma_psd.eigenvalue - 2.0).abs() < 1e-14);
        let bad = check_generation(&def, &BoundaryCondition::port(from_real_rows(&[&[1.0, -1.0]]))).unwrap();
        assert_eq!(bad.verdict, Verdict::NotContraction);
        assert!((bad.wsigma_psd.eigenvalue + 2.0).abs() < 1e-14);
    }

    #[test]
    fn positive_p0_is_never_a_contraction() {
        let def = PhsDefinition::new(1, vec![from_real_rows(&[&[1.0]]), from_real_rows(&[&[1.0]])], HamiltonianDensity::constant(&[&[1.0]]).unwrap())
            .unwrap();
        let c = check_generation(&def, &BoundaryCondition::port(from_real_rows(&[&[1.0, 1.0]]))).unwrap();
        assert!(!c.rep0_nsd.passed);
        assert_eq!(c.verdict, Verdict::NotContraction);
    }

    #[test]
    fn energy_balance_hand_cases() {
        let def = transport();
        let pm = model::build_port_map(&def).unwrap();
        let eb = energy_balance(&def, &pm, &StateFunction::real_state(&[&[0.0, 1.0]])).unwrap();
        assert!((eb.power - 0.5).abs() < 1e-14 && (eb.boundary - 0.5).abs() < 1e-14);
        let eb0 = energy_balance(&def, &pm, &StateFunction::real_state(&[&[0.0]])).unwrap();
        assert_eq!(eb0.scaled_residual(), 0.0);
        let damped = PhsDefinition::new(1, vec![from_real_rows(&[&[-1.0]]), from_real_rows(&[&[1.0]])], HamiltonianDensity::constant(&[&[1.0]]).unwrap())
            .unwrap();
        let pm = model::build_port_map(&damped).unwrap();
        let eb = energy_balance(&damped, &pm, &StateFunction::real_state(&[&[1.0]])).unwrap();
        assert!((eb.volume + 1.0).abs() < 1e-14 && (eb.power + 1.0).abs() < 1e-14 && eb.boundary.abs() < 1e-14);
    }

    #[test]
    fn transport_kappa_is_one_half() {
        let def = transport();
        let sel = TraceSelector::parse("0:0", 1, 1).unwrap();
        let k = boundary_dissipation_coefficient(&def, &BoundaryCondition::port(from_real_rows(&[&[1.0, 1.0]])), &sel).unwrap();
        assert!((k.kappa - 0.5).abs() < 1e-12);
        let bad = boundary_dissipation_coefficient(&def, &BoundaryCondition::port(from_real_rows(&[&[1.0, -1.0]])), &sel);
        assert!(matches!(bad, Err(PhsError::NotDissipative { .. })));
    }

    #[test]
    fn schrodinger_kappa_closed_form() {
        for k in [0.5, 1.0, 2.0] {
            let (def, bc) = schrodinger(k, 2.0);
            let sel = TraceSelector::parse("0:0,0:1", 2, 1).unwrap();
            let r = boundary_dissipation_coefficient(&def, &bc, &sel).unwrap();
            assert!((r.kappa - k / (1.0 + k * k)).abs() < 1e-12, "k={k}: {}", r.kappa);
        }
    }

    #[test]
    fn selector_parsing_and_display() {
        let s = TraceSelector::parse("1:0, 0:1:1,0:0", 2, 2).unwrap();
        assert_eq!(s.to_string(), "0:0,0:1:1,1:0");
        assert!(TraceSelector::parse("0:2", 2, 1).is_err());
        assert!(matches!(TraceSelector::parse("", 2, 1), Err(PhsError::EmptySelector)));
        assert!(TraceSelector::parse("0:0,0:0", 2, 1).is_err());
    }

    #[test]
    fn classification_examples() {
        let def = transport();
        let c = classify_stability(&def, &BoundaryCondition::port(from_real_rows(&[&[1.0, 1.0]])), false).unwrap();
        assert_eq!(c.classification, Classification::CertifiedExponential);
        let (def, bc) = schrodinger(1.0, 2.0);
        let c = classify_stability(&def, &bc, false).unwrap();
        assert_eq!(c.classification, Classification::CertifiedAsymptotic);
    }

    #[test]
    fn even_order_patterns_for_second_order() {
        let p = minimal_even_order_patterns(2);
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|s| s.len() == 3));
    }

    #[test]
    fn antidiagonal_detection() {
        assert!(detect_antidiagonal_structure(&transport()).is_none());
        let beam = PhsDefinition::new(
            2,
            vec![Mat::zeros(2, 2), Mat::zeros(2, 2), from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]])],
            HamiltonianDensity::diagonal(&[1.0, 1.0]).unwrap(),
        )
        .unwrap();
        let s = detect_antidiagonal_structure(&beam).unwrap();
        assert_eq!(s.p2_bar[(0, 0)], re(-1.0));
        let diag = PhsDefinition::new(2, vec![Mat::zeros(2, 2), Mat::zeros(2, 2), Mat::identity(2, 2)], HamiltonianDensity::diagonal(&[1.0, 1.0]).unwrap())
            .unwrap();
        assert!(detect_antidiagonal_structure(&diag).is_none());
    }
}
