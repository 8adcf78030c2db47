//! Canonical models: transport, wave, Schrödinger, Euler-Bernoulli beams and a
//! tip-mass beam with a strictly input passive controller. Also provides the
//! closed-form Schrödinger resolvent applied to the constant function.

use std::collections::BTreeMap;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{PhsError, Result};
use crate::hybrid::{Controller, IoSplit};
use crate::linalg::{self, re, I, ONE, ZERO};
use crate::model::{self, BoundaryCondition, HamiltonianDensity, PhsDefinition};
use crate::poly::Poly;

/// Preset names accepted by [`PresetId::from_name`].
pub const PRESET_NAMES: [&str; 5] = ["transport", "wave", "schrodinger", "eb-clamped-left", "eb-free-free-tipmass"];

/// Parameter value: a scalar or a coefficient list in `ζ` (ascending powers).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    /// Constant.
    Scalar(f64),
    /// Polynomial coefficients.
    Poly(Vec<f64>),
}

/// Named preset with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PresetId {
    /// `∂t x = ∂ζ x` with `x(1) = 0` written as `f∂ + e∂ = 0`.
    Transport,
    /// String with fixed left end and a damper `γ` at the right end.
    Wave {
        /// Mass density.
        rho: f64,
        /// Tension.
        tension: f64,
        /// Damper gain at `ζ = 1`.
        gamma: f64,
    },
    /// `∂t x = i ∂ζ² x` with `x'(0) = −ik x(0)` and `x'(1) = α x(1)`.
    Schrodinger {
        /// Dissipation gain at `ζ = 0`.
        k: f64,
        /// Conservative coupling at `ζ = 1`.
        alpha: f64,
    },
    /// Euler-Bernoulli beam clamped at `ζ = 0` with static feedback at `ζ = 1`.
    EbClampedLeft {
        /// Shear-force feedback gain.
        alpha1: f64,
        /// Bending-moment feedback gain.
        alpha2: f64,
        /// Entry `1/ρ` of the energy density.
        inv_rho: Poly,
        /// Flexural rigidity `EI`.
        ei: Poly,
    },
    /// Euler-Bernoulli beam with both ends free and a controller acting at `ζ = 0`.
    EbFreeFreeTipmass {
        /// Controller gains `k1..k4`.
        k: [f64; 4],
        /// Entry `1/ρ` of the energy density.
        inv_rho: Poly,
        /// Flexural rigidity `EI`.
        ei: Poly,
    },
}

fn scalar(params: &BTreeMap<String, ParamValue>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(ParamValue::Scalar(v)) if v.is_finite() => Ok(*v),
        Some(_) => Err(PhsError::BadParameter(format!("parameter '{key}' must be a finite number"))),
    }
}

fn poly_param(params: &BTreeMap<String, ParamValue>, key: &str) -> Result<Option<Poly>> {
    match params.get(key) {
        None => Ok(None),
        Some(ParamValue::Scalar(v)) => Ok(Some(Poly::constant(*v))),
        Some(ParamValue::Poly(c)) if !c.is_empty() && c.iter().all(|v| v.is_finite()) => Ok(Some(Poly::new(c.clone()))),
        Some(_) => Err(PhsError::BadParameter(format!("parameter '{key}' must be a number or a nonempty coefficient list"))),
    }
}

fn beam_densities(params: &BTreeMap<String, ParamValue>) -> Result<(Poly, Poly)> {
    let rho = scalar(params, "rho", 1.0)?;
    if !(rho > 0.0) {
        return Err(PhsError::BadParameter(format!("rho must be positive, got {rho}")));
    }
    let inv_rho = poly_param(params, "inv_rho")?.unwrap_or_else(|| Poly::constant(1.0 / rho));
    let ei = poly_param(params, "EI")?.unwrap_or_else(|| Poly::constant(1.0));
    Ok((inv_rho, ei))
}

fn allowed(params: &BTreeMap<String, ParamValue>, keys: &[&str]) -> Result<()> {
    match params.keys().find(|k| !keys.contains(&k.as_str())) {
        Some(k) => Err(PhsError::BadParameter(format!("unknown parameter '{k}'"))),
        None => Ok(()),
    }
}

impl PresetId {
    /// Parses a preset name and its parameters, applying defaults (`ρ = EI = 1`, `k = 1`).
    pub fn from_name(name: &str, params: &BTreeMap<String, ParamValue>) -> Result<Self> {
        let id = match name {
            "transport" => {
                allowed(params, &[])?;
                PresetId::Transport
            }
            "wave" => {
                allowed(params, &["rho", "tension", "gamma"])?;
                PresetId::Wave {
                    rho: scalar(params, "rho", 1.0)?,
                    tension: scalar(params, "tension", 1.0)?,
                    gamma: scalar(params, "gamma", 0.5)?,
                }
            }
            "schrodinger" => {
                allowed(params, &["k", "alpha"])?;
                PresetId::Schrodinger { k: scalar(params, "k", 1.0)?, alpha: scalar(params, "alpha", 0.0)? }
            }
            "eb-clamped-left" => {
                allowed(params, &["alpha1", "alpha2", "rho", "inv_rho", "EI"])?;
                let (inv_rho, ei) = beam_densities(params)?;
                PresetId::EbClampedLeft { alpha1: scalar(params, "alpha1", 0.0)?, alpha2: scalar(params, "alpha2", 0.0)?, inv_rho, ei }
            }
            "eb-free-free-tipmass" => {
                allowed(params, &["k1", "k2", "k3", "k4", "rho", "inv_rho", "EI"])?;
                let (inv_rho, ei) = beam_densities(params)?;
                let k = [scalar(params, "k1", 1.0)?, scalar(params, "k2", 1.0)?, scalar(params, "k3", 1.0)?, scalar(params, "k4", 1.0)?];
                PresetId::EbFreeFreeTipmass { k, inv_rho, ei }
            }
            other => return Err(PhsError::UnknownPreset(other.to_string())),
        };
        id.check()?;
        Ok(id)
    }

    /// Canonical preset name.
    pub fn name(&self) -> &'static str {
        match self {
            PresetId::Transport => "transport",
            PresetId::Wave { .. } => "wave",
            PresetId::Schrodinger { .. } => "schrodinger",
            PresetId::EbClampedLeft { .. } => "eb-clamped-left",
            PresetId::EbFreeFreeTipmass { .. } => "eb-free-free-tipmass",
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(PhsError::BadParameter(m));
        match self {
            PresetId::Transport => Ok(()),
            PresetId::Wave { rho, tension, gamma } => {
                if !(*rho > 0.0 && *tension > 0.0) {
                    return bad("wave: rho and tension must be positive".into());
                }
                if *gamma < 0.0 {
                    return bad(format!("wave: gamma must be nonnegative, got {gamma}"));
                }
                Ok(())
            }
            PresetId::Schrodinger { k, .. } => {
                if !(*k > 0.0) {
                    return bad(format!("schrodinger: k must be positive, got {k}"));
                }
                Ok(())
            }
            PresetId::EbClampedLeft { alpha1, alpha2, .. } => {
                if *alpha1 < 0.0 || *alpha2 < 0.0 {
                    return bad("eb-clamped-left: alpha1 and alpha2 must be nonnegative".into());
                }
                Ok(())
            }
            PresetId::EbFreeFreeTipmass { k, .. } => {
                if k.iter().any(|v| !(*v > 0.0)) {
                    return bad("eb-free-free-tipmass: k1..k4 must be positive".into());
                }
                Ok(())
            }
        }
    }
}

/// Assembled preset.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetModel {
    /// Preset identifier.
    pub id: PresetId,
    /// Distributed model.
    pub def: PhsDefinition,
    /// Static boundary condition.
    pub bc: BoundaryCondition,
    /// Input/output split and controller for hybrid presets.
    pub hybrid: Option<(IoSplit, Controller)>,
    /// Remarks on the preset.
    pub notes: Vec<String>,
}

fn beam_definition(inv_rho: &Poly, ei: &Poly) -> Result<PhsDefinition> {
    let zero = Poly::constant(0.0);
    let h = HamiltonianDensity::new(vec![vec![inv_rho.clone(), zero.clone()], vec![zero, ei.clone()]])?;
    PhsDefinition::new(2, vec![Mat::zeros(2, 2), Mat::zeros(2, 2), linalg::from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]])], h)
}

/// Row with the given trace-index entries.
fn trace_row(len: usize, entries: &[(usize, c64)]) -> Vec<c64> {
    let mut r = vec![ZERO; len];
    for &(i, v) in entries {
        r[i] += v;
    }
    r
}

fn rows_to_mat(rows: Vec<Vec<c64>>, cols: usize) -> Mat<c64> {
    if rows.is_empty() {
        Mat::zeros(0, cols)
    } else {
        linalg::from_rows(&rows)
    }
}

/// Builds a preset.
pub fn preset_model(id: &PresetId) -> Result<PresetModel> {
    id.check()?;
    let mut notes = Vec::new();
    let (def, bc, hybrid) = match id {
        PresetId::Transport => {
            let def = PhsDefinition::new(1, vec![Mat::zeros(1, 1), linalg::from_real_rows(&[&[1.0]])], HamiltonianDensity::constant(&[&[1.0]])?)?;
            (def, BoundaryCondition::port(linalg::from_real_rows(&[&[1.0, 1.0]])), None)
        }
        PresetId::Wave { rho, tension, gamma } => {
            let def = PhsDefinition::new(
                1,
                vec![Mat::zeros(2, 2), linalg::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])],
                HamiltonianDensity::diagonal(&[1.0 / rho, *tension])?,
            )?;
            let t = |e, c| model::trace_index(1, 2, e, 0, c);
            let bc = BoundaryCondition::trace(linalg::from_rows(&[
                trace_row(4, &[(t(0, 0), ONE)]),
                trace_row(4, &[(t(1, 1), ONE), (t(1, 0), re(*gamma))]),
            ]));
            (def, bc, None)
        }
        PresetId::Schrodinger { k, alpha } => {
            let def = PhsDefinition::new(2, vec![Mat::zeros(1, 1), Mat::zeros(1, 1), linalg::col(&[I])], HamiltonianDensity::constant(&[&[1.0]])?)?;
            let t = |e, o| model::trace_index(2, 1, e, o, 0);
            let bc = BoundaryCondition::trace(linalg::from_rows(&[
                trace_row(4, &[(t(0, 0), c64::new(0.0, *k)), (t(0, 1), ONE)]),
                trace_row(4, &[(t(1, 0), re(-alpha)), (t(1, 1), ONE)]),
            ]));
            (def, bc, None)
        }
        PresetId::EbClampedLeft { alpha1, alpha2, inv_rho, ei } => {
            let def = beam_definition(inv_rho, ei)?;
            let t = |e, o, c| model::trace_index(2, 2, e, o, c);
            let bc = BoundaryCondition::trace(linalg::from_rows(&[
                trace_row(8, &[(t(0, 0, 0), ONE)]),
                trace_row(8, &[(t(0, 1, 0), ONE)]),
                trace_row(8, &[(t(1, 1, 1), ONE), (t(1, 0, 0), re(-alpha1))]),
                trace_row(8, &[(t(1, 0, 1), ONE), (t(1, 1, 0), re(*alpha2))]),
            ]));
            if *alpha1 == 0.0 && *alpha2 > 0.0 {
                notes.push("alpha1 = 0 with alpha2 > 0 is outside the certified cases; results are diagnostic".into());
            }
            (def, bc, None)
        }
        PresetId::EbFreeFreeTipmass { k, inv_rho, ei } => {
            let def = beam_definition(inv_rho, ei)?;
            let pm = model::build_port_map(&def)?;
            let t = |e, o, c| model::trace_index(2, 2, e, o, c);
            let w1 = rows_to_mat(vec![trace_row(8, &[(t(0, 1, 0), ONE)]), trace_row(8, &[(t(0, 0, 0), ONE)])], 8);
            let wt1 = rows_to_mat(vec![trace_row(8, &[(t(0, 0, 1), re(-1.0))]), trace_row(8, &[(t(0, 1, 1), ONE)])], 8);
            let w2 = rows_to_mat(vec![trace_row(8, &[(t(1, 0, 1), ONE)]), trace_row(8, &[(t(1, 1, 1), ONE)])], 8);
            let wt2 = rows_to_mat(vec![trace_row(8, &[(t(1, 1, 0), ONE)]), trace_row(8, &[(t(1, 0, 0), re(-1.0))])], 8);
            let io = IoSplit::from_trace(&pm, &w1, &w2, &wt1, &wt2);
            let diag = |a: f64, b: f64| linalg::from_real_rows(&[&[a, 0.0], &[0.0, b]]);
            let q_c = diag(k[0], k[2]);
            let r_c = diag(1.0 / k[1], 1.0 / k[3]);
            let ctrl = Controller::sip(Mat::zeros(2, 2), r_c.clone(), q_c.clone(), r_c, q_c, k[0].min(k[2]))?;
            let bc = BoundaryCondition::port(io.w());
            notes.push("input u1 = ((H1x1)'(0), (H1x1)(0)) with output y1 = (-(H2x2)(0), (H2x2)'(0))".into());
            (def, bc, Some((io, ctrl)))
        }
    };
    Ok(PresetModel { id: id.clone(), def, bc, hybrid, notes })
}

/// Modulus below which (relative to its scale) the oracle's boundary system counts as singular.
pub const ORACLE_SINGULAR_TOL: f64 = 1e-12;

/// Values of `x = (iβ − A)^{−1} 𝟙` for the Schrödinger preset at the given nodes.
pub fn schrodinger_resolvent_oracle(beta: f64, k: f64, alpha: f64, nodes: &[f64]) -> Result<Vec<c64>> {
    let c = SchrodingerResolvent::new(beta, k, alpha)?;
    Ok(nodes.iter().map(|&z| c.value(z)).collect())
}

/// Closed-form resolvent `x(ζ) = −i/β + A e^{−sζ} + B e^{−s(1−ζ)}` with `s = √β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchrodingerResolvent {
    /// Frequency `β`.
    pub beta: f64,
    s: f64,
    a: c64,
    b: c64,
}

impl SchrodingerResolvent {
    /// Solves the two boundary conditions for the coefficients of the decaying exponentials.
    pub fn new(beta: f64, k: f64, alpha: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(PhsError::BadParameter(format!("beta must be positive, got {beta}")));
        }
        let s = beta.sqrt();
        let e = (-s).exp();
        let ik = c64::new(0.0, k);
        // x'(0) + ik x(0) = 0 and x'(1) − α x(1) = 0 with x_p = −i/β.
        let m11 = ik - s;
        let m12 = (ik + s) * e;
        let m21 = re(-(s + alpha) * e);
        let m22 = re(s - alpha);
        let r1 = re(-k / beta);
        let r2 = c64::new(0.0, -alpha / beta);
        let det = m11 * m22 - m12 * m21;
        let scale = (m11.norm() * m22.norm()).max(m12.norm() * m21.norm()).max(f64::MIN_POSITIVE);
        if det.norm() <= ORACLE_SINGULAR_TOL * scale {
            return Err(PhsError::NearSingularDenominator { modulus: det.norm() / scale });
        }
        let a = (r1 * m22 - m12 * r2) / det;
        let b = (m11 * r2 - m21 * r1) / det;
        Ok(SchrodingerResolvent { beta, s, a, b })
    }

    /// `x(ζ)`.
    pub fn value(&self, z: f64) -> c64 {
        c64::new(0.0, -1.0 / self.beta) + self.a * (-self.s * z).exp() + self.b * (-self.s * (1.0 - z)).exp()
    }

    /// `x'(ζ)`.
    pub fn derivative(&self, z: f64) -> c64 {
        self.a * (-self.s * (-self.s * z).exp()) + self.b * (self.s * (-self.s * (1.0 - z)).exp())
    }

    /// `β^{3/2} e^{−√β ζ} x(ζ)` computed without overflow.
    pub fn scaled_value(&self, z: f64) -> c64 {
        let lb = self.beta.ln();
        let w = |c: c64, expo: f64| if c == ZERO { ZERO } else { c * (1.5 * lb + expo).exp() };
        w(c64::new(0.0, -1.0 / self.beta), -self.s * z) + w(self.a, -2.0 * self.s * z) + w(self.b, -self.s)
    }
}

/// Limit `2k + i(1 − α)` of the scaled resolvent value.
pub fn schrodinger_limit_value(k: f64, alpha: f64) -> c64 {
    c64::new(2.0 * k, 1.0 - alpha)
}

/// Row of the high-frequency table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    /// Frequency.
    pub beta: f64,
    /// Real part of `β^{3/2} e^{−√β ζ} x(ζ)`.
    pub re: f64,
    /// Imaginary part.
    pub im: f64,
    /// Relative distance to the limit value.
    pub rel_error: f64,
}

/// High-frequency table with the limit value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitTable {
    /// Evaluation point.
    pub zeta: f64,
    /// Real part of `2k + i(1 − α)`.
    pub limit_re: f64,
    /// Imaginary part of `2k + i(1 − α)`.
    pub limit_im: f64,
    /// One row per frequency.
    pub rows: Vec<LimitRow>,
    /// Whether the relative error decreases monotonically along the list.
    pub monotone: bool,
}

/// Tabulates `β^{3/2} e^{−√β ζ} x(ζ)` against `2k + i(1 − α)`.
pub fn schrodinger_highfreq_limit(k: f64, alpha: f64, betas: &[f64], zeta: f64) -> Result<LimitTable> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(PhsError::BadParameter(format!("zeta must lie in (0, 1), got {zeta}")));
    }
    let lim = schrodinger_limit_value(k, alpha);
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let v = SchrodingerResolvent::new(beta, k, alpha)?.scaled_value(zeta);
        rows.push(LimitRow { beta, re: v.re, im: v.im, rel_error: (v - lim).norm() / lim.norm() });
    }
    let monotone = rows.windows(2).all(|w| w[1].rel_error <= w[0].rel_error);
    Ok(LimitTable { zeta, limit_re: lim.re, limit_im: lim.im, rows, monotone })
}

/// `L²(0,1)` norm of the oracle by composite Gauss-Legendre quadrature graded toward both ends.
pub fn schrodinger_resolvent_norm(beta: f64, k: f64, alpha: f64) -> Result<f64> {
    let c = SchrodingerResolvent::new(beta, k, alpha)?;
    let (nodes, weights) = crate::quadrature::composite_gauss(24, 16, 0.5);
    Ok(nodes.iter().zip(&weights).map(|(&z, w)| c.value(z).norm_sqr() * w).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wellposed::{self, Verdict};

    fn none() -> BTreeMap<String, ParamValue> {
        BTreeMap::new()
    }

    #[test]
    fn transport_preset() {
        let p = preset_model(&PresetId::from_name("transport", &none()).unwrap()).unwrap();
        assert_eq!((p.def.n, p.def.d), (1, 1));
        assert_eq!(p.bc.matrix, linalg::from_real_rows(&[&[1.0, 1.0]]));
    }

    #[test]
    fn unknown_and_bad_parameters() {
        assert!(matches!(PresetId::from_name("timoshenko", &none()), Err(PhsError::UnknownPreset(_))));
        let mut p = none();
        p.insert("k".into(), ParamValue::Scalar(-1.0));
        assert!(matches!(PresetId::from_name("schrodinger", &p), Err(PhsError::BadParameter(_))));
    }

    #[test]
    fn all_presets_generate_contractions() {
        for name in PRESET_NAMES {
            let p = preset_model(&PresetId::from_name(name, &none()).unwrap()).unwrap();
            assert_eq!(wellposed::check_generation(&p.def, &p.bc).unwrap().verdict, Verdict::Contraction, "{name}");
        }
    }

    #[test]
    fn tipmass_controller_is_minus_identity() {
        let p = preset_model(&PresetId::from_name("eb-free-free-tipmass", &none()).unwrap()).unwrap();
        let (_, ctrl) = p.hybrid.unwrap();
        assert_eq!(ctrl.a_c, linalg::from_real_rows(&[&[-1.0, 0.0], &[0.0, -1.0]]));
    }

    #[test]
    fn oracle_solves_the_resolvent_problem() {
        let c = SchrodingerResolvent::new(10.0, 1.0, 2.0).unwrap();
        assert!((c.derivative(0.0) + c64::new(0.0, 1.0) * c.value(0.0)).norm() < 1e-12);
        assert!((c.derivative(1.0) - c.value(1.0) * 2.0).norm() < 1e-12);
        let h = 1e-3;
        for z in [0.2, 0.5, 0.8] {
            let xpp = (c.value(z + h) - c.value(z) * 2.0 + c.value(z - h)) / (h * h);
            let res = c.value(z) * c64::new(0.0, 10.0) - I * xpp - ONE;
            assert!(res.norm() < 1e-5);
        }
    }

    #[test]
    fn oracle_matches_hyperbolic_form_at_small_beta() {
        // x = −i/β + C cosh(sζ) + D sinh(sζ) solved independently.
        let (beta, k, alpha) = (4.0f64, 1.5f64, 0.7f64);
        let s = beta.sqrt();
        let ik = c64::new(0.0, k);
        let m = linalg::from_rows(&[
            vec![ik, re(s)],
            vec![re(s * s.sinh() - alpha * s.cosh()), re(s * s.cosh() - alpha * s.sinh())],
        ]);
        let rhs = linalg::col(&[re(-k / beta), c64::new(0.0, -alpha / beta)]);
        let cd = linalg::solve(&m, &rhs);
        let c = SchrodingerResolvent::new(beta, k, alpha).unwrap();
        for z in [0.0, 0.3, 0.9, 1.0] {
            let hy = c64::new(0.0, -1.0 / beta) + cd[(0, 0)] * (s * z).cosh() + cd[(1, 0)] * (s * z).sinh();
            assert!((hy - c.value(z)).norm() < 1e-13);
        }
    }

    #[test]
    fn limit_values() {
        assert_eq!(schrodinger_limit_value(1.0, 2.0), c64::new(2.0, -1.0));
        assert_eq!(schrodinger_limit_value(2.0, 1.0), c64::new(4.0, 0.0));
        assert_eq!(schrodinger_limit_value(1.0, 1.0), c64::new(2.0, 0.0));
        let v = SchrodingerResolvent::new(1e6, 1.0, 2.0).unwrap().scaled_value(0.5);
        assert!(v.re.is_finite() && v.im.is_finite());
    }
}
