//! Discrete spectrum location and resolvent-norm scans along the imaginary axis.
//!
//! These are matrix-level surrogates: they describe the discretized generator,
//! not the infinite-dimensional operator.

use faer::{c64, Mat};

use crate::discretize::DiscreteOperator;
use crate::error::{PhsError, Result};
use crate::linalg::{self, re};

/// Relative threshold below which `iω` counts as an eigenvalue.
pub const ON_SPECTRUM_TOL: f64 = 1e-12;
/// Default growth factor between the top and bottom frequency decades.
pub const DEFAULT_GROWTH_FACTOR: f64 = 3.0;
/// Lowest sampled frequency of a scan.
pub const SCAN_OMEGA_MIN: f64 = 0.1;

/// Eigenvalues of a discrete generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Eigenvalues sorted by decreasing real part, then increasing imaginary part.
    pub eigenvalues: Vec<c64>,
    /// Largest real part.
    pub spectral_abscissa: f64,
    /// Eigenvalues with `|Re λ| ≤ tol_axis`.
    pub imaginary_axis_candidates: Vec<c64>,
    /// Tolerance used for the axis test.
    pub tol_axis: f64,
    /// Collocation degree, if any.
    pub grid_n: Option<usize>,
}

fn sort_spectrum(v: &mut [c64]) {
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
}

/// Dense eigenvalue solve of the reduced generator.
pub fn compute_spectrum(op: &DiscreteOperator, tol_axis: f64) -> Result<SpectrumReport> {
    let mut eigenvalues = linalg::eigvals(&op.a_h)?;
    if eigenvalues.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(PhsError::EigenSolverFailure("non-finite eigenvalue".into()));
    }
    sort_spectrum(&mut eigenvalues);
    let spectral_abscissa = eigenvalues.first().map(|z| z.re).unwrap_or(f64::NEG_INFINITY);
    let imaginary_axis_candidates = eigenvalues.iter().copied().filter(|z| z.re.abs() <= tol_axis).collect();
    Ok(SpectrumReport {
        eigenvalues,
        spectral_abscissa,
        imaginary_axis_candidates,
        tol_axis,
        grid_n: op.grid.as_ref().map(|g| g.n),
    })
}

/// Eigenvalues with `|Re λ| ≤ tol_axis`.
pub fn imaginary_axis_eigens(op: &DiscreteOperator, tol_axis: f64) -> Result<Vec<c64>> {
    Ok(compute_spectrum(op, tol_axis)?.imaginary_axis_candidates)
}

/// Generator transformed to the Euclidean frame of the energy inner product.
#[derive(Debug, Clone)]
pub struct ResolventContext {
    b: Mat<c64>,
}

impl ResolventContext {
    /// Precomputes `M_h^{1/2} A_h M_h^{−1/2}`.
    pub fn new(op: &DiscreteOperator) -> Result<Self> {
        let ms = linalg::herm_fn(&op.m_h, |x| x.max(0.0).sqrt())?;
        let mis = linalg::herm_fn(&op.m_h, |x| 1.0 / x.max(f64::MIN_POSITIVE).sqrt())?;
        Ok(ResolventContext { b: &ms * &op.a_h * &mis })
    }

    /// `‖(iω − A_h)^{−1}‖` in the `M_h` norm.
    pub fn norm(&self, omega: f64) -> Result<f64> {
        let n = self.b.nrows();
        let shifted = Mat::from_fn(n, n, |i, j| {
            let diag = if i == j { c64::new(0.0, omega) } else { re(0.0) };
            diag - self.b[(i, j)]
        });
        let s = linalg::singular_values(&shifted)?;
        let smax = s.first().copied().unwrap_or(0.0);
        let smin = s.last().copied().unwrap_or(0.0);
        if smin <= ON_SPECTRUM_TOL * smax.max(1.0) {
            return Err(PhsError::OnSpectrum { omega });
        }
        Ok(1.0 / smin)
    }
}

/// `‖(iω − A_h)^{−1}‖` in the `M_h`-weighted operator norm.
pub fn resolvent_norm(op: &DiscreteOperator, omega: f64) -> Result<f64> {
    ResolventContext::new(op)?.norm(omega)
}

/// Settings of a resolvent scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Growth is flagged when the top-decade supremum exceeds this multiple of the bottom-decade one.
    pub growth_factor: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { growth_factor: DEFAULT_GROWTH_FACTOR }
    }
}

/// Sampled resolvent norms along the imaginary axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSweep {
    /// Sampled frequencies in ascending order.
    pub omegas: Vec<f64>,
    /// Norms; `+∞` marks samples on the discrete spectrum.
    pub norms: Vec<f64>,
    /// Whether each sample lies inside the trust region.
    pub trusted: Vec<bool>,
    /// Maximum over trusted finite samples.
    pub sup_estimate: f64,
    /// Frequency bound beyond which the grid does not resolve the operator.
    pub trust_limit: f64,
    /// Whether the top decade dominates the bottom decade by the growth factor.
    pub growth_flag: bool,
    /// Supremum over the bottom decade `[0.1, 1]`.
    pub bottom_decade_sup: f64,
    /// Supremum over the top trusted decade.
    pub top_decade_sup: f64,
    /// Set when the discrete spectral abscissa is not negative.
    pub diagnostic_only: bool,
}

/// Trust limit `(n/4)²` for collocation degree `n`.
pub fn trust_limit(op: &DiscreteOperator) -> f64 {
    op.grid.as_ref().map(|g| (g.n as f64 / 4.0).powi(2)).unwrap_or(f64::INFINITY)
}

/// Logarithmically spaced frequencies in `[0.1, ω_max]` with their reflections, ascending.
pub fn scan_frequencies(omega_max: f64, n_samples: usize) -> Vec<f64> {
    let n = n_samples.max(2);
    let (a, b) = (SCAN_OMEGA_MIN.ln(), omega_max.max(SCAN_OMEGA_MIN * 1.0001).ln());
    let pos: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    pos.iter().rev().map(|w| -w).chain(pos.iter().copied()).collect()
}

/// Whether `high ≥ factor · low`, the decade growth criterion.
pub fn growth_flag(low_sup: f64, high_sup: f64, factor: f64) -> bool {
    high_sup > factor * low_sup
}

/// Resolvent scan over `±[0.1, ω_max]`.
pub fn gearhart_scan(op: &DiscreteOperator, omega_max: f64, n_samples: usize, opts: ScanOptions) -> Result<ResolventSweep> {
    let ctx = ResolventContext::new(op)?;
    let spectrum_report = compute_spectrum(op, 0.0)?;
    let limit = trust_limit(op);
    let omegas = scan_frequencies(omega_max, n_samples);
    let mut norms = Vec::with_capacity(omegas.len());
    for &w in &omegas {
        match ctx.norm(w) {
            Ok(v) => norms.push(v),
            Err(PhsError::OnSpectrum { .. }) => norms.push(f64::INFINITY),
            Err(e) => return Err(e),
        }
    }
    let trusted: Vec<bool> = omegas.iter().map(|w| w.abs() <= limit).collect();
    let top = omega_max.min(limit);
    let sup_over = |lo: f64, hi: f64| {
        omegas
            .iter()
            .zip(&norms)
            .zip(&trusted)
            .filter(|((w, n), &t)| t && n.is_finite() && w.abs() >= lo * (1.0 - 1e-12) && w.abs() <= hi * (1.0 + 1e-12))
            .map(|((_, n), _)| *n)
            .fold(0.0f64, f64::max)
    };
    let sup_estimate = sup_over(0.0, f64::INFINITY);
    let bottom = sup_over(SCAN_OMEGA_MIN, 1.0);
    let top_sup = sup_over(top / 10.0, top);
    Ok(ResolventSweep {
        omegas,
        sup_estimate,
        trust_limit: limit,
        growth_flag: growth_flag(bottom, top_sup, opts.growth_factor),
        bottom_decade_sup: bottom,
        top_decade_sup: top_sup,
        diagnostic_only: !(spectrum_report.spectral_abscissa < 0.0),
        norms,
        trusted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, I};

    fn rotation() -> DiscreteOperator {
        DiscreteOperator::from_matrices(from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]]), Mat::identity(2, 2))
    }

    #[test]
    fn diagonal_spectrum() {
        let op = DiscreteOperator::from_matrices(from_real_rows(&[&[-1.0, 0.0], &[0.0, -2.0]]), Mat::identity(2, 2));
        let s = compute_spectrum(&op, 1e-8).unwrap();
        assert!((s.spectral_abscissa + 1.0).abs() < 1e-14);
        assert!(s.imaginary_axis_candidates.is_empty());
        assert_eq!(s.eigenvalues.len(), 2);
    }

    #[test]
    fn rotation_has_two_axis_eigenvalues() {
        let s = compute_spectrum(&rotation(), 1e-8).unwrap();
        assert_eq!(s.imaginary_axis_candidates.len(), 2);
        assert!((s.imaginary_axis_candidates[0] + I).norm() < 1e-14);
        assert_eq!(imaginary_axis_eigens(&rotation(), 1e-8).unwrap().len(), 2);
    }

    #[test]
    fn resolvent_examples() {
        let neg = DiscreteOperator::from_matrices(from_real_rows(&[&[-1.0]]), Mat::identity(1, 1));
        assert!((resolvent_norm(&neg, 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((resolvent_norm(&rotation(), 0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(resolvent_norm(&rotation(), 1.0), Err(PhsError::OnSpectrum { .. })));
    }

    #[test]
    fn scan_of_negative_identity() {
        let op = DiscreteOperator::from_matrices(linalg::scale(&Mat::identity(3, 3), re(-1.0)), Mat::identity(3, 3));
        let s = gearhart_scan(&op, 100.0, 50, ScanOptions::default()).unwrap();
        for (w, n) in s.omegas.iter().zip(&s.norms) {
            assert!((n - 1.0 / (1.0 + w * w).sqrt()).abs() < 1e-12);
        }
        assert!((s.sup_estimate - 1.0 / 1.01f64.sqrt()).abs() < 1e-12);
        assert!(!s.growth_flag);
        assert!(!s.diagnostic_only);
        assert!(s.omegas.windows(2).all(|p| p[0] < p[1]));
    }
}
