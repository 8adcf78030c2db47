//! Polynomials in the spatial variable ζ with real or complex coefficients.
//!
//! Coefficients are stored in ascending order: `c[0] + c[1] ζ + c[2] ζ² + …`.

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::linalg::ZERO;

/// Real polynomial in ζ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly {
    /// Ascending coefficients.
    pub coeffs: Vec<f64>,
}

impl Poly {
    /// Builds a polynomial from ascending coefficients.
    pub fn new(coeffs: Vec<f64>) -> Self {
        Poly { coeffs }
    }

    /// Constant polynomial.
    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![c] }
    }

    /// Degree ignoring trailing zeros (the zero polynomial has degree 0).
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// Whether every coefficient beyond the constant term vanishes.
    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    /// Horner evaluation.
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
    }

    /// First derivative.
    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly {
            coeffs: self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect(),
        }
    }
}

/// Complex polynomial in ζ.
#[derive(Debug, Clone, PartialEq)]
pub struct CPoly {
    /// Ascending coefficients.
    pub coeffs: Vec<c64>,
}

impl CPoly {
    /// Builds a polynomial from ascending coefficients.
    pub fn new(coeffs: Vec<c64>) -> Self {
        CPoly { coeffs }
    }

    /// Zero polynomial.
    pub fn zero() -> Self {
        CPoly { coeffs: vec![ZERO] }
    }

    /// Promotes a real polynomial.
    pub fn from_real(p: &Poly) -> Self {
        CPoly { coeffs: p.coeffs.iter().map(|&c| c64::new(c, 0.0)).collect() }
    }

    /// Degree ignoring trailing zeros.
    pub fn degree(&self) -> usize {
        self.coeffs.iter().rposition(|c| *c != ZERO).unwrap_or(0)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: f64) -> c64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    /// First derivative.
    pub fn derivative(&self) -> CPoly {
        if self.coeffs.len() <= 1 {
            return CPoly::zero();
        }
        CPoly {
            coeffs: self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| c * k as f64).collect(),
        }
    }

    /// k-th derivative.
    pub fn nth_derivative(&self, k: usize) -> CPoly {
        (0..k).fold(self.clone(), |p, _| p.derivative())
    }

    /// Sum of two polynomials.
    pub fn add(&self, other: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        CPoly {
            coeffs: (0..n)
                .map(|k| {
                    self.coeffs.get(k).copied().unwrap_or(ZERO)
                        + other.coeffs.get(k).copied().unwrap_or(ZERO)
                })
                .collect(),
        }
    }

    /// Scalar multiple.
    pub fn scale(&self, s: c64) -> CPoly {
        CPoly { coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    /// Product with a real polynomial.
    pub fn mul_real(&self, p: &Poly) -> CPoly {
        let mut out = vec![ZERO; self.coeffs.len() + p.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in p.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        CPoly { coeffs: out }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_eval_and_derivative() {
        let p = Poly::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(p.eval(2.0), 17.0);
        assert_eq!(p.derivative().coeffs, vec![2.0, 6.0]);
        assert_eq!(p.degree(), 2);
        assert!(Poly::new(vec![4.0, 0.0]).is_constant());
    }

    #[test]
    fn complex_product_and_sum() {
        let p = CPoly::new(vec![c64::new(0.0, 1.0), c64::new(1.0, 0.0)]);
        let q = p.mul_real(&Poly::new(vec![1.0, 1.0]));
        assert_eq!(q.eval(1.0), c64::new(2.0, 2.0));
        let s = p.add(&CPoly::new(vec![c64::new(1.0, 0.0)]));
        assert_eq!(s.eval(0.0), c64::new(1.0, 1.0));
        assert_eq!(p.nth_derivative(2).eval(0.3), ZERO);
    }
}
