//! Edge-perspective degree-distribution polynomials.
//!
//! Everything downstream (density evolution, potentials, thresholds) reduces
//! to evaluating these polynomials, their derivatives, and their closed-form
//! antiderivatives. No numerical quadrature is used anywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent convention of a coefficient list.
///
/// The two sides of the bipartite super-graph use different maps from the
/// logical index `i` (1-based) to the exponent of `x`:
/// pattern-side coefficient `i` multiplies `x^i`, cluster-side coefficient `i`
/// multiplies `x^(i-1)`. Call sites must name the convention they assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    PatternSide,
    ClusterSide,
}

/// A normalized edge-perspective degree distribution polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePolynomial {
    coeffs: Vec<f64>,
    convention: Convention,
}

const SUM_TOL: f64 = 1e-9;
const X_SLACK: f64 = 1e-12;

impl EdgePolynomial {
    /// Strict constructor: coefficients must be nonnegative and sum to 1
    /// within 1e-9.
    pub fn new(coeffs: Vec<f64>, convention: Convention) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidDistribution("empty coefficient list".into()));
        }
        if let Some(c) = coeffs.iter().find(|c| **c < 0.0 || !c.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "coefficient {c} is negative or non-finite"
            )));
        }
        let sum: f64 = coeffs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "coefficients sum to {sum}, expected 1 within {SUM_TOL}"
            )));
        }
        Ok(Self { coeffs, convention })
    }

    /// Rescales the coefficients to sum to exactly 1 before validating.
    /// Published degree lists are often rounded to a few decimals; this keeps
    /// the stored file verbatim while the in-memory polynomial satisfies the
    /// distribution invariants.
    pub fn new_normalized(coeffs: Vec<f64>, convention: Convention) -> Result<Self> {
        let sum: f64 = coeffs.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "coefficient sum {sum} is not positive"
            )));
        }
        let scaled = coeffs.into_iter().map(|c| c / sum).collect();
        Self::new(scaled, convention)
    }

    /// Coefficient list; entry `s` is the logical coefficient of index `s+1`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Exponent of the storage entry `s` under this polynomial's convention.
    #[inline]
    fn exponent(&self, s: usize) -> u32 {
        match self.convention {
            Convention::PatternSide => (s + 1) as u32,
            Convention::ClusterSide => s as u32,
        }
    }

    /// Largest exponent carried by a nonzero coefficient.
    pub fn max_degree(&self) -> u32 {
        self.coeffs
            .iter()
            .enumerate()
            .rev()
            .find(|(_, c)| **c != 0.0)
            .map(|(s, _)| self.exponent(s))
            .unwrap_or(0)
    }

    fn check_unit(&self, name: &'static str, x: f64) -> Result<f64> {
        if !(-X_SLACK..=1.0 + X_SLACK).contains(&x) {
            return Err(Error::domain(name, x, 0.0, 1.0));
        }
        Ok(x.clamp(0.0, 1.0))
    }

    /// Evaluates the polynomial at `x` in [0, 1].
    pub fn eval(&self, x: f64) -> Result<f64> {
        let x = self.check_unit("x", x)?;
        let mut acc = 0.0;
        for (s, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                acc += c * x.powi(self.exponent(s) as i32);
            }
        }
        Ok(acc)
    }

    /// Exact symbolic derivative of the given order, as plain dense
    /// monomial coefficients.
    pub fn derivative(&self, order: u32) -> DensePoly {
        assert!(order >= 1, "derivative order must be >= 1");
        let mut p = self.to_dense();
        for _ in 0..order {
            p = p.derivative();
        }
        p
    }

    /// Closed-form integral over [0, x]: the antiderivative of `x^k` is
    /// `x^(k+1)/(k+1)`, term by term.
    pub fn antiderivative_eval(&self, x: f64) -> Result<f64> {
        let x = self.check_unit("x", x)?;
        let mut acc = 0.0;
        for (s, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                let k = self.exponent(s);
                acc += c * x.powi(k as i32 + 1) / f64::from(k + 1);
            }
        }
        Ok(acc)
    }

    /// Dense monomial view: entry `d` multiplies `x^d`.
    pub fn to_dense(&self) -> DensePoly {
        let max = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .find(|(_, c)| **c != 0.0)
            .map(|(s, _)| self.exponent(s) as usize)
            .unwrap_or(0);
        let mut dense = vec![0.0; max + 1];
        for (s, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                dense[self.exponent(s) as usize] += c;
            }
        }
        DensePoly(dense)
    }
}

/// Plain dense polynomial in the monomial basis (entry `d` multiplies `x^d`).
/// Used for derivative results; carries no distribution invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePoly(pub Vec<f64>);

impl DensePoly {
    pub fn eval(&self, x: f64) -> f64 {
        // Horner.
        self.0.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> DensePoly {
        if self.0.len() <= 1 {
            return DensePoly(vec![0.0]);
        }
        DensePoly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(d, &c)| c * d as f64)
                .collect(),
        )
    }
}

/// On-disk degree-distribution pair: `lambda` entries are logical indices
/// 1..=len (pattern side), `rho` entries 1..=len (cluster side), plus the
/// per-cluster correction capability `e`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistFile {
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub e: u32,
}

impl DistFile {
    pub fn lambda_poly(&self) -> Result<EdgePolynomial> {
        EdgePolynomial::new_normalized(self.lambda.clone(), Convention::PatternSide)
    }

    pub fn rho_poly(&self) -> Result<EdgePolynomial> {
        EdgePolynomial::new_normalized(self.rho.clone(), Convention::ClusterSide)
    }
}

/// The bundled default distribution: the 16-entry pattern-side list and a
/// cluster-side distribution concentrated at degree 64, with e = 2.
pub const DEFAULT_DIST_JSON: &str = include_str!("../data/default_dist.json");

pub fn default_dist() -> DistFile {
    serde_json::from_str(DEFAULT_DIST_JSON).expect("bundled default distribution parses")
}
