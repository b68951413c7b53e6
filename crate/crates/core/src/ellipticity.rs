//! Ellipticity constants, distortion, and the critical exponents.
//!
//! A conductivity sigma is uniformly elliptic with constant
//! `lambda = ell(sigma)` when both `sigma xi . xi >= lambda |xi|^2` and
//! `sigma^{-1} xi . xi >= lambda |xi|^2`. Within the class of such
//! matrices the distortion K = (1+k)/(1-k) is bounded by
//! `K_lambda = (1 + sqrt(1 - lambda^2)) / lambda`, and by `1/lambda` on
//! the symmetric subclass; the bound is attained only on a two-point set
//! of antisymmetric matrices. The distortion controls the critical
//! gradient-integrability exponent `p_K = 2K/(K-1)`.

use serde::{Deserialize, Serialize};

use crate::mat2::{sym_eigenvalues, Mat2};
use crate::translate::{gh_from_sigma, sigma_to_munu};
use crate::{Error, Result};

/// Outcome of checking a conductivity against its ellipticity-class
/// distortion bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attainment {
    /// Strictly below the bound.
    No,
    /// Equals the general bound K_lambda; only the antisymmetric pair
    /// [[lambda, +-b], [-+b, lambda]] with b = sqrt(1 - lambda^2) does this.
    NonSymmetricCritical,
    /// Symmetric matrix with an ellipticity inequality holding as equality,
    /// attaining the symmetric bound 1/lambda.
    SymmetricCritical,
}

/// Full single-matrix ellipticity summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityReport {
    /// Ellipticity constant lambda = ell(sigma).
    pub lambda: f64,
    /// Dilatation gauge k = |mu| + |nu|.
    pub k: f64,
    /// Distortion K = (1+k)/(1-k), computed via the (G, H) eigenvalues.
    pub distortion: f64,
    /// Critical exponent p_K = 2K/(K-1); +infinity at K = 1.
    pub p_k: f64,
    /// Class bound K_lambda for this lambda.
    pub k_lambda: f64,
    /// Symmetric-class bound 1/lambda.
    pub k_lambda_sym: f64,
    /// Whether sigma attains its class bound.
    pub attains_bound: Attainment,
}

/// Ellipticity constant of sigma: the largest lambda satisfying both
/// quadratic-form bounds. Uses the closed form
/// `ell(sigma) = lambda_min(sigma^S) * min(1, 1/det sigma)`, which follows
/// from `(sigma^{-1})^S = adj(sigma^S) / det sigma` for 2x2 matrices.
pub fn ell(sigma: &Mat2) -> Result<f64> {
    if !sigma.is_finite() {
        return Err(Error::NotElliptic("non-finite entries".into()));
    }
    let s = sigma.sym_part();
    let (lmin, _) = sym_eigenvalues(s.a11, s.a12, s.a22);
    let det = sigma.det();
    if lmin <= 0.0 || det <= 0.0 {
        return Err(Error::NotElliptic(format!(
            "lambda_min(sigma^S) = {lmin:.6e}, det sigma = {det:.6e}"
        )));
    }
    Ok(if det >= 1.0 { lmin / det } else { lmin })
}

/// Distortion K of sigma as the product of the largest eigenvalues of its
/// G and H factors. Agrees with (1+k)/(1-k) of the dilatations.
pub fn distortion_k(sigma: &Mat2) -> Result<f64> {
    let gh = gh_from_sigma(sigma)?;
    Ok(gh.g.max_eig() * gh.h.max_eig())
}

/// Class bounds (K_lambda, K_lambda_sym) = ((1 + sqrt(1 - lambda^2)) / lambda, 1 / lambda).
pub fn k_bounds(lambda: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::DomainError(format!(
            "lambda = {lambda} must lie in (0, 1]"
        )));
    }
    let b = (1.0 - lambda * lambda).max(0.0).sqrt();
    Ok(((1.0 + b) / lambda, 1.0 / lambda))
}

/// Critical exponent p_K = 2K/(K-1), +infinity in the conformal limit K = 1.
/// Values of K below 1 (only reachable through rounding noise) are treated
/// as the limit case.
pub fn p_exponent(big_k: f64) -> f64 {
    if big_k <= 1.0 {
        f64::INFINITY
    } else {
        2.0 * big_k / (big_k - 1.0)
    }
}

/// Critical exponent on the symmetric class: p at K = 1/lambda, which
/// simplifies to 2/(1 - lambda). Mind the sign in the denominator: the
/// superficially similar 2/(1 + lambda) is below 2 and cannot be a
/// gradient-integrability exponent.
pub fn p_exponent_symmetric_bound(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::DomainError(format!(
            "lambda = {lambda} must lie in (0, 1]"
        )));
    }
    Ok(if lambda == 1.0 {
        f64::INFINITY
    } else {
        2.0 / (1.0 - lambda)
    })
}

/// Entrywise matching tolerance for the two-point critical set.
const CRITICAL_TOL: f64 = 1e-9;

/// Checks whether sigma attains the distortion bound of the ellipticity
/// class lambda. `lambda` must not exceed ell(sigma) (tolerance 1e-12).
pub fn bound_attainment(sigma: &Mat2, lambda: f64) -> Result<Attainment> {
    let actual = ell(sigma)?;
    if actual < lambda - 1e-12 {
        return Err(Error::DomainError(format!(
            "ell(sigma) = {actual:.12} is below the requested class lambda = {lambda:.12}"
        )));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::DomainError(format!(
            "lambda = {lambda} must lie in (0, 1]"
        )));
    }
    let b = (1.0 - lambda * lambda).max(0.0).sqrt();
    let plus = Mat2::new(lambda, b, -b, lambda);
    let minus = Mat2::new(lambda, -b, b, lambda);
    if sigma.max_abs_diff(&plus) <= CRITICAL_TOL || sigma.max_abs_diff(&minus) <= CRITICAL_TOL {
        return Ok(Attainment::NonSymmetricCritical);
    }
    if sigma.is_symmetric(1e-9) {
        let s = sigma.sym_part();
        let (lmin, _) = sym_eigenvalues(s.a11, s.a12, s.a22);
        let lmin_inv = lmin / sigma.det();
        if (lmin - lambda).abs() <= CRITICAL_TOL || (lmin_inv - lambda).abs() <= CRITICAL_TOL {
            return Ok(Attainment::SymmetricCritical);
        }
    }
    Ok(Attainment::No)
}

/// Assembles the full per-matrix report.
pub fn ellipticity_report(sigma: &Mat2) -> Result<EllipticityReport> {
    let lambda = ell(sigma)?;
    let k = sigma_to_munu(sigma)?.k();
    let distortion = distortion_k(sigma)?;
    let (k_lambda, k_lambda_sym) = k_bounds(lambda.min(1.0))?;
    Ok(EllipticityReport {
        lambda,
        k,
        distortion,
        p_k: p_exponent(distortion),
        k_lambda,
        k_lambda_sym,
        attains_bound: bound_attainment(sigma, lambda)?,
    })
}
