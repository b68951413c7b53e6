//! Conversions among the three equivalent descriptions of a planar
//! conductivity: the matrix sigma, the complex dilatations (mu, nu) of the
//! Beltrami equation, and the (G, H) pair of symmetric determinant-one
//! matrices satisfying `Df^T H Df = G det Df`.
//!
//! All six conversion arrows are implemented directly from the closed
//! forms, so every round trip can be tested as an identity. Complex
//! numbers are plain (re, im) pairs; nothing here needs more than
//! absolute values and a few products.

use serde::{Deserialize, Serialize};

use crate::mat2::{Mat2, SpdMat2, Vec2};
use crate::{Error, Result};

/// Absolute floor applied to every denominator before dividing.
const DENOM_GUARD: f64 = 1e-14;

/// Minimal complex scalar; only what the dilatation formulas use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl Cx {
    pub const ZERO: Cx = Cx { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Cx {
        Cx { re, im }
    }

    pub fn abs(self) -> f64 {
        f64::hypot(self.re, self.im)
    }

    pub fn norm_sq(self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// |1 + z|^2, written out to avoid an intermediate allocation of 1 + z.
fn abs_sq_one_plus(z: Cx) -> f64 {
    (1.0 + z.re) * (1.0 + z.re) + z.im * z.im
}

/// |1 - z|^2.
fn abs_sq_one_minus(z: Cx) -> f64 {
    (1.0 - z.re) * (1.0 - z.re) + z.im * z.im
}

/// Complex dilatations (mu, nu) with the ellipticity gauge
/// k = |mu| + |nu| < 1. The associated distortion is K = (1+k)/(1-k).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeltramiPair {
    pub mu: Cx,
    pub nu: Cx,
}

impl BeltramiPair {
    pub fn new(mu: Cx, nu: Cx) -> Result<BeltramiPair> {
        let k = mu.abs() + nu.abs();
        if !(k < 1.0) {
            return Err(Error::NotElliptic(format!(
                "|mu| + |nu| = {k:.6} must be < 1"
            )));
        }
        Ok(BeltramiPair { mu, nu })
    }

    /// The ellipticity gauge k = |mu| + |nu|.
    pub fn k(&self) -> f64 {
        self.mu.abs() + self.nu.abs()
    }

    /// Distortion K = (1 + k) / (1 - k).
    pub fn distortion(&self) -> f64 {
        let k = self.k();
        (1.0 + k) / (1.0 - k)
    }
}

/// A (G, H) pair: both symmetric positive definite with determinant one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GHPair {
    pub g: SpdMat2,
    pub h: SpdMat2,
}

impl GHPair {
    pub const DET_TOL: f64 = 1e-10;

    pub fn new(g: Mat2, h: Mat2) -> Result<GHPair> {
        let g = SpdMat2::new(g)?;
        let h = SpdMat2::new(h)?;
        for (name, m) in [("G", &g), ("H", &h)] {
            let det = m.mat().det();
            if (det - 1.0).abs() > Self::DET_TOL {
                return Err(Error::DomainError(format!(
                    "det {name} = {det:.12} must equal 1 within {:.0e}",
                    Self::DET_TOL
                )));
            }
        }
        Ok(GHPair { g, h })
    }
}

/// Complex dilatations of sigma:
/// mu = (s22 - s11 - i (s12 + s21)) / (1 + tr sigma + det sigma),
/// nu = (1 - det sigma + i (s12 - s21)) / (1 + tr sigma + det sigma).
pub fn sigma_to_munu(sigma: &Mat2) -> Result<BeltramiPair> {
    let denom = 1.0 + sigma.trace() + sigma.det();
    if denom <= DENOM_GUARD {
        return Err(Error::NotElliptic(format!(
            "1 + tr + det = {denom:.6e} is not positive"
        )));
    }
    let mu = Cx::new(
        (sigma.a22 - sigma.a11) / denom,
        -(sigma.a12 + sigma.a21) / denom,
    );
    let nu = Cx::new(
        (1.0 - sigma.det()) / denom,
        (sigma.a12 - sigma.a21) / denom,
    );
    BeltramiPair::new(mu, nu)
}

/// Inverse of [`sigma_to_munu`]:
/// sigma = (1/D) [[|1-mu|^2 - |nu|^2, 2 Im(nu - mu)],
///                [-2 Im(nu + mu),    |1+mu|^2 - |nu|^2]]
/// with D = |1+nu|^2 - |mu|^2.
pub fn munu_to_sigma(p: &BeltramiPair) -> Result<Mat2> {
    let d = abs_sq_one_plus(p.nu) - p.mu.norm_sq();
    if d <= DENOM_GUARD {
        return Err(Error::NotElliptic(format!(
            "|1+nu|^2 - |mu|^2 = {d:.6e} is not positive"
        )));
    }
    let nsq = p.nu.norm_sq();
    Ok(Mat2::new(
        (abs_sq_one_minus(p.mu) - nsq) / d,
        2.0 * (p.nu.im - p.mu.im) / d,
        -2.0 * (p.nu.im + p.mu.im) / d,
        (abs_sq_one_plus(p.mu) - nsq) / d,
    ))
}

/// The (G, H) pair of the dilatations, with
/// d = sqrt((1 - (|nu|-|mu|)^2) (1 - (|nu|+|mu|)^2)):
/// G = (1/d) [[|1+mu|^2 - |nu|^2, 2 Im mu], [2 Im mu, |1-mu|^2 - |nu|^2]],
/// H = (1/d) [[|1-nu|^2 - |mu|^2, -2 Im nu], [-2 Im nu, |1+nu|^2 - |mu|^2]].
pub fn munu_to_gh(p: &BeltramiPair) -> Result<GHPair> {
    let (ma, na) = (p.mu.abs(), p.nu.abs());
    let d_sq = (1.0 - (na - ma) * (na - ma)) * (1.0 - (na + ma) * (na + ma));
    if d_sq <= DENOM_GUARD {
        return Err(Error::NotElliptic(format!(
            "dilatation discriminant {d_sq:.6e} is not positive"
        )));
    }
    let d = d_sq.sqrt();
    let (msq, nsq) = (p.mu.norm_sq(), p.nu.norm_sq());
    let g = Mat2::new(
        (abs_sq_one_plus(p.mu) - nsq) / d,
        2.0 * p.mu.im / d,
        2.0 * p.mu.im / d,
        (abs_sq_one_minus(p.mu) - nsq) / d,
    );
    let h = Mat2::new(
        (abs_sq_one_minus(p.nu) - msq) / d,
        -2.0 * p.nu.im / d,
        -2.0 * p.nu.im / d,
        (abs_sq_one_plus(p.nu) - msq) / d,
    );
    GHPair::new(g, h)
}

/// Inversion of [`munu_to_gh`]:
/// mu = (G11 - G22 + 2i G12) / s, nu = (H22 - H11 - 2i H12) / s,
/// with s = G11 + G22 + H11 + H22.
pub fn gh_to_munu(p: &GHPair) -> Result<BeltramiPair> {
    let (g, h) = (p.g.mat(), p.h.mat());
    let s = g.a11 + g.a22 + h.a11 + h.a22;
    if s <= DENOM_GUARD {
        return Err(Error::NotElliptic(format!("trace sum {s:.6e} not positive")));
    }
    let g12 = 0.5 * (g.a12 + g.a21);
    let h12 = 0.5 * (h.a12 + h.a21);
    let mu = Cx::new((g.a11 - g.a22) / s, 2.0 * g12 / s);
    let nu = Cx::new((h.a22 - h.a11) / s, -2.0 * h12 / s);
    BeltramiPair::new(mu, nu)
}

/// Direct (G, H) from sigma, with s = sqrt(det sigma^S):
/// G = (1/s) [[s22, -(s12+s21)/2], [-(s12+s21)/2, s11]],
/// H = (1/s) [[det sigma, (s21-s12)/2], [(s21-s12)/2, 1]].
pub fn gh_from_sigma(sigma: &Mat2) -> Result<GHPair> {
    let det_s = sigma.sym_part().det();
    if det_s <= DENOM_GUARD {
        return Err(Error::NotElliptic(format!(
            "det sigma^S = {det_s:.6e} is not positive"
        )));
    }
    let s = det_s.sqrt();
    let off_g = -0.5 * (sigma.a12 + sigma.a21) / s;
    let g = Mat2::new(sigma.a22 / s, off_g, off_g, sigma.a11 / s);
    let off_h = 0.5 * (sigma.a21 - sigma.a12) / s;
    let h = Mat2::new(sigma.det() / s, off_h, off_h, 1.0 / s);
    GHPair::new(g, h)
}

/// sigma back from (G, H): sigma = (1/H22) (G^{-1} + H12 J).
pub fn sigma_from_gh(p: &GHPair) -> Result<Mat2> {
    let h = p.h.mat();
    if h.a22 <= DENOM_GUARD {
        return Err(Error::NotElliptic(format!(
            "H22 = {:.6e} is not positive",
            h.a22
        )));
    }
    let g_inv = p
        .g
        .mat()
        .inverse()
        .ok_or_else(|| Error::NotElliptic("G is numerically singular".into()))?;
    let h12 = 0.5 * (h.a12 + h.a21);
    Ok((g_inv + Mat2::J * h12) * (1.0 / h.a22))
}

/// Residual of the stream-function coupling J^T grad v = sigma grad u.
/// Zero exactly when (u, v) form a conjugate pair for sigma.
pub fn stream_residual(grad_u: Vec2, grad_v: Vec2, sigma: &Mat2) -> f64 {
    let lhs = [grad_v[1], -grad_v[0]];
    let rhs = sigma.mul_vec(&grad_u);
    f64::hypot(lhs[0] - rhs[0], lhs[1] - rhs[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQ75: f64 = 0.75;

    /// The antisymmetric test conductivity [[0.5, sqrt(0.75)], [-sqrt(0.75), 0.5]].
    pub(crate) fn antisym_sigma() -> Mat2 {
        Mat2::new(0.5, SQ75.sqrt(), -(SQ75.sqrt()), 0.5)
    }

    #[test]
    fn dilatations_of_identity_vanish() {
        let p = sigma_to_munu(&Mat2::IDENTITY).unwrap();
        assert_eq!(p.mu, Cx::ZERO);
        assert_eq!(p.nu, Cx::ZERO);
    }

    #[test]
    fn dilatations_of_diagonal_phase() {
        let p = sigma_to_munu(&Mat2::diag(2.0, 0.5)).unwrap();
        assert!((p.mu.re + 1.0 / 3.0).abs() < 1e-15, "mu = {:?}", p.mu);
        assert_eq!(p.mu.im, 0.0);
        assert_eq!(p.nu, Cx::ZERO);
        assert!((p.distortion() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dilatations_of_antisymmetric_phase() {
        let p = sigma_to_munu(&antisym_sigma()).unwrap();
        assert!(p.mu.abs() < 1e-15, "mu = {:?}", p.mu);
        assert!((p.nu.re).abs() < 1e-15);
        assert!((p.nu.im - 1.0 / 3.0f64.sqrt()).abs() < 1e-15, "nu = {:?}", p.nu);
        // |nu| = 1/sqrt(3) corresponds to K = 2 + sqrt(3).
        assert!((p.distortion() - (2.0 + 3.0f64.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn sigma_round_trips_through_dilatations() {
        for sigma in [
            Mat2::IDENTITY,
            Mat2::diag(2.0, 0.5),
            antisym_sigma(),
            Mat2::new(1.5, 0.3, -0.2, 0.9),
        ] {
            let back = munu_to_sigma(&sigma_to_munu(&sigma).unwrap()).unwrap();
            assert!(
                back.max_abs_diff(&sigma) < 1e-12 * sigma.frob(),
                "round trip drifted: {back:?} vs {sigma:?}"
            );
        }
    }

    #[test]
    fn gh_of_trivial_and_diagonal_dilatations() {
        let p = BeltramiPair::new(Cx::ZERO, Cx::ZERO).unwrap();
        let gh = munu_to_gh(&p).unwrap();
        assert!(gh.g.mat().max_abs_diff(&Mat2::IDENTITY) < 1e-15);
        assert!(gh.h.mat().max_abs_diff(&Mat2::IDENTITY) < 1e-15);

        let p = BeltramiPair::new(Cx::new(-1.0 / 3.0, 0.0), Cx::ZERO).unwrap();
        let gh = munu_to_gh(&p).unwrap();
        assert!(gh.g.mat().max_abs_diff(&Mat2::diag(0.5, 2.0)) < 1e-14);
        assert!(gh.h.mat().max_abs_diff(&Mat2::IDENTITY) < 1e-14);
    }

    #[test]
    fn gh_of_antisymmetric_dilatations() {
        let p = BeltramiPair::new(Cx::ZERO, Cx::new(0.0, 1.0 / 3.0f64.sqrt())).unwrap();
        let gh = munu_to_gh(&p).unwrap();
        let r3 = 3.0f64.sqrt();
        assert!(gh.g.mat().max_abs_diff(&Mat2::IDENTITY) < 1e-14);
        assert!(
            gh.h.mat().max_abs_diff(&Mat2::new(2.0, -r3, -r3, 2.0)) < 1e-14,
            "H = {:?}",
            gh.h.mat()
        );
    }

    #[test]
    fn gh_from_sigma_matches_known_values() {
        let gh = gh_from_sigma(&Mat2::diag(2.0, 0.5)).unwrap();
        assert!(gh.g.mat().max_abs_diff(&Mat2::diag(0.5, 2.0)) < 1e-15);
        assert!(gh.h.mat().max_abs_diff(&Mat2::IDENTITY) < 1e-15);

        let gh = gh_from_sigma(&Mat2::IDENTITY).unwrap();
        assert!(gh.g.mat().max_abs_diff(&Mat2::IDENTITY) < 1e-15);
        assert!(gh.h.mat().max_abs_diff(&Mat2::IDENTITY) < 1e-15);

        // det sigma^S = 0.25, det sigma = 1; the H off-diagonal sign follows
        // (s21 - s12)/2, consistent with the dilatation route below.
        let gh = gh_from_sigma(&antisym_sigma()).unwrap();
        let r3 = 3.0f64.sqrt();
        assert!(gh.g.mat().max_abs_diff(&Mat2::IDENTITY) < 1e-14);
        assert!(gh.h.mat().max_abs_diff(&Mat2::new(2.0, -r3, -r3, 2.0)) < 1e-14);
    }

    #[test]
    fn consistency_triangle_on_nonsymmetric_inputs() {
        for sigma in [
            antisym_sigma(),
            Mat2::new(1.5, 0.3, -0.2, 0.9),
            Mat2::new(0.8, -0.15, 0.4, 2.2),
        ] {
            let direct = gh_from_sigma(&sigma).unwrap();
            let via = munu_to_gh(&sigma_to_munu(&sigma).unwrap()).unwrap();
            assert!(
                direct.g.mat().max_abs_diff(via.g.mat()) < 1e-12,
                "G mismatch for {sigma:?}"
            );
            assert!(
                direct.h.mat().max_abs_diff(via.h.mat()) < 1e-12,
                "H mismatch for {sigma:?}"
            );
        }
    }

    #[test]
    fn gh_round_trips() {
        let gh = GHPair::new(Mat2::diag(0.5, 2.0), Mat2::IDENTITY).unwrap();
        let p = gh_to_munu(&gh).unwrap();
        assert!((p.mu.re + 1.0 / 3.0).abs() < 1e-15);
        assert!(p.nu.abs() < 1e-15);
        let sigma = sigma_from_gh(&gh).unwrap();
        assert!(sigma.max_abs_diff(&Mat2::diag(2.0, 0.5)) < 1e-15);

        let sigma = antisym_sigma();
        let back = sigma_from_gh(&gh_from_sigma(&sigma).unwrap()).unwrap();
        assert!(back.max_abs_diff(&sigma) < 1e-14);
    }

    #[test]
    fn gh_pair_rejects_wrong_determinant() {
        assert!(matches!(
            GHPair::new(Mat2::diag(2.0, 2.0), Mat2::IDENTITY),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn non_elliptic_inputs_are_rejected() {
        assert!(matches!(
            sigma_to_munu(&Mat2::diag(1.0, -1.0)),
            Err(Error::NotElliptic(_))
        ));
        assert!(matches!(
            BeltramiPair::new(Cx::new(0.7, 0.0), Cx::new(0.0, 0.4)),
            Err(Error::NotElliptic(_))
        ));
        assert!(matches!(
            gh_from_sigma(&Mat2::new(1.0, 3.0, 3.0, 1.0)),
            Err(Error::NotElliptic(_))
        ));
    }

    #[test]
    fn stream_residual_examples() {
        assert_eq!(
            stream_residual([1.0, 0.0], [0.0, 2.0], &Mat2::diag(2.0, 0.5)),
            0.0
        );
        assert_eq!(stream_residual([0.0, 0.0], [0.0, 0.0], &antisym_sigma()), 0.0);
        let r = stream_residual([1.0, 0.0], [1.0, 0.0], &Mat2::IDENTITY);
        assert!((r - 2.0f64.sqrt()).abs() < 1e-15, "residual = {r}");
    }
}
