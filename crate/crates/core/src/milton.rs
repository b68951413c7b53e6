//! Fractional-linear transforms of conductivities and their companion
//! linear action on solutions.
//!
//! For parameters (a, b, c, d) the conductivity transforms as
//!
//! ```text
//! Sigma_A = (a sigma + b J) (c I + d J sigma)^{-1}
//! ```
//!
//! while a solution pair (u, v), v the stream function of u, transforms
//! linearly by A' = [[c, d], [-b, a]]. Ellipticity of Sigma_A is
//! equivalent to det A' = ac + bd > 0. Two exact identities pin the
//! symmetric parts:
//!
//! ```text
//! (Sigma_A)^S      = (ac + bd) / det(c I + d J sigma) * sigma^S
//! (Sigma_A^{-1})^S = (ac + bd) / det(a sigma + b J)   * J sigma^S J^T
//! ```
//!
//! For symmetric sigma the determinants reduce to c^2 + d^2 det(sigma)
//! and a^2 det(sigma) + b^2; a nonzero skew part adds the cross terms
//! cd (s12 - s21) and ab (s21 - s12).
//!
//! The module also provides [`symmetrize`]: a target-space change of
//! variables making both conductivities of a two-phase pair symmetric
//! without moving the minimal distortion.

use crate::kmin::TwoPhase;
use crate::mat2::{eig_sym, inv_sqrt_spd, Mat2, SpdMat2, Vec2};
use crate::translate::{sigma_from_gh, GHPair};
use crate::{Error, Result};

/// Determinant floor below which the transform counts as singular.
const SINGULAR_TOL: f64 = 1e-14;

/// Parameters of one fractional-linear transform.
///
/// No normalization is imposed: the action is invariant under scaling
/// (a, b, c, d) jointly, but (a, b) and (c, d) carry independent scales
/// otherwise, so callers keep whatever scale they built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoebiusParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl MoebiusParams {
    /// The do-nothing transform.
    pub const IDENTITY: MoebiusParams = MoebiusParams {
        a: 1.0,
        b: 0.0,
        c: 1.0,
        d: 0.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<MoebiusParams> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Error::BadParameter(
                "transform parameters must be finite".into(),
            ));
        }
        if a == 0.0 && b == 0.0 {
            return Err(Error::BadParameter("(a, b) must not both vanish".into()));
        }
        if c == 0.0 && d == 0.0 {
            return Err(Error::BadParameter("(c, d) must not both vanish".into()));
        }
        Ok(MoebiusParams { a, b, c, d })
    }

    /// Parameters of `outer` applied after `inner`. The companion
    /// solution matrices multiply, A'_out A'_in, which in parameter
    /// coordinates reads as below; the naive product of [[a, b], [c, d]]
    /// blocks does not reproduce the chained transform.
    pub fn compose(outer: &MoebiusParams, inner: &MoebiusParams) -> MoebiusParams {
        MoebiusParams {
            a: outer.a * inner.a - outer.b * inner.d,
            b: outer.a * inner.b + outer.b * inner.c,
            c: outer.c * inner.c - outer.d * inner.b,
            d: outer.c * inner.d + outer.d * inner.a,
        }
    }
}

fn denominator(sigma: &Mat2, p: &MoebiusParams) -> (Mat2, f64) {
    let n = Mat2::IDENTITY * p.c + (Mat2::J * *sigma) * p.d;
    let det = n.det();
    (n, det)
}

/// Sigma_A = (a sigma + b J)(c I + d J sigma)^{-1}.
pub fn sigma_transform(sigma: &Mat2, p: &MoebiusParams) -> Result<Mat2> {
    let (n, det) = denominator(sigma, p);
    if det.abs() <= SINGULAR_TOL {
        return Err(Error::SingularTransform(det));
    }
    let inv = n.inverse().ok_or(Error::SingularTransform(det))?;
    Ok((*sigma * p.a + Mat2::J * p.b) * inv)
}

/// Companion matrix acting on (u, v): A' = [[c, d], [-b, a]].
pub fn solution_transform(p: &MoebiusParams) -> Mat2 {
    Mat2::new(p.c, p.d, -p.b, p.a)
}

/// Pointwise algebraic identity behind the solution transform: with
/// grad v = J sigma grad u, the transformed pair solves the transformed
/// equation, i.e.
///
/// ```text
/// Sigma_A (c grad u + d grad v) = J^T (-b grad u + a grad v)
/// ```
///
/// Returns the Euclidean norm of the defect; zero up to rounding for
/// every input.
pub fn identity_check(sigma: &Mat2, p: &MoebiusParams, grad_u: Vec2) -> Result<f64> {
    let s = sigma_transform(sigma, p)?;
    let grad_v = Mat2::J.mul_vec(&sigma.mul_vec(&grad_u));
    let gu = [
        p.c * grad_u[0] + p.d * grad_v[0],
        p.c * grad_u[1] + p.d * grad_v[1],
    ];
    let gv = [
        -p.b * grad_u[0] + p.a * grad_v[0],
        -p.b * grad_u[1] + p.a * grad_v[1],
    ];
    let lhs = s.mul_vec(&gu);
    let rhs = Mat2::J.transpose().mul_vec(&gv);
    Ok(((lhs[0] - rhs[0]).powi(2) + (lhs[1] - rhs[1]).powi(2)).sqrt())
}

/// Whether the transform keeps the equation elliptic: det A' = ac + bd > 0.
/// Demands a nonsingular transform first, like the transform itself.
pub fn ellipticity_preserved(sigma: &Mat2, p: &MoebiusParams) -> Result<bool> {
    let (_, det) = denominator(sigma, p);
    if det.abs() <= SINGULAR_TOL {
        return Err(Error::SingularTransform(det));
    }
    Ok(p.a * p.c + p.b * p.d > 0.0)
}

/// Scalar of the symmetric-part identity: (Sigma_A)^S = s * sigma^S.
pub fn sym_part_scalar(sigma: &Mat2, p: &MoebiusParams) -> Result<f64> {
    let (_, det) = denominator(sigma, p);
    if det.abs() <= SINGULAR_TOL {
        return Err(Error::SingularTransform(det));
    }
    Ok((p.a * p.c + p.b * p.d) / det)
}

/// Scalar of the inverse identity: (Sigma_A^{-1})^S = s * J sigma^S J^T.
pub fn inv_sym_part_scalar(sigma: &Mat2, p: &MoebiusParams) -> Result<f64> {
    let num = *sigma * p.a + Mat2::J * p.b;
    let det = num.det();
    if det.abs() <= SINGULAR_TOL {
        return Err(Error::SingularTransform(det));
    }
    Ok((p.a * p.c + p.b * p.d) / det)
}

/// Target-space change of variables A with det A = 1 making both phases
/// of a two-phase pair symmetric. Returns (A, Sigma1, Sigma2).
///
/// Construction: W = H1^{-1/2} sends H1 to the identity and H2 to
/// W H2 W; the rotation R2 diagonalizing that product (largest
/// eigenvalue to slot (1,1), identity on ties) finishes the job, so
/// A = W R2 makes the transformed H field diagonal in both phases and
/// the recovered conductivities symmetric. The minimal distortion of
/// the pair is untouched since A lies in SL(2).
pub fn symmetrize(tp: &TwoPhase) -> Result<(Mat2, Mat2, Mat2)> {
    let w = inv_sqrt_spd(&tp.h1);
    let h2t = *w.mat() * *tp.h2.mat() * *w.mat();
    let h2t = SpdMat2::new(h2t.sym_part())?;
    let (lmin, lmax, rot) = eig_sym(&h2t);
    let r2 = if lmax - lmin <= 1e-12 * lmax {
        Mat2::IDENTITY
    } else {
        // eig_sym orders the smaller eigenvalue first; a quarter turn
        // moves the larger one into slot (1,1).
        rot * Mat2::J
    };
    let a = *w.mat() * r2;

    let h1_new = a.transpose() * *tp.h1.mat() * a;
    let h2_new = a.transpose() * *tp.h2.mat() * a;
    let sigma1 = sigma_from_gh(&GHPair::new(*tp.g1.mat(), h1_new.sym_part())?)?;
    let sigma2 = sigma_from_gh(&GHPair::new(*tp.g2.mat(), h2_new.sym_part())?)?;
    Ok((a, sigma1, sigma2))
}
