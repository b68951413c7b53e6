//! Minimal distortion over affine changes of variables, and the
//! classification of critical two-phase pairs.
//!
//! For a two-phase conductivity with per-phase factors (G_i, H_i) the
//! distortion can be lowered by composing with A, B in SL(2) on target
//! and domain. Three independent routes to the minimum are implemented:
//!
//! * [`kmin_normalized`]: normalize phase 1 to (I, I) with B = G1^{-1/2},
//!   A = H1^{-1/2}; the minimum is the geometric mean sqrt(g2~ h2~) of the
//!   transformed phase-2 eigenvalue maxima.
//! * [`kmin_explicit`]: a closed form straight from the sigma entries via
//!   the intermediates (m, n).
//! * [`kmin_numeric_oracle`]: derivative-free minimization over the full
//!   6-parameter (A, B) chart; slow, assumption-free, used to cross-check
//!   the formulas.
//!
//! The chain K_min <= K_hat <= K always holds, with
//! K_hat = sqrt(g1 h1 g2 h2). Equality K_min = K_hat is exactly the case
//! where both G's and both H's are simultaneously diagonalizable with
//! opposite eigenvalue order ([`simultaneous_diagonalize`]).

use serde::Serialize;

use crate::ellipticity::{ell, k_bounds, p_exponent};
use crate::mat2::{eig_sym, inv_sqrt_spd, sym_eigenvalues, Mat2, SpdMat2};
use crate::oracle::{nelder_mead, NelderMeadOptions};
use crate::translate::gh_from_sigma;
use crate::{Error, Result};

/// A two-phase conductivity with its derived per-phase factors.
#[derive(Debug, Clone, Copy)]
pub struct TwoPhase {
    pub sigma1: Mat2,
    pub sigma2: Mat2,
    pub g1: SpdMat2,
    pub h1: SpdMat2,
    pub g2: SpdMat2,
    pub h2: SpdMat2,
    /// Largest eigenvalues of the four factors; all >= 1 since the
    /// determinants are one.
    pub g1_max: f64,
    pub h1_max: f64,
    pub g2_max: f64,
    pub h2_max: f64,
}

impl TwoPhase {
    pub fn new(sigma1: Mat2, sigma2: Mat2) -> Result<TwoPhase> {
        ell(&sigma1).map_err(|e| prefix_phase(e, 1))?;
        ell(&sigma2).map_err(|e| prefix_phase(e, 2))?;
        let p1 = gh_from_sigma(&sigma1)?;
        let p2 = gh_from_sigma(&sigma2)?;
        Ok(TwoPhase {
            sigma1,
            sigma2,
            g1_max: p1.g.max_eig(),
            h1_max: p1.h.max_eig(),
            g2_max: p2.g.max_eig(),
            h2_max: p2.h.max_eig(),
            g1: p1.g,
            h1: p1.h,
            g2: p2.g,
            h2: p2.h,
        })
    }

    /// Pointwise distortion of the pair: the worse phase governs.
    pub fn distortion(&self) -> f64 {
        (self.g1_max * self.h1_max).max(self.g2_max * self.h2_max)
    }

    /// Ellipticity constant of the pair: min over the phases.
    pub fn lambda(&self) -> f64 {
        // Both phases were validated elliptic in the constructor.
        ell(&self.sigma1)
            .unwrap_or(0.0)
            .min(ell(&self.sigma2).unwrap_or(0.0))
    }
}

fn prefix_phase(e: Error, phase: usize) -> Error {
    match e {
        Error::NotElliptic(msg) => Error::NotElliptic(format!("phase {phase}: {msg}")),
        other => other,
    }
}

/// Criticality class of a two-phase pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CriticalClass {
    NonCritical,
    /// The antisymmetric pair [[l, b], [-b, l]] / [[l, -b], [b, l]] with
    /// b = sqrt(1 - l^2); attains K_min = K_lambda.
    NonSymmetricCritical,
    /// Both symmetric, jointly rotated to diag(S1, 1/l) / diag(S2, l);
    /// attains K_min = 1/lambda.
    SymmetricCritical,
}

/// Aggregate answer for one pair.
#[derive(Debug, Clone, Serialize)]
pub struct KminReport {
    /// Pointwise distortion max(g1 h1, g2 h2).
    pub k: f64,
    /// Geometric mean sqrt(g1 h1 g2 h2).
    pub khat: f64,
    /// Minimal distortion over SL(2) x SL(2).
    pub kmin: f64,
    /// Critical exponent 2 K_min / (K_min - 1); +infinity when K_min = 1.
    pub p_kmin: f64,
    /// Orthogonal diagonalizers, present exactly when K_min = K_hat.
    pub diag_a: Option<Mat2>,
    pub diag_b: Option<Mat2>,
    pub critical_class: CriticalClass,
    /// Intermediates of the explicit formula.
    pub m: f64,
    pub n: f64,
}

/// K_hat = sqrt(g1 h1 g2 h2).
pub fn khat(tp: &TwoPhase) -> f64 {
    (tp.g1_max * tp.h1_max * tp.g2_max * tp.h2_max).sqrt()
}

/// Largest eigenvalue of B^T M B, symmetrized against rounding drift.
fn max_eig_congruence(b: &Mat2, m: &Mat2) -> f64 {
    let p = b.transpose() * *m * *b;
    let (_, lmax) = sym_eigenvalues(p.a11, 0.5 * (p.a12 + p.a21), p.a22);
    lmax
}

/// K_min via phase-1 normalization: sqrt of the product of the largest
/// eigenvalues of G1^{-1/2} G2 G1^{-1/2} and H1^{-1/2} H2 H1^{-1/2}.
pub fn kmin_normalized(tp: &TwoPhase) -> f64 {
    let b = inv_sqrt_spd(&tp.g1);
    let a = inv_sqrt_spd(&tp.h1);
    let g2t = max_eig_congruence(b.mat(), tp.g2.mat());
    let h2t = max_eig_congruence(a.mat(), tp.h2.mat());
    (g2t * h2t).sqrt()
}

/// Closed-form K_min from the sigma entries. Returns (K_min, m, n) where
///
/// ```text
/// m  = s2_11 s1_22 + s1_11 s2_22 - (s2_12 + s2_21)(s1_12 + s1_21)/2
/// n  = (det s1 + det s2 - (s1_21 - s1_12)(s2_21 - s2_12)/2) / sqrt(d1 d2)
/// F1 = (m + sqrt(m^2 - 4 d1 d2)) / (2 sqrt(d1 d2)),  F2 = (n + sqrt(n^2 - 4)) / 2
/// K_min = sqrt(F1 F2),   d_i = det(sigma_i^S)
/// ```
pub fn kmin_explicit(sigma1: &Mat2, sigma2: &Mat2) -> Result<(f64, f64, f64)> {
    ell(sigma1).map_err(|e| prefix_phase(e, 1))?;
    ell(sigma2).map_err(|e| prefix_phase(e, 2))?;
    let d1 = sigma1.sym_part().det();
    let d2 = sigma2.sym_part().det();
    let root_d = (d1 * d2).sqrt();

    let m = sigma2.a11 * sigma1.a22 + sigma1.a11 * sigma2.a22
        - 0.5 * (sigma2.a12 + sigma2.a21) * (sigma1.a12 + sigma1.a21);
    let n = (sigma1.det() + sigma2.det()
        - 0.5 * (sigma1.a21 - sigma1.a12) * (sigma2.a21 - sigma2.a12))
        / root_d;

    // Both discriminants are nonnegative for elliptic input; tolerate
    // rounding noise, reject anything clearly out of range.
    let disc1 = m * m - 4.0 * d1 * d2;
    if disc1 < -1e-12 * (m * m + 4.0 * d1 * d2).max(1.0) {
        return Err(Error::NumericalError(format!(
            "m^2 - 4 d1 d2 = {disc1:.6e} is negative beyond tolerance"
        )));
    }
    let disc2 = n * n - 4.0;
    if n < 2.0 - 1e-12 {
        return Err(Error::NumericalError(format!(
            "n = {n:.15} fell below 2 beyond tolerance"
        )));
    }
    let f1 = (m + disc1.max(0.0).sqrt()) / (2.0 * root_d);
    let f2 = (n + disc2.max(0.0).sqrt()) / 2.0;
    Ok(((f1 * f2).sqrt(), m, n))
}

/// K_min for symmetric phases: with l1 <= l2 the eigenvalues of
/// sigma1^{-1/2} sigma2 sigma1^{-1/2}, the value is max(sqrt(1/l1), sqrt(l2)).
pub fn kmin_symmetric(sigma1: &SpdMat2, sigma2: &SpdMat2) -> f64 {
    let w = inv_sqrt_spd(sigma1);
    let p = *w.mat() * *sigma2.mat() * *w.mat();
    let (l1, l2) = sym_eigenvalues(p.a11, 0.5 * (p.a12 + p.a21), p.a22);
    (1.0 / l1).sqrt().max(l2.sqrt())
}

/// Result of the numeric minimization.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OracleReport {
    /// Best objective value found: min over the chart of max(g1~ h1~, g2~ h2~).
    pub kmin: f64,
    /// False when the evaluation budget ran out before the final polish
    /// converged; the value is still the best found.
    pub converged: bool,
    /// Objective evaluations spent.
    pub evals: usize,
}

/// Log-stretch clamp for the SL(2) chart; e^6 ~ 400 per axis is far beyond
/// any minimizer location for well-conditioned input.
const STRETCH_CLAMP: f64 = 6.0;

fn chart(alpha: f64, t: f64, beta: f64) -> Mat2 {
    let t = t.clamp(-STRETCH_CLAMP, STRETCH_CLAMP);
    Mat2::rotation(alpha) * Mat2::diag(t.exp(), (-t).exp()) * Mat2::rotation(beta)
}

/// Numeric minimization of the distortion over A, B in SL(2), each
/// parameterized as R(alpha) diag(e^t, e^{-t}) R(beta). Runs Nelder-Mead
/// from a fixed seed list, then polishes the winner with two fresh small
/// simplexes; fully deterministic. `budget` caps total objective
/// evaluations; on exhaustion the best value so far is returned with
/// `converged = false`.
pub fn kmin_numeric_oracle(tp: &TwoPhase, budget: usize) -> OracleReport {
    let objective = |x: &[f64; 6]| {
        let b = chart(x[0], x[1], x[2]);
        let a = chart(x[3], x[4], x[5]);
        let p1 = max_eig_congruence(&b, tp.g1.mat()) * max_eig_congruence(&a, tp.h1.mat());
        let p2 = max_eig_congruence(&b, tp.g2.mat()) * max_eig_congruence(&a, tp.h2.mat());
        p1.max(p2)
    };

    // Informed seed: the phase-1 normalization point, expressed in chart
    // coordinates from the eigendecompositions of G1 and H1.
    let seed_from = |m: &SpdMat2| -> [f64; 3] {
        let (_, lmax, rot) = eig_sym(m);
        let theta = rot.a21.atan2(rot.a11);
        // inv sqrt has eigenvalues lmax^{-1/2} (second slot after the
        // lmin-first rotation), so t = +ln(lmax)/2 in the first slot.
        [theta, 0.5 * lmax.ln(), -theta]
    };
    let sg = seed_from(&tp.g1);
    let sh = seed_from(&tp.h1);
    let normalized_seed = [sg[0], sg[1], sg[2], sh[0], sh[1], sh[2]];

    let mut seeds: Vec<[f64; 6]> = vec![[0.0; 6], normalized_seed];
    for (da, dt) in [
        (0.4, 0.3),
        (-0.4, 0.3),
        (0.9, -0.5),
        (-0.9, 0.5),
        (0.2, 1.0),
        (1.3, -1.0),
    ] {
        seeds.push([da, dt, -da, -da, dt, da]);
    }

    let per_run = (budget / (seeds.len() + 2)).max(200);
    let mut spent = 0usize;
    let mut best_x = [0.0; 6];
    let mut best_f = f64::INFINITY;
    for s in &seeds {
        let opts = NelderMeadOptions {
            max_evals: per_run.min(budget.saturating_sub(spent)),
            ..NelderMeadOptions::default()
        };
        if opts.max_evals == 0 {
            break;
        }
        let r = nelder_mead(objective, *s, 0.35, &opts);
        spent += r.evals;
        if r.f < best_f {
            best_f = r.f;
            best_x = r.x;
        }
    }

    // Two polish passes shrink the simplex around the incumbent; the max
    // objective has a kink at the optimum, so fresh small simplexes do
    // the fine convergence that a single run stalls on.
    let mut converged = false;
    for polish_scale in [1e-4, 1e-6] {
        let opts = NelderMeadOptions {
            max_evals: budget.saturating_sub(spent).max(1),
            ..NelderMeadOptions::default()
        };
        let r = nelder_mead(objective, best_x, polish_scale, &opts);
        spent += r.evals;
        if r.f < best_f {
            best_f = r.f;
            best_x = r.x;
        }
        converged = r.converged;
        if spent >= budget {
            converged = false;
            break;
        }
    }

    OracleReport {
        kmin: best_f,
        converged,
        evals: spent,
    }
}

/// Tightness tolerance: K_min = K_hat is an exact statement, checked
/// relatively at 1e-9.
const TIGHT_TOL: f64 = 1e-9;
/// Entry tolerance for the four diagonal-form identities.
const DIAG_TOL: f64 = 1e-8;
/// Eigenvalue gap below which a factor counts as isotropic and places no
/// constraint on its diagonalizer.
const ISO_TOL: f64 = 1e-9;

/// Orthogonal diagonalizers (A, B) for a tight pair: A^T G1 A = diag(g1,
/// 1/g1), A^T G2 A = diag(1/g2, g2), and B likewise for the H's. Returns
/// [`Error::NotTight`] when K_min < K_hat, in which case no such pair of
/// rotations exists.
pub fn simultaneous_diagonalize(tp: &TwoPhase) -> Result<(Mat2, Mat2)> {
    let (kmin, _, _) = kmin_explicit(&tp.sigma1, &tp.sigma2)?;
    let kh = khat(tp);
    if (kmin - kh).abs() > TIGHT_TOL * kh {
        return Err(Error::NotTight {
            kmin,
            khat: kh,
        });
    }

    let a = opposite_order_diagonalizer(&tp.g1, &tp.g2);
    let b = opposite_order_diagonalizer(&tp.h1, &tp.h2);

    let checks = [
        (&a, tp.g1.mat(), Mat2::diag(tp.g1_max, 1.0 / tp.g1_max)),
        (&a, tp.g2.mat(), Mat2::diag(1.0 / tp.g2_max, tp.g2_max)),
        (&b, tp.h1.mat(), Mat2::diag(tp.h1_max, 1.0 / tp.h1_max)),
        (&b, tp.h2.mat(), Mat2::diag(1.0 / tp.h2_max, tp.h2_max)),
    ];
    for (rot, m, want) in checks {
        let got = rot.transpose() * *m * *rot;
        if got.max_abs_diff(&want) > DIAG_TOL * (1.0 + want.frob()) {
            return Err(Error::NumericalError(format!(
                "tight pair failed a diagonal-form check: got {got:?}, want {want:?}"
            )));
        }
    }
    Ok((a, b))
}

/// Rotation putting m1's largest eigenvalue first and m2's largest second.
/// An isotropic factor places no constraint, so the other one decides;
/// both isotropic returns the identity.
fn opposite_order_diagonalizer(m1: &SpdMat2, m2: &SpdMat2) -> Mat2 {
    if m1.max_eig() > 1.0 + ISO_TOL {
        // eig_sym orders lambda_min first; a quarter turn swaps the slots.
        let (_, _, rot) = eig_sym(m1);
        rot * Mat2::J
    } else if m2.max_eig() > 1.0 + ISO_TOL {
        let (_, _, rot) = eig_sym(m2);
        rot
    } else {
        Mat2::IDENTITY
    }
}

/// Matching tolerance for the critical templates.
const CRITICAL_TOL: f64 = 1e-9;

/// Full classification of a pair: all distortion constants, the explicit
/// intermediates, the diagonalizers when tight, and the criticality class
/// against the rigidity templates.
pub fn classify_critical(sigma1: &Mat2, sigma2: &Mat2) -> Result<KminReport> {
    let tp = TwoPhase::new(*sigma1, *sigma2)?;
    let (kmin, m, n) = kmin_explicit(sigma1, sigma2)?;
    let kh = khat(&tp);
    let (diag_a, diag_b) = match simultaneous_diagonalize(&tp) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(Error::NotTight { .. }) => (None, None),
        Err(other) => return Err(other),
    };

    let lambda = tp.lambda();
    let (k_lambda, k_lambda_sym) = k_bounds(lambda.min(1.0))?;

    let critical_class = if (kmin - k_lambda).abs() <= CRITICAL_TOL
        && matches_antisymmetric_pair(sigma1, sigma2, lambda)
    {
        CriticalClass::NonSymmetricCritical
    } else if sigma1.is_symmetric(1e-9)
        && sigma2.is_symmetric(1e-9)
        && (kmin - k_lambda_sym).abs() <= CRITICAL_TOL
        && symmetric_template_rotation(sigma1, sigma2, lambda).is_some()
    {
        CriticalClass::SymmetricCritical
    } else {
        CriticalClass::NonCritical
    };

    Ok(KminReport {
        k: tp.distortion(),
        khat: kh,
        kmin,
        p_kmin: p_exponent(kmin),
        diag_a,
        diag_b,
        critical_class,
        m,
        n,
    })
}

/// Unordered match against {[[l, b], [-b, l]], [[l, -b], [b, l]]}.
fn matches_antisymmetric_pair(sigma1: &Mat2, sigma2: &Mat2, lambda: f64) -> bool {
    let b = (1.0 - lambda * lambda).max(0.0).sqrt();
    let plus = Mat2::new(lambda, b, -b, lambda);
    let minus = Mat2::new(lambda, -b, b, lambda);
    let close = |x: &Mat2, y: &Mat2| x.max_abs_diff(y) <= CRITICAL_TOL;
    (close(sigma1, &plus) && close(sigma2, &minus))
        || (close(sigma1, &minus) && close(sigma2, &plus))
}

/// Looks for a common rotation R with R^T sigma1 R = diag(S1, 1/lambda)
/// and R^T sigma2 R = diag(S2, lambda), lambda <= S_i <= 1/lambda.
/// Returns the rotation when the template matches.
fn symmetric_template_rotation(sigma1: &Mat2, sigma2: &Mat2, lambda: f64) -> Option<Mat2> {
    let tol = 1e-8 * (1.0 + 1.0 / lambda);
    // The template forms are both diagonal in one basis, so the phases
    // must commute; a cheap necessary check before trying rotations.
    let comm = *sigma1 * *sigma2 - *sigma2 * *sigma1;
    if comm.frob() > tol * (sigma1.frob() * sigma2.frob()).max(1.0) {
        return None;
    }
    let base = [sigma1, sigma2]
        .into_iter()
        .find_map(|s| {
            let spd = SpdMat2::new(s.sym_part()).ok()?;
            let (lmin, lmax, rot) = eig_sym(&spd);
            (lmax - lmin > ISO_TOL * lmax).then_some(rot)
        })
        .unwrap_or(Mat2::IDENTITY);

    for rot in [base, base * Mat2::J] {
        let d1 = rot.transpose() * *sigma1 * rot;
        let d2 = rot.transpose() * *sigma2 * rot;
        let diagonal = d1.a12.abs().max(d1.a21.abs()).max(d2.a12.abs()).max(d2.a21.abs()) <= tol;
        let slots = (d1.a22 - 1.0 / lambda).abs() <= tol && (d2.a22 - lambda).abs() <= tol;
        let range = |s: f64| s >= lambda - tol && s <= 1.0 / lambda + tol;
        if diagonal && slots && range(d1.a11) && range(d2.a11) {
            return Some(rot);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::{sigma_from_gh, GHPair};

    fn antisym_pair(lambda: f64) -> (Mat2, Mat2) {
        let b = (1.0 - lambda * lambda).sqrt();
        (
            Mat2::new(lambda, b, -b, lambda),
            Mat2::new(lambda, -b, b, lambda),
        )
    }

    /// Tight instance with K_min = K_hat = 6: G's and H's diagonal with
    /// opposite eigenvalue order. Recovered as sigma via sigma_from_gh.
    fn tight_pair() -> (Mat2, Mat2) {
        let s1 = sigma_from_gh(
            &GHPair::new(Mat2::diag(2.0, 0.5), Mat2::diag(3.0, 1.0 / 3.0)).unwrap(),
        )
        .unwrap();
        let s2 = sigma_from_gh(
            &GHPair::new(Mat2::diag(0.5, 2.0), Mat2::diag(1.0 / 3.0, 3.0)).unwrap(),
        )
        .unwrap();
        (s1, s2)
    }

    #[test]
    fn khat_known_values() {
        let tp = TwoPhase::new(Mat2::diag(2.0, 0.5), Mat2::diag(2.0, 0.5)).unwrap();
        assert!((khat(&tp) - 2.0).abs() < 1e-14);

        let tp = TwoPhase::new(Mat2::diag(2.0, 2.0), Mat2::diag(0.5, 0.5)).unwrap();
        assert!((khat(&tp) - 2.0).abs() < 1e-14);

        let (s1, s2) = antisym_pair(0.5);
        let tp = TwoPhase::new(s1, s2).unwrap();
        assert!((khat(&tp) - (2.0 + 3.0f64.sqrt())).abs() < 1e-13);
    }

    #[test]
    fn normalized_route_known_values() {
        let tp = TwoPhase::new(Mat2::diag(2.0, 0.5), Mat2::diag(2.0, 0.5)).unwrap();
        assert!((kmin_normalized(&tp) - 1.0).abs() < 1e-12);

        let tp = TwoPhase::new(Mat2::diag(2.0, 2.0), Mat2::diag(0.5, 0.5)).unwrap();
        assert!((kmin_normalized(&tp) - 2.0).abs() < 1e-12);

        let (s1, s2) = antisym_pair(0.5);
        let tp = TwoPhase::new(s1, s2).unwrap();
        assert!((kmin_normalized(&tp) - (2.0 + 3.0f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn explicit_route_worked_values() {
        let (kmin, m, n) =
            kmin_explicit(&Mat2::diag(2.0, 2.0), &Mat2::diag(0.5, 0.5)).unwrap();
        assert!((kmin - 2.0).abs() < 1e-12, "kmin = {kmin}");
        assert!((m - 2.0).abs() < 1e-12, "m = {m}");
        assert!((n - 4.25).abs() < 1e-12, "n = {n}");

        let sigma = Mat2::new(1.5, 0.3, -0.2, 0.9);
        let (kmin, _, _) = kmin_explicit(&sigma, &sigma).unwrap();
        assert!((kmin - 1.0).abs() < 1e-12, "equal phases must give 1");

        let (s1, s2) = antisym_pair(0.5);
        let (kmin, m, n) = kmin_explicit(&s1, &s2).unwrap();
        assert!((kmin - (7.0 + 4.0 * 3.0f64.sqrt()).sqrt()).abs() < 1e-12);
        assert!((m - 0.5).abs() < 1e-12, "m = {m}");
        assert!((n - 14.0).abs() < 1e-12, "n = {n}");
    }

    #[test]
    fn symmetric_route_matches_explicit() {
        let cases = [
            (Mat2::diag(2.0, 2.0), Mat2::diag(0.5, 0.5), 2.0),
            (Mat2::diag(2.0, 2.0), Mat2::diag(0.6, 0.6), 1.0 / 0.3f64.sqrt()),
            (Mat2::diag(1.3, 2.0), Mat2::diag(0.7, 0.5), 2.0),
        ];
        for (s1, s2, want) in cases {
            let sym = kmin_symmetric(
                &SpdMat2::new(s1).unwrap(),
                &SpdMat2::new(s2).unwrap(),
            );
            let (expl, _, _) = kmin_explicit(&s1, &s2).unwrap();
            assert!((sym - want).abs() < 1e-12, "sym route {sym} vs want {want}");
            assert!((sym - expl).abs() < 1e-10 * expl, "routes split on {s1:?}/{s2:?}");
        }
        let s = SpdMat2::diag(1.7, 0.4).unwrap();
        assert!((kmin_symmetric(&s, &s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_agrees_on_closed_forms() {
        let budget = 60_000;
        let tp = TwoPhase::new(Mat2::diag(2.0, 0.5), Mat2::diag(2.0, 0.5)).unwrap();
        let r = kmin_numeric_oracle(&tp, budget);
        assert!((r.kmin - 1.0).abs() < 1e-6, "oracle = {:?}", r);

        let tp = TwoPhase::new(Mat2::diag(2.0, 2.0), Mat2::diag(0.5, 0.5)).unwrap();
        let r = kmin_numeric_oracle(&tp, budget);
        assert!((r.kmin - 2.0).abs() < 2e-6, "oracle = {:?}", r);

        let (s1, s2) = antisym_pair(0.5);
        let tp = TwoPhase::new(s1, s2).unwrap();
        let r = kmin_numeric_oracle(&tp, budget);
        let want = 2.0 + 3.0f64.sqrt();
        assert!((r.kmin - want).abs() < 2e-6 * want, "oracle = {:?}", r);
    }

    #[test]
    fn diagonalize_tight_instance() {
        let (s1, s2) = tight_pair();
        // The construction pins sigma1 = diag(1.5, 6), sigma2 = diag(2/3, 1/6).
        assert!(s1.max_abs_diff(&Mat2::diag(1.5, 6.0)) < 1e-12);
        assert!(s2.max_abs_diff(&Mat2::diag(2.0 / 3.0, 1.0 / 6.0)) < 1e-12);
        let tp = TwoPhase::new(s1, s2).unwrap();
        let (kmin, _, _) = kmin_explicit(&s1, &s2).unwrap();
        assert!((kmin - 6.0).abs() < 1e-10, "kmin = {kmin}");
        assert!((khat(&tp) - 6.0).abs() < 1e-10);
        let (a, b) = simultaneous_diagonalize(&tp).unwrap();
        // Already diagonal with the right order: identity rotations work,
        // and the contract itself was verified inside the call.
        assert!((a.det().abs() - 1.0).abs() < 1e-12);
        assert!((b.det().abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonalize_rotated_tight_instance() {
        let rot = Mat2::rotation(0.7);
        let g1 = rot * Mat2::diag(2.0, 0.5) * rot.transpose();
        let g2 = rot * Mat2::diag(0.5, 2.0) * rot.transpose();
        let s1 = sigma_from_gh(&GHPair::new(g1, Mat2::diag(3.0, 1.0 / 3.0)).unwrap()).unwrap();
        let s2 = sigma_from_gh(&GHPair::new(g2, Mat2::diag(1.0 / 3.0, 3.0)).unwrap()).unwrap();
        let tp = TwoPhase::new(s1, s2).unwrap();
        let (a, _b) = simultaneous_diagonalize(&tp).expect("rotated pair is still tight");
        // A must agree with R(0.7) up to column sign/order; the diagonal
        // identities were verified inside, so only orthogonality is left.
        assert!((a * a.transpose()).max_abs_diff(&Mat2::IDENTITY) < 1e-10);
    }

    #[test]
    fn diagonalize_rejects_a_gap() {
        let sigma = Mat2::diag(2.0, 0.5);
        let tp = TwoPhase::new(sigma, sigma).unwrap();
        // Equal anisotropic phases: kmin = 1 but khat = 2.
        match simultaneous_diagonalize(&tp) {
            Err(Error::NotTight { kmin, khat }) => {
                assert!((kmin - 1.0).abs() < 1e-12);
                assert!((khat - 2.0).abs() < 1e-12);
            }
            other => panic!("expected NotTight, got {other:?}"),
        }
    }

    #[test]
    fn isotropic_scaled_pair_is_tight_but_noncritical() {
        // kmin = khat = sqrt(10/3) < 2 = 1/lambda here, so the pair is
        // tight yet noncritical.
        let rep = classify_critical(&Mat2::diag(2.0, 2.0), &Mat2::diag(0.6, 0.6)).unwrap();
        assert!((rep.kmin - (10.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((rep.khat - rep.kmin).abs() < 1e-12);
        assert!(rep.diag_a.is_some() && rep.diag_b.is_some());
        assert_eq!(rep.critical_class, CriticalClass::NonCritical);
    }

    #[test]
    fn classify_antisymmetric_pairs() {
        for lambda in [0.2, 0.5, 0.8] {
            let (s1, s2) = antisym_pair(lambda);
            let rep = classify_critical(&s1, &s2).unwrap();
            let want = (1.0 + (1.0 - lambda * lambda).sqrt()) / lambda;
            assert!(
                (rep.kmin - want).abs() < 1e-10 * want,
                "lambda = {lambda}: kmin = {}, want {want}",
                rep.kmin
            );
            assert!((rep.k - want).abs() < 1e-10 * want, "K should equal K_min here");
            assert_eq!(rep.critical_class, CriticalClass::NonSymmetricCritical);
        }
    }

    #[test]
    fn classify_symmetric_critical_pair() {
        let rep = classify_critical(&Mat2::diag(1.3, 2.0), &Mat2::diag(0.7, 0.5)).unwrap();
        assert!((rep.kmin - 2.0).abs() < 1e-12);
        assert_eq!(rep.critical_class, CriticalClass::SymmetricCritical);

        // Same pair under a common rotation stays in the class.
        let rot = Mat2::rotation(0.4);
        let s1 = rot * Mat2::diag(1.3, 2.0) * rot.transpose();
        let s2 = rot * Mat2::diag(0.7, 0.5) * rot.transpose();
        let rep = classify_critical(&s1.sym_part(), &s2.sym_part()).unwrap();
        assert_eq!(rep.critical_class, CriticalClass::SymmetricCritical);
    }

    #[test]
    fn classify_noncritical_pair() {
        let rep = classify_critical(&Mat2::diag(2.0, 2.0), &Mat2::diag(0.6, 0.6)).unwrap();
        assert_eq!(rep.critical_class, CriticalClass::NonCritical);
        assert!((rep.p_kmin - 2.0 * rep.kmin / (rep.kmin - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn chain_holds_on_fixed_cases() {
        let cases = [
            (Mat2::diag(2.0, 0.5), Mat2::diag(0.5, 2.0)),
            (Mat2::new(1.5, 0.3, -0.2, 0.9), Mat2::new(0.8, -0.15, 0.4, 2.2)),
            antisym_pair(0.35),
        ];
        for (s1, s2) in cases {
            let tp = TwoPhase::new(s1, s2).unwrap();
            let (kmin, _, _) = kmin_explicit(&s1, &s2).unwrap();
            let kh = khat(&tp);
            assert!(kmin <= kh + 1e-9, "chain broke: {kmin} > {kh}");
            assert!(kh <= tp.distortion() + 1e-9);
            assert!(kmin >= 1.0 - 1e-12);
        }
    }
}
