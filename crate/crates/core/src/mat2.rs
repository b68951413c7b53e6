//! Real 2x2 matrix kernel.
//!
//! Everything downstream (conductivities, Beltrami data, laminate atoms,
//! field gradients) lives in 2x2 matrices, so eigenvalues and square roots
//! are computed in closed form rather than iteratively. The eigensolver
//! uses the half-angle form `theta = atan2(2 b, a - c) / 2`, which stays
//! accurate when the off-diagonal entry is tiny.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Plain 2-vector; kept as an array so callers can index freely.
pub type Vec2 = [f64; 2];

/// Relative symmetry tolerance used by [`SpdMat2::new`].
pub const SYM_TOL: f64 = 1e-12;

/// Real 2x2 matrix with row-major named entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);
    /// The fixed rotation J = [[0, -1], [1, 0]]; J^T grad v = sigma grad u
    /// is the stream-function coupling used throughout.
    pub const J: Mat2 = Mat2::new(0.0, -1.0, 1.0, 0.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Mat2 {
        Mat2 { a11, a12, a21, a22 }
    }

    pub const fn diag(a: f64, b: f64) -> Mat2 {
        Mat2::new(a, 0.0, 0.0, b)
    }

    /// Counterclockwise rotation by `theta` radians.
    pub fn rotation(theta: f64) -> Mat2 {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a11, self.a21, self.a12, self.a22)
    }

    /// Adjugate: M * adj(M) = det(M) * I, exactly in exact arithmetic.
    pub fn adjugate(&self) -> Mat2 {
        Mat2::new(self.a22, -self.a12, -self.a21, self.a11)
    }

    /// Inverse via the adjugate; `None` when the determinant is zero or
    /// subnormal. Domain-specific thresholds live at the call sites.
    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_normal() {
            return None;
        }
        Some(self.adjugate() * (1.0 / d))
    }

    pub fn sym_part(&self) -> Mat2 {
        let off = 0.5 * (self.a12 + self.a21);
        Mat2::new(self.a11, off, off, self.a22)
    }

    pub fn skew_part(&self) -> Mat2 {
        let off = 0.5 * (self.a12 - self.a21);
        Mat2::new(0.0, off, -off, 0.0)
    }

    pub fn frob(&self) -> f64 {
        (self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22)
            .sqrt()
    }

    pub fn mul_vec(&self, v: &Vec2) -> Vec2 {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    pub fn row(&self, i: usize) -> Vec2 {
        match i {
            0 => [self.a11, self.a12],
            1 => [self.a21, self.a22],
            _ => panic!("row index {i} out of range for a 2x2 matrix"),
        }
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.frob();
        (self.a12 - self.a21).abs() <= rel_tol * scale.max(f64::MIN_POSITIVE)
    }

    pub fn is_sl2(&self, tol: f64) -> bool {
        (self.det() - 1.0).abs() <= tol
    }

    /// Largest absolute entry difference against `other`; test helper.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (self.a11 - other.a11)
            .abs()
            .max((self.a12 - other.a12).abs())
            .max((self.a21 - other.a21).abs())
            .max((self.a22 - other.a22).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    pub fn to_array(&self) -> [[f64; 2]; 2] {
        [[self.a11, self.a12], [self.a21, self.a22]]
    }

    pub fn from_array(a: [[f64; 2]; 2]) -> Mat2 {
        Mat2::new(a[0][0], a[0][1], a[1][0], a[1][1])
    }
}

// Operator overloading ------------------------------------------------------

impl std::ops::Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 + rhs.a11,
            self.a12 + rhs.a12,
            self.a21 + rhs.a21,
            self.a22 + rhs.a22,
        )
    }
}

impl std::ops::Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 - rhs.a11,
            self.a12 - rhs.a12,
            self.a21 - rhs.a21,
            self.a22 - rhs.a22,
        )
    }
}

impl std::ops::Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * rhs.a11 + self.a12 * rhs.a21,
            self.a11 * rhs.a12 + self.a12 * rhs.a22,
            self.a21 * rhs.a11 + self.a22 * rhs.a21,
            self.a21 * rhs.a12 + self.a22 * rhs.a22,
        )
    }
}

impl std::ops::Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }
}

impl std::ops::Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self * -1.0
    }
}

impl Serialize for Mat2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Mat2, D::Error> {
        Ok(Mat2::from_array(<[[f64; 2]; 2]>::deserialize(d)?))
    }
}

/// Symmetric positive definite 2x2 matrix. Construction validates the
/// symmetry tolerance and positivity; eigen-based operations then read the
/// symmetrized entries, so a validated value never needs re-checking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpdMat2(Mat2);

impl SpdMat2 {
    pub const IDENTITY: SpdMat2 = SpdMat2(Mat2::IDENTITY);

    pub fn new(m: Mat2) -> Result<SpdMat2> {
        if !m.is_finite() {
            return Err(Error::NonSpd("non-finite entries".into()));
        }
        if !m.is_symmetric(SYM_TOL) {
            return Err(Error::NonSymmetric((m.a12 - m.a21).abs()));
        }
        let b = 0.5 * (m.a12 + m.a21);
        let det = m.a11 * m.a22 - b * b;
        if m.a11 <= 0.0 || det <= 0.0 {
            return Err(Error::NonSpd(format!(
                "leading minors a11 = {:.6e}, det = {:.6e}",
                m.a11, det
            )));
        }
        Ok(SpdMat2(m))
    }

    pub fn diag(a: f64, b: f64) -> Result<SpdMat2> {
        SpdMat2::new(Mat2::diag(a, b))
    }

    /// Internal constructor for values already known SPD by construction.
    pub(crate) fn new_unchecked(m: Mat2) -> SpdMat2 {
        SpdMat2(m)
    }

    pub fn mat(&self) -> &Mat2 {
        &self.0
    }

    pub fn into_mat(self) -> Mat2 {
        self.0
    }

    /// Symmetrized entries (a, b, c) representing [[a, b], [b, c]].
    fn sym_entries(&self) -> (f64, f64, f64) {
        (self.0.a11, 0.5 * (self.0.a12 + self.0.a21), self.0.a22)
    }

    pub fn max_eig(&self) -> f64 {
        let (a, b, c) = self.sym_entries();
        let m = 0.5 * (a + c);
        m + f64::hypot(0.5 * (a - c), b)
    }

    pub fn min_eig(&self) -> f64 {
        // det / lambda_max avoids the cancellation of m - r.
        let (a, b, c) = self.sym_entries();
        (a * c - b * b) / self.max_eig()
    }
}

impl<'de> Deserialize<'de> for SpdMat2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<SpdMat2, D::Error> {
        SpdMat2::new(Mat2::deserialize(d)?).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// Eigen-decomposition of a validated SPD matrix.
///
/// Returns `(lambda_min, lambda_max, R)` with `R` a rotation satisfying
/// `R^T M R = diag(lambda_min, lambda_max)`. An exactly isotropic input
/// returns the identity rotation; otherwise the rotation comes from the
/// half-angle formula (the eigenvector of `lambda_max` sits at angle
/// `atan2(2b, a - c) / 2`, and a quarter turn puts `lambda_min` first).
pub fn eig_sym(m: &SpdMat2) -> (f64, f64, Mat2) {
    let (a, b, c) = m.sym_entries();
    let half_diff = 0.5 * (a - c);
    let r = f64::hypot(half_diff, b);
    if r == 0.0 {
        return (a, a, Mat2::IDENTITY);
    }
    let mid = 0.5 * (a + c);
    let lambda_max = mid + r;
    let lambda_min = (a * c - b * b) / lambda_max;
    let theta_max = 0.5 * f64::atan2(2.0 * b, a - c);
    let rot = Mat2::rotation(theta_max + std::f64::consts::FRAC_PI_2);
    (lambda_min, lambda_max, rot)
}

/// Eigenvalues of the symmetric matrix [[a, b], [b, c]] without any
/// definiteness assumption; used for ellipticity checks where the result
/// may legitimately be non-positive. Returns (lambda_min, lambda_max).
pub(crate) fn sym_eigenvalues(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mid = 0.5 * (a + c);
    let r = f64::hypot(0.5 * (a - c), b);
    (mid - r, mid + r)
}

/// Largest eigenvalue of an SPD matrix.
pub fn max_eig_sym(m: &SpdMat2) -> f64 {
    m.max_eig()
}

/// SPD square root via the closed-form eigendecomposition.
pub fn sqrt_spd(m: &SpdMat2) -> SpdMat2 {
    spd_power(m, |l| l.sqrt())
}

/// SPD inverse square root; the workhorse for phase normalization.
pub fn inv_sqrt_spd(m: &SpdMat2) -> SpdMat2 {
    spd_power(m, |l| 1.0 / l.sqrt())
}

fn spd_power(m: &SpdMat2, f: impl Fn(f64) -> f64) -> SpdMat2 {
    let (lmin, lmax, rot) = eig_sym(m);
    let d = Mat2::diag(f(lmin), f(lmax));
    SpdMat2::new_unchecked(rot * d * rot.transpose())
}

// Compensated summation ------------------------------------------------

/// Kahan accumulator: long sums of mixed-magnitude terms (laminate
/// weights, per-cell energies) keep close to full precision.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    pub fn new() -> Kahan {
        Kahan::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}
