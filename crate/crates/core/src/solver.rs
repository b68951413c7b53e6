//! Iterative solvers for the structured linear systems the field
//! experiments assemble: a 9-point stencil operator on a rectangular
//! node grid, a symmetric Gauss-Seidel preconditioner, conjugate
//! gradients for the symmetric case and BiCGSTAB for the general one.
//!
//! Everything is strictly serial and order-deterministic: rerunning the
//! same system reproduces the same iterates bit for bit.

use crate::{Error, Result};

/// Sparse operator on an nx * ny node grid where each node couples only
/// to its 8 neighbors and itself. Coefficient layout per node:
/// index (dy+1)*3 + (dx+1) for the neighbor at offset (dx, dy), so 4 is
/// the diagonal. Couplings that point off the grid must be zero (they
/// belong to eliminated Dirichlet nodes).
#[derive(Debug, Clone)]
pub struct Stencil9 {
    nx: usize,
    ny: usize,
    c: Vec<[f64; 9]>,
}

/// Offset table matching the coefficient layout.
const OFFSETS: [(isize, isize); 9] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (0, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

impl Stencil9 {
    pub fn new(nx: usize, ny: usize) -> Stencil9 {
        Stencil9 {
            nx,
            ny,
            c: vec![[0.0; 9]; nx * ny],
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn add(&mut self, ix: usize, iy: usize, dx: isize, dy: isize, value: f64) {
        let o = ((dy + 1) * 3 + (dx + 1)) as usize;
        self.c[iy * self.nx + ix][o] += value;
    }

    fn neighbor(&self, ix: usize, iy: usize, o: usize) -> Option<usize> {
        let (dx, dy) = OFFSETS[o];
        let jx = ix as isize + dx;
        let jy = iy as isize + dy;
        if jx < 0 || jy < 0 || jx >= self.nx as isize || jy >= self.ny as isize {
            None
        } else {
            Some(jy as usize * self.nx + jx as usize)
        }
    }

    /// y = A x.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.len(), "operand length mismatch");
        assert_eq!(y.len(), self.len(), "output length mismatch");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = iy * self.nx + ix;
                let row = &self.c[i];
                let mut acc = 0.0;
                for (o, coeff) in row.iter().enumerate() {
                    if *coeff != 0.0 {
                        if let Some(j) = self.neighbor(ix, iy, o) {
                            acc += coeff * x[j];
                        }
                    }
                }
                y[i] = acc;
            }
        }
    }

    /// Whether the operator is symmetric: each coupling must match its
    /// mirror on the neighboring row.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let i = iy * self.nx + ix;
                for o in 5..9 {
                    if let Some(j) = self.neighbor(ix, iy, o) {
                        let a = self.c[i][o];
                        let b = self.c[j][8 - o];
                        if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// z = M^-1 r for the symmetric Gauss-Seidel preconditioner
    /// M = (D + L) D^-1 (D + U): one forward sweep, a diagonal scaling,
    /// one backward sweep. Grid ordering means "lower" neighbors are
    /// exactly the offsets before the diagonal slot.
    pub fn sgs_apply(&self, r: &[f64], z: &mut [f64]) {
        let nx = self.nx;
        // Forward: (D + L) w = r.
        for iy in 0..self.ny {
            for ix in 0..nx {
                let i = iy * nx + ix;
                let row = &self.c[i];
                let mut acc = r[i];
                for o in 0..4 {
                    if row[o] != 0.0 {
                        if let Some(j) = self.neighbor(ix, iy, o) {
                            acc -= row[o] * z[j];
                        }
                    }
                }
                z[i] = acc / row[4];
            }
        }
        // Scale: u = D w.
        for i in 0..self.len() {
            z[i] *= self.c[i][4];
        }
        // Backward: (D + U) z = u.
        for iy in (0..self.ny).rev() {
            for ix in (0..nx).rev() {
                let i = iy * nx + ix;
                let row = &self.c[i];
                let mut acc = z[i];
                for o in 5..9 {
                    if row[o] != 0.0 {
                        if let Some(j) = self.neighbor(ix, iy, o) {
                            acc -= row[o] * z[j];
                        }
                    }
                }
                z[i] = acc / row[4];
            }
        }
    }
}

/// Outcome of an iterative solve. `residual` is relative to the
/// right-hand side norm (or absolute when the rhs is zero).
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients with the SGS preconditioner.
/// Requires a symmetric positive definite operator; `x` holds the
/// initial guess on entry and the solution on success.
pub fn pcg(a: &Stencil9, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.len();
    let bnorm = {
        let nb = norm(b);
        if nb > 0.0 {
            nb
        } else {
            1.0
        }
    };
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = norm(&r) / bnorm;
    if res <= tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: res,
            converged: true,
        });
    }
    let mut z = vec![0.0; n];
    a.sgs_apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure(format!(
                "conjugate gradients lost definiteness (p.Ap = {pap}) at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
                converged: true,
            });
        }
        a.sgs_apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure(format!(
        "conjugate gradients stalled at relative residual {res:.3e} after {max_iter} iterations"
    )))
}

/// Preconditioned BiCGSTAB for general (non-symmetric) systems, same
/// contract as [`pcg`].
pub fn bicgstab(
    a: &Stencil9,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = a.len();
    let bnorm = {
        let nb = norm(b);
        if nb > 0.0 {
            nb
        } else {
            1.0
        }
    };
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = norm(&r) / bnorm;
    if res <= tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: res,
            converged: true,
        });
    }
    let rhat = r.clone();
    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_next = dot(&rhat, &r);
        if rho_next.abs() < 1e-300 {
            return Err(Error::SolverFailure(format!(
                "BiCGSTAB breakdown (rho = {rho_next:.3e}) at iteration {it}"
            )));
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        a.sgs_apply(&p, &mut phat);
        a.apply(&phat, &mut v);
        let rv = dot(&rhat, &v);
        if rv.abs() < 1e-300 {
            return Err(Error::SolverFailure(format!(
                "BiCGSTAB breakdown (rhat.v = {rv:.3e}) at iteration {it}"
            )));
        }
        alpha = rho / rv;
        // s = r - alpha v, reusing r's storage.
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Ok(SolveStats {
                iterations: it,
                residual: res,
                converged: true,
            });
        }
        a.sgs_apply(&r, &mut shat);
        a.apply(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt < 1e-300 {
            return Err(Error::SolverFailure(format!(
                "BiCGSTAB breakdown (t.t = {tt:.3e}) at iteration {it}"
            )));
        }
        omega = dot(&t, &r) / tt;
        if omega.abs() < 1e-300 {
            return Err(Error::SolverFailure(format!(
                "BiCGSTAB stagnated (omega = {omega:.3e}) at iteration {it}"
            )));
        }
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] -= omega * t[i];
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
                converged: true,
            });
        }
    }
    Err(Error::SolverFailure(format!(
        "BiCGSTAB stalled at relative residual {res:.3e} after {max_iter} iterations"
    )))
}
