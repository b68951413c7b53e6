//! Desk-scale PDE experiments on the unit square: solve div(sigma grad u) = 0
//! with affine Dirichlet data over a two-phase cell grid, measure gradient
//! L^p tails across refinements, and reconstruct the conjugate stream
//! function from the flux field.
//!
//! Discretization: bilinear elements on a uniform n x n quad mesh with
//! cell-constant sigma and 2x2 Gauss quadrature (exact for these
//! integrands). The full 2x2 tensor is admitted, so the assembled system
//! can be non-symmetric; conjugate gradients handles the symmetric case
//! and BiCGSTAB the rest, both behind a symmetric Gauss-Seidel
//! preconditioner and both re-checked against the true residual.
//!
//! Everything is serial and order-deterministic: identical inputs give
//! bit-identical outputs.

use serde::{Deserialize, Serialize};

use crate::kmin::TwoPhase;
use crate::mat2::{Kahan, Mat2};
use crate::sampling::rng;
use crate::solver::{bicgstab, pcg, SolveStats, Stencil9};
use crate::{Error, Result};
use rand::Rng;

/// Relative residual demanded from the linear solver; the contract on
/// [`FieldSolution`] is 1e-10, so we aim an order of magnitude lower and
/// re-check the true residual after the solve.
const SOLVE_TOL: f64 = 1e-11;
const MAX_ITER: usize = 30_000;

/// Grid axis; layers with `normal: Axis::X` vary along x (vertical
/// strips).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Cell-grid geometry kinds. All of them describe a fixed continuum
/// layout, so refining n refines the mesh without changing the material.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// tiles x tiles checkerboard; n must be divisible by tiles.
    Checkerboard { tiles: usize },
    /// Periodic layers: `periods` full periods across the domain, each
    /// split `fraction` phase 1 / rest phase 2, varying along `normal`.
    Layers {
        periods: usize,
        normal: Axis,
        fraction: f64,
    },
    /// Independent per-cell labels, phase 1 with probability `fraction`.
    /// Mesh-dependent by nature; not meaningful for refinement studies.
    Random { fraction: f64, seed: u64 },
}

/// An n x n grid of phase labels (1 or 2) with the two-phase pair that
/// gives the labels meaning.
#[derive(Debug, Clone)]
pub struct PhaseGrid {
    n: usize,
    labels: Vec<u8>,
    tp: TwoPhase,
    geometry: Geometry,
}

impl PhaseGrid {
    pub fn new(geometry: Geometry, n: usize, tp: TwoPhase) -> Result<PhaseGrid> {
        if n < 8 {
            return Err(Error::DomainError(format!(
                "grid needs n >= 8 cells per side, got {n}"
            )));
        }
        let labels: Vec<u8> = match geometry {
            Geometry::Checkerboard { tiles } => {
                if tiles < 2 || n % tiles != 0 {
                    return Err(Error::DomainError(format!(
                        "checkerboard needs 2 <= tiles dividing n, got tiles = {tiles}, n = {n}"
                    )));
                }
                let cell = n / tiles;
                (0..n * n)
                    .map(|i| {
                        let (cx, cy) = (i % n, i / n);
                        1 + ((cx / cell + cy / cell) % 2) as u8
                    })
                    .collect()
            }
            Geometry::Layers {
                periods,
                normal,
                fraction,
            } => {
                if periods == 0 || n % periods != 0 || n / periods < 2 {
                    return Err(Error::DomainError(format!(
                        "layers need periods dividing n with at least 2 cells each, got {periods} of {n}"
                    )));
                }
                if !(fraction.is_finite() && fraction > 0.0 && fraction < 1.0) {
                    return Err(Error::DomainError(format!(
                        "layer fraction {fraction} outside (0, 1)"
                    )));
                }
                let cpp = n / periods;
                let t1 = ((fraction * cpp as f64).round() as usize).clamp(1, cpp - 1);
                (0..n * n)
                    .map(|i| {
                        let (cx, cy) = (i % n, i / n);
                        let pos = match normal {
                            Axis::X => cx % cpp,
                            Axis::Y => cy % cpp,
                        };
                        if pos < t1 {
                            1
                        } else {
                            2
                        }
                    })
                    .collect()
            }
            Geometry::Random { fraction, seed } => {
                if !(fraction.is_finite() && fraction > 0.0 && fraction < 1.0) {
                    return Err(Error::DomainError(format!(
                        "random fraction {fraction} outside (0, 1)"
                    )));
                }
                let mut r = rng(seed);
                (0..n * n)
                    .map(|_| if r.gen::<f64>() < fraction { 1u8 } else { 2u8 })
                    .collect()
            }
        };
        let has1 = labels.contains(&1);
        let has2 = labels.contains(&2);
        if !(has1 && has2) {
            return Err(Error::DomainError(
                "geometry degenerated to a single phase; both labels must appear".into(),
            ));
        }
        Ok(PhaseGrid {
            n,
            labels,
            tp,
            geometry,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn two_phase(&self) -> &TwoPhase {
        &self.tp
    }

    pub fn label(&self, cx: usize, cy: usize) -> u8 {
        self.labels[cy * self.n + cx]
    }

    pub fn sigma(&self, cx: usize, cy: usize) -> &Mat2 {
        if self.label(cx, cy) == 1 {
            &self.tp.sigma1
        } else {
            &self.tp.sigma2
        }
    }

    /// Area fraction occupied by phase 1.
    pub fn volume_fraction(&self) -> f64 {
        let ones = self.labels.iter().filter(|l| **l == 1).count();
        ones as f64 / self.labels.len() as f64
    }
}

// Assembly ---------------------------------------------------------------

/// Gradients of the four bilinear shape functions on the unit reference
/// cell at (xi, eta), divided by h to live on a physical cell. Local
/// node order: (0,0), (1,0), (0,1), (1,1).
fn shape_gradients(xi: f64, eta: f64, h: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - eta) / h, -(1.0 - xi) / h],
        [(1.0 - eta) / h, -xi / h],
        [-eta / h, (1.0 - xi) / h],
        [eta / h, xi / h],
    ]
}

/// Local stiffness k[a][b] = integral over the cell of
/// (sigma grad phi_b) . grad phi_a, by 2x2 Gauss (exact here).
fn local_stiffness(sigma: &Mat2, h: f64) -> [[f64; 4]; 4] {
    let g = 0.5 / 3.0f64.sqrt();
    let pts = [0.5 - g, 0.5 + g];
    let w = h * h / 4.0;
    let mut k = [[0.0; 4]; 4];
    for &xi in &pts {
        for &eta in &pts {
            let grads = shape_gradients(xi, eta, h);
            for b in 0..4 {
                let sg = sigma.mul_vec(&grads[b]);
                for (a, ga) in grads.iter().enumerate() {
                    k[a][b] += w * (sg[0] * ga[0] + sg[1] * ga[1]);
                }
            }
        }
    }
    k
}

/// Discrete solution of div(sigma grad u) = 0 with u = v . x on the
/// boundary: nodal values, per-cell gradients and fluxes, solver stats.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    n: usize,
    h: f64,
    v: [f64; 2],
    u: Vec<f64>,
    grad: Vec<[f64; 2]>,
    flux: Vec<[f64; 2]>,
    labels: Vec<u8>,
    pub stats: SolveStats,
}

/// Solves the cell problem on `grid` with boundary data u = v . x.
pub fn solve(grid: &PhaseGrid, v: [f64; 2]) -> Result<FieldSolution> {
    if !(v[0].is_finite() && v[1].is_finite()) {
        return Err(Error::BadParameter("boundary direction must be finite".into()));
    }
    let n = grid.n;
    let h = 1.0 / n as f64;
    let m = n - 1; // interior nodes per side
    let mut a = Stencil9::new(m, m);
    let mut b = vec![0.0; m * m];
    let bdry = |ix: usize, iy: usize| v[0] * (ix as f64 * h) + v[1] * (iy as f64 * h);

    let k1 = local_stiffness(&grid.tp.sigma1, h);
    let k2 = local_stiffness(&grid.tp.sigma2, h);
    for cy in 0..n {
        for cx in 0..n {
            let k = if grid.label(cx, cy) == 1 { &k1 } else { &k2 };
            // Local node l sits at (cx + l%2, cy + l/2).
            for la in 0..4 {
                let (ax, ay) = (cx + la % 2, cy + la / 2);
                if ax == 0 || ay == 0 || ax == n || ay == n {
                    continue; // test functions vanish on the boundary
                }
                for lb in 0..4 {
                    let (bx, by) = (cx + lb % 2, cy + lb / 2);
                    if bx == 0 || by == 0 || bx == n || by == n {
                        b[(ay - 1) * m + (ax - 1)] -= k[la][lb] * bdry(bx, by);
                    } else {
                        let dx = bx as isize - ax as isize;
                        let dy = by as isize - ay as isize;
                        a.add(ax - 1, ay - 1, dx, dy, k[la][lb]);
                    }
                }
            }
        }
    }

    // Affine initial guess: exact for constant coefficients, close
    // everywhere else.
    let mut x: Vec<f64> = (0..m * m)
        .map(|i| bdry(i % m + 1, i / m + 1))
        .collect();
    let stats = if a.is_symmetric(1e-13) {
        pcg(&a, &b, &mut x, SOLVE_TOL, MAX_ITER)?
    } else {
        bicgstab(&a, &b, &mut x, SOLVE_TOL, MAX_ITER)?
    };
    // Iterative recurrences can drift from the true residual; re-check.
    let mut ax = vec![0.0; m * m];
    a.apply(&x, &mut ax);
    let mut rss = 0.0;
    let mut bss = 0.0;
    for i in 0..m * m {
        rss += (b[i] - ax[i]) * (b[i] - ax[i]);
        bss += b[i] * b[i];
    }
    let true_res = if bss > 0.0 { (rss / bss).sqrt() } else { rss.sqrt() };
    if true_res > 1e-10 {
        return Err(Error::SolverFailure(format!(
            "true relative residual {true_res:.3e} exceeds the 1e-10 contract"
        )));
    }

    // Full nodal field: boundary nodes carry v . x exactly.
    let nn = n + 1;
    let mut u = vec![0.0; nn * nn];
    for iy in 0..nn {
        for ix in 0..nn {
            u[iy * nn + ix] = if ix == 0 || iy == 0 || ix == n || iy == n {
                bdry(ix, iy)
            } else {
                x[(iy - 1) * m + (ix - 1)]
            };
        }
    }
    // Cell-center gradient of the bilinear interpolant, and its flux.
    let mut grad = Vec::with_capacity(n * n);
    let mut flux = Vec::with_capacity(n * n);
    for cy in 0..n {
        for cx in 0..n {
            let u00 = u[cy * nn + cx];
            let u10 = u[cy * nn + cx + 1];
            let u01 = u[(cy + 1) * nn + cx];
            let u11 = u[(cy + 1) * nn + cx + 1];
            let g = [
                (u10 - u00 + u11 - u01) / (2.0 * h),
                (u01 - u00 + u11 - u10) / (2.0 * h),
            ];
            grad.push(g);
            flux.push(grid.sigma(cx, cy).mul_vec(&g));
        }
    }
    Ok(FieldSolution {
        n,
        h,
        v,
        u,
        grad,
        flux,
        labels: grid.labels.clone(),
        stats,
    })
}

impl FieldSolution {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn direction(&self) -> [f64; 2] {
        self.v
    }

    pub fn node_u(&self, ix: usize, iy: usize) -> f64 {
        self.u[iy * (self.n + 1) + ix]
    }

    pub fn cell_gradient(&self, cx: usize, cy: usize) -> [f64; 2] {
        self.grad[cy * self.n + cx]
    }

    pub fn cell_flux(&self, cx: usize, cy: usize) -> [f64; 2] {
        self.flux[cy * self.n + cx]
    }

    /// Cell-measure-weighted L^p norm of |grad u|.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let mut acc = Kahan::new();
        let cell = self.h * self.h;
        for g in &self.grad {
            let mag = (g[0] * g[0] + g[1] * g[1]).sqrt();
            acc.add(cell * mag.powf(p));
        }
        acc.value().powf(1.0 / p)
    }

    pub fn max_gradient(&self) -> f64 {
        self.grad
            .iter()
            .map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt())
            .fold(0.0, f64::max)
    }

    /// Area-weighted mean gradient; equals the boundary direction v by
    /// the divergence theorem (discretely to rounding).
    pub fn mean_gradient(&self) -> [f64; 2] {
        let mut ax = Kahan::new();
        let mut ay = Kahan::new();
        let cell = self.h * self.h;
        for g in &self.grad {
            ax.add(cell * g[0]);
            ay.add(cell * g[1]);
        }
        [ax.value(), ay.value()]
    }

    /// Area-weighted mean flux; the effective-conductivity readout.
    pub fn mean_flux(&self) -> [f64; 2] {
        let mut ax = Kahan::new();
        let mut ay = Kahan::new();
        let cell = self.h * self.h;
        for f in &self.flux {
            ax.add(cell * f[0]);
            ay.add(cell * f[1]);
        }
        [ax.value(), ay.value()]
    }

    /// Mean flux over cells whose center lies in [lo, hi]^2, away from
    /// the boundary layers the affine data creates.
    pub fn block_mean_flux(&self, lo: f64, hi: f64) -> [f64; 2] {
        let mut ax = Kahan::new();
        let mut ay = Kahan::new();
        let mut count = 0usize;
        for cy in 0..self.n {
            for cx in 0..self.n {
                let x = (cx as f64 + 0.5) * self.h;
                let y = (cy as f64 + 0.5) * self.h;
                if x >= lo && x <= hi && y >= lo && y <= hi {
                    let f = self.flux[cy * self.n + cx];
                    ax.add(f[0]);
                    ay.add(f[1]);
                    count += 1;
                }
            }
        }
        [ax.value() / count as f64, ay.value() / count as f64]
    }

    /// Cell-centered dump: x, y, u, ux, uy, phase with full 17-digit
    /// floats.
    pub fn field_csv(&self) -> String {
        let mut out = String::from("x,y,u,ux,uy,phase\n");
        let nn = self.n + 1;
        for cy in 0..self.n {
            for cx in 0..self.n {
                let x = (cx as f64 + 0.5) * self.h;
                let y = (cy as f64 + 0.5) * self.h;
                let uc = 0.25
                    * (self.u[cy * nn + cx]
                        + self.u[cy * nn + cx + 1]
                        + self.u[(cy + 1) * nn + cx]
                        + self.u[(cy + 1) * nn + cx + 1]);
                let g = self.grad[cy * self.n + cx];
                out.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                    x, y, uc, g[0], g[1], self.labels[cy * self.n + cx]
                ));
            }
        }
        out
    }
}

// Gradient tails ----------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct PNorm {
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub norms: Vec<PNorm>,
    pub histogram: Vec<HistBin>,
}

/// L^p norms for each requested exponent plus an area-fraction histogram
/// of |grad u| (log-spaced bins between the smallest positive and the
/// largest magnitude).
pub fn gradient_tail(sol: &FieldSolution, exponents: &[f64]) -> TailReport {
    let norms = exponents
        .iter()
        .map(|p| PNorm {
            p: *p,
            value: sol.lp_norm(*p),
        })
        .collect();

    let mags: Vec<f64> = sol
        .grad
        .iter()
        .map(|g| (g[0] * g[0] + g[1] * g[1]).sqrt())
        .collect();
    let max = mags.iter().fold(0.0f64, |a, b| a.max(*b));
    let minpos = mags
        .iter()
        .copied()
        .filter(|m| *m > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut histogram = Vec::new();
    if !minpos.is_finite() || max <= 0.0 {
        histogram.push(HistBin {
            lo: 0.0,
            hi: 0.0,
            fraction: 1.0,
        });
    } else if max / minpos < 1.0 + 1e-12 {
        histogram.push(HistBin {
            lo: minpos,
            hi: max,
            fraction: 1.0,
        });
    } else {
        const BINS: usize = 24;
        let llo = minpos.ln();
        let step = (max.ln() - llo) / BINS as f64;
        let mut counts = [0usize; BINS];
        let mut zeros = 0usize;
        for m in &mags {
            if *m <= 0.0 {
                zeros += 1;
                continue;
            }
            let b = (((m.ln() - llo) / step) as usize).min(BINS - 1);
            counts[b] += 1;
        }
        let total = mags.len() as f64;
        if zeros > 0 {
            histogram.push(HistBin {
                lo: 0.0,
                hi: 0.0,
                fraction: zeros as f64 / total,
            });
        }
        for (i, c) in counts.iter().enumerate() {
            histogram.push(HistBin {
                lo: (llo + i as f64 * step).exp(),
                hi: (llo + (i + 1) as f64 * step).exp(),
                fraction: *c as f64 / total,
            });
        }
    }
    TailReport { norms, histogram }
}

// Stream function ----------------------------------------------------------

/// Conjugate field reconstruction: nodal stream values and the
/// path-dependence diagnostic.
#[derive(Debug, Clone)]
pub struct StreamReport {
    /// Nodal stream function, normalized to v(0, 0) = 0.
    pub values: Vec<f64>,
    /// Largest plaquette circulation of the rotated flux (discrete curl
    /// defect; zero means the reconstruction is path-independent).
    pub max_circulation: f64,
    /// Root-mean-square circulation over interior nodes.
    pub rms_circulation: f64,
}

/// Integrates grad v = J sigma grad u along a serpentine grid path and
/// reports how path-dependent the field is: the circulation of the
/// rotated flux around each interior node's four-cell plaquette.
pub fn stream_reconstruct(sol: &FieldSolution) -> StreamReport {
    let n = sol.n;
    let nn = n + 1;
    let h = sol.h;
    // Rotated flux per cell: grad v = J flux = (-f2, f1).
    let rot: Vec<[f64; 2]> = sol.flux.iter().map(|f| [-f[1], f[0]]).collect();
    let cell = |cx: usize, cy: usize| rot[cy * n + cx];

    let mut vals = vec![0.0; nn * nn];
    for iy in 0..nn {
        if iy > 0 {
            // Step up at the serpentine turn column.
            let ix = if iy % 2 == 1 { n } else { 0 };
            let c = if ix >= 1 { cell(ix - 1, iy - 1) } else { cell(0, iy - 1) };
            vals[iy * nn + ix] = vals[(iy - 1) * nn + ix] + h * c[1];
        }
        if iy % 2 == 0 {
            for ix in 1..nn {
                let c = if iy >= 1 { cell(ix - 1, iy - 1) } else { cell(ix - 1, 0) };
                vals[iy * nn + ix] = vals[iy * nn + ix - 1] + h * c[0];
            }
        } else {
            for ix in (0..n).rev() {
                let c = if iy >= 1 { cell(ix, iy - 1) } else { cell(ix, 0) };
                vals[iy * nn + ix] = vals[iy * nn + ix + 1] - h * c[0];
            }
        }
    }

    let mut max_c = 0.0f64;
    let mut sum_sq = Kahan::new();
    let mut count = 0usize;
    for iy in 1..n {
        for ix in 1..n {
            let sw = cell(ix - 1, iy - 1);
            let se = cell(ix, iy - 1);
            let nw = cell(ix - 1, iy);
            let ne = cell(ix, iy);
            // Circulation around the loop through the four cell centers.
            let circ = 0.5
                * h
                * ((se[1] + ne[1]) - (sw[1] + nw[1]) + (sw[0] + se[0]) - (nw[0] + ne[0]));
            max_c = max_c.max(circ.abs());
            sum_sq.add(circ * circ);
            count += 1;
        }
    }
    let rms = if count > 0 {
        (sum_sq.value() / count as f64).sqrt()
    } else {
        0.0
    };
    StreamReport {
        values: vals,
        max_circulation: max_c,
        rms_circulation: rms,
    }
}

// Refinement studies --------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RefinementRow {
    pub n: usize,
    pub iterations: usize,
    pub residual: f64,
    pub norms: Vec<PNorm>,
    pub mean_flux: [f64; 2],
    pub max_gradient: f64,
}

/// Solves the same continuum problem on each mesh in `sizes` and tabulates
/// norms and flux readouts. The geometry must divide evenly into every
/// requested n.
pub fn refinement_study(
    geometry: Geometry,
    tp: &TwoPhase,
    v: [f64; 2],
    sizes: &[usize],
    exponents: &[f64],
) -> Result<Vec<RefinementRow>> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let grid = PhaseGrid::new(geometry, n, tp.clone())?;
        let sol = solve(&grid, v)?;
        rows.push(RefinementRow {
            n,
            iterations: sol.stats.iterations,
            residual: sol.stats.residual,
            norms: exponents
                .iter()
                .map(|p| PNorm {
                    p: *p,
                    value: sol.lp_norm(*p),
                })
                .collect(),
            mean_flux: sol.mean_flux(),
            max_gradient: sol.max_gradient(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_phase(sigma: Mat2) -> TwoPhase {
        TwoPhase::new(sigma, sigma).unwrap()
    }

    fn board8(n: usize, tp: TwoPhase) -> PhaseGrid {
        PhaseGrid::new(Geometry::Checkerboard { tiles: 8 }, n, tp).unwrap()
    }

    #[test]
    fn grid_validation() {
        let tp = single_phase(Mat2::IDENTITY);
        assert!(PhaseGrid::new(Geometry::Checkerboard { tiles: 8 }, 4, tp.clone()).is_err());
        assert!(PhaseGrid::new(Geometry::Checkerboard { tiles: 3 }, 16, tp.clone()).is_err());
        assert!(PhaseGrid::new(
            Geometry::Layers {
                periods: 4,
                normal: Axis::X,
                fraction: 1.2
            },
            16,
            tp.clone()
        )
        .is_err());
        let g = PhaseGrid::new(
            Geometry::Layers {
                periods: 4,
                normal: Axis::X,
                fraction: 0.5,
            },
            16,
            tp.clone(),
        )
        .unwrap();
        assert!((g.volume_fraction() - 0.5).abs() < 1e-15);
        assert_eq!(g.label(0, 0), 1);
        assert_eq!(g.label(2, 0), 2, "second half of the first period is phase 2");
        assert_eq!(g.label(2, 9), 2, "labels must not vary along the layer");
        let r = PhaseGrid::new(Geometry::Random { fraction: 0.5, seed: 9 }, 16, tp).unwrap();
        let f = r.volume_fraction();
        assert!(f > 0.3 && f < 0.7, "fraction {f} wildly off the target 0.5");
    }

    #[test]
    fn patch_test_is_exact() {
        let grid = board8(16, single_phase(Mat2::IDENTITY));
        let sol = solve(&grid, [1.0, 0.0]).unwrap();
        assert_eq!(sol.stats.iterations, 0, "affine guess must already solve it");
        for iy in 0..=16 {
            for ix in 0..=16 {
                let want = ix as f64 / 16.0;
                assert!(
                    (sol.node_u(ix, iy) - want).abs() < 1e-12,
                    "u({ix},{iy}) = {} but the exact solution is x = {want}",
                    sol.node_u(ix, iy)
                );
            }
        }
        for cy in 0..16 {
            for cx in 0..16 {
                let g = sol.cell_gradient(cx, cy);
                assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn patch_test_nonsymmetric_sigma() {
        // Constant non-symmetric coefficients still admit the affine
        // solution; this exercises the BiCGSTAB branch.
        let sigma = Mat2::new(1.5, 0.8, -0.4, 0.9);
        let grid = board8(16, single_phase(sigma));
        let sol = solve(&grid, [0.7, -0.3]).unwrap();
        assert_eq!(sol.stats.iterations, 0);
        let g = sol.cell_gradient(7, 3);
        assert!((g[0] - 0.7).abs() < 1e-12 && (g[1] + 0.3).abs() < 1e-12);
        let f = sol.cell_flux(7, 3);
        let want = sigma.mul_vec(&[0.7, -0.3]);
        assert!((f[0] - want[0]).abs() < 1e-12 && (f[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn mean_gradient_equals_boundary_direction() {
        let tp = TwoPhase::new(Mat2::diag(2.0, 0.5), Mat2::diag(0.5, 2.0)).unwrap();
        let grid = board8(16, tp);
        let sol = solve(&grid, [1.0, 0.5]).unwrap();
        let mg = sol.mean_gradient();
        assert!(
            (mg[0] - 1.0).abs() < 1e-10 && (mg[1] - 0.5).abs() < 1e-10,
            "mean gradient {mg:?} should equal the affine direction"
        );
    }

    #[test]
    fn layered_flux_matches_harmonic_mean() {
        // Layers normal to x, phases diag(2, 0.5) and diag(0.5, 2),
        // half and half: flow across the layers sees the harmonic mean
        // of the sigma_11 entries, 1/(0.5/2 + 0.5/0.5) = 0.8.
        let tp = TwoPhase::new(Mat2::diag(2.0, 0.5), Mat2::diag(0.5, 2.0)).unwrap();
        let grid = PhaseGrid::new(
            Geometry::Layers {
                periods: 4,
                normal: Axis::X,
                fraction: 0.5,
            },
            32,
            tp,
        )
        .unwrap();
        let sol = solve(&grid, [1.0, 0.0]).unwrap();
        let f = sol.block_mean_flux(0.25, 0.75);
        assert!(
            (f[0] - 0.8).abs() < 0.04 * 0.8,
            "mid-block flux {} strays from the harmonic mean 0.8",
            f[0]
        );
    }

    #[test]
    fn checkerboard_effective_is_geometric_mean() {
        // Isotropic half-half checkerboard: effective conductivity is
        // sqrt(2 * 0.5) = 1 by the classical duality argument.
        let tp = TwoPhase::new(Mat2::diag(2.0, 2.0), Mat2::diag(0.5, 0.5)).unwrap();
        let grid = board8(32, tp);
        let sol = solve(&grid, [1.0, 0.0]).unwrap();
        let eff = sol.mean_flux()[0];
        assert!(
            (eff - 1.0).abs() < 0.1,
            "effective conductivity {eff} far from the duality value 1"
        );
    }

    #[test]
    fn affine_tail_is_flat() {
        let grid = board8(8, single_phase(Mat2::diag(3.0, 0.5)));
        let sol = solve(&grid, [0.6, 0.8]).unwrap();
        let tail = gradient_tail(&sol, &[2.0, 3.0, 4.0]);
        for row in &tail.norms {
            assert!(
                (row.value - 1.0).abs() < 1e-12,
                "L^{} norm {} should equal |v| = 1",
                row.p,
                row.value
            );
        }
        let total: f64 = tail.histogram.iter().map(|b| b.fraction).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stream_of_affine_solution_is_exact() {
        let grid = board8(8, single_phase(Mat2::IDENTITY));
        let sol = solve(&grid, [1.0, 0.0]).unwrap();
        let stream = stream_reconstruct(&sol);
        assert!(stream.max_circulation < 1e-13);
        // grad v = J grad u = (0, 1), so v = y up to the pinned corner.
        for iy in 0..=8 {
            for ix in 0..=8 {
                let want = iy as f64 / 8.0;
                let got = stream.values[iy * 9 + ix];
                assert!(
                    (got - want).abs() < 1e-12,
                    "stream({ix},{iy}) = {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn stream_circulation_shrinks_under_refinement() {
        let tp = TwoPhase::new(Mat2::diag(2.0, 0.5), Mat2::diag(0.5, 2.0)).unwrap();
        let mut rms = Vec::new();
        for n in [16usize, 32] {
            let grid = PhaseGrid::new(
                Geometry::Layers {
                    periods: 4,
                    normal: Axis::X,
                    fraction: 0.5,
                },
                n,
                tp.clone(),
            )
            .unwrap();
            let sol = solve(&grid, [1.0, 0.0]).unwrap();
            rms.push(stream_reconstruct(&sol).rms_circulation);
        }
        assert!(
            rms[1] < 0.75 * rms[0],
            "circulation failed to shrink first order: {rms:?}"
        );
    }

    #[test]
    fn refinement_study_single_phase_is_constant() {
        let tp = single_phase(Mat2::diag(1.5, 0.5));
        let rows = refinement_study(
            Geometry::Checkerboard { tiles: 4 },
            &tp,
            [1.0, 0.0],
            &[8, 16],
            &[2.0, 4.0],
        )
        .unwrap();
        for p_idx in 0..2 {
            let a = rows[0].norms[p_idx].value;
            let b = rows[1].norms[p_idx].value;
            assert!(
                (a - b).abs() < 1e-10,
                "single-phase norms must not move under refinement: {a} vs {b}"
            );
        }
    }

    #[test]
    fn field_csv_has_one_row_per_cell() {
        let grid = board8(8, single_phase(Mat2::IDENTITY));
        let sol = solve(&grid, [1.0, 0.0]).unwrap();
        let csv = sol.field_csv();
        assert_eq!(csv.lines().count(), 1 + 64);
        assert!(csv.starts_with("x,y,u,ux,uy,phase\n"));
    }
}
