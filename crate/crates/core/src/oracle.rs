//! Small fixed-dimension Nelder-Mead minimizer.
//!
//! Used as an independent numeric check on the closed-form distortion
//! minimization: the objective there is a max of eigenvalue products over
//! a 6-parameter matrix-group chart, non-smooth along the switching set,
//! so a simplex method with deterministic restarts is a better fit than
//! anything gradient-based. No randomness: given the same start points it
//! always walks the same path.

/// Reflection/expansion/contraction/shrink coefficients plus stopping
/// controls. Defaults are the textbook values.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Reflection coefficient.
    pub alpha: f64,
    /// Expansion coefficient.
    pub gamma: f64,
    /// Contraction coefficient.
    pub rho: f64,
    /// Shrink coefficient.
    pub sigma: f64,
    /// Stop when the simplex f-spread falls below f_tol * (|f_best| + f_tol).
    pub f_tol: f64,
    /// Hard cap on objective evaluations for this run.
    pub max_evals: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            alpha: 1.0,
            gamma: 2.0,
            rho: 0.5,
            sigma: 0.5,
            f_tol: 1e-13,
            max_evals: 5_000,
        }
    }
}

/// Outcome of one simplex run.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadResult<const N: usize> {
    pub x: [f64; N],
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimizes `f` starting from `x0` with an axis-aligned initial simplex
/// of edge `scale`.
pub fn nelder_mead<const N: usize>(
    mut f: impl FnMut(&[f64; N]) -> f64,
    x0: [f64; N],
    scale: f64,
    opts: &NelderMeadOptions,
) -> NelderMeadResult<N> {
    let mut evals = 0usize;
    let mut eval = |x: &[f64; N], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    // Simplex as N+1 (point, value) pairs, kept sorted by value.
    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0, f0));
    for i in 0..N {
        let mut x = x0;
        x[i] += scale;
        let fx = eval(&x, &mut evals);
        simplex.push((x, fx));
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut converged = false;
    while evals < opts.max_evals {
        let best = simplex[0].1;
        let worst = simplex[N].1;
        if worst - best <= opts.f_tol * (best.abs() + opts.f_tol) {
            converged = true;
            break;
        }

        // Centroid of all but the worst point.
        let mut centroid = [0.0; N];
        for (x, _) in simplex.iter().take(N) {
            for i in 0..N {
                centroid[i] += x[i];
            }
        }
        for c in centroid.iter_mut() {
            *c /= N as f64;
        }

        let worst_x = simplex[N].0;
        let blend = |a: f64| {
            let mut x = [0.0; N];
            for i in 0..N {
                x[i] = centroid[i] + a * (centroid[i] - worst_x[i]);
            }
            x
        };

        let xr = blend(opts.alpha);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = blend(opts.alpha * opts.gamma);
            let fe = eval(&xe, &mut evals);
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
        } else {
            // Contract outside or inside depending on where fr landed.
            let (xc, fc) = if fr < simplex[N].1 {
                let xc = blend(opts.alpha * opts.rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = blend(-opts.rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[N].1.min(fr) {
                simplex[N] = (xc, fc);
            } else {
                // Shrink toward the best point.
                let x_best = simplex[0].0;
                for j in 1..=N {
                    let mut x = [0.0; N];
                    for i in 0..N {
                        x[i] = x_best[i] + opts.sigma * (simplex[j].0[i] - x_best[i]);
                    }
                    let fx = eval(&x, &mut evals);
                    simplex[j] = (x, fx);
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    }

    NelderMeadResult {
        x: simplex[0].0,
        f: simplex[0].1,
        evals,
        converged,
    }
}

/// Ordinary least squares for y = a + b x. Returns (a, b).
///
/// Two or more points required, not all at the same x; used for the
/// log-log slope and log-growth diagnostics, where the data is tiny and
/// a plain normal-equation solve is exact enough.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len(), "mismatched fit data");
    assert!(xs.len() >= 2, "need at least two points");
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    assert!(sxx > 0.0, "fit data has no x spread");
    let b = sxy / sxx;
    (mean_y - b * mean_x, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_an_exact_line() {
        let xs = [1.0, 2.0, 4.0, 8.5];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 - 0.75 * x).collect();
        let (a, b) = linear_fit(&xs, &ys);
        assert!((a - 2.5).abs() < 1e-12 && (b + 0.75).abs() < 1e-12);
    }

    #[test]
    fn minimizes_a_shifted_quadratic() {
        let f = |x: &[f64; 2]| (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2) + 5.0;
        let r = nelder_mead(f, [0.0, 0.0], 0.5, &NelderMeadOptions::default());
        assert!(r.converged, "no convergence in {} evals", r.evals);
        assert!((r.x[0] - 3.0).abs() < 1e-5 && (r.x[1] + 1.0).abs() < 1e-5);
        assert!((r.f - 5.0).abs() < 1e-9);
    }

    #[test]
    fn handles_a_nonsmooth_max_objective() {
        // Kink along x = y; minimum 1 at the origin.
        let f = |x: &[f64; 2]| (x[0].abs()).max(x[1].abs()) + 1.0;
        let first = nelder_mead(f, [2.0, -1.3], 0.7, &NelderMeadOptions::default());
        // Polish from the first answer with a small fresh simplex.
        let r = nelder_mead(f, first.x, 1e-4, &NelderMeadOptions::default());
        assert!((r.f - 1.0).abs() < 1e-6, "f = {}", r.f);
    }

    #[test]
    fn respects_the_evaluation_budget() {
        let opts = NelderMeadOptions {
            max_evals: 20,
            ..NelderMeadOptions::default()
        };
        let r = nelder_mead(
            |x: &[f64; 4]| x.iter().map(|v| v * v).sum::<f64>(),
            [1.0; 4],
            0.1,
            &opts,
        );
        assert!(!r.converged);
        assert!(r.evals <= 25, "evals = {} blew past the cap", r.evals);
    }

    #[test]
    fn is_deterministic() {
        let f = |x: &[f64; 3]| {
            (x[0] - 0.5).powi(2) + (x[1] * x[1] - x[2]).powi(2) + x[2].abs().sqrt()
        };
        let a = nelder_mead(f, [1.0, -2.0, 0.3], 0.25, &NelderMeadOptions::default());
        let b = nelder_mead(f, [1.0, -2.0, 0.3], 0.25, &NelderMeadOptions::default());
        assert_eq!(a.x, b.x);
        assert_eq!(a.f.to_bits(), b.f.to_bits());
        assert_eq!(a.evals, b.evals);
    }
}
