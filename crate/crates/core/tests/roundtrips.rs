//! Conversion round-trips and ellipticity bound sweeps on seeded random
//! matrices. The full-size sweeps live in the acceptance suite; these runs
//! are sized to stay fast under `cargo test` while still walking every
//! branch (symmetric, non-symmetric, near-degenerate).

use beltramikit::ellipticity::{distortion_k, ell, k_bounds};
use beltramikit::sampling::{random_elliptic, rng};
use beltramikit::translate::{
    gh_from_sigma, gh_to_munu, munu_to_gh, munu_to_sigma, sigma_from_gh, sigma_to_munu,
};
use beltramikit::Mat2;

const SWEEP: usize = 20_000;

fn rel_mat(a: &Mat2, b: &Mat2) -> f64 {
    a.max_abs_diff(b) / (1.0 + a.frob().max(b.frob()))
}

#[test]
fn sigma_munu_sigma_round_trip() {
    let mut r = rng(0x5157_0001);
    let mut worst = 0.0f64;
    for i in 0..SWEEP {
        let sigma = random_elliptic(&mut r, 0.05);
        let pair = sigma_to_munu(&sigma)
            .unwrap_or_else(|e| panic!("draw {i}: sigma_to_munu failed on {sigma:?}: {e}"));
        let back = munu_to_sigma(&pair)
            .unwrap_or_else(|e| panic!("draw {i}: munu_to_sigma failed: {e}"));
        let err = rel_mat(&sigma, &back);
        worst = worst.max(err);
        assert!(
            err <= 1e-11,
            "draw {i}: sigma -> (mu, nu) -> sigma drifted by {err:.3e} on {sigma:?}"
        );
    }
    println!("sigma<->munu worst relative drift over {SWEEP} draws: {worst:.3e}");
}

#[test]
fn sigma_gh_sigma_round_trip() {
    let mut r = rng(0x5157_0002);
    let mut worst = 0.0f64;
    for i in 0..SWEEP {
        let sigma = random_elliptic(&mut r, 0.05);
        let gh = gh_from_sigma(&sigma)
            .unwrap_or_else(|e| panic!("draw {i}: gh_from_sigma failed on {sigma:?}: {e}"));
        let back = sigma_from_gh(&gh)
            .unwrap_or_else(|e| panic!("draw {i}: sigma_from_gh failed: {e}"));
        let err = rel_mat(&sigma, &back);
        worst = worst.max(err);
        assert!(
            err <= 1e-11,
            "draw {i}: sigma -> (G, H) -> sigma drifted by {err:.3e} on {sigma:?}"
        );
    }
    println!("sigma<->GH worst relative drift over {SWEEP} draws: {worst:.3e}");
}

#[test]
fn munu_gh_munu_round_trip() {
    let mut r = rng(0x5157_0003);
    let mut worst = 0.0f64;
    for i in 0..SWEEP {
        let sigma = random_elliptic(&mut r, 0.05);
        let pair = sigma_to_munu(&sigma).expect("elliptic sigma always converts");
        let gh = munu_to_gh(&pair)
            .unwrap_or_else(|e| panic!("draw {i}: munu_to_gh failed on {pair:?}: {e}"));
        let back = gh_to_munu(&gh)
            .unwrap_or_else(|e| panic!("draw {i}: gh_to_munu failed: {e}"));
        let err = ((pair.mu.re - back.mu.re).powi(2)
            + (pair.mu.im - back.mu.im).powi(2)
            + (pair.nu.re - back.nu.re).powi(2)
            + (pair.nu.im - back.nu.im).powi(2))
        .sqrt()
            / (1.0 + pair.k());
        worst = worst.max(err);
        assert!(
            err <= 1e-11,
            "draw {i}: (mu, nu) -> (G, H) -> (mu, nu) drifted by {err:.3e} on {pair:?}"
        );
    }
    println!("munu<->GH worst relative drift over {SWEEP} draws: {worst:.3e}");
}

#[test]
fn distortion_respects_class_bound_on_sweep() {
    let mut r = rng(0x5157_0004);
    for i in 0..SWEEP {
        let sigma = random_elliptic(&mut r, 0.02);
        let lambda = ell(&sigma)
            .unwrap_or_else(|e| panic!("draw {i}: ell rejected its own sample {sigma:?}: {e}"));
        let k = distortion_k(&sigma)
            .unwrap_or_else(|e| panic!("draw {i}: distortion_k failed on {sigma:?}: {e}"));
        let (k_lambda, k_sym) = k_bounds(lambda).expect("lambda in (0, 1]");
        assert!(
            k <= k_lambda + 1e-9,
            "draw {i}: distortion {k:.15} beats the class bound {k_lambda:.15} at lambda={lambda:.15} for {sigma:?}"
        );
        if sigma.is_symmetric(1e-12) {
            assert!(
                k <= k_sym + 1e-9,
                "draw {i}: symmetric distortion {k:.15} beats 1/lambda = {k_sym:.15} for {sigma:?}"
            );
        }
    }
}

#[test]
fn symmetric_subsample_respects_tighter_bound() {
    // Symmetrize each draw to exercise the 1/lambda branch densely.
    let mut r = rng(0x5157_0005);
    for i in 0..SWEEP / 2 {
        let raw = random_elliptic(&mut r, 0.05);
        let sigma = Mat2::new(
            raw.a11,
            0.5 * (raw.a12 + raw.a21),
            0.5 * (raw.a12 + raw.a21),
            raw.a22,
        );
        let Ok(lambda) = ell(&sigma) else {
            continue; // symmetrizing can lose positivity for wild skew parts
        };
        let k = distortion_k(&sigma).expect("elliptic after ell() succeeded");
        assert!(
            k <= 1.0 / lambda + 1e-9,
            "draw {i}: symmetric distortion {k:.15} beats 1/lambda = {:.15} for {sigma:?}",
            1.0 / lambda
        );
    }
}
