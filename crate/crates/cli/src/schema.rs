//! Plain-text schema descriptions printed by `--schema`.

pub const MANIFEST: &str = "\
run manifest (stdout, JSON object)
  command       subcommand name
  version       tool version
  input         echo of the parsed inputs (values, never file paths)
  results       command-specific summary (see each subcommand)
  outputs       file names written under --out, in creation order
  wall_time_ms  always null in the manifest so reruns are byte-identical;
                the measured wall time is printed to stderr instead
Matrix entries in any input may be JSON numbers or decimal strings
(\"0.1666666666666667\"). All CSV floats use 17 significant digits.
Exit codes: 0 ok, 2 bad input/usage, 3 not elliptic or out of domain,
4 internal invariant violated, 5 linear solver failure.
";

pub const ANALYZE: &str = "\
analyze --input pair.json | --sigma1 '[[..],[..]]' --sigma2 '[[..],[..]]'
        [--out report.{json,csv}] [--budget N] [--format json|csv]
input file: {\"sigma1\": [[a,b],[c,d]], \"sigma2\": [[a,b],[c,d]]}
results:
  phase1, phase2    per-matrix ellipticity report
    lambda          ellipticity constant ell(sigma)
    k               dilatation gauge |mu| + |nu|
    distortion      K = (1+k)/(1-k)
    p_k             2K/(K-1), \"inf\" when K = 1
    k_lambda        sharp class bound (1 + sqrt(1-lambda^2))/lambda
    k_lambda_sym    symmetric class bound 1/lambda
    attainment      No | NonSymmetricCritical | SymmetricCritical
  pair
    lambda          min of the two ellipticity constants
    k               pointwise distortion max(g1 h1, g2 h2)
    khat            geometric mean sqrt(g1 h1 g2 h2)
    kmin            minimal distortion over SL(2) x SL(2) (closed form)
    kmin_normalized same value via the normalization route
    kmin_oracle     derivative-free numeric minimum
    oracle_converged, oracle_evals
    rel_gap_normalized, rel_gap_oracle   relative gaps to the closed form
    m, n            invariants feeding the closed form
    p_kmin          2 Kmin/(Kmin - 1), \"inf\" when Kmin = 1
    critical_class  NonCritical | NonSymmetricCritical | SymmetricCritical
    diag_a, diag_b  orthogonal diagonalizers when Kmin = Khat, else null
    symmetrized     {a, sigma1, sigma2}: fractional-linear transform
                    making both phases symmetric, else null
--format csv flattens the report into key,value rows.
";

pub const LAMINATE: &str = "\
laminate --k K [--n N] [--eps E] --out DIR [--format json|csv]
Builds the staircase laminate for distortion K: N unit stair steps after
the geometric prologue, optional corner offset E in [0, eps_max(K)).
files:
  tree.json    {nodes: [..], root}: node i is either
               {matrix, t, children: [l, r]} or {matrix, weight};
               weights are the products of split fractions down the tree
  atoms.csv    weight,m11,m12,m21,m22 (one row per leaf)
  moments.csv  stage table: k,weight,barycenter_defect,m_{p} per exponent
               p in {2, p_K - 0.5, p_K - 0.2, p_K}; row k holds the
               p-th moment of the laminate truncated at stair level k
  manifest.json (same object as stdout)
results: atom/node counts, exponents, final-stage moments.
--format csv|json picks the moment table encoding (default csv).
";

pub const SOLVE: &str = "\
solve --input config.json --out DIR [--format json|csv]
config:
  sigma1, sigma2  2x2 conductivities (number-or-string entries)
  geometry        {kind: \"checkerboard\", tiles: T}
                | {kind: \"layers\", periods: P, normal: \"x\"|\"y\", fraction: F}
                | {kind: \"random\", fraction: F, seed: S}
  v               [vx, vy] boundary direction, u = v . x on the boundary
  sizes           mesh sizes, each divisible by the geometry period
                  (default [64])
  exponents       L^p norms to tabulate (default [2, 4])
  dump_fields     write per-cell CSVs (default true)
files:
  field_{n}.csv  x,y,u,ux,uy,phase at cell centers (u averaged to center)
  norms.csv      n,iterations,residual,max_gradient,mean_flux_x,
                 mean_flux_y,max_circulation,rms_circulation,lp_{p}...
  manifest.json
results: the norms table plus a |grad u| histogram for the finest mesh.
--format csv|json picks the norms table encoding (default csv).
";

pub const VERIFY: &str = "\
verify [--input pairs.json] [--pairs N] [--seed S] [--budget B]
       [--out table.{csv,json}] [--format json|csv]
Compares the closed-form minimal distortion against the normalization
route and the derivative-free oracle on N sampled pairs (or on the pairs
in --input, a JSON array of {sigma1, sigma2}).
table columns: index,kmin_explicit,kmin_normalized,kmin_oracle,
  rel_gap_normalized,rel_gap_oracle,oracle_converged,oracle_evals
results: pair count, max relative gaps, worst pair index.
Without --out the rows are embedded in results.rows.
";

pub fn print_schema(which: Option<&str>) {
    println!("{MANIFEST}");
    match which {
        Some("analyze") => println!("{ANALYZE}"),
        Some("laminate") => println!("{LAMINATE}"),
        Some("solve") => println!("{SOLVE}"),
        Some("verify") => println!("{VERIFY}"),
        _ => {
            println!("{ANALYZE}");
            println!("{LAMINATE}");
            println!("{SOLVE}");
            println!("{VERIFY}");
        }
    }
}
