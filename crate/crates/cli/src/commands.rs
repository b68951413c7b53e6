//! The four subcommands. Each builds the run-manifest JSON and writes any
//! data files; main() prints the manifest and maps errors to exit codes.

use beltramikit::ellipticity::{ellipticity_report, p_exponent, EllipticityReport};
use beltramikit::fieldlab::{self, PhaseGrid};
use beltramikit::kmin::{self, TwoPhase};
use beltramikit::laminate::{self, ConeSpec};
use beltramikit::sampling;
use beltramikit::{milton, Mat2};
use serde_json::{json, Value};
use std::fs;
use std::path::Path;

use crate::input::{
    csv_escape, exponent_json, flatten_json, fmt17, mat_json, obj, SolveConfig,
};
use crate::{CliError, Format};

// Shared plumbing ---------------------------------------------------------

fn manifest(command: &str, input: Value, results: Value, outputs: &[String]) -> Value {
    obj(vec![
        ("command", json!(command)),
        ("version", json!(env!("CARGO_PKG_VERSION"))),
        ("threads", crate::threads_json()),
        ("input", input),
        ("results", results),
        ("outputs", json!(outputs)),
        ("wall_time_ms", Value::Null),
    ])
}

fn write_out(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)
                .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    fs::write(path, content)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value always serializes");
    s.push('\n');
    s
}

/// key,value CSV rendering of a report object.
fn report_csv(v: &Value) -> String {
    let mut rows = Vec::new();
    flatten_json("", v, &mut rows);
    let mut out = String::from("key,value\n");
    for (k, val) in rows {
        out.push_str(&format!("{},{}\n", csv_escape(&k), csv_escape(&val)));
    }
    out
}

/// Exponent label for a CSV header: shortest lossless decimal.
fn exp_label(p: f64) -> String {
    format!("{p}")
}

// analyze -----------------------------------------------------------------

fn phase_json(r: &EllipticityReport) -> Value {
    obj(vec![
        ("lambda", json!(r.lambda)),
        ("k", json!(r.k)),
        ("distortion", json!(r.distortion)),
        ("p_k", exponent_json(r.p_k)),
        ("k_lambda", json!(r.k_lambda)),
        ("k_lambda_sym", json!(r.k_lambda_sym)),
        ("attainment", json!(format!("{:?}", r.attains_bound))),
    ])
}

pub fn analyze(
    s1: Mat2,
    s2: Mat2,
    budget: usize,
    out: Option<&Path>,
    format: Format,
) -> Result<Value, CliError> {
    let rep1 = ellipticity_report(&s1)?;
    let rep2 = ellipticity_report(&s2)?;
    let report = kmin::classify_critical(&s1, &s2)?;
    let tp = TwoPhase::new(s1, s2)?;
    let normalized = kmin::kmin_normalized(&tp);
    let oracle = kmin::kmin_numeric_oracle(&tp, budget);
    let symmetrized = milton::symmetrize(&tp).ok();

    let rel = |x: f64| (x - report.kmin).abs() / report.kmin;
    let pair = obj(vec![
        ("lambda", json!(tp.lambda())),
        ("k", json!(report.k)),
        ("khat", json!(report.khat)),
        ("kmin", json!(report.kmin)),
        ("kmin_normalized", json!(normalized)),
        ("kmin_oracle", json!(oracle.kmin)),
        ("oracle_converged", json!(oracle.converged)),
        ("oracle_evals", json!(oracle.evals)),
        ("rel_gap_normalized", json!(rel(normalized))),
        ("rel_gap_oracle", json!(rel(oracle.kmin))),
        ("m", json!(report.m)),
        ("n", json!(report.n)),
        ("p_kmin", exponent_json(report.p_kmin)),
        (
            "critical_class",
            json!(format!("{:?}", report.critical_class)),
        ),
        (
            "diag_a",
            report.diag_a.as_ref().map(mat_json).unwrap_or(Value::Null),
        ),
        (
            "diag_b",
            report.diag_b.as_ref().map(mat_json).unwrap_or(Value::Null),
        ),
        (
            "symmetrized",
            match &symmetrized {
                Some((a, t1, t2)) => obj(vec![
                    ("a", mat_json(a)),
                    ("sigma1", mat_json(t1)),
                    ("sigma2", mat_json(t2)),
                ]),
                None => Value::Null,
            },
        ),
    ]);
    let results = obj(vec![
        ("phase1", phase_json(&rep1)),
        ("phase2", phase_json(&rep2)),
        ("pair", pair),
    ]);
    let input = obj(vec![
        ("sigma1", mat_json(&s1)),
        ("sigma2", mat_json(&s2)),
        ("budget", json!(budget)),
    ]);
    let outputs: Vec<String> = out
        .map(|p| vec![p.file_name().unwrap_or_default().to_string_lossy().into_owned()])
        .unwrap_or_default();
    let man = manifest("analyze", input, results, &outputs);
    if let Some(path) = out {
        let body = match format {
            Format::Json => pretty(&man),
            Format::Csv => report_csv(&man),
        };
        write_out(path, &body)?;
    }
    Ok(man)
}

// laminate ----------------------------------------------------------------

pub fn laminate_cmd(
    k: f64,
    n: usize,
    eps: f64,
    out: &Path,
    format: Format,
) -> Result<Value, CliError> {
    if !k.is_finite() || k <= 1.0 {
        return Err(CliError::input("--k must be a finite number > 1".into()));
    }
    let eps_cap = laminate::epsilon_max(k)?;
    if !(0.0..eps_cap).contains(&eps) {
        return Err(CliError::input(format!(
            "--eps {eps} outside [0, {eps_cap:.16}) for K = {k}"
        )));
    }
    let cap = laminate::delta_max(k, 1.0, 1.0)?;
    let spec = ConeSpec::new(k, 0.5 * cap, 1.0, 1.0)?;
    let lam = laminate::staircase(&spec, n, eps)?;
    lam.validate()
        .map_err(|e| CliError::internal(format!("staircase failed self-validation: {e}")))?;

    let pk = p_exponent(k);
    let exponents = vec![2.0, pk - 0.5, pk - 0.2, pk];
    let trace = laminate::staircase_trace(&spec, n, eps, &exponents)?;

    fs::create_dir_all(out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", out.display())))?;
    let mut outputs = Vec::new();
    write_out(&out.join("tree.json"), &lam.to_json())?;
    outputs.push("tree.json".to_string());
    write_out(&out.join("atoms.csv"), &lam.atoms_csv())?;
    outputs.push("atoms.csv".to_string());

    let moments_name = match format {
        Format::Csv => "moments.csv",
        Format::Json => "moments.json",
    };
    let moments_body = match format {
        Format::Csv => {
            let mut s = String::from("k,weight,barycenter_defect");
            for &p in &exponents {
                s.push_str(&format!(",m_{}", exp_label(p)));
            }
            s.push('\n');
            for stage in &trace.stages {
                s.push_str(&format!(
                    "{},{},{}",
                    stage.k,
                    fmt17(stage.weight),
                    fmt17(stage.barycenter_defect)
                ));
                for &m in &stage.moments {
                    s.push_str(&format!(",{}", fmt17(m)));
                }
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let stages: Vec<Value> = trace
                .stages
                .iter()
                .map(|st| {
                    obj(vec![
                        ("k", json!(st.k)),
                        ("weight", json!(st.weight)),
                        ("barycenter_defect", json!(st.barycenter_defect)),
                        ("moments", json!(st.moments)),
                    ])
                })
                .collect();
            pretty(&obj(vec![
                ("exponents", json!(exponents)),
                ("stages", Value::Array(stages)),
            ]))
        }
    };
    write_out(&out.join(moments_name), &moments_body)?;
    outputs.push(moments_name.to_string());

    let last = trace.stages.last();
    let results = obj(vec![
        ("atoms", json!(lam.atoms().len())),
        ("nodes", json!(lam.node_count())),
        ("stages", json!(trace.stages.len())),
        ("p_k", exponent_json(pk)),
        ("exponents", json!(exponents)),
        ("delta", json!(spec.delta())),
        (
            "epsilon_max",
            json!(laminate::epsilon_max(k).unwrap_or(f64::NAN)),
        ),
        (
            "final_stage",
            match last {
                Some(st) => obj(vec![
                    ("k", json!(st.k)),
                    ("weight", json!(st.weight)),
                    ("moments", json!(st.moments)),
                ]),
                None => Value::Null,
            },
        ),
    ]);
    let input = obj(vec![
        ("k", json!(k)),
        ("n", json!(n)),
        ("eps", json!(eps)),
    ]);
    outputs.push("manifest.json".to_string());
    let man = manifest("laminate", input, results, &outputs);
    write_out(&out.join("manifest.json"), &pretty(&man))?;
    Ok(man)
}

// solve ---------------------------------------------------------------

pub fn solve_cmd(cfg: &SolveConfig, out: &Path, format: Format) -> Result<Value, CliError> {
    let tp = TwoPhase::new(cfg.sigma1, cfg.sigma2)?;
    fs::create_dir_all(out)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", out.display())))?;
    let mut outputs = Vec::new();
    let mut rows_json: Vec<Value> = Vec::new();
    let mut finest_hist: Option<(usize, Value)> = None;

    let mut csv = String::from("n,iterations,residual,max_gradient,mean_flux_x,mean_flux_y,max_circulation,rms_circulation");
    for &p in &cfg.exponents {
        csv.push_str(&format!(",lp_{}", exp_label(p)));
    }
    csv.push('\n');

    for &n in &cfg.sizes {
        let grid = PhaseGrid::new(cfg.geometry, n, tp.clone())?;
        let sol = fieldlab::solve(&grid, cfg.v)?;
        let tail = fieldlab::gradient_tail(&sol, &cfg.exponents);
        let stream = fieldlab::stream_reconstruct(&sol);
        if cfg.dump_fields {
            let name = format!("field_{n}.csv");
            write_out(&out.join(&name), &sol.field_csv())?;
            outputs.push(name);
        }
        let flux = sol.mean_flux();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            n,
            sol.stats.iterations,
            fmt17(sol.stats.residual),
            fmt17(sol.max_gradient()),
            fmt17(flux[0]),
            fmt17(flux[1]),
            fmt17(stream.max_circulation),
            fmt17(stream.rms_circulation)
        ));
        for pn in &tail.norms {
            csv.push_str(&format!(",{}", fmt17(pn.value)));
        }
        csv.push('\n');
        rows_json.push(obj(vec![
            ("n", json!(n)),
            ("iterations", json!(sol.stats.iterations)),
            ("residual", json!(sol.stats.residual)),
            ("max_gradient", json!(sol.max_gradient())),
            ("mean_flux", json!(flux)),
            ("max_circulation", json!(stream.max_circulation)),
            ("rms_circulation", json!(stream.rms_circulation)),
            (
                "norms",
                Value::Array(
                    tail.norms
                        .iter()
                        .map(|pn| obj(vec![("p", json!(pn.p)), ("value", json!(pn.value))]))
                        .collect(),
                ),
            ),
        ]));
        finest_hist = Some((
            n,
            Value::Array(
                tail.histogram
                    .iter()
                    .map(|b| {
                        obj(vec![
                            ("lo", json!(b.lo)),
                            ("hi", json!(b.hi)),
                            ("fraction", json!(b.fraction)),
                        ])
                    })
                    .collect(),
            ),
        ));
    }

    let norms_name = match format {
        Format::Csv => "norms.csv",
        Format::Json => "norms.json",
    };
    let norms_body = match format {
        Format::Csv => csv,
        Format::Json => pretty(&Value::Array(rows_json.clone())),
    };
    write_out(&out.join(norms_name), &norms_body)?;
    outputs.push(norms_name.to_string());

    let (hist_n, hist) = finest_hist.expect("sizes is non-empty by construction");
    let results = obj(vec![
        ("rows", Value::Array(rows_json)),
        (
            "histogram",
            obj(vec![("n", json!(hist_n)), ("bins", hist)]),
        ),
    ]);
    let input = obj(vec![
        ("sigma1", mat_json(&cfg.sigma1)),
        ("sigma2", mat_json(&cfg.sigma2)),
        (
            "geometry",
            serde_json::to_value(cfg.geometry).expect("geometry serializes"),
        ),
        ("v", json!(cfg.v)),
        ("sizes", json!(cfg.sizes)),
        ("exponents", json!(cfg.exponents)),
        ("dump_fields", json!(cfg.dump_fields)),
    ]);
    outputs.push("manifest.json".to_string());
    let man = manifest("solve", input, results, &outputs);
    write_out(&out.join("manifest.json"), &pretty(&man))?;
    Ok(man)
}

// verify --------------------------------------------------------------

pub fn verify_cmd(
    input_pairs: Option<Vec<(Mat2, Mat2)>>,
    pairs_n: usize,
    seed: u64,
    budget: usize,
    out: Option<&Path>,
    format: Format,
) -> Result<Value, CliError> {
    let (pairs, input_echo) = match input_pairs {
        Some(list) => {
            let echo: Vec<Value> = list
                .iter()
                .map(|(a, b)| obj(vec![("sigma1", mat_json(a)), ("sigma2", mat_json(b))]))
                .collect();
            (
                list,
                obj(vec![
                    ("pairs", Value::Array(echo)),
                    ("budget", json!(budget)),
                ]),
            )
        }
        None => {
            if pairs_n == 0 {
                return Err(CliError::input("--pairs must be at least 1".into()));
            }
            let mut rng = sampling::rng(seed);
            let list: Vec<(Mat2, Mat2)> = (0..pairs_n)
                .map(|_| sampling::random_elliptic_pair(&mut rng, 0.05))
                .collect();
            (
                list,
                obj(vec![
                    ("sampled", json!(pairs_n)),
                    ("seed", json!(seed)),
                    ("budget", json!(budget)),
                ]),
            )
        }
    };
    if pairs.is_empty() {
        return Err(CliError::input("no pairs to verify".into()));
    }

    let mut csv = String::from(
        "index,kmin_explicit,kmin_normalized,kmin_oracle,rel_gap_normalized,rel_gap_oracle,oracle_converged,oracle_evals\n",
    );
    let mut rows_json: Vec<Value> = Vec::new();
    let mut max_gap_norm = 0.0f64;
    let mut max_gap_oracle = 0.0f64;
    let mut worst = 0usize;
    let mut all_converged = true;
    for (i, (s1, s2)) in pairs.iter().enumerate() {
        let (ke, _m, _n) = kmin::kmin_explicit(s1, s2)?;
        let tp = TwoPhase::new(*s1, *s2)?;
        let kn = kmin::kmin_normalized(&tp);
        let oracle = kmin::kmin_numeric_oracle(&tp, budget);
        let gap_n = (kn - ke).abs() / ke;
        let gap_o = (oracle.kmin - ke).abs() / ke;
        if gap_o > max_gap_oracle {
            max_gap_oracle = gap_o;
            worst = i;
        }
        max_gap_norm = max_gap_norm.max(gap_n);
        all_converged &= oracle.converged;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            i,
            fmt17(ke),
            fmt17(kn),
            fmt17(oracle.kmin),
            fmt17(gap_n),
            fmt17(gap_o),
            oracle.converged,
            oracle.evals
        ));
        rows_json.push(obj(vec![
            ("index", json!(i)),
            ("kmin_explicit", json!(ke)),
            ("kmin_normalized", json!(kn)),
            ("kmin_oracle", json!(oracle.kmin)),
            ("rel_gap_normalized", json!(gap_n)),
            ("rel_gap_oracle", json!(gap_o)),
            ("oracle_converged", json!(oracle.converged)),
            ("oracle_evals", json!(oracle.evals)),
        ]));
    }

    let mut result_fields = vec![
        ("pairs", json!(pairs.len())),
        ("max_rel_gap_normalized", json!(max_gap_norm)),
        ("max_rel_gap_oracle", json!(max_gap_oracle)),
        ("worst_index", json!(worst)),
        ("all_converged", json!(all_converged)),
    ];
    let mut outputs = Vec::new();
    if let Some(path) = out {
        let body = match format {
            Format::Csv => csv,
            Format::Json => pretty(&Value::Array(rows_json)),
        };
        write_out(path, &body)?;
        outputs.push(
            path.file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned(),
        );
    } else {
        result_fields.push(("rows", Value::Array(rows_json)));
    }
    let results = obj(result_fields);
    Ok(manifest("verify", input_echo, results, &outputs))
}
