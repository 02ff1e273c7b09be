//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use liact::{run_scenario, Built, RunOptions, Scenario};
use liact_core::fields::graded_bracket_fields;
use liact_core::flows::{completeness_probe, holonomy, integrate_flow, real_point, FlowProblem};
use liact_core::{AlgebraElement, GroupPath, Parity, Route, Supernumber, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SHIPPED: [&str; 11] = [
    "example1",
    "example2",
    "example3",
    "example4",
    "example4_rational",
    "example4_integer",
    "example5",
    "affine",
    "heisenberg",
    "sl2_incomplete",
    "supertranslation",
];

type Outcome = Result<String, String>;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.json"))
}

fn load(name: &str) -> Scenario {
    Scenario::from_json(&fs::read_to_string(scenario_path(name)).expect("shipped scenario")).expect("valid scenario")
}

fn built(name: &str) -> Built {
    load(name).build().expect("scenario builds")
}

fn with_lambda(name: &str, lambda: f64) -> Built {
    let mut s = load(name);
    s.params.insert("lambda".into(), lambda);
    s.build().expect("scenario builds")
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn representation_validation() -> Outcome {
    let mut worst_residual: f64 = 0.0;
    let mut worst_jacobi: f64 = 0.0;
    let mut numeric = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for name in SHIPPED {
        let b = built(name);
        let r = b.rep.validate(8, &mut rng);
        if !r.symbolic {
            numeric.push(name);
        }
        worst_residual = worst_residual.max(r.residual);
        worst_jacobi = worst_jacobi.max(b.sc.check_jacobi().max);
    }
    check(
        worst_residual == 0.0 && numeric.is_empty() && worst_jacobi <= 1e-12,
        format!("max residual {worst_residual:e}, non-symbolic {numeric:?}, max Jacobi {worst_jacobi:e}"),
    )
}

fn rho_round_trip() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["affine", "heisenberg", "example5"] {
        let b = built(name);
        let r = b.engine.recover_rho(50, 1e-4, &mut ChaCha8Rng::seed_from_u64(2)).map_err(|e| e.to_string())?;
        ok &= r.samples == 50 && r.max_deviation <= 1e-6;
        parts.push(format!("{name} {:.2e}", r.max_deviation));
    }
    check(ok, parts.join(", "))
}

fn group_law() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["heisenberg", "affine"] {
        let b = built(name);
        let r = b
            .engine
            .verify_group_law(100, 4, &mut ChaCha8Rng::seed_from_u64(3))
            .map_err(|e| e.to_string())?;
        ok &= r.max_residual <= 1e-8;
        parts.push(format!("{name} {:.2e}", r.max_residual));
    }
    check(ok, parts.join(", "))
}

fn path_independence() -> Outcome {
    let b = built("heisenberg");
    let g = &b.group;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut coords = || -> Vec<f64> { (0..3).map(|_| rng.random_range(-1.0..1.0)).collect() };
    for _ in 0..20 {
        let x = AlgebraElement::from_reals(&coords(), 0);
        let y = AlgebraElement::from_reals(&coords(), 0);
        let m = coords();
        let target = g.exp(&x).map_err(|e| e.to_string())?;
        // exp(y)·exp(z) = exp(x) with z = log(exp(−y)·exp(x))
        let z = g
            .log(&g.multiply(&g.exp(&y.scale(-1.0)).unwrap(), &target).unwrap())
            .map_err(|e| e.to_string())?;
        let routes = [Route::Word(vec![x]), Route::Word(vec![y, z])];
        let spread = b
            .engine
            .path_independence(&target, &routes, &real_point(&m[..2]))
            .map_err(|e| e.to_string())?;
        worst = worst.max(spread);
    }
    check(worst <= 1e-8, format!("max spread over 20 elements {worst:.2e}"))
}

fn incompleteness() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;

    let b = built("example1");
    let unit = [AlgebraElement::from_reals(&[1.0], 0)];
    let r = completeness_probe(&b.rep, &unit, 100.0, &[vec![0.5]], b.sign, b.engine.options()).map_err(|e| e.to_string())?;
    let t = r[0].escape_time.unwrap_or(f64::NAN);
    ok &= !r[0].complete && (t - 0.5).abs() <= 1e-3;
    parts.push(format!("example1 escape {t:.6}"));

    let b = built("sl2_incomplete");
    let dir = [AlgebraElement::from_reals(&[0.0, 0.0, 1.0], 0)];
    for x0 in [0.5, 1.0, 2.0] {
        let r = completeness_probe(&b.rep, &dir, 10.0, &[vec![x0]], b.sign, b.engine.options()).map_err(|e| e.to_string())?;
        let t = r[0].escape_time.unwrap_or(f64::NAN);
        ok &= !r[0].complete && (t - 1.0 / x0).abs() <= 0.01 / x0;
        parts.push(format!("sl2 x0={x0} escape {t:.6}"));
    }

    for name in ["example3", "example5"] {
        let b = built(name);
        let grid: Vec<Vec<f64>> = [-5.0, 0.0, 0.3, 7.0].iter().map(|x| vec![*x]).collect();
        let r = completeness_probe(&b.rep, &unit, 100.0, &grid, b.sign, b.engine.options()).map_err(|e| e.to_string())?;
        ok &= r[0].complete;
        parts.push(format!("{name} complete={}", r[0].complete));
    }
    check(ok, parts.join(", "))
}

fn holonomy_obstruction() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for k in 1..=9 {
        let lambda = k as f64 / 10.0;
        let b = with_lambda("example4", lambda);
        let lp = GroupPath::exp_segment(&b.group, &AlgebraElement::from_reals(&[1.0], 0)).unwrap();
        let h = holonomy(&b.rep, &b.group, &lp, &[0.25], b.sign, b.engine.options()).map_err(|e| e.to_string())?;
        let d = (h.displacement[0] - lambda.rem_euclid(1.0)).abs();
        ok &= !h.trivial && h.winding[0] == 0;
        worst = worst.max(d);
    }
    let mut windings = Vec::new();
    for n in 1..=3 {
        let b = with_lambda("example4", n as f64);
        let lp = GroupPath::exp_segment(&b.group, &AlgebraElement::from_reals(&[1.0], 0)).unwrap();
        let h = holonomy(&b.rep, &b.group, &lp, &[0.25], b.sign, b.engine.options()).map_err(|e| e.to_string())?;
        ok &= h.trivial && h.displacement[0].abs() <= 1e-8 && h.winding[0] == n;
        windings.push(h.winding[0]);
    }
    check(
        ok && worst <= 1e-8,
        format!("fractional displacement error {worst:.2e}, integer windings {windings:?}"),
    )
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).expect("csv exists");
    r.records()
        .map(|rec| rec.expect("csv row").iter().map(|f| f.parse().expect("number")).collect())
        .collect()
}

fn circular(d: f64) -> f64 {
    d - d.round()
}

fn helix_geometry() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = RunOptions {
        out: dir.path().to_path_buf(),
        ..RunOptions::default()
    };
    let mut parts = Vec::new();
    let mut ok = true;

    let out = run_scenario(&scenario_path("example2"), &opts);
    ok &= out.exit_code == 0;
    let rows = read_csv(&dir.path().join("example2_helix.csv"));
    let mut worst: f64 = 0.0;
    for w in rows.windows(2) {
        let dg = circular(w[1][1] - w[0][1]);
        let dm = w[1][2] - w[0][2];
        worst = worst.max((dm / dg - 0.5).abs());
    }
    ok &= rows.len() > 100 && worst <= 1e-6;
    parts.push(format!("cylinder slope error {worst:.2e} over {} rows", rows.len()));

    let out = run_scenario(&scenario_path("example4_rational"), &opts);
    ok &= out.exit_code == 0;
    let rows = read_csv(&dir.path().join("example4_torus.csv"));
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let closure = circular(last[2] - first[2]).abs().max(circular(last[1] - first[1]).abs());
    let winding = out.report.results[2].data["winding"].clone();
    ok &= closure <= 1e-6 && winding == serde_json::json!([3, 2]);
    parts.push(format!("torus closure {closure:.2e}, winding {winding}"));
    check(ok, parts.join(", "))
}

fn odd(n: usize, subset: &[usize]) -> Supernumber {
    Supernumber::monomial(n, subset, 1.0).unwrap()
}

fn super_sector() -> Outcome {
    let b = built("supertranslation");
    let chart = b.rep.chart();
    let (p, d) = (b.rep.field(0), b.rep.field(1));
    let dd = graded_bracket_fields(chart, d, d);
    let two_p = VectorField::combination(chart, Parity::Even, &[(2.0, p)]);
    let bracket_ok = dd == two_p && d.parity() == Parity::Odd;

    // X = τD with τ = θ1 from (x0, θ0) = (0.5 + 3θ3θ4, θ2)
    let n = 4;
    let x0 = &Supernumber::scalar(n, 0.5) + &Supernumber::monomial(n, &[3, 4], 3.0).unwrap();
    let th0 = odd(n, &[2]);
    let tau = odd(n, &[1]);
    let x = AlgebraElement::new(vec![Supernumber::zero(n), tau.clone()]);
    let traj = integrate_flow(&FlowProblem::fixed(&b.rep, x, vec![x0.clone(), th0.clone()], 1.0, 1.0)).map_err(|e| e.to_string())?;
    let end = traj.final_point();
    let want = [&x0 + &(&tau * &th0), &th0 + &tau];
    let exact_ok = end[0] == want[0] && end[1] == want[1];

    // body of a super trajectory with a non-nilpotent direction
    let x = AlgebraElement::new(vec![&Supernumber::scalar(n, 0.7) + &Supernumber::monomial(n, &[1, 2], 0.3).unwrap(), tau]);
    let sup = integrate_flow(&FlowProblem::fixed(&b.rep, x, vec![x0, th0], 1.0, 2.0)).map_err(|e| e.to_string())?;
    let body = integrate_flow(&FlowProblem::fixed_real(&b.rep, &[0.7, 0.0], &[0.5, 0.0], 1.0, 2.0)).map_err(|e| e.to_string())?;
    let body_ok = sup.times() == body.times() && (0..sup.len()).all(|k| sup.body(k) == body.body(k));

    check(
        bracket_ok && exact_ok && body_ok,
        format!(
            "[D,D] = 2P {bracket_ok}, exact flow {exact_ok}, body equality {body_ok} over {} steps",
            sup.len()
        ),
    )
}

fn sign_duality() -> Outcome {
    let b = built("affine");
    let minus = &b.engine;
    let plus = minus.flipped();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let m = [rng.random_range(-2.0..2.0)];
        let g = b.group.exp(&AlgebraElement::from_reals(&c, 0)).map_err(|e| e.to_string())?;
        let there = minus.act_local_real(&g, &m).map_err(|e| e.to_string())?;
        let back = plus.act_local_real(&g, &there).map_err(|e| e.to_string())?;
        worst = worst.max((back[0] - m[0]).abs());
    }
    check(worst <= 1e-8, format!("max |Φ₊(g, Φ₋(g, m)) − m| = {worst:.2e}"))
}

fn run_all(out: &Path, jobs: usize) -> Vec<Vec<u8>> {
    let opts = RunOptions {
        out: out.to_path_buf(),
        seed: Some(0),
        jobs,
    };
    SHIPPED
        .iter()
        .map(|name| {
            let o = run_scenario(&scenario_path(name), &opts);
            fs::read(o.report_path.expect("report written")).expect("report readable")
        })
        .collect()
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = run_all(a.path(), 1);
    let second = run_all(b.path(), 4);
    let differing: Vec<&str> = SHIPPED
        .iter()
        .zip(first.iter().zip(&second))
        .filter(|(_, (x, y))| x != y)
        .map(|(n, _)| *n)
        .collect();
    check(
        differing.is_empty(),
        format!("{} reports compared byte for byte, differing: {differing:?}", first.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 representation validation", representation_validation),
        ("2 rho recovered from the action", rho_round_trip),
        ("3 group law", group_law),
        ("4 path independence", path_independence),
        ("5 incompleteness detected", incompleteness),
        ("6 holonomy obstruction", holonomy_obstruction),
        ("7 helix and torus leaves", helix_geometry),
        ("8 super sector", super_sector),
        ("9 sign-convention duality", sign_duality),
        ("10 deterministic reports", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
