//! Task records of a scenario and their execution.

use std::path::Path;

use liact_core::action::Route;
use liact_core::flows::{completeness_probe, holonomy, integrate_flow, lift_path, FlowError, FlowProblem, LeafSample};
use liact_core::group::{algebra_from_json, scalar_from_json, scalars_to_json, PathSpec};
use liact_core::{ActionError, AlgebraElement, GroupElement, GroupPath, Parity, Supernumber};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::polyline;
use crate::scenario::Built;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Validate(ValidateTask),
    Act(ActTask),
    Orbit(OrbitTask),
    Diagnose(DiagnoseTask),
    Leaf(LeafTask),
    RecoverRho(RecoverRhoTask),
    GroupLaw(GroupLawTask),
    PathIndependence(PathIndependenceTask),
}

fn is_none<T>(v: &Option<T>) -> bool {
    v.is_none()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateTask {
    /// Random chart points for residuals that need numeric evaluation.
    #[serde(default = "eight")]
    pub samples: usize,
}

fn eight() -> usize {
    8
}

/// Group element reached directly (`g`, through its logarithm), by a word
/// of exponentials, or along a path.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    #[serde(default, skip_serializing_if = "is_none")]
    pub g: Option<Value>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub word: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub path: Option<PathSpec>,
}

enum Target {
    Element(GroupElement),
    Route(Route),
}

impl RouteSpec {
    fn resolve(&self, b: &Built) -> Result<Target, String> {
        match (&self.g, &self.word, &self.path) {
            (Some(g), None, None) => Ok(Target::Element(b.group.element_from_json(g).map_err(|e| e.to_string())?)),
            (None, Some(w), None) => {
                let factors = w
                    .iter()
                    .map(|x| b.group.algebra_from_json(x))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| e.to_string())?;
                Ok(Target::Route(Route::Word(factors)))
            }
            (None, None, Some(p)) => Ok(Target::Route(Route::Path(p.build(&b.group).map_err(|e| e.to_string())?))),
            _ => Err("give exactly one of `g`, `word`, `path`".into()),
        }
    }

    fn route(&self, b: &Built) -> Result<Route, String> {
        match self.resolve(b)? {
            Target::Route(r) => Ok(r),
            Target::Element(g) => Ok(Route::Word(vec![b.group.log(&g).map_err(|e| e.to_string())?])),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActTask {
    #[serde(default, skip_serializing_if = "is_none")]
    pub g: Option<Value>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub word: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub path: Option<PathSpec>,
    pub m: Vec<Value>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub expect: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitTask {
    /// Algebra element whose field is followed.
    pub x: Value,
    pub m: Vec<Value>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default, skip_serializing_if = "is_none")]
    pub expect: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub tol: Option<f64>,
}

macro_rules! route_of {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn route(&self) -> RouteSpec {
                RouteSpec {
                    g: self.g.clone(),
                    word: self.word.clone(),
                    path: self.path.clone(),
                }
            }
        }
    )*};
}

route_of!(ActTask, LeafTask);

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseTask {
    /// Directions to probe; the even basis when absent.
    #[serde(default, skip_serializing_if = "is_none")]
    pub directions: Option<Vec<Vec<f64>>>,
    #[serde(default = "hundred")]
    pub horizon: f64,
    /// Start points; five random chart points when absent.
    #[serde(default, skip_serializing_if = "is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    /// Loop for the holonomy check; one turn of a circle group when absent.
    #[serde(rename = "loop", default, skip_serializing_if = "is_none")]
    pub loop_path: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub expect: Option<DiagnoseExpect>,
}

fn hundred() -> f64 {
    100.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseExpect {
    #[serde(default, skip_serializing_if = "is_none")]
    pub complete: Option<bool>,
    /// Earliest escape time per point.
    #[serde(default, skip_serializing_if = "is_none")]
    pub escape_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub escape_abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub escape_rel_tol: Option<f64>,
    /// Holonomy displacement of the first coordinate per point.
    #[serde(default, skip_serializing_if = "is_none")]
    pub displacement: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub winding: Option<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafTask {
    #[serde(default, skip_serializing_if = "is_none")]
    pub g: Option<Value>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub word: Option<Vec<Value>>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub path: Option<PathSpec>,
    pub m: Vec<Value>,
    /// Keep every `stride`-th accepted step (the last one always).
    #[serde(default = "one_usize")]
    pub stride: usize,
    /// Step cap; 1/200 of the route duration when absent.
    #[serde(default, skip_serializing_if = "is_none")]
    pub max_step: Option<f64>,
    /// CSV file name inside the output directory.
    #[serde(default, skip_serializing_if = "is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub expect: Option<LeafExpect>,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafExpect {
    /// `Δm/Δg` between consecutive rows.
    #[serde(default, skip_serializing_if = "is_none")]
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub slope_tol: Option<f64>,
    /// Endpoint returns to the start within this distance.
    #[serde(default, skip_serializing_if = "is_none")]
    pub closed_tol: Option<f64>,
    /// Whole turns of the group coordinate followed by those of each chart
    /// coordinate.
    #[serde(default, skip_serializing_if = "is_none")]
    pub winding: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub escaped: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverRhoTask {
    #[serde(default = "fifty")]
    pub samples: usize,
    #[serde(default = "fd_step")]
    pub h: f64,
}

fn fifty() -> usize {
    50
}

fn fd_step() -> f64 {
    1e-4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupLawTask {
    #[serde(default = "hundred_usize")]
    pub trials: usize,
    #[serde(default = "four")]
    pub word_length: usize,
}

fn hundred_usize() -> usize {
    100
}

fn four() -> usize {
    4
}

/// Either explicit routes to `g`, or `trials` random elements each reached
/// by its exponential and by a two-factor word.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathIndependenceTask {
    #[serde(default, skip_serializing_if = "is_none")]
    pub g: Option<Value>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub routes: Option<Vec<RouteSpec>>,
    #[serde(default, skip_serializing_if = "is_none")]
    pub m: Option<Vec<f64>>,
    #[serde(default = "twenty")]
    pub trials: usize,
    /// Expected spread for explicit routes; zero when absent.
    #[serde(default, skip_serializing_if = "is_none")]
    pub expect_spread: Option<f64>,
}

fn twenty() -> usize {
    20
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// A task that needed the action hit incompleteness or an escape.
    Obstruction,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskOutcome {
    pub index: usize,
    pub kind: &'static str,
    pub status: Status,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub data: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Files a task wants written, relative to the output directory.
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::Validate(_) => "validate",
            Task::Act(_) => "act",
            Task::Orbit(_) => "orbit",
            Task::Diagnose(_) => "diagnose",
            Task::Leaf(_) => "leaf",
            Task::RecoverRho(_) => "recover_rho",
            Task::GroupLaw(_) => "group_law",
            Task::PathIndependence(_) => "path_independence",
        }
    }

    /// Load-time checks of shapes and references.
    pub fn check(&self, b: &Built) -> Result<(), String> {
        match self {
            Task::Act(t) => {
                t.route().resolve(b)?;
                point(b, &t.m)?;
                if let Some(e) = &t.expect {
                    point(b, e)?;
                }
            }
            Task::Orbit(t) => {
                algebra_element(b, &t.x)?;
                point(b, &t.m)?;
                if let Some(e) = &t.expect {
                    point(b, e)?;
                }
            }
            Task::Diagnose(t) => {
                for d in t.directions.iter().flatten() {
                    if d.len() != b.sc.dim() {
                        return Err(format!("direction has {} coordinates, algebra has {}", d.len(), b.sc.dim()));
                    }
                }
                for p in t.points.iter().flatten() {
                    b.rep.chart().check_point(p).map_err(|e| e.to_string())?;
                }
                if let Some(l) = &t.loop_path {
                    l.build(&b.group).map_err(|e| e.to_string())?;
                }
            }
            Task::Leaf(t) => {
                t.route().route(b)?;
                point(b, &t.m)?;
                if t.stride == 0 {
                    return Err("stride must be positive".into());
                }
            }
            Task::PathIndependence(t) => {
                if let Some(g) = &t.g {
                    b.group.element_from_json(g).map_err(|e| e.to_string())?;
                }
                for r in t.routes.iter().flatten() {
                    r.route(b)?;
                }
                if t.g.is_some() != t.routes.is_some() {
                    return Err("`g` and `routes` go together".into());
                }
                if let Some(m) = &t.m {
                    b.rep.chart().check_point(m).map_err(|e| e.to_string())?;
                }
            }
            Task::Validate(_) | Task::RecoverRho(_) | Task::GroupLaw(_) => {}
        }
        Ok(())
    }

    /// Runs the task; `rng` is private to this task.
    pub fn run(&self, index: usize, b: &Built, rng: &mut ChaCha8Rng, scenario: &str, artifacts: &mut Vec<Artifact>) -> TaskOutcome {
        let result = match self {
            Task::Validate(t) => validate(b, t, rng),
            Task::Act(t) => act(b, t),
            Task::Orbit(t) => orbit(b, t),
            Task::Diagnose(t) => diagnose(b, t, rng),
            Task::Leaf(t) => leaf(b, t, index, scenario, artifacts),
            Task::RecoverRho(t) => b
                .engine
                .recover_rho(t.samples, t.h, rng)
                .map(|r| (Status::from_check(r.max_deviation <= b.tol.recover_rho), json!(r)))
                .map_err(Failure::from),
            Task::GroupLaw(t) => b
                .engine
                .verify_group_law(t.trials, t.word_length, rng)
                .map(|r| (Status::from_check(r.max_residual <= b.tol.group_law), json!(r)))
                .map_err(Failure::from),
            Task::PathIndependence(t) => path_independence(b, t, rng),
        };
        let (status, data, message) = match result {
            Ok((s, d)) => (s, d, None),
            Err(Failure::Obstruction(m)) => (Status::Obstruction, Value::Null, Some(m)),
            Err(Failure::Error(m)) => (Status::Error, Value::Null, Some(m)),
        };
        TaskOutcome {
            index,
            kind: self.kind(),
            status,
            data,
            message,
        }
    }
}

impl Status {
    fn from_check(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

enum Failure {
    Obstruction(String),
    Error(String),
}

impl From<ActionError> for Failure {
    fn from(e: ActionError) -> Self {
        if e.is_obstruction() {
            Failure::Obstruction(e.to_string())
        } else {
            Failure::Error(e.to_string())
        }
    }
}

impl From<FlowError> for Failure {
    fn from(e: FlowError) -> Self {
        ActionError::from(e).into()
    }
}

impl From<String> for Failure {
    fn from(e: String) -> Self {
        Failure::Error(e)
    }
}

type TaskResult = Result<(Status, Value), Failure>;

fn point(b: &Built, m: &[Value]) -> Result<Vec<Supernumber>, String> {
    let chart = b.rep.chart();
    if m.len() != chart.dim() {
        return Err(format!("point has {} coordinates, chart has {}", m.len(), chart.dim()));
    }
    let p = m
        .iter()
        .map(|v| scalar_from_json(v, b.n))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    for (i, v) in p.iter().enumerate() {
        let want = chart.parity(i);
        if !v.is_zero() && v.parity() != Some(want) {
            return Err(format!("coordinate {} must be {want:?}", chart.name(i)));
        }
    }
    let body: Vec<f64> = p.iter().map(Supernumber::body).collect();
    chart.check_point(&body).map_err(|e| e.to_string())?;
    Ok(p)
}

fn algebra_element(b: &Built, v: &Value) -> Result<AlgebraElement, String> {
    let x = algebra_from_json(v, b.n).map_err(|e| e.to_string())?;
    if x.dim() != b.sc.dim() {
        return Err(format!("element has {} coordinates, algebra has {}", x.dim(), b.sc.dim()));
    }
    if !x.is_even(&b.sc) {
        return Err("algebra element must be even".into());
    }
    Ok(x)
}

/// Largest coefficient difference, circular on periodic bodies.
fn deviation(b: &Built, got: &[Supernumber], want: &[Supernumber]) -> f64 {
    let gb: Vec<f64> = got.iter().map(Supernumber::body).collect();
    let wb: Vec<f64> = want.iter().map(Supernumber::body).collect();
    let mut d = b.rep.chart().distance(&gb, &wb);
    for (g, w) in got.iter().zip(want) {
        d = d.max((&g.soul() - &w.soul()).max_abs());
    }
    d
}

fn validate(b: &Built, t: &ValidateTask, rng: &mut ChaCha8Rng) -> TaskResult {
    let jacobi = b.sc.check_jacobi();
    let antisymmetry = b.sc.check_antisymmetry();
    let rep = b.rep.validate(t.samples, rng);
    let ok = rep.residual <= b.tol.validation && jacobi.max <= b.tol.jacobi && antisymmetry.max <= b.tol.jacobi;
    Ok((
        Status::from_check(ok),
        json!({
            "residual": rep.residual,
            "worst_pair": rep.worst_pair,
            "symbolic": rep.symbolic,
            "jacobi": jacobi,
            "antisymmetry": antisymmetry,
        }),
    ))
}

fn act(b: &Built, t: &ActTask) -> TaskResult {
    let m = point(b, &t.m)?;
    let res = match t.route().resolve(b)? {
        Target::Element(g) => b.engine.act_local(&g, &m)?,
        Target::Route(r) => b.engine.act(&r, &m)?,
    };
    let mut data = json!({
        "value": scalars_to_json(&res.value),
        "error_estimate": res.error_estimate,
        "holonomy_flag": res.holonomy_flag,
    });
    if let Some(h) = &res.holonomy {
        data["holonomy"] = json!(h);
    }
    let mut status = Status::Pass;
    if let Some(e) = &t.expect {
        let want = point(b, e)?;
        let d = deviation(b, &res.value, &want);
        data["deviation"] = json!(d);
        status = Status::from_check(d <= t.tol.unwrap_or(b.tol.act));
    }
    Ok((status, data))
}

fn orbit(b: &Built, t: &OrbitTask) -> TaskResult {
    let x = algebra_element(b, &t.x)?;
    let m = point(b, &t.m)?;
    let traj = integrate_flow(&FlowProblem::fixed(&b.rep, x, m, b.sign, t.t).with_options(b.tol.integrator))?;
    let mut end = traj.final_point();
    let mut body: Vec<f64> = end.iter().map(Supernumber::body).collect();
    let winding = b.rep.chart().normalize(&mut body);
    for (v, nb) in end.iter_mut().zip(&body) {
        v.coeffs_mut()[0] = *nb;
    }
    let mut data = json!({
        "value": scalars_to_json(&end),
        "time": traj.final_time(),
        "steps": traj.len() - 1,
        "status": traj.status(),
        "winding": winding,
    });
    let mut status = Status::Pass;
    if let Some(e) = &t.expect {
        let want = point(b, e)?;
        let d = deviation(b, &end, &want);
        data["deviation"] = json!(d);
        status = Status::from_check(!traj.escaped() && d <= t.tol.unwrap_or(b.tol.act));
    }
    Ok((status, data))
}

fn diagnose(b: &Built, t: &DiagnoseTask, rng: &mut ChaCha8Rng) -> TaskResult {
    let chart = b.rep.chart();
    let dim = b.sc.dim();
    let directions: Vec<AlgebraElement> = match &t.directions {
        Some(d) => d.iter().map(|c| AlgebraElement::from_reals(c, 0)).collect(),
        None => (0..dim)
            .filter(|&i| b.sc.parity(i) == Parity::Even)
            .map(|i| AlgebraElement::basis(dim, 0, i))
            .collect(),
    };
    let points: Vec<Vec<f64>> = match &t.points {
        Some(p) => p.clone(),
        None => (0..5).map(|_| chart.sample_point(rng, 1.0)).collect(),
    };
    let opts = b.tol.integrator;
    let mut per_point = Vec::with_capacity(points.len());
    let mut earliest = Vec::with_capacity(points.len());
    let mut all_complete = true;
    for p in &points {
        let reports = completeness_probe(&b.rep, &directions, t.horizon, std::slice::from_ref(p), b.sign, &opts)?;
        let first = reports.iter().filter_map(|r| r.escape_time).fold(None, |a: Option<f64>, e| Some(a.map_or(e, |a| a.min(e))));
        all_complete &= reports.iter().all(|r| r.complete);
        earliest.push(first);
        per_point.push(json!({ "point": p, "directions": reports }));
    }

    let loop_path = match &t.loop_path {
        Some(l) => Some(l.build(&b.group).map_err(|e| e.to_string())?),
        None if !b.group.is_simply_connected() => Some(
            GroupPath::exp_segment(&b.group, &AlgebraElement::from_reals(&[1.0], 0)).map_err(|e| e.to_string())?,
        ),
        None => None,
    };
    let mut holo = Vec::new();
    if let Some(lp) = &loop_path {
        for p in &points {
            match holonomy(&b.rep, &b.group, lp, p, b.sign, &opts) {
                Ok(h) => holo.push(json!(h)),
                Err(FlowError::Escaped { t, kind, .. }) => holo.push(json!({ "escaped": { "t": t, "kind": kind } })),
                Err(e) => return Err(e.into()),
            }
        }
    }

    let mut ok = true;
    if let Some(e) = &t.expect {
        if let Some(c) = e.complete {
            ok &= c == all_complete;
        }
        if let Some(times) = &e.escape_times {
            ok &= times.len() == earliest.len();
            for (want, got) in times.iter().zip(&earliest) {
                let tol = e.escape_abs_tol.unwrap_or(0.0).max(e.escape_rel_tol.unwrap_or(0.0) * want.abs());
                ok &= got.is_some_and(|g| (g - want).abs() <= tol);
            }
        }
        if let Some(ds) = &e.displacement {
            ok &= ds.len() == holo.len();
            for (want, h) in ds.iter().zip(&holo) {
                ok &= h["displacement"][0].as_f64().is_some_and(|d| (d - want).abs() <= b.tol.holonomy);
            }
        }
        if let Some(ws) = &e.winding {
            ok &= ws.len() == holo.len();
            for (want, h) in ws.iter().zip(&holo) {
                ok &= h["winding"][0].as_i64() == Some(*want);
            }
        }
    }
    let mut data = json!({
        "complete": all_complete,
        "horizon": t.horizon,
        "escape_times": earliest,
        "points": per_point,
    });
    if loop_path.is_some() {
        data["holonomy"] = Value::Array(holo);
    }
    Ok((Status::from_check(ok), data))
}

/// Completed turns, counting values within 1e-7 of an integer as whole.
fn whole_turns(x: f64) -> i64 {
    let r = x.round();
    if (x - r).abs() <= 1e-7 {
        r as i64
    } else {
        x.trunc() as i64
    }
}

/// Unwrapped group coordinate along a circle-group trace.
fn unwrapped_angles(leaf: &LeafSample, b: &Built) -> Vec<f64> {
    let mut out = Vec::with_capacity(leaf.len());
    let mut acc = 0.0;
    let mut prev: Option<f64> = None;
    for g in &leaf.group {
        let x = b.group.coords(g)[0];
        if let Some(p) = prev {
            let d = x - p;
            acc += d - d.round();
        } else {
            acc = x;
        }
        out.push(acc);
        prev = Some(x);
    }
    out
}

fn leaf(b: &Built, t: &LeafTask, index: usize, scenario: &str, artifacts: &mut Vec<Artifact>) -> TaskResult {
    let m = point(b, &t.m)?;
    let path = t.route().route(b)?.to_path(&b.group).map_err(|e| e.to_string())?;
    let mut opts = b.tol.integrator;
    opts.max_step = Some(t.max_step.unwrap_or(path.duration() / 200.0));
    let (trace, escaped) = match lift_path(&b.rep, &b.group, &path, &m, b.sign, &opts) {
        Ok(l) => (l, None),
        Err(FlowError::Escaped { t, kind, partial }) => (*partial, Some(json!({ "t": t, "kind": kind }))),
        Err(e) => return Err(e.into()),
    };
    let file = t.file.clone().unwrap_or_else(|| format!("{scenario}_task{index}_leaf.csv"));
    let rows = polyline::rows(&trace, t.stride);
    artifacts.push(Artifact {
        name: file.clone(),
        contents: polyline::csv(&b.group, b.rep.chart(), &trace, &rows),
    });
    let mut data = json!({
        "file": file,
        "rows": rows.len(),
        "escaped": escaped,
    });
    if trace.points.iter().flatten().any(Supernumber::has_soul) {
        let souls = Path::new(&file).with_extension("souls.json").to_string_lossy().into_owned();
        artifacts.push(Artifact {
            name: souls.clone(),
            contents: polyline::souls_json(b.rep.chart(), &trace, &rows),
        });
        data["souls_file"] = json!(souls);
    }

    let chart = b.rep.chart();
    let circle = !b.group.is_simply_connected();
    let angles = circle.then(|| unwrapped_angles(&trace, b));
    let mut winding = Vec::new();
    if let Some(a) = &angles {
        winding.push(whole_turns(a[a.len() - 1] - a[0]));
    }
    let (start, end) = (trace.body(0), trace.final_body());
    for i in 0..chart.dim() {
        winding.push(match chart.period(i) {
            Some(p) => whole_turns((end[i] - start[i]) / p),
            None => 0,
        });
    }
    data["winding"] = json!(winding);
    let closure = chart.distance(&start, &end).max(
        b.group
            .distance(path.basepoint(), &trace.group[trace.group.len() - 1])
            .map_err(|e| e.to_string())?,
    );
    data["closure"] = json!(closure);

    let mut ok = true;
    if let Some(e) = &t.expect {
        if let Some(slope) = e.slope {
            // slope of the first chart coordinate against the first group coordinate
            let g: Vec<f64> = match &angles {
                Some(a) => a.clone(),
                None => trace.group.iter().map(|g| b.group.coords(g)[0]).collect(),
            };
            let mut worst: f64 = 0.0;
            for k in 1..trace.len() {
                let dg = g[k] - g[k - 1];
                if dg.abs() > 1e-12 {
                    let dm = trace.body(k)[0] - trace.body(k - 1)[0];
                    worst = worst.max((dm / dg - slope).abs());
                }
            }
            data["slope_deviation"] = json!(worst);
            ok &= worst <= e.slope_tol.unwrap_or(1e-6);
        }
        if let Some(tol) = e.closed_tol {
            ok &= closure <= tol;
        }
        if let Some(w) = &e.winding {
            ok &= *w == winding;
        }
        if let Some(esc) = e.escaped {
            ok &= esc == escaped.is_some();
        }
    }
    if escaped.is_some() && t.expect.as_ref().and_then(|e| e.escaped).is_none() {
        data["flagged"] = json!(true);
    }
    Ok((Status::from_check(ok), data))
}

fn random_even(b: &Built, rng: &mut ChaCha8Rng) -> AlgebraElement {
    let c: Vec<f64> = (0..b.sc.dim())
        .map(|i| match b.sc.parity(i) {
            Parity::Even => rng.random_range(-1.0..1.0),
            Parity::Odd => 0.0,
        })
        .collect();
    AlgebraElement::from_reals(&c, 0)
}

fn path_independence(b: &Built, t: &PathIndependenceTask, rng: &mut ChaCha8Rng) -> TaskResult {
    let chart = b.rep.chart();
    if let (Some(g), Some(routes)) = (&t.g, &t.routes) {
        let g = b.group.element_from_json(g).map_err(|e| e.to_string())?;
        let routes = routes.iter().map(|r| r.route(b)).collect::<Result<Vec<_>, _>>()?;
        let m = t.m.clone().unwrap_or_else(|| chart.sample_point(rng, 1.0));
        let spread = b.engine.path_independence(&g, &routes, &liact_core::flows::real_point(&m))?;
        let want = t.expect_spread.unwrap_or(0.0);
        return Ok((
            Status::from_check((spread - want).abs() <= b.tol.path_independence),
            json!({ "spread": spread, "m": m }),
        ));
    }
    let mut worst: f64 = 0.0;
    for _ in 0..t.trials {
        let x = random_even(b, rng);
        let y = random_even(b, rng);
        let g = b.group.exp(&x).map_err(|e| e.to_string())?;
        let rest = b
            .group
            .multiply(&b.group.inverse(&b.group.exp(&y).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?, &g)
            .and_then(|h| b.group.log(&h))
            .map_err(|e| e.to_string())?;
        let m = t.m.clone().unwrap_or_else(|| chart.sample_point(rng, 1.0));
        let routes = [Route::Word(vec![x]), Route::Word(vec![y, rest])];
        worst = worst.max(b.engine.path_independence(&g, &routes, &liact_core::flows::real_point(&m))?);
    }
    Ok((
        Status::from_check(worst <= b.tol.path_independence),
        json!({ "spread": worst, "trials": t.trials }),
    ))
}
