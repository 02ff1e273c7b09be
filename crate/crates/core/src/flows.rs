//! Flows of `ρ(X)`, lifts of group paths through the induced foliation,
//! completeness probes and holonomy of loops.
//!
//! Every flow solves `dm/dt = sign · ρ(ξ(t))(m)`. Super states are carried
//! as the full coefficient vector of every coordinate and integrated jointly,
//! with step control driven by the even bodies alone; the body of a super
//! trajectory is therefore the body trajectory, step for step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::AlgebraElement;
use crate::expr::{ExprError, Func, Scalar};
use crate::fields::{FieldError, Representation};
use crate::grassmann::{Parity, Supernumber};
use crate::group::{Group, GroupElement, GroupError, GroupPath, Segment};
use crate::rk::{self, RkConfig, RkError, Stop};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Body magnitude treated as blow-up.
    pub blowup: f64,
    /// Distance to a box face treated as leaving the chart.
    pub boundary_tol: f64,
    /// Upper bound on accepted step sizes, for densely sampled output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 200_000,
            blowup: 1e8,
            boundary_tol: 1e-9,
            max_step: None,
        }
    }
}

impl FlowOptions {
    fn rk(&self) -> RkConfig {
        RkConfig {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
            blowup: self.blowup,
            boundary_tol: self.boundary_tol,
            max_step: self.max_step,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapeKind {
    ChartBoundary,
    BlowUp,
    StepUnderflow,
}

impl std::fmt::Display for EscapeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EscapeKind::ChartBoundary => "chart boundary",
            EscapeKind::BlowUp => "blow-up",
            EscapeKind::StepUnderflow => "step underflow",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FlowStatus {
    Completed,
    Escaped { t: f64, kind: EscapeKind },
}

#[derive(Debug, Error, Clone)]
pub enum FlowError {
    #[error("invalid flow problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("step limit reached at t = {t}")]
    MaxSteps { t: f64 },
    #[error("lift left the chart ({kind}) at t = {t}")]
    Escaped {
        t: f64,
        kind: EscapeKind,
        partial: Box<LeafSample>,
    },
}

impl<E: Into<FlowError>> From<RkError<E>> for FlowError {
    fn from(e: RkError<E>) -> Self {
        match e {
            RkError::Rhs(e) => e.into(),
            RkError::MaxSteps(t) => FlowError::MaxSteps { t },
        }
    }
}

/// Direction of a flow: a frozen algebra element or the right logarithmic
/// derivative of a group path.
#[derive(Clone, Debug)]
pub enum Direction {
    Fixed(AlgebraElement),
    Path(GroupPath),
}

#[derive(Clone, Debug)]
pub struct FlowProblem<'a> {
    pub rep: &'a Representation,
    pub direction: Direction,
    pub m0: Vec<Supernumber>,
    pub sign: f64,
    pub t_span: (f64, f64),
    pub options: FlowOptions,
}

impl<'a> FlowProblem<'a> {
    /// Flow of `sign·ρ(x)` from `m0` over `[0, t]`.
    pub fn fixed(rep: &'a Representation, x: AlgebraElement, m0: Vec<Supernumber>, sign: f64, t: f64) -> Self {
        FlowProblem {
            rep,
            direction: Direction::Fixed(x),
            m0,
            sign,
            t_span: (0.0, t),
            options: FlowOptions::default(),
        }
    }

    /// Real start point.
    pub fn fixed_real(rep: &'a Representation, x: &[f64], m0: &[f64], sign: f64, t: f64) -> Self {
        Self::fixed(rep, AlgebraElement::from_reals(x, 0), real_point(m0), sign, t)
    }

    pub fn with_options(mut self, options: FlowOptions) -> Self {
        self.options = options;
        self
    }
}

/// Supernumbers over zero generators.
pub fn real_point(m: &[f64]) -> Vec<Supernumber> {
    m.iter().map(|v| Supernumber::scalar(0, *v)).collect()
}

/// Sampled solution of a flow; states are stored unwrapped on periodic
/// coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    n: usize,
    dim: usize,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    rates: Vec<Vec<f64>>,
    status: FlowStatus,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn num_generators(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn status(&self) -> FlowStatus {
        self.status
    }

    pub fn escaped(&self) -> bool {
        matches!(self.status, FlowStatus::Escaped { .. })
    }

    pub fn point(&self, k: usize) -> Vec<Supernumber> {
        unflatten(&self.states[k], self.dim, self.n)
    }

    pub fn body(&self, k: usize) -> Vec<f64> {
        let w = 1 << self.n;
        (0..self.dim).map(|i| self.states[k][i * w]).collect()
    }

    pub fn final_point(&self) -> Vec<Supernumber> {
        self.point(self.len() - 1)
    }

    pub fn final_body(&self) -> Vec<f64> {
        self.body(self.len() - 1)
    }

    pub fn final_time(&self) -> f64 {
        self.times[self.len() - 1]
    }

    /// Dense output by cubic Hermite interpolation.
    pub fn sample(&self, t: f64) -> Option<Vec<Supernumber>> {
        let (lo, hi) = (self.times[0].min(self.final_time()), self.times[0].max(self.final_time()));
        if !(lo..=hi).contains(&t) {
            return None;
        }
        let fwd = self.final_time() >= self.times[0];
        let k = self
            .times
            .windows(2)
            .position(|w| if fwd { t <= w[1] } else { t >= w[1] })
            .unwrap_or(0);
        if self.len() == 1 {
            return Some(self.point(0));
        }
        let y = rk::hermite(
            self.times[k],
            &self.states[k],
            &self.rates[k],
            self.times[k + 1],
            &self.states[k + 1],
            &self.rates[k + 1],
            t,
        );
        Some(unflatten(&y, self.dim, self.n))
    }
}

fn flatten(m: &[Supernumber]) -> Vec<f64> {
    m.iter().flat_map(|s| s.coeffs().iter().copied()).collect()
}

fn unflatten(y: &[f64], dim: usize, n: usize) -> Vec<Supernumber> {
    let w = 1 << n;
    (0..dim)
        .map(|i| Supernumber::from_coeffs(n, y[i * w..(i + 1) * w].to_vec()).expect("consistent width"))
        .collect()
}

/// Numeric trace of a leaf: pairs `(γ(t), m(t))` at accepted steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafSample {
    pub times: Vec<f64>,
    pub group: Vec<GroupElement>,
    pub points: Vec<Vec<Supernumber>>,
    pub status: FlowStatus,
}

impl LeafSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Unwrapped bodies of the `k`-th point.
    pub fn body(&self, k: usize) -> Vec<f64> {
        self.points[k].iter().map(Supernumber::body).collect()
    }

    pub fn final_point(&self) -> &[Supernumber] {
        &self.points[self.points.len() - 1]
    }

    pub fn final_body(&self) -> Vec<f64> {
        self.body(self.len() - 1)
    }
}

fn coefficients(x: &AlgebraElement, n: usize) -> Result<Vec<Supernumber>, FlowError> {
    if x.num_generators() == n {
        Ok(x.coords().to_vec())
    } else if !x.has_soul() {
        Ok(x.body().iter().map(|v| Supernumber::scalar(n, *v)).collect())
    } else {
        Err(FlowError::Invalid(format!(
            "direction uses {} generators but the point uses {n}",
            x.num_generators()
        )))
    }
}

fn check_start(rep: &Representation, m0: &[Supernumber]) -> Result<usize, FlowError> {
    let chart = rep.chart();
    if m0.len() != chart.dim() {
        return Err(FieldError::DimensionMismatch {
            expected: chart.dim(),
            got: m0.len(),
        }
        .into());
    }
    let n = m0[0].num_generators();
    for (i, v) in m0.iter().enumerate() {
        let ok = v.num_generators() == n
            && match chart.parity(i) {
                Parity::Even => v.is_even(),
                Parity::Odd => v.is_odd(),
            };
        if !ok {
            return Err(ExprError::ParityMismatch {
                var: chart.name(i).to_string(),
            }
            .into());
        }
    }
    let body: Vec<f64> = m0.iter().map(Supernumber::body).collect();
    chart.check_point(&body)?;
    Ok(n)
}

fn check_sign(sign: f64, opts: &FlowOptions) -> Result<(), FlowError> {
    if sign != 1.0 && sign != -1.0 {
        return Err(FlowError::Invalid(format!("sign must be ±1, got {sign}")));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(FlowError::Invalid("tolerances must be positive".into()));
    }
    Ok(())
}

fn check_direction(rep: &Representation, x: &AlgebraElement) -> Result<(), FlowError> {
    if x.dim() != rep.dim() {
        return Err(FieldError::DimensionMismatch {
            expected: rep.dim(),
            got: x.dim(),
        }
        .into());
    }
    if !x.is_even(rep.structure_constants()) {
        return Err(FieldError::OddTotalParity.into());
    }
    Ok(())
}

/// Integrates one stretch with a time-dependent direction `xi(t)`.
fn run_stretch<X>(
    rep: &Representation,
    xi: X,
    n: usize,
    y0: Vec<f64>,
    sign: f64,
    (t0, t1): (f64, f64),
    opts: &FlowOptions,
) -> Result<rk::RkRun, FlowError>
where
    X: Fn(f64) -> Vec<Supernumber>,
{
    let chart = rep.chart();
    let dim = chart.dim();
    let w = 1usize << n;
    let control: Vec<usize> = (0..chart.even_dim()).map(|i| i * w).collect();
    let boundary = |y: &[f64]| {
        let body: Vec<f64> = (0..chart.even_dim()).map(|i| y[i * w]).collect();
        chart.boundary_distance(&body)
    };
    let run = if n == 0 {
        let f = |t: f64, y: &[f64]| -> Result<Vec<f64>, ExprError> {
            let x: Vec<f64> = xi(t).iter().map(Supernumber::body).collect();
            let v = rep.eval_rho_with(&x, y, &0.0)?;
            Ok(v.into_iter().map(|c| sign * c).collect())
        };
        rk::integrate(f, boundary, t0, t1, y0, &control, &opts.rk())?
    } else {
        let proto = Supernumber::zero(n);
        let f = |t: f64, y: &[f64]| -> Result<Vec<f64>, ExprError> {
            let m = unflatten(y, dim, n);
            let v = rep.eval_rho_with(&xi(t), &m, &proto)?;
            Ok(v.iter().flat_map(|c| c.coeffs().iter().map(|a| sign * a).collect::<Vec<_>>()).collect())
        };
        rk::integrate(f, boundary, t0, t1, y0, &control, &opts.rk())?
    };
    Ok(run)
}

fn status_of(run: &rk::RkRun) -> FlowStatus {
    let t = *run.ts.last().expect("initial point");
    match run.stop {
        Stop::Finished => FlowStatus::Completed,
        Stop::Boundary => FlowStatus::Escaped {
            t,
            kind: EscapeKind::ChartBoundary,
        },
        Stop::BlowUp => FlowStatus::Escaped {
            t,
            kind: EscapeKind::BlowUp,
        },
        Stop::Underflow => FlowStatus::Escaped {
            t,
            kind: EscapeKind::StepUnderflow,
        },
    }
}

/// Solves `dm/dt = sign·ρ(ξ(t))(m)` over the problem's time span. Leaving
/// the chart truncates the trajectory and marks it escaped.
///
/// A fixed direction without body flows along a nilpotent field; for
/// polynomial fields that flow is computed exactly by Picard iteration on
/// polynomials in `t`.
pub fn integrate_flow(p: &FlowProblem<'_>) -> Result<Trajectory, FlowError> {
    check_sign(p.sign, &p.options)?;
    let n = check_start(p.rep, &p.m0)?;
    let dim = p.rep.chart().dim();
    let (t0, t1) = p.t_span;
    match &p.direction {
        Direction::Fixed(x) => {
            check_direction(p.rep, x)?;
            let coeffs = coefficients(x, n)?;
            if n > 0 && x.body().iter().all(|v| *v == 0.0) && p.rep.is_polynomial() {
                return exact_nilpotent_flow(p.rep, &coeffs, &p.m0, p.sign, (t0, t1));
            }
            let run = run_stretch(p.rep, |_| coeffs.clone(), n, flatten(&p.m0), p.sign, (t0, t1), &p.options)?;
            Ok(Trajectory {
                n,
                dim,
                status: status_of(&run),
                times: run.ts,
                states: run.ys,
                rates: run.fs,
            })
        }
        Direction::Path(path) => {
            if t0 != 0.0 || t1 != path.duration() {
                return Err(FlowError::Invalid("path flows run over the whole path".into()));
            }
            let leaf = lift_inner(p.rep, None, path, &p.m0, p.sign, &p.options)?;
            let mut traj = Trajectory {
                n,
                dim,
                times: Vec::new(),
                states: Vec::new(),
                rates: Vec::new(),
                status: leaf.0.status,
            };
            for (k, t) in leaf.0.times.iter().enumerate() {
                traj.times.push(*t);
                traj.states.push(flatten(&leaf.0.points[k]));
                traj.rates.push(leaf.1[k].clone());
            }
            Ok(traj)
        }
    }
}

/// Polynomials in `t` with supernumber coefficients.
#[derive(Clone, Debug, PartialEq)]
struct TPoly {
    n: usize,
    c: Vec<Supernumber>,
}

impl TPoly {
    fn constant(s: Supernumber) -> Self {
        TPoly {
            n: s.num_generators(),
            c: vec![s],
        }
    }

    fn trim(mut self) -> Self {
        while self.c.len() > 1 && self.c.last().is_some_and(Supernumber::is_zero) {
            self.c.pop();
        }
        self
    }

    fn integral(&self, scale: f64) -> TPoly {
        let mut c = vec![Supernumber::zero(self.n)];
        for (j, a) in self.c.iter().enumerate() {
            c.push(a.scale(scale / (j + 1) as f64));
        }
        TPoly { n: self.n, c }.trim()
    }

    fn at(&self, t: f64) -> Supernumber {
        let mut acc = Supernumber::zero(self.n);
        for a in self.c.iter().rev() {
            acc = &acc.scale(t) + a;
        }
        acc
    }

    fn derivative_at(&self, t: f64) -> Supernumber {
        let mut acc = Supernumber::zero(self.n);
        for (j, a) in self.c.iter().enumerate().skip(1).rev() {
            acc = &acc.scale(t) + &a.scale(j as f64);
        }
        acc
    }
}

impl Scalar for TPoly {
    fn constant_like(&self, v: f64) -> Self {
        TPoly::constant(Supernumber::scalar(self.n, v))
    }

    fn add(&self, other: &Self) -> Self {
        let len = self.c.len().max(other.c.len());
        let zero = Supernumber::zero(self.n);
        let c = (0..len)
            .map(|j| self.c.get(j).unwrap_or(&zero) + other.c.get(j).unwrap_or(&zero))
            .collect();
        TPoly { n: self.n, c }.trim()
    }

    fn mul(&self, other: &Self) -> Self {
        let mut c = vec![Supernumber::zero(self.n); self.c.len() + other.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in other.c.iter().enumerate() {
                c[i + j] += &(a * b);
            }
        }
        TPoly { n: self.n, c }.trim()
    }

    fn recip(&self) -> Result<Self, ExprError> {
        Err(ExprError::NonPolynomial)
    }

    fn apply(&self, _: Func) -> Result<Self, ExprError> {
        Err(ExprError::NonPolynomial)
    }
}

fn exact_nilpotent_flow(
    rep: &Representation,
    x: &[Supernumber],
    m0: &[Supernumber],
    sign: f64,
    (t0, t1): (f64, f64),
) -> Result<Trajectory, FlowError> {
    let n = m0[0].num_generators();
    let dim = m0.len();
    let xs: Vec<TPoly> = x.iter().cloned().map(TPoly::constant).collect();
    let start: Vec<TPoly> = m0.iter().cloned().map(TPoly::constant).collect();
    let proto = TPoly::constant(Supernumber::zero(n));
    let mut m = start.clone();
    // each pass fixes at least one more soul degree
    let mut converged = false;
    for _ in 0..=n + 2 {
        let v = rep.eval_rho_with(&xs, &m, &proto)?;
        let next: Vec<TPoly> = start.iter().zip(&v).map(|(s, vi)| s.add(&vi.integral(sign))).collect();
        if next == m {
            converged = true;
            break;
        }
        m = next;
    }
    if !converged {
        return Err(FlowError::Invalid("nilpotent iteration did not terminate".into()));
    }
    let samples = 16;
    let mut traj = Trajectory {
        n,
        dim,
        times: Vec::new(),
        states: Vec::new(),
        rates: Vec::new(),
        status: FlowStatus::Completed,
    };
    for k in 0..=samples {
        let t = if k == samples { t1 } else { t0 + (t1 - t0) * k as f64 / samples as f64 };
        let tau = t - t0;
        let point: Vec<Supernumber> = m.iter().map(|p| p.at(tau)).collect();
        let rate: Vec<Supernumber> = m.iter().map(|p| p.derivative_at(tau)).collect();
        traj.times.push(t);
        traj.states.push(flatten(&point));
        traj.rates.push(flatten(&rate));
    }
    Ok(traj)
}

/// Lifts a group path through the foliation starting at `m0`: the
/// `M`-component solves `dm/dt = sign·ρ(γ'γ⁻¹)(m)`. Leaving the chart is an
/// error carrying the partial trace.
pub fn lift_path(
    rep: &Representation,
    group: &Group,
    path: &GroupPath,
    m0: &[Supernumber],
    sign: f64,
    opts: &FlowOptions,
) -> Result<LeafSample, FlowError> {
    let (leaf, _) = lift_inner(rep, Some(group), path, m0, sign, opts)?;
    match leaf.status {
        FlowStatus::Completed => Ok(leaf),
        FlowStatus::Escaped { t, kind } => Err(FlowError::Escaped {
            t,
            kind,
            partial: Box::new(leaf),
        }),
    }
}

/// Shared lift; without a group the sample carries no group elements.
fn lift_inner(
    rep: &Representation,
    group: Option<&Group>,
    path: &GroupPath,
    m0: &[Supernumber],
    sign: f64,
    opts: &FlowOptions,
) -> Result<(LeafSample, Vec<Vec<f64>>), FlowError> {
    check_sign(sign, opts)?;
    let n = check_start(rep, m0)?;
    let dim = rep.chart().dim();
    for seg in path.segments() {
        let x = match seg {
            Segment::Exp { generator, .. } => generator.clone(),
            Segment::Sampled { xi, .. } => xi[0].clone(),
        };
        check_direction(rep, &x)?;
    }
    let mut leaf = LeafSample {
        times: vec![0.0],
        group: group.map(|_| vec![path.basepoint().clone()]).unwrap_or_default(),
        points: vec![m0.to_vec()],
        status: FlowStatus::Completed,
    };
    let mut rates: Vec<Vec<f64>> = Vec::new();
    let mut y = flatten(m0);
    let mut offset = 0.0;
    for (i, seg) in path.segments().iter().enumerate() {
        let d = seg.duration();
        if d == 0.0 {
            continue;
        }
        let xi = |tau: f64| -> Vec<Supernumber> {
            let x = seg.right_log_derivative(tau.clamp(0.0, d));
            coefficients(&x, n).unwrap_or_else(|_| vec![Supernumber::zero(n); x.dim()])
        };
        coefficients(&seg.right_log_derivative(0.0), n)?;
        let run = run_stretch(rep, xi, n, y.clone(), sign, (0.0, d), opts)?;
        if rates.is_empty() {
            rates.push(run.fs[0].clone());
        }
        for k in 1..run.ts.len() {
            let tau = run.ts[k];
            leaf.times.push(offset + tau);
            if let Some(g) = group {
                leaf.group.push(seg.element_at(g, path.segment_start(i), tau)?);
            }
            leaf.points.push(unflatten(&run.ys[k], dim, n));
            rates.push(run.fs[k].clone());
        }
        y = run.ys.last().expect("initial point").clone();
        if let FlowStatus::Escaped { t, kind } = status_of(&run) {
            leaf.status = FlowStatus::Escaped { t: offset + t, kind };
            return Ok((leaf, rates));
        }
        offset += d;
    }
    if rates.is_empty() {
        rates.push(vec![0.0; y.len()]);
    }
    Ok((leaf, rates))
}

/// Outcome of a completeness probe for one direction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompletenessReport {
    pub complete: bool,
    /// `|t|` of the earliest escape over the grid and both time directions.
    pub escape_time: Option<f64>,
    /// `+1` for forward time, `-1` for backward.
    pub escape_direction: Option<f64>,
    pub escape_kind: Option<EscapeKind>,
    pub escape_start: Option<Vec<f64>>,
    pub escape_point: Option<Vec<f64>>,
    pub probe_horizon: f64,
}

/// Integrates each body direction from every grid point to `±horizon`.
pub fn completeness_probe(
    rep: &Representation,
    directions: &[AlgebraElement],
    horizon: f64,
    grid: &[Vec<f64>],
    sign: f64,
    opts: &FlowOptions,
) -> Result<Vec<CompletenessReport>, FlowError> {
    let mut out = Vec::with_capacity(directions.len());
    for x in directions {
        let x = x.body_element();
        let mut report = CompletenessReport {
            complete: true,
            escape_time: None,
            escape_direction: None,
            escape_kind: None,
            escape_start: None,
            escape_point: None,
            probe_horizon: horizon,
        };
        for m0 in grid {
            for dir in [1.0, -1.0] {
                let p = FlowProblem::fixed(rep, x.clone(), real_point(m0), sign, dir * horizon).with_options(*opts);
                let traj = integrate_flow(&p)?;
                if let FlowStatus::Escaped { t, kind } = traj.status() {
                    if report.escape_time.is_none_or(|best| t.abs() < best) {
                        report.complete = false;
                        report.escape_time = Some(t.abs());
                        report.escape_direction = Some(dir);
                        report.escape_kind = Some(kind);
                        report.escape_start = Some(m0.clone());
                        report.escape_point = Some(traj.final_body());
                    }
                }
            }
        }
        out.push(report);
    }
    Ok(out)
}

/// Holonomy of a closed loop acting on `m0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolonomyReport {
    /// Endpoint bodies, reduced on periodic coordinates.
    pub endpoint: Vec<f64>,
    /// Unwrapped change minus whole periods.
    pub displacement: Vec<f64>,
    /// Whole periods traversed per coordinate.
    pub winding: Vec<i64>,
    pub trivial: bool,
}

/// Tolerance used to decide that an unwrapped change is a whole number of
/// periods, and that a displacement vanishes.
pub const HOLONOMY_TOL: f64 = 1e-7;

pub fn holonomy(
    rep: &Representation,
    group: &Group,
    lp: &GroupPath,
    m0: &[f64],
    sign: f64,
    opts: &FlowOptions,
) -> Result<HolonomyReport, FlowError> {
    if !lp.is_closed(group, 1e-12)? {
        return Err(FlowError::Invalid("loop is not closed".into()));
    }
    let leaf = lift_path(rep, group, lp, &real_point(m0), sign, opts)?;
    let end = leaf.final_body();
    let chart = rep.chart();
    let mut displacement = Vec::with_capacity(end.len());
    let mut winding = Vec::with_capacity(end.len());
    for i in 0..end.len() {
        let total = end[i] - m0[i];
        let (w, d) = match chart.period(i) {
            Some(p) => {
                let r = (total / p).round();
                let w = if (total - r * p).abs() <= HOLONOMY_TOL { r } else { (total / p).floor() };
                (w as i64, total - w * p)
            }
            None => (0, total),
        };
        winding.push(w);
        displacement.push(d);
    }
    let mut endpoint = end;
    chart.normalize(&mut endpoint);
    let trivial = displacement.iter().all(|d| d.abs() <= HOLONOMY_TOL);
    Ok(HolonomyReport {
        endpoint,
        displacement,
        winding,
        trivial,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::algebra::{library, StructureConstants};
    use crate::fields::Chart;

    fn rep(sc: StructureConstants, chart: Chart, rho: &[&[&str]]) -> Representation {
        let rho: Vec<Vec<String>> = rho.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
        Representation::parse(sc, chart, &rho, &BTreeMap::new()).unwrap()
    }

    fn line() -> Chart {
        Chart::new(&["x"], &[]).unwrap()
    }

    #[test]
    fn linear_flow() {
        let r = rep(StructureConstants::abelian(1), line(), &[&["0.5"]]);
        let t = integrate_flow(&FlowProblem::fixed_real(&r, &[1.0], &[0.0], -1.0, 1.0)).unwrap();
        assert!((t.final_body()[0] + 0.5).abs() < 1e-14);
        let t = integrate_flow(&FlowProblem::fixed_real(&r, &[0.0], &[0.3], -1.0, 1.0)).unwrap();
        assert_eq!(t.final_body(), vec![0.3]);
    }

    #[test]
    fn escape_on_unit_interval() {
        let r = rep(StructureConstants::abelian(1), line().with_interval("x", Some(0.0), Some(1.0)).unwrap(), &[&["1"]]);
        let t = integrate_flow(&FlowProblem::fixed_real(&r, &[1.0], &[0.5], 1.0, 10.0)).unwrap();
        match t.status() {
            FlowStatus::Escaped { t, kind } => {
                assert_eq!(kind, EscapeKind::ChartBoundary);
                assert!((t - 0.5).abs() < 1e-8);
            }
            s => panic!("{s:?}"),
        }
    }

    #[test]
    fn nilpotent_super_flow_is_exact() {
        let chart = Chart::new(&["x"], &["th"]).unwrap();
        let r = rep(library::supertranslation(), chart, &[&["1", "0"], &["th", "1"]]);
        let n = 2;
        let t1 = Supernumber::generator(n, 1).unwrap();
        let t2 = Supernumber::generator(n, 2).unwrap();
        let x = AlgebraElement::new(vec![Supernumber::zero(n), t1.clone()]);
        let m0 = vec![Supernumber::scalar(n, 0.3), t2.clone()];
        let traj = integrate_flow(&FlowProblem::fixed(&r, x, m0, 1.0, 1.0)).unwrap();
        let end = traj.final_point();
        assert_eq!(end[0], &Supernumber::scalar(n, 0.3) + &(&t1 * &t2));
        assert_eq!(end[1], &t2 + &t1);
    }

    #[test]
    fn heisenberg_path_lift() {
        let plane = Chart::new(&["x", "y"], &[]).unwrap();
        let r = rep(library::heisenberg(), plane, &[&["1", "0"], &["0", "x"], &["0", "1"]]);
        let g = Group::nilpotent(library::heisenberg(), 2, 0).unwrap();
        let p = AlgebraElement::from_reals(&[1.0, 0.0, 0.0], 0);
        let q = AlgebraElement::from_reals(&[0.0, 1.0, 0.0], 0);
        // exp(tP) first, then exp(tQ)
        let path = GroupPath::from_word(&g, &[q, p]).unwrap();
        let leaf = lift_path(&r, &g, &path, &real_point(&[0.0, 0.0]), 1.0, &FlowOptions::default()).unwrap();
        let end = leaf.final_body();
        assert!((end[0] - 1.0).abs() < 1e-12 && (end[1] - 1.0).abs() < 1e-12, "{end:?}");
        assert_eq!(leaf.group.len(), leaf.len());
    }

    #[test]
    fn blow_up_of_quadratic_field() {
        let r = rep(StructureConstants::abelian(1), line(), &[&["x^2"]]);
        let rep_ = completeness_probe(&r, &[AlgebraElement::from_reals(&[1.0], 0)], 10.0, &[vec![1.0]], 1.0, &FlowOptions::default())
            .unwrap();
        let c = &rep_[0];
        assert!(!c.complete);
        assert_eq!(c.escape_kind, Some(EscapeKind::BlowUp));
        assert!((c.escape_time.unwrap() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn circle_holonomy() {
        let c = line().with_period("x", 1.0).unwrap();
        let g = Group::circle(0);
        let turn = GroupPath::exp_segment(&g, &AlgebraElement::from_reals(&[1.0], 0)).unwrap();
        let r = rep(StructureConstants::abelian(1), c.clone(), &[&["0.5"]]);
        let h = holonomy(&r, &g, &turn, &[0.25], 1.0, &FlowOptions::default()).unwrap();
        assert!((h.endpoint[0] - 0.75).abs() < 1e-12);
        assert!((h.displacement[0] - 0.5).abs() < 1e-12);
        assert!(!h.trivial);
        let r = rep(StructureConstants::abelian(1), c, &[&["2"]]);
        let h = holonomy(&r, &g, &turn, &[0.25], 1.0, &FlowOptions::default()).unwrap();
        assert_eq!(h.winding, vec![2]);
        assert!(h.trivial);
    }
}
