//! Charts, vector fields on them, and representations of a (super) Lie
//! algebra by vector fields.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraElement, StructureConstants};
use crate::expr::{parse, Expr, ExprError, Scalar, VarContext};
use crate::grassmann::{Parity, Supernumber};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("component '{coord}' of field {field}: {source}")]
    Parse {
        field: usize,
        coord: String,
        source: ExprError,
    },
    #[error("component '{coord}' of field {field} must be {expected}")]
    ComponentParity {
        field: usize,
        coord: String,
        expected: Parity,
    },
    #[error("expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("field {field} must be {expected} to match its basis element")]
    FieldParity { field: usize, expected: Parity },
    #[error("point outside the chart: {coord} = {value}")]
    OutOfChart { coord: String, value: f64 },
    #[error("algebra element is not even")]
    OddTotalParity,
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Box constraint on the body of one even coordinate. `None` is unbounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Interval {
    pub const ALL: Interval = Interval { lo: None, hi: None };
}

/// A single coordinate chart with `n₀` even and `n₁` odd coordinates.
///
/// Even coordinates come first in every point. Domain constraints and
/// periods apply to bodies only.
#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    ctx: VarContext,
    even_dim: usize,
    domain: Vec<Interval>,
    period: Vec<Option<f64>>,
}

impl Chart {
    pub fn new(even: &[&str], odd: &[&str]) -> Result<Self, FieldError> {
        let mut ctx = VarContext::new();
        for (names, parity) in [(even, Parity::Even), (odd, Parity::Odd)] {
            for name in names {
                let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if !valid || matches!(*name, "sin" | "cos" | "exp") {
                    return Err(FieldError::InvalidChart(format!("bad coordinate name '{name}'")));
                }
                if ctx.index_of(name).is_some() {
                    return Err(FieldError::InvalidChart(format!("duplicate coordinate '{name}'")));
                }
                ctx.push_var(name, parity);
            }
        }
        if ctx.is_empty() {
            return Err(FieldError::InvalidChart("no coordinates".into()));
        }
        Ok(Chart {
            ctx,
            even_dim: even.len(),
            domain: vec![Interval::ALL; even.len()],
            period: vec![None; even.len()],
        })
    }

    pub fn with_interval(mut self, coord: &str, lo: Option<f64>, hi: Option<f64>) -> Result<Self, FieldError> {
        let i = self.even_index(coord)?;
        if let (Some(a), Some(b)) = (lo, hi) {
            if a >= b {
                return Err(FieldError::InvalidChart(format!("empty domain for '{coord}'")));
            }
        }
        if self.period[i].is_some() {
            return Err(FieldError::InvalidChart(format!("periodic '{coord}' cannot be bounded")));
        }
        self.domain[i] = Interval { lo, hi };
        Ok(self)
    }

    pub fn with_period(mut self, coord: &str, period: f64) -> Result<Self, FieldError> {
        let i = self.even_index(coord)?;
        if period <= 0.0 || !period.is_finite() {
            return Err(FieldError::InvalidChart(format!("bad period for '{coord}'")));
        }
        if self.domain[i] != Interval::ALL {
            return Err(FieldError::InvalidChart(format!("periodic '{coord}' cannot be bounded")));
        }
        self.period[i] = Some(period);
        Ok(self)
    }

    fn even_index(&self, coord: &str) -> Result<usize, FieldError> {
        match self.ctx.index_of(coord) {
            Some(i) if i < self.even_dim => Ok(i),
            _ => Err(FieldError::InvalidChart(format!("'{coord}' is not an even coordinate"))),
        }
    }

    pub fn context(&self) -> &VarContext {
        &self.ctx
    }

    pub fn dim(&self) -> usize {
        self.ctx.len()
    }

    pub fn even_dim(&self) -> usize {
        self.even_dim
    }

    pub fn odd_dim(&self) -> usize {
        self.ctx.len() - self.even_dim
    }

    pub fn name(&self, i: usize) -> &str {
        self.ctx.name(i)
    }

    pub fn names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| self.name(i).to_string()).collect()
    }

    pub fn parity(&self, i: usize) -> Parity {
        self.ctx.parity(i)
    }

    pub fn interval(&self, i: usize) -> Interval {
        self.domain[i]
    }

    pub fn period(&self, i: usize) -> Option<f64> {
        self.period.get(i).copied().flatten()
    }

    pub fn has_periodic(&self) -> bool {
        self.period.iter().any(Option::is_some)
    }

    /// Open-box membership of the even bodies (`body` has all coordinates).
    pub fn contains(&self, body: &[f64]) -> bool {
        self.boundary_distance(body) > 0.0
    }

    /// Signed distance to the nearest box face; `+∞` without constraints.
    pub fn boundary_distance(&self, body: &[f64]) -> f64 {
        let mut d = f64::INFINITY;
        for (x, iv) in body.iter().zip(&self.domain) {
            if !x.is_finite() {
                return f64::NEG_INFINITY;
            }
            if let Some(lo) = iv.lo {
                d = d.min(x - lo);
            }
            if let Some(hi) = iv.hi {
                d = d.min(hi - x);
            }
        }
        d
    }

    pub fn check_point(&self, body: &[f64]) -> Result<(), FieldError> {
        if body.len() != self.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: self.dim(),
                got: body.len(),
            });
        }
        for (i, x) in body.iter().enumerate().take(self.even_dim) {
            let iv = self.domain[i];
            let inside = x.is_finite() && iv.lo.is_none_or(|lo| *x > lo) && iv.hi.is_none_or(|hi| *x < hi);
            if !inside {
                return Err(FieldError::OutOfChart {
                    coord: self.name(i).to_string(),
                    value: *x,
                });
            }
        }
        Ok(())
    }

    /// Reduces periodic coordinates into `[0, P)`; returns the number of
    /// periods removed from each even coordinate.
    pub fn normalize(&self, body: &mut [f64]) -> Vec<i64> {
        let mut winding = vec![0; self.even_dim];
        for (i, p) in self.period.iter().enumerate() {
            if let Some(p) = p {
                let k = (body[i] / p).floor();
                body[i] -= k * p;
                if body[i] >= *p {
                    body[i] -= p;
                }
                winding[i] = k as i64;
            }
        }
        winding
    }

    /// `b − a`, taken as the shortest representative on periodic coordinates.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .enumerate()
            .map(|(i, (x, y))| {
                let d = y - x;
                match self.period(i) {
                    Some(p) => d - p * (d / p).round(),
                    None => d,
                }
            })
            .collect()
    }

    /// Max-norm distance, circular on periodic coordinates.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.displacement(a, b).iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Random point with even bodies drawn from `[-range, range]` clipped to
    /// the domain; odd bodies are zero.
    pub fn sample_point<R: Rng>(&self, rng: &mut R, range: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        for (i, slot) in p.iter_mut().enumerate().take(self.even_dim) {
            let iv = self.domain[i];
            let (lo, hi) = match self.period(i) {
                Some(per) => (0.0, per),
                None => (iv.lo.unwrap_or(-range).max(-range), iv.hi.unwrap_or(range).min(range)),
            };
            let (lo, hi) = if lo < hi { (lo, hi) } else { (iv.lo.unwrap_or(hi - 1.0), iv.hi.unwrap_or(lo + 1.0)) };
            // stay off the boundary of the open box
            let margin = 0.05 * (hi - lo);
            *slot = rng.random_range(lo + margin..hi - margin);
        }
        p
    }
}

/// Chart in scenario files: `{"even": [...], "odd": [...], "domain":
/// {"x": [lo, hi]}, "periodic": {"x": 1.0}}`; `null` bounds are open.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    #[serde(default)]
    pub even: Vec<String>,
    #[serde(default)]
    pub odd: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub domain: BTreeMap<String, [Option<f64>; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub periodic: BTreeMap<String, f64>,
}

impl ChartSpec {
    pub fn build(&self) -> Result<Chart, FieldError> {
        let even: Vec<&str> = self.even.iter().map(String::as_str).collect();
        let odd: Vec<&str> = self.odd.iter().map(String::as_str).collect();
        let mut chart = Chart::new(&even, &odd)?;
        for (name, [lo, hi]) in &self.domain {
            chart = chart.with_interval(name, *lo, *hi)?;
        }
        for (name, p) in &self.periodic {
            chart = chart.with_period(name, *p)?;
        }
        Ok(chart)
    }
}

/// Homogeneous vector field `Σ V^i ∂_i` with coefficients on the left.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    parity: Parity,
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(chart: &Chart, parity: Parity, components: Vec<Expr>) -> Result<Self, FieldError> {
        Self::checked(chart, parity, components, 0)
    }

    fn checked(chart: &Chart, parity: Parity, components: Vec<Expr>, field: usize) -> Result<Self, FieldError> {
        if components.len() != chart.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: chart.dim(),
                got: components.len(),
            });
        }
        for (i, c) in components.iter().enumerate() {
            let expected = parity + chart.parity(i);
            if !c.is_homogeneous(expected) {
                return Err(FieldError::ComponentParity {
                    field,
                    coord: chart.name(i).to_string(),
                    expected,
                });
            }
        }
        Ok(VectorField { parity, components })
    }

    pub fn parse(chart: &Chart, parity: Parity, components: &[&str]) -> Result<Self, FieldError> {
        Self::parse_with(chart, chart.context(), parity, components, 0)
    }

    fn parse_with(
        chart: &Chart,
        ctx: &VarContext,
        parity: Parity,
        components: &[&str],
        field: usize,
    ) -> Result<Self, FieldError> {
        if components.len() != chart.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: chart.dim(),
                got: components.len(),
            });
        }
        let exprs = components
            .iter()
            .enumerate()
            .map(|(i, s)| {
                parse(s, ctx).map_err(|source| FieldError::Parse {
                    field,
                    coord: chart.name(i).to_string(),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::checked(chart, parity, exprs, field)
    }

    pub fn zero(chart: &Chart, parity: Parity) -> Self {
        VectorField {
            parity,
            components: vec![Expr::zero(); chart.dim()],
        }
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.components[i]
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    pub fn is_polynomial(&self) -> bool {
        self.components.iter().all(Expr::is_polynomial)
    }

    pub fn max_coeff(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.max_coeff()))
    }

    /// `V(f) = Σ V^i ∂_i f`.
    pub fn apply(&self, chart: &Chart, f: &Expr) -> Expr {
        let mut acc = Expr::zero();
        for (i, c) in self.components.iter().enumerate() {
            if !c.is_zero() {
                acc = acc.add(&c.mul(&f.differentiate(chart.context(), i)));
            }
        }
        acc
    }

    /// Linear combination `Σ c_k V_k` of fields with a common parity.
    pub fn combination(chart: &Chart, parity: Parity, terms: &[(f64, &VectorField)]) -> Self {
        let mut comps = vec![Expr::zero(); chart.dim()];
        for (c, v) in terms {
            if *c == 0.0 {
                continue;
            }
            for (slot, e) in comps.iter_mut().zip(&v.components) {
                *slot = slot.add(&e.scale(*c));
            }
        }
        VectorField {
            parity,
            components: comps,
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            parity: self.parity,
            components: self.components.iter().zip(&other.components).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn display(&self, chart: &Chart) -> Vec<String> {
        self.components.iter().map(|c| c.display(chart.context())).collect()
    }
}

/// Graded commutator `[a, b] = a∘b − (−1)^{|a||b|} b∘a`.
pub fn graded_bracket_fields(chart: &Chart, a: &VectorField, b: &VectorField) -> VectorField {
    let sign = a.parity.koszul(b.parity);
    let components = (0..chart.dim())
        .map(|j| {
            a.apply(chart, &b.components[j])
                .sub(&b.apply(chart, &a.components[j]).scale(sign))
        })
        .collect();
    VectorField {
        parity: a.parity + b.parity,
        components,
    }
}

/// Outcome of [`Representation::validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Largest residual over all basis pairs.
    pub residual: f64,
    /// 0-based pair attaining it.
    pub worst_pair: Option<(usize, usize)>,
    /// False when some residual did not cancel in normal form and was
    /// measured numerically at sample points instead.
    pub symbolic: bool,
}

/// A map from basis elements to vector fields on one chart.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    sc: StructureConstants,
    chart: Chart,
    fields: Vec<VectorField>,
}

impl Representation {
    pub fn new(sc: StructureConstants, chart: Chart, fields: Vec<VectorField>) -> Result<Self, FieldError> {
        if fields.len() != sc.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: sc.dim(),
                got: fields.len(),
            });
        }
        for (i, f) in fields.iter().enumerate() {
            if f.parity != sc.parity(i) {
                return Err(FieldError::FieldParity {
                    field: i,
                    expected: sc.parity(i),
                });
            }
        }
        Ok(Representation { sc, chart, fields })
    }

    /// Parses one list of component strings per basis element; `params`
    /// are substituted as constants.
    pub fn parse(
        sc: StructureConstants,
        chart: Chart,
        rho: &[Vec<String>],
        params: &BTreeMap<String, f64>,
    ) -> Result<Self, FieldError> {
        if rho.len() != sc.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: sc.dim(),
                got: rho.len(),
            });
        }
        let mut ctx = chart.context().clone();
        for (k, v) in params {
            ctx.set_param(k, *v);
        }
        let fields = rho
            .iter()
            .enumerate()
            .map(|(i, comps)| {
                let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
                VectorField::parse_with(&chart, &ctx, sc.parity(i), &refs, i)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(sc, chart, fields)
    }

    pub fn structure_constants(&self) -> &StructureConstants {
        &self.sc
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &VectorField {
        &self.fields[i]
    }

    pub fn dim(&self) -> usize {
        self.sc.dim()
    }

    pub fn is_polynomial(&self) -> bool {
        self.fields.iter().all(VectorField::is_polynomial)
    }

    /// `[ρ(e_i), ρ(e_j)] − Σ_k c_ij^k ρ(e_k)`.
    pub fn residual_field(&self, i: usize, j: usize) -> VectorField {
        let lhs = graded_bracket_fields(&self.chart, &self.fields[i], &self.fields[j]);
        let terms: Vec<(f64, &VectorField)> = (0..self.dim()).map(|k| (self.sc.get(i, j, k), &self.fields[k])).collect();
        let rhs = VectorField::combination(&self.chart, lhs.parity, &terms);
        lhs.sub(&rhs)
    }

    /// Checks the commutation relations on every basis pair. Residuals that
    /// survive in normal form but involve transcendental or reciprocal atoms
    /// are evaluated at `samples` random chart points (odd coordinates bound
    /// to free generators) since the normal form does not apply identities
    /// such as `sin² + cos² = 1`.
    pub fn validate<R: Rng>(&self, samples: usize, rng: &mut R) -> ValidationReport {
        let mut report = ValidationReport {
            residual: 0.0,
            worst_pair: None,
            symbolic: true,
        };
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let r = self.residual_field(i, j);
                if r.is_zero() {
                    continue;
                }
                let value = if r.is_polynomial() {
                    r.max_coeff()
                } else {
                    report.symbolic = false;
                    self.sampled_magnitude(&r, samples.max(1), rng)
                };
                if value > report.residual {
                    report.residual = value;
                    report.worst_pair = Some((i, j));
                }
            }
        }
        report
    }

    fn sampled_magnitude<R: Rng>(&self, v: &VectorField, samples: usize, rng: &mut R) -> f64 {
        let n = self.chart.odd_dim();
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let body = self.chart.sample_point(rng, 2.0);
            let point: Vec<Supernumber> = (0..self.chart.dim())
                .map(|i| match self.chart.parity(i) {
                    Parity::Even => Supernumber::scalar(n, body[i]),
                    Parity::Odd => Supernumber::generator(n, i - self.chart.even_dim() + 1).expect("odd generator"),
                })
                .collect();
            for c in v.components() {
                match c.eval(&point, &Supernumber::zero(n)) {
                    Ok(val) => worst = worst.max(val.max_abs()),
                    Err(_) => return f64::INFINITY,
                }
            }
        }
        worst
    }

    /// `ρ(X)|_m = Σ_i X^i ρ(e_i)|_m` over any [`Scalar`]; no checks.
    pub fn eval_rho_with<S: Scalar>(&self, x: &[S], m: &[S], proto: &S) -> Result<Vec<S>, ExprError> {
        let mut out = vec![proto.constant_like(0.0); self.chart.dim()];
        for (xi, f) in x.iter().zip(&self.fields) {
            for (slot, c) in out.iter_mut().zip(&f.components) {
                if c.is_zero() {
                    continue;
                }
                *slot = slot.add(&xi.mul(&c.eval(m, proto)?));
            }
        }
        Ok(out)
    }

    /// Real fast path on bodies; odd entries of `m` must be zero.
    pub fn eval_rho_real(&self, x: &[f64], m: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.eval_rho_with(x, m, &0.0)
    }

    /// `ρ(X)|_m` for an even `X` at an in-chart supernumber point.
    pub fn eval_rho(&self, x: &AlgebraElement, m: &[Supernumber]) -> Result<Vec<Supernumber>, FieldError> {
        if x.dim() != self.dim() {
            return Err(FieldError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        if !x.is_even(&self.sc) {
            return Err(FieldError::OddTotalParity);
        }
        let n = x.num_generators();
        let body: Vec<f64> = m.iter().map(Supernumber::body).collect();
        self.chart.check_point(&body)?;
        // parities of the point
        for (i, v) in m.iter().enumerate() {
            let ok = v.num_generators() == n
                && match self.chart.parity(i) {
                    Parity::Even => v.is_even(),
                    Parity::Odd => v.is_odd(),
                };
            if !ok {
                return Err(ExprError::ParityMismatch {
                    var: self.chart.name(i).to_string(),
                }
                .into());
            }
        }
        Ok(self.eval_rho_with(x.coords(), m, &Supernumber::zero(n))?)
    }
}

/// Central-difference fundamental field of an action at `m` along `x`,
/// where `phi(Y, m)` evaluates `Φ(exp Y, m)`.
///
/// With `sign = -1` this is `(Φ(exp(−hX), m) − Φ(exp(hX), m)) / 2h`; the
/// other sign differentiates along `exp(+tX)`. Differences on periodic
/// coordinates take the short way round.
pub fn fundamental_field_from_action<F, E>(
    chart: &Chart,
    mut phi: F,
    x: &AlgebraElement,
    m: &[f64],
    h: f64,
    sign: f64,
) -> Result<Vec<f64>, E>
where
    F: FnMut(&AlgebraElement, &[f64]) -> Result<Vec<f64>, E>,
{
    let plus = phi(&x.scale(sign * h), m)?;
    let minus = phi(&x.scale(-sign * h), m)?;
    Ok(chart.displacement(&minus, &plus).into_iter().map(|d| d / (2.0 * h)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::library;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line() -> Chart {
        Chart::new(&["x"], &[]).unwrap()
    }

    fn field(chart: &Chart, parity: Parity, comps: &[&str]) -> VectorField {
        VectorField::parse(chart, parity, comps).unwrap()
    }

    fn rep(sc: StructureConstants, chart: Chart, rho: &[&[&str]]) -> Representation {
        let rho: Vec<Vec<String>> = rho.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
        Representation::parse(sc, chart, &rho, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn brackets() {
        let c = line();
        let dx = field(&c, Parity::Even, &["1"]);
        let xdx = field(&c, Parity::Even, &["x"]);
        assert_eq!(graded_bracket_fields(&c, &dx, &xdx), dx);
        let s = field(&c, Parity::Even, &["sin(x)"]);
        assert!(graded_bracket_fields(&c, &s, &s).is_zero());

        let sc = Chart::new(&["x"], &["th"]).unwrap();
        let d = field(&sc, Parity::Odd, &["th", "1"]);
        let b = graded_bracket_fields(&sc, &d, &d);
        assert_eq!(b, field(&sc, Parity::Even, &["2", "0"]));
    }

    #[test]
    fn component_parity_is_checked() {
        let sc = Chart::new(&["x"], &["th"]).unwrap();
        let err = VectorField::parse(&sc, Parity::Odd, &["1", "1"]).unwrap_err();
        assert!(matches!(err, FieldError::ComponentParity { .. }));
        assert!(VectorField::parse(&sc, Parity::Even, &["x", "th"]).is_ok());
    }

    #[test]
    fn validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let plane = Chart::new(&["x", "y"], &[]).unwrap();
        let h = rep(library::heisenberg(), plane.clone(), &[&["1", "0"], &["0", "x"], &["0", "1"]]);
        assert_eq!(h.validate(4, &mut rng).residual, 0.0);
        let flipped = StructureConstants::from_brackets(vec![Parity::Even; 3], &[(0, 1, 2, -1.0)]).unwrap();
        let bad = rep(flipped, plane, &[&["1", "0"], &["0", "x"], &["0", "1"]]);
        let r = bad.validate(4, &mut rng);
        assert_eq!(r.residual, 2.0);
        assert_eq!(r.worst_pair, Some((0, 1)));

        let sl2 = StructureConstants::from_brackets(
            vec![Parity::Even; 3],
            &[(0, 1, 0, 1.0), (0, 2, 1, 2.0), (1, 2, 2, 1.0)],
        )
        .unwrap();
        let s = rep(sl2, line(), &[&["1"], &["x"], &["x^2"]]);
        assert_eq!(s.validate(4, &mut rng).residual, 0.0);
    }

    #[test]
    fn numeric_fallback_for_trig_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = Chart::new(&["x"], &[]).unwrap();
        let sc = StructureConstants::from_brackets(vec![Parity::Even; 2], &[(0, 1, 0, 1.0)]).unwrap();
        // [∂x, f ∂x] = f' ∂x should equal ∂x; f' = sin² + cos² only cancels numerically
        let r = rep(sc, c, &[&["1"], &["x*sin(x)^2 + x*cos(x)^2"]]);
        let v = r.validate(8, &mut rng);
        assert!(!v.symbolic);
        assert!(v.residual < 1e-12, "{v:?}");
    }

    #[test]
    fn eval_rho_examples() {
        let params: BTreeMap<String, f64> = [("lambda".to_string(), 0.5)].into();
        let r = Representation::parse(
            StructureConstants::abelian(1),
            line().with_interval("x", Some(0.0), Some(1.0)).unwrap(),
            &[vec!["lambda".into()]],
            &params,
        )
        .unwrap();
        let v = r.eval_rho(&AlgebraElement::from_reals(&[2.0], 0), &[Supernumber::scalar(0, 0.3)]).unwrap();
        assert_eq!(v[0].body(), 1.0);
        let z = r.eval_rho(&AlgebraElement::from_reals(&[0.0], 0), &[Supernumber::scalar(0, 0.3)]).unwrap();
        assert!(z[0].is_zero());
        assert!(matches!(
            r.eval_rho(&AlgebraElement::from_reals(&[1.0], 0), &[Supernumber::scalar(0, 1.5)]),
            Err(FieldError::OutOfChart { .. })
        ));

        let chart = Chart::new(&["x"], &["th"]).unwrap();
        let st = rep(library::supertranslation(), chart, &[&["1", "0"], &["th", "1"]]);
        let n = 1;
        let th = Supernumber::generator(n, 1).unwrap();
        let m = [Supernumber::scalar(n, 0.2), th.clone()];
        let v = st.eval_rho_with(&[Supernumber::zero(n), Supernumber::scalar(n, 1.0)], &m, &Supernumber::zero(n)).unwrap();
        assert_eq!(v, vec![th, Supernumber::scalar(n, 1.0)]);
        // odd coefficient on an even basis element makes X odd
        let odd_x = AlgebraElement::new(vec![Supernumber::generator(n, 1).unwrap(), Supernumber::zero(n)]);
        assert_eq!(st.eval_rho(&odd_x, &m).unwrap_err(), FieldError::OddTotalParity);
    }

    #[test]
    fn periodic_helpers() {
        let c = line().with_period("x", 1.0).unwrap();
        let mut p = vec![2.25];
        assert_eq!(c.normalize(&mut p), vec![2]);
        assert_eq!(p, vec![0.25]);
        let mut p = vec![-0.25];
        assert_eq!(c.normalize(&mut p), vec![-1]);
        assert_eq!(p, vec![0.75]);
        assert!((c.distance(&[0.95], &[0.05]) - 0.1).abs() < 1e-15);
        assert!(line().with_interval("x", Some(1.0), Some(0.0)).is_err());
    }

    #[test]
    fn fundamental_field_of_translation() {
        // Φ(g, x) = x + 2g on the circle: fundamental field −2∂x
        let c = line().with_period("x", 1.0).unwrap();
        let phi = |g: &AlgebraElement, m: &[f64]| -> Result<Vec<f64>, ()> {
            let mut out = vec![m[0] + 2.0 * g.body()[0]];
            c.normalize(&mut out);
            Ok(out)
        };
        let v = fundamental_field_from_action(&c, phi, &AlgebraElement::from_reals(&[1.0], 0), &[0.999], 1e-4, -1.0).unwrap();
        assert!((v[0] + 2.0).abs() < 1e-9);
        let trivial = |_: &AlgebraElement, m: &[f64]| -> Result<Vec<f64>, ()> { Ok(m.to_vec()) };
        let v = fundamental_field_from_action(&c, trivial, &AlgebraElement::from_reals(&[1.0], 0), &[0.5], 1e-4, -1.0).unwrap();
        assert_eq!(v, vec![0.0]);
    }
}
