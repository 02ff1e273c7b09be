//! Reconstruction of the group action from a representation, and the checks
//! that certify it: group law, recovery of `ρ`, route independence.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::AlgebraElement;
use crate::fields::{fundamental_field_from_action, FieldError, Representation};
use crate::flows::{
    completeness_probe, holonomy, integrate_flow, lift_path, real_point, CompletenessReport, EscapeKind, FlowError,
    FlowOptions, FlowProblem, FlowStatus, HolonomyReport,
};
use crate::grassmann::{Parity, Supernumber};
use crate::group::{Group, GroupElement, GroupError, GroupPath, Segment};

#[derive(Debug, Error, Clone)]
pub enum ActionError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("route must start at the identity")]
    BasepointNotIdentity,
    #[error("route ends at a different group element")]
    RouteEndpoint,
    #[error("field along direction {direction} is incomplete: escape at |t| = {time}")]
    Incomplete {
        direction: usize,
        time: f64,
        report: Box<CompletenessReport>,
    },
    #[error("flow left the chart ({kind}) at t = {t}")]
    Escaped { t: f64, kind: EscapeKind },
    #[error("algebra dimension {algebra} does not match group dimension {group}")]
    DimensionMismatch { algebra: usize, group: usize },
}

impl ActionError {
    /// True for the failures that reflect an obstruction to integrating the
    /// representation, as opposed to malformed input.
    pub fn is_obstruction(&self) -> bool {
        matches!(
            self,
            ActionError::Incomplete { .. } | ActionError::Escaped { .. } | ActionError::Flow(FlowError::Escaped { .. })
        )
    }
}

/// How a group element is reached from the identity.
#[derive(Clone, Debug)]
pub enum Route {
    /// `exp(X₁)⋯exp(Xₙ)`; `Xₙ` acts first.
    Word(Vec<AlgebraElement>),
    Path(GroupPath),
}

impl Route {
    pub fn to_path(&self, group: &Group) -> Result<GroupPath, GroupError> {
        match self {
            Route::Word(w) => GroupPath::from_word(group, w),
            Route::Path(p) => Ok(p.clone()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ActionResult {
    /// `Φ(g, m)`, reduced on periodic coordinates.
    pub value: Vec<Supernumber>,
    pub route: Route,
    pub error_estimate: f64,
    /// Set when lifting a generating loop of the group moves the point.
    pub holonomy_flag: bool,
    pub holonomy: Option<HolonomyReport>,
}

impl ActionResult {
    pub fn body(&self) -> Vec<f64> {
        self.value.iter().map(Supernumber::body).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupLawReport {
    pub max_residual: f64,
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub max_deviation: f64,
    pub samples: usize,
}

/// Builds `Φ` from `ρ` by flowing: `Φ(exp X, m)` is the time-one flow of
/// `sign·ρ(X)` from `m`, and general elements are reached along routes.
#[derive(Clone, Debug)]
pub struct ActionEngine {
    rep: Representation,
    group: Group,
    sign: f64,
    opts: FlowOptions,
    probe: bool,
}

impl ActionEngine {
    pub fn new(rep: Representation, group: Group, sign: f64) -> Result<Self, ActionError> {
        if rep.dim() != group.dim() {
            return Err(ActionError::DimensionMismatch {
                algebra: rep.dim(),
                group: group.dim(),
            });
        }
        if sign != 1.0 && sign != -1.0 {
            return Err(FlowError::Invalid(format!("sign must be ±1, got {sign}")).into());
        }
        Ok(ActionEngine {
            rep,
            group,
            sign,
            opts: FlowOptions::default(),
            probe: true,
        })
    }

    pub fn with_options(mut self, opts: FlowOptions) -> Self {
        self.opts = opts;
        self
    }

    /// Disables the completeness probe run before each action.
    pub fn without_probe(mut self) -> Self {
        self.probe = false;
        self
    }

    /// Same representation with the opposite sign convention.
    pub fn flipped(&self) -> Self {
        ActionEngine {
            sign: -self.sign,
            ..self.clone()
        }
    }

    pub fn representation(&self) -> &Representation {
        &self.rep
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn options(&self) -> &FlowOptions {
        &self.opts
    }

    fn lift_point(&self, m: &[Supernumber], n: usize) -> Vec<Supernumber> {
        m.iter()
            .map(|v| {
                if v.num_generators() == n || v.has_soul() {
                    v.clone()
                } else {
                    Supernumber::scalar(n, v.body())
                }
            })
            .collect()
    }

    fn normalize(&self, m: &mut [Supernumber]) {
        let chart = self.rep.chart();
        for (i, v) in m.iter_mut().enumerate().take(chart.even_dim()) {
            if let Some(p) = chart.period(i) {
                let k = (v.body() / p).floor();
                if k != 0.0 {
                    v.coeffs_mut()[0] -= k * p;
                }
            }
        }
    }

    /// Probes each unit direction up to `|X|·T + 1`, where `T` is the time
    /// the route spends along `X`.
    fn probe_directions(&self, dirs: &[(AlgebraElement, f64)], m: &[Supernumber]) -> Result<(), ActionError> {
        if !self.probe {
            return Ok(());
        }
        let body: Vec<f64> = m.iter().map(Supernumber::body).collect();
        let mut reports = Vec::with_capacity(dirs.len());
        for (i, (x, duration)) in dirs.iter().enumerate() {
            let norm = x.body().iter().fold(0.0, |a: f64, c| a.max(c.abs()));
            if norm == 0.0 {
                continue;
            }
            let unit = x.body_element().scale(1.0 / norm);
            let horizon = norm * duration + 1.0;
            let r = completeness_probe(&self.rep, &[unit], horizon, &[body.clone()], self.sign, &self.opts)?;
            reports.extend(r.into_iter().map(|r| (i, r)));
        }
        for (i, r) in reports {
            if !r.complete {
                return Err(ActionError::Incomplete {
                    direction: i,
                    time: r.escape_time.unwrap_or(0.0),
                    report: Box::new(r),
                });
            }
        }
        Ok(())
    }

    fn estimate(&self, value: &[Supernumber], pieces: usize) -> f64 {
        let scale = value.iter().fold(1.0, |m: f64, v| m.max(1.0 + v.max_abs()));
        self.opts.rtol.max(self.opts.atol) * scale * pieces.max(1) as f64
    }

    /// `Φ(g, m)` as the time-one flow of `sign·ρ(log g)`.
    pub fn act_local(&self, g: &GroupElement, m: &[Supernumber]) -> Result<ActionResult, ActionError> {
        let x = self.group.log(g)?;
        let route = Route::Word(vec![x.clone()]);
        if x.max_abs() == 0.0 {
            return Ok(ActionResult {
                value: m.to_vec(),
                route,
                error_estimate: 0.0,
                holonomy_flag: false,
                holonomy: None,
            });
        }
        let n = m.first().map_or(0, Supernumber::num_generators).max(x.num_generators());
        let m = self.lift_point(m, n);
        self.probe_directions(&[(x.clone(), 1.0)], &m)?;
        let traj = integrate_flow(&FlowProblem::fixed(&self.rep, x, m, self.sign, 1.0).with_options(self.opts))?;
        if let FlowStatus::Escaped { t, kind } = traj.status() {
            return Err(ActionError::Escaped { t, kind });
        }
        let mut value = traj.final_point();
        self.normalize(&mut value);
        Ok(ActionResult {
            error_estimate: self.estimate(&value, 1),
            value,
            route,
            holonomy_flag: false,
            holonomy: None,
        })
    }

    /// Real convenience wrapper around [`Self::act_local`].
    pub fn act_local_real(&self, g: &GroupElement, m: &[f64]) -> Result<Vec<f64>, ActionError> {
        Ok(self.act_local(g, &real_point(m))?.body())
    }

    /// `Φ(g, m)` for the endpoint `g` of a route from the identity, by
    /// lifting the route through the foliation.
    pub fn act(&self, route: &Route, m: &[Supernumber]) -> Result<ActionResult, ActionError> {
        let path = route.to_path(&self.group)?;
        if self.group.distance(path.basepoint(), &self.group.identity())? > 1e-12 {
            return Err(ActionError::BasepointNotIdentity);
        }
        let holo = self.holonomy_diagnostic(m)?;
        let flag = holo.as_ref().is_some_and(|h| !h.trivial);
        if path.segments().is_empty() || path.duration() == 0.0 {
            return Ok(ActionResult {
                value: m.to_vec(),
                route: route.clone(),
                error_estimate: 0.0,
                holonomy_flag: flag,
                holonomy: holo,
            });
        }
        let n = m.first().map_or(0, Supernumber::num_generators);
        let dirs: Vec<(AlgebraElement, f64)> = path
            .segments()
            .iter()
            .flat_map(|s| match s {
                Segment::Exp { generator, duration } => vec![(generator.clone(), *duration)],
                Segment::Sampled { xi, .. } => xi.iter().map(|x| (x.clone(), s.duration())).collect(),
            })
            .collect();
        self.probe_directions(&dirs, m)?;
        let leaf = match lift_path(&self.rep, &self.group, &path, &self.lift_point(m, n), self.sign, &self.opts) {
            Ok(l) => l,
            Err(FlowError::Escaped { t, kind, .. }) => return Err(ActionError::Escaped { t, kind }),
            Err(e) => return Err(e.into()),
        };
        let mut value = leaf.final_point().to_vec();
        self.normalize(&mut value);
        Ok(ActionResult {
            error_estimate: self.estimate(&value, path.segments().len()),
            value,
            route: route.clone(),
            holonomy_flag: flag,
            holonomy: holo,
        })
    }

    /// Holonomy of the generating loop of a circle group at `m`.
    fn holonomy_diagnostic(&self, m: &[Supernumber]) -> Result<Option<HolonomyReport>, ActionError> {
        if self.group.is_simply_connected() {
            return Ok(None);
        }
        let turn = GroupPath::exp_segment(&self.group, &AlgebraElement::from_reals(&[1.0], 0))?;
        let body: Vec<f64> = m.iter().map(Supernumber::body).collect();
        match holonomy(&self.rep, &self.group, &turn, &body, self.sign, &self.opts) {
            Ok(h) => Ok(Some(h)),
            Err(FlowError::Escaped { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn random_word<R: Rng>(&self, rng: &mut R, max_len: usize) -> Vec<AlgebraElement> {
        let sc = self.rep.structure_constants();
        let len = rng.random_range(1..=max_len.max(1));
        (0..len)
            .map(|_| {
                let coords: Vec<f64> = (0..sc.dim())
                    .map(|i| match sc.parity(i) {
                        Parity::Even => rng.random_range(-1.0..1.0),
                        Parity::Odd => 0.0,
                    })
                    .collect();
                AlgebraElement::from_reals(&coords, 0)
            })
            .collect()
    }

    fn word_element(&self, w: &[AlgebraElement]) -> Result<GroupElement, ActionError> {
        let mut g = self.group.identity();
        for x in w {
            g = self.group.multiply(&g, &self.group.exp(x)?)?;
        }
        Ok(g)
    }

    /// Max over random words `u`, `v` and points `m` of
    /// `|Φ(uv, m) − Φ(u, Φ(v, m))|`, each action evaluated through the
    /// logarithm of the group element.
    pub fn verify_group_law<R: Rng>(&self, trials: usize, word_length: usize, rng: &mut R) -> Result<GroupLawReport, ActionError> {
        let chart = self.rep.chart();
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let u = self.word_element(&self.random_word(rng, word_length))?;
            let v = self.word_element(&self.random_word(rng, word_length))?;
            let m = chart.sample_point(rng, 1.0);
            let uv = self.group.multiply(&u, &v)?;
            let lhs = self.act_local_real(&uv, &m)?;
            let rhs = self.act_local_real(&u, &self.act_local_real(&v, &m)?)?;
            worst = worst.max(chart.distance(&lhs, &rhs));
        }
        Ok(GroupLawReport {
            max_residual: worst,
            trials,
        })
    }

    /// Differentiates the reconstructed action along random even basis
    /// directions at random points and compares with `ρ`.
    pub fn recover_rho<R: Rng>(&self, samples: usize, h: f64, rng: &mut R) -> Result<RecoveryReport, ActionError> {
        let sc = self.rep.structure_constants();
        let even: Vec<usize> = (0..sc.dim()).filter(|&i| sc.parity(i) == Parity::Even).collect();
        let chart = self.rep.chart();
        let mut worst: f64 = 0.0;
        if even.is_empty() {
            return Ok(RecoveryReport {
                max_deviation: 0.0,
                samples: 0,
            });
        }
        for _ in 0..samples {
            let i = even[rng.random_range(0..even.len())];
            let x = AlgebraElement::basis(sc.dim(), 0, i);
            let m = chart.sample_point(rng, 1.0);
            let phi = |y: &AlgebraElement, p: &[f64]| self.act_local_real(&self.group.exp(y)?, p);
            let recovered = fundamental_field_from_action(chart, phi, &x, &m, h, self.sign)?;
            let mut e = vec![0.0; sc.dim()];
            e[i] = 1.0;
            let direct = self.rep.eval_rho_real(&e, &m).map_err(FieldError::from)?;
            for (a, b) in recovered.iter().zip(&direct) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(RecoveryReport {
            max_deviation: worst,
            samples,
        })
    }

    /// Largest pairwise distance between the results of acting along each
    /// route; every route must end at `g`.
    pub fn path_independence(&self, g: &GroupElement, routes: &[Route], m: &[Supernumber]) -> Result<f64, ActionError> {
        let mut values = Vec::with_capacity(routes.len());
        for r in routes {
            let path = r.to_path(&self.group)?;
            if self.group.distance(path.endpoint(), g)? > 1e-9 {
                return Err(ActionError::RouteEndpoint);
            }
            values.push(self.act(r, m)?.value);
        }
        let chart = self.rep.chart();
        let mut spread: f64 = 0.0;
        for a in 0..values.len() {
            for b in a + 1..values.len() {
                let ba: Vec<f64> = values[a].iter().map(Supernumber::body).collect();
                let bb: Vec<f64> = values[b].iter().map(Supernumber::body).collect();
                spread = spread.max(chart.distance(&ba, &bb));
                for (p, q) in values[a].iter().zip(&values[b]) {
                    spread = spread.max((&p.soul() - &q.soul()).max_abs());
                }
            }
        }
        Ok(spread)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::algebra::{library, StructureConstants};
    use crate::fields::Chart;

    fn rep(sc: StructureConstants, chart: Chart, rho: &[&[&str]]) -> Representation {
        let rho: Vec<Vec<String>> = rho.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect();
        Representation::parse(sc, chart, &rho, &BTreeMap::new()).unwrap()
    }

    fn heisenberg(sign: f64) -> ActionEngine {
        let plane = Chart::new(&["x", "y"], &[]).unwrap();
        let r = rep(library::heisenberg(), plane, &[&["1", "0"], &["0", "x"], &["0", "1"]]);
        let g = Group::nilpotent(library::heisenberg(), 2, 0).unwrap();
        ActionEngine::new(r, g, sign).unwrap()
    }

    fn affine() -> ActionEngine {
        let sc = StructureConstants::from_brackets(vec![Parity::Even; 2], &[(0, 1, 1, -1.0)]).unwrap();
        let r = rep(sc, Chart::new(&["x"], &[]).unwrap(), &[&["x"], &["1"]]);
        let g = Group::matrix(vec![dmatrix![-1.0, 0.0; 0.0, 0.0], dmatrix![0.0, -1.0; 0.0, 0.0]], 0).unwrap();
        ActionEngine::new(r, g, -1.0).unwrap()
    }

    #[test]
    fn identity_acts_trivially() {
        let e = heisenberg(-1.0);
        let m = real_point(&[0.3, 0.7]);
        assert_eq!(e.act_local(&e.group().identity(), &m).unwrap().value, m);
        assert_eq!(e.act(&Route::Word(vec![]), &m).unwrap().value, m);
    }

    #[test]
    fn heisenberg_words() {
        let e = heisenberg(1.0);
        let p = AlgebraElement::from_reals(&[1.0, 0.0, 0.0], 0);
        let q = AlgebraElement::from_reals(&[0.0, 1.0, 0.0], 0);
        let m = real_point(&[0.0, 0.0]);
        let a = e.act(&Route::Word(vec![p.clone(), q.clone()]), &m).unwrap().body();
        assert!((a[0] - 1.0).abs() < 1e-12 && a[1].abs() < 1e-12, "{a:?}");
        let b = e.act(&Route::Word(vec![q, p]), &m).unwrap().body();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12, "{b:?}");
    }

    #[test]
    fn sign_minus_one_gives_a_left_action() {
        // g = exp(P) exp(Q) from (0.3, 0.7): both routes give (-0.7, 0.4)
        let e = heisenberg(-1.0);
        let p = AlgebraElement::from_reals(&[1.0, 0.0, 0.0], 0);
        let q = AlgebraElement::from_reals(&[0.0, 1.0, 0.0], 0);
        let m = real_point(&[0.3, 0.7]);
        let word = e.act(&Route::Word(vec![p.clone(), q.clone()]), &m).unwrap().body();
        let g = e.word_element(&[p, q]).unwrap();
        let local = e.act_local(&g, &m).unwrap().body();
        for v in [&word, &local] {
            assert!((v[0] + 0.7).abs() < 1e-10 && (v[1] - 0.4).abs() < 1e-10, "{v:?}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(e.verify_group_law(10, 4, &mut rng).unwrap().max_residual < 1e-8);
        // the other convention is an anti-action here
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(heisenberg(1.0).verify_group_law(10, 4, &mut rng).unwrap().max_residual > 1e-3);
    }

    #[test]
    fn affine_action() {
        let e = affine();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(e.verify_group_law(20, 4, &mut rng).unwrap().max_residual < 1e-8);
        assert!(e.recover_rho(20, 1e-4, &mut rng).unwrap().max_deviation < 1e-6);
        // exp(a e1) with sign +1 scales by e^a
        let g = e.group().exp(&AlgebraElement::from_reals(&[1.0, 0.0], 0)).unwrap();
        let v = e.flipped().act_local_real(&g, &[2.0]).unwrap();
        assert!((v[0] - 2.0 * 1f64.exp()).abs() < 1e-9);
        // the two conventions are mutually inverse
        let back = e.act_local_real(&g, &v).unwrap();
        assert!((back[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn incompleteness_is_reported() {
        let chart = Chart::new(&["x"], &[]).unwrap().with_interval("x", Some(0.0), Some(1.0)).unwrap();
        let r = rep(StructureConstants::abelian(1), chart, &[&["1"]]);
        let e = ActionEngine::new(r, Group::euclidean(1, 0), 1.0).unwrap();
        let g = e.group().exp(&AlgebraElement::from_reals(&[0.1], 0)).unwrap();
        let err = e.act_local(&g, &real_point(&[0.5])).unwrap_err();
        assert!(err.is_obstruction(), "{err}");
    }

    #[test]
    fn circle_route_dependence() {
        let chart = Chart::new(&["x"], &[]).unwrap().with_period("x", 1.0).unwrap();
        let r = rep(StructureConstants::abelian(1), chart, &[&["0.5"]]);
        let e = ActionEngine::new(r, Group::circle(0), 1.0).unwrap();
        let m = real_point(&[0.25]);
        let trivial = Route::Word(vec![]);
        let turn = Route::Word(vec![AlgebraElement::from_reals(&[1.0], 0)]);
        let spread = e.path_independence(&e.group().identity(), &[trivial, turn.clone()], &m).unwrap();
        assert!((spread - 0.5).abs() < 1e-10);
        let res = e.act(&turn, &m).unwrap();
        assert!(res.holonomy_flag);
        assert!((res.body()[0] - 0.75).abs() < 1e-10);
    }
}
