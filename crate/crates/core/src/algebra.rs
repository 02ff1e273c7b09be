//! (Super) Lie algebras given by real structure constants on a homogeneous basis.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grassmann::{GrassmannError, Parity, Supernumber};

/// Residuals at or below this are float noise for exact user-supplied constants.
pub const VALIDATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("basis index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("c[{i}][{j}][{k}] is nonzero but parity(e_{k}) != parity(e_{i}) + parity(e_{j})")]
    ParityViolation { i: usize, j: usize, k: usize },
    #[error("bracket [e_{i}, e_{j}] given twice with incompatible coefficients")]
    InconsistentBracket { i: usize, j: usize },
    #[error("algebra is not nilpotent of class {0}")]
    NotNilpotent(usize),
    #[error(transparent)]
    Grassmann(#[from] GrassmannError),
}

/// Maximum defect of a validation check, with the index tuple where it occurs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub max: f64,
    pub at: Option<Vec<usize>>,
}

impl ResidualReport {
    fn new() -> Self {
        ResidualReport { max: 0.0, at: None }
    }

    fn record(&mut self, value: f64, at: &[usize]) {
        if value.abs() > self.max {
            self.max = value.abs();
            self.at = Some(at.to_vec());
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max <= tol
    }
}

/// `[e_i, e_j] = Σ_k c[i][j][k] e_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    parities: Vec<Parity>,
    c: Vec<f64>,
}

impl StructureConstants {
    /// Builds from a dense tensor in `[i][j][k]` row-major order.
    pub fn new(parities: Vec<Parity>, c: Vec<f64>) -> Result<Self, AlgebraError> {
        let dim = parities.len();
        if c.len() != dim * dim * dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: dim * dim * dim,
                got: c.len(),
            });
        }
        let sc = StructureConstants { dim, parities, c };
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    if sc.get(i, j, k) != 0.0 && sc.parities[k] != sc.parities[i] + sc.parities[j] {
                        return Err(AlgebraError::ParityViolation { i, j, k });
                    }
                }
            }
        }
        Ok(sc)
    }

    pub fn abelian(dim: usize) -> Self {
        StructureConstants {
            dim,
            parities: vec![Parity::Even; dim],
            c: vec![0.0; dim * dim * dim],
        }
    }

    /// Builds from a sparse list of `(i, j, k, c_ij^k)` (0-based). The graded
    /// antisymmetric counterpart `c_ji^k = -(-1)^(ε_i ε_j) c_ij^k` is filled in.
    pub fn from_brackets(
        parities: Vec<Parity>,
        entries: &[(usize, usize, usize, f64)],
    ) -> Result<Self, AlgebraError> {
        let dim = parities.len();
        let mut c = vec![0.0; dim * dim * dim];
        let mut set = vec![false; dim * dim * dim];
        let idx = |i: usize, j: usize, k: usize| (i * dim + j) * dim + k;
        for &(i, j, k, v) in entries {
            for &x in &[i, j, k] {
                if x >= dim {
                    return Err(AlgebraError::IndexOutOfRange(x));
                }
            }
            let sign = -parities[i].koszul(parities[j]);
            for (a, b, val) in [(i, j, v), (j, i, sign * v)] {
                let p = idx(a, b, k);
                if set[p] && c[p] != val {
                    return Err(AlgebraError::InconsistentBracket { i, j });
                }
                c[p] = val;
                set[p] = true;
            }
        }
        Self::new(parities, c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parities(&self) -> &[Parity] {
        &self.parities
    }

    pub fn parity(&self, i: usize) -> Parity {
        self.parities[i]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let d = self.dim;
        self.c[(i * d + j) * d + k] = value;
    }

    pub fn tensor(&self) -> &[f64] {
        &self.c
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(|&v| v == 0.0)
    }

    /// Residual of `c[i][j][k] + (-1)^(ε_i ε_j) c[j][i][k]`.
    pub fn check_antisymmetry(&self) -> ResidualReport {
        let mut report = ResidualReport::new();
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                let s = self.parities[i].koszul(self.parities[j]);
                for k in 0..d {
                    report.record(self.get(i, j, k) + s * self.get(j, i, k), &[i, j, k]);
                }
            }
        }
        report
    }

    /// Residual of the graded Jacobi identity
    /// `(-1)^(ε_i ε_k)[e_i,[e_j,e_k]] + (-1)^(ε_j ε_i)[e_j,[e_k,e_i]] + (-1)^(ε_k ε_j)[e_k,[e_i,e_j]]`.
    pub fn check_jacobi(&self) -> ResidualReport {
        let mut report = ResidualReport::new();
        let d = self.dim;
        let p = &self.parities;
        // (x, y, z) ↦ l-component of [e_x, [e_y, e_z]]
        let nested = |x: usize, y: usize, z: usize, l: usize| -> f64 {
            (0..d).map(|m| self.get(y, z, m) * self.get(x, m, l)).sum()
        };
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let defect = p[i].koszul(p[k]) * nested(i, j, k, l)
                            + p[j].koszul(p[i]) * nested(j, k, i, l)
                            + p[k].koszul(p[j]) * nested(k, i, j, l);
                        report.record(defect, &[i, j, k, l]);
                    }
                }
            }
        }
        report
    }

    /// True when every `(class + 1)`-fold nested bracket of basis elements vanishes.
    pub fn is_nilpotent_of_class(&self, class: usize) -> bool {
        let d = self.dim;
        // layer[v] = coefficients of a nested bracket; start with basis vectors
        let mut layer: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                v
            })
            .collect();
        for _ in 0..class {
            let mut next = Vec::new();
            for i in 0..d {
                for v in &layer {
                    let mut w = vec![0.0; d];
                    for (j, &vj) in v.iter().enumerate() {
                        if vj == 0.0 {
                            continue;
                        }
                        for (k, wk) in w.iter_mut().enumerate() {
                            *wk += vj * self.get(i, j, k);
                        }
                    }
                    if w.iter().any(|&x| x.abs() > VALIDATION_TOL) {
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                return true;
            }
            layer = next;
        }
        false
    }
}

/// One `{"i":…, "j":…, "coeffs": {"k": c}}` record, indices 1-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketSpec {
    pub i: usize,
    pub j: usize,
    pub coeffs: BTreeMap<String, f64>,
}

/// JSON form of [`StructureConstants`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub dim: usize,
    pub parities: Vec<Parity>,
    #[serde(default)]
    pub brackets: Vec<BracketSpec>,
}

impl AlgebraSpec {
    pub fn build(&self) -> Result<StructureConstants, AlgebraError> {
        if self.parities.len() != self.dim {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.dim,
                got: self.parities.len(),
            });
        }
        let mut entries = Vec::new();
        for b in &self.brackets {
            for (k, &v) in &b.coeffs {
                let k: usize = k.trim().parse().map_err(|_| AlgebraError::IndexOutOfRange(0))?;
                for &x in &[b.i, b.j, k] {
                    if x == 0 || x > self.dim {
                        return Err(AlgebraError::IndexOutOfRange(x));
                    }
                }
                entries.push((b.i - 1, b.j - 1, k - 1, v));
            }
        }
        StructureConstants::from_brackets(self.parities.clone(), &entries)
    }
}

/// `X = Σ X^i e_i` with supernumber coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    coords: Vec<Supernumber>,
}

impl AlgebraElement {
    pub fn new(coords: Vec<Supernumber>) -> Self {
        AlgebraElement { coords }
    }

    pub fn zero(dim: usize, n: usize) -> Self {
        AlgebraElement {
            coords: vec![Supernumber::zero(n); dim],
        }
    }

    /// Basis element `e_i` (0-based).
    pub fn basis(dim: usize, n: usize, i: usize) -> Self {
        let mut x = Self::zero(dim, n);
        x.coords[i] = Supernumber::scalar(n, 1.0);
        x
    }

    pub fn from_reals(values: &[f64], n: usize) -> Self {
        AlgebraElement {
            coords: values.iter().map(|&v| Supernumber::scalar(n, v)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn num_generators(&self) -> usize {
        self.coords.first().map_or(0, Supernumber::num_generators)
    }

    pub fn coords(&self) -> &[Supernumber] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &Supernumber {
        &self.coords[i]
    }

    /// Real coordinates of the body.
    pub fn body(&self) -> Vec<f64> {
        self.coords.iter().map(Supernumber::body).collect()
    }

    pub fn body_element(&self) -> AlgebraElement {
        let n = self.num_generators();
        Self::from_reals(&self.body(), n)
    }

    pub fn has_soul(&self) -> bool {
        self.coords.iter().any(Supernumber::has_soul)
    }

    /// Overall parity: `X` has parity `p` iff each `X^i` has parity `p + ε_i`.
    pub fn parity(&self, sc: &StructureConstants) -> Option<Parity> {
        let mut found: Option<Parity> = None;
        for (x, &eps) in self.coords.iter().zip(sc.parities()) {
            if x.is_zero() {
                continue;
            }
            let p = x.parity()? + eps;
            match found {
                None => found = Some(p),
                Some(q) if q != p => return None,
                _ => {}
            }
        }
        Some(found.unwrap_or(Parity::Even))
    }

    pub fn is_even(&self, sc: &StructureConstants) -> bool {
        self.parity(sc) == Some(Parity::Even)
    }

    pub fn add(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &AlgebraElement) -> AlgebraElement {
        AlgebraElement {
            coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, k: f64) -> AlgebraElement {
        AlgebraElement {
            coords: self.coords.iter().map(|a| a.scale(k)).collect(),
        }
    }

    /// Left multiplication by a supernumber, `a · X`.
    pub fn left_mul(&self, a: &Supernumber) -> AlgebraElement {
        AlgebraElement {
            coords: self.coords.iter().map(|x| a * x).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coords.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }

    /// Bracket with left-linear scalars:
    /// `[X, Y]^k = Σ_ij (-1)^(ε_i |Y^j|) X^i Y^j c_ij^k`.
    pub fn bracket(&self, other: &AlgebraElement, sc: &StructureConstants) -> Result<AlgebraElement, AlgebraError> {
        bracket(sc, self, other)
    }
}

impl fmt::Display for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .coords
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| format!("({c})e{}", i + 1))
            .collect();
        if parts.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&parts.join(" + "))
        }
    }
}

/// Graded bracket of two algebra elements; see [`AlgebraElement::bracket`].
pub fn bracket(sc: &StructureConstants, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement, AlgebraError> {
    let d = sc.dim();
    for e in [x, y] {
        if e.dim() != d {
            return Err(AlgebraError::DimensionMismatch {
                expected: d,
                got: e.dim(),
            });
        }
    }
    let n = x.num_generators();
    if y.num_generators() != n {
        return Err(GrassmannError::DimensionMismatch(n, y.num_generators()).into());
    }
    let mut out = vec![Supernumber::zero(n); d];
    for i in 0..d {
        if x.coords[i].is_zero() {
            continue;
        }
        for j in 0..d {
            let yj = &y.coords[j];
            if yj.is_zero() {
                continue;
            }
            // moving e_i past Y^j: odd part of Y^j picks up (-1)^ε_i
            let moved = if sc.parity(i).is_odd() {
                &yj.part(Parity::Even) - &yj.part(Parity::Odd)
            } else {
                yj.clone()
            };
            let prod = x.coords[i].gr_mul(&moved)?;
            for (k, o) in out.iter_mut().enumerate() {
                let c = sc.get(i, j, k);
                if c != 0.0 {
                    *o += &prod.scale(c);
                }
            }
        }
    }
    Ok(AlgebraElement { coords: out })
}

/// Common algebras used by tests and scenarios.
pub mod library {
    use super::*;

    /// `[e1, e2] = e2`.
    pub fn affine() -> StructureConstants {
        StructureConstants::from_brackets(vec![Parity::Even; 2], &[(0, 1, 1, 1.0)]).unwrap()
    }

    /// `[P, Q] = Z`, `Z` central.
    pub fn heisenberg() -> StructureConstants {
        StructureConstants::from_brackets(vec![Parity::Even; 3], &[(0, 1, 2, 1.0)]).unwrap()
    }

    /// `[H, E] = 2E`, `[H, F] = -2F`, `[E, F] = H` with basis order `(H, E, F)`.
    pub fn sl2() -> StructureConstants {
        StructureConstants::from_brackets(
            vec![Parity::Even; 3],
            &[(0, 1, 1, 2.0), (0, 2, 2, -2.0), (1, 2, 0, 1.0)],
        )
        .unwrap()
    }

    /// Even `P`, odd `D`, `[D, D] = 2P`.
    pub fn supertranslation() -> StructureConstants {
        StructureConstants::from_brackets(vec![Parity::Even, Parity::Odd], &[(1, 1, 0, 2.0)]).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::library::*;
    use super::*;

    #[test]
    fn affine_bracket_reads_tensor() {
        let sc = affine();
        let e1 = AlgebraElement::basis(2, 0, 0);
        let e2 = AlgebraElement::basis(2, 0, 1);
        assert_eq!(bracket(&sc, &e1, &e2).unwrap(), e2);
        assert_eq!(bracket(&sc, &e2, &e1).unwrap(), e2.scale(-1.0));
    }

    #[test]
    fn odd_odd_bracket_is_symmetric() {
        let sc = supertranslation();
        let d = AlgebraElement::basis(2, 0, 1);
        let p = AlgebraElement::basis(2, 0, 0);
        assert_eq!(bracket(&sc, &d, &d).unwrap(), p.scale(2.0));
    }

    #[test]
    fn even_self_bracket_vanishes_with_odd_coefficients() {
        let sc = supertranslation();
        let n = 2;
        let th1 = Supernumber::generator(n, 1).unwrap();
        let th2 = Supernumber::generator(n, 2).unwrap();
        // X = 1.5 P + (θ1 + θ2) D is even
        let x = AlgebraElement::new(vec![Supernumber::scalar(n, 1.5), &th1 + &th2]);
        assert!(x.is_even(&sc));
        assert!(bracket(&sc, &x, &x).unwrap().coords().iter().all(Supernumber::is_zero));
        // [θ1 D, θ2 D] = -θ1 θ2 [D, D] = -2 θ1θ2 P
        let a = AlgebraElement::new(vec![Supernumber::zero(n), th1.clone()]);
        let b = AlgebraElement::new(vec![Supernumber::zero(n), th2.clone()]);
        let ab = bracket(&sc, &a, &b).unwrap();
        assert_eq!(ab.coord(0), &(&th1 * &th2).scale(-2.0));
    }

    #[test]
    fn antisymmetry_reports() {
        assert_eq!(sl2().check_antisymmetry().max, 0.0);
        assert_eq!(StructureConstants::abelian(3).check_antisymmetry().max, 0.0);
        // c_12^1 = c_21^1 = 1 (1-based), all even
        let mut sc = StructureConstants::abelian(2);
        sc.set(0, 1, 0, 1.0);
        sc.set(1, 0, 0, 1.0);
        assert_eq!(sc.check_antisymmetry().max, 2.0);
    }

    #[test]
    fn jacobi_reports() {
        assert!(heisenberg().check_jacobi().max <= VALIDATION_TOL);
        assert_eq!(StructureConstants::abelian(2).check_jacobi().max, 0.0);
        assert!(sl2().check_jacobi().max <= VALIDATION_TOL);
        assert!(supertranslation().check_jacobi().max <= VALIDATION_TOL);
        // [P,Q] = 1.1 Z, [P,Z] = P: not a Lie algebra
        let bad = StructureConstants::from_brackets(vec![Parity::Even; 3], &[(0, 1, 2, 1.1), (0, 2, 0, 1.0)]).unwrap();
        assert!(bad.check_jacobi().max > 0.1);
    }

    #[test]
    fn parity_violation_rejected() {
        // [P, D] = P with P even, D odd
        let err = StructureConstants::from_brackets(vec![Parity::Even, Parity::Odd], &[(0, 1, 0, 1.0)]).unwrap_err();
        assert!(matches!(err, AlgebraError::ParityViolation { .. }));
    }

    #[test]
    fn inconsistent_bracket_rejected() {
        let err =
            StructureConstants::from_brackets(vec![Parity::Even; 2], &[(0, 1, 1, 1.0), (1, 0, 1, 1.0)]).unwrap_err();
        assert_eq!(err, AlgebraError::InconsistentBracket { i: 1, j: 0 });
    }

    #[test]
    fn nilpotency_classes() {
        assert!(heisenberg().is_nilpotent_of_class(2));
        assert!(!heisenberg().is_nilpotent_of_class(1));
        assert!(supertranslation().is_nilpotent_of_class(2));
        assert!(!affine().is_nilpotent_of_class(4));
        assert!(StructureConstants::abelian(2).is_nilpotent_of_class(1));
    }

    #[test]
    fn spec_loader_fills_counterparts() {
        let json = r#"{"dim": 2, "parities": ["even", "even"], "brackets": [{"i": 1, "j": 2, "coeffs": {"2": 1.0}}]}"#;
        let spec: AlgebraSpec = serde_json::from_str(json).unwrap();
        let sc = spec.build().unwrap();
        assert_eq!(sc, affine());
        assert_eq!(sc.get(1, 0, 1), -1.0);
    }

    #[test]
    fn display_element() {
        let x = AlgebraElement::from_reals(&[0.0, 2.0], 0);
        assert_eq!(x.to_string(), "(2)e2");
    }
}
