//! Group models: multiplication, inverse, exponential, logarithm near the
//! identity, and piecewise paths with their right logarithmic derivative.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::algebra::{bracket, AlgebraElement, AlgebraError, StructureConstants};
use crate::grassmann::{Parity, Supernumber};

/// Largest nilpotency class for which the BCH product is implemented.
pub const MAX_NILPOTENCY_CLASS: usize = 4;

/// Closure tolerance for loops and continuity of sampled segments.
pub const JOIN_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("group model mismatch: {0}")]
    ModelMismatch(String),
    #[error("singular matrix cannot be inverted")]
    SingularMatrix,
    #[error("outside log chart: {0}; supply a GroupPath (route) instead of a bare element")]
    OutsideLogChart(String),
    #[error("matrix is not in the span of the basis (residual {0:e})")]
    NotInSubalgebra(f64),
    #[error("model '{0}' only accepts real coordinates")]
    SuperNotSupported(&'static str),
    #[error("path parameter {t} outside [0, {end}]")]
    ParameterOutOfRange { t: f64, end: f64 },
    #[error("path segment {0} does not start where the previous one ends")]
    Discontinuous(usize),
    #[error("nilpotency class {0} unsupported (max {MAX_NILPOTENCY_CLASS})")]
    UnsupportedClass(usize),
    #[error("invalid group specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupElement {
    Euclidean(Vec<Supernumber>),
    Matrix(DMatrix<f64>),
    /// Exponential coordinates.
    Nilpotent(AlgebraElement),
    /// Representative in `[0, 1)`.
    Circle(f64),
}

#[derive(Clone, Debug, PartialEq)]
enum Model {
    Euclidean { dim: usize },
    Matrix { basis: Vec<DMatrix<f64>>, gram: DMatrix<f64> },
    Nilpotent { sc: StructureConstants, class: usize },
    Circle,
}

/// A concrete group together with the Grassmann generator count used for
/// its algebra elements.
#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    model: Model,
    n: usize,
}

fn normalize_circle(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl Group {
    pub fn euclidean(dim: usize, n: usize) -> Self {
        Group {
            model: Model::Euclidean { dim },
            n,
        }
    }

    pub fn circle(n: usize) -> Self {
        Group { model: Model::Circle, n }
    }

    /// Matrix group generated by `basis`; the basis must be linearly independent.
    pub fn matrix(basis: Vec<DMatrix<f64>>, n: usize) -> Result<Self, GroupError> {
        let size = basis.first().map(|b| b.nrows()).unwrap_or(0);
        if size == 0 || basis.iter().any(|b| b.nrows() != size || b.ncols() != size) {
            return Err(GroupError::InvalidSpec("matrix basis must be nonempty square matrices of one size".into()));
        }
        let d = basis.len();
        let gram = DMatrix::from_fn(d, d, |i, j| basis[i].dot(&basis[j]));
        if gram.clone().try_inverse().is_none() {
            return Err(GroupError::InvalidSpec("matrix basis is linearly dependent".into()));
        }
        Ok(Group {
            model: Model::Matrix { basis, gram },
            n,
        })
    }

    pub fn nilpotent(sc: StructureConstants, class: usize, n: usize) -> Result<Self, GroupError> {
        if class == 0 || class > MAX_NILPOTENCY_CLASS {
            return Err(GroupError::UnsupportedClass(class));
        }
        if !sc.is_nilpotent_of_class(class) {
            return Err(AlgebraError::NotNilpotent(class).into());
        }
        Ok(Group {
            model: Model::Nilpotent { sc, class },
            n,
        })
    }

    pub fn model_name(&self) -> &'static str {
        match self.model {
            Model::Euclidean { .. } => "euclidean",
            Model::Matrix { .. } => "matrix",
            Model::Nilpotent { .. } => "nilpotent_exp",
            Model::Circle => "circle",
        }
    }

    /// Dimension of the Lie algebra.
    pub fn dim(&self) -> usize {
        match &self.model {
            Model::Euclidean { dim } => *dim,
            Model::Matrix { basis, .. } => basis.len(),
            Model::Nilpotent { sc, .. } => sc.dim(),
            Model::Circle => 1,
        }
    }

    pub fn num_generators(&self) -> usize {
        self.n
    }

    /// Every model except the circle is simply connected.
    pub fn is_simply_connected(&self) -> bool {
        !matches!(self.model, Model::Circle)
    }

    pub fn accepts_super(&self) -> bool {
        matches!(self.model, Model::Euclidean { .. } | Model::Nilpotent { .. })
    }

    pub fn identity(&self) -> GroupElement {
        match &self.model {
            Model::Euclidean { dim } => GroupElement::Euclidean(vec![Supernumber::zero(self.n); *dim]),
            Model::Matrix { basis, .. } => GroupElement::Matrix(DMatrix::identity(basis[0].nrows(), basis[0].nrows())),
            Model::Nilpotent { sc, .. } => GroupElement::Nilpotent(AlgebraElement::zero(sc.dim(), self.n)),
            Model::Circle => GroupElement::Circle(0.0),
        }
    }

    fn mismatch(&self, what: &GroupElement) -> GroupError {
        GroupError::ModelMismatch(format!("{} group given {:?}", self.model_name(), what))
    }

    fn check(&self, g: &GroupElement) -> Result<(), GroupError> {
        let ok = match (&self.model, g) {
            (Model::Euclidean { dim }, GroupElement::Euclidean(v)) => v.len() == *dim,
            (Model::Matrix { basis, .. }, GroupElement::Matrix(m)) => m.nrows() == basis[0].nrows() && m.is_square(),
            (Model::Nilpotent { sc, .. }, GroupElement::Nilpotent(x)) => x.dim() == sc.dim(),
            (Model::Circle, GroupElement::Circle(_)) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(self.mismatch(g))
        }
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(a)?;
        self.check(b)?;
        Ok(match (&self.model, a, b) {
            (Model::Euclidean { .. }, GroupElement::Euclidean(x), GroupElement::Euclidean(y)) => {
                GroupElement::Euclidean(x.iter().zip(y).map(|(p, q)| p + q).collect())
            }
            (Model::Matrix { .. }, GroupElement::Matrix(x), GroupElement::Matrix(y)) => GroupElement::Matrix(x * y),
            (Model::Nilpotent { sc, class }, GroupElement::Nilpotent(x), GroupElement::Nilpotent(y)) => {
                GroupElement::Nilpotent(bch(sc, *class, x, y)?)
            }
            (Model::Circle, GroupElement::Circle(x), GroupElement::Circle(y)) => {
                GroupElement::Circle(normalize_circle(x + y))
            }
            _ => unreachable!("checked above"),
        })
    }

    pub fn inverse(&self, a: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(a)?;
        Ok(match a {
            GroupElement::Euclidean(x) => GroupElement::Euclidean(x.iter().map(|p| -p).collect()),
            GroupElement::Matrix(m) => {
                if m.determinant() == 0.0 {
                    return Err(GroupError::SingularMatrix);
                }
                GroupElement::Matrix(m.clone().try_inverse().ok_or(GroupError::SingularMatrix)?)
            }
            GroupElement::Nilpotent(x) => GroupElement::Nilpotent(x.scale(-1.0)),
            GroupElement::Circle(x) => GroupElement::Circle(normalize_circle(-x)),
        })
    }

    /// Matrix `Σ X^i B_i` of a real algebra element (matrix model only).
    pub fn algebra_matrix(&self, x: &AlgebraElement) -> Result<DMatrix<f64>, GroupError> {
        match &self.model {
            Model::Matrix { basis, .. } => {
                if x.has_soul() {
                    return Err(GroupError::SuperNotSupported("matrix"));
                }
                let mut m = DMatrix::zeros(basis[0].nrows(), basis[0].nrows());
                for (c, b) in x.body().iter().zip(basis) {
                    m += b * *c;
                }
                Ok(m)
            }
            _ => Err(GroupError::ModelMismatch("algebra_matrix needs the matrix model".into())),
        }
    }

    /// Basis coordinates of a matrix in the span of the basis.
    pub fn project_matrix(&self, m: &DMatrix<f64>) -> Result<AlgebraElement, GroupError> {
        match &self.model {
            Model::Matrix { basis, gram } => {
                let rhs = nalgebra::DVector::from_iterator(basis.len(), basis.iter().map(|b| b.dot(m)));
                let coords = gram.clone().lu().solve(&rhs).ok_or(GroupError::SingularMatrix)?;
                let mut recon = DMatrix::zeros(m.nrows(), m.ncols());
                for (c, b) in coords.iter().zip(basis) {
                    recon += b * *c;
                }
                let resid = (&recon - m).amax();
                if resid > 1e-8 * (1.0 + m.amax()) {
                    return Err(GroupError::NotInSubalgebra(resid));
                }
                Ok(AlgebraElement::from_reals(coords.as_slice(), self.n))
            }
            _ => Err(GroupError::ModelMismatch("project_matrix needs the matrix model".into())),
        }
    }

    fn check_algebra(&self, x: &AlgebraElement) -> Result<(), GroupError> {
        if x.dim() != self.dim() {
            return Err(AlgebraError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            }
            .into());
        }
        if x.has_soul() && !self.accepts_super() {
            return Err(GroupError::SuperNotSupported(self.model_name()));
        }
        Ok(())
    }

    /// Re-expresses a soulless element over the group's generator count.
    fn lift(&self, x: &AlgebraElement) -> Result<AlgebraElement, GroupError> {
        if x.num_generators() == self.n || x.dim() == 0 {
            Ok(x.clone())
        } else if !x.has_soul() {
            Ok(AlgebraElement::from_reals(&x.body(), self.n))
        } else {
            Err(GroupError::InvalidSpec(format!(
                "element uses {} Grassmann generators, group uses {}",
                x.num_generators(),
                self.n
            )))
        }
    }

    pub fn exp(&self, x: &AlgebraElement) -> Result<GroupElement, GroupError> {
        self.check_algebra(x)?;
        let x = &self.lift(x)?;
        Ok(match &self.model {
            Model::Euclidean { .. } => GroupElement::Euclidean(x.coords().to_vec()),
            Model::Matrix { .. } => GroupElement::Matrix(expm(&self.algebra_matrix(x)?)),
            Model::Nilpotent { .. } => GroupElement::Nilpotent(x.clone()),
            Model::Circle => GroupElement::Circle(normalize_circle(x.body()[0])),
        })
    }

    /// Principal logarithm. The circle uses the representative in `[-1/2, 1/2)`.
    pub fn log(&self, g: &GroupElement) -> Result<AlgebraElement, GroupError> {
        self.check(g)?;
        Ok(match g {
            GroupElement::Euclidean(v) => AlgebraElement::new(v.clone()),
            GroupElement::Matrix(m) => self.project_matrix(&logm(m)?)?,
            GroupElement::Nilpotent(x) => x.clone(),
            GroupElement::Circle(x) => {
                let r = if *x >= 0.5 { x - 1.0 } else { *x };
                AlgebraElement::from_reals(&[r], self.n)
            }
        })
    }

    /// Max-norm distance; circular on the circle.
    pub fn distance(&self, a: &GroupElement, b: &GroupElement) -> Result<f64, GroupError> {
        self.check(a)?;
        self.check(b)?;
        Ok(match (a, b) {
            (GroupElement::Euclidean(x), GroupElement::Euclidean(y)) => {
                x.iter().zip(y).fold(0.0, |m, (p, q)| m.max((p - q).max_abs()))
            }
            (GroupElement::Matrix(x), GroupElement::Matrix(y)) => (x - y).amax(),
            (GroupElement::Nilpotent(x), GroupElement::Nilpotent(y)) => x.sub(y).max_abs(),
            (GroupElement::Circle(x), GroupElement::Circle(y)) => {
                let d = (x - y).rem_euclid(1.0);
                d.min(1.0 - d)
            }
            _ => unreachable!("checked above"),
        })
    }

    /// Real coordinates for tabular output: bodies of euclidean/exponential
    /// coordinates, row-major entries for matrices, the angle for the circle.
    pub fn coords(&self, g: &GroupElement) -> Vec<f64> {
        match g {
            GroupElement::Euclidean(v) => v.iter().map(Supernumber::body).collect(),
            GroupElement::Matrix(m) => m.transpose().as_slice().to_vec(),
            GroupElement::Nilpotent(x) => x.body(),
            GroupElement::Circle(x) => vec![*x],
        }
    }

    pub fn coord_names(&self) -> Vec<String> {
        match &self.model {
            Model::Matrix { basis, .. } => {
                let s = basis[0].nrows();
                (0..s * s).map(|k| format!("g{}{}", k / s + 1, k % s + 1)).collect()
            }
            _ => (1..=self.dim()).map(|i| format!("g{i}")).collect(),
        }
    }

    /// Parses a group element: coordinate array (euclidean, nilpotent_exp),
    /// rows (matrix), or a number / one-element array (circle). Coordinates
    /// may be numbers or supernumber objects.
    pub fn element_from_json(&self, v: &Value) -> Result<GroupElement, GroupError> {
        match &self.model {
            Model::Euclidean { .. } => Ok(GroupElement::Euclidean(self.algebra_from_json(v)?.coords().to_vec())),
            Model::Nilpotent { .. } => Ok(GroupElement::Nilpotent(self.algebra_from_json(v)?)),
            Model::Circle => {
                let x = match v {
                    Value::Array(a) if a.len() == 1 => a[0].as_f64(),
                    other => other.as_f64(),
                }
                .ok_or_else(|| GroupError::InvalidSpec("circle element must be a number".into()))?;
                Ok(GroupElement::Circle(normalize_circle(x)))
            }
            Model::Matrix { basis, .. } => {
                let s = basis[0].nrows();
                let m = matrix_from_json(v)?;
                if m.nrows() != s || m.ncols() != s {
                    return Err(GroupError::InvalidSpec(format!("expected a {s}x{s} matrix")));
                }
                if m.determinant() == 0.0 {
                    return Err(GroupError::SingularMatrix);
                }
                Ok(GroupElement::Matrix(m))
            }
        }
    }

    pub fn element_to_json(&self, g: &GroupElement) -> Value {
        match g {
            GroupElement::Euclidean(v) => scalars_to_json(v),
            GroupElement::Nilpotent(x) => scalars_to_json(x.coords()),
            GroupElement::Circle(x) => Value::from(*x),
            GroupElement::Matrix(m) => Value::Array(
                (0..m.nrows())
                    .map(|r| Value::Array((0..m.ncols()).map(|c| Value::from(m[(r, c)])).collect()))
                    .collect(),
            ),
        }
    }

    /// Parses an algebra element given as an array of numbers / supernumbers.
    pub fn algebra_from_json(&self, v: &Value) -> Result<AlgebraElement, GroupError> {
        let x = algebra_from_json(v, self.n)?;
        self.check_algebra(&x)?;
        Ok(x)
    }
}

/// Scalars serialize as plain numbers when they have no soul.
pub fn scalars_to_json(v: &[Supernumber]) -> Value {
    Value::Array(
        v.iter()
            .map(|s| {
                if s.has_soul() {
                    serde_json::to_value(s).expect("supernumber json")
                } else {
                    Value::from(s.body())
                }
            })
            .collect(),
    )
}

pub fn scalar_from_json(v: &Value, n: usize) -> Result<Supernumber, GroupError> {
    match v {
        Value::Number(x) => Ok(Supernumber::scalar(n, x.as_f64().unwrap_or(f64::NAN))),
        Value::Object(_) => {
            let s: Supernumber =
                serde_json::from_value(v.clone()).map_err(|e| GroupError::InvalidSpec(e.to_string()))?;
            if s.num_generators() != n {
                return Err(GroupError::InvalidSpec(format!(
                    "supernumber has N = {}, scenario uses N = {n}",
                    s.num_generators()
                )));
            }
            Ok(s)
        }
        other => Err(GroupError::InvalidSpec(format!("expected number or supernumber, got {other}"))),
    }
}

pub fn algebra_from_json(v: &Value, n: usize) -> Result<AlgebraElement, GroupError> {
    let arr = v
        .as_array()
        .ok_or_else(|| GroupError::InvalidSpec("expected an array of coordinates".into()))?;
    Ok(AlgebraElement::new(
        arr.iter().map(|c| scalar_from_json(c, n)).collect::<Result<_, _>>()?,
    ))
}

pub fn matrix_from_json(v: &Value) -> Result<DMatrix<f64>, GroupError> {
    let rows: Vec<Vec<f64>> =
        serde_json::from_value(v.clone()).map_err(|e| GroupError::InvalidSpec(format!("matrix: {e}")))?;
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(GroupError::InvalidSpec("ragged or empty matrix".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// JSON description of a group model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupSpec {
    Euclidean { dim: usize },
    Matrix { size: usize, basis: Vec<Vec<Vec<f64>>> },
    NilpotentExp { class: usize },
    Circle,
}

impl GroupSpec {
    /// Builds the group for an algebra; checks that the model realizes it.
    pub fn build(&self, sc: &StructureConstants, n: usize) -> Result<Group, GroupError> {
        let group = match self {
            GroupSpec::Euclidean { dim } => {
                if !sc.is_abelian() || sc.dim() != *dim {
                    return Err(GroupError::InvalidSpec("euclidean group needs an abelian algebra of the same dimension".into()));
                }
                Group::euclidean(*dim, n)
            }
            GroupSpec::Circle => {
                if sc.dim() != 1 || sc.parity(0) != Parity::Even {
                    return Err(GroupError::InvalidSpec("circle group needs a one-dimensional even algebra".into()));
                }
                Group::circle(n)
            }
            GroupSpec::NilpotentExp { class } => Group::nilpotent(sc.clone(), *class, n)?,
            GroupSpec::Matrix { size, basis } => {
                if sc.parities().iter().any(|p| p.is_odd()) {
                    return Err(GroupError::SuperNotSupported("matrix"));
                }
                let mats = basis
                    .iter()
                    .map(|b| {
                        let m = matrix_from_json(&serde_json::to_value(b).expect("matrix json"))?;
                        if m.nrows() != *size || m.ncols() != *size {
                            return Err(GroupError::InvalidSpec(format!("basis matrix is not {size}x{size}")));
                        }
                        Ok(m)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if mats.len() != sc.dim() {
                    return Err(GroupError::InvalidSpec("one basis matrix per algebra element required".into()));
                }
                check_matrix_brackets(&mats, sc)?;
                Group::matrix(mats, n)?
            }
        };
        Ok(group)
    }
}

/// Verifies `[B_i, B_j] = Σ c_ij^k B_k`.
pub fn check_matrix_brackets(basis: &[DMatrix<f64>], sc: &StructureConstants) -> Result<(), GroupError> {
    let d = basis.len();
    for i in 0..d {
        for j in 0..d {
            let mut lhs = &basis[i] * &basis[j] - &basis[j] * &basis[i];
            for (k, b) in basis.iter().enumerate() {
                lhs -= b * sc.get(i, j, k);
            }
            if lhs.amax() > 1e-12 {
                return Err(GroupError::InvalidSpec(format!(
                    "matrix basis does not satisfy the structure constants at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

/// Baker–Campbell–Hausdorff product truncated at the nilpotency class.
pub fn bch(
    sc: &StructureConstants,
    class: usize,
    x: &AlgebraElement,
    y: &AlgebraElement,
) -> Result<AlgebraElement, GroupError> {
    let mut z = x.add(y);
    if class >= 2 {
        let xy = bracket(sc, x, y)?;
        z = z.add(&xy.scale(0.5));
        if class >= 3 {
            let x_xy = bracket(sc, x, &xy)?;
            let y_xy = bracket(sc, y, &xy)?;
            z = z.add(&x_xy.sub(&y_xy).scale(1.0 / 12.0));
            if class >= 4 {
                let y_x_xy = bracket(sc, y, &x_xy)?;
                z = z.sub(&y_x_xy.scale(1.0 / 24.0));
            }
        }
    }
    Ok(z)
}

/// Matrix exponential by scaling and squaring around a Taylor core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as i32;
    }
    let scaled = a / 2f64.powi(squarings);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() < 1e-18 * sum.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn sqrtm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, GroupError> {
    // Denman–Beavers iteration
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().ok_or(GroupError::SingularMatrix)?;
        let zi = z.clone().try_inverse().ok_or(GroupError::SingularMatrix)?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let delta = (&y_next - &y).amax();
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * y.amax() {
            break;
        }
    }
    Ok(y)
}

/// Principal matrix logarithm by inverse scaling and squaring.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>, GroupError> {
    let n = a.nrows();
    let scale = a.amax().max(1.0);
    for ev in a.clone().schur().complex_eigenvalues().iter() {
        if ev.im.abs() <= 1e-12 * scale && ev.re <= 1e-12 * scale {
            return Err(GroupError::OutsideLogChart(format!("eigenvalue {} on the closed negative real axis", ev.re)));
        }
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut m = a.clone();
    let mut roots = 0;
    while (&m - &id).norm() > 0.25 {
        if roots >= 60 {
            return Err(GroupError::OutsideLogChart("square-root iteration did not converge".into()));
        }
        m = sqrtm(&m)?;
        roots += 1;
    }
    // log(M) = 2 atanh((M - I)(M + I)^-1), 16 odd terms
    let denom = (&m + &id).try_inverse().ok_or(GroupError::SingularMatrix)?;
    let z = (&m - &id) * denom;
    let z2 = &z * &z;
    let mut power = z.clone();
    let mut sum = z.clone();
    for k in 1..16 {
        power = &power * &z2;
        sum += &power / (2 * k + 1) as f64;
    }
    Ok(sum * (2.0 * 2f64.powi(roots)))
}

/// Piece of a [`GroupPath`].
#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    /// `τ ↦ exp(τX)·g₀` for `τ ∈ [0, duration]`, `g₀` the running endpoint.
    Exp { generator: AlgebraElement, duration: f64 },
    /// Samples with strictly increasing parameters; `xi` caches the right
    /// logarithmic derivative on the grid.
    Sampled {
        times: Vec<f64>,
        elements: Vec<GroupElement>,
        xi: Vec<AlgebraElement>,
    },
}

impl Segment {
    pub fn exp(generator: AlgebraElement, duration: f64) -> Self {
        Segment::Exp { generator, duration }
    }

    /// Sampled segment; differentiates on its own grid.
    pub fn sampled(group: &Group, times: Vec<f64>, elements: Vec<GroupElement>) -> Result<Self, GroupError> {
        if times.len() != elements.len() || times.len() < 2 {
            return Err(GroupError::InvalidSpec("sampled segment needs ≥ 2 samples with matching times".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GroupError::InvalidSpec("sample times must increase strictly".into()));
        }
        let k = times.len();
        let mut xi = Vec::with_capacity(k);
        for i in 0..k {
            let (lo, hi) = if i == 0 {
                (0, 1)
            } else if i == k - 1 {
                (k - 2, k - 1)
            } else {
                (i - 1, i + 1)
            };
            let dt = times[hi] - times[lo];
            let step = group.multiply(&elements[hi], &group.inverse(&elements[lo])?)?;
            let v = group.log(&step)?.scale(1.0 / dt);
            xi.push(v);
        }
        Ok(Segment::Sampled { times, elements, xi })
    }

    pub fn duration(&self) -> f64 {
        match self {
            Segment::Exp { duration, .. } => *duration,
            Segment::Sampled { times, .. } => times[times.len() - 1] - times[0],
        }
    }

    /// `ξ` at local parameter `tau ∈ [0, duration]`.
    pub fn right_log_derivative(&self, tau: f64) -> AlgebraElement {
        match self {
            Segment::Exp { generator, .. } => generator.clone(),
            Segment::Sampled { times, xi, .. } => {
                let t = times[0] + tau;
                let k = match times.binary_search_by(|p| p.total_cmp(&t)) {
                    Ok(k) => return xi[k].clone(),
                    Err(k) => k.clamp(1, times.len() - 1),
                };
                let a = (t - times[k - 1]) / (times[k] - times[k - 1]);
                xi[k - 1].scale(1.0 - a).add(&xi[k].scale(a))
            }
        }
    }

    /// Element at local parameter `tau` for a segment starting at `start`.
    pub fn element_at(&self, group: &Group, start: &GroupElement, tau: f64) -> Result<GroupElement, GroupError> {
        match self {
            Segment::Exp { generator, .. } => group.multiply(&group.exp(&generator.scale(tau))?, start),
            Segment::Sampled { times, elements, .. } => {
                let t = times[0] + tau;
                let k = match times.binary_search_by(|p| p.total_cmp(&t)) {
                    Ok(k) => return Ok(elements[k].clone()),
                    Err(k) => k.clamp(1, times.len() - 1),
                };
                let a = (t - times[k - 1]) / (times[k] - times[k - 1]);
                let step = group.multiply(&elements[k], &group.inverse(&elements[k - 1])?)?;
                let partial = group.exp(&group.log(&step)?.scale(a))?;
                group.multiply(&partial, &elements[k - 1])
            }
        }
    }

    fn right_translate(&self, group: &Group, h: &GroupElement) -> Result<Segment, GroupError> {
        Ok(match self {
            Segment::Exp { .. } => self.clone(),
            // γ·h has the same right log derivative as γ
            Segment::Sampled { times, elements, xi } => Segment::Sampled {
                times: times.clone(),
                elements: elements
                    .iter()
                    .map(|g| group.multiply(g, h))
                    .collect::<Result<Vec<_>, _>>()?,
                xi: xi.clone(),
            },
        })
    }
}

/// Continuous piecewise path in a group, parameterized from 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupPath {
    basepoint: GroupElement,
    segments: Vec<Segment>,
    /// Element at the start of each segment, plus the endpoint.
    joints: Vec<GroupElement>,
}

impl GroupPath {
    pub fn new(group: &Group, basepoint: GroupElement, segments: Vec<Segment>) -> Result<Self, GroupError> {
        group.check(&basepoint)?;
        let mut joints = vec![basepoint.clone()];
        for (i, seg) in segments.iter().enumerate() {
            let start = joints.last().expect("nonempty").clone();
            let end = match seg {
                Segment::Exp { generator, duration } => {
                    if !(duration.is_finite() && *duration >= 0.0) {
                        return Err(GroupError::InvalidSpec("segment duration must be finite and ≥ 0".into()));
                    }
                    group.multiply(&group.exp(&generator.scale(*duration))?, &start)?
                }
                Segment::Sampled { elements, .. } => {
                    let first = &elements[0];
                    if group.distance(first, &start)? > JOIN_TOL * (1.0 + group.coords(&start).iter().fold(0.0, |m: f64, c| m.max(c.abs()))) {
                        return Err(GroupError::Discontinuous(i));
                    }
                    elements[elements.len() - 1].clone()
                }
            };
            joints.push(end);
        }
        Ok(GroupPath {
            basepoint,
            segments,
            joints,
        })
    }

    /// Path from the identity realizing the word `exp(X₁)·exp(X₂)⋯exp(Xₙ)`:
    /// the rightmost factor is traversed first.
    pub fn from_word(group: &Group, factors: &[AlgebraElement]) -> Result<Self, GroupError> {
        let segments = factors.iter().rev().map(|x| Segment::exp(x.clone(), 1.0)).collect();
        Self::new(group, group.identity(), segments)
    }

    /// Single exponential segment `t ↦ exp(tX)`, `t ∈ [0, 1]`.
    pub fn exp_segment(group: &Group, x: &AlgebraElement) -> Result<Self, GroupError> {
        Self::new(group, group.identity(), vec![Segment::exp(x.clone(), 1.0)])
    }

    pub fn basepoint(&self) -> &GroupElement {
        &self.basepoint
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn endpoint(&self) -> &GroupElement {
        self.joints.last().expect("nonempty")
    }

    pub fn segment_start(&self, i: usize) -> &GroupElement {
        &self.joints[i]
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    /// Segment index and local parameter; joints belong to the later segment.
    fn locate(&self, t: f64) -> Result<(usize, f64), GroupError> {
        let end = self.duration();
        if !(0.0..=end).contains(&t) || self.segments.is_empty() {
            return Err(GroupError::ParameterOutOfRange { t, end });
        }
        let mut start = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let d = seg.duration();
            if t < start + d || i == self.segments.len() - 1 {
                return Ok((i, (t - start).clamp(0.0, d)));
            }
            start += d;
        }
        unreachable!("segments nonempty")
    }

    /// `ξ(t)` with `γ'(t) = ξ(t)^r` at `γ(t)`, i.e. `γ'·γ⁻¹`.
    pub fn right_log_derivative(&self, t: f64) -> Result<AlgebraElement, GroupError> {
        let (i, tau) = self.locate(t)?;
        Ok(self.segments[i].right_log_derivative(tau))
    }

    pub fn element_at(&self, group: &Group, t: f64) -> Result<GroupElement, GroupError> {
        let (i, tau) = self.locate(t)?;
        self.segments[i].element_at(group, &self.joints[i], tau)
    }

    /// The path `t ↦ γ(t)·h`.
    pub fn right_translate(&self, group: &Group, h: &GroupElement) -> Result<GroupPath, GroupError> {
        let segments = self
            .segments
            .iter()
            .map(|s| s.right_translate(group, h))
            .collect::<Result<Vec<_>, _>>()?;
        GroupPath::new(group, group.multiply(&self.basepoint, h)?, segments)
    }

    pub fn is_closed(&self, group: &Group, tol: f64) -> Result<bool, GroupError> {
        Ok(group.distance(&self.basepoint, self.endpoint())? <= tol)
    }
}

/// JSON segment: `{"exp": [coords], "duration": 1.0}` or
/// `{"sampled": {"t": [...], "g": [element, ...]}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SegmentSpec {
    Exp {
        exp: Value,
        #[serde(default = "one")]
        duration: f64,
    },
    Sampled {
        sampled: SampledSpec,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSpec {
    pub t: Vec<f64>,
    pub g: Vec<Value>,
}

/// JSON path: optional basepoint (identity by default) and segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<Value>,
    pub segments: Vec<SegmentSpec>,
}

impl PathSpec {
    pub fn build(&self, group: &Group) -> Result<GroupPath, GroupError> {
        let basepoint = match &self.basepoint {
            Some(v) => group.element_from_json(v)?,
            None => group.identity(),
        };
        let segments = self
            .segments
            .iter()
            .map(|s| match s {
                SegmentSpec::Exp { exp, duration } => Ok(Segment::exp(group.algebra_from_json(exp)?, *duration)),
                SegmentSpec::Sampled { sampled } => {
                    let elements = sampled
                        .g
                        .iter()
                        .map(|g| group.element_from_json(g))
                        .collect::<Result<Vec<_>, _>>()?;
                    Segment::sampled(group, sampled.t.clone(), elements)
                }
            })
            .collect::<Result<Vec<_>, GroupError>>()?;
        GroupPath::new(group, basepoint, segments)
    }
}
