//! Finite-generator exterior algebra `Λ(ℝ^N)`.
//!
//! A [`Supernumber`] stores all `2^N` coefficients densely, indexed by the
//! bitmask of the generator subset. Bit `i` stands for generator `θ_{i+1}`;
//! within a monomial the generators are always in ascending order.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest supported number of generators (4096 dense coefficients).
pub const MAX_GENERATORS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrassmannError {
    #[error("generator count mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("at most {MAX_GENERATORS} Grassmann generators are supported, got {0}")]
    TooManyGenerators(usize),
    #[error("generator index {index} outside 1..={n}")]
    GeneratorOutOfRange { index: usize, n: usize },
    #[error("expected an even supernumber")]
    NotEven,
    #[error("cannot invert a supernumber with zero body")]
    ZeroBody,
}

/// Z/2 grading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_degree(k: usize) -> Self {
        if k % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn is_odd(self) -> bool {
        self == Parity::Odd
    }

    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// `(-1)^(self * other)`, the Koszul sign of swapping two homogeneous objects.
    pub fn koszul(self, other: Parity) -> f64 {
        if self.is_odd() && other.is_odd() {
            -1.0
        } else {
            1.0
        }
    }
}

impl Add for Parity {
    type Output = Parity;
    fn add(self, rhs: Parity) -> Parity {
        if self == rhs {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Even => f.write_str("even"),
            Parity::Odd => f.write_str("odd"),
        }
    }
}

/// Sign picked up when the ascending monomial `a` is placed left of `b`
/// and the product is reordered into ascending order.
fn merge_sign(a: usize, b: usize) -> f64 {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        swaps += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Element of `Λ(ℝ^N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Supernumber {
    n: usize,
    coeffs: Vec<f64>,
}

impl Supernumber {
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_GENERATORS, "too many Grassmann generators: {n}");
        Supernumber {
            n,
            coeffs: vec![0.0; 1 << n],
        }
    }

    pub fn scalar(n: usize, value: f64) -> Self {
        let mut s = Self::zero(n);
        s.coeffs[0] = value;
        s
    }

    /// The generator `θ_index`, `index` in `1..=n`.
    pub fn generator(n: usize, index: usize) -> Result<Self, GrassmannError> {
        if n > MAX_GENERATORS {
            return Err(GrassmannError::TooManyGenerators(n));
        }
        if index == 0 || index > n {
            return Err(GrassmannError::GeneratorOutOfRange { index, n });
        }
        let mut s = Self::zero(n);
        s.coeffs[1 << (index - 1)] = 1.0;
        Ok(s)
    }

    /// Builds `coeff · θ_{i1} θ_{i2} ⋯` for an arbitrary (possibly unsorted,
    /// possibly repeating) list of 1-based generator indices.
    pub fn monomial(n: usize, subset: &[usize], coeff: f64) -> Result<Self, GrassmannError> {
        let mut acc = Self::scalar(n, coeff);
        for &i in subset {
            acc = acc.gr_mul(&Self::generator(n, i)?)?;
        }
        Ok(acc)
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<f64>) -> Result<Self, GrassmannError> {
        if n > MAX_GENERATORS {
            return Err(GrassmannError::TooManyGenerators(n));
        }
        if coeffs.len() != 1 << n {
            return Err(GrassmannError::DimensionMismatch(coeffs.len(), 1 << n));
        }
        Ok(Supernumber { n, coeffs })
    }

    pub fn num_generators(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Coefficient of the monomial with the given bitmask.
    pub fn coeff(&self, mask: usize) -> f64 {
        self.coeffs[mask]
    }

    pub fn body(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn soul(&self) -> Supernumber {
        let mut s = self.clone();
        s.coeffs[0] = 0.0;
        s
    }

    pub fn body_soul(&self) -> (f64, Supernumber) {
        (self.body(), self.soul())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn has_soul(&self) -> bool {
        self.coeffs[1..].iter().any(|&c| c != 0.0)
    }

    /// Parity of a homogeneous element. Zero is reported as even.
    pub fn parity(&self) -> Option<Parity> {
        let mut even = false;
        let mut odd = false;
        for (mask, &c) in self.coeffs.iter().enumerate() {
            if c != 0.0 {
                if mask.count_ones() % 2 == 0 {
                    even = true;
                } else {
                    odd = true;
                }
            }
        }
        match (even, odd) {
            (_, false) => Some(Parity::Even),
            (false, true) => Some(Parity::Odd),
            (true, true) => None,
        }
    }

    pub fn is_even(&self) -> bool {
        self.parity() == Some(Parity::Even)
    }

    pub fn is_odd(&self) -> bool {
        self.is_zero() || self.parity() == Some(Parity::Odd)
    }

    /// Projection onto the even (`Parity::Even`) or odd part.
    pub fn part(&self, parity: Parity) -> Supernumber {
        let mut s = self.clone();
        for (mask, c) in s.coeffs.iter_mut().enumerate() {
            if Parity::of_degree(mask.count_ones() as usize) != parity {
                *c = 0.0;
            }
        }
        s
    }

    fn check_same(&self, other: &Supernumber) -> Result<(), GrassmannError> {
        if self.n != other.n {
            Err(GrassmannError::DimensionMismatch(self.n, other.n))
        } else {
            Ok(())
        }
    }

    /// The graded-commutative product of `Λ(ℝ^N)`.
    pub fn gr_mul(&self, other: &Supernumber) -> Result<Supernumber, GrassmannError> {
        self.check_same(other)?;
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                if b == 0.0 || i & j != 0 {
                    continue;
                }
                out[i | j] += merge_sign(i, j) * a * b;
            }
        }
        // The body of a product is exactly the product of the bodies.
        out[0] = self.coeffs[0] * other.coeffs[0];
        Ok(Supernumber { n: self.n, coeffs: out })
    }

    pub fn scale(&self, k: f64) -> Supernumber {
        Supernumber {
            n: self.n,
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn powi(&self, k: u32) -> Supernumber {
        let mut acc = Supernumber::scalar(self.n, 1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Multiplicative inverse via the (finite) geometric series in the soul.
    pub fn try_recip(&self) -> Result<Supernumber, GrassmannError> {
        let b = self.body();
        if b == 0.0 {
            return Err(GrassmannError::ZeroBody);
        }
        let q = self.soul().scale(-1.0 / b);
        let mut term = Supernumber::scalar(self.n, 1.0);
        let mut sum = term.clone();
        for _ in 0..self.n {
            term = &term * &q;
            if term.is_zero() {
                break;
            }
            sum += &term;
        }
        let mut out = sum.scale(1.0 / b);
        out.coeffs[0] = 1.0 / b;
        Ok(out)
    }

    /// Quotient `self / other`; the body is the plain real quotient.
    pub fn try_div(&self, other: &Supernumber) -> Result<Supernumber, GrassmannError> {
        self.check_same(other)?;
        let mut out = self.gr_mul(&other.try_recip()?)?;
        out.coeffs[0] = self.coeffs[0] / other.coeffs[0];
        Ok(out)
    }

    /// Extends a smooth real function to an even supernumber by its Taylor
    /// series around the body, `Σ f⁽ᵏ⁾(body) soul^k / k!`.
    ///
    /// `derivative(k, x)` must return the `k`-th derivative of `f` at `x`.
    pub fn taylor_eval<F>(&self, derivative: F) -> Result<Supernumber, GrassmannError>
    where
        F: Fn(usize, f64) -> f64,
    {
        if !self.is_even() {
            return Err(GrassmannError::NotEven);
        }
        let (b, soul) = self.body_soul();
        let mut out = Supernumber::scalar(self.n, derivative(0, b));
        let mut power = Supernumber::scalar(self.n, 1.0);
        let mut factorial = 1.0;
        for k in 1..=self.n / 2 {
            power = &power * &soul;
            if power.is_zero() {
                break;
            }
            factorial *= k as f64;
            let c = derivative(k, b) / factorial;
            for (o, p) in out.coeffs[1..].iter_mut().zip(&power.coeffs[1..]) {
                *o += c * p;
            }
        }
        Ok(out)
    }

    /// Nonzero terms as (ascending 1-based generator list, coefficient).
    pub fn terms(&self) -> Vec<(Vec<usize>, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(mask, &c)| (mask_to_subset(mask), c))
            .collect()
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

pub fn mask_to_subset(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize)
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| i + 1)
        .collect()
}

impl Add for &Supernumber {
    type Output = Supernumber;
    fn add(self, rhs: &Supernumber) -> Supernumber {
        self.check_same(rhs).expect("supernumber addition");
        Supernumber {
            n: self.n,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Supernumber {
    type Output = Supernumber;
    fn sub(self, rhs: &Supernumber) -> Supernumber {
        self.check_same(rhs).expect("supernumber subtraction");
        Supernumber {
            n: self.n,
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Supernumber {
    type Output = Supernumber;
    fn mul(self, rhs: &Supernumber) -> Supernumber {
        self.gr_mul(rhs).expect("supernumber product")
    }
}

impl Neg for &Supernumber {
    type Output = Supernumber;
    fn neg(self) -> Supernumber {
        self.scale(-1.0)
    }
}

impl AddAssign<&Supernumber> for Supernumber {
    fn add_assign(&mut self, rhs: &Supernumber) {
        self.check_same(rhs).expect("supernumber addition");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl fmt::Display for Supernumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms();
        if terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (subset, c)) in terms.iter().enumerate() {
            let mag = c.abs();
            if k == 0 {
                if *c < 0.0 {
                    f.write_str("-")?;
                }
            } else if *c < 0.0 {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            if subset.is_empty() || mag != 1.0 {
                write!(f, "{mag}")?;
            }
            for i in subset {
                write!(f, "θ{i}")?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    subset: Vec<usize>,
    coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct SupernumberJson {
    #[serde(rename = "N")]
    n: usize,
    terms: Vec<TermJson>,
}

impl Serialize for Supernumber {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SupernumberJson {
            n: self.n,
            terms: self
                .terms()
                .into_iter()
                .map(|(subset, coeff)| TermJson { subset, coeff })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Supernumber {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = SupernumberJson::deserialize(deserializer)?;
        if raw.n > MAX_GENERATORS {
            return Err(D::Error::custom(GrassmannError::TooManyGenerators(raw.n)));
        }
        let mut acc = Supernumber::zero(raw.n);
        for term in raw.terms {
            let m = Supernumber::monomial(raw.n, &term.subset, term.coeff).map_err(D::Error::custom)?;
            acc += &m;
        }
        Ok(acc)
    }
}
