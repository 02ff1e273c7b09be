//! Coefficient expressions for vector fields.
//!
//! An [`Expr`] is kept in a normal form: a sum of terms
//! `c · a₁^p₁ ⋯ a_k^p_k · θ_{i₁} ⋯ θ_{i_r}` where the `a`s are even atoms
//! (even variables, `sin`/`cos`/`exp` of odd-free arguments, reciprocals of
//! even expressions) and the odd variables appear in ascending order.
//! Monomials are unique and coefficients nonzero, so `th1*th2 - th2*th1`
//! and `2*th1*th2` are the same value.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::grassmann::{GrassmannError, Parity, Supernumber};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unknown function '{name}' at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("only integer powers are supported (offset {offset})")]
    NonIntegerPower { offset: usize },
    #[error("odd variables are not allowed inside {func}(...)")]
    OddInTranscendental { func: &'static str },
    #[error("denominator must be even")]
    OddDenominator,
    #[error("division by zero")]
    DivisionByZero,
    #[error("value bound to '{var}' has the wrong parity")]
    ParityMismatch { var: String },
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("expression is not polynomial")]
    NonPolynomial,
    #[error(transparent)]
    Grassmann(#[from] GrassmannError),
}

/// Declared variables (with parity) and named real parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarContext {
    vars: Vec<(String, Parity)>,
    params: BTreeMap<String, f64>,
}

impl VarContext {
    pub fn new() -> Self {
        Self::default()
    }

    /// `n_even` variables `x1..` followed by `n_odd` variables `th1..`.
    pub fn standard(n_even: usize, n_odd: usize) -> Self {
        let mut ctx = Self::new();
        for i in 1..=n_even {
            ctx.push_var(&format!("x{i}"), Parity::Even);
        }
        for i in 1..=n_odd {
            ctx.push_var(&format!("th{i}"), Parity::Odd);
        }
        ctx
    }

    pub fn push_var(&mut self, name: &str, parity: Parity) -> usize {
        self.vars.push((name.to_string(), parity));
        self.vars.len() - 1
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn set_param(&mut self, name: &str, value: f64) {
        self.params.insert(name.to_string(), value);
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|(n, _)| n == name)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.vars[i].0
    }

    pub fn parity(&self, i: usize) -> Parity {
        self.vars[i].1
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        }
    }

    /// `k`-th derivative at a real point.
    pub fn derivative(self, k: usize, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Sin => match k % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            Func::Cos => match k % 4 {
                0 => x.cos(),
                1 => -x.sin(),
                2 => -x.cos(),
                _ => x.sin(),
            },
        }
    }
}

#[derive(Clone, Debug)]
enum Atom {
    Var(usize),
    Func(Func, Box<Expr>),
    Recip(Box<Expr>),
}

impl Atom {
    fn rank(&self) -> u8 {
        match self {
            Atom::Var(_) => 0,
            Atom::Func(..) => 1,
            Atom::Recip(_) => 2,
        }
    }

    fn is_polynomial(&self) -> bool {
        matches!(self, Atom::Var(_))
    }

    fn mentions_odd(&self) -> bool {
        match self {
            Atom::Var(_) => false,
            Atom::Func(_, e) | Atom::Recip(e) => e.mentions_odd(),
        }
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Atom::Var(a), Atom::Var(b)) => a.cmp(b),
            (Atom::Func(f, a), Atom::Func(g, b)) => f.cmp(g).then_with(|| a.cmp(b)),
            (Atom::Recip(a), Atom::Recip(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Atom {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Atom {}

#[derive(Clone, Debug)]
struct Term {
    coeff: f64,
    atoms: Vec<(Atom, u32)>,
    odd: Vec<usize>,
}

impl Term {
    fn constant(c: f64) -> Self {
        Term {
            coeff: c,
            atoms: Vec::new(),
            odd: Vec::new(),
        }
    }

    fn degree(&self) -> u32 {
        self.atoms.iter().map(|(_, p)| p).sum::<u32>() + self.odd.len() as u32
    }

    fn cmp_monomial(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.odd.len().cmp(&other.odd.len()))
            .then_with(|| self.atoms.cmp(&other.atoms))
            .then_with(|| self.odd.cmp(&other.odd))
    }

    fn mul(&self, other: &Term) -> Option<Term> {
        // odd parts: merge, zero on repetition, sign from inversions
        let mut sign = 1.0;
        for &b in &other.odd {
            if self.odd.contains(&b) {
                return None;
            }
            if self.odd.iter().filter(|&&a| a > b).count() % 2 == 1 {
                sign = -sign;
            }
        }
        let mut odd: Vec<usize> = self.odd.iter().chain(&other.odd).copied().collect();
        odd.sort_unstable();
        let mut atoms = self.atoms.clone();
        for (a, p) in &other.atoms {
            match atoms.binary_search_by(|(x, _)| x.cmp(a)) {
                Ok(k) => atoms[k].1 += p,
                Err(k) => atoms.insert(k, (a.clone(), *p)),
            }
        }
        Some(Term {
            coeff: sign * self.coeff * other.coeff,
            atoms,
            odd,
        })
    }

    fn without_atom_power(&self, k: usize) -> Term {
        let mut t = self.clone();
        if t.atoms[k].1 == 1 {
            t.atoms.remove(k);
        } else {
            t.atoms[k].1 -= 1;
        }
        t
    }

    fn even_part(&self) -> Term {
        Term {
            coeff: self.coeff,
            atoms: self.atoms.clone(),
            odd: Vec::new(),
        }
    }

    fn odd_part(&self) -> Term {
        Term {
            coeff: 1.0,
            atoms: Vec::new(),
            odd: self.odd.clone(),
        }
    }
}

/// Normalized expression; see the module docs.
#[derive(Clone, Debug)]
pub struct Expr {
    terms: Vec<Term>,
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.terms.iter().zip(&other.terms) {
            let o = a.cmp_monomial(b).then_with(|| a.coeff.total_cmp(&b.coeff));
            if o != Ordering::Equal {
                return o;
            }
        }
        self.terms.len().cmp(&other.terms.len())
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Expr {}

impl Expr {
    fn from_terms(mut terms: Vec<Term>) -> Expr {
        terms.sort_by(|a, b| a.cmp_monomial(b));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last_mut() {
                Some(last) if last.cmp_monomial(&t) == Ordering::Equal => last.coeff += t.coeff,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coeff != 0.0);
        Expr { terms: out }
    }

    fn from_term(t: Term) -> Expr {
        Self::from_terms(vec![t])
    }

    fn from_atom(a: Atom, p: u32) -> Expr {
        Self::from_term(Term {
            coeff: 1.0,
            atoms: vec![(a, p)],
            odd: Vec::new(),
        })
    }

    pub fn zero() -> Expr {
        Expr { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Expr {
        Self::from_term(Term::constant(c))
    }

    pub fn var(ctx: &VarContext, i: usize) -> Expr {
        match ctx.parity(i) {
            Parity::Even => Self::from_atom(Atom::Var(i), 1),
            Parity::Odd => Self::from_term(Term {
                coeff: 1.0,
                atoms: Vec::new(),
                odd: vec![i],
            }),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.as_slice() {
            [] => Some(0.0),
            [t] if t.atoms.is_empty() && t.odd.is_empty() => Some(t.coeff),
            _ => None,
        }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Largest coefficient magnitude in the normal form.
    pub fn max_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.coeff.abs()))
    }

    pub fn is_polynomial(&self) -> bool {
        self.terms.iter().all(|t| t.atoms.iter().all(|(a, _)| a.is_polynomial()))
    }

    fn mentions_odd(&self) -> bool {
        self.terms
            .iter()
            .any(|t| !t.odd.is_empty() || t.atoms.iter().any(|(a, _)| a.mentions_odd()))
    }

    /// Parity of a homogeneous expression (zero counts as even); `None` if mixed.
    pub fn parity(&self) -> Option<Parity> {
        let mut it = self.terms.iter().map(|t| Parity::of_degree(t.odd.len()));
        let first = it.next().unwrap_or(Parity::Even);
        if it.all(|p| p == first) {
            Some(first)
        } else {
            None
        }
    }

    /// True if every term has parity `p` (vacuously for zero).
    pub fn is_homogeneous(&self, p: Parity) -> bool {
        self.terms.iter().all(|t| Parity::of_degree(t.odd.len()) == p)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        Self::from_terms(self.terms.iter().chain(&other.terms).cloned().collect())
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        self.scale(-1.0)
    }

    pub fn scale(&self, k: f64) -> Expr {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * k,
                    ..t.clone()
                })
                .collect(),
        )
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                if let Some(t) = a.mul(b) {
                    terms.push(t);
                }
            }
        }
        Self::from_terms(terms)
    }

    pub fn recip(&self) -> Result<Expr, ExprError> {
        if let Some(c) = self.as_constant() {
            return if c == 0.0 {
                Err(ExprError::DivisionByZero)
            } else {
                Ok(Expr::constant(1.0 / c))
            };
        }
        if !self.is_homogeneous(Parity::Even) {
            return Err(ExprError::OddDenominator);
        }
        if let [t] = self.terms.as_slice() {
            if t.odd.is_empty() {
                // invert a single even monomial factor by factor
                let mut acc = Expr::constant(1.0 / t.coeff);
                for (a, p) in &t.atoms {
                    let inv = match a {
                        Atom::Recip(inner) => inner.powi(*p as i32)?,
                        other => Expr::from_atom(Atom::Recip(Box::new(Expr::from_atom(other.clone(), 1))), *p),
                    };
                    acc = acc.mul(&inv);
                }
                return Ok(acc);
            }
        }
        Ok(Expr::from_atom(Atom::Recip(Box::new(self.clone())), 1))
    }

    pub fn div(&self, other: &Expr) -> Result<Expr, ExprError> {
        Ok(self.mul(&other.recip()?))
    }

    pub fn powi(&self, n: i32) -> Result<Expr, ExprError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut acc = Expr::constant(1.0);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        Ok(acc)
    }

    pub fn apply(func: Func, arg: &Expr) -> Result<Expr, ExprError> {
        if let Some(c) = arg.as_constant() {
            return Ok(Expr::constant(func.derivative(0, c)));
        }
        if arg.mentions_odd() {
            return Err(ExprError::OddInTranscendental { func: func.name() });
        }
        Ok(Expr::from_atom(Atom::Func(func, Box::new(arg.clone())), 1))
    }

    /// Partial derivative; derivatives by odd variables act from the left.
    pub fn differentiate(&self, ctx: &VarContext, var: usize) -> Expr {
        let odd = ctx.parity(var).is_odd();
        let mut acc = Expr::zero();
        for t in &self.terms {
            for (k, (a, p)) in t.atoms.iter().enumerate() {
                let da = atom_derivative(a, ctx, var);
                if da.is_zero() {
                    continue;
                }
                let rest = t.without_atom_power(k);
                let prefactor = Expr::from_term(Term {
                    coeff: rest.coeff * *p as f64,
                    ..rest.even_part()
                });
                acc = acc.add(&prefactor.mul(&da).mul(&Expr::from_term(rest.odd_part())));
            }
            if odd {
                if let Some(pos) = t.odd.iter().position(|&i| i == var) {
                    let mut rest = t.clone();
                    rest.odd.remove(pos);
                    if pos % 2 == 1 {
                        rest.coeff = -rest.coeff;
                    }
                    acc = acc.add(&Expr::from_term(rest));
                }
            }
        }
        acc
    }

    /// `[f, ∂f, ∂²f, …]` up to `order` with respect to `var`.
    pub fn derivative_tower(&self, ctx: &VarContext, var: usize, order: usize) -> Vec<Expr> {
        let mut out = vec![self.clone()];
        for _ in 0..order {
            let next = out.last().expect("nonempty").differentiate(ctx, var);
            out.push(next);
        }
        out
    }

    /// Generic evaluation; `proto` fixes the shape of constants.
    pub fn eval<S: Scalar>(&self, values: &[S], proto: &S) -> Result<S, ExprError> {
        let mut total = proto.constant_like(0.0);
        for t in &self.terms {
            let mut acc = proto.constant_like(t.coeff);
            for (a, p) in &t.atoms {
                let v = match a {
                    Atom::Var(i) => values[*i].clone(),
                    Atom::Func(f, inner) => inner.eval(values, proto)?.apply(*f)?,
                    Atom::Recip(inner) => inner.eval(values, proto)?.recip()?,
                };
                for _ in 0..*p {
                    acc = acc.mul(&v);
                }
            }
            for &i in &t.odd {
                acc = acc.mul(&values[i]);
            }
            total = total.add(&acc);
        }
        Ok(total)
    }

    /// Real evaluation; odd variables are ignored in the bound values and
    /// contribute zero.
    pub fn eval_real(&self, values: &[f64]) -> Result<f64, ExprError> {
        self.eval(values, &0.0)
    }

    /// Evaluation at a supernumber point whose parities are checked against
    /// the context.
    pub fn eval_super(&self, ctx: &VarContext, point: &[Supernumber], n: usize) -> Result<Supernumber, ExprError> {
        if point.len() != ctx.len() {
            return Err(ExprError::Arity {
                expected: ctx.len(),
                got: point.len(),
            });
        }
        for (i, v) in point.iter().enumerate() {
            let ok = match ctx.parity(i) {
                Parity::Even => v.is_even(),
                Parity::Odd => v.is_odd(),
            };
            if !ok || v.num_generators() != n {
                return Err(ExprError::ParityMismatch {
                    var: ctx.name(i).to_string(),
                });
            }
        }
        self.eval(point, &Supernumber::zero(n))
    }

    /// Canonical text; parses back to an equal expression.
    pub fn display(&self, ctx: &VarContext) -> String {
        let mut s = String::new();
        if self.terms.is_empty() {
            return "0".into();
        }
        for (k, t) in self.terms.iter().enumerate() {
            let neg = t.coeff < 0.0;
            match (k, neg) {
                (0, true) => s.push('-'),
                (0, false) => {}
                (_, true) => s.push_str(" - "),
                (_, false) => s.push_str(" + "),
            }
            let mag = t.coeff.abs();
            let mut factors: Vec<String> = Vec::new();
            if mag != 1.0 || (t.atoms.is_empty() && t.odd.is_empty()) {
                factors.push(format!("{mag}"));
            }
            for (a, p) in &t.atoms {
                factors.push(match a {
                    Atom::Var(i) if *p == 1 => ctx.name(*i).to_string(),
                    Atom::Var(i) => format!("{}^{p}", ctx.name(*i)),
                    Atom::Func(f, inner) if *p == 1 => format!("{}({})", f.name(), inner.display(ctx)),
                    Atom::Func(f, inner) => format!("{}({})^{p}", f.name(), inner.display(ctx)),
                    Atom::Recip(inner) => format!("({})^-{p}", inner.display(ctx)),
                });
            }
            for &i in &t.odd {
                factors.push(ctx.name(i).to_string());
            }
            let _ = write!(s, "{}", factors.join("*"));
        }
        s
    }
}

fn atom_derivative(a: &Atom, ctx: &VarContext, var: usize) -> Expr {
    match a {
        Atom::Var(i) => {
            if *i == var {
                Expr::constant(1.0)
            } else {
                Expr::zero()
            }
        }
        Atom::Func(f, inner) => {
            let du = inner.differentiate(ctx, var);
            if du.is_zero() {
                return du;
            }
            let outer = match f {
                Func::Sin => Expr::from_atom(Atom::Func(Func::Cos, inner.clone()), 1),
                Func::Cos => Expr::from_atom(Atom::Func(Func::Sin, inner.clone()), 1).neg(),
                Func::Exp => Expr::from_atom(Atom::Func(Func::Exp, inner.clone()), 1),
            };
            outer.mul(&du)
        }
        Atom::Recip(inner) => {
            let du = inner.differentiate(ctx, var);
            if du.is_zero() {
                return du;
            }
            Expr::from_atom(Atom::Recip(inner.clone()), 2).neg().mul(&du)
        }
    }
}

/// Values an [`Expr`] can be evaluated over. Implementations must agree with
/// `f64` arithmetic on the body so that real and super evaluations match.
pub trait Scalar: Clone {
    fn constant_like(&self, v: f64) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn recip(&self) -> Result<Self, ExprError>;
    fn apply(&self, f: Func) -> Result<Self, ExprError>;
}

impl Scalar for f64 {
    fn constant_like(&self, v: f64) -> Self {
        v
    }

    fn add(&self, other: &Self) -> Self {
        self + other
    }

    fn mul(&self, other: &Self) -> Self {
        self * other
    }

    fn recip(&self) -> Result<Self, ExprError> {
        if *self == 0.0 {
            Err(ExprError::DivisionByZero)
        } else {
            Ok(1.0 / self)
        }
    }

    fn apply(&self, f: Func) -> Result<Self, ExprError> {
        Ok(f.derivative(0, *self))
    }
}

impl Scalar for Supernumber {
    fn constant_like(&self, v: f64) -> Self {
        Supernumber::scalar(self.num_generators(), v)
    }

    fn add(&self, other: &Self) -> Self {
        self + other
    }

    fn mul(&self, other: &Self) -> Self {
        self * other
    }

    fn recip(&self) -> Result<Self, ExprError> {
        self.try_recip().map_err(|e| match e {
            GrassmannError::ZeroBody => ExprError::DivisionByZero,
            other => other.into(),
        })
    }

    fn apply(&self, f: Func) -> Result<Self, ExprError> {
        Ok(self.taylor_eval(|k, x| f.derivative(k, x))?)
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    toks: Vec<(Tok, usize)>,
}

impl<'a> Lexer<'a> {
    fn run(src: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer { src, toks: Vec::new() };
        let bytes = src.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            if c.is_ascii_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == b'.' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &lx.src[start..i];
                let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                lx.toks.push((Tok::Num(v), start));
            } else if c.is_ascii_alphabetic() || c == b'_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                lx.toks.push((Tok::Ident(lx.src[start..i].to_string()), start));
            } else if b"+-*/^()".contains(&c) {
                lx.toks.push((Tok::Op(c as char), i));
                i += 1;
            } else {
                let ch = lx.src[i..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: i,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        }
        lx.toks.push((Tok::End, src.len()));
        Ok(lx.toks)
    }
}

struct Parser<'c> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    ctx: &'c VarContext,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self) -> ExprError {
        let message = match self.peek() {
            Tok::End => "unexpected end of input".to_string(),
            Tok::Num(v) => format!("unexpected number {v}"),
            Tok::Ident(s) => format!("unexpected identifier '{s}'"),
            Tok::Op(c) => format!("unexpected '{c}'"),
        };
        ExprError::Syntax {
            offset: self.offset(),
            message,
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    acc = acc.add(&self.product()?);
                }
                Tok::Op('-') => {
                    self.bump();
                    acc = acc.sub(&self.product()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    acc = acc.mul(&self.unary()?);
                }
                Tok::Op('/') => {
                    self.bump();
                    acc = acc.div(&self.unary()?)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(self.unary()?.neg())
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let mut sign = 1;
        match self.peek() {
            Tok::Op('-') => {
                sign = -1;
                self.bump();
            }
            Tok::Op('+') => {
                self.bump();
            }
            _ => {}
        }
        let offset = self.offset();
        match self.bump().0 {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => base.powi(sign * v as i32),
            Tok::Num(_) => Err(ExprError::NonIntegerPower { offset }),
            _ => {
                self.pos -= 1;
                Err(self.unexpected())
            }
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::constant(v))
            }
            Tok::Op('(') => {
                self.bump();
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::Op('(') {
                    let func = Func::from_name(&name).ok_or(ExprError::UnknownFunction {
                        name: name.clone(),
                        offset,
                    })?;
                    self.bump();
                    let arg = self.sum()?;
                    self.expect(')')?;
                    return Expr::apply(func, &arg);
                }
                if let Some(i) = self.ctx.index_of(&name) {
                    Ok(Expr::var(self.ctx, i))
                } else if let Some(v) = self.ctx.param(&name) {
                    Ok(Expr::constant(v))
                } else {
                    Err(ExprError::UnknownIdentifier { name, offset })
                }
            }
            _ => Err(self.unexpected()),
        }
    }
}

/// Parses an expression over the variables and parameters of `ctx`.
pub fn parse(src: &str, ctx: &VarContext) -> Result<Expr, ExprError> {
    let toks = Lexer::run(src)?;
    let mut p = Parser { toks, pos: 0, ctx };
    let e = p.sum()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected());
    }
    Ok(e)
}
