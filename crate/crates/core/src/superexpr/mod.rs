//! Superfunctions of named even and odd coordinates.
//!
//! Expressions are immutable DAGs (`Arc`-shared nodes). Every node caches its
//! inferred parity. The `add`/`mul`/... constructors simplify lightly
//! (constant folding, unit and zero laws, and a normal form for monomials in
//! which odd coordinates appear in declaration order with the accumulated
//! reordering sign); the parser builds the raw tree without simplifying.

mod diff;
mod parse;
mod tape;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

pub use tape::Tape;

use crate::error::{Error, Result};
use crate::grassmann::{koszul, GrassmannNumber, Parity};

pub const FUNCTIONS: [&str; 4] = ["sin", "cos", "exp", "log"];

/// Ordered even and odd coordinate names of a superdomain of dimension `p|q`.
/// Index `i < p` is even, `i >= p` is odd.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoordinateSystem {
    names: Vec<String>,
    even: usize,
}

impl CoordinateSystem {
    pub fn new<S: AsRef<str>>(even: &[S], odd: &[S]) -> Result<Self> {
        let names: Vec<String> = even
            .iter()
            .chain(odd.iter())
            .map(|s| s.as_ref().to_string())
            .collect();
        for (i, name) in names.iter().enumerate() {
            if !is_identifier(name) {
                return Err(Error::InvalidCoordinates(format!("{name:?} is not an identifier")));
            }
            if FUNCTIONS.contains(&name.as_str()) {
                return Err(Error::InvalidCoordinates(format!("{name:?} is a reserved function name")));
            }
            if names[..i].contains(name) {
                return Err(Error::InvalidCoordinates(format!("duplicate coordinate {name:?}")));
            }
        }
        Ok(Self {
            names,
            even: even.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn even_dim(&self) -> usize {
        self.even
    }

    pub fn odd_dim(&self) -> usize {
        self.names.len() - self.even
    }

    /// `ε_i` as 0 or 1.
    pub fn eps(&self, index: usize) -> u8 {
        u8::from(index >= self.even)
    }

    pub fn parity(&self, index: usize) -> Parity {
        Parity::from_bit(self.eps(index))
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn even_names(&self) -> &[String] {
        &self.names[..self.even]
    }

    pub fn odd_names(&self) -> &[String] {
        &self.names[self.even..]
    }

    /// The coordinate function `x^index`.
    pub fn var(&self, index: usize) -> SuperExpr {
        SuperExpr::var(index, &self.names[index], self.parity(index))
    }

    pub fn var_named(&self, name: &str) -> Result<SuperExpr> {
        self.index_of(name)
            .map(|i| self.var(i))
            .ok_or_else(|| Error::UnknownIdentifier(name.to_string()))
    }

    /// Doubled system `(x, prefix·x)` whose second half has parities
    /// `ε_i + shift`. Used for the coordinates `(x, v)` of `TM⁽⁰⁾` and
    /// `(x, p)` of `T*M⁽⁰⁾`. Indices `0..n` coincide with `self`, so
    /// expressions in `self` embed unchanged.
    pub fn doubled(&self, prefix: &str, shift: u8) -> Result<DoubledSystem> {
        let n = self.dim();
        let fiber: Vec<(String, Parity)> = (0..n)
            .map(|i| (format!("{prefix}{}", self.names[i]), Parity::from_bit(self.eps(i) + shift)))
            .collect();
        for (name, _) in &fiber {
            if self.names.contains(name) {
                return Err(Error::InvalidCoordinates(format!(
                    "fiber coordinate {name:?} collides with a base coordinate"
                )));
            }
        }
        Ok(DoubledSystem {
            base: self.clone(),
            fiber,
        })
    }
}

/// Base coordinates followed by one fiber coordinate per base coordinate.
#[derive(Clone, Debug)]
pub struct DoubledSystem {
    base: CoordinateSystem,
    fiber: Vec<(String, Parity)>,
}

impl DoubledSystem {
    pub fn base(&self) -> &CoordinateSystem {
        &self.base
    }

    pub fn dim(&self) -> usize {
        2 * self.base.dim()
    }

    /// Expression of the `i`-th base coordinate.
    pub fn base_var(&self, i: usize) -> SuperExpr {
        self.base.var(i)
    }

    /// Expression of the `i`-th fiber coordinate.
    pub fn fiber_var(&self, i: usize) -> SuperExpr {
        let (name, parity) = &self.fiber[i];
        SuperExpr::var(self.base.dim() + i, name, *parity)
    }

    pub fn fiber_parity(&self, i: usize) -> Parity {
        self.fiber[i].1
    }

    /// Parity of combined coordinate `a` (base first, then fiber).
    pub fn parity(&self, a: usize) -> Parity {
        let n = self.base.dim();
        if a < n {
            self.base.parity(a)
        } else {
            self.fiber[a - n].1
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
}

impl UnaryOp {
    pub fn is_transcendental(self) -> bool {
        !matches!(self, UnaryOp::Neg)
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "exp" => Some(UnaryOp::Exp),
            "log" => Some(UnaryOp::Log),
            _ => None,
        }
    }

    /// `f^(k)(x)` for the transcendental functions.
    fn derivative(self, k: usize, x: f64) -> f64 {
        match self {
            UnaryOp::Neg => unreachable!("negation is not a smooth-function node"),
            UnaryOp::Sin => match k % 4 {
                0 => x.sin(),
                1 => x.cos(),
                2 => -x.sin(),
                _ => -x.cos(),
            },
            UnaryOp::Cos => match k % 4 {
                0 => x.cos(),
                1 => -x.sin(),
                2 => -x.cos(),
                _ => x.sin(),
            },
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log => {
                if k == 0 {
                    x.ln()
                } else {
                    // (-1)^(k-1) (k-1)! / x^k
                    let fact: f64 = (1..k).map(|j| j as f64).product();
                    koszul(k as u32 - 1) * fact / x.powi(k as i32)
                }
            }
        }
    }

    fn apply_real(self, x: f64) -> f64 {
        match self {
            UnaryOp::Neg => -x,
            other => other.derivative(0, x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug)]
pub enum Kind {
    Const(f64),
    Var {
        index: usize,
        name: Arc<str>,
        parity: Parity,
    },
    Unary(UnaryOp, SuperExpr),
    Binary(BinaryOp, SuperExpr, SuperExpr),
    /// Positive integer power.
    Pow(SuperExpr, u32),
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    parity: Parity,
}

#[derive(Clone)]
pub struct SuperExpr(Arc<Node>);

impl PartialEq for SuperExpr {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        match (self.kind(), other.kind()) {
            (Kind::Const(a), Kind::Const(b)) => a.to_bits() == b.to_bits(),
            (Kind::Var { index: a, .. }, Kind::Var { index: b, .. }) => a == b,
            (Kind::Unary(o1, a), Kind::Unary(o2, b)) => o1 == o2 && a == b,
            (Kind::Binary(o1, a1, b1), Kind::Binary(o2, a2, b2)) => o1 == o2 && a1 == a2 && b1 == b2,
            (Kind::Pow(a, n), Kind::Pow(b, m)) => n == m && a == b,
            _ => false,
        }
    }
}

impl fmt::Debug for SuperExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SuperExpr({self})")
    }
}

impl SuperExpr {
    fn from_kind(kind: Kind) -> Self {
        let parity = match &kind {
            Kind::Const(_) => Parity::Even,
            Kind::Var { parity, .. } => *parity,
            Kind::Unary(UnaryOp::Neg, a) => a.parity(),
            Kind::Unary(_, _) => Parity::Even,
            Kind::Binary(op, a, b) => match op {
                BinaryOp::Add | BinaryOp::Sub => {
                    if a.is_zero() {
                        b.parity()
                    } else if b.is_zero() {
                        a.parity()
                    } else {
                        a.parity().sum(b.parity())
                    }
                }
                BinaryOp::Mul => a.parity().product(b.parity()),
                BinaryOp::Div => a.parity().product(b.parity()),
            },
            Kind::Pow(a, n) => match a.parity().bit() {
                Some(bit) => Parity::from_bit(((u32::from(bit) * n) % 2) as u8),
                None => Parity::Inhomogeneous,
            },
        };
        SuperExpr(Arc::new(Node { kind, parity }))
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    /// Inferred parity (a literal zero reports `Even` but fits any slot; see
    /// [`SuperExpr::fits_parity`]).
    pub fn parity(&self) -> Parity {
        self.0.parity
    }

    /// True if the expression is the literal constant zero or has `parity`.
    pub fn fits_parity(&self, parity: Parity) -> bool {
        self.is_zero() || self.parity() == parity
    }

    pub fn constant(c: f64) -> Self {
        Self::from_kind(Kind::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn var(index: usize, name: &str, parity: Parity) -> Self {
        Self::from_kind(Kind::Var {
            index,
            name: Arc::from(name),
            parity,
        })
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.kind() {
            Kind::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub(crate) fn node_id(&self) -> *const () {
        Arc::as_ptr(&self.0) as *const ()
    }

    // ---- raw constructors (parser) ----

    pub(crate) fn raw_unary(op: UnaryOp, a: SuperExpr) -> Self {
        Self::from_kind(Kind::Unary(op, a))
    }

    pub(crate) fn raw_binary(op: BinaryOp, a: SuperExpr, b: SuperExpr) -> Self {
        Self::from_kind(Kind::Binary(op, a, b))
    }

    pub(crate) fn raw_pow(a: SuperExpr, n: u32) -> Self {
        Self::from_kind(Kind::Pow(a, n))
    }

    // ---- simplifying constructors ----

    pub fn neg(&self) -> Self {
        match self.kind() {
            Kind::Const(c) => Self::constant(-c),
            Kind::Unary(UnaryOp::Neg, a) => a.clone(),
            _ => Self::raw_unary(UnaryOp::Neg, self.clone()),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return Self::constant(a + b);
        }
        if let Kind::Unary(UnaryOp::Neg, b) = other.kind() {
            return self.sub(b);
        }
        Self::raw_binary(BinaryOp::Add, self.clone(), other.clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.neg();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return Self::constant(a - b);
        }
        if Arc::ptr_eq(&self.0, &other.0) {
            return Self::zero();
        }
        if let Kind::Unary(UnaryOp::Neg, b) = other.kind() {
            return self.add(b);
        }
        Self::raw_binary(BinaryOp::Sub, self.clone(), other.clone())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        if self.is_one() {
            return other.clone();
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (Monomial::of(self), Monomial::of(other)) {
            return a.merge(&b).to_expr();
        }
        if let Kind::Unary(UnaryOp::Neg, a) = self.kind() {
            return a.mul(other).neg();
        }
        if let Kind::Unary(UnaryOp::Neg, b) = other.kind() {
            return self.mul(b).neg();
        }
        if self.as_const() == Some(-1.0) {
            return other.neg();
        }
        Self::raw_binary(BinaryOp::Mul, self.clone(), other.clone())
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::constant(c).mul(self)
    }

    pub fn div(&self, other: &Self) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        if other.is_one() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            if b != 0.0 {
                return Self::constant(a / b);
            }
        }
        if let Some(b) = other.as_const() {
            if b != 0.0 {
                return self.scale(1.0 / b);
            }
        }
        Self::raw_binary(BinaryOp::Div, self.clone(), other.clone())
    }

    pub fn pow(&self, n: u32) -> Self {
        assert!(n >= 1, "powers are positive integers");
        if n == 1 {
            return self.clone();
        }
        if self.parity() == Parity::Odd {
            return Self::zero();
        }
        if let Some(c) = self.as_const() {
            return Self::constant(c.powi(n as i32));
        }
        if let Some(m) = Monomial::of(self) {
            let mut out = m.clone();
            for _ in 1..n {
                out = out.merge(&m);
            }
            return out.to_expr();
        }
        Self::raw_pow(self.clone(), n)
    }

    pub fn unary(op: UnaryOp, a: &Self) -> Self {
        if op == UnaryOp::Neg {
            return a.neg();
        }
        if let Some(c) = a.as_const() {
            return Self::constant(op.apply_real(c));
        }
        Self::raw_unary(op, a.clone())
    }

    pub fn sin(&self) -> Self {
        Self::unary(UnaryOp::Sin, self)
    }

    pub fn cos(&self) -> Self {
        Self::unary(UnaryOp::Cos, self)
    }

    pub fn exp(&self) -> Self {
        Self::unary(UnaryOp::Exp, self)
    }

    pub fn log(&self) -> Self {
        Self::unary(UnaryOp::Log, self)
    }

    /// Sum of a sequence (zero for an empty one).
    pub fn sum<I: IntoIterator<Item = SuperExpr>>(terms: I) -> Self {
        terms.into_iter().fold(Self::zero(), |acc, t| acc.add(&t))
    }

    /// Checks the parity rules: transcendental functions and denominators
    /// need even arguments.
    pub fn check_parity_rules(&self) -> Result<()> {
        let mut seen = HashMap::new();
        self.check_rules_memo(&mut seen)
    }

    fn check_rules_memo(&self, seen: &mut HashMap<*const (), ()>) -> Result<()> {
        if seen.insert(self.node_id(), ()).is_some() {
            return Ok(());
        }
        match self.kind() {
            Kind::Const(_) | Kind::Var { .. } => Ok(()),
            Kind::Unary(op, a) => {
                a.check_rules_memo(seen)?;
                if op.is_transcendental() && !a.fits_parity(Parity::Even) {
                    return Err(Error::ParityViolation(format!(
                        "{} argument to transcendental {}(): {a}",
                        a.parity(),
                        op.name()
                    )));
                }
                Ok(())
            }
            Kind::Binary(op, a, b) => {
                a.check_rules_memo(seen)?;
                b.check_rules_memo(seen)?;
                if *op == BinaryOp::Div && !b.fits_parity(Parity::Even) {
                    return Err(Error::ParityViolation(format!("{} denominator: {b}", b.parity())));
                }
                Ok(())
            }
            Kind::Pow(a, _) => a.check_rules_memo(seen),
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_var_index(&self) -> Option<usize> {
        let mut best = None;
        let mut seen = HashMap::new();
        self.visit(&mut seen, &mut |k| {
            if let Kind::Var { index, .. } = k {
                best = Some(best.map_or(*index, |b: usize| b.max(*index)));
            }
        });
        best
    }

    /// True if coordinate `index` occurs.
    pub fn depends_on(&self, index: usize) -> bool {
        let mut found = false;
        let mut seen = HashMap::new();
        self.visit(&mut seen, &mut |k| {
            if matches!(k, Kind::Var { index: i, .. } if *i == index) {
                found = true;
            }
        });
        found
    }

    fn visit(&self, seen: &mut HashMap<*const (), ()>, f: &mut dyn FnMut(&Kind)) {
        if seen.insert(self.node_id(), ()).is_some() {
            return;
        }
        f(self.kind());
        match self.kind() {
            Kind::Const(_) | Kind::Var { .. } => {}
            Kind::Unary(_, a) | Kind::Pow(a, _) => a.visit(seen, f),
            Kind::Binary(_, a, b) => {
                a.visit(seen, f);
                b.visit(seen, f);
            }
        }
    }

    /// Replaces coordinates by expressions (`None` keeps the coordinate),
    /// rebuilding with the simplifying constructors.
    pub fn substitute(&self, replace: &dyn Fn(usize) -> Option<SuperExpr>) -> SuperExpr {
        let mut memo = HashMap::new();
        self.substitute_memo(replace, &mut memo)
    }

    fn substitute_memo(
        &self,
        replace: &dyn Fn(usize) -> Option<SuperExpr>,
        memo: &mut HashMap<*const (), SuperExpr>,
    ) -> SuperExpr {
        if let Some(done) = memo.get(&self.node_id()) {
            return done.clone();
        }
        let out = match self.kind() {
            Kind::Const(_) => self.clone(),
            Kind::Var { index, .. } => replace(*index).unwrap_or_else(|| self.clone()),
            Kind::Unary(op, a) => Self::unary(*op, &a.substitute_memo(replace, memo)),
            Kind::Binary(op, a, b) => {
                let a = a.substitute_memo(replace, memo);
                let b = b.substitute_memo(replace, memo);
                match op {
                    BinaryOp::Add => a.add(&b),
                    BinaryOp::Sub => a.sub(&b),
                    BinaryOp::Mul => a.mul(&b),
                    BinaryOp::Div => a.div(&b),
                }
            }
            Kind::Pow(a, n) => a.substitute_memo(replace, memo).pow(*n),
        };
        memo.insert(self.node_id(), out.clone());
        out
    }

    /// Rebuilds the tree with the simplifying constructors.
    pub fn simplify(&self) -> SuperExpr {
        self.substitute(&|_| None)
    }

    /// Conjugation `σ` of the function: `f(x, ξ) ↦ f(x, −ξ)`, which equals
    /// `σ(f(x, ξ))` at every Grassmann point.
    pub fn conjugate(&self) -> SuperExpr {
        let mut odd: HashMap<usize, SuperExpr> = HashMap::new();
        let mut seen = HashMap::new();
        self.visit(&mut seen, &mut |k| {
            if let Kind::Var {
                index,
                name,
                parity: Parity::Odd,
            } = k
            {
                odd.insert(*index, SuperExpr::var(*index, name, Parity::Odd).neg());
            }
        });
        if odd.is_empty() {
            return self.clone();
        }
        self.substitute(&|i| odd.get(&i).cloned())
    }

    /// `σ^k(self)`.
    pub fn conjugate_pow(&self, k: u8) -> SuperExpr {
        if k % 2 == 0 {
            self.clone()
        } else {
            self.conjugate()
        }
    }

    /// Evaluates at a Grassmann point; `values[i]` binds coordinate `i` and
    /// must have that coordinate's parity.
    pub fn evaluate(&self, values: &[GrassmannNumber]) -> Result<GrassmannNumber> {
        let generators = values.first().map_or(0, |v| v.generators());
        let mut memo = HashMap::new();
        self.eval_memo(values, generators, &mut memo)
    }

    /// Evaluates with coordinates bound by name.
    pub fn evaluate_named(
        &self,
        coords: &CoordinateSystem,
        point: &HashMap<String, GrassmannNumber>,
    ) -> Result<GrassmannNumber> {
        let mut values = Vec::with_capacity(coords.dim());
        for name in coords.names() {
            match point.get(name) {
                Some(v) => values.push(v.clone()),
                None => return Err(Error::InvalidArgument(format!("no value bound for {name:?}"))),
            }
        }
        self.evaluate(&values)
    }

    fn eval_memo(
        &self,
        values: &[GrassmannNumber],
        generators: usize,
        memo: &mut HashMap<*const (), GrassmannNumber>,
    ) -> Result<GrassmannNumber> {
        if let Some(done) = memo.get(&self.node_id()) {
            return Ok(done.clone());
        }
        let out = match self.kind() {
            Kind::Const(c) => GrassmannNumber::scalar(generators, *c),
            Kind::Var { index, name, parity } => bind_var(values, *index, name, *parity)?.clone(),
            Kind::Unary(op, a) => eval_unary(*op, &a.eval_memo(values, generators, memo)?)?,
            Kind::Binary(op, a, b) => {
                let a = a.eval_memo(values, generators, memo)?;
                let b = b.eval_memo(values, generators, memo)?;
                eval_binary(*op, &a, &b)?
            }
            Kind::Pow(a, n) => a.eval_memo(values, generators, memo)?.powi(*n),
        };
        memo.insert(self.node_id(), out.clone());
        Ok(out)
    }

    /// Parses `src` against `coords`; see [`parse::parse`] for the grammar.
    pub fn parse(src: &str, coords: &CoordinateSystem) -> Result<Self> {
        parse::parse(src, coords)
    }
}

pub(crate) fn bind_var<'a>(
    values: &'a [GrassmannNumber],
    index: usize,
    name: &str,
    parity: Parity,
) -> Result<&'a GrassmannNumber> {
    let value = values
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("no value bound for {name:?}")))?;
    if !value.has_parity(parity) {
        return Err(Error::ParityViolation(format!(
            "{name} is {parity} but was bound to a {} value",
            value.parity()
        )));
    }
    Ok(value)
}

pub(crate) fn eval_unary(op: UnaryOp, a: &GrassmannNumber) -> Result<GrassmannNumber> {
    match op {
        UnaryOp::Neg => Ok(-a),
        UnaryOp::Log if a.body() <= 0.0 => Err(Error::Domain(format!(
            "log of element with non-positive body {}",
            a.body()
        ))),
        _ => a.apply_smooth(|k, x| op.derivative(k, x)).map_err(|_| {
            Error::ParityViolation(format!(
                "{} argument to transcendental {}()",
                a.parity(),
                op.name()
            ))
        }),
    }
}

pub(crate) fn eval_binary(op: BinaryOp, a: &GrassmannNumber, b: &GrassmannNumber) -> Result<GrassmannNumber> {
    Ok(match op {
        BinaryOp::Add => a.checked_add(b)?,
        BinaryOp::Sub => a.checked_sub(b)?,
        BinaryOp::Mul => a.checked_mul(b)?,
        BinaryOp::Div => {
            if !b.has_parity(Parity::Even) {
                return Err(Error::ParityViolation(format!("{} denominator", b.parity())));
            }
            let inv = b
                .inverse()
                .map_err(|_| Error::Domain("division by an element with zero body".into()))?;
            a.checked_mul(&inv)?
        }
    })
}

/// `c · Π x_i^{k_i} · ξ_{j1} ⋯ ξ_{jm}` with odd indices strictly increasing.
#[derive(Clone, Debug)]
struct Monomial {
    coef: f64,
    even: BTreeMap<usize, (u32, Arc<str>)>,
    odd: Vec<(usize, Arc<str>)>,
}

impl Monomial {
    fn of(e: &SuperExpr) -> Option<Monomial> {
        let unit = |coef| Monomial {
            coef,
            even: BTreeMap::new(),
            odd: Vec::new(),
        };
        match e.kind() {
            Kind::Const(c) => Some(unit(*c)),
            Kind::Var { index, name, parity } => {
                let mut m = unit(1.0);
                match parity {
                    Parity::Even => {
                        m.even.insert(*index, (1, name.clone()));
                    }
                    Parity::Odd => m.odd.push((*index, name.clone())),
                    Parity::Inhomogeneous => return None,
                }
                Some(m)
            }
            Kind::Pow(a, n) => match a.kind() {
                Kind::Var {
                    index,
                    name,
                    parity: Parity::Even,
                } => {
                    let mut m = unit(1.0);
                    m.even.insert(*index, (*n, name.clone()));
                    Some(m)
                }
                _ => None,
            },
            Kind::Unary(UnaryOp::Neg, a) => Monomial::of(a).map(|mut m| {
                m.coef = -m.coef;
                m
            }),
            Kind::Binary(BinaryOp::Mul, a, b) => Some(Monomial::of(a)?.merge(&Monomial::of(b)?)),
            _ => None,
        }
    }

    fn merge(&self, other: &Monomial) -> Monomial {
        let mut out = self.clone();
        out.coef *= other.coef;
        for (i, (k, name)) in &other.even {
            out.even
                .entry(*i)
                .and_modify(|e| e.0 += k)
                .or_insert((*k, name.clone()));
        }
        // Odd factors: sort the concatenation, counting transpositions.
        let mut odd = self.odd.clone();
        for (j, name) in &other.odd {
            if odd.iter().any(|(i, _)| i == j) {
                out.coef = 0.0;
                out.odd.clear();
                out.even.clear();
                return out;
            }
            let larger = odd.iter().filter(|(i, _)| i > j).count() as u32;
            out.coef *= koszul(larger);
            let pos = odd.partition_point(|(i, _)| i < j);
            odd.insert(pos, (*j, name.clone()));
        }
        out.odd = odd;
        out
    }

    fn to_expr(&self) -> SuperExpr {
        if self.coef == 0.0 {
            return SuperExpr::zero();
        }
        let mut factors: Vec<SuperExpr> = Vec::new();
        for (i, (k, name)) in &self.even {
            let v = SuperExpr::var(*i, name, Parity::Even);
            factors.push(if *k == 1 { v } else { SuperExpr::raw_pow(v, *k) });
        }
        for (i, name) in &self.odd {
            factors.push(SuperExpr::var(*i, name, Parity::Odd));
        }
        if factors.is_empty() {
            return SuperExpr::constant(self.coef);
        }
        if self.coef != 1.0 && self.coef != -1.0 {
            factors.insert(0, SuperExpr::constant(self.coef));
        }
        let product = factors[1..]
            .iter()
            .fold(factors[0].clone(), |acc, f| SuperExpr::raw_binary(BinaryOp::Mul, acc, f.clone()));
        if self.coef == -1.0 {
            SuperExpr::raw_unary(UnaryOp::Neg, product)
        } else {
            product
        }
    }
}

// ---- printing ----

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_FACTOR: u8 = 3;
const PREC_ATOM: u8 = 4;

fn precedence(e: &SuperExpr) -> u8 {
    match e.kind() {
        Kind::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => PREC_SUM,
        Kind::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => PREC_PRODUCT,
        Kind::Pow(..) => PREC_FACTOR,
        _ => PREC_ATOM,
    }
}

fn write_prec(f: &mut fmt::Formatter<'_>, e: &SuperExpr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "(")?;
        write_expr(f, e)?;
        write!(f, ")")
    } else {
        write_expr(f, e)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &SuperExpr) -> fmt::Result {
    match e.kind() {
        Kind::Const(c) => write!(f, "{c}"),
        Kind::Var { name, .. } => f.write_str(name),
        Kind::Unary(UnaryOp::Neg, a) => {
            f.write_str("-")?;
            write_prec(f, a, PREC_ATOM)
        }
        Kind::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write_expr(f, a)?;
            f.write_str(")")
        }
        Kind::Binary(op, a, b) => {
            let (sym, lhs, rhs) = match op {
                BinaryOp::Add => (" + ", PREC_SUM, PREC_PRODUCT),
                BinaryOp::Sub => (" - ", PREC_SUM, PREC_PRODUCT),
                BinaryOp::Mul => ("*", PREC_PRODUCT, PREC_FACTOR),
                BinaryOp::Div => ("/", PREC_PRODUCT, PREC_FACTOR),
            };
            write_prec(f, a, lhs)?;
            f.write_str(sym)?;
            write_prec(f, b, rhs)
        }
        Kind::Pow(a, n) => {
            write_prec(f, a, PREC_ATOM)?;
            write!(f, "^{n}")
        }
    }
}

impl fmt::Display for SuperExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}
