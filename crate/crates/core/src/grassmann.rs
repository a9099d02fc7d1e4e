//! Truncated Grassmann algebra Λ(ℝ^L).
//!
//! A [`GrassmannNumber`] is a real linear combination of monomials
//! `θ_{i1} θ_{i2} … θ_{ik}` (`i1 < … < ik`) in `L` anticommuting generators.
//! Monomials are encoded as bitmasks (bit `k - 1` ↔ generator `θ_k`) and the
//! coefficients are kept in a sparse list sorted by increasing bitmask.
//! Exact zeros are never stored, so structural equality is coefficient
//! equality.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Largest supported number of generators (monomials are `u32` masks).
pub const MAX_GENERATORS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
    Inhomogeneous,
}

impl Parity {
    pub fn from_bit(bit: u8) -> Self {
        if bit % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `0` for even, `1` for odd, `None` for inhomogeneous.
    pub fn bit(self) -> Option<u8> {
        match self {
            Parity::Even => Some(0),
            Parity::Odd => Some(1),
            Parity::Inhomogeneous => None,
        }
    }

    /// Parity of a product of two homogeneous factors.
    pub fn product(self, other: Parity) -> Parity {
        match (self.bit(), other.bit()) {
            (Some(a), Some(b)) => Parity::from_bit(a + b),
            _ => Parity::Inhomogeneous,
        }
    }

    /// Parity of a sum.
    pub fn sum(self, other: Parity) -> Parity {
        if self == other {
            self
        } else {
            Parity::Inhomogeneous
        }
    }

    /// Parity shifted by one (parity reversal, as for odd tangent vectors).
    pub fn flip(self) -> Parity {
        self.product(Parity::Odd)
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::Inhomogeneous => "inhomogeneous",
        })
    }
}

/// `(-1)^k` as a float.
#[inline]
pub fn koszul(k: u32) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign of the permutation that sorts the concatenation `I ‖ J` of two
/// disjoint generator sets.
#[inline]
pub fn merge_sign(i: u32, j: u32) -> f64 {
    let mut inversions = 0u32;
    let mut rest = j;
    let wide = u64::from(i);
    while rest != 0 {
        let low = rest.trailing_zeros();
        inversions += (wide >> (low + 1)).count_ones();
        rest &= rest - 1;
    }
    koszul(inversions)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannNumber {
    generators: usize,
    terms: Vec<(u32, f64)>,
}

impl GrassmannNumber {
    pub fn zero(generators: usize) -> Self {
        debug_assert!(generators <= MAX_GENERATORS);
        Self {
            generators,
            terms: Vec::new(),
        }
    }

    pub fn scalar(generators: usize, value: f64) -> Self {
        let mut out = Self::zero(generators);
        if value != 0.0 {
            out.terms.push((0, value));
        }
        out
    }

    pub fn one(generators: usize) -> Self {
        Self::scalar(generators, 1.0)
    }

    /// The generator `θ_index` (1-based).
    pub fn generator(generators: usize, index: usize) -> Result<Self> {
        check_generators(generators)?;
        if index == 0 || index > generators {
            return Err(Error::GeneratorOutOfRange { index, generators });
        }
        Ok(Self {
            generators,
            terms: vec![(1 << (index - 1), 1.0)],
        })
    }

    /// The monomial `c · θ_{i1} ⋯ θ_{ik}` given by a list of 1-based generator
    /// indices in any order; the reordering sign is applied.
    pub fn monomial(generators: usize, coefficient: f64, indices: &[usize]) -> Result<Self> {
        let mut out = Self::scalar(generators, coefficient);
        for &index in indices {
            out = out.checked_mul(&Self::generator(generators, index)?)?;
        }
        Ok(out)
    }

    /// Builds a number from `(bitmask, coefficient)` pairs; repeated masks are summed.
    pub fn from_terms<I>(generators: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, f64)>,
    {
        check_generators(generators)?;
        let limit = full_mask(generators);
        let mut list = Vec::new();
        for (mask, c) in terms {
            if mask & !limit != 0 {
                return Err(Error::GeneratorOutOfRange {
                    index: 32 - mask.leading_zeros() as usize,
                    generators,
                });
            }
            list.push((mask, c));
        }
        Ok(Self {
            generators,
            terms: normalize(list),
        })
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    /// Nonzero `(bitmask, coefficient)` pairs in increasing bitmask order.
    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn coefficient(&self, mask: u32) -> f64 {
        match self.terms.binary_search_by_key(&mask, |&(m, _)| m) {
            Ok(pos) => self.terms[pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The body map: coefficient of the empty monomial.
    pub fn body(&self) -> f64 {
        match self.terms.first() {
            Some(&(0, c)) => c,
            _ => 0.0,
        }
    }

    /// Everything except the body.
    pub fn soul(&self) -> Self {
        Self {
            generators: self.generators,
            terms: self.terms.iter().copied().filter(|&(m, _)| m != 0).collect(),
        }
    }

    pub fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for &(m, _) in &self.terms {
            if m.count_ones() % 2 == 0 {
                even = true;
            } else {
                odd = true;
            }
        }
        if odd && even {
            Parity::Inhomogeneous
        } else if odd {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    /// True if `self` is zero or has the given (homogeneous) parity.
    pub fn has_parity(&self, parity: Parity) -> bool {
        self.is_zero() || self.parity() == parity
    }

    pub fn even_part(&self) -> Self {
        self.filter(|m| m.count_ones() % 2 == 0)
    }

    pub fn odd_part(&self) -> Self {
        self.filter(|m| m.count_ones() % 2 == 1)
    }

    fn filter(&self, keep: impl Fn(u32) -> bool) -> Self {
        Self {
            generators: self.generators,
            terms: self.terms.iter().copied().filter(|&(m, _)| keep(m)).collect(),
        }
    }

    /// Conjugation in the odd part: `σ(x₀ + x₁) = x₀ − x₁`.
    pub fn conjugate(&self) -> Self {
        Self {
            generators: self.generators,
            terms: self
                .terms
                .iter()
                .map(|&(m, c)| if m.count_ones() % 2 == 1 { (m, -c) } else { (m, c) })
                .collect(),
        }
    }

    /// `σ^k(self)`.
    pub fn conjugate_pow(&self, k: u8) -> Self {
        if k % 2 == 0 {
            self.clone()
        } else {
            self.conjugate()
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        if factor == 0.0 {
            return Self::zero(self.generators);
        }
        Self {
            generators: self.generators,
            terms: self
                .terms
                .iter()
                .map(|&(m, c)| (m, c * factor))
                .filter(|&(_, c)| c != 0.0)
                .collect(),
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.same_algebra(other)?;
        Ok(self.combine(other, 1.0))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.same_algebra(other)?;
        Ok(self.combine(other, -1.0))
    }

    /// Wedge product with Koszul signs.
    pub fn checked_mul(&self, other: &Self) -> Result<Self> {
        self.same_algebra(other)?;
        Ok(Self {
            generators: self.generators,
            terms: multiply(&self.terms, &other.terms),
        })
    }

    fn same_algebra(&self, other: &Self) -> Result<()> {
        if self.generators != other.generators {
            return Err(Error::GeneratorMismatch {
                left: self.generators,
                right: other.generators,
            });
        }
        Ok(())
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push((b[j].0, sign * b[j].1));
                j += 1;
            } else {
                let c = a[i].1 + sign * b[j].1;
                if c != 0.0 {
                    out.push((a[i].0, c));
                }
                i += 1;
                j += 1;
            }
        }
        Self {
            generators: self.generators,
            terms: out,
        }
    }

    /// `self^k` for `k ≥ 0`.
    pub fn powi(&self, k: u32) -> Self {
        let mut out = Self::one(self.generators);
        for _ in 0..k {
            if out.is_zero() {
                break;
            }
            out = &out * self;
        }
        out
    }

    /// Two-sided inverse via the finite geometric series in the nilpotent part.
    pub fn inverse(&self) -> Result<Self> {
        let b = self.body();
        if b == 0.0 {
            return Err(Error::NonInvertible);
        }
        let step = self.soul().scale(-1.0 / b);
        let mut sum = Self::one(self.generators);
        let mut term = Self::one(self.generators);
        for _ in 0..self.generators {
            term = &term * &step;
            if term.is_zero() {
                break;
            }
            sum += &term;
        }
        Ok(sum.scale(1.0 / b))
    }

    /// Extends a smooth real function to even elements by its Taylor
    /// expansion around the body, exact because the soul is nilpotent.
    /// `derivative(k, x)` must return `f^(k)(x)`.
    pub fn apply_smooth<F>(&self, derivative: F) -> Result<Self>
    where
        F: Fn(usize, f64) -> f64,
    {
        let parity = self.parity();
        if parity != Parity::Even {
            return Err(Error::NotEven(parity));
        }
        let b = self.body();
        let soul = self.soul();
        let mut out = Self::scalar(self.generators, derivative(0, b));
        let mut power = Self::one(self.generators);
        let mut factorial = 1.0;
        for k in 1..=self.generators {
            power = &power * &soul;
            if power.is_zero() {
                break;
            }
            factorial *= k as f64;
            out += &power.scale(derivative(k, b) / factorial);
        }
        Ok(out)
    }

    /// Max absolute coefficient; the tolerance metric used throughout.
    pub fn norm_max(&self) -> f64 {
        self.terms.iter().fold(0.0, |acc, &(_, c)| acc.max(c.abs()))
    }

    /// `norm_max(self - other)`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.combine(other, -1.0).norm_max()
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c.is_finite())
    }

    /// Drops coefficients with `|c| <= threshold`.
    pub fn cleanup(&self, threshold: f64) -> Self {
        Self {
            generators: self.generators,
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|&(_, c)| c.abs() > threshold)
                .collect(),
        }
    }

    /// Same coefficients viewed in an algebra with more generators.
    pub fn widen(&self, generators: usize) -> Result<Self> {
        check_generators(generators)?;
        if generators < self.generators && self.terms.iter().any(|&(m, _)| m & !full_mask(generators) != 0) {
            return Err(Error::GeneratorMismatch {
                left: self.generators,
                right: generators,
            });
        }
        Ok(Self {
            generators,
            terms: self.terms.clone(),
        })
    }

    /// Parses the textual rendering produced by `Display`, e.g.
    /// `"3 - 2*t1 + 0.5*t1^t2"`.
    pub fn parse(text: &str, generators: usize) -> Result<Self> {
        check_generators(generators)?;
        let fail = |reason: &str| Error::GrassmannSyntax {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(fail("empty input"));
        }
        let mut pieces: Vec<String> = Vec::new();
        let mut current = String::new();
        let mut prev: Option<char> = None;
        for ch in compact.chars() {
            let separator = (ch == '+' || ch == '-')
                && !current.is_empty()
                && !matches!(prev, Some('e') | Some('E') | Some('*'));
            if separator {
                pieces.push(std::mem::take(&mut current));
            }
            current.push(ch);
            prev = Some(ch);
        }
        pieces.push(current);

        let mut out = Self::zero(generators);
        for piece in pieces {
            let (sign, rest) = match piece.strip_prefix('-') {
                Some(r) => (-1.0, r),
                None => (1.0, piece.strip_prefix('+').unwrap_or(&piece)),
            };
            if rest.is_empty() {
                return Err(fail("dangling sign"));
            }
            let (coef_text, monomial_text) = match rest.find(|c| c == 't') {
                Some(0) => ("1", rest),
                Some(pos) => {
                    let (c, m) = rest.split_at(pos);
                    match c.strip_suffix('*') {
                        Some(c) => (c, m),
                        None => return Err(fail("expected '*' before monomial")),
                    }
                }
                None => (rest, ""),
            };
            let coef: f64 = coef_text
                .parse()
                .map_err(|_| fail(&format!("bad coefficient {coef_text:?}")))?;
            let mut indices = Vec::new();
            if !monomial_text.is_empty() {
                for factor in monomial_text.split('^') {
                    let digits = factor
                        .strip_prefix('t')
                        .ok_or_else(|| fail(&format!("bad generator {factor:?}")))?;
                    let index: usize = digits
                        .parse()
                        .map_err(|_| fail(&format!("bad generator {factor:?}")))?;
                    if indices.contains(&index) {
                        return Err(fail("repeated generator in monomial"));
                    }
                    indices.push(index);
                }
            }
            out += &Self::monomial(generators, sign * coef, &indices)?;
        }
        Ok(out)
    }
}

fn check_generators(generators: usize) -> Result<()> {
    if generators > MAX_GENERATORS {
        Err(Error::TooManyGenerators(generators))
    } else {
        Ok(())
    }
}

pub(crate) fn full_mask(generators: usize) -> u32 {
    if generators == 0 {
        0
    } else {
        u32::MAX >> (32 - generators)
    }
}

fn normalize(mut list: Vec<(u32, f64)>) -> Vec<(u32, f64)> {
    list.sort_unstable_by_key(|&(m, _)| m);
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(list.len());
    for (m, c) in list {
        match out.last_mut() {
            Some(last) if last.0 == m => last.1 += c,
            _ => out.push((m, c)),
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

fn multiply(a: &[(u32, f64)], b: &[(u32, f64)]) -> Vec<(u32, f64)> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if let [(0, s)] = a {
        return b.iter().map(|&(m, c)| (m, s * c)).filter(|&(_, c)| c != 0.0).collect();
    }
    if let [(0, s)] = b {
        return a.iter().map(|&(m, c)| (m, c * s)).filter(|&(_, c)| c != 0.0).collect();
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &(ma, ca) in a {
        for &(mb, cb) in b {
            if ma & mb == 0 {
                out.push((ma | mb, merge_sign(ma, mb) * ca * cb));
            }
        }
    }
    normalize(out)
}

fn mismatch(a: &GrassmannNumber, b: &GrassmannNumber) -> ! {
    panic!(
        "Grassmann generator count mismatch: {} vs {}",
        a.generators, b.generators
    )
}

// Operator impls panic on a generator-count mismatch; use the `checked_*`
// methods where the operands come from user input.

impl Add<&GrassmannNumber> for &GrassmannNumber {
    type Output = GrassmannNumber;
    fn add(self, rhs: &GrassmannNumber) -> GrassmannNumber {
        if self.generators != rhs.generators {
            mismatch(self, rhs)
        }
        self.combine(rhs, 1.0)
    }
}

impl Sub<&GrassmannNumber> for &GrassmannNumber {
    type Output = GrassmannNumber;
    fn sub(self, rhs: &GrassmannNumber) -> GrassmannNumber {
        if self.generators != rhs.generators {
            mismatch(self, rhs)
        }
        self.combine(rhs, -1.0)
    }
}

impl Mul<&GrassmannNumber> for &GrassmannNumber {
    type Output = GrassmannNumber;
    fn mul(self, rhs: &GrassmannNumber) -> GrassmannNumber {
        if self.generators != rhs.generators {
            mismatch(self, rhs)
        }
        GrassmannNumber {
            generators: self.generators,
            terms: multiply(&self.terms, &rhs.terms),
        }
    }
}

impl Add for GrassmannNumber {
    type Output = GrassmannNumber;
    fn add(self, rhs: GrassmannNumber) -> GrassmannNumber {
        &self + &rhs
    }
}

impl Sub for GrassmannNumber {
    type Output = GrassmannNumber;
    fn sub(self, rhs: GrassmannNumber) -> GrassmannNumber {
        &self - &rhs
    }
}

impl Mul for GrassmannNumber {
    type Output = GrassmannNumber;
    fn mul(self, rhs: GrassmannNumber) -> GrassmannNumber {
        &self * &rhs
    }
}

impl Mul<f64> for &GrassmannNumber {
    type Output = GrassmannNumber;
    fn mul(self, rhs: f64) -> GrassmannNumber {
        self.scale(rhs)
    }
}

impl Neg for &GrassmannNumber {
    type Output = GrassmannNumber;
    fn neg(self) -> GrassmannNumber {
        self.scale(-1.0)
    }
}

impl Neg for GrassmannNumber {
    type Output = GrassmannNumber;
    fn neg(self) -> GrassmannNumber {
        self.scale(-1.0)
    }
}

impl AddAssign<&GrassmannNumber> for GrassmannNumber {
    fn add_assign(&mut self, rhs: &GrassmannNumber) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&GrassmannNumber> for GrassmannNumber {
    fn sub_assign(&mut self, rhs: &GrassmannNumber) {
        *self = &*self - rhs;
    }
}

impl AddAssign for GrassmannNumber {
    fn add_assign(&mut self, rhs: GrassmannNumber) {
        *self += &rhs;
    }
}

impl SubAssign for GrassmannNumber {
    fn sub_assign(&mut self, rhs: GrassmannNumber) {
        *self -= &rhs;
    }
}

impl fmt::Display for GrassmannNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (pos, &(mask, c)) in self.terms.iter().enumerate() {
            let magnitude = c.abs();
            if pos == 0 {
                if c.is_sign_negative() {
                    f.write_str("-")?;
                }
            } else if c.is_sign_negative() {
                f.write_str(" - ")?;
            } else {
                f.write_str(" + ")?;
            }
            write!(f, "{magnitude}")?;
            if mask != 0 {
                f.write_str("*")?;
                f.write_str(&monomial_name(mask))?;
            }
        }
        Ok(())
    }
}

/// `t1^t3` style name of a monomial bitmask.
pub fn monomial_name(mask: u32) -> String {
    subset_indices(mask)
        .iter()
        .map(|i| format!("t{i}"))
        .collect::<Vec<_>>()
        .join("^")
}

/// 1-based generator indices contained in a bitmask, increasing.
pub fn subset_indices(mask: u32) -> Vec<usize> {
    (0..32).filter(|b| mask & (1 << b) != 0).map(|b| b as usize + 1).collect()
}

/// Bitmask of a set of 1-based generator indices.
pub fn subset_mask(indices: &[usize]) -> u32 {
    indices.iter().fold(0, |m, &i| m | (1 << (i - 1)))
}
