//! Points, tangent vectors, 1-forms and coordinate changes on a single
//! coordinate superdomain, plus the odd-coordinate coefficient expansion.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grassmann::{GrassmannNumber, Parity};
use crate::linalg;
use crate::superexpr::{CoordinateSystem, SuperExpr, Tape};

/// Checks that `values[i]` has parity `ε_i + shift` and a common generator
/// count; returns that count.
pub fn check_slots(coords: &CoordinateSystem, values: &[GrassmannNumber], shift: u8, what: &str) -> Result<usize> {
    if values.len() != coords.dim() {
        return Err(Error::Dimension(format!(
            "{what} has {} components, expected {}",
            values.len(),
            coords.dim()
        )));
    }
    let generators = values.first().map_or(0, GrassmannNumber::generators);
    for (i, v) in values.iter().enumerate() {
        if v.generators() != generators {
            return Err(Error::GeneratorMismatch {
                left: generators,
                right: v.generators(),
            });
        }
        let expected = Parity::from_bit(coords.eps(i) + shift);
        if !v.has_parity(expected) {
            return Err(Error::ParityViolation(format!(
                "{what} component {} ({}) must be {expected}, got {}",
                i + 1,
                coords.name(i),
                v.parity()
            )));
        }
    }
    Ok(generators)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuperPoint {
    coords: CoordinateSystem,
    values: Vec<GrassmannNumber>,
}

impl SuperPoint {
    pub fn new(coords: &CoordinateSystem, values: Vec<GrassmannNumber>) -> Result<Self> {
        check_slots(coords, &values, 0, "point")?;
        Ok(Self {
            coords: coords.clone(),
            values,
        })
    }

    pub fn coords(&self) -> &CoordinateSystem {
        &self.coords
    }

    pub fn values(&self) -> &[GrassmannNumber] {
        &self.values
    }

    pub fn generators(&self) -> usize {
        self.values.first().map_or(0, GrassmannNumber::generators)
    }
}

/// Which part of the tangent bundle a vector lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bundle {
    /// `TM⁽⁰⁾`: `ε(v^i) = ε_i`.
    Even,
    /// `TM⁽¹⁾`: `ε(v̄^i) = ε_i + 1`.
    Odd,
}

impl Bundle {
    pub fn shift(self) -> u8 {
        match self {
            Bundle::Even => 0,
            Bundle::Odd => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    base: SuperPoint,
    components: Vec<GrassmannNumber>,
    bundle: Bundle,
}

impl TangentVector {
    pub fn new(base: SuperPoint, components: Vec<GrassmannNumber>, bundle: Bundle) -> Result<Self> {
        let g = check_slots(base.coords(), &components, bundle.shift(), "tangent vector")?;
        if !components.is_empty() && g != base.generators() {
            return Err(Error::GeneratorMismatch {
                left: base.generators(),
                right: g,
            });
        }
        Ok(Self {
            base,
            components,
            bundle,
        })
    }

    pub fn base(&self) -> &SuperPoint {
        &self.base
    }

    pub fn components(&self) -> &[GrassmannNumber] {
        &self.components
    }

    pub fn bundle(&self) -> Bundle {
        self.bundle
    }
}

/// An even 1-form `α = Σ_i α_i dx^i` with `ε(α_i) = ε_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm {
    coords: CoordinateSystem,
    components: Vec<SuperExpr>,
}

impl OneForm {
    pub fn new(coords: &CoordinateSystem, components: Vec<SuperExpr>) -> Result<Self> {
        if components.len() != coords.dim() {
            return Err(Error::Dimension(format!(
                "1-form has {} components, expected {}",
                components.len(),
                coords.dim()
            )));
        }
        for (i, a) in components.iter().enumerate() {
            if !a.fits_parity(coords.parity(i)) {
                return Err(Error::ParityViolation(format!(
                    "even 1-form component alpha({}) must be {}, got {} ({a})",
                    i + 1,
                    coords.parity(i),
                    a.parity()
                )));
            }
        }
        Ok(Self {
            coords: coords.clone(),
            components,
        })
    }

    pub fn zero(coords: &CoordinateSystem) -> Self {
        Self {
            coords: coords.clone(),
            components: vec![SuperExpr::zero(); coords.dim()],
        }
    }

    pub fn coords(&self) -> &CoordinateSystem {
        &self.coords
    }

    pub fn components(&self) -> &[SuperExpr] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(SuperExpr::is_zero)
    }

    /// Component values `α_i(x)`.
    pub fn evaluate(&self, at: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        Tape::compile(&self.components).eval(at)
    }

    /// Left contraction `ι(v)α = Σ_j v^j σ^{ε_j}(α_j)` of component values.
    pub fn contract_values(coords: &CoordinateSystem, v: &[GrassmannNumber], alpha: &[GrassmannNumber]) -> GrassmannNumber {
        let generators = v.first().map_or(0, GrassmannNumber::generators);
        let mut acc = GrassmannNumber::zero(generators);
        for (j, (vj, aj)) in v.iter().zip(alpha).enumerate() {
            acc += vj * &aj.conjugate_pow(coords.eps(j));
        }
        acc
    }

    /// `ι(v)α` at the point `at`.
    pub fn contract(&self, at: &[GrassmannNumber], v: &[GrassmannNumber]) -> Result<GrassmannNumber> {
        let alpha = self.evaluate(at)?;
        Ok(Self::contract_values(&self.coords, v, &alpha))
    }
}

/// A change of coordinates `y^p = y^p(x)` from `source` to `target`.
#[derive(Clone, Debug)]
pub struct CoordinateChange {
    source: CoordinateSystem,
    target: CoordinateSystem,
    formulas: Vec<SuperExpr>,
    jacobian: Vec<Vec<SuperExpr>>,
}

impl CoordinateChange {
    pub fn new(source: &CoordinateSystem, target: &CoordinateSystem, formulas: Vec<SuperExpr>) -> Result<Self> {
        if source.even_dim() != target.even_dim() || source.odd_dim() != target.odd_dim() {
            return Err(Error::Dimension("coordinate change must preserve p|q".into()));
        }
        if formulas.len() != target.dim() {
            return Err(Error::Dimension(format!(
                "{} formulas for {} target coordinates",
                formulas.len(),
                target.dim()
            )));
        }
        for (p, y) in formulas.iter().enumerate() {
            if !y.fits_parity(target.parity(p)) {
                return Err(Error::ParityViolation(format!(
                    "{} = {y} must be {}",
                    target.name(p),
                    target.parity(p)
                )));
            }
            if y.max_var_index().is_some_and(|m| m >= source.dim()) {
                return Err(Error::InvalidArgument(format!("{} uses unknown coordinates", target.name(p))));
            }
        }
        let jacobian = (0..source.dim())
            .map(|i| {
                formulas
                    .iter()
                    .map(|y| y.partial(i, source.parity(i)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            formulas,
            jacobian,
        })
    }

    pub fn identity(coords: &CoordinateSystem) -> Self {
        let formulas = (0..coords.dim()).map(|i| coords.var(i)).collect();
        Self::new(coords, coords, formulas).expect("identity change is valid")
    }

    pub fn source(&self) -> &CoordinateSystem {
        &self.source
    }

    pub fn target(&self) -> &CoordinateSystem {
        &self.target
    }

    pub fn formulas(&self) -> &[SuperExpr] {
        &self.formulas
    }

    /// Symbolic Jacobian `J[i][p] = ∂_{x^i} y^p`.
    pub fn jacobian(&self) -> &[Vec<SuperExpr>] {
        &self.jacobian
    }

    pub fn apply(&self, x: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        check_slots(&self.source, x, 0, "point")?;
        Tape::compile(&self.formulas).eval(x)
    }

    pub fn jacobian_at(&self, x: &[GrassmannNumber]) -> Result<linalg::Matrix> {
        let n = self.source.dim();
        let flat: Vec<SuperExpr> = self.jacobian.iter().flatten().cloned().collect();
        let values = Tape::compile(&flat).eval(x)?;
        Ok(values.chunks(n.max(1)).map(<[GrassmannNumber]>::to_vec).take(n).collect())
    }

    /// `w^p = Σ_i v^i (∂_{x^i} y^p)(x)`, based at `y(x)`.
    pub fn pushforward(&self, t: &TangentVector) -> Result<TangentVector> {
        if t.base().coords() != &self.source {
            return Err(Error::InvalidArgument("tangent vector lives in another chart".into()));
        }
        let x = t.base().values();
        let j = self.jacobian_at(x)?;
        linalg::invert(&j)?;
        let generators = t.base().generators();
        let n = self.target.dim();
        let mut w = vec![GrassmannNumber::zero(generators); n];
        for (i, vi) in t.components().iter().enumerate() {
            for (p, wp) in w.iter_mut().enumerate() {
                *wp += vi * &j[i][p];
            }
        }
        let base = SuperPoint::new(&self.target, self.apply(x)?)?;
        TangentVector::new(base, w, t.bundle())
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &CoordinateChange) -> Result<CoordinateChange> {
        if other.source != self.target {
            return Err(Error::InvalidArgument("changes do not compose".into()));
        }
        let formulas = other
            .formulas
            .iter()
            .map(|z| z.substitute(&|p| Some(self.formulas[p].clone())))
            .collect();
        CoordinateChange::new(&self.source, &other.target, formulas)
    }
}

/// Coefficient functions `f_I` of `f = Σ_I ξ^I f_I` over the odd coordinates
/// `odd` (indices into the coordinate system). Keys are bitmasks over
/// positions in `odd`: bit `k` stands for `odd[k]`.
pub fn expand_coefficients(e: &SuperExpr, coords: &CoordinateSystem, odd: &[usize]) -> Result<BTreeMap<u32, SuperExpr>> {
    for &i in odd {
        if i >= coords.dim() || coords.parity(i) != Parity::Odd {
            return Err(Error::InvalidArgument(format!("coordinate {i} is not an odd coordinate")));
        }
    }
    let zeroed = |f: &SuperExpr| f.substitute(&|i| odd.contains(&i).then(SuperExpr::zero));
    let mut out = BTreeMap::new();
    for mask in 0u32..(1u32 << odd.len()) {
        let mut f = e.clone();
        for (k, &i) in odd.iter().enumerate() {
            if mask & (1 << k) != 0 {
                f = f.partial(i, Parity::Odd)?;
            }
        }
        let f = zeroed(&f);
        if !f.is_zero() {
            out.insert(mask, f);
        }
    }
    Ok(out)
}

/// `Σ_I ξ^I f_I`, the inverse of [`expand_coefficients`].
pub fn reassemble(coeffs: &BTreeMap<u32, SuperExpr>, coords: &CoordinateSystem, odd: &[usize]) -> SuperExpr {
    SuperExpr::sum(coeffs.iter().map(|(&mask, f)| {
        let monomial = odd
            .iter()
            .enumerate()
            .filter(|(k, _)| mask & (1 << k) != 0)
            .fold(SuperExpr::one(), |acc, (_, &i)| acc.mul(&coords.var(i)));
        monomial.mul(f)
    }))
}
