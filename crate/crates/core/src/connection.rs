//! Connections on `TM` given by Christoffel symbols `Γ^i_{jk}`.
//!
//! Index convention: `Γ^i_{jk} = ⟨∇_{∂_j} ∂_k | dx^i⟩`, stored flat at
//! `(i·n + j)·n + k` with 0-based indices.

use crate::error::{Error, Result};
use crate::geometry::{check_slots, CoordinateChange};
use crate::grassmann::{koszul, GrassmannNumber, Parity};
use crate::linalg;
use crate::superexpr::{CoordinateSystem, SuperExpr, Tape};

/// Components of a vector field `Σ_i X^i ∂_{x^i}`.
pub type VectorField = Vec<SuperExpr>;

/// A `(1,2)` tensor field with components `S^i_{jk}`.
#[derive(Clone, Debug)]
pub struct Tensor21 {
    coords: CoordinateSystem,
    components: Vec<SuperExpr>,
}

pub type TorsionTensor = Tensor21;
pub type DifferenceTensor = Tensor21;

impl Tensor21 {
    pub fn zero(coords: &CoordinateSystem) -> Self {
        let n = coords.dim();
        Self {
            coords: coords.clone(),
            components: vec![SuperExpr::zero(); n * n * n],
        }
    }

    /// Builds from `n³` flat components; each must have parity
    /// `ε_i + ε_j + ε_k` (or be the literal zero).
    pub fn new(coords: &CoordinateSystem, components: Vec<SuperExpr>) -> Result<Self> {
        let n = coords.dim();
        if components.len() != n * n * n {
            return Err(Error::Dimension(format!(
                "{} components for dimension {n} (expected {})",
                components.len(),
                n * n * n
            )));
        }
        let t = Self {
            coords: coords.clone(),
            components,
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let e = t.get(i, j, k);
                    e.check_parity_rules()?;
                    let expected = Parity::from_bit(coords.eps(i) + coords.eps(j) + coords.eps(k));
                    if !e.fits_parity(expected) {
                        return Err(Error::ParityViolation(format!(
                            "component ({},{},{}) = {e} must be {expected}, got {}",
                            i + 1,
                            j + 1,
                            k + 1,
                            e.parity()
                        )));
                    }
                }
            }
        }
        Ok(t)
    }

    pub fn coords(&self) -> &CoordinateSystem {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.dim()
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let n = self.dim();
        (i * n + j) * n + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &SuperExpr {
        &self.components[self.index(i, j, k)]
    }

    pub fn components(&self) -> &[SuperExpr] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(SuperExpr::is_zero)
    }

    /// All components at a point, flat.
    pub fn evaluate(&self, at: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        check_slots(&self.coords, at, 0, "point")?;
        Tape::compile(&self.components).eval(at)
    }

    /// `S(v, w)^i = Σ_{jk} v^j σ^{ε_j}(w^k) S^i_{jk}(x)`.
    pub fn apply(&self, at: &[GrassmannNumber], v: &[GrassmannNumber], w: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        let values = self.evaluate(at)?;
        Ok(apply_values(&self.coords, &values, v, w))
    }

    /// Largest coefficient over all components and sample points.
    pub fn max_norm(&self, samples: &[Vec<GrassmannNumber>]) -> Result<f64> {
        let tape = Tape::compile(&self.components);
        let mut worst: f64 = 0.0;
        for x in samples {
            check_slots(&self.coords, x, 0, "sample point")?;
            for v in tape.eval(x)? {
                worst = worst.max(v.norm_max());
            }
        }
        Ok(worst)
    }

    /// Max residual of `S^i_{jk} = (−1)^{ε_j ε_k} S^i_{kj}` at the samples.
    pub fn graded_symmetry_residual(&self, samples: &[Vec<GrassmannNumber>]) -> Result<f64> {
        let n = self.dim();
        let c = &self.coords;
        let mut diffs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let sign = koszul(u32::from(c.eps(j) * c.eps(k)));
                    diffs.push(self.get(i, j, k).sub(&self.get(i, k, j).scale(sign)));
                }
            }
        }
        Tensor21 {
            coords: c.clone(),
            components: diffs,
        }
        .max_norm(samples)
    }
}

pub(crate) fn apply_values(
    coords: &CoordinateSystem,
    values: &[GrassmannNumber],
    v: &[GrassmannNumber],
    w: &[GrassmannNumber],
) -> Vec<GrassmannNumber> {
    let n = coords.dim();
    let generators = v.first().map_or(0, GrassmannNumber::generators);
    let w_conj: Vec<Vec<GrassmannNumber>> = (0..2).map(|e| w.iter().map(|x| x.conjugate_pow(e)).collect()).collect();
    let mut out = vec![GrassmannNumber::zero(generators); n];
    for j in 0..n {
        if v[j].is_zero() {
            continue;
        }
        for k in 0..n {
            let wk = &w_conj[coords.eps(j) as usize][k];
            if wk.is_zero() {
                continue;
            }
            let vw = &v[j] * wk;
            for (i, out_i) in out.iter_mut().enumerate() {
                let s = &values[(i * n + j) * n + k];
                if !s.is_zero() {
                    *out_i += &vw * s;
                }
            }
        }
    }
    out
}

/// Parity of a homogeneous vector field (`None` for the zero field):
/// `X` is of parity `e` when every `X^i` has parity `ε_i + e`.
pub fn field_parity(coords: &CoordinateSystem, x: &[SuperExpr]) -> Result<Option<u8>> {
    if x.len() != coords.dim() {
        return Err(Error::Dimension(format!("vector field has {} components", x.len())));
    }
    let mut found: Option<u8> = None;
    for (i, xi) in x.iter().enumerate() {
        if xi.is_zero() {
            continue;
        }
        let bit = xi.parity().bit().ok_or_else(|| {
            Error::Inhomogeneous(format!("vector field component {} = {xi} is inhomogeneous", i + 1))
        })?;
        let e = (bit + coords.eps(i)) % 2;
        match found {
            None => found = Some(e),
            Some(f) if f != e => {
                return Err(Error::Inhomogeneous("vector field mixes even and odd components".into()))
            }
            _ => {}
        }
    }
    Ok(found)
}

#[derive(Clone, Debug)]
pub struct ChristoffelField {
    symbols: Tensor21,
    tape: Tape,
}

impl ChristoffelField {
    pub fn new(symbols: Tensor21) -> Self {
        let tape = Tape::compile(symbols.components());
        Self { symbols, tape }
    }

    pub fn zero(coords: &CoordinateSystem) -> Self {
        Self::new(Tensor21::zero(coords))
    }

    /// From `((i, j, k), Γ^i_{jk})` entries with 0-based indices; unspecified
    /// entries are zero.
    pub fn from_entries<I>(coords: &CoordinateSystem, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize, usize), SuperExpr)>,
    {
        let n = coords.dim();
        let mut comps = vec![SuperExpr::zero(); n * n * n];
        for ((i, j, k), e) in entries {
            if i >= n || j >= n || k >= n {
                return Err(Error::Dimension(format!("index ({},{},{}) out of range", i + 1, j + 1, k + 1)));
            }
            comps[(i * n + j) * n + k] = e;
        }
        Ok(Self::new(Tensor21::new(coords, comps)?))
    }

    /// Parses `((i, j, k), source)` entries (0-based indices).
    pub fn parse<'a, I>(coords: &CoordinateSystem, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize, usize), &'a str)>,
    {
        let parsed = entries
            .into_iter()
            .map(|(idx, src)| Ok((idx, SuperExpr::parse(src, coords)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(coords, parsed)
    }

    pub fn coords(&self) -> &CoordinateSystem {
        self.symbols.coords()
    }

    pub fn dim(&self) -> usize {
        self.symbols.dim()
    }

    pub fn symbols(&self) -> &Tensor21 {
        &self.symbols
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &SuperExpr {
        self.symbols.get(i, j, k)
    }

    /// Copy with one symbol replaced.
    pub fn with_entry(&self, (i, j, k): (usize, usize, usize), e: SuperExpr) -> Result<Self> {
        let n = self.dim();
        let mut comps = self.symbols.components().to_vec();
        comps[(i * n + j) * n + k] = e;
        Ok(Self::new(Tensor21::new(self.coords(), comps)?))
    }

    /// `Γ^i_{jk}(x)`, flat.
    pub fn values_at(&self, x: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        self.tape.eval(x)
    }

    /// `(∇_X Y)^i = Σ_j X^j ∂_j Y^i + Σ_{jk} X^j σ^{ε_j}(Y^k) Γ^i_{jk}`.
    pub fn covariant_derivative(&self, x: &[SuperExpr], y: &[SuperExpr]) -> Result<VectorField> {
        let c = self.coords();
        let n = c.dim();
        field_parity(c, x)?;
        if y.len() != n {
            return Err(Error::Dimension(format!("vector field has {} components", y.len())));
        }
        let y_conj: Vec<SuperExpr> = y.iter().map(SuperExpr::conjugate).collect();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut terms = Vec::new();
            for j in 0..n {
                if x[j].is_zero() {
                    continue;
                }
                terms.push(x[j].mul(&y[i].partial(j, c.parity(j))?));
                for k in 0..n {
                    let yk = if c.eps(j) == 1 { &y_conj[k] } else { &y[k] };
                    terms.push(x[j].mul(yk).mul(self.get(i, j, k)));
                }
            }
            out.push(SuperExpr::sum(terms));
        }
        Ok(out)
    }

    /// `T^i_{jk} = Γ^i_{jk} − (−1)^{ε_j ε_k} Γ^i_{kj}`.
    pub fn torsion(&self) -> TorsionTensor {
        let c = self.coords();
        let n = c.dim();
        let mut comps = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let sign = koszul(u32::from(c.eps(j) * c.eps(k)));
                    comps.push(self.get(i, j, k).sub(&self.get(i, k, j).scale(sign)));
                }
            }
        }
        Tensor21 {
            coords: c.clone(),
            components: comps,
        }
    }

    /// Torsion-free test at sample points; returns the verdict and the
    /// largest torsion coefficient seen.
    pub fn is_torsion_free(&self, samples: &[Vec<GrassmannNumber>], tol: f64) -> Result<(bool, f64)> {
        let residual = self.torsion().max_norm(samples)?;
        Ok((residual <= tol, residual))
    }

    /// `S = Γ − Γ̂`.
    pub fn difference_tensor(&self, other: &ChristoffelField) -> Result<DifferenceTensor> {
        if self.coords() != other.coords() {
            return Err(Error::InvalidArgument("connections live on different coordinate systems".into()));
        }
        let comps = self
            .symbols
            .components()
            .iter()
            .zip(other.symbols.components())
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(Tensor21 {
            coords: self.coords().clone(),
            components: comps,
        })
    }

    /// Connection with components `Γ + Δ`.
    pub fn add_tensor(&self, delta: &Tensor21) -> Result<ChristoffelField> {
        if self.coords() != delta.coords() {
            return Err(Error::InvalidArgument("tensor lives on a different coordinate system".into()));
        }
        let comps = self
            .symbols
            .components()
            .iter()
            .zip(delta.components())
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(Self::new(Tensor21::new(self.coords(), comps)?))
    }

    /// Symbols `Γ̃^r_{st}(y(x))` of the same connection in the coordinates `y`
    /// of `ch`, solved from the transformation law at the source point `x`.
    pub fn transformed_values_at(&self, ch: &CoordinateChange, x: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        let law = TransformationLaw::new(self, ch)?;
        law.solve_at(x)
    }

    /// Max residual of the transformation law between `self` and the target
    /// symbols `target` (in the coordinates of `ch`) at the samples.
    pub fn transformation_residual(
        &self,
        ch: &CoordinateChange,
        target: &ChristoffelField,
        samples: &[Vec<GrassmannNumber>],
    ) -> Result<f64> {
        if target.coords() != ch.target() {
            return Err(Error::InvalidArgument("target symbols use other coordinates".into()));
        }
        let law = TransformationLaw::new(self, ch)?;
        let mut worst: f64 = 0.0;
        for x in samples {
            let y = ch.apply(x)?;
            let tilde = target.values_at(&y)?;
            worst = worst.max(law.residual_at(x, &tilde)?);
        }
        Ok(worst)
    }

    /// Checks the transformation law at the samples. With `target` given, its
    /// symbols are compared; otherwise the law is solved for `Γ̃` at each
    /// sample and the solved values are substituted back.
    pub fn transform_christoffel(
        &self,
        ch: &CoordinateChange,
        target: Option<&ChristoffelField>,
        samples: &[Vec<GrassmannNumber>],
    ) -> Result<f64> {
        if let Some(t) = target {
            return self.transformation_residual(ch, t, samples);
        }
        let law = TransformationLaw::new(self, ch)?;
        let mut worst: f64 = 0.0;
        for x in samples {
            let tilde = law.solve_at(x)?;
            worst = worst.max(law.residual_at(x, &tilde)?);
        }
        Ok(worst)
    }
}

/// Both sides of
/// `Σ_i Γ^i_{jk} J_{ir} = ∂_j∂_k y^r + Σ_{st} (−1)^{ε_j(ε_t+ε_k)} J_{kt} J_{js} Γ̃^r_{st}(y)`
/// with `J_{ip} = ∂_{x^i} y^p`.
struct TransformationLaw<'a> {
    gamma: &'a ChristoffelField,
    ch: &'a CoordinateChange,
    /// `∂_j ∂_k y^r` at `(j·n + k)·n + r`.
    hessian: Tape,
}

impl<'a> TransformationLaw<'a> {
    fn new(gamma: &'a ChristoffelField, ch: &'a CoordinateChange) -> Result<Self> {
        if gamma.coords() != ch.source() {
            return Err(Error::InvalidArgument("coordinate change starts in another chart".into()));
        }
        let c = ch.source();
        let n = c.dim();
        let mut second = Vec::with_capacity(n * n * n);
        for j in 0..n {
            for k in 0..n {
                for r in 0..n {
                    second.push(ch.jacobian()[k][r].partial(j, c.parity(j))?);
                }
            }
        }
        Ok(Self {
            gamma,
            ch,
            hessian: Tape::compile(&second),
        })
    }

    /// `M^r_{jk} = Σ_i Γ^i_{jk} J_{ir} − ∂_j∂_k y^r` and the Jacobian.
    fn lhs_minus_hessian(&self, x: &[GrassmannNumber]) -> Result<(Vec<GrassmannNumber>, linalg::Matrix)> {
        let c = self.ch.source();
        let n = c.dim();
        check_slots(c, x, 0, "point")?;
        let gamma = self.gamma.values_at(x)?;
        let jac = self.ch.jacobian_at(x)?;
        let hess = self.hessian.eval(x)?;
        let generators = x.first().map_or(0, GrassmannNumber::generators);
        let mut m = vec![GrassmannNumber::zero(generators); n * n * n];
        for j in 0..n {
            for k in 0..n {
                for r in 0..n {
                    let mut acc = hess[(j * n + k) * n + r].scale(-1.0);
                    for i in 0..n {
                        let g = &gamma[(i * n + j) * n + k];
                        if !g.is_zero() {
                            acc += g * &jac[i][r];
                        }
                    }
                    m[(j * n + k) * n + r] = acc;
                }
            }
        }
        Ok((m, jac))
    }

    fn residual_at(&self, x: &[GrassmannNumber], tilde: &[GrassmannNumber]) -> Result<f64> {
        let c = self.ch.source();
        let n = c.dim();
        let (m, jac) = self.lhs_minus_hessian(x)?;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                for r in 0..n {
                    let mut rhs = GrassmannNumber::zero(m[0].generators());
                    for s in 0..n {
                        for t in 0..n {
                            let g = &tilde[(r * n + s) * n + t];
                            if g.is_zero() {
                                continue;
                            }
                            let sign = koszul(u32::from(c.eps(j) * ((c.eps(t) + c.eps(k)) % 2)));
                            rhs += (&(&jac[k][t] * &jac[j][s]) * g).scale(sign);
                        }
                    }
                    worst = worst.max(m[(j * n + k) * n + r].distance(&rhs));
                }
            }
        }
        Ok(worst)
    }

    /// `Γ̃^r_{ab} = Σ_k σ^{ε_a}(K_{bk}) N^r_{ak}` with `K = J⁻¹` and
    /// `N^r_{ak} = Σ_j K_{aj} M^r_{jk}`.
    fn solve_at(&self, x: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        let c = self.ch.source();
        let n = c.dim();
        let (m, jac) = self.lhs_minus_hessian(x)?;
        let k_inv = linalg::invert(&jac)?;
        let generators = x.first().map_or(0, GrassmannNumber::generators);
        let zero = GrassmannNumber::zero(generators);
        let mut nn = vec![zero.clone(); n * n * n];
        for r in 0..n {
            for a in 0..n {
                for k in 0..n {
                    let mut acc = zero.clone();
                    for j in 0..n {
                        acc += &k_inv[a][j] * &m[(j * n + k) * n + r];
                    }
                    nn[(r * n + a) * n + k] = acc;
                }
            }
        }
        let mut out = vec![zero.clone(); n * n * n];
        for r in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut acc = zero.clone();
                    for k in 0..n {
                        acc += &k_inv[b][k].conjugate_pow(c.eps(a)) * &nn[(r * n + a) * n + k];
                    }
                    out[(r * n + a) * n + b] = acc;
                }
            }
        }
        Ok(out)
    }
}
