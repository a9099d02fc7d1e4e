//! Super metrics, musical isomorphisms, the Levi-Civita connection and the
//! free-particle Hamiltonian on the even cotangent bundle.
//!
//! Pairing: `g(v, w) = Σ_{ij} v^i σ^{ε_i}(w^j) g_{ij}`.
//! Cotangent coordinates `(x^i, p_i)` with `ε(p_i) = ε_i`, momenta named
//! `p_<coordinate>`.

use crate::connection::{ChristoffelField, Tensor21};
use crate::error::{Error, Result};
use crate::flows::{integrate, GeodesicField, Integrator, Trajectory};
use crate::geometry::{check_slots, TangentVector};
use crate::grassmann::{koszul, GrassmannNumber, Parity};
use crate::linalg::{self, ExprMatrix};
use crate::superexpr::{CoordinateSystem, DoubledSystem, SuperExpr, Tape};

/// Graded-symmetric even matrix field `g_{ij}` with symbolic inverse `g^{ij}`.
#[derive(Clone, Debug)]
pub struct SuperMetric {
    coords: CoordinateSystem,
    g: ExprMatrix,
    inv: ExprMatrix,
    g_tape: Tape,
    inv_tape: Tape,
}

/// Worst residual of each metric invariant over a set of sample points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricInvariants {
    pub symmetry: f64,
    pub inverse_left: f64,
    pub inverse_right: f64,
    pub inverse_symmetry: f64,
    /// Smallest `|pivot|` met while inverting the body matrix.
    pub min_body_pivot: f64,
}

impl MetricInvariants {
    pub fn max_residual(&self) -> f64 {
        self.symmetry
            .max(self.inverse_left)
            .max(self.inverse_right)
            .max(self.inverse_symmetry)
    }
}

fn sym_sign(c: &CoordinateSystem, i: usize, j: usize) -> f64 {
    koszul(u32::from(c.eps(i) * c.eps(j)))
}

impl SuperMetric {
    /// Full `n×n` matrix of entries. Parities are checked symbolically;
    /// graded symmetry is checked at sample points by [`Self::invariants`].
    pub fn new(coords: &CoordinateSystem, g: ExprMatrix) -> Result<Self> {
        let n = coords.dim();
        if g.len() != n || g.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("metric must be {n}x{n}")));
        }
        for (i, row) in g.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                e.check_parity_rules()?;
                let expected = Parity::from_bit(coords.eps(i) + coords.eps(j));
                if !e.fits_parity(expected) {
                    return Err(Error::ParityViolation(format!(
                        "metric entry g({},{}) = {e} must be {expected}, got {}",
                        i + 1,
                        j + 1,
                        e.parity()
                    )));
                }
            }
        }
        let inv = linalg::invert_supermatrix_symbolic(&g, coords.even_dim());
        let flat = |m: &ExprMatrix| -> Vec<SuperExpr> { m.iter().flatten().cloned().collect() };
        Ok(Self {
            coords: coords.clone(),
            g_tape: Tape::compile(&flat(&g)),
            inv_tape: Tape::compile(&flat(&inv)),
            g,
            inv,
        })
    }

    /// Builds from entries with `i ≤ j` (0-based); the rest follow from
    /// `g_{ji} = (−1)^{ε_i ε_j} g_{ij}`, unspecified pairs are zero.
    pub fn from_upper<I>(coords: &CoordinateSystem, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize), SuperExpr)>,
    {
        let n = coords.dim();
        let mut g = vec![vec![SuperExpr::zero(); n]; n];
        for ((i, j), e) in entries {
            if i >= n || j >= n {
                return Err(Error::Dimension(format!("metric index ({},{}) out of range", i + 1, j + 1)));
            }
            let (i, j) = (i.min(j), i.max(j));
            if i == j && coords.eps(i) == 1 && !e.is_zero() {
                return Err(Error::InvalidArgument(format!(
                    "g({},{}) must vanish: odd diagonal entries are antisymmetric",
                    i + 1,
                    j + 1
                )));
            }
            g[j][i] = e.scale(sym_sign(coords, i, j));
            g[i][j] = e;
        }
        Self::new(coords, g)
    }

    pub fn parse<'a, I>(coords: &CoordinateSystem, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((usize, usize), &'a str)>,
    {
        let parsed = entries
            .into_iter()
            .map(|(ij, src)| Ok((ij, SuperExpr::parse(src, coords)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_upper(coords, parsed)
    }

    pub fn coords(&self) -> &CoordinateSystem {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> &SuperExpr {
        &self.g[i][j]
    }

    pub fn inverse_entry(&self, i: usize, j: usize) -> &SuperExpr {
        &self.inv[i][j]
    }

    /// `g_{ij}(x)` as a matrix.
    pub fn values_at(&self, x: &[GrassmannNumber]) -> Result<linalg::Matrix> {
        Ok(to_matrix(self.g_tape.eval(x)?, self.dim()))
    }

    /// `g^{ij}(x)` from the symbolic inverse.
    pub fn inverse_at(&self, x: &[GrassmannNumber]) -> Result<linalg::Matrix> {
        Ok(to_matrix(self.inv_tape.eval(x)?, self.dim()))
    }

    pub fn invariants(&self, samples: &[Vec<GrassmannNumber>]) -> Result<MetricInvariants> {
        let c = &self.coords;
        let n = self.dim();
        let mut out = MetricInvariants {
            min_body_pivot: f64::INFINITY,
            ..Default::default()
        };
        for x in samples {
            let g = self.values_at(x)?;
            let body: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(GrassmannNumber::body).collect()).collect();
            out.min_body_pivot = out.min_body_pivot.min(min_pivot(body));
            let inv = self.inverse_at(x)?;
            let generators = x.first().map_or(0, GrassmannNumber::generators);
            let id = linalg::identity(n, generators);
            let left = linalg::mat_mul(&g, &inv);
            let right = linalg::mat_mul(&inv, &g);
            for i in 0..n {
                for j in 0..n {
                    out.symmetry = out.symmetry.max(g[i][j].distance(&g[j][i].scale(sym_sign(c, i, j))));
                    out.inverse_left = out.inverse_left.max(left[i][j].distance(&id[i][j]));
                    out.inverse_right = out.inverse_right.max(right[i][j].distance(&id[i][j]));
                    let s = koszul(u32::from(c.eps(i) + c.eps(j) + c.eps(i) * c.eps(j)));
                    out.inverse_symmetry = out.inverse_symmetry.max(inv[i][j].distance(&inv[j][i].scale(s)));
                }
            }
        }
        Ok(out)
    }

    /// `g(v, w)` at `x`.
    pub fn eval(&self, x: &[GrassmannNumber], v: &[GrassmannNumber], w: &[GrassmannNumber]) -> Result<GrassmannNumber> {
        let g = self.values_at(x)?;
        Ok(pair_values(&self.coords, &g, v, w))
    }

    /// `g(v, w)` for tangent vectors at a common base point.
    pub fn eval_vectors(&self, v: &TangentVector, w: &TangentVector) -> Result<GrassmannNumber> {
        if v.base() != w.base() {
            return Err(Error::InvalidArgument("tangent vectors have different base points".into()));
        }
        if v.base().coords() != &self.coords {
            return Err(Error::InvalidArgument("tangent vectors live on another coordinate system".into()));
        }
        self.eval(v.base().values(), v.components(), w.components())
    }

    /// Kinetic energy `½ g(v, v)`.
    pub fn energy(&self, x: &[GrassmannNumber], v: &[GrassmannNumber]) -> Result<GrassmannNumber> {
        Ok(self.eval(x, v, v)?.scale(0.5))
    }

    /// `½ g(g♯α, g♯α)` for a covector of either parity; identically zero
    /// for odd covectors.
    pub fn covector_energy(&self, x: &[GrassmannNumber], alpha: &[GrassmannNumber]) -> Result<GrassmannNumber> {
        let inv = self.inverse_at(x)?;
        let v = contract_first(&self.coords, &inv, alpha, false);
        self.energy(x, &v)
    }

    /// `g♭(v)_i = Σ_j (−1)^{ε_i} v^j g_{ji}`.
    pub fn flat(&self, x: &[GrassmannNumber], v: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        check_slots(&self.coords, v, 0, "vector")?;
        let g = self.values_at(x)?;
        Ok(contract_first(&self.coords, &g, v, true))
    }

    /// `g♯(α)^j = Σ_i (−1)^{ε_i} α_i g^{ij}`.
    pub fn sharp(&self, x: &[GrassmannNumber], alpha: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        check_slots(&self.coords, alpha, 0, "covector")?;
        let inv = self.inverse_at(x)?;
        Ok(contract_first(&self.coords, &inv, alpha, false))
    }

    /// `Γ^i_{jk} = ½ Σ_ℓ (∂_j g_{kℓ} + (−1)^{ε_jε_k} ∂_k g_{jℓ}
    /// − (−1)^{ε_ℓ(ε_j+ε_k)} ∂_ℓ g_{jk}) g^{ℓi}`.
    pub fn levi_civita(&self) -> Result<ChristoffelField> {
        let c = &self.coords;
        let n = self.dim();
        let mut dg = vec![vec![vec![SuperExpr::zero(); n]; n]; n];
        for (a, slab) in dg.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    slab[i][j] = self.g[i][j].partial(a, c.parity(a))?;
                }
            }
        }
        let mut comps = vec![SuperExpr::zero(); n * n * n];
        for j in 0..n {
            for k in 0..n {
                let lowered: Vec<SuperExpr> = (0..n)
                    .map(|l| {
                        let s1 = sym_sign(c, j, k);
                        let s2 = koszul(u32::from(c.eps(l) * (c.eps(j) + c.eps(k))));
                        dg[j][k][l]
                            .add(&dg[k][j][l].scale(s1))
                            .sub(&dg[l][j][k].scale(s2))
                            .scale(0.5)
                    })
                    .collect();
                for i in 0..n {
                    comps[(i * n + j) * n + k] =
                        SuperExpr::sum((0..n).map(|l| lowered[l].mul(&self.inv[l][i])));
                }
            }
        }
        Ok(ChristoffelField::new(Tensor21::new(c, comps)?))
    }

    /// Max over samples and coordinate triples of
    /// `|∂_p g(∂_j, ∂_k) − g(∇_p ∂_j, ∂_k) − (−1)^{ε_pε_j} g(∂_j, ∇_p ∂_k)|`.
    pub fn compatibility_check(&self, gamma: &ChristoffelField, samples: &[Vec<GrassmannNumber>]) -> Result<f64> {
        let c = &self.coords;
        if gamma.coords() != c {
            return Err(Error::InvalidArgument("connection lives on another coordinate system".into()));
        }
        let n = self.dim();
        let basis = |m: usize| -> Vec<SuperExpr> {
            (0..n).map(|i| if i == m { SuperExpr::one() } else { SuperExpr::zero() }).collect()
        };
        let mut nabla = Vec::with_capacity(n * n);
        for p in 0..n {
            for j in 0..n {
                nabla.push(gamma.covariant_derivative(&basis(p), &basis(j))?);
            }
        }
        let mut residuals = Vec::with_capacity(n * n * n);
        for p in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = self.pair_expr(&basis(j), &basis(k)).partial(p, c.parity(p))?;
                    let a = self.pair_expr(&nabla[p * n + j], &basis(k));
                    let b = self.pair_expr(&basis(j), &nabla[p * n + k]).scale(sym_sign(c, p, j));
                    residuals.push(lhs.sub(&a).sub(&b));
                }
            }
        }
        let tape = Tape::compile(&residuals);
        let mut worst: f64 = 0.0;
        for x in samples {
            for r in tape.eval(x)? {
                worst = worst.max(r.norm_max());
            }
        }
        Ok(worst)
    }

    /// `g(X, Y)` of vector fields as an expression.
    pub fn pair_expr(&self, v: &[SuperExpr], w: &[SuperExpr]) -> SuperExpr {
        let c = &self.coords;
        let n = self.dim();
        let mut terms = Vec::new();
        for i in 0..n {
            if v[i].is_zero() {
                continue;
            }
            for j in 0..n {
                if w[j].is_zero() || self.g[i][j].is_zero() {
                    continue;
                }
                terms.push(v[i].mul(&w[j].conjugate_pow(c.eps(i))).mul(&self.g[i][j]));
            }
        }
        SuperExpr::sum(terms)
    }

    /// Geodesic energy drift `max_t |½g(v,v)(t) − ½g(v,v)(0)|` along a
    /// geodesic of `gamma`.
    pub fn energy_drift(
        &self,
        gamma: &ChristoffelField,
        x: &[GrassmannNumber],
        v: &[GrassmannNumber],
        t_end: f64,
        opts: Integrator,
    ) -> Result<f64> {
        let traj = GeodesicField::new(gamma)?.integrate(x, v, t_end, opts)?;
        let e0 = self.energy(x, v)?;
        let mut worst: f64 = 0.0;
        for k in 0..traj.len() {
            worst = worst.max(self.energy(traj.x(k), traj.v(k))?.distance(&e0));
        }
        Ok(worst)
    }
}

fn to_matrix(flat: Vec<GrassmannNumber>, n: usize) -> linalg::Matrix {
    let mut it = flat.into_iter();
    (0..n).map(|_| it.by_ref().take(n).collect()).collect()
}

fn min_pivot(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut worst = f64::INFINITY;
    for col in 0..n {
        let Some(piv) = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())) else {
            break;
        };
        m.swap(col, piv);
        let d = m[col][col];
        worst = worst.min(d.abs());
        if d == 0.0 {
            break;
        }
        for r in col + 1..n {
            let f = m[r][col] / d;
            for k in col..n {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    worst
}

pub(crate) fn pair_values(
    c: &CoordinateSystem,
    g: &linalg::Matrix,
    v: &[GrassmannNumber],
    w: &[GrassmannNumber],
) -> GrassmannNumber {
    let generators = v.first().map_or(0, GrassmannNumber::generators);
    let mut acc = GrassmannNumber::zero(generators);
    for (i, vi) in v.iter().enumerate() {
        if vi.is_zero() {
            continue;
        }
        for (j, wj) in w.iter().enumerate() {
            if !g[i][j].is_zero() && !wj.is_zero() {
                acc += &(vi * &wj.conjugate_pow(c.eps(i))) * &g[i][j];
            }
        }
    }
    acc
}

/// `out_j = Σ_i a_i m_{ij}` with a `(−1)^{ε}` sign on either the output
/// index (`g♭`) or the summed index (`g♯`).
fn contract_first(c: &CoordinateSystem, m: &linalg::Matrix, a: &[GrassmannNumber], sign_on_output: bool) -> Vec<GrassmannNumber> {
    let n = c.dim();
    let generators = a.first().map_or(0, GrassmannNumber::generators);
    (0..n)
        .map(|j| {
            let mut acc = GrassmannNumber::zero(generators);
            for i in 0..n {
                let term = &a[i] * &m[i][j];
                acc += if sign_on_output { term } else { term.scale(koszul(u32::from(c.eps(i)))) };
            }
            if sign_on_output {
                acc.scale(koszul(u32::from(c.eps(j))))
            } else {
                acc
            }
        })
        .collect()
}

/// Points `(x, p)` of the even cotangent bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct CotangentPoint {
    pub x: Vec<GrassmannNumber>,
    pub p: Vec<GrassmannNumber>,
}

impl CotangentPoint {
    pub fn new(coords: &CoordinateSystem, x: Vec<GrassmannNumber>, p: Vec<GrassmannNumber>) -> Result<Self> {
        let l = check_slots(coords, &x, 0, "base point")?;
        let m = check_slots(coords, &p, 0, "momenta")?;
        if l != m {
            return Err(Error::GeneratorMismatch { left: l, right: m });
        }
        Ok(Self { x, p })
    }

    pub fn state(&self) -> Vec<GrassmannNumber> {
        let mut s = self.x.clone();
        s.extend_from_slice(&self.p);
        s
    }
}

/// `H(x,p) = ½ Σ_{jk} (−1)^{ε_k} g^{jk}(x) p_k p_j` and its Hamiltonian
/// vector field on the even cotangent bundle.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    metric: SuperMetric,
    cotangent: DoubledSystem,
    h: SuperExpr,
    field: Vec<SuperExpr>,
    h_tape: Tape,
    field_tape: Tape,
}

impl Hamiltonian {
    pub fn new(metric: &SuperMetric) -> Result<Self> {
        let c = metric.coords();
        let n = c.dim();
        let cot = c.doubled("p_", 0)?;
        let p = |i: usize| cot.fiber_var(i);
        let mut terms = Vec::new();
        for j in 0..n {
            for k in 0..n {
                let ginv = metric.inverse_entry(j, k);
                if ginv.is_zero() {
                    continue;
                }
                terms.push(ginv.mul(&p(k)).mul(&p(j)).scale(0.5 * koszul(u32::from(c.eps(k)))));
            }
        }
        let h = SuperExpr::sum(terms);
        // X_H = Σ (−1)^{ε_k} p_k g^{ki} ∂_{x^i} − ½ Σ (−1)^{ε_i+ε_k} ∂_i g^{jk} p_k p_j ∂_{p_i}
        let mut field = Vec::with_capacity(2 * n);
        for i in 0..n {
            field.push(SuperExpr::sum((0..n).map(|k| {
                p(k).mul(metric.inverse_entry(k, i)).scale(koszul(u32::from(c.eps(k))))
            })));
        }
        for i in 0..n {
            let mut terms = Vec::new();
            for j in 0..n {
                for k in 0..n {
                    let d = metric.inverse_entry(j, k).partial(i, c.parity(i))?;
                    if d.is_zero() {
                        continue;
                    }
                    let s = -0.5 * koszul(u32::from(c.eps(i) + c.eps(k)));
                    terms.push(d.mul(&p(k)).mul(&p(j)).scale(s));
                }
            }
            field.push(SuperExpr::sum(terms));
        }
        Ok(Self {
            metric: metric.clone(),
            h_tape: Tape::compile(std::slice::from_ref(&h)),
            field_tape: Tape::compile(&field),
            cotangent: cot,
            h,
            field,
        })
    }

    pub fn metric(&self) -> &SuperMetric {
        &self.metric
    }

    pub fn cotangent_system(&self) -> &DoubledSystem {
        &self.cotangent
    }

    pub fn expr(&self) -> &SuperExpr {
        &self.h
    }

    /// Components of `X_H` in the order `(ẋ, ṗ)`.
    pub fn vector_field(&self) -> &[SuperExpr] {
        &self.field
    }

    pub fn eval(&self, pt: &CotangentPoint) -> Result<GrassmannNumber> {
        Ok(self.h_tape.eval(&pt.state())?.remove(0))
    }

    pub fn field_at(&self, pt: &CotangentPoint) -> Result<Vec<GrassmannNumber>> {
        self.field_tape.eval(&pt.state())
    }

    /// The symplectic gradient of `f` for `ω = Σ dp_i ∧ dx^i`, i.e. the
    /// solution of `ι(X_f)ω = −df` in coordinates:
    /// `X_f = Σ_i ∂_{p_i} f ∂_{x^i} − (−1)^{ε_i} ∂_{x^i} f ∂_{p_i}` (left
    /// derivatives, `f` even).
    pub fn symplectic_gradient(&self, f: &SuperExpr) -> Result<Vec<SuperExpr>> {
        let c = self.metric.coords();
        let n = c.dim();
        let mut out = Vec::with_capacity(2 * n);
        for i in 0..n {
            out.push(f.partial(n + i, self.cotangent.parity(n + i))?);
        }
        for i in 0..n {
            out.push(f.partial(i, c.parity(i))?.scale(-koszul(u32::from(c.eps(i)))));
        }
        Ok(out)
    }

    /// Max `|X_H − X_f|` with `f = H` over `points`.
    pub fn symplectic_residual(&self, points: &[CotangentPoint]) -> Result<f64> {
        let grad = Tape::compile(&self.symplectic_gradient(&self.h)?);
        let mut worst: f64 = 0.0;
        for pt in points {
            let s = pt.state();
            for (a, b) in self.field_tape.eval(&s)?.iter().zip(grad.eval(&s)?) {
                worst = worst.max(a.distance(&b));
            }
        }
        Ok(worst)
    }

    /// Integrates `X_H` from `pt`.
    pub fn flow(&self, pt: &CotangentPoint, t_end: f64, opts: Integrator) -> Result<Trajectory> {
        integrate(|s| self.field_tape.eval(s), pt.state(), t_end, opts)
    }

    /// `max_t |H(t) − H(0)|` along the integrated flow.
    pub fn energy_drift(&self, pt: &CotangentPoint, t_end: f64, opts: Integrator) -> Result<f64> {
        let traj = self.flow(pt, t_end, opts)?;
        let h0 = self.eval(pt)?;
        let mut worst: f64 = 0.0;
        for s in &traj.states {
            worst = worst.max(self.h_tape.eval(s)?[0].distance(&h0));
        }
        Ok(worst)
    }

    /// Pushes `X_H` forward through `(x, p) ↦ (x, g♯p)` and compares with
    /// the geodesic field of `gamma` at `(x, g♯p)`. Returns the max residual.
    pub fn intertwine_check(&self, gamma: &ChristoffelField, points: &[CotangentPoint]) -> Result<f64> {
        let c = self.metric.coords();
        let n = c.dim();
        let sharp: Vec<SuperExpr> = (0..n)
            .map(|a| {
                SuperExpr::sum((0..n).map(|i| {
                    self.cotangent
                        .fiber_var(i)
                        .mul(self.metric.inverse_entry(i, a))
                        .scale(koszul(u32::from(c.eps(i))))
                }))
            })
            .collect();
        let mut pushed: Vec<SuperExpr> = self.field[..n].to_vec();
        for v in &sharp {
            let mut terms = Vec::new();
            for (b, xb) in self.field.iter().enumerate() {
                if xb.is_zero() || !v.depends_on(b) {
                    continue;
                }
                terms.push(xb.mul(&v.partial(b, self.cotangent.parity(b))?));
            }
            pushed.push(SuperExpr::sum(terms));
        }
        let pushed = Tape::compile(&pushed);
        let sharp = Tape::compile(&sharp);
        let geo = GeodesicField::new(gamma)?;
        let mut worst: f64 = 0.0;
        for pt in points {
            let s = pt.state();
            let lhs = pushed.eval(&s)?;
            let v = sharp.eval(&s)?;
            let (dx, dv) = geo.eval(&pt.x, &v)?;
            for (a, b) in lhs.iter().zip(dx.iter().chain(&dv)) {
                worst = worst.max(a.distance(b));
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Sampler;

    fn super_metric() -> SuperMetric {
        let c = CoordinateSystem::new(&["x1", "x2"], &["xi1", "xi2"]).unwrap();
        SuperMetric::parse(
            &c,
            [
                ((0, 0), "1 + x1^2 + xi1*xi2"),
                ((0, 1), "0.5*x2"),
                ((1, 1), "2 + x1*xi1*xi2"),
                ((0, 2), "x1*xi1"),
                ((1, 3), "xi2"),
                ((2, 3), "1 + x2*xi1*xi2"),
            ],
        )
        .unwrap()
    }

    fn surface() -> SuperMetric {
        let c = CoordinateSystem::new(&["x1", "x2"], &[] as &[&str]).unwrap();
        SuperMetric::parse(&c, [((0, 0), "1"), ((1, 1), "x1^2")]).unwrap()
    }

    fn cotangent_points(g: &SuperMetric, seed: u64, count: usize) -> Vec<CotangentPoint> {
        let mut s = Sampler::new(seed, 4);
        (0..count)
            .map(|_| {
                let x = s.point(g.coords());
                let p = s.components(g.coords(), 0);
                CotangentPoint::new(g.coords(), x, p).unwrap()
            })
            .collect()
    }

    #[test]
    fn identity_metric_pairing() {
        let c = CoordinateSystem::new(&["x1", "x2"], &[] as &[&str]).unwrap();
        let g = SuperMetric::parse(&c, [((0, 0), "1"), ((1, 1), "1")]).unwrap();
        let n = |v: f64| GrassmannNumber::scalar(0, v);
        let val = g.eval(&[n(0.0), n(0.0)], &[n(2.0), n(3.0)], &[n(5.0), n(7.0)]).unwrap();
        assert_eq!(val.body(), 31.0);
        let flat = g.flat(&[n(0.0), n(0.0)], &[n(2.0), n(3.0)]).unwrap();
        assert_eq!((flat[0].body(), flat[1].body()), (2.0, 3.0));
    }

    #[test]
    fn odd_block_pairing_matches_hand_expansion() {
        // g_{12} = 1 = −g_{21} on 0|2: g(v, w) = v¹σ(w²) − v²σ(w¹) = −v¹w² + v²w¹
        let c = CoordinateSystem::new(&[] as &[&str], &["xi1", "xi2"]).unwrap();
        let g = SuperMetric::parse(&c, [((0, 1), "1")]).unwrap();
        let mut s = Sampler::new(2, 4);
        for _ in 0..20 {
            let x = s.point(&c);
            let v = s.components(&c, 0);
            let w = s.components(&c, 0);
            let expected = &(&v[1] * &w[0]) - &(&v[0] * &w[1]);
            assert!(g.eval(&x, &v, &w).unwrap().distance(&expected) < 1e-14);
            // graded symmetry for even vectors
            assert!(g.eval(&x, &v, &w).unwrap().distance(&g.eval(&x, &w, &v).unwrap()) < 1e-14);
        }
        assert!(SuperMetric::parse(&c, [((0, 0), "1")]).is_err());
    }

    #[test]
    fn invariants_hold_at_samples() {
        let g = super_metric();
        let pts = Sampler::new(3, 4).points(g.coords(), 100);
        let inv = g.invariants(&pts).unwrap();
        assert!(inv.max_residual() < 1e-10, "{inv:?}");
        assert!(inv.min_body_pivot > 0.1);
    }

    #[test]
    fn musical_round_trip() {
        let g = super_metric();
        let mut s = Sampler::new(4, 4);
        for _ in 0..20 {
            let x = s.point(g.coords());
            let v = s.components(g.coords(), 0);
            let back = g.sharp(&x, &g.flat(&x, &v).unwrap()).unwrap();
            for (a, b) in v.iter().zip(&back) {
                assert!(a.distance(b) < 1e-10);
            }
        }
        let c = CoordinateSystem::new(&["x1"], &[] as &[&str]).unwrap();
        let g2 = SuperMetric::parse(&c, [((0, 0), "2")]).unwrap();
        let one = GrassmannNumber::one(0);
        assert_eq!(g2.sharp(std::slice::from_ref(&one), std::slice::from_ref(&one)).unwrap()[0].body(), 0.5);
    }

    #[test]
    fn levi_civita_examples() {
        let c = CoordinateSystem::new(&["x1", "x2"], &[] as &[&str]).unwrap();
        let constant = SuperMetric::parse(&c, [((0, 0), "2"), ((0, 1), "0.5"), ((1, 1), "3")]).unwrap();
        let pts = Sampler::new(1, 0).points(&c, 10);
        assert_eq!(constant.levi_civita().unwrap().symbols().max_norm(&pts).unwrap(), 0.0);
        let g = surface();
        let gamma = g.levi_civita().unwrap();
        for x in Sampler::new(5, 2).points(g.coords(), 10) {
            let vals = gamma.values_at(&x).unwrap();
            let x1 = &x[0];
            let at = |i: usize, j: usize, k: usize| &vals[(i * 2 + j) * 2 + k];
            // Γ²_{12} = Γ²_{21} = 1/x₁, Γ¹_{22} = −x₁, others zero
            assert!(at(1, 0, 1).distance(&x1.inverse().unwrap()) < 1e-12);
            assert!(at(1, 1, 0).distance(&x1.inverse().unwrap()) < 1e-12);
            assert!(at(0, 1, 1).distance(&(-x1)) < 1e-12);
            assert!(at(0, 0, 0).is_zero() && at(1, 1, 1).is_zero());
        }
    }

    #[test]
    fn levi_civita_is_compatible_and_unique() {
        let g = super_metric();
        let gamma = g.levi_civita().unwrap();
        let pts = Sampler::new(6, 4).points(g.coords(), 30);
        assert!(gamma.is_torsion_free(&pts, 1e-10).unwrap().0);
        assert!(g.compatibility_check(&gamma, &pts).unwrap() < 1e-10);
        let bumped = gamma
            .with_entry((0, 1, 1), gamma.get(0, 1, 1).add(&SuperExpr::constant(1e-3)))
            .unwrap();
        assert!(g.compatibility_check(&bumped, &pts).unwrap() > 1e-4);
        let flat = ChristoffelField::zero(g.coords());
        assert!(g.compatibility_check(&flat, &pts).unwrap() > 1e-3);
    }

    #[test]
    fn hamiltonian_values_and_field() {
        let c = CoordinateSystem::new(&["x1", "x2"], &[] as &[&str]).unwrap();
        let id = SuperMetric::parse(&c, [((0, 0), "1"), ((1, 1), "1")]).unwrap();
        let h = Hamiltonian::new(&id).unwrap();
        let n = |v: f64| GrassmannNumber::scalar(0, v);
        let pt = CotangentPoint::new(&c, vec![n(0.0), n(0.0)], vec![n(1.0), n(0.0)]).unwrap();
        assert_eq!(h.eval(&pt).unwrap().body(), 0.5);
        let f = h.field_at(&pt).unwrap();
        assert_eq!(f.iter().map(GrassmannNumber::body).collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);

        let g = super_metric();
        let h = Hamiltonian::new(&g).unwrap();
        let pts = cotangent_points(&g, 7, 30);
        for pt in &pts {
            let v = g.sharp(&pt.x, &pt.p).unwrap();
            let via_metric = g.energy(&pt.x, &v).unwrap();
            assert!(h.eval(pt).unwrap().distance(&via_metric) < 1e-10);
        }
        assert!(h.symplectic_residual(&pts).unwrap() < 1e-10);
    }

    #[test]
    fn odd_momenta_kill_the_hamiltonian() {
        let g = super_metric();
        let mut s = Sampler::new(8, 4);
        for _ in 0..20 {
            let x = s.point(g.coords());
            let pbar = s.components(g.coords(), 1);
            let val = g.covector_energy(&x, &pbar).unwrap();
            assert!(val.norm_max() < 1e-12, "{val}");
        }
    }

    #[test]
    fn intertwines_with_geodesic_field() {
        for g in [surface(), super_metric()] {
            let gamma = g.levi_civita().unwrap();
            let h = Hamiltonian::new(&g).unwrap();
            let pts = cotangent_points(&g, 9, 30);
            assert!(h.intertwine_check(&gamma, &pts).unwrap() < 1e-10);
        }
    }

    #[test]
    fn flows_conserve_energy() {
        let g = super_metric();
        let gamma = g.levi_civita().unwrap();
        let mut s = Sampler::new(10, 4).with_soul_scale(0.2);
        let x = s.point(g.coords());
        let v = s.components(g.coords(), 0).iter().map(|c| c.scale(0.3)).collect::<Vec<_>>();
        let opts = Integrator::with_step(1e-2);
        assert!(g.energy_drift(&gamma, &x, &v, 1.0, opts).unwrap() < 1e-7);
        let h = Hamiltonian::new(&g).unwrap();
        let pt = CotangentPoint::new(g.coords(), x, g.flat(&s.point(g.coords()), &v).unwrap()).unwrap();
        assert!(h.energy_drift(&pt, 1.0, opts).unwrap() < 1e-7);
    }
}
