//! Projective equivalence of torsion-free connections: shifting a connection
//! by an even 1-form, recovering the 1-form from a difference tensor, and
//! solving for the reparametrization that carries geodesics of one
//! connection onto those of the other.
//!
//! Normalization: [`shift_connection`] realizes
//! `∇̂_X Y = ∇_X Y + α(X)Y + (−1)^{ε(X)ε(Y)} α(Y)X`, so the difference
//! `S = ∇ − ∇̂` has the symmetric form `½(ι(v)β·w + (−1)^{ε(v)ε(w)} ι(w)β·v)`
//! with `β = −2α`. The reparametrization equation is driven by `β`.

use std::fmt;

use crate::connection::{ChristoffelField, DifferenceTensor, Tensor21};
use crate::error::{Error, Result};
use crate::flows::{integrate, DenseFlow, GeodesicField, Integrator};
use crate::geometry::{check_slots, OneForm};
use crate::grassmann::{koszul, GrassmannNumber, Parity};
use crate::superexpr::{CoordinateSystem, SuperExpr, Tape};

/// Tolerance for algebraically exact identities.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for quantities that pass through numeric integration.
pub const FLOW_TOL: f64 = 1e-6;

/// `Γ̂ − Γ`: `δ^i_k σ^{ε_j}(α_j) + (−1)^{ε_j ε_k} δ^i_j σ^{ε_k}(α_k)`.
fn shift_tensor(alpha: &OneForm) -> Tensor21 {
    let c = alpha.coords();
    let n = c.dim();
    let conj: Vec<SuperExpr> = (0..n)
        .map(|j| alpha.components()[j].conjugate_pow(c.eps(j)))
        .collect();
    let mut comps = vec![SuperExpr::zero(); n * n * n];
    for j in 0..n {
        for k in 0..n {
            // i = k: α(e_j) e_k
            let idx = (k * n + j) * n + k;
            comps[idx] = comps[idx].add(&conj[j]);
            // i = j: (−1)^{ε_j ε_k} α(e_k) e_j
            let idx = (j * n + j) * n + k;
            let sign = koszul(u32::from(c.eps(j) * c.eps(k)));
            comps[idx] = comps[idx].add(&conj[k].scale(sign));
        }
    }
    Tensor21::new(c, comps).expect("shift components have the parity of Γ")
}

/// The projectively shifted connection `Γ̂ = Γ + (shift by α)`.
pub fn shift_connection(gamma: &ChristoffelField, alpha: &OneForm) -> Result<ChristoffelField> {
    if alpha.coords() != gamma.coords() {
        return Err(Error::InvalidArgument("1-form lives on another coordinate system".into()));
    }
    gamma.add_tensor(&shift_tensor(alpha))
}

/// `S = Γ − shift(Γ, α)` written directly in terms of `α`.
pub fn projective_difference(alpha: &OneForm) -> DifferenceTensor {
    let shift = shift_tensor(alpha);
    let comps = shift.components().iter().map(SuperExpr::neg).collect();
    Tensor21::new(alpha.coords(), comps).expect("same parities as the shift")
}

/// Recovers `α` with `S = Γ − shift(Γ, α)` and checks the reconstruction
/// at `samples`. Fails with [`Error::NotProjective`] when no such `α`
/// exists (within `tol`).
pub fn recover_oneform(s: &DifferenceTensor, samples: &[Vec<GrassmannNumber>], tol: f64) -> Result<OneForm> {
    let c = s.coords();
    let n = c.dim();
    let mut comps = Vec::with_capacity(n);
    for m in 0..n {
        let a = if c.eps(m) == 0 {
            // S^m_{mm} = −2 α_m
            s.get(m, m, m).scale(-0.5)
        } else {
            // S^i_{im} = −(−1)^{ε_i} σ(α_m) for i ≠ m; prefer an even i.
            let partner = (0..n).filter(|&i| i != m).min_by_key(|&i| c.eps(i));
            match partner {
                Some(i) => s.get(i, i, m).conjugate().scale(-koszul(u32::from(c.eps(i)))),
                // dimension 0|1: every α gives the same shifted connection
                None => SuperExpr::zero(),
            }
        };
        comps.push(a);
    }
    let alpha = OneForm::new(c, comps)?;
    let rebuilt = projective_difference(&alpha);
    let diff: Vec<SuperExpr> = s
        .components()
        .iter()
        .zip(rebuilt.components())
        .map(|(a, b)| a.sub(b))
        .collect();
    let residual = Tensor21::new(c, diff)?.max_norm(samples)?;
    if residual > tol {
        return Err(Error::NotProjective { residual });
    }
    Ok(alpha)
}

/// Deterministic sample points for recovery: bodies on a grid of
/// `{0.5, 1, 1.5}` per even coordinate (at most 27 points), each shifted by
/// a nilpotent `θ_aθ_b`, and odd slots filled with single generators plus a
/// triple product.
pub fn default_samples(coords: &CoordinateSystem, generators: usize) -> Vec<Vec<GrassmannNumber>> {
    let bodies = [0.5, 1.0, 1.5];
    let p = coords.even_dim();
    let axes = p.min(3) as u32;
    let count = 3usize.pow(axes).max(1);
    let pairs: Vec<(usize, usize)> = (1..=generators)
        .flat_map(|a| ((a + 1)..=generators).map(move |b| (a, b)))
        .collect();
    let gen = |k: usize| GrassmannNumber::generator(generators, k).expect("index in range");
    (0..count)
        .map(|idx| {
            (0..coords.dim())
                .map(|slot| {
                    if slot < p {
                        let body = if slot < 3 {
                            bodies[(idx / 3usize.pow(slot as u32)) % 3]
                        } else {
                            1.0
                        };
                        let mut v = GrassmannNumber::scalar(generators, body);
                        if !pairs.is_empty() {
                            let (a, b) = pairs[(idx + slot) % pairs.len()];
                            v += (&gen(a) * &gen(b)).scale(0.5);
                        }
                        v
                    } else if generators == 0 {
                        GrassmannNumber::zero(0)
                    } else {
                        let k = (idx + slot) % generators + 1;
                        let mut v = gen(k);
                        if generators >= 3 {
                            let t = (&(&gen(1) * &gen(2)) * &gen(3)).scale(0.25);
                            v += t;
                        }
                        v
                    }
                })
                .collect()
        })
        .collect()
}

/// Solution `(r(t), s(t))` of the reparametrization system for one
/// initial condition, on the integrator grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Reparametrization {
    pub times: Vec<f64>,
    pub r: Vec<GrassmannNumber>,
    pub s: Vec<GrassmannNumber>,
    pub step: f64,
}

impl Reparametrization {
    pub fn final_r(&self) -> &GrassmannNumber {
        self.r.last().expect("r(0) is always present")
    }
}

/// Right-hand side `(s, s² ι(Ψ₂(r)) β_{Ψ₁(r)})` with `β = −2α`.
struct ReparamSystem<'a, 'f> {
    flow: DenseFlow<'f>,
    coords: &'a CoordinateSystem,
    alpha: Tape,
}

impl ReparamSystem<'_, '_> {
    fn rhs(&mut self, state: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        let (r, s) = (&state[0], &state[1]);
        let n = self.coords.dim();
        let psi = self.flow.state_at_grassmann(r)?;
        let alpha = self.alpha.eval(&psi[..n])?;
        let contraction = OneForm::contract_values(self.coords, &psi[n..], &alpha).scale(-2.0);
        Ok(vec![s.clone(), &(s * s) * &contraction])
    }
}

/// Integrates `r' = s`, `s' = s² ι(Ψ₂(r)) β` with `r(0) = 0`, `s(0) = 1`,
/// where `Ψ` is the geodesic flow of `gamma` from `(x, v)`.
pub fn solve_reparametrization(
    gamma: &ChristoffelField,
    alpha: &OneForm,
    x: &[GrassmannNumber],
    v: &[GrassmannNumber],
    t_end: f64,
    opts: Integrator,
) -> Result<Reparametrization> {
    let field = GeodesicField::new(gamma)?;
    solve_with_field(&field, alpha, x, v, t_end, opts)
}

fn solve_with_field(
    field: &GeodesicField,
    alpha: &OneForm,
    x: &[GrassmannNumber],
    v: &[GrassmannNumber],
    t_end: f64,
    opts: Integrator,
) -> Result<Reparametrization> {
    let coords = field.christoffel().coords();
    if alpha.coords() != coords {
        return Err(Error::InvalidArgument("1-form lives on another coordinate system".into()));
    }
    check_slots(coords, x, 0, "base point")?;
    check_slots(coords, v, 0, "velocity")?;
    let generators = x.first().map_or(0, GrassmannNumber::generators);
    let mut system = ReparamSystem {
        flow: DenseFlow::new(field, x, v, opts)?,
        coords,
        alpha: Tape::compile(alpha.components()),
    };
    let y0 = vec![GrassmannNumber::zero(generators), GrassmannNumber::one(generators)];
    let traj = if alpha.is_zero() {
        // s ≡ 1, r = t exactly
        integrate(|y| Ok(vec![y[1].clone(), GrassmannNumber::zero(y[1].generators())]), y0, t_end, opts)?
    } else {
        integrate(|y| system.rhs(y), y0, t_end, opts)?
    };
    let (r, s) = traj.states.iter().map(|st| (st[0].clone(), st[1].clone())).unzip();
    Ok(Reparametrization {
        times: traj.times,
        r,
        s,
        step: opts.h,
    })
}

/// Residuals of one initial condition.
#[derive(Clone, Debug, PartialEq)]
pub struct InitResult {
    /// `max_t ‖Ψ₁(r(t)) − Ψ̂₁(t)‖`.
    pub coincidence: f64,
    /// `max_t ‖Ψ̂₂(t) − s(t) Ψ₂(r(t))‖`.
    pub velocity: f64,
    /// `max_t ‖r''·Ψ₂(r) − s²·S(Ψ₂(r), Ψ₂(r))‖`.
    pub equation: f64,
    pub final_r: GrassmannNumber,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Equivalent,
    NotEquivalent(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Equivalent => f.write_str("EQUIVALENT"),
            Verdict::NotEquivalent(reason) => write!(f, "NOT-EQUIVALENT {reason}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    pub alpha: Option<OneForm>,
    pub recovery_residual: Option<f64>,
    pub inits: Vec<Result<InitResult>>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.verdict == Verdict::Equivalent
    }

    /// True if some initial condition left the numeric domain.
    pub fn blew_up(&self) -> bool {
        self.inits.iter().any(|r| matches!(r, Err(Error::BlowUp { .. })))
    }

    pub fn max_residual(&self) -> f64 {
        self.inits
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|r| r.coincidence)
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "projective equivalence check")?;
        writeln!(f, "tolerance: {:e}", self.tolerance)?;
        match &self.alpha {
            Some(alpha) => {
                let c = alpha.coords();
                for (i, a) in alpha.components().iter().enumerate() {
                    writeln!(f, "alpha({}) [d{}] = {a}", i + 1, c.name(i))?;
                }
            }
            None => writeln!(f, "alpha: none")?,
        }
        if let Some(res) = self.recovery_residual {
            writeln!(f, "recovery residual: {res:e}")?;
        }
        for (k, init) in self.inits.iter().enumerate() {
            match init {
                Ok(r) => writeln!(
                    f,
                    "init {}: coincidence {:e}, velocity {:e}, equation {:e}, r(t_end) = {}",
                    k + 1,
                    r.coincidence,
                    r.velocity,
                    r.equation,
                    r.final_r
                )?,
                Err(e) => writeln!(f, "init {}: error: {e}", k + 1)?,
            }
        }
        writeln!(f, "{}", self.verdict)
    }
}

/// Runs the full pipeline: `S = Γ − Γ̂`, recover `α`, solve `r` per
/// initial condition and compare `Ψ₁(r(t))` with `Ψ̂₁(t)` on the grid.
#[allow(clippy::too_many_arguments)]
pub fn same_geodesics_check(
    gamma: &ChristoffelField,
    gamma_hat: &ChristoffelField,
    inits: &[(Vec<GrassmannNumber>, Vec<GrassmannNumber>)],
    t_end: f64,
    opts: Integrator,
    tolerance: f64,
    samples: &[Vec<GrassmannNumber>],
) -> Result<EquivalenceReport> {
    for (name, g) in [("first", gamma), ("second", gamma_hat)] {
        let (ok, residual) = g.is_torsion_free(samples, EXACT_TOL.max(1e-10))?;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "{name} connection is not torsion-free (residual {residual:e})"
            )));
        }
    }
    let s = gamma.difference_tensor(gamma_hat)?;
    let alpha = match recover_oneform(&s, samples, EXACT_TOL) {
        Ok(a) => a,
        Err(Error::NotProjective { residual }) => {
            return Ok(EquivalenceReport {
                alpha: None,
                recovery_residual: Some(residual),
                inits: Vec::new(),
                tolerance,
                verdict: Verdict::NotEquivalent(format!("not projectively flat difference (residual {residual:e})")),
            })
        }
        Err(e) => return Err(e),
    };
    let field = GeodesicField::new(gamma)?;
    let field_hat = GeodesicField::new(gamma_hat)?;
    let results: Vec<Result<InitResult>> = inits
        .iter()
        .map(|(x, v)| check_one(&field, &field_hat, &s, &alpha, x, v, t_end, opts))
        .collect();
    let mut verdict = Verdict::Equivalent;
    for (k, r) in results.iter().enumerate() {
        match r {
            Err(e) => {
                verdict = Verdict::NotEquivalent(format!("init {} failed: {e}", k + 1));
                break;
            }
            Ok(res) if !(res.coincidence <= tolerance) => {
                verdict = Verdict::NotEquivalent(format!(
                    "init {} geodesics differ (residual {:e})",
                    k + 1,
                    res.coincidence
                ));
                break;
            }
            _ => {}
        }
    }
    Ok(EquivalenceReport {
        alpha: Some(alpha),
        recovery_residual: None,
        inits: results,
        tolerance,
        verdict,
    })
}

#[allow(clippy::too_many_arguments)]
fn check_one(
    field: &GeodesicField,
    field_hat: &GeodesicField,
    s_tensor: &DifferenceTensor,
    alpha: &OneForm,
    x: &[GrassmannNumber],
    v: &[GrassmannNumber],
    t_end: f64,
    opts: Integrator,
) -> Result<InitResult> {
    let n = field.dim();
    let coords = field.christoffel().coords();
    let rep = solve_with_field(field, alpha, x, v, t_end, opts)?;
    let hat = field_hat.integrate(x, v, t_end, opts)?;
    let mut flow = DenseFlow::new(field, x, v, opts)?;
    let alpha_tape = Tape::compile(alpha.components());
    let s_tape = Tape::compile(s_tensor.components());
    let mut out = InitResult {
        coincidence: 0.0,
        velocity: 0.0,
        equation: 0.0,
        final_r: rep.final_r().clone(),
    };
    for (k, t) in rep.times.iter().enumerate() {
        debug_assert!((hat.times()[k] - t).abs() < 1e-12);
        let psi = flow.state_at_grassmann(&rep.r[k])?;
        let (x_r, v_r) = psi.split_at(n);
        for i in 0..n {
            out.coincidence = out.coincidence.max(x_r[i].distance(&hat.x(k)[i]));
            let scaled = &rep.s[k] * &v_r[i];
            out.velocity = out.velocity.max(scaled.distance(&hat.v(k)[i]));
        }
        let a = alpha_tape.eval(x_r)?;
        let contraction = OneForm::contract_values(coords, v_r, &a).scale(-2.0);
        let s2 = &rep.s[k] * &rep.s[k];
        let r2 = &s2 * &contraction;
        let s_vals = s_tape.eval(x_r)?;
        let svv = crate::connection::apply_values(coords, &s_vals, v_r, v_r);
        for i in 0..n {
            let lhs = &r2 * &v_r[i];
            let rhs = &s2 * &svv[i];
            out.equation = out.equation.max(lhs.distance(&rhs));
        }
    }
    Ok(out)
}

/// `ε(α_i) = ε_i` check for a candidate 1-form given by expressions.
pub fn is_even_oneform(coords: &CoordinateSystem, comps: &[SuperExpr]) -> bool {
    comps.len() == coords.dim()
        && comps
            .iter()
            .enumerate()
            .all(|(i, a)| a.fits_parity(coords.parity(i)) && a.parity() != Parity::Inhomogeneous)
}
