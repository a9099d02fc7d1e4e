//! Geodesic vector field on `TM⁽⁰⁾`, its RK4 flow, dilations, the exponential
//! map, and the odd geodesic field on `TM⁽¹⁾`.

use crate::connection::ChristoffelField;
use crate::error::{Error, Result};
use crate::geometry::check_slots;
use crate::grassmann::{monomial_name, GrassmannNumber, Parity};
use crate::superexpr::{DoubledSystem, SuperExpr, Tape};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_BLOWUP: f64 = 1e12;

/// Fixed-step RK4 settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integrator {
    pub h: f64,
    /// Largest coefficient magnitude tolerated before reporting blow-up.
    pub blowup: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            h: DEFAULT_STEP,
            blowup: DEFAULT_BLOWUP,
        }
    }
}

impl Integrator {
    pub fn with_step(h: f64) -> Self {
        Self { h, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {}", self.h)));
        }
        if !(self.blowup > 0.0) {
            return Err(Error::InvalidArgument("blow-up bound must be positive".into()));
        }
        Ok(())
    }
}

fn axpy(y: &[GrassmannNumber], a: f64, k: &[GrassmannNumber]) -> Vec<GrassmannNumber> {
    y.iter().zip(k).map(|(yi, ki)| yi + &ki.scale(a)).collect()
}

/// One classical RK4 step of the autonomous system `y' = f(y)`; `k1` is
/// `f(y)`, already known to the caller.
fn rk4_step<F>(f: &mut F, y: &[GrassmannNumber], k1: &[GrassmannNumber], h: f64) -> Result<Vec<GrassmannNumber>>
where
    F: FnMut(&[GrassmannNumber]) -> Result<Vec<GrassmannNumber>>,
{
    let k2 = f(&axpy(y, h / 2.0, k1))?;
    let k3 = f(&axpy(y, h / 2.0, &k2))?;
    let k4 = f(&axpy(y, h, &k3))?;
    Ok(y
        .iter()
        .enumerate()
        .map(|(i, yi)| {
            let incr = &(&(&k1[i] + &k2[i].scale(2.0)) + &k3[i].scale(2.0)) + &k4[i];
            yi + &incr.scale(h / 6.0)
        })
        .collect())
}

/// Evaluation failures inside the integrator mean the solution left the
/// region where the field is defined.
fn left_domain(e: Error, t: f64) -> Error {
    match e {
        Error::Domain(reason) => Error::BlowUp {
            last_valid_time: t,
            reason,
        },
        Error::NonInvertible | Error::SingularBody { .. } => Error::BlowUp {
            last_valid_time: t,
            reason: e.to_string(),
        },
        other => other,
    }
}

fn blown_up(state: &[GrassmannNumber], bound: f64) -> Option<String> {
    state.iter().enumerate().find_map(|(i, v)| {
        if !v.is_finite() {
            Some(format!("component {} is not finite", i + 1))
        } else if v.norm_max() > bound {
            Some(format!("component {} exceeds {bound:e}", i + 1))
        } else {
            None
        }
    })
}

/// Samples of an autonomous ODE solution, with the vector field at every
/// node (used for Hermite interpolation).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<GrassmannNumber>>,
    pub derivatives: Vec<Vec<GrassmannNumber>>,
}

impl Trajectory {
    pub fn start<F>(f: &mut F, y0: Vec<GrassmannNumber>) -> Result<Self>
    where
        F: FnMut(&[GrassmannNumber]) -> Result<Vec<GrassmannNumber>>,
    {
        let d0 = f(&y0)?;
        Ok(Self {
            times: vec![0.0],
            states: vec![y0],
            derivatives: vec![d0],
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory has an initial state")
    }

    pub fn last_state(&self) -> &[GrassmannNumber] {
        self.states.last().expect("trajectory has an initial state")
    }

    /// Continues to `t_end` with steps of size `h` (the last one shortened).
    /// Times are `t₀ ± k·h` exactly, so extensions stay on one grid.
    pub fn extend<F>(&mut self, f: &mut F, t_end: f64, opts: Integrator) -> Result<()>
    where
        F: FnMut(&[GrassmannNumber]) -> Result<Vec<GrassmannNumber>>,
    {
        opts.validate()?;
        let t0 = self.times[0];
        let start = self.last_time();
        let dir = if t_end >= start { 1.0 } else { -1.0 };
        let total = (t_end - start).abs();
        if total == 0.0 {
            return Ok(());
        }
        let base_steps = ((start - t0).abs() / opts.h).round() as i64;
        let mut k = 0i64;
        loop {
            let t = self.last_time();
            let remaining = (t_end - t).abs();
            if remaining <= opts.h * 1e-9 {
                break;
            }
            k += 1;
            let next = if remaining <= opts.h * (1.0 + 1e-9) {
                t_end
            } else {
                t0 + dir * (base_steps + k) as f64 * opts.h
            };
            let step = next - t;
            let y = self.last_state().to_vec();
            let d = self.derivatives.last().expect("non-empty").clone();
            let y_next = rk4_step(f, &y, &d, step).map_err(|e| left_domain(e, t))?;
            if let Some(reason) = blown_up(&y_next, opts.blowup) {
                return Err(Error::BlowUp {
                    last_valid_time: t,
                    reason,
                });
            }
            let d_next = f(&y_next).map_err(|e| left_domain(e, t))?;
            self.times.push(next);
            self.states.push(y_next);
            self.derivatives.push(d_next);
        }
        Ok(())
    }

    /// Cubic Hermite interpolation at `t` inside the sampled range.
    pub fn interpolate(&self, t: f64) -> Result<Vec<GrassmannNumber>> {
        let n = self.times.len();
        let (lo, hi) = {
            let a = self.times[0];
            let b = self.times[n - 1];
            (a.min(b), a.max(b))
        };
        let slack = 1e-12 * (1.0 + hi.abs().max(lo.abs()));
        if t < lo - slack || t > hi + slack {
            return Err(Error::InvalidArgument(format!("time {t} outside sampled range [{lo}, {hi}]")));
        }
        if n == 1 {
            return Ok(self.states[0].clone());
        }
        let increasing = self.times[n - 1] >= self.times[0];
        // index of the interval [times[i], times[i+1]] containing t
        let pos = if increasing {
            self.times.partition_point(|&s| s <= t)
        } else {
            self.times.partition_point(|&s| s >= t)
        };
        let i = pos.clamp(1, n - 1) - 1;
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (y0, y1) = (&self.states[i], &self.states[i + 1]);
        let (d0, d1) = (&self.derivatives[i], &self.derivatives[i + 1]);
        Ok((0..y0.len())
            .map(|c| {
                let a = &y0[c].scale(h00) + &d0[c].scale(h10 * h);
                let b = &y1[c].scale(h01) + &d1[c].scale(h11 * h);
                &a + &b
            })
            .collect())
    }
}

/// Integrates `y' = f(y)` from `y0` at time 0 to `t_end`.
pub fn integrate<F>(mut f: F, y0: Vec<GrassmannNumber>, t_end: f64, opts: Integrator) -> Result<Trajectory>
where
    F: FnMut(&[GrassmannNumber]) -> Result<Vec<GrassmannNumber>>,
{
    if !t_end.is_finite() {
        return Err(Error::InvalidArgument("t_end must be finite".into()));
    }
    let mut traj = Trajectory::start(&mut f, y0)?;
    traj.extend(&mut f, t_end, opts)?;
    Ok(traj)
}

/// `G = Σ_i v^i ∂_{x^i} − Σ_{ijk} v^k v^j Γ^i_{jk}(x) ∂_{v^i}`.
#[derive(Clone, Debug)]
pub struct GeodesicField {
    gamma: ChristoffelField,
    tangent: DoubledSystem,
}

impl GeodesicField {
    pub fn new(gamma: &ChristoffelField) -> Result<Self> {
        let tangent = gamma.coords().doubled("v_", 0)?;
        Ok(Self {
            gamma: gamma.clone(),
            tangent,
        })
    }

    pub fn christoffel(&self) -> &ChristoffelField {
        &self.gamma
    }

    pub fn tangent_system(&self) -> &DoubledSystem {
        &self.tangent
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    /// `(ẋ, v̇)` at the state `(x, v)`.
    pub fn eval(&self, x: &[GrassmannNumber], v: &[GrassmannNumber]) -> Result<(Vec<GrassmannNumber>, Vec<GrassmannNumber>)> {
        let c = self.gamma.coords();
        check_slots(c, x, 0, "base point")?;
        check_slots(c, v, 0, "velocity")?;
        let gamma = self.gamma.values_at(x)?;
        Ok((v.to_vec(), accel(c.dim(), &gamma, v)))
    }

    /// The field on the concatenated state `[x, v]`.
    pub fn eval_state(&self, state: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        let n = self.dim();
        let gamma = self.gamma.values_at(&state[..n])?;
        let mut out = state[n..].to_vec();
        out.extend(accel(n, &gamma, &state[n..]));
        Ok(out)
    }

    /// Components of `G` as expressions in the coordinates `(x, v)`.
    pub fn symbolic(&self) -> Vec<SuperExpr> {
        let n = self.dim();
        let mut out: Vec<SuperExpr> = (0..n).map(|i| self.tangent.fiber_var(i)).collect();
        for i in 0..n {
            let mut terms = Vec::new();
            for j in 0..n {
                for k in 0..n {
                    let g = self.gamma.get(i, j, k);
                    if g.is_zero() {
                        continue;
                    }
                    terms.push(self.tangent.fiber_var(k).mul(&self.tangent.fiber_var(j)).mul(g));
                }
            }
            out.push(SuperExpr::sum(terms).neg());
        }
        out
    }

    /// `G(f) = Σ_a G^a ∂_a f` for a function `f` of `(x, v)`.
    pub fn lie_derivative(&self, components: &[SuperExpr], f: &SuperExpr) -> Result<SuperExpr> {
        let mut terms = Vec::with_capacity(components.len());
        for (a, ga) in components.iter().enumerate() {
            if ga.is_zero() || !f.depends_on(a) {
                continue;
            }
            terms.push(ga.mul(&f.partial(a, self.tangent.parity(a))?));
        }
        Ok(SuperExpr::sum(terms))
    }

    /// Flow `Ψ(t, x, v)` sampled on a grid of step `opts.h`.
    pub fn integrate(&self, x: &[GrassmannNumber], v: &[GrassmannNumber], t_end: f64, opts: Integrator) -> Result<FlowTrajectory> {
        let c = self.gamma.coords();
        check_slots(c, x, 0, "base point")?;
        check_slots(c, v, 0, "velocity")?;
        let mut y0 = x.to_vec();
        y0.extend_from_slice(v);
        let trajectory = integrate(|s| self.eval_state(s), y0, t_end, opts)?;
        Ok(FlowTrajectory {
            n: c.dim(),
            step: opts.h,
            trajectory,
        })
    }

    /// `exp_x(v) = π(Ψ(1, x, v))`.
    pub fn exp_map(&self, x: &[GrassmannNumber], v: &[GrassmannNumber], opts: Integrator) -> Result<Vec<GrassmannNumber>> {
        match self.integrate(x, v, 1.0, opts) {
            Ok(traj) => Ok(traj.final_x().to_vec()),
            Err(Error::BlowUp { last_valid_time, reason }) => Err(Error::Domain(format!(
                "tangent vector outside the domain of exp (flow left W_G at t = {last_valid_time}: {reason})"
            ))),
            Err(e) => Err(e),
        }
    }
}

fn accel(n: usize, gamma: &[GrassmannNumber], v: &[GrassmannNumber]) -> Vec<GrassmannNumber> {
    let generators = v.first().map_or(0, GrassmannNumber::generators);
    let mut out = vec![GrassmannNumber::zero(generators); n];
    for k in 0..n {
        if v[k].is_zero() {
            continue;
        }
        for j in 0..n {
            if v[j].is_zero() {
                continue;
            }
            let vkvj = &v[k] * &v[j];
            if vkvj.is_zero() {
                continue;
            }
            for (i, out_i) in out.iter_mut().enumerate() {
                let g = &gamma[(i * n + j) * n + k];
                if !g.is_zero() {
                    *out_i -= &vkvj * g;
                }
            }
        }
    }
    out
}

/// `D_λ(x, v) = (x, λv)` for even `λ`.
pub fn dilate(v: &[GrassmannNumber], lambda: &GrassmannNumber) -> Result<Vec<GrassmannNumber>> {
    if !lambda.has_parity(Parity::Even) {
        return Err(Error::NotEven(lambda.parity()));
    }
    v.iter().map(|vi| lambda.checked_mul(vi)).collect()
}

/// A sampled geodesic `(x(t), v(t))`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrajectory {
    n: usize,
    step: f64,
    trajectory: Trajectory,
}

impl FlowTrajectory {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn integrator(&self) -> &'static str {
        "rk4"
    }

    pub fn times(&self) -> &[f64] {
        &self.trajectory.times
    }

    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }

    pub fn x(&self, idx: usize) -> &[GrassmannNumber] {
        &self.trajectory.states[idx][..self.n]
    }

    pub fn v(&self, idx: usize) -> &[GrassmannNumber] {
        &self.trajectory.states[idx][self.n..]
    }

    pub fn final_x(&self) -> &[GrassmannNumber] {
        self.x(self.len() - 1)
    }

    pub fn final_v(&self) -> &[GrassmannNumber] {
        self.v(self.len() - 1)
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    /// State `[x, v]` at a real time inside the sampled range.
    pub fn state_at(&self, t: f64) -> Result<Vec<GrassmannNumber>> {
        self.trajectory.interpolate(t)
    }

    /// CSV with a `t` column and one column per coefficient of every
    /// coordinate and velocity component. Only monomials of the parity of
    /// the slot are listed (the others are identically zero).
    pub fn to_csv(&self, field: &GeodesicField, extra: &[(String, Vec<f64>)]) -> String {
        let tangent = field.tangent_system();
        let generators = self.trajectory.states[0].first().map_or(0, GrassmannNumber::generators);
        let columns: Vec<(usize, Vec<u32>)> = (0..2 * self.n)
            .map(|a| {
                let bit = tangent.parity(a).bit().unwrap_or(0);
                let masks = (0u32..(1u32 << generators))
                    .filter(|m| m.count_ones() % 2 == u32::from(bit))
                    .collect();
                (a, masks)
            })
            .collect();
        let name = |a: usize| -> String {
            if a < self.n {
                tangent.base().name(a).to_string()
            } else {
                format!("v_{}", tangent.base().name(a - self.n))
            }
        };
        let mut out = String::from("t");
        for (a, masks) in &columns {
            for &m in masks {
                out.push_str(&format!(",{}[{}]", name(*a), subset_label(m, generators)));
            }
        }
        for (label, _) in extra {
            out.push(',');
            out.push_str(label);
        }
        out.push('\n');
        for (row, t) in self.trajectory.times.iter().enumerate() {
            out.push_str(&format!("{t}"));
            for (a, masks) in &columns {
                let value = &self.trajectory.states[row][*a];
                for &m in masks {
                    out.push_str(&format!(",{}", value.coefficient(m)));
                }
            }
            for (_, values) in extra {
                out.push_str(&format!(",{}", values[row]));
            }
            out.push('\n');
        }
        out
    }
}

/// Column label of a monomial: `body`, `12` for `θ₁θ₂`, or dot-separated
/// indices when some generator index exceeds 9.
pub fn subset_label(mask: u32, generators: usize) -> String {
    if mask == 0 {
        return "body".into();
    }
    let indices: Vec<String> = (0..32).filter(|b| mask & (1 << b) != 0).map(|b| (b + 1).to_string()).collect();
    if generators >= 10 {
        indices.join(".")
    } else {
        indices.concat()
    }
}

/// Geodesic flow from one initial condition, evaluated lazily on a growing
/// grid in both time directions; also at Grassmann-valued times.
#[derive(Debug)]
pub struct DenseFlow<'a> {
    field: &'a GeodesicField,
    opts: Integrator,
    forward: Trajectory,
    backward: Trajectory,
    /// `G^k z^a` for `k = 1..=order`, all coordinates `a` of `(x, v)`.
    taylor: Option<(usize, Tape)>,
}

impl<'a> DenseFlow<'a> {
    pub fn new(field: &'a GeodesicField, x: &[GrassmannNumber], v: &[GrassmannNumber], opts: Integrator) -> Result<Self> {
        opts.validate()?;
        let c = field.christoffel().coords();
        check_slots(c, x, 0, "base point")?;
        check_slots(c, v, 0, "velocity")?;
        let mut y0 = x.to_vec();
        y0.extend_from_slice(v);
        let mut f = |s: &[GrassmannNumber]| field.eval_state(s);
        let forward = Trajectory::start(&mut f, y0)?;
        let backward = forward.clone();
        Ok(Self {
            field,
            opts,
            forward,
            backward,
            taylor: None,
        })
    }

    fn ensure(&mut self, t: f64) -> Result<()> {
        let h = self.opts.h;
        let field = self.field;
        let mut f = |s: &[GrassmannNumber]| field.eval_state(s);
        if t > self.forward.last_time() {
            let target = ((t / h).ceil() + 2.0) * h;
            let target = target.max(self.forward.last_time() * 1.5);
            let target = (target / h).ceil() * h;
            self.forward.extend(&mut f, target, self.opts)?;
        } else if t < self.backward.last_time() {
            let target = ((t / h).floor() - 2.0) * h;
            let target = target.min(self.backward.last_time() * 1.5);
            let target = (target / h).floor() * h;
            self.backward.extend(&mut f, target, self.opts)?;
        }
        Ok(())
    }

    /// `Ψ(t)` as `[x, v]` at a real time.
    pub fn state_at(&mut self, t: f64) -> Result<Vec<GrassmannNumber>> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("non-finite time {t}")));
        }
        self.ensure(t)?;
        if t >= 0.0 {
            self.forward.interpolate(t)
        } else {
            self.backward.interpolate(t)
        }
    }

    /// `Ψ(b + n)` for an even time with body `b` and nilpotent part `n`:
    /// `Σ_k nᵏ/k! (Gᵏz)(Ψ(b))`, exact in the Grassmann truncation.
    pub fn state_at_grassmann(&mut self, t: &GrassmannNumber) -> Result<Vec<GrassmannNumber>> {
        if !t.has_parity(Parity::Even) {
            return Err(Error::NotEven(t.parity()));
        }
        let base = self.state_at(t.body())?;
        let nil = t.soul();
        if nil.is_zero() {
            return Ok(base);
        }
        let order = t.generators() / 2;
        if self.taylor.as_ref().map_or(true, |(o, _)| *o < order) {
            self.taylor = Some((order, lie_series(self.field, order)?));
        }
        let (_, tape) = self.taylor.as_ref().expect("just built");
        let dim = base.len();
        let derivs = tape.eval(&base)?;
        let mut out = base;
        let mut power = GrassmannNumber::one(t.generators());
        let mut fact = 1.0;
        for k in 1..=order {
            power = &power * &nil;
            if power.is_zero() {
                break;
            }
            fact *= k as f64;
            let coef = power.scale(1.0 / fact);
            for a in 0..dim {
                out[a] += &coef * &derivs[(k - 1) * dim + a];
            }
        }
        Ok(out)
    }
}

fn lie_series(field: &GeodesicField, order: usize) -> Result<Tape> {
    let comps = field.symbolic();
    let tangent = field.tangent_system();
    let n = field.dim();
    let mut current: Vec<SuperExpr> = (0..n)
        .map(|i| tangent.base_var(i))
        .chain((0..n).map(|i| tangent.fiber_var(i)))
        .collect();
    let mut all = Vec::with_capacity(order * 2 * n);
    for _ in 0..order {
        current = current
            .iter()
            .map(|f| field.lie_derivative(&comps, f))
            .collect::<Result<Vec<_>>>()?;
        all.extend(current.iter().cloned());
    }
    Ok(Tape::compile(&all))
}

/// `∂_{x^i}` coefficients of the auto-commutator `[G′, G′]` of the odd
/// geodesic field: `−2 Σ_{jk} (−1)^{ε_k} v̄^k v̄^j Γ^i_{jk}(x)`.
pub fn odd_autocommutator_obstruction(
    gamma: &ChristoffelField,
    x: &[GrassmannNumber],
    vbar: &[GrassmannNumber],
) -> Result<Vec<GrassmannNumber>> {
    let c = gamma.coords();
    let n = c.dim();
    check_slots(c, x, 0, "base point")?;
    check_slots(c, vbar, 1, "odd tangent vector")?;
    let values = gamma.values_at(x)?;
    let generators = x.first().map_or(0, GrassmannNumber::generators);
    let mut out = vec![GrassmannNumber::zero(generators); n];
    for k in 0..n {
        let sign = if c.eps(k) == 1 { 2.0 } else { -2.0 };
        for j in 0..n {
            let vv = &vbar[k] * &vbar[j];
            if vv.is_zero() {
                continue;
            }
            for (i, out_i) in out.iter_mut().enumerate() {
                let g = &values[(i * n + j) * n + k];
                if !g.is_zero() {
                    *out_i += (&vv * g).scale(sign);
                }
            }
        }
    }
    Ok(out)
}

/// `Φ′(τ, x, v̄) = (x + τ v̄, v̄)`, defined when `Γ` is torsion-free at `x`.
pub fn odd_geodesic_flow(
    gamma: &ChristoffelField,
    x: &[GrassmannNumber],
    vbar: &[GrassmannNumber],
    tau: &GrassmannNumber,
    tol: f64,
) -> Result<(Vec<GrassmannNumber>, Vec<GrassmannNumber>)> {
    if !tau.has_parity(Parity::Odd) {
        return Err(Error::ParityViolation(format!("odd time parameter is {}", tau.parity())));
    }
    let obstruction = odd_autocommutator_obstruction(gamma, x, vbar)?;
    let (_, torsion) = gamma.is_torsion_free(&[x.to_vec()], tol)?;
    let obstruction_norm = obstruction.iter().map(GrassmannNumber::norm_max).fold(0.0, f64::max);
    if torsion > tol || obstruction_norm > tol {
        return Err(Error::NotTorsionFree {
            max_residual: torsion.max(obstruction_norm),
            obstruction: obstruction.iter().map(GrassmannNumber::norm_max).collect(),
        });
    }
    let moved = x
        .iter()
        .zip(vbar)
        .map(|(xi, vi)| xi.checked_add(&tau.checked_mul(vi)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((moved, vbar.to_vec()))
}

/// Human-readable monomial name used in reports (`θ₁θ₂` as `t1^t2`).
pub fn monomial_label(mask: u32) -> String {
    monomial_name(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Sampler;
    use crate::superexpr::CoordinateSystem;

    fn log_model() -> GeodesicField {
        let c = CoordinateSystem::new(&["x1"], &[] as &[&str]).unwrap();
        GeodesicField::new(&ChristoffelField::parse(&c, [((0, 0, 0), "1")]).unwrap()).unwrap()
    }

    fn s(g: usize, v: f64) -> GrassmannNumber {
        GrassmannNumber::scalar(g, v)
    }

    #[test]
    fn field_examples() {
        let f = log_model();
        let (dx, dv) = f.eval(&[s(0, 0.0)], &[s(0, 3.0)]).unwrap();
        assert_eq!(dx[0], s(0, 3.0));
        assert_eq!(dv[0], s(0, -9.0));
        let c = CoordinateSystem::new(&["x1"], &["xi1", "xi2"]).unwrap();
        let gamma = ChristoffelField::parse(&c, [((0, 0, 0), "xi1*xi2")]).unwrap();
        let f = GeodesicField::new(&gamma).unwrap();
        let g = 4;
        let t = |k| GrassmannNumber::generator(g, k).unwrap();
        let x = vec![s(g, 0.3), t(1), t(2)];
        let v1 = &s(g, 2.0) + &(&t(3) * &t(4));
        let v = vec![v1.clone(), t(3), GrassmannNumber::zero(g)];
        let (_, dv) = f.eval(&x, &v).unwrap();
        let oracle = -&(&(&v1 * &v1) * &(&t(1) * &t(2)));
        assert_eq!(dv[0], oracle);
    }

    #[test]
    fn flat_flow_is_a_straight_line() {
        let c = CoordinateSystem::new(&["x1"], &["xi1"]).unwrap();
        let f = GeodesicField::new(&ChristoffelField::zero(&c)).unwrap();
        let g = 3;
        let t = |k| GrassmannNumber::generator(g, k).unwrap();
        let v1 = &s(g, 1.0) + &(&t(1) * &t(2));
        let traj = f.integrate(&[s(g, 0.5), t(1)], &[v1.clone(), t(3)], 1.0, Integrator::default()).unwrap();
        let expected = &s(g, 1.5) + &(&t(1) * &t(2));
        assert!(traj.final_x()[0].distance(&expected) < 1e-12);
        assert!(traj.final_x()[1].distance(&(&t(1) + &t(3))) < 1e-12);
        assert_eq!(traj.x(0), &[s(g, 0.5), t(1)]);
    }

    #[test]
    fn log_model_matches_closed_form() {
        let f = log_model();
        let traj = f.integrate(&[s(0, 0.0)], &[s(0, 1.0)], 1.0, Integrator::default()).unwrap();
        assert!((traj.final_x()[0].body() - 2f64.ln()).abs() < 1e-8);
        assert_eq!(traj.times().len(), 1001);
        let back = f.integrate(&[s(0, 0.0)], &[s(0, 1.0)], -0.5, Integrator::default()).unwrap();
        assert!((back.final_x()[0].body() - 0.5f64.ln()).abs() < 1e-8);
        let e = f.exp_map(&[s(0, 0.0)], &[s(0, 1.0)], Integrator::default()).unwrap();
        assert!((e[0].body() - 2f64.ln()).abs() < 1e-8);
        assert_eq!(f.exp_map(&[s(0, 0.25)], &[s(0, 0.0)], Integrator::default()).unwrap(), vec![s(0, 0.25)]);
    }

    #[test]
    fn blow_up_reports_last_valid_time() {
        let f = log_model();
        // x = ln(1 − t) for v = −1: the velocity −1/(1 − t) explodes at t = 1.
        let err = f
            .integrate(&[s(0, 0.0)], &[s(0, -1.0)], 2.0, Integrator { h: 1e-2, blowup: 1e3 })
            .unwrap_err();
        match err {
            Error::BlowUp { last_valid_time, .. } => assert!(last_valid_time > 0.9 && last_valid_time < 1.05, "{last_valid_time}"),
            other => panic!("unexpected {other}"),
        }
        let opts = Integrator { h: 1e-2, blowup: 1e3 };
        assert!(matches!(f.exp_map(&[s(0, 0.0)], &[s(0, -2.0)], opts), Err(Error::Domain(_))));
    }

    #[test]
    fn short_last_step_lands_on_t_end() {
        let f = log_model();
        let traj = f.integrate(&[s(0, 0.0)], &[s(0, 1.0)], 0.1005, Integrator::with_step(0.01)).unwrap();
        assert_eq!(*traj.times().last().unwrap(), 0.1005);
        assert!((traj.final_x()[0].body() - 1.1005f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn dense_flow_interpolates_and_extends() {
        let f = log_model();
        let mut d = DenseFlow::new(&f, &[s(0, 0.0)], &[s(0, 1.0)], Integrator::default()).unwrap();
        for &t in &[0.3337, 1.7, -0.41, 0.0] {
            let st = d.state_at(t).unwrap();
            assert!((st[0].body() - (1.0 + t).ln()).abs() < 1e-9, "t = {t}");
            assert!((st[1].body() - 1.0 / (1.0 + t)).abs() < 1e-9);
        }
    }

    #[test]
    fn nilpotent_time_uses_taylor_series() {
        // x(t) = ln(1 + t): x(t0 + n) = ln(1+t0) + n/(1+t0) (n² = 0 for L = 2).
        let f = log_model();
        let g = 2;
        let mut d = DenseFlow::new(&f, &[s(g, 0.0)], &[s(g, 1.0)], Integrator::default()).unwrap();
        let t = GrassmannNumber::parse("0.5 + 0.25*t1^t2", g).unwrap();
        let st = d.state_at_grassmann(&t).unwrap();
        let expected = GrassmannNumber::from_terms(g, [(0, 1.5f64.ln()), (0b11, 0.25 / 1.5)]).unwrap();
        assert!(st[0].distance(&expected) < 1e-9);
    }

    #[test]
    fn odd_flow_and_obstruction() {
        let c = CoordinateSystem::new(&["x1", "x2"], &["xi1", "xi2"]).unwrap();
        let g = 4;
        let mut smp = Sampler::new(11, g);
        let x = smp.point(&c);
        let vbar = smp.components(&c, 1);
        let tau = smp.odd();
        let flat = ChristoffelField::zero(&c);
        let (y, w) = odd_geodesic_flow(&flat, &x, &vbar, &tau, 1e-12).unwrap();
        assert_eq!(w, vbar);
        for i in 0..4 {
            assert!(y[i].distance(&(&x[i] + &(&tau * &vbar[i]))) < 1e-15);
        }
        let (y0, _) = odd_geodesic_flow(&flat, &x, &vbar, &GrassmannNumber::zero(g), 1e-12).unwrap();
        assert_eq!(y0, x);
        let twisted = ChristoffelField::parse(&c, [((0, 0, 1), "1")]).unwrap();
        assert!(matches!(
            odd_geodesic_flow(&twisted, &x, &vbar, &tau, 1e-12),
            Err(Error::NotTorsionFree { .. })
        ));
        let obs = odd_autocommutator_obstruction(&twisted, &x, &vbar).unwrap();
        assert!(obs[0].norm_max() > 1e-3);
    }

    #[test]
    fn csv_lists_parity_compatible_coefficients() {
        let c = CoordinateSystem::new(&["x1"], &["xi1"]).unwrap();
        let f = GeodesicField::new(&ChristoffelField::zero(&c)).unwrap();
        let g = 2;
        let t = |k| GrassmannNumber::generator(g, k).unwrap();
        let traj = f.integrate(&[s(g, 0.0), t(1)], &[s(g, 1.0), t(2)], 0.002, Integrator::default()).unwrap();
        let csv = traj.to_csv(&f, &[]);
        let header = csv.lines().next().unwrap();
        assert_eq!(
            header,
            "t,x1[body],x1[12],xi1[1],xi1[2],v_x1[body],v_x1[12],v_xi1[1],v_xi1[2]"
        );
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(subset_label(0b1000000001, 10), "1.10");
    }
}
