//! Time evolution of `u_tt − u_xx + u = F(u, ∂_t u, ∂_x u)` in the half
//! Klein-Gordon form `(∂_t − iΛ)U = N(U)` with `U = (∂_t + iΛ)u`.
//!
//! The state is kept in Fourier space, truncated to `|m| ≤ n/3`, and
//! advanced with the fourth-order exponential Runge-Kutta scheme of Cox and
//! Matthews, which integrates `iΛ` exactly. Products are evaluated in
//! physical space on a grid twice as fine.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::{self, project_freq};
use crate::error::{Error, Result};
use crate::norms::{sobolev_norm, winf_norm, znorm};
use crate::pseudoproduct::SymbolTables;
use crate::spectral::{backward, forward, lambda, make_grid, Field, Grid, Sign, Spectrum};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityTag {
    USquared,
    DtuSqDxu,
    Custom(String),
}

type Pointwise = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// `F(u, ∂_t u, ∂_x u)`, real valued, together with its symbol tables.
#[derive(Clone)]
pub struct NonlinearitySpec {
    tag: NonlinearityTag,
    eval: Pointwise,
    tables: Arc<SymbolTables>,
}

impl std::fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearitySpec").field("tag", &self.tag).finish()
    }
}

impl NonlinearitySpec {
    pub fn u_squared() -> Self {
        NonlinearitySpec {
            tag: NonlinearityTag::USquared,
            eval: Arc::new(|u, _, _| u * u),
            tables: Arc::new(SymbolTables::u_squared()),
        }
    }

    pub fn dtu_sq_dxu() -> Self {
        NonlinearitySpec {
            tag: NonlinearityTag::DtuSqDxu,
            eval: Arc::new(|_, ut, ux| ut * ut * ux),
            tables: Arc::new(SymbolTables::dtu_sq_dxu()),
        }
    }

    /// `F ≡ 0`.
    pub fn zero() -> Self {
        Self::custom("zero", |_, _, _| 0.0, SymbolTables::empty()).unwrap()
    }

    /// A user nonlinearity; rejected unless it vanishes to second order at 0.
    pub fn custom(
        name: &str,
        f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        tables: SymbolTables,
    ) -> Result<Self> {
        let spec = NonlinearitySpec { tag: NonlinearityTag::Custom(name.into()), eval: Arc::new(f), tables: Arc::new(tables) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "u_squared" => Ok(Self::u_squared()),
            "dtu_sq_dxu" => Ok(Self::dtu_sq_dxu()),
            "zero" => Ok(Self::zero()),
            other => Err(Error::param("F", format!("unknown nonlinearity `{other}`"))),
        }
    }

    pub fn tag(&self) -> &NonlinearityTag {
        &self.tag
    }

    pub fn name(&self) -> String {
        match &self.tag {
            NonlinearityTag::USquared => "u_squared".into(),
            NonlinearityTag::DtuSqDxu => "dtu_sq_dxu".into(),
            NonlinearityTag::Custom(n) => n.clone(),
        }
    }

    pub fn tables(&self) -> &Arc<SymbolTables> {
        &self.tables
    }

    pub fn eval(&self, u: f64, ut: f64, ux: f64) -> f64 {
        (self.eval)(u, ut, ux)
    }

    /// `F(0) = 0` and `∇F(0) = 0`, checked by one-sided differences.
    pub fn validate(&self) -> Result<()> {
        let h = 1e-6;
        if self.eval(0.0, 0.0, 0.0) != 0.0 {
            return Err(Error::param("F", "F(0, 0, 0) must vanish"));
        }
        for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
            for s in [h, -h] {
                let d = self.eval(s * e[0], s * e[1], s * e[2]) / h;
                if !(d.abs() <= 1e-3) {
                    return Err(Error::param("F", "F must vanish to second order at 0"));
                }
            }
        }
        Ok(())
    }
}

/// `U = u₁ + iΛu₀`.
pub fn half_kg(u0: &Field, u1: &Field) -> Result<Field> {
    u1.add(&u0.lambda_pow(1.0).scale(Complex64::new(0.0, 1.0)))
}

/// `(u, ∂_t u)` from `U`: `u = Λ⁻¹(U − Ū)/(2i)`, `∂_t u = (U + Ū)/2`.
pub fn reconstruct(big_u: &Field) -> (Field, Field) {
    let grid = big_u.grid();
    let v = big_u.spectrum();
    let n = grid.n();
    let mut u = vec![ZERO; n];
    let mut ut = vec![ZERO; n];
    for i in 0..n {
        let bar = v.coeffs()[(n - i) % n].conj();
        u[i] = (v.coeffs()[i] - bar) / Complex64::new(0.0, 2.0 * lambda(grid.wavenumbers()[i]));
        ut[i] = (v.coeffs()[i] + bar) / 2.0;
    }
    let to = |c| Spectrum::from_coeffs(grid.clone(), c).unwrap().to_field();
    (to(u), to(ut))
}

/// Seed data `u₀ = ε e^{−x²}`, `u₁ = ε ∂_x e^{−x²}`, for which
/// `σ = ∫ ũ₀' ũ₁ dx = √(π/2) > 0`.
pub fn seed_data(grid: &Arc<Grid>, eps: f64) -> (Field, Field) {
    let u0 = Field::from_real_fn(grid, |x| eps * (-x * x).exp());
    let u1 = Field::from_real_fn(grid, |x| eps * (-2.0 * x) * (-x * x).exp());
    (u0, u1)
}

/// `∫ u₀' u₁ dx` on the grid.
pub fn sigma(u0: &Field, u1: &Field) -> Result<f64> {
    u0.check_grid(u1)?;
    let d = u0.derivative(1);
    Ok(d.grid().dx() * d.values().iter().zip(u1.values()).map(|(a, b)| (a * b).re).sum::<f64>())
}

/// Keeps `|m| ≤ n/3`.
fn in_band(m: i64, n: usize) -> bool {
    3 * m.unsigned_abs() as usize <= n
}

/// Spectral workspace for evaluating `N(U)` on the padded grid.
struct Nonlinear {
    grid: Arc<Grid>,
    padded: Arc<Grid>,
    f: NonlinearitySpec,
}

impl Nonlinear {
    fn new(grid: &Arc<Grid>, f: &NonlinearitySpec) -> Result<Self> {
        Ok(Nonlinear { grid: grid.clone(), padded: make_grid(2 * grid.n(), grid.box_length())?, f: f.clone() })
    }

    fn pad(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.padded.n()];
        for (i, v) in c.iter().enumerate() {
            out[self.padded.mode_index(self.grid.signed_mode(i))] = *v;
        }
        out
    }

    /// `(u, ∂_t u, ∂_x u)` on the padded grid.
    fn physical(&self, v: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let n = self.grid.n();
        let xi = self.grid.wavenumbers();
        let mut u = vec![ZERO; n];
        let mut ut = vec![ZERO; n];
        let mut ux = vec![ZERO; n];
        for i in 0..n {
            let bar = v[(n - i) % n].conj();
            u[i] = (v[i] - bar) / Complex64::new(0.0, 2.0 * lambda(xi[i]));
            ut[i] = (v[i] + bar) / 2.0;
            ux[i] = Complex64::new(0.0, xi[i]) * u[i];
        }
        let l = self.padded.box_length();
        (backward(&self.pad(&u), l), backward(&self.pad(&ut), l), backward(&self.pad(&ux), l))
    }

    /// `max_x (|∂_u F| + |∂_{u_t} F| + |∂_{u_x} F|)`, a bound for the
    /// Lipschitz constant of `U ↦ N(U)` since `U ↦ (u, ∂_t u, ∂_x u)` has norm ≤ 1.
    fn rate(&self, v: &[Complex64]) -> f64 {
        let (pu, put, pux) = self.physical(v);
        let mut rate: f64 = 0.0;
        for j in 0..pu.len() {
            let p = [pu[j].re, put[j].re, pux[j].re];
            let mut r = 0.0;
            for d in 0..3 {
                let h = 1e-6 * (1.0 + p[d].abs());
                let (mut a, mut b) = (p, p);
                a[d] += h;
                b[d] -= h;
                r += ((self.f.eval(a[0], a[1], a[2]) - self.f.eval(b[0], b[1], b[2])) / (2.0 * h)).abs();
            }
            rate = rate.max(r);
        }
        rate
    }

    /// Band-limited `N̂(U)` and the fraction of its energy outside the band.
    fn eval(&self, v: &[Complex64]) -> (Vec<Complex64>, f64) {
        let n = self.grid.n();
        let (pu, put, pux) = self.physical(v);
        let vals: Vec<Complex64> = (0..self.padded.n())
            .map(|j| Complex64::new(self.f.eval(pu[j].re, put[j].re, pux[j].re), 0.0))
            .collect();
        let big = forward(&vals, self.padded.dx());
        let mut out = vec![ZERO; n];
        let (mut inside, mut outside) = (0.0, 0.0);
        for (j, c) in big.iter().enumerate() {
            let m = self.padded.signed_mode(j);
            if in_band(m, n) {
                out[self.grid.mode_index(m)] = *c;
                inside += c.norm_sqr();
            } else {
                outside += c.norm_sqr();
            }
        }
        let total = inside + outside;
        (out, if total > 0.0 { outside / total } else { 0.0 })
    }
}

/// `iΛU + N(U)`, the time derivative of `U`.
pub fn rhs(big_u: &Field, _t: f64, f: &NonlinearitySpec) -> Result<Field> {
    let grid = big_u.grid();
    let v = big_u.spectrum();
    let (nl, _) = Nonlinear::new(grid, f)?.eval(v.coeffs());
    let coeffs = v
        .coeffs()
        .iter()
        .zip(nl)
        .zip(grid.wavenumbers())
        .map(|((c, w), &k)| Complex64::new(0.0, lambda(k)) * c + w)
        .collect();
    Ok(Spectrum::from_coeffs(grid.clone(), coeffs)?.to_field())
}

/// `N(U)` alone, band-limited as in the integrator.
pub fn nonlinear_term(big_u: &Field, f: &NonlinearitySpec) -> Result<Field> {
    let (nl, _) = Nonlinear::new(big_u.grid(), f)?.eval(big_u.spectrum().coeffs());
    Ok(Spectrum::from_coeffs(big_u.grid().clone(), nl)?.to_field())
}

/// `‖(Λu, ∂_t u)‖_∞ = max(‖Im U‖_∞, ‖Re U‖_∞)` for `U` built from real data.
pub fn sup_lambda_u_ut(big_u: &Field) -> f64 {
    big_u.values().iter().fold(0.0, |m, c| m.max(c.re.abs()).max(c.im.abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Completed,
    BlowUp { t_star: f64, threshold: f64 },
    AliasingAbort { t: f64, fraction: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotNorms {
    pub t: f64,
    #[serde(rename = "hN")]
    pub h_n: f64,
    pub w1inf: f64,
    /// `‖V(t)‖_{Z_α}`; NaN when not tracked.
    pub z_alpha: f64,
    pub sup_lambda_u_ut: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub t_end: f64,
    pub dt: f64,
    pub blowup_threshold: f64,
    /// Store every `save_every`-th step.
    pub save_every: usize,
    /// Sobolev order `N` of the tracked `H^N` norm.
    pub sobolev_order: f64,
    /// `α` of the tracked `Z_α` norm of the profile, if any.
    pub alpha: Option<f64>,
    pub aliasing_tol: f64,
    /// Allow halving a step up to this many times when
    /// `dt·max|∂F| > step_bound`; 0 keeps the step fixed.
    pub max_refine: u32,
    pub step_bound: f64,
}

/// Largest truncated energy fraction of `N(U)` tolerated per step.
pub const ALIASING_TOL: f64 = 1e-6;

impl IntegrateOptions {
    pub fn new(t_end: f64, dt: f64, blowup_threshold: f64) -> Self {
        IntegrateOptions {
            t_end,
            dt,
            blowup_threshold,
            save_every: 1,
            sobolev_order: 8.0,
            alpha: None,
            aliasing_tol: ALIASING_TOL,
            max_refine: 0,
            step_bound: 0.5,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", "must be positive"));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::param("horizon", "must be non-negative"));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::param("blowup_threshold", "must be positive"));
        }
        if self.max_refine > 20 || !(self.step_bound > 0.0) {
            return Err(Error::param("max_refine", "refinement needs max_refine <= 20 and a positive step bound"));
        }
        if self.save_every == 0 {
            return Err(Error::param("save_every", "must be at least 1"));
        }
        if let Some(a) = self.alpha {
            crate::norms::check_alpha(a)?;
        }
        Ok(())
    }
}

/// Default blow-up threshold `10·max(1, ‖(Λu, ∂_t u)(0)‖_∞ / ε)`.
pub fn default_threshold(big_u0: &Field, eps: f64) -> f64 {
    let r = if eps > 0.0 { sup_lambda_u_ut(big_u0) / eps } else { 0.0 };
    10.0 * r.max(1.0)
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: Arc<Grid>,
    options: IntegrateOptions,
    nonlinearity: String,
    dt: f64,
    times: Vec<f64>,
    snapshots: Vec<Field>,
    norms: Vec<SnapshotNorms>,
    status: Status,
    max_aliasing: f64,
}

impl Trajectory {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn options(&self) -> &IntegrateOptions {
        &self.options
    }

    /// Step size actually used (`t_end` divided into whole steps).
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn norms(&self) -> &[SnapshotNorms] {
        &self.norms
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn nonlinearity(&self) -> &str {
        &self.nonlinearity
    }

    /// Largest truncated energy fraction of `N(U)` met along the run.
    pub fn max_aliasing(&self) -> f64 {
        self.max_aliasing
    }

    pub fn last(&self) -> &Field {
        self.snapshots.last().unwrap()
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol).ok_or(Error::OffLattice(t))
    }

    pub fn at(&self, t: f64) -> Result<&Field> {
        Ok(&self.snapshots[self.index_of(t)?])
    }
}

/// φ-functions of the Cox-Matthews scheme at `z = iΛ dt`, with a contour
/// mean for small `|z|` where the closed forms cancel.
fn etd_coefficients(z: Complex64) -> [Complex64; 4] {
    let direct = |z: Complex64| {
        let e = z.exp();
        let e2 = (z / 2.0).exp();
        let z3 = z * z * z;
        [
            (e2 - 1.0) / z,
            (-4.0 - z + e * (4.0 - 3.0 * z + z * z)) / z3,
            (2.0 + z + e * (z - 2.0)) / z3,
            (-4.0 - 3.0 * z - z * z + e * (4.0 - z)) / z3,
        ]
    };
    if z.norm() >= 1.0 {
        return direct(z);
    }
    const M: usize = 64;
    let mut acc = [ZERO; 4];
    for j in 0..M {
        let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / M as f64;
        let r = direct(z + Complex64::from_polar(1.0, theta));
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v / M as f64;
        }
    }
    acc
}

struct Stepper {
    nl: Nonlinear,
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
    mask: Vec<bool>,
}

impl Stepper {
    fn new(grid: &Arc<Grid>, f: &NonlinearitySpec, dt: f64) -> Result<Self> {
        let n = grid.n();
        let mut s = Stepper {
            nl: Nonlinear::new(grid, f)?,
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
            mask: (0..n).map(|i| in_band(grid.signed_mode(i), n)).collect(),
        };
        for &k in grid.wavenumbers() {
            let z = Complex64::new(0.0, lambda(k) * dt);
            let [q, f1, f2, f3] = etd_coefficients(z);
            s.e.push(z.exp());
            s.e2.push((z / 2.0).exp());
            s.q.push(q * dt);
            s.f1.push(f1 * dt);
            s.f2.push(f2 * dt);
            s.f3.push(f3 * dt);
        }
        Ok(s)
    }

    /// One step; returns the largest truncated fraction of the four stages.
    fn step(&self, v: &mut [Complex64]) -> f64 {
        let n = v.len();
        let (nv, r0) = self.nl.eval(v);
        let a: Vec<Complex64> = (0..n).map(|i| self.e2[i] * v[i] + self.q[i] * nv[i]).collect();
        let (na, r1) = self.nl.eval(&a);
        let b: Vec<Complex64> = (0..n).map(|i| self.e2[i] * v[i] + self.q[i] * na[i]).collect();
        let (nb, r2) = self.nl.eval(&b);
        let c: Vec<Complex64> = (0..n).map(|i| self.e2[i] * a[i] + self.q[i] * (2.0 * nb[i] - nv[i])).collect();
        let (nc, r3) = self.nl.eval(&c);
        for i in 0..n {
            v[i] = if self.mask[i] {
                self.e[i] * v[i] + self.f1[i] * nv[i] + 2.0 * self.f2[i] * (na[i] + nb[i]) + self.f3[i] * nc[i]
            } else {
                ZERO
            };
        }
        r0.max(r1).max(r2).max(r3)
    }
}

fn snapshot_norms(big_u: &Field, t: f64, opts: &IntegrateOptions) -> Result<SnapshotNorms> {
    let z_alpha = match opts.alpha {
        Some(a) => znorm(&big_u.propagate(t, Sign::Minus), a)?.value,
        None => f64::NAN,
    };
    Ok(SnapshotNorms {
        t,
        h_n: sobolev_norm(big_u, opts.sobolev_order),
        w1inf: winf_norm(big_u, 1),
        z_alpha,
        sup_lambda_u_ut: sup_lambda_u_ut(big_u),
    })
}

/// Integrate from `U₀` to `t_end` with default options.
pub fn integrate(u0: &Field, f: &NonlinearitySpec, t_end: f64, dt: f64, blowup_threshold: f64) -> Result<Trajectory> {
    integrate_with(u0, f, &IntegrateOptions::new(t_end, dt, blowup_threshold))
}

/// Integrate `(∂_t − iΛ)U = N(U)`.
///
/// Errors only for invalid options; blow-up, non-finite values and
/// resolution loss end the run with the matching [`Status`].
pub fn integrate_with(u0: &Field, f: &NonlinearitySpec, opts: &IntegrateOptions) -> Result<Trajectory> {
    opts.check()?;
    let grid = u0.grid().clone();
    let steps = ((opts.t_end / opts.dt) - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps == 0 { opts.dt } else { opts.t_end / steps as f64 };
    let mut steppers: Vec<Option<Stepper>> = (0..=opts.max_refine).map(|_| None).collect();
    steppers[0] = Some(Stepper::new(&grid, f, dt)?);
    let mask = steppers[0].as_ref().unwrap().mask.clone();

    let mut v = u0.spectrum().coeffs().to_vec();
    let total: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    let mut cut = 0.0;
    for (i, c) in v.iter_mut().enumerate() {
        if !mask[i] {
            cut += c.norm_sqr();
            *c = ZERO;
        }
    }
    let mut traj = Trajectory {
        grid: grid.clone(),
        options: opts.clone(),
        nonlinearity: f.name(),
        dt,
        times: Vec::new(),
        snapshots: Vec::new(),
        norms: Vec::new(),
        status: Status::Completed,
        max_aliasing: 0.0,
    };
    let to_field = |v: &[Complex64]| Spectrum::from_coeffs(grid.clone(), v.to_vec()).map(|s| s.to_field());
    let record = |traj: &mut Trajectory, t: f64, u: Field| -> Result<()> {
        traj.norms.push(snapshot_norms(&u, t, opts)?);
        traj.times.push(t);
        traj.snapshots.push(u);
        Ok(())
    };
    let first = to_field(&v)?;
    let initial_cut = if total > 0.0 { cut / total } else { 0.0 };
    let initial_sup = sup_lambda_u_ut(&first);
    record(&mut traj, 0.0, first)?;
    if initial_cut > opts.aliasing_tol {
        traj.status = Status::AliasingAbort { t: 0.0, fraction: initial_cut };
        return Ok(traj);
    }
    if initial_sup >= opts.blowup_threshold {
        traj.status = Status::BlowUp { t_star: 0.0, threshold: opts.blowup_threshold };
        return Ok(traj);
    }
    let top = opts.max_refine;
    for step in 1..=steps {
        // position inside the step in units of dt / 2^top
        let mut pos: u64 = 0;
        let units = 1u64 << top;
        while pos < units {
            let mut level = 0;
            if top > 0 {
                let rate = steppers[0].as_ref().unwrap().nl.rate(&v);
                while level < top && dt / (1u64 << level) as f64 * rate > opts.step_bound {
                    level += 1;
                }
                // stay on the dyadic lattice of the coarser levels
                while pos % (1u64 << (top - level)) != 0 {
                    level += 1;
                }
            }
            if steppers[level as usize].is_none() {
                steppers[level as usize] = Some(Stepper::new(&grid, f, dt / (1u64 << level) as f64)?);
            }
            let frac = steppers[level as usize].as_ref().unwrap().step(&mut v);
            pos += 1u64 << (top - level);
            let t = (step - 1) as f64 * dt + dt * pos as f64 / units as f64;
            traj.max_aliasing = traj.max_aliasing.max(frac);
            let u = to_field(&v)?;
            let sup = sup_lambda_u_ut(&u);
            if !sup.is_finite() || sup >= opts.blowup_threshold {
                if sup.is_finite() {
                    record(&mut traj, t, u)?;
                }
                traj.status = Status::BlowUp { t_star: t, threshold: opts.blowup_threshold };
                return Ok(traj);
            }
            if frac > opts.aliasing_tol {
                record(&mut traj, t, u)?;
                traj.status = Status::AliasingAbort { t, fraction: frac };
                return Ok(traj);
            }
            if pos == units && (step % opts.save_every == 0 || step == steps) {
                record(&mut traj, step as f64 * dt, u)?;
            }
        }
    }
    Ok(traj)
}

/// `V(t) = e^{−itΛ}U(t)`.
pub fn profile_of(traj: &Trajectory, t: f64) -> Result<Field> {
    let i = traj.index_of(t)?;
    Ok(traj.snapshots[i].propagate(traj.times[i], Sign::Minus))
}

/// `‖V̂(t) − V̂(0) − ∫₀ᵗ e^{−isΛ}N̂(U(s)) ds‖_{L²}`, with the trapezoid rule on
/// the stored snapshots.
pub fn duhamel_residual(traj: &Trajectory, t: f64, f: &NonlinearitySpec) -> Result<f64> {
    let idx = traj.index_of(t)?;
    if idx < 1 {
        return Err(Error::TooFewSnapshots(format!("need at least two snapshots up to t = {t}")));
    }
    let integrand = |i: usize| -> Result<Vec<Complex64>> {
        let s = traj.times[i];
        Ok(nonlinear_term(&traj.snapshots[i], f)?.propagate(s, Sign::Minus).spectrum().coeffs().to_vec())
    };
    let n = traj.grid.n();
    let mut integral = vec![ZERO; n];
    let mut prev = integrand(0)?;
    for i in 1..=idx {
        let cur = integrand(i)?;
        let h = traj.times[i] - traj.times[i - 1];
        for m in 0..n {
            integral[m] += 0.5 * h * (prev[m] + cur[m]);
        }
        prev = cur;
    }
    let v0 = profile_of(traj, 0.0)?.spectrum();
    let vt = profile_of(traj, t)?.spectrum();
    let diff: Vec<Complex64> = (0..n).map(|m| vt.coeffs()[m] - v0.coeffs()[m] - integral[m]).collect();
    Ok(Spectrum::from_coeffs(traj.grid.clone(), diff)?.l2_norm())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyAudit {
    pub order: f64,
    pub times: Vec<f64>,
    /// `‖U(t)‖_{H^N} − ‖U(0)‖_{H^N}`.
    pub increments: Vec<f64>,
    /// `∫₀ᵗ Σ_k 2^{k(7+1/4)}‖P_kU‖_∞ ‖U‖_{W^{1,∞}} ‖U‖_{H^N} ds`.
    pub integrals: Vec<f64>,
    /// `increment − c_fit·integral`, all `≤ 0`.
    pub margins: Vec<f64>,
    /// Smallest constant making every margin non-positive.
    pub c_fit: f64,
}

/// Empirical constant of the integrated energy inequality along a run.
pub fn energy_audit(traj: &Trajectory, order: f64) -> Result<EnergyAudit> {
    if traj.times.len() < 3 {
        return Err(Error::TooFewSnapshots(format!("energy audit needs 3 snapshots, have {}", traj.times.len())));
    }
    let k_max = dyadic::dyadic_index(traj.grid.xi_max());
    let mut h = Vec::new();
    let mut dens = Vec::new();
    for u in &traj.snapshots {
        let hn = sobolev_norm(u, order);
        let mut bands = 0.0;
        for k in -1..=k_max {
            bands += (2f64).powf(k as f64 * 7.25) * project_freq(u, k)?.sup_norm();
        }
        h.push(hn);
        dens.push(bands * winf_norm(u, 1) * hn);
    }
    let mut integrals = vec![0.0];
    for i in 1..h.len() {
        let dt = traj.times[i] - traj.times[i - 1];
        integrals.push(integrals[i - 1] + 0.5 * dt * (dens[i] + dens[i - 1]));
    }
    let floor = 1e-12 * h[0].max(f64::MIN_POSITIVE);
    let increments: Vec<f64> = h.iter().map(|x| x - h[0]).map(|d| if d.abs() <= floor { 0.0 } else { d }).collect();
    let mut c_fit: f64 = 0.0;
    for (d, i) in increments.iter().zip(&integrals) {
        if *d > 0.0 {
            if *i <= 0.0 {
                return Err(Error::Degenerate("H^N grows while the energy integral vanishes".into()));
            }
            c_fit = c_fit.max(d / i);
        }
    }
    let margins = increments.iter().zip(&integrals).map(|(d, i)| d - c_fit * i).collect();
    Ok(EnergyAudit { order, times: traj.times.clone(), increments, integrals, margins, c_fit })
}

/// `path`, or `path` with a timestamp suffix if it already exists.
pub fn fresh_dir(path: &Path) -> Result<PathBuf> {
    let mut target = path.to_path_buf();
    if target.exists() {
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        target = path.with_file_name(format!("{name}-{stamp}"));
        let mut bump = 0;
        while target.exists() {
            bump += 1;
            target = path.with_file_name(format!("{name}-{stamp}-{bump}"));
        }
    }
    fs::create_dir_all(&target)?;
    Ok(target)
}

pub const NORMS_HEADER: &str = "t,hN,w1inf,z_alpha,sup_lambda_u_ut";

pub fn norms_csv(norms: &[SnapshotNorms]) -> String {
    let mut s = String::from(NORMS_HEADER);
    s.push('\n');
    for r in norms {
        s.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", r.t, r.h_n, r.w1inf, r.z_alpha, r.sup_lambda_u_ut));
    }
    s
}

/// Write `config.json`, `norms.csv` and `status.json` into a new directory.
pub fn save_run(traj: &Trajectory, dir: &Path, config: &serde_json::Value) -> Result<PathBuf> {
    let dir = fresh_dir(dir)?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(config)?)?;
    fs::File::create(dir.join("norms.csv"))?.write_all(norms_csv(&traj.norms).as_bytes())?;
    let status = serde_json::json!({
        "status": traj.status,
        "dt": traj.dt,
        "grid": { "n": traj.grid.n(), "box_length": traj.grid.box_length() },
        "F": traj.nonlinearity,
        "snapshots": traj.times.len(),
        "max_aliasing": traj.max_aliasing,
    });
    fs::write(dir.join("status.json"), serde_json::to_string_pretty(&status)?)?;
    Ok(dir)
}
