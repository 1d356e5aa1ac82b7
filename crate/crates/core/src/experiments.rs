//! Quantitative studies: linear dispersive decay, nonlinear decay, `Z_α`
//! tracking of the profile and the lifespan scan.

use std::collections::hash_map::DefaultHasher;
use std::f64::consts::PI;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::dyadic::{self, project_freq};
use crate::error::{Error, Result};
use crate::evolution::{
    default_threshold, fresh_dir, half_kg, integrate_with, save_run, seed_data, sigma, IntegrateOptions,
    NonlinearitySpec, Status, Trajectory,
};
use crate::exec::Exec;
use crate::fit::{fit_line, fit_power_law, LineFit};
use crate::spectral::{make_grid, Field, Grid, Sign, Spectrum};

/// Largest tolerated fraction of L² mass next to the periodic boundary.
pub const EDGE_MASS_TOL: f64 = 1e-8;

/// Default bound on `Z_α(V(t))/Z_α(V(0))`.
pub const R_MAX: f64 = 4.0;

/// Numerical support radius of the Gaussian seed data (`e^{−36} < 1e−15`).
pub const SEED_RADIUS: f64 = 6.0;

/// Fraction of `‖f‖²_{L²}` within `L/32` of the boundary, `|x| ≥ 15L/32`.
pub fn edge_mass(f: &Field) -> f64 {
    let edge = 15.0 / 32.0 * f.grid().box_length();
    let (mut out, mut total) = (0.0, 0.0);
    for (x, v) in f.grid().positions().iter().zip(f.values()) {
        let m = v.norm_sqr();
        total += m;
        if x.abs() >= edge {
            out += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        out / total
    }
}

/// A fit together with the window it was taken over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFit {
    pub name: String,
    pub window: [f64; 2],
    pub fit: LineFit,
}

fn sample_times(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|i| lo + i as f64 * step).collect()
}

fn in_window(t: f64, w: [f64; 2]) -> bool {
    t >= w[0] - 1e-12 && t <= w[1] + 1e-12
}

// ---------------------------------------------------------------------------
// linear decay

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionSettings {
    pub n: usize,
    pub box_length: f64,
    /// Data `e^{−x²/w²}`.
    pub width: f64,
    pub bands: Vec<i32>,
    pub window: [f64; 2],
    /// End of the range over which the constants are taken.
    pub horizon: f64,
    pub time_step: f64,
}

impl DispersionSettings {
    pub fn standard() -> Self {
        DispersionSettings {
            n: 4096,
            box_length: 256.0 * PI,
            width: 1.0,
            bands: vec![0, 1, 2, 3],
            window: [5.0, 50.0],
            horizon: 150.0,
            time_step: 0.5,
        }
    }

    pub fn from_config(c: &ConfigFile) -> Self {
        DispersionSettings {
            n: c.grid.n,
            box_length: c.grid.box_length,
            window: c.experiment.fit_window,
            horizon: c.evolution.horizon,
            ..Self::standard()
        }
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if self.horizon > grid.box_length() / 4.0 + 1e-9 {
            return Err(Error::param("horizon", format!("{} exceeds the no-wrap window L/4", self.horizon)));
        }
        if !(self.window[0] >= 0.0 && self.window[0] < self.window[1] && self.window[1] <= self.horizon) {
            return Err(Error::param("window", "must lie inside [0, horizon]"));
        }
        if !(self.time_step > 0.0) || !(self.width > 0.0) {
            return Err(Error::param("time_step", "time step and width must be positive"));
        }
        for &k in &self.bands {
            if dyadic::support(k).1 > grid.xi_max() {
                return Err(Error::param("bands", format!("band {k} is not resolved by the grid")));
            }
        }
        Ok(())
    }
}

/// Decay of one evolved field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandDecay {
    /// `None` for the unlocalized field.
    pub band: Option<i32>,
    pub fit: WindowFit,
    pub sup_at_zero: f64,
    pub l1: f64,
    /// `sup_t ‖·‖_∞ (1+t)^{1/2} / (2^{3k/2} ‖P_k f‖_{L¹})` over the window
    /// start to the horizon.
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: i32,
    pub l1: f64,
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionReport {
    pub settings: DispersionSettings,
    pub full: BandDecay,
    pub bands: Vec<BandDecay>,
    /// Constants of the kernel `P_k δ`, whose flat spectrum saturates the
    /// `L¹ → L^∞` bound.
    pub sweep: Vec<SweepRow>,
    /// Largest over smallest sweep constant.
    pub sweep_spread: f64,
    pub max_edge_mass: f64,
}

fn band_decay(f: &Field, band: Option<i32>, s: &DispersionSettings, exec: Exec) -> Result<(BandDecay, f64)> {
    let times = sample_times(0.0, s.horizon, s.time_step);
    let samples = exec.map_slice(&times, |&t| {
        let g = f.propagate(t, Sign::Plus);
        (g.sup_norm(), edge_mass(&g))
    });
    let edge = samples.iter().map(|p| p.1).fold(0.0, f64::max);
    if edge > EDGE_MASS_TOL {
        return Err(Error::WrapAround(edge));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut worst: f64 = 0.0;
    for (&t, &(sup, _)) in times.iter().zip(&samples) {
        if in_window(t, s.window) {
            xs.push(1.0 + t);
            ys.push(sup);
        }
        if t >= s.window[0] - 1e-12 {
            worst = worst.max(sup * (1.0 + t).sqrt());
        }
    }
    let fit = fit_power_law(&xs, &ys)?;
    let l1 = f.l1_norm();
    let scale = band.map_or(1.0, |k| (2f64).powf(1.5 * k.max(0) as f64));
    let name = band.map_or("sup e^{itΛ}f".to_string(), |k| format!("sup P_{k} e^{{itΛ}}f"));
    let decay = BandDecay {
        band,
        fit: WindowFit { name, window: s.window, fit },
        sup_at_zero: samples[0].0,
        l1,
        constant: worst / (scale * l1),
    };
    Ok((decay, edge))
}

/// Sup-norm decay of `e^{itΛ}f` and of `P_k e^{itΛ}f` for Gaussian `f`, and the
/// normalized constants of the kernels `P_k δ`.
pub fn dispersion_decay(s: &DispersionSettings, exec: Exec) -> Result<DispersionReport> {
    let grid = make_grid(s.n, s.box_length)?;
    s.check(&grid)?;
    let w = s.width;
    let data = Field::from_real_fn(&grid, |x| (-(x / w).powi(2)).exp());
    let (full, mut edge) = band_decay(&data, None, s, exec)?;
    let mut bands = Vec::new();
    for &k in &s.bands {
        let (b, e) = band_decay(&project_freq(&data, k)?, Some(k), s, exec)?;
        edge = edge.max(e);
        bands.push(b);
    }
    let delta = Spectrum::from_coeffs(grid.clone(), vec![Complex64::new(1.0, 0.0); s.n])?.to_field();
    let mut sweep = Vec::new();
    for &k in &s.bands {
        let (b, e) = band_decay(&project_freq(&delta, k)?, Some(k), s, exec)?;
        edge = edge.max(e);
        sweep.push(SweepRow { k, l1: b.l1, constant: b.constant });
    }
    let hi = sweep.iter().map(|r| r.constant).fold(0.0, f64::max);
    let lo = sweep.iter().map(|r| r.constant).fold(f64::INFINITY, f64::min);
    Ok(DispersionReport {
        settings: s.clone(),
        full,
        bands,
        sweep,
        sweep_spread: if lo.is_finite() { hi / lo } else { f64::NAN },
        max_edge_mass: edge,
    })
}

// ---------------------------------------------------------------------------
// nonlinear decay and Z tracking

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySettings {
    pub n: usize,
    pub box_length: f64,
    pub nonlinearity: String,
    pub eps_list: Vec<f64>,
    pub dt: f64,
    pub horizon: f64,
    pub window: [f64; 2],
    pub alpha: f64,
    pub sobolev_order: f64,
    pub save_every: usize,
    /// `Z_α` ratios are asserted for `ε` up to this value.
    pub eps_threshold: f64,
    pub r_max: f64,
    pub blowup_threshold: Option<f64>,
}

impl DecaySettings {
    pub fn standard() -> Self {
        DecaySettings {
            n: 2048,
            box_length: 256.0,
            nonlinearity: "u_squared".into(),
            eps_list: vec![0.05, 0.025],
            dt: 0.05,
            horizon: 100.0,
            window: [5.0, 100.0],
            alpha: 0.5,
            sobolev_order: 8.0,
            save_every: 10,
            eps_threshold: 0.05,
            r_max: R_MAX,
            blowup_threshold: None,
        }
    }

    pub fn from_config(c: &ConfigFile) -> Self {
        DecaySettings {
            n: c.grid.n,
            box_length: c.grid.box_length,
            nonlinearity: c.evolution.nonlinearity.clone(),
            eps_list: c.experiment.eps_list.clone(),
            dt: c.evolution.dt,
            horizon: c.evolution.horizon,
            window: c.experiment.fit_window,
            alpha: c.norms.alpha,
            sobolev_order: c.norms.sobolev_order,
            eps_threshold: c.evolution.epsilon,
            blowup_threshold: c.evolution.blowup_threshold,
            ..Self::standard()
        }
    }

    fn options(&self, big_u0: &Field, eps: f64) -> IntegrateOptions {
        let thr = self.blowup_threshold.unwrap_or_else(|| default_threshold(big_u0, eps));
        let mut o = IntegrateOptions::new(self.horizon, self.dt, thr);
        o.save_every = self.save_every;
        o.sobolev_order = self.sobolev_order;
        o.alpha = Some(self.alpha);
        o
    }
}

/// Seed data `U₀` for amplitude `ε` on the given grid.
pub fn seed_state(grid: &std::sync::Arc<Grid>, eps: f64) -> Result<Field> {
    let (u0, u1) = seed_data(grid, eps);
    half_kg(&u0, &u1)
}

/// Integrate the seed data for one `ε` with `Z_α` tracking.
pub fn decay_run(s: &DecaySettings, eps: f64) -> Result<Trajectory> {
    let grid = make_grid(s.n, s.box_length)?;
    let big = seed_state(&grid, eps)?;
    let f = NonlinearitySpec::from_tag(&s.nonlinearity)?;
    integrate_with(&big, &f, &s.options(&big, eps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub eps: f64,
    pub status: Status,
    /// Slope of `log ‖(Λu, ∂_t u)‖_∞` against `log(1+t)`.
    pub fit: Option<WindowFit>,
    /// `sup_t ‖(Λu, ∂_t u)(t)‖_∞ (1+t)^α / ε`.
    pub c_surrogate: Option<f64>,
    pub skipped: Option<String>,
}

/// Fit the nonlinear decay rate along a finished run.
pub fn decay_fit(traj: &Trajectory, eps: f64, window: [f64; 2], alpha: f64) -> Result<DecayRow> {
    let status = traj.status();
    let skip = |why: &str| DecayRow { eps, status, fit: None, c_surrogate: None, skipped: Some(why.into()) };
    if eps == 0.0 {
        return Ok(skip("zero data"));
    }
    let end = traj.times().last().copied().unwrap_or(0.0);
    if !matches!(status, Status::Completed) || end < window[1] - 1e-9 {
        return Ok(skip("run ended before the end of the fit window"));
    }
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut c: f64 = 0.0;
    for r in traj.norms() {
        if in_window(r.t, window) {
            xs.push(1.0 + r.t);
            ys.push(r.sup_lambda_u_ut);
        }
        c = c.max(r.sup_lambda_u_ut * (1.0 + r.t).powf(alpha));
    }
    let fit = fit_power_law(&xs, &ys)?;
    Ok(DecayRow {
        eps,
        status,
        fit: Some(WindowFit { name: format!("sup |(Λu, u_t)| at ε = {eps}"), window, fit }),
        c_surrogate: Some(c / eps),
        skipped: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZSeries {
    pub eps: f64,
    pub status: Status,
    pub times: Vec<f64>,
    pub z_alpha: Vec<f64>,
    pub h_n: Vec<f64>,
    /// `Z_α(V(t))/Z_α(V(0))`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// The run stopped before the horizon.
    pub truncated: bool,
}

/// `Z_α` and `H^N` series of the profile along a run.
pub fn z_series(traj: &Trajectory, eps: f64) -> ZSeries {
    let z: Vec<f64> = traj.norms().iter().map(|r| r.z_alpha).collect();
    let z0 = z.first().copied().unwrap_or(0.0);
    let ratios: Vec<f64> = z.iter().map(|v| if z0 > 0.0 { v / z0 } else { 1.0 }).collect();
    ZSeries {
        eps,
        status: traj.status(),
        times: traj.times().to_vec(),
        h_n: traj.norms().iter().map(|r| r.h_n).collect(),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        z_alpha: z,
        ratios,
        truncated: (traj.times().last().copied().unwrap_or(0.0) - traj.options().t_end).abs() > 1e-9,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub settings: DecaySettings,
    pub rows: Vec<DecayRow>,
    pub z: Vec<ZSeries>,
    /// Every `ε ≤ eps_threshold` keeps its ratio below `r_max` on the horizon.
    pub z_bounded: bool,
    /// At every shared time the ratio does not decrease as `ε` grows.
    pub z_ordered: bool,
}

/// Runs of the seed data for every `ε`, with decay fits and `Z_α` series.
pub fn nonlinear_decay(s: &DecaySettings, exec: Exec) -> Result<DecayReport> {
    let runs = exec.map_slice(&s.eps_list, |&eps| decay_run(s, eps).map(|t| (eps, t)));
    let mut rows = Vec::new();
    let mut z = Vec::new();
    for r in runs {
        let (eps, traj) = r?;
        rows.push(decay_fit(&traj, eps, s.window, s.alpha)?);
        z.push(z_series(&traj, eps));
    }
    let z_bounded = z
        .iter()
        .filter(|q| q.eps <= s.eps_threshold)
        .all(|q| !q.truncated && q.max_ratio <= s.r_max);
    Ok(DecayReport { settings: s.clone(), rows, z_ordered: z_ordered(&z), z, z_bounded })
}

fn z_ordered(series: &[ZSeries]) -> bool {
    let mut by_eps: Vec<&ZSeries> = series.iter().collect();
    by_eps.sort_by(|a, b| a.eps.total_cmp(&b.eps));
    by_eps.windows(2).all(|w| {
        let (small, large) = (w[0], w[1]);
        small.times.iter().zip(&small.ratios).all(|(t, r)| {
            match large.times.iter().position(|s| (s - t).abs() < 1e-9) {
                Some(i) => *r <= large.ratios[i] * (1.0 + 1e-9),
                None => true,
            }
        })
    })
}

/// The `Z_α` series alone, as the `znorm` subcommand reports it.
pub fn znorm_tracking(s: &DecaySettings, exec: Exec) -> Result<DecayReport> {
    nonlinear_decay(s, exec)
}

// ---------------------------------------------------------------------------
// lifespan

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifespanSettings {
    pub n: usize,
    pub box_length: f64,
    pub eps_list: Vec<f64>,
    pub dt: f64,
    /// Time budget per run.
    pub budget: f64,
    /// `None` uses the per-run default threshold.
    pub threshold: Option<f64>,
    /// The second, lower threshold is this fraction of the first.
    pub secondary: f64,
    pub max_refine: u32,
    pub save_every: usize,
    pub support_radius: f64,
}

impl LifespanSettings {
    pub fn standard() -> Self {
        LifespanSettings {
            n: 16384,
            box_length: 32.0,
            eps_list: vec![0.8, 0.7, 0.6, 0.5, 0.45, 0.4],
            dt: 0.01,
            budget: 50.0,
            threshold: None,
            secondary: 0.5,
            max_refine: 8,
            save_every: 5,
            support_radius: SEED_RADIUS,
        }
    }

    pub fn from_config(c: &ConfigFile) -> Self {
        LifespanSettings {
            n: c.grid.n,
            box_length: c.grid.box_length,
            eps_list: c.experiment.eps_list.clone(),
            dt: c.evolution.dt,
            budget: c.evolution.horizon,
            threshold: c.evolution.blowup_threshold,
            ..Self::standard()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Censor {
    pub t: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifespanRow {
    pub eps: f64,
    pub threshold: f64,
    pub t_star: Option<f64>,
    /// Crossing time of the secondary threshold, interpolated between
    /// stored snapshots.
    pub t_star_secondary: Option<f64>,
    pub censored: Option<Censor>,
    /// `R(e^{2/(σε²)} − 1)`.
    pub bound: f64,
    pub max_aliasing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifespanReport {
    pub settings: LifespanSettings,
    pub sigma: f64,
    pub rows: Vec<LifespanRow>,
    /// `log t*` against `ε^{−2}` over the uncensored runs.
    pub fit: Option<WindowFit>,
    pub fit_eps: Vec<f64>,
    pub monotone: bool,
    pub within_bound: bool,
}

impl LifespanReport {
    pub fn censored(&self) -> usize {
        self.rows.iter().filter(|r| r.censored.is_some()).count()
    }
}

/// `R(e^{2/(σε²)} − 1)`.
pub fn hormander_bound(radius: f64, sigma: f64, eps: f64) -> f64 {
    radius * (2.0 / (sigma * eps * eps)).exp_m1()
}

/// First time the stored `sup |(Λu, ∂_t u)|` series reaches `level`,
/// interpolating `log sup` linearly between snapshots.
pub fn crossing_time(traj: &Trajectory, level: f64) -> Option<f64> {
    let rows = traj.norms();
    let i = rows.iter().position(|r| r.sup_lambda_u_ut >= level)?;
    if i == 0 {
        return Some(0.0);
    }
    let (a, b) = (&rows[i - 1], &rows[i]);
    let (la, lb) = (a.sup_lambda_u_ut.ln(), b.sup_lambda_u_ut.ln());
    let w = if lb > la { (level.ln() - la) / (lb - la) } else { 1.0 };
    Some(a.t + w * (b.t - a.t))
}

fn lifespan_run(s: &LifespanSettings, grid: &std::sync::Arc<Grid>, sigma: f64, eps: f64) -> Result<LifespanRow> {
    let big = seed_state(grid, eps)?;
    let thr = s.threshold.unwrap_or_else(|| default_threshold(&big, eps));
    let mut o = IntegrateOptions::new(s.budget, s.dt, thr);
    o.save_every = s.save_every;
    o.sobolev_order = 2.0;
    o.max_refine = s.max_refine;
    let traj = integrate_with(&big, &NonlinearitySpec::dtu_sq_dxu(), &o)?;
    let (t_star, censored) = match traj.status() {
        Status::BlowUp { t_star, .. } => (Some(t_star), None),
        Status::Completed => (None, Some(Censor { t: s.budget, reason: "no crossing within the budget".into() })),
        Status::AliasingAbort { t, fraction } => {
            (None, Some(Censor { t, reason: format!("resolution lost (truncated fraction {fraction:e})") }))
        }
    };
    Ok(LifespanRow {
        eps,
        threshold: thr,
        t_star,
        t_star_secondary: crossing_time(&traj, s.secondary * thr),
        censored,
        bound: hormander_bound(s.support_radius, sigma, eps),
        max_aliasing: traj.max_aliasing(),
    })
}

/// Threshold-crossing times of `F = (∂_t u)²∂_x u` from the seed data, one
/// run per `ε`.
pub fn lifespan_scan(s: &LifespanSettings, exec: Exec) -> Result<LifespanReport> {
    if s.eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::param("eps_list", "must be strictly decreasing"));
    }
    if !(s.secondary > 0.0 && s.secondary < 1.0) {
        return Err(Error::param("secondary", "must lie in (0, 1)"));
    }
    let grid = make_grid(s.n, s.box_length)?;
    let (u0, u1) = seed_data(&grid, 1.0);
    let sigma = sigma(&u0, &u1)?;
    if !(sigma > 0.0) {
        return Err(Error::Degenerate(format!("seed data have σ = {sigma}, need σ > 0")));
    }
    let rows = exec
        .map_slice(&s.eps_list, |&eps| lifespan_run(s, &grid, sigma, eps))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let done: Vec<&LifespanRow> = rows.iter().filter(|r| r.censored.is_none()).collect();
    let fit_eps: Vec<f64> = done.iter().map(|r| r.eps).collect();
    let fit = if done.len() >= 3 {
        let xs: Vec<f64> = done.iter().map(|r| r.eps.powi(-2)).collect();
        let ys: Vec<f64> = done.iter().map(|r| r.t_star.unwrap().ln()).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(0.0, f64::max);
        Some(WindowFit { name: "log t* against ε^-2".into(), window: [lo, hi], fit: fit_line(&xs, &ys)? })
    } else {
        None
    };
    let monotone = rows.iter().all(|r| r.t_star.is_some())
        && rows.windows(2).all(|w| w[1].t_star.unwrap() > w[0].t_star.unwrap());
    let within_bound = rows.iter().all(|r| r.t_star.map_or(true, |t| t <= r.bound));
    Ok(LifespanReport { settings: s.clone(), sigma, rows, fit, fit_eps, monotone, within_bound })
}

// ---------------------------------------------------------------------------
// records

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: String,
}

/// Everything a study reports, written once as `scan_summary.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    tag: String,
    config_hash: String,
    config: serde_json::Value,
    seed: u64,
    fits: Vec<WindowFit>,
    crossings: Vec<(f64, Option<f64>)>,
    checks: Vec<Check>,
    details: Vec<serde_json::Value>,
}

/// Hex digest of the resolved configuration.
pub fn config_hash(config: &ConfigFile) -> String {
    let mut h = DefaultHasher::new();
    config.echo().hash(&mut h);
    format!("{:016x}", h.finish())
}

impl RunRecord {
    pub fn new(config: &ConfigFile) -> Self {
        RunRecord {
            tag: config.experiment.tag.clone(),
            config_hash: config_hash(config),
            config: serde_json::to_value(config).unwrap(),
            seed: config.experiment.seed,
            fits: Vec::new(),
            crossings: Vec::new(),
            checks: Vec::new(),
            details: Vec::new(),
        }
    }

    pub fn push_fit(&mut self, fit: WindowFit) {
        self.fits.push(fit);
    }

    pub fn push_crossing(&mut self, eps: f64, t_star: Option<f64>) {
        self.crossings.push((eps, t_star));
    }

    pub fn push_check(&mut self, name: impl Into<String>, passed: bool, value: f64, tolerance: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, value, tolerance: tolerance.into() });
    }

    pub fn push_detail(&mut self, detail: impl Serialize) -> Result<()> {
        self.details.push(serde_json::to_value(detail)?);
        Ok(())
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn fits(&self) -> &[WindowFit] {
        &self.fits
    }

    pub fn checks(&self) -> &[Check] {
        &self.checks
    }

    pub fn crossings(&self) -> &[(f64, Option<f64>)] {
        &self.crossings
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Write into a fresh directory under `root` named after the tag and hash.
    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let dir = fresh_dir(&root.join(format!("{}-{}", self.tag, self.config_hash)))?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&self.config)?)?;
        std::fs::write(dir.join("scan_summary.json"), serde_json::to_string_pretty(self)?)?;
        Ok(dir)
    }
}

impl DispersionReport {
    pub fn record_into(&self, rec: &mut RunRecord) -> Result<()> {
        rec.push_fit(self.full.fit.clone());
        for b in &self.bands {
            rec.push_fit(b.fit.clone());
        }
        let slope = self.full.fit.fit.slope;
        rec.push_check("decay exponent of e^{itΛ}f", (slope + 0.5).abs() <= 0.05, slope, "-0.50 ± 0.05");
        rec.push_check("kernel constant spread over k", self.sweep_spread <= 2.0, self.sweep_spread, "<= 2");
        rec.push_detail(self)
    }
}

impl DecayReport {
    pub fn record_into(&self, rec: &mut RunRecord) -> Result<()> {
        let alpha = self.settings.alpha;
        for row in &self.rows {
            if let Some(f) = &row.fit {
                rec.push_fit(f.clone());
                if row.eps > self.settings.eps_threshold {
                    continue;
                }
                let s = f.fit.slope;
                rec.push_check(format!("decay slope at ε = {}", row.eps), (s + alpha).abs() <= 0.1, s, "-α ± 0.1");
            }
        }
        let worst = self
            .z
            .iter()
            .filter(|q| q.eps <= self.settings.eps_threshold)
            .map(|q| q.max_ratio)
            .fold(0.0, f64::max);
        rec.push_check("Z_α ratio on the horizon", self.z_bounded, worst, format!("<= {}", self.settings.r_max));
        rec.push_check("Z_α ratio ordered in ε", self.z_ordered, f64::NAN, "nondecreasing in ε");
        rec.push_detail(self)
    }
}

impl LifespanReport {
    pub fn record_into(&self, rec: &mut RunRecord) -> Result<()> {
        for r in &self.rows {
            rec.push_crossing(r.eps, r.t_star);
        }
        if let Some(f) = &self.fit {
            rec.push_fit(f.clone());
        }
        let r2 = self.fit.as_ref().map_or(f64::NAN, |f| f.fit.r_squared);
        rec.push_check("t* increasing as ε decreases", self.monotone, self.censored() as f64, "strict, no censoring");
        rec.push_check("R² of log t* against ε^-2", r2 >= 0.9, r2, ">= 0.9");
        rec.push_check("t* below R(e^{2/(σε²)} - 1)", self.within_bound, self.sigma, "every ε");
        rec.push_detail(self)
    }
}

/// Integrate the seed data as configured and write the run directory.
pub fn simulate(c: &ConfigFile, root: &Path) -> Result<(Trajectory, PathBuf)> {
    let grid = make_grid(c.grid.n, c.grid.box_length)?;
    let e = &c.evolution;
    let big = seed_state(&grid, e.epsilon)?;
    let f = NonlinearitySpec::from_tag(&e.nonlinearity)?;
    let thr = e.blowup_threshold.unwrap_or_else(|| default_threshold(&big, e.epsilon));
    let mut o = IntegrateOptions::new(e.horizon, e.dt, thr);
    o.sobolev_order = c.norms.sobolev_order;
    o.alpha = Some(c.norms.alpha);
    o.save_every = ((1.0 / e.dt).round() as usize).max(1);
    let traj = integrate_with(&big, &f, &o)?;
    let dir = save_run(&traj, &root.join(format!("simulate-{}", config_hash(c))), &serde_json::to_value(c)?)?;
    Ok((traj, dir))
}
