//! Periodic-grid Fourier analysis.
//!
//! The real line is replaced by the box `[-L/2, L/2)` sampled at `n` points.
//! Transforms follow the continuum convention `f̂(ξ) = ∫ e^{-ixξ} f(x) dx`,
//! discretized as `dx · Σ_i e^{-i x_i ξ_m} f(x_i)` with `ξ_m = 2πm/L`.
//! Under this convention Plancherel reads `‖f‖²_{L²} = (1/L) Σ_m |f̂(ξ_m)|²`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dispersion relation `Λ(ξ) = √(1+ξ²)`.
#[inline]
pub fn lambda(xi: f64) -> f64 {
    (1.0 + xi * xi).sqrt()
}

/// `Λ'(ξ) = ξ/Λ(ξ)`.
#[inline]
pub fn lambda_prime(xi: f64) -> f64 {
    xi / lambda(xi)
}

/// `Λ''(ξ) = (1+ξ²)^{-3/2}`.
#[inline]
pub fn lambda_second(xi: f64) -> f64 {
    (1.0 + xi * xi).powf(-1.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }

    pub fn from_char(c: char) -> Option<Sign> {
        match c {
            '+' => Some(Sign::Plus),
            '-' => Some(Sign::Minus),
            _ => None,
        }
    }
}

/// Periodic lattice approximating ℝ.
#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    box_length: f64,
    dx: f64,
    /// Wavenumbers in FFT storage order: index `i` holds `m = i` for
    /// `i < n/2` and `m = i - n` otherwise.
    wavenumbers: Vec<f64>,
    positions: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.box_length.to_bits() == other.box_length.to_bits()
    }
}

/// Build a grid of `n` points on a box of length `box_length`.
pub fn make_grid(n: usize, box_length: f64) -> Result<Arc<Grid>> {
    Grid::new(n, box_length).map(Arc::new)
}

impl Grid {
    pub fn new(n: usize, box_length: f64) -> Result<Grid> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::BadPointCount(n));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::BadBoxLength(box_length));
        }
        let dx = box_length / n as f64;
        let dk = 2.0 * PI / box_length;
        let wavenumbers = (0..n).map(|i| signed_mode(i, n) as f64 * dk).collect();
        let positions = (0..n).map(|i| -0.5 * box_length + i as f64 * dx).collect();
        Ok(Grid { n, box_length, dx, wavenumbers, positions })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Frequency spacing `2π/L`.
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Largest resolved frequency magnitude, `π/dx`.
    pub fn xi_max(&self) -> f64 {
        PI / self.dx
    }

    /// Wavenumbers in FFT storage order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Sample positions `x_i = -L/2 + i·dx`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Frequencies `ξ_m`, `m = -n/2 .. n/2-1`, in increasing order.
    pub fn frequencies(&self) -> Vec<f64> {
        let half = self.n / 2;
        (0..self.n).map(|i| (i as f64 - half as f64) * self.dk()).collect()
    }

    /// Storage index of signed mode `m` (taken modulo `n`).
    pub fn mode_index(&self, m: i64) -> usize {
        m.rem_euclid(self.n as i64) as usize
    }

    pub fn signed_mode(&self, idx: usize) -> i64 {
        signed_mode(idx, self.n)
    }

    /// Storage index of the unpaired Nyquist mode `-n/2`.
    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }
}

#[inline]
fn signed_mode(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

static PLANNER: Lazy<Mutex<FftPlanner<f64>>> = Lazy::new(|| Mutex::new(FftPlanner::new()));
static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    if let Some(p) = PLANS.lock().unwrap().get(&(n, inverse)) {
        return p.clone();
    }
    let p = {
        let mut planner = PLANNER.lock().unwrap();
        if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        }
    };
    PLANS.lock().unwrap().insert((n, inverse), p.clone());
    p
}

/// Unnormalized forward DFT in place.
pub(crate) fn fft_in_place(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// Unnormalized inverse DFT in place.
pub(crate) fn ifft_in_place(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// Physical samples to continuum-normalized spectrum coefficients (FFT order).
pub(crate) fn forward(values: &[Complex64], dx: f64) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    fft_in_place(&mut buf);
    for (i, c) in buf.iter_mut().enumerate() {
        let s = if i % 2 == 0 { dx } else { -dx };
        *c *= s;
    }
    buf
}

/// Inverse of [`forward`].
pub(crate) fn backward(coeffs: &[Complex64], box_length: f64) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| if i % 2 == 0 { *c } else { -*c })
        .collect();
    ifft_in_place(&mut buf);
    let inv = 1.0 / box_length;
    for c in buf.iter_mut() {
        *c *= inv;
    }
    buf
}

/// Complex field sampled on a grid, stored in physical space.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

/// Fourier coefficients `f̂(ξ_m)` in FFT storage order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Field> {
        if values.len() != grid.n() {
            return Err(Error::param(
                "values",
                format!("length {} does not match grid size {}", values.len(), grid.n()),
            ));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field { grid: grid.clone(), values: vec![Complex64::new(0.0, 0.0); grid.n()] }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> Complex64) -> Field {
        let values = grid.positions().iter().map(|&x| f(x)).collect();
        Field { grid: grid.clone(), values }
    }

    pub fn from_real_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Field {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum { grid: self.grid.clone(), coeffs: forward(&self.values, self.grid.dx()) }
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn check_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise map with access to the sample position.
    pub fn map_with_x(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Field {
        let values =
            self.grid.positions().iter().zip(&self.values).map(|(&x, &v)| f(x, v)).collect();
        Field { grid: self.grid.clone(), values }
    }

    pub fn zip_with(
        &self,
        other: &Field,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Field> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: Complex64) -> Field {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> Field {
        self.map(|v| v.conj())
    }

    pub fn re(&self) -> Field {
        self.map(|v| Complex64::new(v.re, 0.0))
    }

    pub fn im(&self) -> Field {
        self.map(|v| Complex64::new(v.im, 0.0))
    }

    pub fn l2_norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Rectangle-rule `L¹` norm.
    pub fn l1_norm(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|v| v.norm()).sum::<f64>()
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Magnitude of the Nyquist coefficient relative to the largest coefficient.
    pub fn nyquist_level(&self) -> f64 {
        self.spectrum().nyquist_level()
    }

    /// `F⁻¹(σ(ξ)·F f)`; fails if `σ` is not finite at some grid frequency.
    pub fn apply_symbol(&self, symbol: impl Fn(f64) -> Complex64) -> Result<Field> {
        let mult = symbol_values(&self.grid, symbol)?;
        Ok(self.apply_multiplier(&mult))
    }

    /// Multiply the spectrum by precomputed values (FFT order).
    pub fn apply_multiplier(&self, mult: &[Complex64]) -> Field {
        debug_assert_eq!(mult.len(), self.grid.n());
        let mut spec = self.spectrum();
        for (c, m) in spec.coeffs.iter_mut().zip(mult) {
            *c *= *m;
        }
        spec.to_field()
    }

    /// Multiply the spectrum by real values (FFT order).
    pub fn apply_real_multiplier(&self, mult: &[f64]) -> Field {
        let mut spec = self.spectrum();
        for (c, m) in spec.coeffs.iter_mut().zip(mult) {
            *c *= *m;
        }
        spec.to_field()
    }

    /// `e^{±itΛ} f`.
    pub fn propagate(&self, t: f64, sign: Sign) -> Field {
        self.apply_multiplier(&propagator(&self.grid, t, sign))
    }

    pub fn lambda_pow(&self, s: f64) -> Field {
        let mult: Vec<f64> = self.grid.wavenumbers().iter().map(|&k| lambda(k).powf(s)).collect();
        self.apply_real_multiplier(&mult)
    }

    /// Spectral derivative of order `order`.
    pub fn derivative(&self, order: u32) -> Field {
        let mult: Vec<Complex64> = self
            .grid
            .wavenumbers()
            .iter()
            .map(|&k| Complex64::new(0.0, k).powu(order))
            .collect();
        self.apply_multiplier(&mult)
    }
}

impl Spectrum {
    pub fn from_coeffs(grid: Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Spectrum> {
        if coeffs.len() != grid.n() {
            return Err(Error::param("coeffs", "length does not match grid"));
        }
        Ok(Spectrum { grid, coeffs })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn to_field(&self) -> Field {
        Field { grid: self.grid.clone(), values: backward(&self.coeffs, self.grid.box_length()) }
    }

    /// `‖f‖_{L²}` from the spectrum by Plancherel.
    pub fn l2_norm(&self) -> f64 {
        (self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.grid.box_length()).sqrt()
    }

    pub fn nyquist_level(&self) -> f64 {
        let max = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            0.0
        } else {
            self.coeffs[self.grid.nyquist_index()].norm() / max
        }
    }
}

/// Evaluate a unary symbol on the grid's wavenumbers, rejecting non-finite values.
pub fn symbol_values(grid: &Grid, symbol: impl Fn(f64) -> Complex64) -> Result<Vec<Complex64>> {
    grid.wavenumbers()
        .iter()
        .map(|&xi| {
            let v = symbol(xi);
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteSymbol { xi })
            }
        })
        .collect()
}

/// Multiplier of `e^{±itΛ}` on the grid.
pub fn propagator(grid: &Grid, t: f64, sign: Sign) -> Vec<Complex64> {
    let s = sign.as_f64() * t;
    grid.wavenumbers().iter().map(|&k| Complex64::from_polar(1.0, s * lambda(k))).collect()
}

/// `F⁻¹(σ(ξ) F f)`.
pub fn apply_symbol(f: &Field, symbol: impl Fn(f64) -> Complex64) -> Result<Field> {
    f.apply_symbol(symbol)
}

/// `e^{±itΛ} f`.
pub fn propagate(f: &Field, t: f64, sign: Sign) -> Field {
    f.propagate(t, sign)
}

/// Solution of the free Klein-Gordon equation with data `(u0, u1)`:
/// `cos(tΛ) u0 + Λ⁻¹ sin(tΛ) u1`.
pub fn linear_kg_solution(u0: &Field, u1: &Field, t: f64) -> Result<Field> {
    u0.check_grid(u1)?;
    let grid = u0.grid();
    let a = u0.spectrum();
    let b = u1.spectrum();
    let coeffs = grid
        .wavenumbers()
        .iter()
        .zip(a.coeffs.iter().zip(&b.coeffs))
        .map(|(&k, (&ca, &cb))| {
            let l = lambda(k);
            ca * (t * l).cos() + cb * ((t * l).sin() / l)
        })
        .collect();
    Ok(Spectrum { grid: grid.clone(), coeffs }.to_field())
}

/// Time derivative of [`linear_kg_solution`]: `-Λ sin(tΛ) u0 + cos(tΛ) u1`.
pub fn linear_kg_velocity(u0: &Field, u1: &Field, t: f64) -> Result<Field> {
    u0.check_grid(u1)?;
    let grid = u0.grid();
    let a = u0.spectrum();
    let b = u1.spectrum();
    let coeffs = grid
        .wavenumbers()
        .iter()
        .zip(a.coeffs.iter().zip(&b.coeffs))
        .map(|(&k, (&ca, &cb))| {
            let l = lambda(k);
            -ca * (l * (t * l).sin()) + cb * (t * l).cos()
        })
        .collect();
    Ok(Spectrum { grid: grid.clone(), coeffs }.to_field())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_field(grid: &Arc<Grid>, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.n())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Field::new(grid.clone(), values).unwrap()
    }

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn grid_examples() {
        let g = make_grid(8, 2.0 * PI).unwrap();
        let freqs = g.frequencies();
        let expected = [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        for (f, e) in freqs.iter().zip(expected) {
            assert_relative_eq!(*f, e, epsilon = 1e-14);
        }
        let g = make_grid(1024, 256.0 * PI).unwrap();
        assert_relative_eq!(g.dx(), PI / 4.0, epsilon = 1e-15);
        assert_eq!(g.dx() * g.n() as f64, g.box_length());
        assert!(matches!(make_grid(9, 2.0 * PI), Err(Error::BadPointCount(9))));
        assert!(matches!(make_grid(4, 2.0 * PI), Err(Error::BadPointCount(4))));
        assert!(matches!(make_grid(16, 0.0), Err(Error::BadBoxLength(_))));
        assert!(matches!(make_grid(16, -1.0), Err(Error::BadBoxLength(_))));
    }

    #[test]
    fn frequencies_increasing_and_symmetric() {
        let g = make_grid(64, 10.0).unwrap();
        let f = g.frequencies();
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        // f[0] is the unpaired Nyquist mode
        for i in 1..64 {
            assert_relative_eq!(f[i], -f[64 - i], epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_convention_gaussian() {
        // ∫ e^{-ixξ} e^{-x²} dx = √π e^{-ξ²/4}
        let g = make_grid(256, 40.0).unwrap();
        let f = Field::from_real_fn(&g, |x| (-x * x).exp());
        let s = f.spectrum();
        for (i, &k) in g.wavenumbers().iter().enumerate() {
            let exact = PI.sqrt() * (-k * k / 4.0).exp();
            assert!((s.coeffs()[i] - c(exact)).norm() < 1e-12, "xi = {k}");
        }
    }

    #[test]
    fn plancherel_and_round_trip() {
        let g = make_grid(128, 17.0).unwrap();
        let f = random_field(&g, 3);
        let s = f.spectrum();
        assert_relative_eq!(s.l2_norm(), f.l2_norm(), max_relative = 1e-10);
        let back = s.to_field();
        assert!(max_diff(&back, &f) <= 1e-12 * f.sup_norm());
    }

    #[test]
    fn lambda_examples() {
        let g = make_grid(32, 2.0 * PI).unwrap();
        let one = Field::from_real_fn(&g, |_| 1.0);
        let out = one.apply_symbol(|k| c(lambda(k))).unwrap();
        assert!(max_diff(&out, &one) < 1e-13);
        let cosx = Field::from_real_fn(&g, f64::cos);
        let out = cosx.apply_symbol(|k| c(lambda(k))).unwrap();
        assert!(max_diff(&out, &cosx.scale(c(2f64.sqrt()))) < 1e-13);
    }

    #[test]
    fn lambda_on_gaussian_matches_quadrature() {
        // Oracle: direct quadrature of (1/2π)∫ e^{ixξ} Λ(ξ) √π e^{-ξ²/4} dξ on a
        // frequency mesh four times finer than the grid's.
        let g = make_grid(256, 60.0).unwrap();
        let f = Field::from_real_fn(&g, |x| (-x * x).exp());
        let out = f.apply_symbol(|k| c(lambda(k))).unwrap();
        let dxi = g.dk() / 4.0;
        let m = 4 * 200;
        for (i, &x) in g.positions().iter().enumerate().step_by(3) {
            if x.abs() > 12.0 {
                continue;
            }
            let mut acc = 0.0;
            for j in -m..=m {
                let xi = j as f64 * dxi;
                acc += (x * xi).cos() * lambda(xi) * PI.sqrt() * (-xi * xi / 4.0).exp();
            }
            let oracle = acc * dxi / (2.0 * PI);
            assert!((out.values()[i] - c(oracle)).norm() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn non_finite_symbol_names_frequency() {
        let g = make_grid(16, 2.0 * PI).unwrap();
        let f = Field::from_real_fn(&g, f64::cos);
        let err = f.apply_symbol(|k| c(1.0 / (k - 2.0))).unwrap_err();
        match err {
            Error::NonFiniteSymbol { xi } => assert_relative_eq!(xi, 2.0, epsilon = 1e-12),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn propagate_examples() {
        let g = make_grid(64, 2.0 * PI).unwrap();
        let f = random_field(&g, 11);
        assert!(max_diff(&f.propagate(0.0, Sign::Plus), &f) < 1e-13);
        let mode = Field::from_fn(&g, |x| Complex64::from_polar(1.0, 3.0 * x));
        let t = 1.7;
        let out = mode.propagate(t, Sign::Plus);
        let expected = mode.scale(Complex64::from_polar(1.0, t * lambda(3.0)));
        assert!(max_diff(&out, &expected) < 1e-12);
        assert_relative_eq!(
            f.propagate(5.3, Sign::Plus).l2_norm(),
            f.l2_norm(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn propagator_group_and_conjugation() {
        let g = make_grid(128, 30.0).unwrap();
        let f = random_field(&g, 5);
        let a = f.propagate(0.7, Sign::Plus).propagate(1.9, Sign::Plus);
        let b = f.propagate(2.6, Sign::Plus);
        assert!(max_diff(&a, &b) < 1e-10 * f.sup_norm());
        let lhs = f.conj().propagate(1.3, Sign::Minus);
        let rhs = f.propagate(1.3, Sign::Plus).conj();
        assert!(max_diff(&lhs, &rhs) < 1e-12 * f.sup_norm());
        let back = f.propagate(4.0, Sign::Plus).propagate(4.0, Sign::Minus);
        assert!(max_diff(&back, &f) < 1e-10 * f.sup_norm());
    }

    #[test]
    fn linear_solution_examples() {
        let g = make_grid(32, 2.0 * PI).unwrap();
        let u0 = Field::from_real_fn(&g, |x| (x.cos()).exp() - 1.0);
        let zero = Field::zeros(&g);
        let u1 = Field::from_real_fn(&g, |x| (2.0 * x).sin());
        assert!(max_diff(&linear_kg_solution(&u0, &zero, 0.0).unwrap(), &u0) < 1e-13);
        assert!(linear_kg_solution(&zero, &u1, 0.0).unwrap().sup_norm() < 1e-14);
        assert!(max_diff(&linear_kg_velocity(&zero, &u1, 0.0).unwrap(), &u1) < 1e-13);
        let cosx = Field::from_real_fn(&g, f64::cos);
        let t = 2.3;
        let out = linear_kg_solution(&cosx, &zero, t).unwrap();
        let expected = cosx.scale(c((2f64.sqrt() * t).cos()));
        assert!(max_diff(&out, &expected) < 1e-13);
        let other = make_grid(64, 2.0 * PI).unwrap();
        assert!(matches!(
            linear_kg_solution(&u0, &Field::zeros(&other), 1.0),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn linear_solution_matches_propagator_form() {
        let g = make_grid(64, 25.0).unwrap();
        let u0 = Field::from_real_fn(&g, |x| (-x * x).exp());
        let u1 = Field::from_real_fn(&g, |x| x * (-x * x).exp());
        let t = 3.1;
        let a = u0.propagate(t, Sign::Plus).add(&u0.propagate(t, Sign::Minus)).unwrap();
        let w = u1.lambda_pow(-1.0);
        let b = w.propagate(t, Sign::Plus).sub(&w.propagate(t, Sign::Minus)).unwrap();
        let display = a.scale(c(0.5)).add(&b.scale(Complex64::new(0.0, -0.5))).unwrap();
        let u = linear_kg_solution(&u0, &u1, t).unwrap();
        assert!(max_diff(&u, &display) < 1e-13);
    }

    proptest::proptest! {
        #[test]
        fn apply_symbol_is_linear(seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = make_grid(64, 12.0).unwrap();
            let f = random_field(&g, seed);
            let h = random_field(&g, seed + 7919);
            let sym = |k: f64| Complex64::new(lambda(k), 0.3 * k);
            let lhs = f.scale(c(a)).add(&h.scale(c(b))).unwrap().apply_symbol(sym).unwrap();
            let rhs = f.apply_symbol(sym).unwrap().scale(c(a))
                .add(&h.apply_symbol(sym).unwrap().scale(c(b))).unwrap();
            let scale = lhs.sup_norm().max(1.0);
            proptest::prop_assert!(max_diff(&lhs, &rhs) <= 1e-12 * scale);
        }

        #[test]
        fn round_trip_identity(seed in 0u64..1000) {
            let g = make_grid(256, 50.0).unwrap();
            let f = random_field(&g, seed);
            let back = f.spectrum().to_field();
            proptest::prop_assert!(max_diff(&back, &f) <= 1e-12 * f.sup_norm());
        }
    }
}
