//! Littlewood-Paley apparatus: the base cutoff `ψ`, dyadic annuli `ψ_k`,
//! frequency projections `P_k`, physical localizers `Q_j` and the
//! frequency-interaction sets `X_k`, `Y_k`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::spectral::{Field, Grid};

/// Inner edge of the transition region of `ψ`.
pub const PSI_INNER: f64 = 5.0 / 4.0;
/// Outer edge of the transition region of `ψ`.
pub const PSI_OUTER: f64 = 8.0 / 5.0;
/// Default frequency-gap constant used where a condition reads
/// `max{k₁,k₂} ≤ k₃ − O(1)`.
pub const DEFAULT_GAP: i32 = 5;

#[inline]
fn bump_exp(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 for `r ≤ a`, 0 for `r ≥ b`, `C^∞` in between.
#[inline]
pub fn smooth_step_down(r: f64, a: f64, b: f64) -> f64 {
    if r <= a {
        1.0
    } else if r >= b {
        0.0
    } else {
        let hi = bump_exp(b - r);
        hi / (hi + bump_exp(r - a))
    }
}

/// The base cutoff: 1 on `[-5/4, 5/4]`, 0 outside `[-8/5, 8/5]`.
#[inline]
pub fn psi(x: f64) -> f64 {
    smooth_step_down(x.abs(), PSI_INNER, PSI_OUTER)
}

fn check_index(k: i32) -> Result<()> {
    if k < -1 {
        Err(Error::BadDyadicIndex(k))
    } else {
        Ok(())
    }
}

/// `ψ_k(x)`; `ψ_{-1}(x) = ψ(2|x|)` and `ψ_k(x) = ψ(|x|/2^k) − ψ(|x|/2^{k−1})` for `k ≥ 0`.
pub fn psi_k(k: i32, x: f64) -> Result<f64> {
    check_index(k)?;
    Ok(psi_k_unchecked(k, x))
}

#[inline]
pub(crate) fn psi_k_unchecked(k: i32, x: f64) -> f64 {
    let a = x.abs();
    if k == -1 {
        psi(2.0 * a)
    } else {
        let s = (2f64).powi(k);
        psi(a / s) - psi(2.0 * a / s)
    }
}

/// `ψ_I = Σ_{k ∈ I ∩ [-1,∞)} ψ_k` for the integer interval `[lo, hi]`.
pub fn psi_interval(lo: i32, hi: i32, x: f64) -> f64 {
    (lo.max(-1)..=hi).map(|k| psi_k_unchecked(k, x)).sum()
}

/// Support of `ψ_k` as `(inner, outer)` radii; `ψ_k` vanishes outside.
pub fn support(k: i32) -> (f64, f64) {
    if k == -1 {
        (0.0, PSI_OUTER / 2.0)
    } else {
        let s = (2f64).powi(k);
        (s * PSI_INNER / 2.0, s * PSI_OUTER)
    }
}

/// Dyadic index `k ≥ -1` whose annulus `[2^{k-1}, 2^k)` contains `|ξ|`.
pub fn dyadic_index(xi: f64) -> i32 {
    let a = xi.abs();
    if a < 0.5 {
        -1
    } else {
        (a.log2().floor() as i32 + 1).max(-1)
    }
}

/// `P_k f`.
pub fn project_freq(f: &Field, k: i32) -> Result<Field> {
    check_index(k)?;
    Ok(f.apply_real_multiplier(&freq_mask(f.grid(), k)))
}

/// `P_I f` for the integer interval `[lo, hi]`.
pub fn project_interval(f: &Field, lo: i32, hi: i32) -> Result<Field> {
    check_index(lo.max(-1))?;
    if hi < lo {
        return Err(Error::param("interval", format!("empty interval [{lo}, {hi}]")));
    }
    let mult: Vec<f64> = f.grid().wavenumbers().iter().map(|&k| psi_interval(lo, hi, k)).collect();
    Ok(f.apply_real_multiplier(&mult))
}

/// `Q_j f`.
pub fn localize_phys(f: &Field, j: i32) -> Result<Field> {
    check_index(j)?;
    Ok(f.map_with_x(|x, v| v * psi_k_unchecked(j, x)))
}

/// Values of `ψ_k` on the grid's wavenumbers (FFT order).
pub fn freq_mask(grid: &Grid, k: i32) -> Vec<f64> {
    grid.wavenumbers().iter().map(|&xi| psi_k_unchecked(k, xi)).collect()
}

/// Default truncation bounds `(j_max, k_max) = (⌈log₂ L⌉, ⌈log₂ ξ_max⌉)`.
pub fn default_truncation(grid: &Grid) -> (i32, i32) {
    let j = grid.box_length().log2().ceil() as i32;
    let k = grid.xi_max().log2().ceil() as i32;
    (j.max(-1), k.max(-1))
}

/// The family `{Q_j P_k f}` for `-1 ≤ j ≤ j_max`, `-1 ≤ k ≤ k_max`.
#[derive(Debug, Clone)]
pub struct DyadicDecomposition {
    source: Field,
    j_max: i32,
    k_max: i32,
    components: Vec<Field>,
}

impl DyadicDecomposition {
    pub fn new(f: &Field, j_max: i32, k_max: i32, exec: Exec) -> Result<Self> {
        check_index(j_max)?;
        check_index(k_max)?;
        let nk = (k_max + 2) as usize;
        let nj = (j_max + 2) as usize;
        let freq: Vec<Field> = exec.map_range(nk, |ki| {
            f.apply_real_multiplier(&freq_mask(f.grid(), ki as i32 - 1))
        });
        let components = exec.map_range(nj * nk, |idx| {
            let j = (idx / nk) as i32 - 1;
            let k = idx % nk;
            freq[k].map_with_x(|x, v| v * psi_k_unchecked(j, x))
        });
        Ok(DyadicDecomposition { source: f.clone(), j_max, k_max, components })
    }

    pub fn with_default_truncation(f: &Field, exec: Exec) -> Result<Self> {
        let (j, k) = default_truncation(f.grid());
        Self::new(f, j, k, exec)
    }

    pub fn source(&self) -> &Field {
        &self.source
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    /// `Q_j P_k f`, or `None` outside the truncation range.
    pub fn component(&self, j: i32, k: i32) -> Option<&Field> {
        if j < -1 || k < -1 || j > self.j_max || k > self.k_max {
            return None;
        }
        let nk = (self.k_max + 2) as usize;
        Some(&self.components[(j + 1) as usize * nk + (k + 1) as usize])
    }

    /// Iterate `((j, k), Q_j P_k f)`.
    pub fn iter(&self) -> impl Iterator<Item = ((i32, i32), &Field)> {
        let nk = (self.k_max + 2) as usize;
        self.components
            .iter()
            .enumerate()
            .map(move |(idx, f)| (((idx / nk) as i32 - 1, (idx % nk) as i32 - 1), f))
    }

    /// `Σ_{j,k} Q_j P_k f` over the truncation range.
    pub fn resum(&self) -> Field {
        let grid: &Arc<Grid> = self.source.grid();
        let mut acc = vec![Complex64::new(0.0, 0.0); grid.n()];
        for f in &self.components {
            for (a, v) in acc.iter_mut().zip(f.values()) {
                *a += *v;
            }
        }
        Field::new(grid.clone(), acc).expect("length matches grid")
    }
}

/// `(k₁,k₂) ∈ X_k¹`.
pub fn in_x1(k: i32, k1: i32, k2: i32) -> bool {
    k1 >= -1 && k2 >= -1 && (k1.max(k2) - k).abs() <= 8
}

/// `(k₁,k₂) ∈ X_k²`.
pub fn in_x2(k: i32, k1: i32, k2: i32) -> bool {
    k1 >= -1 && k2 >= -1 && k1.max(k2) >= k + 8 && (k1 - k2).abs() <= 8
}

/// Membership in `X_k = X_k¹ ∪ X_k²`, the pairs for which
/// `P_k(P_{k₁}f · P_{k₂}g)` can be nonzero.
pub fn interaction_set_x(k: i32) -> impl Fn(i32, i32) -> bool {
    move |k1, k2| in_x1(k, k1, k2) || in_x2(k, k1, k2)
}

fn sorted3(a: i32, b: i32, c: i32) -> [i32; 3] {
    let mut v = [a, b, c];
    v.sort_unstable();
    v
}

/// `(k₁,k₂,k₃) ∈ Y_k¹`.
pub fn in_y1(k: i32, k1: i32, k2: i32, k3: i32) -> bool {
    let [lo, _, hi] = sorted3(k1, k2, k3);
    lo >= -1 && (hi - k).abs() <= 4
}

/// `(k₁,k₂,k₃) ∈ Y_k²`.
pub fn in_y2(k: i32, k1: i32, k2: i32, k3: i32) -> bool {
    let [lo, med, hi] = sorted3(k1, k2, k3);
    lo >= -1 && k + 4 <= hi && hi <= med + 4
}

/// Membership in `Y_k = Y_k¹ ∪ Y_k²`.
pub fn interaction_set_y(k: i32) -> impl Fn(i32, i32, i32) -> bool {
    move |k1, k2, k3| in_y1(k, k1, k2, k3) || in_y2(k, k1, k2, k3)
}

/// Grid-level Bernstein constant `‖P_k f‖_∞ / (2^{k/2} ‖P_k f‖_{L²})`.
pub fn bernstein_ratio(f: &Field, k: i32) -> Result<f64> {
    let p = project_freq(f, k)?;
    let l2 = p.l2_norm();
    if l2 == 0.0 {
        return Err(Error::Degenerate("projection vanishes".into()));
    }
    Ok(p.sup_norm() / ((2f64).powf(k as f64 / 2.0) * l2))
}

/// Summary of the partition-of-unity checks run by `lp-check`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PartitionReport {
    pub samples: usize,
    pub k_max: i32,
    pub max_freq_partition_error: f64,
    pub max_phys_partition_error: f64,
    pub max_projection_error: f64,
    pub max_localization_error: f64,
    pub bernstein_constants: Vec<(i32, f64)>,
}

impl PartitionReport {
    pub fn passed(&self) -> bool {
        self.max_freq_partition_error <= 1e-12
            && self.max_phys_partition_error <= 1e-12
            && self.max_projection_error <= 1e-10
            && self.max_localization_error <= 1e-12
    }
}

/// Partition-of-unity suite: pointwise sums of `ψ_k` at `samples` points in
/// `[0, 2^{k_max}·5/4]`, `Σ_k P_k f = f` for a band-limited field on an
/// `n = 1024` grid, and `Σ_j Q_j f = f` on the same grid.
pub fn partition_check(samples: usize, exec: Exec) -> Result<PartitionReport> {
    use rand::{Rng, SeedableRng};
    let k_max = 20;
    let reach = (2f64).powi(k_max) * PSI_INNER;
    let errs = exec.map_range(samples, |i| {
        // log-spaced coverage of every annulus plus the origin
        let x = if i == 0 { 0.0 } else { reach * (2f64).powf(-22.0 * (i as f64) / samples as f64) };
        let s: f64 = (-1..=k_max).map(|k| psi_k_unchecked(k, x)).sum();
        (s - 1.0).abs()
    });
    let max_freq_partition_error = errs.into_iter().fold(0.0, f64::max);
    let max_phys_partition_error = max_freq_partition_error;

    let grid = crate::spectral::make_grid(1024, 64.0 * std::f64::consts::PI)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20240601);
    // band-limited: random coefficients on |ξ| ≤ 6, smooth envelope
    let coeffs: Vec<Complex64> = grid
        .wavenumbers()
        .iter()
        .map(|&xi| {
            if xi.abs() <= 6.0 {
                let env = (-(xi * xi) / 8.0).exp();
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * env
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    let f = crate::spectral::Spectrum::from_coeffs(grid.clone(), coeffs)?.to_field();
    let (j_top, k_top) = default_truncation(&grid);
    let parts = exec.map_range((k_top + 2) as usize, |ki| {
        f.apply_real_multiplier(&freq_mask(&grid, ki as i32 - 1))
    });
    let mut sum = Field::zeros(&grid);
    for p in &parts {
        sum = sum.add(p)?;
    }
    let scale = f.sup_norm();
    let max_projection_error = sum.sub(&f)?.sup_norm() / scale;
    let mut lsum = Field::zeros(&grid);
    for j in -1..=j_top {
        lsum = lsum.add(&localize_phys(&f, j)?)?;
    }
    let max_localization_error = lsum.sub(&f)?.sup_norm() / scale;
    let bernstein_constants = (0..=3).map(|k| Ok((k, bernstein_ratio(&f, k)?))).collect::<Result<_>>()?;
    Ok(PartitionReport {
        samples,
        k_max,
        max_freq_partition_error,
        max_phys_partition_error,
        max_projection_error,
        max_localization_error,
        bernstein_constants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{make_grid, Spectrum};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psi_shape() {
        assert_eq!(psi(0.0), 1.0);
        assert_eq!(psi(1.25), 1.0);
        assert_eq!(psi(-1.25), 1.0);
        assert_eq!(psi(1.6), 0.0);
        assert_eq!(psi(3.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=1000 {
            let x = 1.25 + 0.35 * i as f64 / 1000.0;
            let v = psi(x);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert!((psi(1.3) - psi(-1.3)).abs() == 0.0);
    }

    #[test]
    fn psi_derivatives_bounded() {
        // finite-difference derivatives up to order 8 stay bounded across the transition
        let h = 1e-2;
        for i in 0..200 {
            let x = 1.2 + 0.45 * i as f64 / 200.0;
            let mut d = 0.0;
            for (m, c) in binomials(8).iter().enumerate() {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                d += sign * c * psi(x + (4.0 - m as f64) * h);
            }
            let d8 = (d / h.powi(8)).abs();
            assert!(d8.is_finite() && d8 < 1e16, "x={x} d8={d8}");
        }
    }

    fn binomials(n: usize) -> Vec<f64> {
        let mut row = vec![1.0];
        for _ in 0..n {
            let mut next = vec![1.0; row.len() + 1];
            for i in 1..row.len() {
                next[i] = row[i - 1] + row[i];
            }
            row = next;
        }
        row
    }

    #[test]
    fn psi_k_examples() {
        for x in [0.3, 7.0, 1000.0] {
            let s: f64 = (-1..=20).map(|k| psi_k(k, x).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(psi_k(-1, 0.6).unwrap(), 1.0);
        assert_eq!(psi_k(3, 1.0).unwrap(), 0.0);
        assert!(matches!(psi_k(-2, 1.0), Err(Error::BadDyadicIndex(-2))));
    }

    #[test]
    fn psi_k_support() {
        for k in 0..10 {
            let (lo, hi) = support(k);
            for i in 0..2000 {
                let x = 2f64.powi(k + 2) * i as f64 / 2000.0;
                let v = psi_k_unchecked(k, x);
                if x < lo || x > hi {
                    assert_eq!(v, 0.0, "k={k} x={x}");
                }
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn projection_of_single_mode() {
        // ψ_1(3) = ψ(3/2) − ψ(3): only the first term survives.
        let g = make_grid(64, 2.0 * std::f64::consts::PI).unwrap();
        let f = Field::from_fn(&g, |x| Complex64::from_polar(1.0, 3.0 * x));
        let p = project_freq(&f, 1).unwrap();
        let expected = smooth_step_down(1.5, 1.25, 1.6);
        let oracle = {
            let hi = (-1.0 / (1.6 - 1.5f64)).exp();
            let lo = (-1.0 / (1.5 - 1.25f64)).exp();
            hi / (hi + lo)
        };
        assert!((expected - oracle).abs() < 1e-15);
        assert!(expected > 0.0 && expected <= 1.0);
        for (a, b) in p.values().iter().zip(f.values()) {
            assert!((a - b * oracle).norm() < 1e-12);
        }
    }

    #[test]
    fn separated_projections_annihilate() {
        let g = make_grid(512, 40.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = Field::new(
            g.clone(),
            (0..512).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect(),
        )
        .unwrap();
        for k in -1..5 {
            for k2 in (k + 2)..7 {
                let pp = project_freq(&project_freq(&f, k2).unwrap(), k).unwrap();
                assert!(pp.sup_norm() < 1e-14, "k={k} k'={k2}");
            }
        }
    }

    #[test]
    fn projection_idempotent_up_to_neighbors() {
        let g = make_grid(256, 30.0).unwrap();
        let f = Field::from_real_fn(&g, |x| (-x * x / 3.0).exp() * (2.0 * x).cos());
        for k in 0..3 {
            let p = project_freq(&f, k).unwrap();
            let pp = project_interval(&p, k - 1, k + 1).unwrap();
            assert!(p.sub(&pp).unwrap().sup_norm() < 1e-13);
        }
    }

    #[test]
    fn localization_examples() {
        let g = make_grid(256, 20.0).unwrap();
        let f = Field::from_real_fn(&g, |x| if x.abs() <= 0.5 { (1.0 - 4.0 * x * x).powi(2) } else { 0.0 });
        let q = localize_phys(&f, -1).unwrap();
        assert!(q.sub(&f).unwrap().sup_norm() == 0.0);
        let h = Field::from_real_fn(&g, |x| (x / 3.0).sin() + 0.1 * x);
        let mut s = Field::zeros(&g);
        for j in -1..=5 {
            let qj = localize_phys(&h, j).unwrap();
            assert!(qj.l2_norm() <= h.l2_norm());
            s = s.add(&qj).unwrap();
        }
        assert!(s.sub(&h).unwrap().sup_norm() < 1e-13);
        assert!(localize_phys(&h, -3).is_err());
    }

    #[test]
    fn decomposition_resums() {
        let g = make_grid(256, 64.0).unwrap();
        let f = Field::from_real_fn(&g, |x| (-x * x / 4.0).exp());
        let d = DyadicDecomposition::with_default_truncation(&f, Exec::default()).unwrap();
        assert!(d.resum().sub(&f).unwrap().sup_norm() < 1e-12);
        assert!(d.component(d.j_max() + 1, 0).is_none());
        assert_eq!(d.iter().count(), ((d.j_max() + 2) * (d.k_max() + 2)) as usize);
    }

    #[test]
    fn interaction_set_examples() {
        let k = 10;
        assert!(in_x1(k, k, k - 20 + 9));
        assert!(interaction_set_x(k)(k, k - 11));
        assert!(in_x2(k, k + 9, k + 9));
        assert!(!interaction_set_x(k)(k + 20, k + 3));
        assert!(interaction_set_y(3)(3, -1, 0));
        assert!(in_y2(0, 9, 8, -1));
        assert!(!interaction_set_y(0)(9, 3, -1));
    }

    #[test]
    fn interaction_sets_cover_nonzero_products() {
        // Oracle: random spectra on an n = 256 lattice scaled to the triple's
        // largest band, product spectrum by non-circular convolution.
        let n = 256i64;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for k1 in -1..=12 {
            for k2 in -1..=12 {
                let top = support(k1.max(k2)).1;
                let dk = 2.0 * top / (n as f64 / 2.0 - 1.0);
                let a: Vec<f64> = (-n / 2..n / 2)
                    .map(|m| psi_k_unchecked(k1, m as f64 * dk) * rng.gen_range(0.5..1.0))
                    .collect();
                let b: Vec<f64> = (-n / 2..n / 2)
                    .map(|m| psi_k_unchecked(k2, m as f64 * dk) * rng.gen_range(0.5..1.0))
                    .collect();
                let mut conv = vec![0.0; 2 * n as usize];
                for (i, &x) in a.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    for (j, &y) in b.iter().enumerate() {
                        conv[i + j] += x * y;
                    }
                }
                let scale = conv.iter().cloned().fold(0.0, f64::max);
                if scale == 0.0 {
                    continue;
                }
                for k in -1..=12 {
                    let hit = conv.iter().enumerate().any(|(idx, &v)| {
                        let xi = (idx as i64 - n) as f64 * dk;
                        psi_k_unchecked(k, xi) * v > 1e-12 * scale
                    });
                    if hit {
                        assert!(interaction_set_x(k)(k1, k2), "k={k} k1={k1} k2={k2}");
                    }
                }
            }
        }
    }

    #[test]
    fn partition_suite_passes() {
        let r = partition_check(10_000, Exec::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        for (_, c) in &r.bernstein_constants {
            assert!(c.is_finite() && *c > 0.0);
        }
    }

    #[test]
    fn band_limited_projection_sum() {
        let g = make_grid(128, 16.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let coeffs = g
            .wavenumbers()
            .iter()
            .map(|&xi| if xi.abs() < 8.0 { Complex64::new(rng.gen(), rng.gen()) } else { 0.0.into() })
            .collect();
        let f = Spectrum::from_coeffs(g.clone(), coeffs).unwrap().to_field();
        let mut s = Field::zeros(&g);
        for k in -1..=3 {
            s = s.add(&project_freq(&f, k).unwrap()).unwrap();
        }
        assert!(s.sub(&f).unwrap().sup_norm() <= 1e-10 * f.sup_norm());
    }
}
